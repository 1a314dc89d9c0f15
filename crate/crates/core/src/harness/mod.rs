//! Experiment protocol, metrics, ablations, and reproducible runs.

mod rig;

pub use rig::{camera_rig, RigConfig, RigKind};
