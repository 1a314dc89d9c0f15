//! Shared serialization, deterministic RNG streams, and run manifests.

pub mod rng;

pub use rng::{seeded_rng, splitmix64, standard_normal, Stream};
