use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io_core::rng::{seeded_rng, splitmix64, unit_f64};
use crate::math::{Aabb, Vec3};
use crate::transform::Transform;

use super::{RadianceField, Ray, SceneError};

type V3 = Vec3<f64>;

/// Solid primitive with a signed distance and an analytic ray intersection.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Primitive {
    Sphere {
        center: V3,
        radius: f64,
    },
    /// Axis-aligned box rotated by `yaw` radians about +z.
    Cuboid {
        center: V3,
        half: V3,
        #[serde(default)]
        yaw: f64,
    },
}

impl Primitive {
    pub fn sdf(&self, p: V3) -> f64 {
        match *self {
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Cuboid { center, half, yaw } => {
                let local = rotate_z(p - center, -yaw);
                let q = local.abs() - half;
                let outside = q.component_max(Vec3::zero()).norm();
                outside + q.max_element().min(0.0)
            }
        }
    }

    /// Smallest positive ray parameter where the surface is crossed.
    pub fn first_hit(&self, ray: &Ray<f64>) -> Option<f64> {
        const T_MIN: f64 = 1e-9;
        match *self {
            Primitive::Sphere { center, radius } => {
                let oc = ray.origin - center;
                let b = oc.dot(ray.dir);
                let disc = b * b - (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let t0 = -b - s;
                let t1 = -b + s;
                if t0 > T_MIN {
                    Some(t0)
                } else if t1 > T_MIN {
                    Some(t1)
                } else {
                    None
                }
            }
            Primitive::Cuboid { center, half, yaw } => {
                let o = rotate_z(ray.origin - center, -yaw);
                let d = rotate_z(ray.dir, -yaw);
                let local = Aabb::new(-half, half);
                let (t0, t1) = local.ray_range(o, d)?;
                if t1 < T_MIN {
                    return None;
                }
                Some(if t0 > T_MIN { t0 } else { t1 })
            }
        }
    }
}

fn rotate_z(v: V3, angle: f64) -> V3 {
    let (s, c) = angle.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Surface color as a function of position (in scene coordinates, so textures
/// stay attached to geometry under a world transform).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Texture {
    Solid {
        color: [f64; 3],
    },
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        cell: f64,
    },
    /// Smooth tri-band sinusoid mix; good gradients for photometric fits.
    Waves {
        base: [f64; 3],
        amp: f64,
        freq: [[f64; 3]; 3],
        phase: [f64; 3],
    },
}

impl Texture {
    pub fn color(&self, p: V3) -> [f64; 3] {
        match self {
            Texture::Solid { color } => *color,
            Texture::Checker { a, b, cell } => {
                let parity = (p.x / cell).floor() + (p.y / cell).floor() + (p.z / cell).floor();
                if (parity as i64).rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Texture::Waves {
                base,
                amp,
                freq,
                phase,
            } => {
                let mut out = [0.0; 3];
                for ch in 0..3 {
                    let f = Vec3::from_array(freq[ch]);
                    let v = base[ch] + amp * (f.dot(p) + phase[ch]).sin();
                    out[ch] = v.clamp(0.0, 1.0);
                }
                out
            }
        }
    }
}

/// How family-generated primitives get painted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextureMode {
    #[default]
    Waves,
    Checker,
    Solid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    #[serde(flatten)]
    pub shape: Primitive,
    /// Explicit texture; otherwise one is generated from the texture mode.
    #[serde(default)]
    pub texture: Option<Texture>,
}

/// Randomized group of primitives resolved at generation time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub count: usize,
    /// Size range: sphere radius or cuboid half-extent scale.
    pub size: [f64; 2],
    /// Centers are drawn uniformly inside a ball of this radius.
    pub region_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Spheres,
    Cuboids,
}

/// Sparse high-frequency shell outside the region of interest, emulating
/// reconstruction artifacts that differ between the two fields.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ClutterSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    /// Fraction of shell voxels that get junk density.
    pub fill: f64,
    pub sigma: f64,
}

impl Default for ClutterSpec {
    fn default() -> Self {
        Self {
            r_inner: 1.4,
            r_outer: 1.8,
            fill: 0.04,
            sigma: 60.0,
        }
    }
}

fn default_resolution() -> [usize; 3] {
    [128, 128, 128]
}

fn default_half_extent() -> f64 {
    1.45
}

fn default_background() -> [f64; 3] {
    [0.82, 0.86, 0.9]
}

fn default_sigma_max() -> f64 {
    300.0
}

fn default_band_voxels() -> f64 {
    1.0
}

fn default_version() -> u32 {
    1
}

/// Declarative description of a procedural radiance-field scene.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SceneSpec {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 3],
    /// Cubic bounds half extent centered at the origin.
    #[serde(default = "default_half_extent")]
    pub half_extent: f64,
    #[serde(default = "default_background")]
    pub background: [f64; 3],
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    /// Width of the density ramp across the surface, in voxels.
    #[serde(default = "default_band_voxels")]
    pub surface_band_voxels: f64,
    #[serde(default)]
    pub texture_mode: TextureMode,
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub families: Vec<FamilySpec>,
    #[serde(default)]
    pub clutter: Option<ClutterSpec>,
}

impl SceneSpec {
    pub fn bounds(&self) -> Aabb<f64> {
        Aabb::centered_cube(self.half_extent)
    }

    /// Single unit sphere at the origin; handy for tests.
    pub fn single_unit_sphere() -> Self {
        Self {
            version: 1,
            resolution: [96, 96, 96],
            half_extent: default_half_extent(),
            background: default_background(),
            sigma_max: default_sigma_max(),
            surface_band_voxels: 1.0,
            texture_mode: TextureMode::Waves,
            primitives: vec![PrimitiveSpec {
                shape: Primitive::Sphere {
                    center: Vec3::zero(),
                    radius: 1.0,
                },
                texture: None,
            }],
            families: vec![],
            clutter: None,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.version != 1 {
            return Err(SceneError::Config(format!(
                "unsupported scene spec version {}",
                self.version
            )));
        }
        if self.resolution.iter().any(|&n| n < 8) {
            return Err(SceneError::Config(format!(
                "resolution must be at least 8 per axis, got {:?}",
                self.resolution
            )));
        }
        if self.primitives.is_empty() && self.families.iter().all(|f| f.count == 0) {
            return Err(SceneError::Config(
                "scene spec declares no primitives".into(),
            ));
        }
        if self.half_extent <= 0.0 {
            return Err(SceneError::Config("half_extent must be positive".into()));
        }
        Ok(())
    }
}

/// Concrete primitive list after family randomization; what the voxelizer
/// and the SDF oracle both consume.
#[derive(Clone, Debug)]
pub struct ResolvedScene {
    pub resolution: [usize; 3],
    pub bounds: Aabb<f64>,
    pub background: [f64; 3],
    pub sigma_max: f64,
    pub band_voxels: f64,
    pub items: Vec<(Primitive, Texture)>,
    pub clutter: Option<ClutterSpec>,
}

const PALETTE: [[f64; 3]; 8] = [
    [0.85, 0.3, 0.25],
    [0.25, 0.55, 0.85],
    [0.9, 0.75, 0.3],
    [0.35, 0.75, 0.4],
    [0.7, 0.4, 0.8],
    [0.9, 0.55, 0.25],
    [0.3, 0.75, 0.75],
    [0.75, 0.35, 0.5],
];

/// Resolves families into primitives and assigns textures; deterministic for
/// a given (spec, seed).
pub fn resolve_scene(spec: &SceneSpec, seed: u64) -> Result<ResolvedScene, SceneError> {
    spec.validate()?;
    let mut rng = seeded_rng(seed, "scene-resolve");
    let mut shapes: Vec<(Primitive, Option<Texture>)> = spec
        .primitives
        .iter()
        .map(|p| (p.shape, p.texture.clone()))
        .collect();

    for family in &spec.families {
        for _ in 0..family.count {
            let center = loop {
                let v = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if v.norm() <= 1.0 {
                    break v * family.region_radius;
                }
            };
            let size = rng.gen_range(family.size[0]..=family.size[1]);
            let shape = match family.kind {
                FamilyKind::Spheres => Primitive::Sphere {
                    center,
                    radius: size,
                },
                FamilyKind::Cuboids => Primitive::Cuboid {
                    center,
                    half: Vec3::new(
                        size * rng.gen_range(0.6..1.4),
                        size * rng.gen_range(0.6..1.4),
                        size * rng.gen_range(0.6..1.4),
                    ),
                    yaw: rng.gen_range(0.0..std::f64::consts::PI),
                },
            };
            shapes.push((shape, None));
        }
    }

    let items = shapes
        .into_iter()
        .enumerate()
        .map(|(i, (shape, tex))| {
            let tex = tex.unwrap_or_else(|| {
                let base = PALETTE[i % PALETTE.len()];
                match spec.texture_mode {
                    TextureMode::Solid => Texture::Solid { color: base },
                    TextureMode::Checker => Texture::Checker {
                        a: base,
                        b: [base[0] * 0.35, base[1] * 0.35, base[2] * 0.35],
                        cell: rng.gen_range(0.12..0.22),
                    },
                    TextureMode::Waves => {
                        let mut freq = [[0.0; 3]; 3];
                        let mut phase = [0.0; 3];
                        for ch in 0..3 {
                            for f in &mut freq[ch] {
                                *f = rng.gen_range(-9.0..9.0);
                            }
                            phase[ch] = rng.gen_range(0.0..std::f64::consts::TAU);
                        }
                        Texture::Waves {
                            base,
                            amp: 0.3,
                            freq,
                            phase,
                        }
                    }
                }
            });
            (shape, tex)
        })
        .collect();

    Ok(ResolvedScene {
        resolution: spec.resolution,
        bounds: spec.bounds(),
        background: spec.background,
        sigma_max: spec.sigma_max,
        band_voxels: spec.surface_band_voxels,
        items,
        clutter: spec.clutter,
    })
}

/// Ground-truth geometry for a resolved scene, optionally observed through a
/// world transform (`scene_from_world`). Clutter is not part of the oracle.
#[derive(Clone, Debug)]
pub struct SdfOracle {
    primitives: Vec<Primitive>,
    scene_from_world: Transform<f64>,
}

impl SdfOracle {
    pub fn new(resolved: &ResolvedScene, scene_from_world: Option<&Transform<f64>>) -> Self {
        Self {
            primitives: resolved.items.iter().map(|(p, _)| *p).collect(),
            scene_from_world: scene_from_world.copied().unwrap_or_else(Transform::identity),
        }
    }

    /// Signed distance in world units to the union of primitives.
    pub fn sdf(&self, x_world: V3) -> f64 {
        let xs = self.scene_from_world.apply_point(x_world);
        let d = self
            .primitives
            .iter()
            .map(|p| p.sdf(xs))
            .fold(f64::INFINITY, f64::min);
        d / self.scene_from_world.scale
    }

    /// First surface crossing along a world-space ray, analytic per primitive.
    pub fn first_hit(&self, ray: &Ray<f64>) -> Option<f64> {
        let t = &self.scene_from_world;
        let scene_ray = Ray::new(t.apply_point(ray.origin), t.apply_direction(ray.dir));
        let hit = self
            .primitives
            .iter()
            .filter_map(|p| p.first_hit(&scene_ray))
            .fold(f64::INFINITY, f64::min);
        (hit < f64::INFINITY).then(|| hit / t.scale)
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn clutter_hash(ix: usize, iy: usize, iz: usize, seed: u64, salt: u64) -> f64 {
    let packed = (ix as u64) ^ ((iy as u64) << 21) ^ ((iz as u64) << 42);
    unit_f64(splitmix64(packed ^ splitmix64(seed ^ salt)))
}

/// Bakes the resolved scene into a voxel grid.
///
/// `scene_from_world` maps field (world) coordinates into scene coordinates,
/// so passing the inverse of a ground-truth transform produces a field whose
/// content is rigidly re-posed. Clutter is generated in world coordinates
/// from `clutter_seed` and is independent of the content.
pub fn voxelize(
    resolved: &ResolvedScene,
    scene_from_world: Option<&Transform<f64>>,
    clutter_seed: u64,
) -> Result<RadianceField<f64>, SceneError> {
    let [nx, ny, nz] = resolved.resolution;
    let bounds = resolved.bounds;
    let extent = bounds.extent();
    let vs = Vec3::new(
        extent.x / nx as f64,
        extent.y / ny as f64,
        extent.z / nz as f64,
    );
    let band = resolved.band_voxels * (vs.x + vs.y + vs.z) / 3.0;
    let t = scene_from_world.copied().unwrap_or_else(Transform::identity);

    let voxels: Vec<(f64, [f64; 3])> = (0..nz)
        .into_par_iter()
        .flat_map_iter(|iz| {
            let resolved = resolved.clone();
            (0..ny).flat_map(move |iy| {
                let resolved = resolved.clone();
                (0..nx).map(move |ix| {
                    let x_w = bounds.min
                        + Vec3::new(
                            vs.x * (ix as f64 + 0.5),
                            vs.y * (iy as f64 + 0.5),
                            vs.z * (iz as f64 + 0.5),
                        );
                    let x_s = t.apply_point(x_w);
                    let mut best = f64::INFINITY;
                    let mut best_item = usize::MAX;
                    for (i, (prim, _)) in resolved.items.iter().enumerate() {
                        let d = prim.sdf(x_s);
                        if d < best {
                            best = d;
                            best_item = i;
                        }
                    }
                    let sdf_world = best / t.scale;
                    let mut sigma = resolved.sigma_max * smoothstep(0.5 - sdf_world / band);
                    let mut color = if best_item != usize::MAX && sigma > 0.0 {
                        resolved.items[best_item].1.color(x_s)
                    } else {
                        [0.0; 3]
                    };

                    if let Some(cl) = &resolved.clutter {
                        let r = x_w.norm();
                        if r >= cl.r_inner && r <= cl.r_outer {
                            let gate = clutter_hash(ix, iy, iz, clutter_seed, 0x11);
                            if gate < cl.fill {
                                let level =
                                    cl.sigma * (0.5 + clutter_hash(ix, iy, iz, clutter_seed, 0x22));
                                if level > sigma {
                                    sigma = level;
                                    color = [
                                        clutter_hash(ix, iy, iz, clutter_seed, 0x33),
                                        clutter_hash(ix, iy, iz, clutter_seed, 0x44),
                                        clutter_hash(ix, iy, iz, clutter_seed, 0x55),
                                    ];
                                }
                            }
                        }
                    }
                    (sigma, color)
                })
            })
        })
        .collect();

    let sigma: Vec<f64> = voxels.iter().map(|v| v.0).collect();
    let rgb: Vec<[f64; 3]> = voxels.iter().map(|v| v.1).collect();
    let field = RadianceField::new((nx, ny, nz), bounds, sigma, rgb, resolved.background)?;
    if field.max_sigma() <= 0.0 {
        return Err(SceneError::Config(
            "no primitive intersects the field bounds".into(),
        ));
    }
    Ok(field)
}

/// Generates a synthetic radiance field together with its ground-truth
/// signed-distance oracle. Deterministic for a given (spec, seed).
pub fn make_scene(
    spec: &SceneSpec,
    seed: u64,
) -> Result<(RadianceField<f64>, SdfOracle), SceneError> {
    let resolved = resolve_scene(spec, seed)?;
    let clutter_seed = splitmix64(seed ^ 0xc1u64);
    let field = voxelize(&resolved, None, clutter_seed)?;
    let oracle = SdfOracle::new(&resolved, None);
    Ok((field, oracle))
}

/// Built-in asymmetric scenes used by the experiment protocol.
pub fn scene_preset(index: usize) -> SceneSpec {
    let sphere = |center: V3, radius: f64| PrimitiveSpec {
        shape: Primitive::Sphere { center, radius },
        texture: None,
    };
    let cuboid = |center: V3, half: V3, yaw: f64| PrimitiveSpec {
        shape: Primitive::Cuboid { center, half, yaw },
        texture: None,
    };
    let mut spec = SceneSpec::single_unit_sphere();
    spec.primitives.clear();
    match index % 5 {
        0 => {
            spec.primitives = vec![
                sphere(Vec3::new(0.35, 0.1, -0.1), 0.42),
                sphere(Vec3::new(-0.45, -0.3, 0.15), 0.3),
                sphere(Vec3::new(-0.05, 0.45, 0.33), 0.2),
            ];
        }
        1 => {
            spec.primitives = vec![
                cuboid(Vec3::new(0.0, 0.0, -0.5), Vec3::new(0.6, 0.45, 0.08), 0.0),
                cuboid(Vec3::new(-0.15, 0.05, -0.26), Vec3::new(0.22, 0.18, 0.16), 0.4),
                cuboid(Vec3::new(0.3, -0.18, -0.1), Vec3::new(0.14, 0.2, 0.12), -0.7),
                sphere(Vec3::new(-0.12, -0.3, 0.05), 0.16),
            ];
        }
        2 => {
            spec.primitives = vec![
                cuboid(Vec3::new(0.0, 0.0, -0.6), Vec3::new(0.75, 0.75, 0.05), 0.0),
                cuboid(Vec3::new(-0.7, 0.0, -0.15), Vec3::new(0.05, 0.75, 0.4), 0.0),
                cuboid(Vec3::new(0.2, 0.25, -0.38), Vec3::new(0.2, 0.14, 0.17), 0.5),
                sphere(Vec3::new(-0.25, -0.35, -0.33), 0.22),
                cuboid(Vec3::new(0.35, -0.4, -0.45), Vec3::new(0.12, 0.12, 0.1), -0.3),
            ];
        }
        3 => {
            spec.primitives = vec![
                cuboid(Vec3::new(0.0, 0.05, 0.0), Vec3::new(0.3, 0.18, 0.22), 0.8),
                sphere(Vec3::new(0.55, 0.25, 0.1), 0.2),
                sphere(Vec3::new(-0.5, 0.3, -0.15), 0.26),
                sphere(Vec3::new(0.1, -0.55, -0.05), 0.17),
                sphere(Vec3::new(-0.15, 0.1, 0.5), 0.14),
            ];
        }
        _ => {
            spec.families = vec![
                FamilySpec {
                    kind: FamilyKind::Spheres,
                    count: 3,
                    size: [0.14, 0.3],
                    region_radius: 0.55,
                },
                FamilySpec {
                    kind: FamilyKind::Cuboids,
                    count: 2,
                    size: [0.12, 0.22],
                    region_radius: 0.5,
                },
            ];
        }
    }
    spec
}
