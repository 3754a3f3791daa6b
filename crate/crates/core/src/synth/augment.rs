use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::exec;
use crate::geometry::{Aabb, Point, Vec3};
use crate::penetration::VoxelGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub sample_count: usize,
    /// Sampling sphere radius around the object center (meters).
    pub radius: f64,
    /// Allowed |z - original pelvis z| (meters).
    pub height_band: f64,
    /// Standing-room cuboid (x, y, z) extents (meters).
    pub cuboid: [f64; 3],
    pub output_count: usize,
    /// Plausible pelvis heights above the ground (meters).
    pub ground_band: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            sample_count: 5000,
            radius: 1.0,
            height_band: 0.15,
            cuboid: [0.6, 0.6, 1.8],
            output_count: 10,
            ground_band: [0.6, 1.4],
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = self.radius > 0.0 && self.height_band > 0.0 && self.cuboid.iter().all(|&c| c > 0.0);
        if !positive || self.sample_count == 0 || self.output_count == 0 {
            return Err(SynthError::InvalidConfig("augment parameters must be positive".into()));
        }
        if self.output_count > self.sample_count {
            return Err(SynthError::InvalidConfig("output_count exceeds sample_count".into()));
        }
        if !(self.ground_band[0] < self.ground_band[1]) {
            return Err(SynthError::InvalidConfig("ground band is empty".into()));
        }
        Ok(())
    }
}

/// Scene-side inputs for [`augment_pelvis`].
pub struct AugmentContext<'a> {
    /// Downward-filled occupancy without the floor; should cover the
    /// sampling sphere plus half the cuboid footprint.
    pub grid: &'a VoxelGrid,
    /// x-y extent of the walkable scene.
    pub scene_bounds: Aabb,
    pub receptacle_bounds: Aabb,
    pub object_center: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PelvisCandidate {
    pub position: Point,
    pub facing: Vec3,
}

/// Survivors after each filter stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub sampled: usize,
    pub after_sphere: usize,
    pub after_height: usize,
    pub after_room: usize,
    pub returned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentResult {
    pub candidates: Vec<PelvisCandidate>,
    pub report: FilterReport,
    pub seed: u64,
}

/// Standing-room box: centered at `p` in x-y, from the ground up.
pub fn standing_room(p: &Point, dims: [f64; 3]) -> Aabb {
    Aabb::new(
        Point::new(p.x - 0.5 * dims[0], p.y - 0.5 * dims[1], 0.0),
        Point::new(p.x + 0.5 * dims[0], p.y + 0.5 * dims[1], dims[2]),
    )
}

pub fn room_is_free(grid: &VoxelGrid, p: &Point, dims: [f64; 3]) -> bool {
    !grid.any_occupied_in(&standing_room(p, dims))
}

fn sphere_filter(ctx: &AugmentContext<'_>, cfg: &AugmentConfig, p: &Point) -> bool {
    let r = &ctx.receptacle_bounds;
    let over_receptacle = r.contains_xy(p) && p.z >= r.max.z;
    !over_receptacle && p.z >= cfg.ground_band[0] && p.z <= cfg.ground_band[1] && ctx.scene_bounds.contains_xy(p)
}

/// Sample alternative pelvis positions around an object: uniform points
/// in a sphere, filtered by plausible height, by height relative to the
/// original pelvis and by free standing room, then subsampled uniformly.
pub fn augment_pelvis(
    ctx: &AugmentContext<'_>,
    original_pelvis: &Point,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<AugmentResult, SynthError> {
    cfg.validate()?;
    if !ctx.grid.is_filled() {
        return Err(crate::penetration::PenetrationError::GridNotFilled.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Point> = (0..cfg.sample_count)
        .map(|_| {
            let u: [f64; 3] = UnitBall.sample(&mut rng);
            ctx.object_center + Vec3::from(u) * cfg.radius
        })
        .collect();
    let mut report = FilterReport { sampled: samples.len(), ..Default::default() };

    let stage1: Vec<Point> = samples.into_iter().filter(|p| sphere_filter(ctx, cfg, p)).collect();
    report.after_sphere = stage1.len();
    let stage2: Vec<Point> = stage1
        .into_iter()
        .filter(|p| (p.z - original_pelvis.z).abs() <= cfg.height_band)
        .collect();
    report.after_height = stage2.len();
    let free = exec::map(&stage2, |p| room_is_free(ctx.grid, p, cfg.cuboid));
    let stage3: Vec<Point> = stage2.into_iter().zip(free).filter(|(_, f)| *f).map(|(p, _)| p).collect();
    report.after_room = stage3.len();

    let picked: Vec<Point> = if stage3.len() <= cfg.output_count {
        stage3
    } else {
        let mut idx = rand::seq::index::sample(&mut rng, stage3.len(), cfg.output_count).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| stage3[i]).collect()
    };
    let candidates: Vec<PelvisCandidate> = picked
        .into_iter()
        .filter_map(|p| {
            let facing = (ctx.object_center - p).try_normalize(0.0)?;
            Some(PelvisCandidate { position: p, facing })
        })
        .collect();
    report.returned = candidates.len();
    Ok(AugmentResult { candidates, report, seed })
}

/// Make a grasp target lie ahead of the end of a walk.
///
/// A target already ahead (positive displacement along `walk_dir`) is
/// returned unchanged. Otherwise its along-walk displacement is mirrored
/// (a zero displacement becomes a small step forward). If the mirrored
/// point ends up more than `radius` from the object center it is pulled
/// toward the center onto the sphere of that radius.
pub fn forward_grasp_target(
    last_pelvis: &Point,
    walk_dir: &Vec3,
    target: &Point,
    object_center: &Point,
    radius: f64,
) -> Point {
    let along = (target - last_pelvis).dot(walk_dir);
    if along > 0.0 {
        return *target;
    }
    let reflected = target + walk_dir * ((-along).max(1e-3) - along);
    let off = reflected - object_center;
    if off.norm() <= radius {
        reflected
    } else {
        object_center + off * (radius / off.norm())
    }
}
