use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::exec;
use crate::geometry::{Aabb, LabelId, MeshQuery, Point, RigidTransform, TriMesh, Vec3};
use crate::penetration::{scene_grid, scene_penetration_points, VoxelGrid, DEFAULT_CELL_BUDGET};

/// Walking motion: per-frame pelvis positions, optionally with full body
/// vertices per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub pelvis: Vec<Point>,
    pub frame_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bodies: Option<Vec<Vec<Point>>>,
}

impl Trajectory {
    pub fn new(pelvis: Vec<Point>, frame_rate: f64) -> Result<Self, SynthError> {
        let t = Self { pelvis, frame_rate, bodies: None };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.pelvis.len() < 2 {
            return Err(SynthError::BadTrajectory("need at least two frames".into()));
        }
        if !self.pelvis.iter().all(|p| p.coords.iter().all(|c| c.is_finite())) {
            return Err(SynthError::BadTrajectory("non-finite pelvis position".into()));
        }
        if !(self.frame_rate > 0.0) {
            return Err(SynthError::BadTrajectory("frame rate must be positive".into()));
        }
        if let Some(b) = &self.bodies {
            if b.len() != self.pelvis.len() {
                return Err(SynthError::BadTrajectory("body frame count differs from pelvis count".into()));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> Point {
        *self.pelvis.last().unwrap()
    }

    /// Horizontal heading of the last non-zero step.
    pub fn end_direction(&self) -> Option<Vec3> {
        self.pelvis.windows(2).rev().find_map(|w| {
            let d = Vec3::new(w[1].x - w[0].x, w[1].y - w[0].y, 0.0);
            (d.norm() > 1e-12).then(|| d.normalize())
        })
    }

    pub fn transformed(&self, t: &RigidTransform) -> Trajectory {
        Trajectory {
            pelvis: self.pelvis.iter().map(|p| t.apply(p)).collect(),
            frame_rate: self.frame_rate,
            bodies: self.bodies.as_ref().map(|b| b.iter().map(|f| f.iter().map(|p| t.apply(p)).collect()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub yaw_steps: usize,
    /// Translation lattice spacing (meters).
    pub lattice_step: f64,
    pub reach_max: f64,
    pub capsule_radius: f64,
    pub voxel_size: f64,
    /// Check the per-frame body vertices instead of capsules when present.
    pub use_body_mesh: bool,
    pub cell_budget: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            yaw_steps: 64,
            lattice_step: 0.25,
            reach_max: 0.8,
            capsule_radius: 0.18,
            voxel_size: 0.05,
            use_body_mesh: false,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

/// One point of the search grid: yaw step `k` about the first pelvis
/// position, then a lattice offset `(i, j)` in units of the step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignCandidate {
    pub yaw_step: usize,
    pub i: i64,
    pub j: i64,
    pub yaw: f64,
    pub offset: Vec3,
    pub final_distance: f64,
}

impl AlignCandidate {
    /// Yaw folded into [0, π].
    pub fn abs_yaw(&self) -> f64 {
        self.yaw.min(TAU - self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Violations {
    pub out_of_bounds_frames: usize,
    pub colliding_frames: usize,
    /// Final pelvis distance to the receptacle beyond `reach_max` (meters).
    pub reach_excess: f64,
}

impl Violations {
    pub fn is_feasible(&self) -> bool {
        self.out_of_bounds_frames == 0 && self.colliding_frames == 0 && self.reach_excess == 0.0
    }

    fn severity(&self) -> (usize, f64) {
        (self.out_of_bounds_frames + self.colliding_frames, self.reach_excess)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResult {
    pub transform: RigidTransform,
    pub candidate: AlignCandidate,
    pub candidates_evaluated: usize,
}

/// Exhaustive search state for [`align_walk`]; exposed so callers can
/// re-check individual candidates.
pub struct WalkAligner<'a> {
    traj: &'a Trajectory,
    cfg: AlignConfig,
    grid: VoxelGrid,
    bounds: Aabb,
    receptacle: MeshQuery,
    pivot: Point,
}

impl<'a> WalkAligner<'a> {
    /// `exclude` lists labels left out of the occupancy (the floor).
    pub fn new(
        traj: &'a Trajectory,
        scene: &TriMesh,
        receptacle: LabelId,
        exclude: &[LabelId],
        cfg: &AlignConfig,
    ) -> Result<Self, SynthError> {
        traj.validate()?;
        if cfg.yaw_steps == 0 || !(cfg.lattice_step > 0.0) || !(cfg.reach_max > 0.0) || !(cfg.capsule_radius > 0.0) {
            return Err(SynthError::InvalidConfig("align search parameters must be positive".into()));
        }
        let faces = scene.faces_with_label(receptacle);
        if faces.is_empty() {
            return Err(SynthError::NoReceptacle(receptacle));
        }
        let bounds = scene.aabb().ok_or(SynthError::NoReceptacle(receptacle))?;
        let top = traj.pelvis.iter().map(|p| p.z).fold(f64::MIN, f64::max) + cfg.capsule_radius + cfg.voxel_size;
        let region = Aabb::new(
            Point::new(bounds.min.x, bounds.min.y, bounds.min.z.min(0.0)),
            Point::new(bounds.max.x, bounds.max.y, bounds.max.z.max(top)),
        );
        let grid = scene_grid(scene, exclude, &region, cfg.voxel_size, cfg.cell_budget)?;
        let (rmesh, _) = scene.submesh(&faces);
        Ok(Self {
            traj,
            cfg: cfg.clone(),
            grid,
            bounds,
            receptacle: MeshQuery::new(&rmesh),
            pivot: Point::new(traj.pelvis[0].x, traj.pelvis[0].y, 0.0),
        })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn transform_of(&self, yaw: f64, offset: Vec3) -> RigidTransform {
        let r = RigidTransform::from_yaw(yaw, Vec3::zeros());
        let t = self.pivot.coords + offset - r.apply(&self.pivot).coords;
        RigidTransform::from_yaw(yaw, t)
    }

    /// All candidates sorted by (final distance, offset norm, |yaw|, yaw
    /// step, i, j).
    pub fn candidates(&self) -> Result<Vec<AlignCandidate>, SynthError> {
        let s = self.cfg.lattice_step;
        let radius = self.traj.pelvis.iter().map(|p| (Vec3::new(p.x, p.y, 0.0) - self.pivot.coords).norm()).fold(0.0, f64::max);
        let range = |lo: f64, hi: f64, c: f64| (((lo - radius - c) / s).floor() as i64, ((hi + radius - c) / s).ceil() as i64);
        let (i0, i1) = range(self.bounds.min.x, self.bounds.max.x, self.pivot.x);
        let (j0, j1) = range(self.bounds.min.y, self.bounds.max.y, self.pivot.y);
        let (ni, nj) = ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize);
        let end = self.traj.end();
        let all = exec::map_range(self.cfg.yaw_steps * ni * nj, |idx| {
            let k = idx / (ni * nj);
            let i = i0 + (idx % ni) as i64;
            let j = j0 + ((idx / ni) % nj) as i64;
            let yaw = TAU * k as f64 / self.cfg.yaw_steps as f64;
            let offset = Vec3::new(i as f64 * s, j as f64 * s, 0.0);
            let fin = self.transform_of(yaw, offset).apply(&end);
            self.receptacle.distance(&fin).map(|d| AlignCandidate { yaw_step: k, i, j, yaw, offset, final_distance: d })
        });
        let mut all = all.into_iter().collect::<Result<Vec<_>, _>>()?;
        all.sort_by(|a, b| {
            a.final_distance
                .total_cmp(&b.final_distance)
                .then(a.offset.norm().total_cmp(&b.offset.norm()))
                .then(a.abs_yaw().total_cmp(&b.abs_yaw()))
                .then((a.yaw_step, a.i, a.j).cmp(&(b.yaw_step, b.i, b.j)))
        });
        Ok(all)
    }

    /// Grid cells hit by a vertical capsule of the configured radius from
    /// the ground up to `top` at `(x, y)`.
    fn capsule_collides(&self, x: f64, y: f64, top: f64) -> bool {
        let r = self.cfg.capsule_radius;
        let g = &self.grid;
        let (Some((i0, i1)), Some((j0, j1)), Some((k0, k1))) = (
            g.touching_range(0, x - r, x + r),
            g.touching_range(1, y - r, y + r),
            g.touching_range(2, 0.0, top + r),
        ) else {
            return false;
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                let b = g.cell_bounds(i, j, 0);
                let dx = (b.min.x - x).max(0.0).max(x - b.max.x);
                let dy = (b.min.y - y).max(0.0).max(y - b.max.y);
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                if (k0..=k1).any(|k| g.get(i, j, k)) {
                    return true;
                }
            }
        }
        false
    }

    pub fn violations(&self, c: &AlignCandidate) -> Result<Violations, SynthError> {
        let t = self.transform_of(c.yaw, c.offset);
        let mut v = Violations {
            reach_excess: (c.final_distance - self.cfg.reach_max).max(0.0),
            ..Default::default()
        };
        for (f, p) in self.traj.pelvis.iter().enumerate() {
            let q = t.apply(p);
            if !self.bounds.contains_xy(&q) {
                v.out_of_bounds_frames += 1;
                continue;
            }
            let hit = match (&self.traj.bodies, self.cfg.use_body_mesh) {
                (Some(bodies), true) => {
                    let moved: Vec<Point> = bodies[f].iter().map(|b| t.apply(b)).collect();
                    !moved.is_empty() && scene_penetration_points(&moved, &self.grid)? > 0.0
                }
                _ => self.capsule_collides(q.x, q.y, q.z),
            };
            if hit {
                v.colliding_frames += 1;
            }
        }
        Ok(v)
    }

    fn quick_feasible(&self, c: &AlignCandidate) -> Result<bool, SynthError> {
        if c.final_distance > self.cfg.reach_max {
            return Ok(false);
        }
        Ok(self.violations(c)?.is_feasible())
    }

    pub fn solve(&self) -> Result<AlignResult, SynthError> {
        let cands = self.candidates()?;
        let hit = exec::find_first(cands.len(), |i| match self.quick_feasible(&cands[i]) {
            Ok(true) => Some(Ok(())),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        });
        match hit {
            Some((i, Ok(()))) => Ok(AlignResult {
                transform: self.transform_of(cands[i].yaw, cands[i].offset),
                candidate: cands[i],
                candidates_evaluated: cands.len(),
            }),
            Some((_, Err(e))) => Err(e),
            None => {
                let all = exec::map(&cands, |c| self.violations(c));
                let mut best: Option<Violations> = None;
                for v in all {
                    let v = v?;
                    if best.is_none_or(|b| v.severity().0 < b.severity().0
                        || (v.severity().0 == b.severity().0 && v.severity().1 < b.severity().1))
                    {
                        best = Some(v);
                    }
                }
                Err(SynthError::NoSolution { candidates: cands.len(), best: best.unwrap_or_default() })
            }
        }
    }
}

/// Place a walking trajectory in a scene so it ends within reach of the
/// receptacle without colliding. Exhaustive over yaw steps about the first
/// pelvis position and a translation lattice spanning the scene.
pub fn align_walk(
    traj: &Trajectory,
    scene: &TriMesh,
    receptacle: LabelId,
    exclude: &[LabelId],
    cfg: &AlignConfig,
) -> Result<AlignResult, SynthError> {
    WalkAligner::new(traj, scene, receptacle, exclude, cfg)?.solve()
}
