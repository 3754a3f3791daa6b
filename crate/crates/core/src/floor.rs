//! Piecewise rigid alignment of scanned floors to the z = 0 plane.
//!
//! The floor's x-y extent is tiled with overlapping square windows. Each
//! window gets a transform `p -> R_y(r_y) R_x(r_x) p + (0, 0, t_z)` fitted to
//! the floor vertices it covers. Vertices are moved by a blend of window
//! transforms whose weights form a partition of unity: weight 1 on a core
//! square around each window center, linear ramps between neighbouring
//! cores. Inside a core the motion is exactly that window's rigid transform.

use nalgebra::{Matrix2, Rotation3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::geometry::{GeometryError, LabelId, LabelTable, Point, RigidTransform, TriMesh, Vec3};

#[derive(Debug, Error)]
pub enum FloorError {
    #[error("label table has no \"{0}\" entry")]
    NoFloorLabel(String),
    #[error("scene has no faces labeled as floor")]
    NoFloorFaces,
    #[error("window has {count} floor vertices, need at least {needed}")]
    TooFewPoints { count: usize, needed: usize },
    #[error("floor points are collinear; no plane fit")]
    Degenerate,
    #[error("fitted rotation ({r_x:.4}, {r_y:.4}) rad exceeds the cap")]
    RotationCap { r_x: f64, r_y: f64 },
    #[error("no window had enough floor vertices to fit")]
    NoFittedWindow,
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FloorError {
    /// Errors after which a window inherits a neighbour's transform instead
    /// of failing the whole scene.
    pub fn is_skip(&self) -> bool {
        matches!(self, Self::TooFewPoints { .. } | Self::Degenerate | Self::RotationCap { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub window_size: f64,
    pub stride: f64,
    pub min_floor_vertices: usize,
    pub icp_iterations: usize,
    pub convergence_eps: f64,
    pub rotation_cap: f64,
    pub floor_label: String,
    /// Upper bound on windowed passes over the whole scene.
    pub max_passes: usize,
    /// Minimum drop in mean |z| for a pass to be applied (meters).
    pub pass_tolerance: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            window_size: 1.0,
            stride: 0.5,
            min_floor_vertices: 50,
            icp_iterations: 10,
            convergence_eps: 1e-5,
            rotation_cap: 0.35,
            floor_label: "floor".into(),
            max_passes: 64,
            pass_tolerance: 1e-7,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), FloorError> {
        let bad = |m: &str| Err(FloorError::InvalidConfig(m.into()));
        if !(self.window_size > 0.0 && self.stride > 0.0 && self.convergence_eps > 0.0 && self.rotation_cap > 0.0 && self.pass_tolerance > 0.0) {
            return bad("window_size, stride, convergence_eps and rotation_cap must be positive");
        }
        if self.stride > self.window_size {
            return bad("stride must not exceed window_size");
        }
        if self.min_floor_vertices < 3 || self.icp_iterations == 0 || self.max_passes == 0 {
            return bad("min_floor_vertices must be at least 3; icp_iterations and max_passes at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowBounds {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl WindowBounds {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTransform {
    pub id: usize,
    pub bounds: WindowBounds,
    pub t_z: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub vertex_count: usize,
    /// Set when this window had no usable fit and copied another window's.
    pub inherited_from: Option<usize>,
}

impl WindowTransform {
    pub fn rotation(&self) -> Rotation3<f64> {
        rotation(self.r_x, self.r_y)
    }

    pub fn to_rigid(&self) -> RigidTransform {
        RigidTransform::from_rotation(self.rotation(), Vec3::new(0.0, 0.0, self.t_z))
    }
}

fn rotation(r_x: f64, r_y: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::y_axis(), r_y) * Rotation3::from_axis_angle(&Vec3::x_axis(), r_x)
}

/// Result of fitting one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub t_z: f64,
    pub r_x: f64,
    pub r_y: f64,
    /// Mean |z| of the transformed points: identity first, then after each
    /// accepted iteration. Never increasing.
    pub residuals: Vec<f64>,
}

impl WindowFit {
    pub fn to_rigid(&self) -> RigidTransform {
        RigidTransform::from_rotation(rotation(self.r_x, self.r_y), Vec3::new(0.0, 0.0, self.t_z))
    }
}

fn mean_abs_z(points: &[Point], r: &Rotation3<f64>, t_z: f64) -> f64 {
    points.iter().map(|p| ((r * p).z + t_z).abs()).sum::<f64>() / points.len() as f64
}

/// Least-squares plane `z = a x + b y + c`; returns upward unit normal and
/// the centroid (which lies on the plane).
fn fit_plane(points: &[Point]) -> Result<(Vec3, Point), FloorError> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n;
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let d = p.coords - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        sxz += d.x * d.z;
        syz += d.y * d.z;
    }
    let m = Matrix2::new(sxx, sxy, sxy, syy);
    let scale = (sxx + syy).max(f64::MIN_POSITIVE);
    if m.determinant().abs() <= 1e-12 * scale * scale {
        return Err(FloorError::Degenerate);
    }
    let ab = m.try_inverse().ok_or(FloorError::Degenerate)? * Vector2::new(sxz, syz);
    Ok((Vec3::new(-ab.x, -ab.y, 1.0).normalize(), Point::from(c)))
}

/// Angles `(r_x, r_y)` with `R_y(r_y) R_x(r_x) n = +z`.
fn angles_for_normal(n: &Vec3) -> (f64, f64) {
    let r_x = n.y.atan2(n.z);
    let r_y = (-n.x).atan2((n.y * n.y + n.z * n.z).sqrt());
    (r_x, r_y)
}

/// Fit one window's transform by repeated vertical plane fits on the
/// transformed points.
pub fn fit_window_transform(points: &[Point], cfg: &RefineConfig) -> Result<WindowFit, FloorError> {
    if points.len() < cfg.min_floor_vertices {
        return Err(FloorError::TooFewPoints { count: points.len(), needed: cfg.min_floor_vertices });
    }
    let (mut r_x, mut r_y, mut t_z) = (0.0, 0.0, 0.0);
    let mut rot = Rotation3::identity();
    let mut residuals = vec![mean_abs_z(points, &rot, t_z)];
    for _ in 0..cfg.icp_iterations {
        let moved: Vec<Point> = points.iter().map(|p| rot * p + Vec3::new(0.0, 0.0, t_z)).collect();
        let (m, q0) = match fit_plane(&moved) {
            Ok(f) => f,
            Err(e) if residuals.len() == 1 => return Err(e),
            Err(_) => break,
        };
        // back to the original frame
        let n = rot.inverse() * m;
        let p0 = rot.inverse() * (q0 - Vec3::new(0.0, 0.0, t_z));
        let (nx, ny) = angles_for_normal(&n);
        let nrot = rotation(nx, ny);
        let nt = -(nrot * p0).z;
        let res = mean_abs_z(points, &nrot, nt);
        let prev = *residuals.last().unwrap();
        if res > prev {
            break;
        }
        (r_x, r_y, t_z, rot) = (nx, ny, nt, nrot);
        residuals.push(res);
        if prev - res < cfg.convergence_eps {
            break;
        }
    }
    if r_x.abs() > cfg.rotation_cap || r_y.abs() > cfg.rotation_cap {
        return Err(FloorError::RotationCap { r_x, r_y });
    }
    Ok(WindowFit { t_z, r_x, r_y, residuals })
}

/// Vertices incident to at least one face labeled `cfg_label`.
pub fn extract_floor_vertices(scene: &TriMesh, labels: &LabelTable, floor_label: &str) -> Result<Vec<usize>, FloorError> {
    let id = labels.id(floor_label).ok_or_else(|| FloorError::NoFloorLabel(floor_label.into()))?;
    floor_vertices_by_id(scene, id)
}

pub fn floor_vertices_by_id(scene: &TriMesh, floor: LabelId) -> Result<Vec<usize>, FloorError> {
    let faces = scene.faces_with_label(floor);
    if faces.is_empty() {
        return Err(FloorError::NoFloorFaces);
    }
    Ok(scene.vertices_of_faces(&faces))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub window: usize,
    pub vertex_count: usize,
    pub mean_abs_dev: f64,
    pub std_dev: f64,
}

/// Floor height deviation. `mean_abs_dev` is the mean of |z| and `std_dev`
/// the population standard deviation of signed z, over all floor vertices;
/// the `window_avg_*` fields average the per-window values over windows
/// containing at least one floor vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorStats {
    pub vertex_count: usize,
    pub mean_abs_dev: f64,
    pub std_dev: f64,
    pub window_avg_mean_abs_dev: f64,
    pub window_avg_std_dev: f64,
    pub per_window: Vec<WindowStats>,
}

fn moments(zs: impl Iterator<Item = f64> + Clone) -> (usize, f64, f64) {
    let n = zs.clone().count();
    if n == 0 {
        return (0, 0.0, 0.0);
    }
    let nf = n as f64;
    let mean_abs = zs.clone().map(f64::abs).sum::<f64>() / nf;
    let mean = zs.clone().sum::<f64>() / nf;
    let var = zs.map(|z| (z - mean) * (z - mean)).sum::<f64>() / nf;
    (n, mean_abs, var.sqrt())
}

/// Statistics over the given floor vertex ids, with per-window breakdown
/// for `windows` (pass an empty slice for global statistics only).
pub fn floor_stats_for(vertices: &[Point], floor_ids: &[usize], windows: &[WindowBounds]) -> Result<FloorStats, FloorError> {
    if floor_ids.is_empty() {
        return Err(FloorError::NoFloorFaces);
    }
    let (n, mean_abs_dev, std_dev) = moments(floor_ids.iter().map(|&i| vertices[i].z));
    let per_window: Vec<WindowStats> = windows
        .iter()
        .enumerate()
        .map(|(w, b)| {
            let (count, m, s) = moments(floor_ids.iter().map(|&i| &vertices[i]).filter(|p| b.contains(p)).map(|p| p.z));
            WindowStats { window: w, vertex_count: count, mean_abs_dev: m, std_dev: s }
        })
        .collect();
    let used: Vec<&WindowStats> = per_window.iter().filter(|w| w.vertex_count > 0).collect();
    let k = used.len().max(1) as f64;
    Ok(FloorStats {
        vertex_count: n,
        mean_abs_dev,
        std_dev,
        window_avg_mean_abs_dev: used.iter().map(|w| w.mean_abs_dev).sum::<f64>() / k,
        window_avg_std_dev: used.iter().map(|w| w.std_dev).sum::<f64>() / k,
        per_window,
    })
}

/// Global floor statistics of a labeled scene.
pub fn floor_stats(scene: &TriMesh, floor: LabelId) -> Result<FloorStats, FloorError> {
    let ids = floor_vertices_by_id(scene, floor)?;
    floor_stats_for(scene.vertices(), &ids, &[])
}

/// Window lattice along one axis.
#[derive(Debug, Clone, Copy)]
struct Axis {
    start: f64,
    count: usize,
    size: f64,
    stride: f64,
}

impl Axis {
    /// Lattice starts are snapped to odd multiples of half the stride, so
    /// small shifts of the floor bounds leave the windows where they were.
    fn new(lo: f64, hi: f64, size: f64, stride: f64) -> Self {
        let start = stride * ((lo / stride + 0.5).floor() - 0.5);
        let extent = hi - start;
        let count = if extent <= size { 1 } else { ((extent - size) / stride - 1e-9).ceil() as usize + 1 };
        Self { start, count, size, stride }
    }

    fn center(&self, i: usize) -> f64 {
        self.start + i as f64 * self.stride + 0.5 * self.size
    }

    /// Blend weights as (window index, weight); at most two entries.
    fn weights(&self, x: f64) -> Vec<(usize, f64)> {
        if self.count == 1 {
            return vec![(0, 1.0)];
        }
        let h = (0.25 * self.stride).min((0.5 * (self.size - self.stride)).max(0.0));
        let c0 = self.center(0);
        let u = (x - c0) / self.stride;
        let i = u.floor();
        if i < 0.0 {
            return vec![(0, 1.0)];
        }
        let i = i as usize;
        if i >= self.count - 1 {
            return vec![(self.count - 1, 1.0)];
        }
        // between centers i and i+1; ramp of half-width h around the midpoint
        let mid = self.center(i) + 0.5 * self.stride;
        let w_next = if h == 0.0 {
            if x < mid { 0.0 } else { 1.0 }
        } else {
            ((x - mid + h) / (2.0 * h)).clamp(0.0, 1.0)
        };
        let mut out = Vec::with_capacity(2);
        if w_next < 1.0 {
            out.push((i, 1.0 - w_next));
        }
        if w_next > 0.0 {
            out.push((i + 1, w_next));
        }
        out
    }
}

/// Windows laid over the x-y bounds of the floor vertices.
#[derive(Debug, Clone)]
pub struct WindowLattice {
    ax: Axis,
    ay: Axis,
}

impl WindowLattice {
    pub fn over(points: &[Point], cfg: &RefineConfig) -> Option<Self> {
        let first = points.first()?;
        let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
        for p in points {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        Some(Self {
            ax: Axis::new(x0, x1, cfg.window_size, cfg.stride),
            ay: Axis::new(y0, y1, cfg.window_size, cfg.stride),
        })
    }

    pub fn len(&self) -> usize {
        self.ax.count * self.ay.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, w: usize) -> WindowBounds {
        let (i, j) = (w % self.ax.count, w / self.ax.count);
        let x0 = self.ax.start + i as f64 * self.ax.stride;
        let y0 = self.ay.start + j as f64 * self.ay.stride;
        WindowBounds { x0, y0, x1: x0 + self.ax.size, y1: y0 + self.ay.size }
    }

    pub fn all_bounds(&self) -> Vec<WindowBounds> {
        (0..self.len()).map(|w| self.bounds(w)).collect()
    }

    /// Partition-of-unity weights at an x-y location.
    pub fn weights(&self, x: f64, y: f64) -> Vec<(usize, f64)> {
        let wx = self.ax.weights(x);
        let wy = self.ay.weights(y);
        let mut out = Vec::with_capacity(wx.len() * wy.len());
        for &(j, b) in &wy {
            for &(i, a) in &wx {
                out.push((j * self.ax.count + i, a * b));
            }
        }
        out
    }
}

/// How the refined vertices were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    Windowed,
    /// The windowed blend increased the deviation; one global fit was used.
    Global,
    /// Neither improved the deviation; the scene is returned unchanged.
    Unchanged,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub scene: TriMesh,
    pub before: FloorStats,
    pub after: FloorStats,
    /// Window transforms of the last applied pass (or of the rejected
    /// first pass when nothing was applied).
    pub windows: Vec<WindowTransform>,
    pub passes: usize,
    pub mode: RefineMode,
}

/// Fit every window, filling unfit windows from the nearest fitted one.
pub fn fit_windows(floor_points: &[Point], lattice: &WindowLattice, cfg: &RefineConfig) -> Result<Vec<WindowTransform>, FloorError> {
    let fits = exec::map_range(lattice.len(), |w| {
        let b = lattice.bounds(w);
        let pts: Vec<Point> = floor_points.iter().filter(|p| b.contains(p)).copied().collect();
        (pts.len(), fit_window_transform(&pts, cfg))
    });
    let mut out = Vec::with_capacity(fits.len());
    let mut fitted = Vec::new();
    for (w, (count, fit)) in fits.into_iter().enumerate() {
        let (t_z, r_x, r_y) = match fit {
            Ok(f) => {
                fitted.push(w);
                (f.t_z, f.r_x, f.r_y)
            }
            Err(e) if e.is_skip() => (0.0, 0.0, 0.0),
            Err(e) => return Err(e),
        };
        out.push(WindowTransform { id: w, bounds: lattice.bounds(w), t_z, r_x, r_y, vertex_count: count, inherited_from: None });
    }
    if fitted.is_empty() {
        return Err(FloorError::NoFittedWindow);
    }
    let center_dist = |a: &WindowBounds, b: &WindowBounds| {
        let ((ax, ay), (bx, by)) = (a.center(), b.center());
        (ax - bx).powi(2) + (ay - by).powi(2)
    };
    for w in 0..out.len() {
        if fitted.binary_search(&w).is_ok() {
            continue;
        }
        let b = out[w].bounds;
        let src = *fitted
            .iter()
            .min_by(|&&p, &&q| center_dist(&out[p].bounds, &b).total_cmp(&center_dist(&out[q].bounds, &b)).then(p.cmp(&q)))
            .unwrap();
        let (t_z, r_x, r_y) = (out[src].t_z, out[src].r_x, out[src].r_y);
        out[w] = WindowTransform { t_z, r_x, r_y, inherited_from: Some(src), ..out[w].clone() };
    }
    Ok(out)
}

/// Move points by the blended window transforms.
pub fn apply_windows(points: &[Point], lattice: &WindowLattice, windows: &[WindowTransform]) -> Vec<Point> {
    let rigid: Vec<RigidTransform> = windows.iter().map(WindowTransform::to_rigid).collect();
    exec::map(points, |p| {
        let ws = lattice.weights(p.x, p.y);
        if let [(w, _)] = ws[..] {
            return rigid[w].apply(p);
        }
        let mut acc = Vec3::zeros();
        for (w, a) in ws {
            acc += rigid[w].apply(p).coords * a;
        }
        Point::from(acc)
    })
}

/// Piecewise rigid floor refinement of a labeled scene.
pub fn refine_scene(scene: &TriMesh, floor: LabelId, cfg: &RefineConfig) -> Result<Refinement, FloorError> {
    cfg.validate()?;
    let ids = floor_vertices_by_id(scene, floor)?;
    let floor_of = |v: &[Point]| -> Vec<Point> { ids.iter().map(|&i| v[i]).collect() };
    let lattice = WindowLattice::over(&floor_of(scene.vertices()), cfg).ok_or(FloorError::NoFloorFaces)?;
    let bounds = lattice.all_bounds();
    let before = floor_stats_for(scene.vertices(), &ids, &bounds)?;

    // Windowed passes, each kept only if it lowers the deviation by at
    // least `pass_tolerance`. A rejected pass is exactly what a repeated
    // call would compute first, so refining refined output is a no-op.
    let mut current = scene.vertices().to_vec();
    let mut current_dev = before.mean_abs_dev;
    let mut windows = Vec::new();
    let mut passes = 0;
    while passes < cfg.max_passes {
        let pts = floor_of(&current);
        let fitted = fit_windows(&pts, &lattice, cfg)?;
        let moved = apply_windows(&current, &lattice, &fitted);
        let dev = floor_stats_for(&moved, &ids, &[])?.mean_abs_dev;
        if current_dev - dev < cfg.pass_tolerance {
            if passes == 0 {
                windows = fitted;
            }
            break;
        }
        (current, current_dev, windows) = (moved, dev, fitted);
        passes += 1;
    }
    if passes > 0 {
        let after = floor_stats_for(&current, &ids, &bounds)?;
        return Ok(Refinement { scene: scene.with_vertices(current), before, after, windows, passes, mode: RefineMode::Windowed });
    }
    let global_cfg = RefineConfig { min_floor_vertices: 3, ..cfg.clone() };
    if let Ok(fit) = fit_window_transform(&floor_of(scene.vertices()), &global_cfg) {
        let t = fit.to_rigid();
        let moved: Vec<Point> = exec::map(scene.vertices(), |p| t.apply(p));
        let after = floor_stats_for(&moved, &ids, &bounds)?;
        if before.mean_abs_dev - after.mean_abs_dev >= cfg.pass_tolerance {
            return Ok(Refinement { scene: scene.with_vertices(moved), before, after, windows, passes: 1, mode: RefineMode::Global });
        }
    }
    Ok(Refinement { scene: scene.clone(), after: before.clone(), before, windows, passes: 0, mode: RefineMode::Unchanged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n: usize, z: impl Fn(f64, f64) -> f64) -> Vec<Point> {
        let mut v = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
                v.push(Point::new(x, y, z(x, y)));
            }
        }
        v
    }

    #[test]
    fn identity_on_flat_points() {
        let f = fit_window_transform(&grid_points(10, |_, _| 0.0), &RefineConfig::default()).unwrap();
        assert!(f.t_z.abs() < 1e-9 && f.r_x.abs() < 1e-9 && f.r_y.abs() < 1e-9);
    }

    #[test]
    fn pure_offset() {
        let f = fit_window_transform(&grid_points(10, |_, _| 0.1175), &RefineConfig::default()).unwrap();
        assert!((f.t_z + 0.1175).abs() < 1e-12);
        assert!(f.r_x.abs() < 1e-12 && f.r_y.abs() < 1e-12);
    }

    #[test]
    fn too_few_points_is_a_skip() {
        let e = fit_window_transform(&grid_points(5, |_, _| 0.0), &RefineConfig::default()).unwrap_err();
        assert!(e.is_skip());
    }

    #[test]
    fn steep_patch_hits_cap() {
        let e = fit_window_transform(&grid_points(10, |x, _| x), &RefineConfig::default()).unwrap_err();
        assert!(matches!(e, FloorError::RotationCap { .. }));
    }

    #[test]
    fn axis_weights_partition_unity() {
        let a = Axis::new(0.0, 3.0, 1.0, 0.5);
        assert_eq!(a.count, 6);
        for k in 0..=300 {
            let x = -0.5 + k as f64 * 0.0133;
            let s: f64 = a.weights(x).iter().map(|w| w.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // core of window 2 is rigid
        assert_eq!(a.weights(a.center(2) + 0.1), vec![(2, 1.0)]);
    }

    #[test]
    fn lattice_snaps_start() {
        let a = Axis::new(0.0, 6.0, 1.0, 0.5);
        assert_eq!((a.start, a.count), (-0.25, 12));
        let b = Axis::new(-1e-5, 6.00001, 1.0, 0.5);
        assert_eq!((b.start, b.count), (-0.25, 12));
        assert_eq!(Axis::new(0.3, 0.7, 1.0, 0.5).count, 1);
        assert_eq!(Axis::new(0.3, 1.3, 1.0, 0.5).count, 2);
    }
}
