//! Deterministic synthetic fixtures with JSON ground-truth sidecars.
//!
//! Every kind writes its files into one directory plus `truth.json`. The
//! same kind and seed always produce byte-identical files.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use scenegrasp_core::contact::CONTACT_THRESHOLD;
use scenegrasp_core::floor::{floor_vertices_by_id, floor_stats};
use scenegrasp_core::geometry::io::obj_string;
use scenegrasp_core::geometry::shapes::{cuboid, height_grid, icosphere, table};
use scenegrasp_core::geometry::{LabelId, MeshQuery};
use scenegrasp_core::penetration::{BodyPart, PartMap};
use scenegrasp_core::synth::Trajectory;
use scenegrasp_core::{LabelTable, Point, RigidTransform, TriMesh, Vec3};

use crate::config::PipelineConfig;
use crate::io::{to_json, write_atomic};
use crate::manifest::{GtContacts, SampleSpec};
use crate::run::{synthesize, SceneInput};
use crate::seed::sample_seed;
use crate::{PipelineError, Result};

pub const FLOOR: LabelId = 1;
pub const WALL: LabelId = 2;
pub const TABLE: LabelId = 3;
pub const CLUTTER: LabelId = 4;
pub const CABINET: LabelId = 5;

pub const TRUTH_FILE: &str = "truth.json";
pub const DATASET_FILE: &str = "dataset.json";

/// Vertices of the graded-penetration body and how many of them are feet.
pub const GRADED_BODY_VERTICES: usize = 20_000;
pub const GRADED_FOOT_VERTICES: usize = 10_000;

pub fn label_table() -> LabelTable {
    let mut t = LabelTable::new();
    for (name, id) in [("floor", FLOOR), ("wall", WALL), ("table", TABLE), ("clutter", CLUTTER), ("cabinet", CABINET)] {
        t.insert(name, id);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureKind {
    FlatRoom,
    WarpedFloor,
    TableScene,
    BoxedObject,
    /// Target penetration ratio, a multiple of 1e-4.
    GradedPenetration(f64),
    /// Number of samples.
    Dataset(usize),
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FlatRoom => write!(f, "flat-room"),
            Self::WarpedFloor => write!(f, "warped-floor"),
            Self::TableScene => write!(f, "table-scene"),
            Self::BoxedObject => write!(f, "boxed-object"),
            Self::GradedPenetration(p) => write!(f, "graded-penetration({p})"),
            Self::Dataset(n) => write!(f, "dataset({n})"),
        }
    }
}

impl FromStr for FixtureKind {
    type Err = PipelineError;

    /// Accepts `name`, `name(arg)` or `name:arg`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = if let Some(open) = s.find('(') {
            let close = s.strip_suffix(')').ok_or_else(|| usage(format!("unbalanced parenthesis in `{s}`")))?;
            (&s[..open], Some(&close[open + 1..]))
        } else if let Some((n, a)) = s.split_once(':') {
            (n, Some(a))
        } else {
            (s, None)
        };
        let kind = match (name, arg) {
            ("flat-room", None) => Self::FlatRoom,
            ("warped-floor", None) => Self::WarpedFloor,
            ("table-scene", None) => Self::TableScene,
            ("boxed-object", None) => Self::BoxedObject,
            ("graded-penetration", Some(a)) => {
                Self::GradedPenetration(a.trim().parse().map_err(|_| usage(format!("bad ratio `{a}`")))?)
            }
            ("dataset", None) => Self::Dataset(5),
            ("dataset", Some(a)) => Self::Dataset(a.trim().parse().map_err(|_| usage(format!("bad sample count `{a}`")))?),
            _ => return Err(usage(format!("unknown fixture kind `{s}`"))),
        };
        Ok(kind)
    }
}

fn usage(m: String) -> PipelineError {
    PipelineError::Config(m)
}

/// Ground truth written to `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    FlatRoom(FlatRoomTruth),
    WarpedFloor(WarpedFloorTruth),
    TableScene(TableTruth),
    BoxedObject(BoxedTruth),
    GradedPenetration(GradedTruth),
    Dataset(DatasetTruth),
}

/// The alignment that maps the generated floor back onto z = 0:
/// `R_y(r_y) R_x(r_x)` followed by a vertical shift `t_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatRoomTruth {
    pub seed: u64,
    pub t_z: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub floor_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpedFloorTruth {
    pub seed: u64,
    pub mean_abs_dev: f64,
    pub noise_amplitude: f64,
    pub floor_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableTruth {
    pub seed: u64,
    pub table_min: Point,
    pub table_max: Point,
    pub table_top: f64,
    pub clutter_min: Point,
    pub clutter_max: Point,
    /// A pelvis position within reach of the tabletop.
    pub end_pelvis: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxedTruth {
    pub seed: u64,
    pub object_center: Point,
    pub original_pelvis: Point,
    pub wall_gap: f64,
    /// Candidates expected to survive the standing-room filter.
    pub expected_after_room: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedTruth {
    pub seed: u64,
    pub ratio: f64,
    pub scene_pen: f64,
    pub floor_pen: f64,
    pub body_vertices: usize,
    pub foot_vertices: usize,
    pub scene_penetrating: usize,
    pub floor_penetrating: usize,
    pub object_contact: Vec<usize>,
    pub floor_contact: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTruth {
    pub seed: u64,
    pub samples: Vec<DatasetSampleTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSampleTruth {
    pub id: String,
    pub tilt: FlatRoomTruth,
    pub table: TableTruth,
    pub object_center: Point,
    pub stand: Point,
}

/// Generate a fixture into `dir`; returns the sidecar.
pub fn gen_fixtures(kind: FixtureKind, seed: u64, dir: &Path) -> Result<Truth> {
    let mut files = Files::new(dir);
    let truth = match kind {
        FixtureKind::FlatRoom => Truth::FlatRoom(flat_room(seed, &mut files)?),
        FixtureKind::WarpedFloor => Truth::WarpedFloor(warped_floor(seed, &mut files)?),
        FixtureKind::TableScene => Truth::TableScene(table_fixture(seed, &mut files)?),
        FixtureKind::BoxedObject => Truth::BoxedObject(boxed_object(seed, &mut files)?),
        FixtureKind::GradedPenetration(p) => Truth::GradedPenetration(graded_penetration(p, seed, &mut files)?),
        FixtureKind::Dataset(n) => Truth::Dataset(dataset(n, seed, &mut files)?),
    };
    files.text(TRUTH_FILE, &to_json(&truth))?;
    Ok(truth)
}

struct Files {
    dir: PathBuf,
}

impl Files {
    fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        Ok(PathBuf::from(name))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<PathBuf> {
        self.text(name, &to_json(v))
    }

    fn scene(&mut self, name: &str, mesh: &TriMesh) -> Result<PathBuf> {
        self.text(name, &obj_string(mesh, Some(&label_table())))
    }

    fn mesh(&mut self, name: &str, mesh: &TriMesh) -> Result<PathBuf> {
        self.text(name, &obj_string(mesh, None))
    }

    fn labels(&mut self) -> Result<PathBuf> {
        self.json("labels.json", &label_table())
    }
}

/// Alignment `R_y(r_y) R_x(r_x)` then `+t_z`, mapping a scanned floor to z = 0.
pub fn floor_alignment(r_x: f64, r_y: f64, t_z: f64) -> RigidTransform {
    let r = Rotation3::from_axis_angle(&Vec3::y_axis(), r_y) * Rotation3::from_axis_angle(&Vec3::x_axis(), r_x);
    RigidTransform::from_rotation(r, Vec3::new(0.0, 0.0, t_z))
}

fn floor_grid(size: f64, cells: usize) -> TriMesh {
    height_grid(0.0, 0.0, size, size, cells, cells, |_, _| 0.0).labeled(FLOOR)
}

fn random_tilt(rng: &mut ChaCha8Rng, seed: u64, max_angle: f64, max_shift: f64, floor_vertices: usize) -> FlatRoomTruth {
    FlatRoomTruth {
        seed,
        t_z: rng.random_range(-max_shift..=max_shift),
        r_x: rng.random_range(-max_angle..=max_angle),
        r_y: rng.random_range(-max_angle..=max_angle),
        floor_vertices,
    }
}

fn flat_room(seed: u64, files: &mut Files) -> Result<FlatRoomTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = floor_grid(4.0, 40);
    let cabinet = cuboid(Point::new(3.0, 0.5, 0.0), Point::new(3.6, 1.1, 0.9)).labeled(CABINET);
    let truth = random_tilt(&mut rng, seed, 3f64.to_radians(), 0.2, floor.vertex_count());
    let scan = floor_alignment(truth.r_x, truth.r_y, truth.t_z).inverse();
    let scene = TriMesh::merge(&[floor, cabinet]).transformed(&scan);
    files.scene("scene.obj", &scene)?;
    files.labels()?;
    Ok(truth)
}

/// Smooth warp used by the warped-floor fixture, mean |z| about 0.12 m.
pub fn warp(x: f64, y: f64) -> f64 {
    0.12 + 0.03 * (TAU * x / 4.0).sin() * (TAU * y / 5.0).cos() + 0.01 * (x - 3.0)
}

fn warped_floor(seed: u64, files: &mut Files) -> Result<WarpedFloorTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_amplitude = 0.002;
    let n = 60;
    let noise: Vec<f64> = (0..(n + 1) * (n + 1)).map(|_| rng.random_range(-noise_amplitude..noise_amplitude)).collect();
    let step = 6.0 / n as f64;
    let floor = height_grid(0.0, 0.0, 6.0, 6.0, n, n, |x, y| {
        let (i, j) = ((x / step).round() as usize, (y / step).round() as usize);
        warp(x, y) + noise[j * (n + 1) + i]
    })
    .labeled(FLOOR);
    let furniture = cuboid(Point::new(2.0, 2.0, 0.4), Point::new(2.8, 2.6, 0.75)).labeled(TABLE);
    let scene = TriMesh::merge(&[floor, furniture]);
    let stats = floor_stats(&scene, FLOOR)?;
    files.scene("scene.obj", &scene)?;
    files.labels()?;
    Ok(WarpedFloorTruth { seed, mean_abs_dev: stats.mean_abs_dev, noise_amplitude, floor_vertices: stats.vertex_count })
}

/// Room with a table and one clutter box on its top.
fn table_room(rng: &mut ChaCha8Rng, seed: u64) -> (TriMesh, TableTruth) {
    let (cx, cy) = (rng.random_range(1.6..2.4), rng.random_range(1.6..2.4));
    let (hx, hy) = (rng.random_range(0.3..0.5), rng.random_range(0.3..0.5));
    let top = rng.random_range(0.7..0.9);
    let desk = table(cx, cy, hx, hy, top, 10).labeled(TABLE);
    let (ux, uy) = (rng.random_range(-0.6..0.6) * hx, rng.random_range(-0.6..0.6) * hy);
    let clutter_min = Point::new(cx + ux - 0.05, cy + uy - 0.05, top);
    let clutter_max = Point::new(cx + ux + 0.05, cy + uy + 0.05, top + 0.15);
    let clutter = cuboid(clutter_min, clutter_max).labeled(CLUTTER);
    let cabinet = cuboid(Point::new(0.2, 3.2, 0.0), Point::new(0.8, 3.8, 1.2)).labeled(CABINET);
    let scene = TriMesh::merge(&[floor_grid(4.0, 40), desk, clutter, cabinet]);
    let truth = TableTruth {
        seed,
        table_min: Point::new(cx - hx, cy - hy, 0.0),
        table_max: Point::new(cx + hx, cy + hy, top),
        table_top: top,
        clutter_min,
        clutter_max,
        end_pelvis: Point::new(cx - hx - 0.3, cy, 0.9),
    };
    (scene, truth)
}

fn small_object(rng: &mut ChaCha8Rng) -> TriMesh {
    let r = rng.random_range(0.03..0.06);
    if rng.random_bool(0.5) {
        icosphere(Point::origin(), r, 2)
    } else {
        cuboid(Point::new(-r, -r, -r), Point::new(r, r, r * 1.5))
    }
}

/// Straight walk along +x at pelvis height 0.9 m.
pub fn straight_walk(frames: usize, length: f64) -> Trajectory {
    let pelvis = (0..frames)
        .map(|f| Point::new(length * f as f64 / (frames - 1) as f64, 0.0, 0.9))
        .collect();
    Trajectory { pelvis, frame_rate: 30.0, bodies: None }
}

fn table_fixture(seed: u64, files: &mut Files) -> Result<TableTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (scene, truth) = table_room(&mut rng, seed);
    let object = small_object(&mut rng);
    files.scene("scene.obj", &scene)?;
    files.labels()?;
    files.mesh("object.obj", &object)?;
    files.json("trajectory.json", &straight_walk(40, 1.5))?;
    Ok(truth)
}

fn boxed_object(seed: u64, files: &mut Files) -> Result<BoxedTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy, top) = (2.0, 2.0, rng.random_range(0.7..0.9));
    let half = 0.4;
    let gap = 0.2;
    let wall = 0.05;
    let inner = half + gap;
    // a closet: the floor ends at the outer face of the walls
    let outer = inner + wall;
    let floor = height_grid(cx - outer, cy - outer, cx + outer, cy + outer, 26, 26, |_, _| 0.0).labeled(FLOOR);
    let h = 2.2;
    let walls = [
        cuboid(Point::new(cx - outer, cy - outer, 0.0), Point::new(cx + outer, cy - inner, h)),
        cuboid(Point::new(cx - outer, cy + inner, 0.0), Point::new(cx + outer, cy + outer, h)),
        cuboid(Point::new(cx - outer, cy - inner, 0.0), Point::new(cx - inner, cy + inner, h)),
        cuboid(Point::new(cx + inner, cy - inner, 0.0), Point::new(cx + outer, cy + inner, h)),
    ]
    .map(|w| w.labeled(WALL));
    let mut parts = vec![floor, table(cx, cy, half, half, top, 8).labeled(TABLE)];
    parts.extend(walls);
    let scene = TriMesh::merge(&parts);
    let object = icosphere(Point::origin(), 0.05, 2);
    files.scene("scene.obj", &scene)?;
    files.labels()?;
    files.mesh("object.obj", &object)?;
    Ok(BoxedTruth {
        seed,
        object_center: Point::new(cx, cy, top + 0.05),
        original_pelvis: Point::new(cx - inner + 0.1, cy, 0.9),
        wall_gap: gap,
        expected_after_room: 0,
    })
}

fn check_ratio(p: f64) -> Result<usize> {
    let k = p * 1e4;
    if !(0.0..=0.5).contains(&p) || (k - k.round()).abs() > 1e-6 {
        return Err(usage(format!("graded-penetration ratio {p} must be a multiple of 0.0001 in [0, 0.5]")));
    }
    Ok(k.round() as usize)
}

/// Body whose scene- and floor-penetration ratios both equal `p` exactly.
///
/// Layout: 10,000 foot vertices near the floor in open space, of which
/// `p·10⁴` sit 1 cm below it; `p·2·10⁴` further vertices inside a solid
/// cabinet; 100 hand vertices 5 mm above the object's top face and 100
/// hand vertices 5 cm above it; the rest hang in free space.
fn graded_penetration(p: f64, seed: u64, files: &mut Files) -> Result<GradedTruth> {
    let k = check_ratio(p)?;
    let (floor_below, inside) = (k, 2 * k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cab = (Point::new(1.0, 1.0, 0.0), Point::new(1.6, 1.6, 0.8));
    let desk = table(3.0, 1.0, 0.4, 0.3, 0.75, 4).labeled(TABLE);
    let scene = TriMesh::merge(&[floor_grid(4.0, 8), cuboid(cab.0, cab.1).labeled(CABINET), desk]);
    let (omin, omax) = (Point::new(2.45, 2.45, 0.0), Point::new(2.55, 2.55, 0.1));
    let object = cuboid(omin, omax);

    let mut verts = Vec::with_capacity(GRADED_BODY_VERTICES);
    let mut parts = Vec::with_capacity(GRADED_BODY_VERTICES);
    let mut push = |v: Point, part: BodyPart, verts: &mut Vec<Point>| {
        verts.push(v);
        parts.push(part);
    };
    let mut floor_contact = Vec::new();
    for i in 0..GRADED_FOOT_VERTICES {
        let (x, y) = (rng.random_range(0.2..0.8), rng.random_range(2.5..3.5));
        let z: f64 = if i < floor_below {
            -0.01
        } else if i % 2 == 0 {
            0.01
        } else {
            0.05
        };
        if z.abs() < CONTACT_THRESHOLD {
            floor_contact.push(i);
        }
        push(Point::new(x, y, z), BodyPart::Foot, &mut verts);
    }
    for _ in 0..inside {
        let v = Point::new(rng.random_range(1.1..1.5), rng.random_range(1.1..1.5), rng.random_range(0.1..0.7));
        push(v, BodyPart::Other, &mut verts);
    }
    let mut object_contact = Vec::new();
    for h in 0..200 {
        let lift = if h < 100 { 0.005 } else { 0.05 };
        if h < 100 {
            object_contact.push(verts.len());
        }
        let v = Point::new(rng.random_range(2.46..2.54), rng.random_range(2.46..2.54), omax.z + lift);
        push(v, BodyPart::HandRight, &mut verts);
    }
    for _ in 0..200 {
        let v = Point::new(rng.random_range(0.4..0.6), rng.random_range(0.4..0.6), rng.random_range(0.85..0.95));
        push(v, BodyPart::Pelvis, &mut verts);
    }
    while verts.len() < GRADED_BODY_VERTICES {
        let v = Point::new(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.3..1.6));
        push(v, BodyPart::Other, &mut verts);
    }

    let body = TriMesh::from_vertices(verts);
    files.scene("scene.obj", &scene)?;
    let labels = files.labels()?;
    let object_path = files.mesh("object.obj", &object)?;
    let frame = files.mesh("body_0.obj", &body)?;
    let part_map = files.json("parts.json", &PartMap::from_parts(&parts))?;
    let gt = GtContacts { object: object_contact.clone(), floor: floor_contact.clone() };
    let contacts = files.json("contacts_0.json", &gt)?;
    let spec = SampleSpec {
        id: "graded".into(),
        scene: "scene.obj".into(),
        labels,
        receptacle: "table".into(),
        object: object_path,
        object_pose: None,
        trajectory: None,
        body_frames: vec![frame],
        pelvis: None,
        part_map: Some(part_map),
        gt_contacts: vec![contacts],
        grid: None,
    };
    files.json(DATASET_FILE, &vec![spec])?;
    Ok(GradedTruth {
        seed,
        ratio: p,
        scene_pen: inside as f64 / GRADED_BODY_VERTICES as f64,
        floor_pen: floor_below as f64 / GRADED_FOOT_VERTICES as f64,
        body_vertices: GRADED_BODY_VERTICES,
        foot_vertices: GRADED_FOOT_VERTICES,
        scene_penetrating: inside,
        floor_penetrating: floor_below,
        object_contact,
        floor_contact,
    })
}

/// Rough standing body built around a local frame (origin on the floor
/// under the pelvis, +x facing forward) with the right hand spread over
/// the object surface at per-vertex offsets.
struct BodyBuilder {
    verts: Vec<Point>,
    parts: Vec<BodyPart>,
}

impl BodyBuilder {
    fn new() -> Self {
        Self { verts: Vec::new(), parts: Vec::new() }
    }

    fn add(&mut self, v: Point, part: BodyPart) {
        self.verts.push(v);
        self.parts.push(part);
    }

    fn standing(rng: &mut ChaCha8Rng, to_world: &RigidTransform) -> Self {
        let mut b = Self::new();
        let local = |b: &mut Self, v: Point, part| b.add(to_world.apply(&v), part);
        for side in [-1.0, 1.0] {
            for _ in 0..40 {
                let v = Point::new(rng.random_range(-0.05..0.15), side * 0.1 + rng.random_range(-0.04..0.04), rng.random_range(0.0..0.08));
                local(&mut b, v, BodyPart::Foot);
            }
            for _ in 0..30 {
                let v = Point::new(rng.random_range(-0.04..0.04), side * 0.1 + rng.random_range(-0.04..0.04), rng.random_range(0.1..0.5));
                local(&mut b, v, BodyPart::LowerLeg);
            }
        }
        for _ in 0..40 {
            let v = Point::new(rng.random_range(-0.1..0.1), rng.random_range(-0.15..0.15), rng.random_range(0.82..0.98));
            local(&mut b, v, BodyPart::Pelvis);
        }
        for _ in 0..120 {
            let v = Point::new(rng.random_range(-0.1..0.1), rng.random_range(-0.18..0.18), rng.random_range(1.0..1.5));
            local(&mut b, v, BodyPart::Other);
        }
        for _ in 0..30 {
            let v = Point::new(rng.random_range(-0.04..0.04), 0.3 + rng.random_range(-0.03..0.03), rng.random_range(0.75..0.85));
            local(&mut b, v, BodyPart::HandLeft);
        }
        b
    }

    fn pelvis(&self) -> Point {
        let (sum, n) = self
            .verts
            .iter()
            .zip(&self.parts)
            .filter(|(_, &p)| p == BodyPart::Pelvis)
            .fold((Vec3::zeros(), 0usize), |(s, n), (v, _)| (s + v.coords, n + 1));
        Point::from(sum / n as f64)
    }
}

struct FrameFiles {
    body: PathBuf,
    contacts: PathBuf,
    pelvis: Point,
}

fn flip_some(rng: &mut ChaCha8Rng, truth: Vec<usize>, pool: &[usize], rate: f64) -> Vec<usize> {
    let mut out: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|i| truth.contains(i) != rng.random_bool(rate))
        .collect();
    out.sort_unstable();
    out
}

/// Three frames of a body reaching for an object; ground-truth contacts
/// are the exact contacts with about 8% of labels flipped.
#[allow(clippy::too_many_arguments)]
fn reach_frames(
    rng: &mut ChaCha8Rng,
    files: &mut Files,
    prefix: &str,
    stand: Point,
    facing: Vec3,
    object: &TriMesh,
    center: Point,
    radius: f64,
) -> Result<(Vec<FrameFiles>, Vec<BodyPart>)> {
    let yaw = facing.y.atan2(facing.x);
    let to_world = RigidTransform::from_yaw(yaw, stand.coords);
    let query = MeshQuery::new(object);
    let mut out = Vec::new();
    let mut parts = Vec::new();
    for f in 0..3 {
        let mut b = BodyBuilder::standing(rng, &to_world);
        let shoulder = to_world.apply(&Point::new(0.0, -0.2, 1.4));
        let toward = (shoulder - center).try_normalize(1e-9).unwrap_or_else(Vec3::z);
        let hand_start = b.verts.len();
        for _ in 0..60 {
            let jitter = Vec3::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
            let u = (toward + jitter).normalize();
            let offset = 0.06 - 0.025 * f as f64 + rng.random_range(-0.02..0.02);
            b.add(center + u * (radius + offset), BodyPart::HandRight);
        }
        let hand = b.verts[hand_start..].iter().fold(Vec3::zeros(), |a, v| a + v.coords) / 60.0;
        for s in 1..20 {
            let t = s as f64 / 20.0;
            b.add(shoulder + (Point::from(hand) - shoulder) * t, BodyPart::Other);
        }
        let pelvis = b.pelvis();
        let ids: Vec<usize> = (0..b.verts.len()).collect();
        let obj_truth: Vec<usize> = ids
            .iter()
            .copied()
            .filter(|&i| {
                b.parts[i].is_hand()
                    && (query.distance(&b.verts[i]).is_ok_and(|d| d < CONTACT_THRESHOLD) || query.is_inside(&b.verts[i]))
            })
            .collect();
        let hands: Vec<usize> = ids.iter().copied().filter(|&i| b.parts[i].is_hand()).collect();
        let lower: Vec<usize> =
            ids.iter().copied().filter(|&i| matches!(b.parts[i], BodyPart::Foot | BodyPart::LowerLeg)).collect();
        let floor_truth: Vec<usize> = lower.iter().copied().filter(|&i| b.verts[i].z.abs() < CONTACT_THRESHOLD).collect();
        let gt = GtContacts { object: flip_some(rng, obj_truth, &hands, 0.08), floor: flip_some(rng, floor_truth, &lower, 0.08) };
        let body = files.mesh(&format!("{prefix}body_{f}.obj"), &TriMesh::from_vertices(b.verts))?;
        let contacts = files.json(&format!("{prefix}contacts_{f}.json"), &gt)?;
        parts = b.parts;
        out.push(FrameFiles { body, contacts, pelvis });
    }
    Ok((out, parts))
}

fn dataset(n: usize, seed: u64, files: &mut Files) -> Result<DatasetTruth> {
    if n == 0 {
        return Err(usage("dataset needs at least one sample".into()));
    }
    let cfg = PipelineConfig { seed, ..PipelineConfig::default() };
    let mut specs = Vec::new();
    let mut truths = Vec::new();
    for k in 0..n {
        let id = format!("sample_{k:03}");
        let s = sample_seed(seed, &id);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (room, table_truth) = table_room(&mut rng, s);
        let tilt = random_tilt(&mut rng, s, 1f64.to_radians(), 0.03, floor_vertices_by_id(&room, FLOOR)?.len());
        let scan = floor_alignment(tilt.r_x, tilt.r_y, tilt.t_z).inverse();
        let scene = room.transformed(&scan);
        let radius = rng.random_range(0.035..0.05);
        let object = icosphere(Point::origin(), radius, 2);
        let walk = straight_walk(40, rng.random_range(1.0..2.0));

        let prefix = format!("{id}/");
        let scene_path = files.scene(&format!("{prefix}scene.obj"), &scene)?;
        let labels_path = files.json(&format!("{prefix}labels.json"), &label_table())?;
        let object_path = files.mesh(&format!("{prefix}object.obj"), &object)?;
        let traj_path = files.json(&format!("{prefix}trajectory.json"), &walk)?;

        // bodies are posed against the stage outputs of the default config
        let input = SceneInput { mesh: scene, labels: label_table(), floor: FLOOR, receptacle: TABLE };
        let syn = synthesize(&input, &walk, &object, &cfg, sample_seed(seed, &id)).map_err(|e| {
            PipelineError::Fixture(format!("sample {id} stage {} failed: {}", e.stage, e.error))
        })?;
        let center = syn.placement.object_center;
        let (stand, facing) = match syn.augmentation.candidates.first() {
            Some(c) => (Point::new(c.position.x, c.position.y, 0.0), c.facing),
            None => (Point::new(syn.end_pelvis.x, syn.end_pelvis.y, 0.0), center - syn.end_pelvis),
        };
        let facing = Vec3::new(facing.x, facing.y, 0.0).try_normalize(1e-9).unwrap_or_else(Vec3::x);
        let placed = icosphere(center, radius, 2);
        let (frames, parts) = reach_frames(&mut rng, files, &prefix, stand, facing, &placed, center, radius)?;
        let part_map = files.json(&format!("{prefix}parts.json"), &PartMap::from_parts(&parts))?;

        specs.push(SampleSpec {
            id: id.clone(),
            scene: scene_path,
            labels: labels_path,
            receptacle: "table".into(),
            object: object_path,
            object_pose: Some(syn.placement.pose),
            trajectory: Some(traj_path),
            body_frames: frames.iter().map(|f| f.body.clone()).collect(),
            pelvis: Some(frames.iter().map(|f| f.pelvis).collect()),
            part_map: Some(part_map),
            gt_contacts: frames.iter().map(|f| f.contacts.clone()).collect(),
            grid: None,
        });
        truths.push(DatasetSampleTruth { id, tilt, table: table_truth, object_center: center, stand });
    }
    files.json(DATASET_FILE, &specs)?;
    Ok(DatasetTruth { seed, samples: truths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        assert_eq!("flat-room".parse::<FixtureKind>().unwrap(), FixtureKind::FlatRoom);
        assert_eq!("graded-penetration(0.0313)".parse::<FixtureKind>().unwrap(), FixtureKind::GradedPenetration(0.0313));
        assert_eq!("graded-penetration:0.0435".parse::<FixtureKind>().unwrap(), FixtureKind::GradedPenetration(0.0435));
        assert_eq!("dataset(3)".parse::<FixtureKind>().unwrap(), FixtureKind::Dataset(3));
        assert_eq!("dataset".parse::<FixtureKind>().unwrap(), FixtureKind::Dataset(5));
        assert!("graded-penetration".parse::<FixtureKind>().is_err());
        assert!("mountain".parse::<FixtureKind>().is_err());
        assert!("dataset(3".parse::<FixtureKind>().is_err());
    }

    #[test]
    fn ratios_must_be_multiples_of_a_basis_point() {
        assert_eq!(check_ratio(0.0362).unwrap(), 362);
        assert_eq!(check_ratio(0.0).unwrap(), 0);
        assert!(check_ratio(0.03625).is_err());
        assert!(check_ratio(0.9).is_err());
    }

    #[test]
    fn alignment_maps_scan_back_to_floor() {
        let t = floor_alignment(0.02, -0.03, 0.1);
        let p = Point::new(1.0, 2.0, 0.0);
        assert!((t.apply(&t.inverse().apply(&p)) - p).norm() < 1e-12);
    }
}
