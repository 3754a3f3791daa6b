//! End-to-end runs over a dataset manifest.
//!
//! Each sample goes through refine-floor, align-walk, place-object and
//! augment-pelvis, then every provided body frame is scored. Samples run
//! concurrently but each one only depends on its own inputs and its own
//! seed, so the degree of parallelism never changes the outputs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use scenegrasp_core::contact::{aggregate, evaluate_frame, render_csv, render_table, FailedFrame, FrameAssets, FrameRecord};
use scenegrasp_core::floor::{refine_scene, Refinement};
use scenegrasp_core::geometry::io::write_mesh_with_labels;
use scenegrasp_core::geometry::{LabelId, MeshFormat, MeshQuery};
use scenegrasp_core::penetration::{region_around, scene_grid, BodyFrame, BodyPart, PartMap, VoxelGrid};
use scenegrasp_core::synth::{
    align_walk, augment_pelvis, place_object, AlignResult, AugmentContext, AugmentResult, PlacementResult, Trajectory,
};
use scenegrasp_core::{Aabb, LabelTable, Point, RigidTransform, TriMesh};

use crate::config::PipelineConfig;
use crate::io::{io_err, load_mesh, read_json, to_json, write_atomic, write_if_changed, write_json};
use crate::manifest::{
    Dataset, FloorSummary, GtContacts, SampleFailure, SampleManifest, SampleSpec, StageSlot, WalkSummary,
};
use crate::seed::sample_seed;
use crate::{PipelineError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAILURE_FILE: &str = "failure.json";
pub const REFINED_SCENE_FILE: &str = "refined_scene.ply";
pub const REPORTS_FILE: &str = "reports.jsonl";
pub const CSV_FILE: &str = "aggregate.csv";
pub const TABLE_FILE: &str = "aggregate.txt";

/// A scene with its label ids resolved.
pub struct SceneInput {
    pub mesh: TriMesh,
    pub labels: LabelTable,
    pub floor: LabelId,
    pub receptacle: LabelId,
}

impl SceneInput {
    pub fn load(scene: &Path, labels: &Path, receptacle: &str, floor_label: &str) -> Result<Self> {
        let labels = LabelTable::load(labels)?;
        let floor = labels.require(floor_label)?;
        let receptacle = labels.require(receptacle)?;
        let mesh = load_mesh(scene, Some(&labels))?;
        Ok(Self { mesh, labels, floor, receptacle })
    }
}

/// Results of the four geometric stages for one sample.
pub struct Synthesis {
    pub refinement: Refinement,
    pub walk: AlignResult,
    pub end_pelvis: Point,
    pub placement: PlacementResult,
    pub placed_object: TriMesh,
    pub augmentation: AugmentResult,
}

/// A stage failure, tagged with the stage name.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: PipelineError,
}

fn at<E: Into<PipelineError>>(stage: &'static str) -> impl FnOnce(E) -> StageError {
    move |e| StageError { stage, error: e.into() }
}

/// Bounds of the faces carrying `label`.
pub fn label_bounds(mesh: &TriMesh, label: LabelId) -> Option<Aabb> {
    let faces = mesh.faces_with_label(label);
    Aabb::from_points(mesh.vertices_of_faces(&faces).iter().map(|&v| &mesh.vertices()[v]))
}

/// Occupancy used by the pelvis augmentation: the floor left out, covering
/// the sampling sphere plus half the standing-room footprint, from the
/// ground to above the cuboid.
pub fn augment_grid(scene: &SceneInput, scene_mesh: &TriMesh, center: &Point, cfg: &PipelineConfig) -> Result<VoxelGrid> {
    let a = &cfg.augment;
    let reach = a.radius + 0.5 * a.cuboid[0].max(a.cuboid[1]) + cfg.pen.voxel_size;
    let region = Aabb::new(
        Point::new(center.x - reach, center.y - reach, 0.0f64.min(center.z - a.radius)),
        Point::new(center.x + reach, center.y + reach, a.cuboid[2].max(center.z + a.radius) + cfg.pen.voxel_size),
    );
    Ok(scene_grid(scene_mesh, &[scene.floor], &region, cfg.pen.voxel_size, cfg.pen.cell_budget)?)
}

/// Scoring grid around the object, clipped to the scene footprint when
/// configured.
pub fn eval_grid(scene_mesh: &TriMesh, exclude: &[LabelId], center: &Point, cfg: &PipelineConfig) -> Result<VoxelGrid> {
    let r = cfg.pen.region_radius;
    let clip = if cfg.pen.clip_to_scene {
        let b = scene_mesh.aabb().ok_or(PipelineError::Fixture("scene mesh is empty".into()))?;
        Some(Aabb::new(Point::new(b.min.x, b.min.y, center.z - r), Point::new(b.max.x, b.max.y, center.z + r)))
    } else {
        None
    };
    let region = region_around(center, r, clip.as_ref())
        .ok_or_else(|| PipelineError::Config("evaluation region does not intersect the scene".into()))?;
    Ok(scene_grid(scene_mesh, exclude, &region, cfg.pen.voxel_size, cfg.pen.cell_budget)?)
}

/// Refine, align, place and augment one sample.
pub fn synthesize(
    scene: &SceneInput,
    traj: &Trajectory,
    object: &TriMesh,
    cfg: &PipelineConfig,
    seed: u64,
) -> std::result::Result<Synthesis, StageError> {
    let refinement = refine_scene(&scene.mesh, scene.floor, &cfg.refine).map_err(at("refine"))?;
    let refined = &refinement.scene;
    let walk = align_walk(traj, refined, scene.receptacle, &[scene.floor], &cfg.align).map_err(at("align"))?;
    let end_pelvis = walk.transform.apply(&traj.end());
    let placement =
        place_object(refined, scene.receptacle, &[scene.floor], &end_pelvis, object, &cfg.place).map_err(at("place"))?;
    let placed_object = object.transformed(&placement.pose);

    let grid = augment_grid(scene, refined, &placement.object_center, cfg).map_err(at("augment"))?;
    let ctx = AugmentContext {
        grid: &grid,
        scene_bounds: refined.aabb().expect("refined scene is non-empty"),
        receptacle_bounds: label_bounds(refined, scene.receptacle).expect("receptacle was found by placement"),
        object_center: placement.object_center,
    };
    let augmentation = augment_pelvis(&ctx, &end_pelvis, &cfg.augment, seed).map_err(at("augment"))?;
    Ok(Synthesis { refinement, walk, end_pelvis, placement, placed_object, augmentation })
}

fn load_frames(dataset: &Dataset, spec: &SampleSpec) -> Result<Vec<Result<BodyFrame>>> {
    if spec.body_frames.is_empty() {
        return Ok(Vec::new());
    }
    let part_map: PartMap = read_json(&dataset.resolve(spec.part_map.as_ref().expect("checked at load")))?;
    let parts: Vec<BodyPart> = part_map.to_vec()?;
    Ok(spec
        .body_frames
        .iter()
        .enumerate()
        .map(|(f, path)| {
            let mesh = load_mesh(&dataset.resolve(path), None)?;
            let vertices = mesh.vertices().to_vec();
            let body = match &spec.pelvis {
                Some(p) => BodyFrame::new(vertices, parts.clone(), p[f])?,
                None => BodyFrame::with_derived_pelvis(vertices, parts.clone())?,
            };
            Ok(body)
        })
        .collect())
}

/// Score every body frame of a sample against an object and a scene grid.
/// Frame-level problems become failed records rather than errors.
pub fn score_frames(
    dataset: &Dataset,
    spec: &SampleSpec,
    grid: &VoxelGrid,
    object: &TriMesh,
    threshold: f64,
) -> Result<Vec<FrameRecord>> {
    let query = MeshQuery::new(object);
    let frames = load_frames(dataset, spec)?;
    let mut out = Vec::with_capacity(frames.len());
    for (f, body) in frames.into_iter().enumerate() {
        let scored = body.and_then(|body| {
            let gt: GtContacts = read_json(&dataset.resolve(&spec.gt_contacts[f]))?;
            let (gt_object, gt_floor) = gt.sets();
            let assets = FrameAssets { grid, object: &query, gt_object: &gt_object, gt_floor: &gt_floor, threshold };
            Ok(evaluate_frame(&spec.id, f, &body, &assets)?)
        });
        out.push(match scored {
            Ok(r) => FrameRecord::Ok(r),
            Err(e) => FrameRecord::Failed(FailedFrame { sample_id: spec.id.clone(), frame: f, reason: e.to_string() }),
        });
    }
    Ok(out)
}

fn process_sample(
    dataset: &Dataset,
    spec: &SampleSpec,
    cfg: &PipelineConfig,
    dir: &Path,
) -> std::result::Result<SampleManifest, StageError> {
    let missing = dataset.missing_files(spec);
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(StageError { stage: "load", error: PipelineError::Manifest(format!("missing files: {}", list.join(", "))) });
    }
    let Some(traj_path) = &spec.trajectory else {
        return Err(StageError { stage: "load", error: PipelineError::Manifest("run needs a trajectory".into()) });
    };
    let seed = sample_seed(cfg.seed, &spec.id);
    let scene = SceneInput::load(&dataset.resolve(&spec.scene), &dataset.resolve(&spec.labels), &spec.receptacle, &cfg.refine.floor_label)
        .map_err(at("load"))?;
    let traj: Trajectory = read_json(&dataset.resolve(traj_path)).map_err(at("load"))?;
    let object = load_mesh(&dataset.resolve(&spec.object), None).map_err(at("load"))?;

    let syn = synthesize(&scene, &traj, &object, cfg, seed)?;
    let grid = eval_grid(&syn.refinement.scene, &[scene.floor], &syn.placement.object_center, cfg).map_err(at("eval"))?;
    let frames = score_frames(dataset, spec, &grid, &syn.placed_object, cfg.contact_threshold).map_err(at("eval"))?;

    std::fs::create_dir_all(dir).map_err(io_err(dir)).map_err(at("write"))?;
    let tmp = dir.join(format!("{REFINED_SCENE_FILE}.tmp"));
    write_mesh_with_labels(&tmp, &syn.refinement.scene, MeshFormat::PlyBinary, None).map_err(at("write"))?;
    let dest = dir.join(REFINED_SCENE_FILE);
    std::fs::rename(&tmp, &dest).map_err(io_err(&dest)).map_err(at("write"))?;
    let r = syn.refinement;
    Ok(SampleManifest {
        id: spec.id.clone(),
        seed,
        config: cfg.snapshot(),
        input: spec.clone(),
        floor: FloorSummary {
            mode: r.mode,
            passes: r.passes,
            before: r.before,
            after: r.after,
            windows: r.windows,
            refined_scene: REFINED_SCENE_FILE.into(),
        },
        walk: WalkSummary {
            transform: syn.walk.transform,
            candidate: syn.walk.candidate,
            candidates_evaluated: syn.walk.candidates_evaluated,
            end_pelvis: syn.end_pelvis,
        },
        placement: syn.placement,
        augmentation: syn.augmentation,
        grasp: StageSlot::pass_through(&spec.body_frames),
        infill: StageSlot::pass_through(&[]),
        frames,
    })
}

/// A finished manifest counts only if it was produced from the same input
/// row and configuration.
fn completed(dir: &Path, spec: &SampleSpec, cfg: &PipelineConfig) -> Option<SampleManifest> {
    let m: SampleManifest = read_json(&dir.join(MANIFEST_FILE)).ok()?;
    (m.id == spec.id && &m.input == spec && m.config == cfg.snapshot()).then_some(m)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub processed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<SampleFailure>,
}

impl RunSummary {
    pub fn is_success(&self) -> bool {
        self.failed.is_empty()
    }
}

fn worker_count(cfg: &PipelineConfig, n: usize) -> usize {
    let jobs = if cfg.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.jobs
    };
    jobs.clamp(1, n.max(1))
}

/// Run `work` over the samples on up to `cfg.jobs` threads; results come
/// back in sample order.
fn for_each_sample<R: Send>(dataset: &Dataset, cfg: &PipelineConfig, work: impl Fn(&SampleSpec) -> R + Sync) -> Vec<R> {
    let n = dataset.samples.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..worker_count(cfg, n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = work(&dataset.samples[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Write `reports.jsonl`, `aggregate.csv` and `aggregate.txt`. Frames of
/// samples that failed as a whole count as failed frames.
pub fn write_reports(out: &Path, records: &[FrameRecord], extra_failed: usize, method: &str) -> Result<()> {
    let mut lines = String::new();
    for r in records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write_if_changed(&out.join(REPORTS_FILE), lines.as_bytes())?;
    let ok: Vec<_> = records
        .iter()
        .filter_map(|r| match r {
            FrameRecord::Ok(m) => Some(m.clone()),
            FrameRecord::Failed(_) => None,
        })
        .collect();
    let failed = records.len() - ok.len() + extra_failed;
    let rows = if ok.is_empty() { Vec::new() } else { vec![aggregate(&ok, failed, method)?] };
    write_if_changed(&out.join(CSV_FILE), render_csv(&rows).as_bytes())?;
    write_if_changed(&out.join(TABLE_FILE), render_table(&rows).as_bytes())?;
    Ok(())
}

/// Process every sample of `dataset` into `out/<id>/`, skipping samples
/// already completed with the same input and configuration, then rewrite
/// the combined reports from all completed manifests.
pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    enum Outcome {
        Done(Box<SampleManifest>),
        Skipped(Box<SampleManifest>),
        Failed(SampleFailure),
    }
    let outcomes = for_each_sample(dataset, cfg, |spec| {
        let dir = out.join(&spec.id);
        if let Some(m) = completed(&dir, spec, cfg) {
            info!(target: "run", "sample {} already complete, skipped", spec.id);
            return Outcome::Skipped(Box::new(m));
        }
        info!(target: "run", "sample {} started", spec.id);
        let result = process_sample(dataset, spec, cfg, &dir).and_then(|m| {
            write_json(&dir.join(MANIFEST_FILE), &m).map_err(at("write"))?;
            Ok(m)
        });
        match result {
            Ok(m) => {
                let _ = std::fs::remove_file(dir.join(FAILURE_FILE));
                info!(target: "run", "sample {} finished with {} frames", spec.id, m.frames.len());
                Outcome::Done(Box::new(m))
            }
            Err(e) => {
                let failure = SampleFailure { id: spec.id.clone(), stage: e.stage.into(), reason: e.error.to_string() };
                warn!(target: "run", "sample {} failed at {}: {}", spec.id, failure.stage, failure.reason);
                let _ = write_json(&dir.join(FAILURE_FILE), &failure);
                Outcome::Failed(failure)
            }
        }
    });

    let mut summary = RunSummary::default();
    let mut manifests = Vec::new();
    let mut failed_frames = 0;
    for (spec, o) in dataset.samples.iter().zip(outcomes) {
        match o {
            Outcome::Done(m) => {
                summary.processed.push(m.id.clone());
                manifests.push(*m);
            }
            Outcome::Skipped(m) => {
                summary.skipped.push(m.id.clone());
                manifests.push(*m);
            }
            Outcome::Failed(f) => {
                failed_frames += spec.body_frames.len();
                summary.failed.push(f);
            }
        }
    }
    manifests.sort_by(|a, b| a.id.cmp(&b.id));
    let records: Vec<FrameRecord> = manifests.into_iter().flat_map(|m| m.frames).collect();
    write_reports(out, &records, failed_frames, &cfg.method)?;
    Ok(summary)
}

/// Score the provided frames of every sample against its scene and posed
/// object without running the synthesis stages.
pub fn evaluate_dataset(dataset: &Dataset, cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let results = for_each_sample(dataset, cfg, |spec| -> std::result::Result<Vec<FrameRecord>, StageError> {
        let missing = dataset.missing_files(spec);
        if !missing.is_empty() {
            let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
            return Err(StageError { stage: "load", error: PipelineError::Manifest(format!("missing files: {}", list.join(", "))) });
        }
        let labels = LabelTable::load(&dataset.resolve(&spec.labels)).map_err(at("load"))?;
        let scene = load_mesh(&dataset.resolve(&spec.scene), Some(&labels)).map_err(at("load"))?;
        let pose = spec.object_pose.unwrap_or_else(RigidTransform::identity);
        let object = load_mesh(&dataset.resolve(&spec.object), None).map_err(at("load"))?.transformed(&pose);
        let grid = match &spec.grid {
            Some(g) => {
                let path = dataset.resolve(g);
                let f = std::fs::File::open(&path).map_err(io_err(&path)).map_err(at("load"))?;
                VoxelGrid::read_binary(std::io::BufReader::new(f)).map_err(at("load"))?
            }
            None => {
                let exclude: Vec<LabelId> = labels.id(&cfg.refine.floor_label).into_iter().collect();
                let center = object.aabb().ok_or(PipelineError::Fixture("object mesh is empty".into())).map_err(at("eval"))?.center();
                eval_grid(&scene, &exclude, &center, cfg).map_err(at("eval"))?
            }
        };
        score_frames(dataset, spec, &grid, &object, cfg.contact_threshold).map_err(at("eval"))
    });
    let mut summary = RunSummary::default();
    let mut records = Vec::new();
    let mut failed_frames = 0;
    for (spec, r) in dataset.samples.iter().zip(results) {
        match r {
            Ok(frames) => {
                summary.processed.push(spec.id.clone());
                records.push((spec.id.clone(), frames));
            }
            Err(e) => {
                warn!(target: "eval", "sample {} failed at {}: {}", spec.id, e.stage, e.error);
                failed_frames += spec.body_frames.len();
                summary.failed.push(SampleFailure { id: spec.id.clone(), stage: e.stage.into(), reason: e.error.to_string() });
            }
        }
    }
    records.sort_by(|a, b| a.0.cmp(&b.0));
    let records: Vec<FrameRecord> = records.into_iter().flat_map(|(_, f)| f).collect();
    write_reports(out, &records, failed_frames, &cfg.method)?;
    Ok(summary)
}

/// Write any serializable value as pretty JSON to `path`, or to standard
/// output when `path` is `None`.
pub fn emit_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, to_json(value).as_bytes()),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}
