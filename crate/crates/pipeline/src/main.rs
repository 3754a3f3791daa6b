use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::{info, LevelFilter};
use serde::Serialize;

use scenegrasp_core::floor::refine_scene;
use scenegrasp_core::geometry::io::write_mesh_with_labels;
use scenegrasp_core::geometry::LabelId;
use scenegrasp_core::penetration::{region_around, scene_grid, voxelize_filtered};
use scenegrasp_core::synth::{align_walk, augment_pelvis, place_object, AugmentContext, Trajectory};
use scenegrasp_core::{LabelTable, Point};
use scenegrasp_pipeline::fixtures::{gen_fixtures, FixtureKind};
use scenegrasp_pipeline::io::{load_mesh, mesh_format, read_json, write_atomic, write_json};
use scenegrasp_pipeline::run::{augment_grid, emit_json, label_bounds, SceneInput};
use scenegrasp_pipeline::{evaluate_dataset, logging, run_pipeline, Dataset, PipelineConfig, PipelineError, RunSummary};

#[derive(Parser)]
#[command(name = "scenegrasp", version, about = "Scene-aware grasp data synthesis and evaluation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples processed concurrently (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "info", value_parser = parse_level)]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SceneArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Align the labeled floor of a scene to z = 0.
    RefineFloor {
        #[command(flatten)]
        scene: SceneArgs,
        /// Refined scene mesh (.obj or .ply).
        #[arg(long)]
        out: PathBuf,
        /// Before/after floor statistics (JSON).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Place a walking trajectory so it ends within reach of a receptacle.
    AlignWalk {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        receptacle: String,
        #[arg(long)]
        trajectory: PathBuf,
        /// Alignment result (JSON); standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the transformed trajectory.
        #[arg(long)]
        aligned: Option<PathBuf>,
    },
    /// Rest an object on the receptacle near a pelvis position.
    PlaceObject {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        receptacle: String,
        #[arg(long)]
        object: PathBuf,
        /// End-of-walk pelvis position `x,y,z`.
        #[arg(long, value_parser = parse_point)]
        end: Point,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the placed object mesh.
        #[arg(long)]
        placed: Option<PathBuf>,
    },
    /// Sample alternative pelvis positions around a placed object.
    AugmentPelvis {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        receptacle: String,
        #[arg(long, value_parser = parse_point)]
        object_center: Point,
        #[arg(long, value_parser = parse_point)]
        pelvis: Point,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Voxelize a scene into a downward-filled binary grid.
    Voxelize {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Label names left out of the grid.
        #[arg(long)]
        exclude: Vec<String>,
        /// Region center `x,y,z`; the whole scene when omitted.
        #[arg(long, value_parser = parse_point, requires = "radius")]
        center: Option<Point>,
        #[arg(long)]
        radius: Option<f64>,
        /// Skip the downward fill.
        #[arg(long)]
        no_fill: bool,
        #[arg(long)]
        out: PathBuf,
        /// JSON dump of occupied cells (grids up to 32³ cells).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Score provided body frames of a dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all stages over a dataset, resuming completed samples.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic fixtures with a ground-truth sidecar.
    GenFixtures {
        /// flat-room, warped-floor, table-scene, boxed-object,
        /// graded-penetration(<ratio>) or dataset(<samples>).
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point, String> {
    let c: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{t}`")))
        .collect::<Result<_, _>>()?;
    match c[..] {
        [x, y, z] if c.iter().all(|v| v.is_finite()) => Ok(Point::new(x, y, z)),
        _ => Err("expected three finite comma-separated numbers".into()),
    }
}

fn parse_level(s: &str) -> Result<LevelFilter, String> {
    s.parse().map_err(|_| format!("unknown log level `{s}`"))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scene(args: &SceneArgs, receptacle: &str, cfg: &PipelineConfig) -> anyhow::Result<SceneInput> {
    Ok(SceneInput::load(&args.scene, &args.labels, receptacle, &cfg.refine.floor_label)?)
}

#[derive(Serialize)]
struct FloorReport<'a> {
    mode: scenegrasp_core::floor::RefineMode,
    passes: usize,
    before: &'a scenegrasp_core::floor::FloorStats,
    after: &'a scenegrasp_core::floor::FloorStats,
    windows: &'a [scenegrasp_core::floor::WindowTransform],
}

fn summarize(what: &str, s: &RunSummary) -> ExitCode {
    info!(
        target: "cli",
        "{what}: {} processed, {} skipped, {} failed",
        s.processed.len(),
        s.skipped.len(),
        s.failed.len()
    );
    if s.is_success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: &Cli, cfg: &PipelineConfig) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::RefineFloor { scene: args, out, stats } => {
            let labels = LabelTable::load(&args.labels)?;
            let floor = labels.require(&cfg.refine.floor_label)?;
            let mesh = load_mesh(&args.scene, Some(&labels))?;
            let r = refine_scene(&mesh, floor, &cfg.refine)?;
            write_mesh_with_labels(out, &r.scene, mesh_format(out)?, Some(&labels))?;
            info!(target: "refine", "mean |z| {:.6} -> {:.6} m ({} passes)", r.before.mean_abs_dev, r.after.mean_abs_dev, r.passes);
            let report = FloorReport { mode: r.mode, passes: r.passes, before: &r.before, after: &r.after, windows: &r.windows };
            if let Some(p) = stats {
                write_json(p, &report)?;
            }
        }
        Command::AlignWalk { scene: args, receptacle, trajectory, out, aligned } => {
            let s = scene(args, receptacle, cfg)?;
            let traj: Trajectory = read_json(trajectory)?;
            let r = align_walk(&traj, &s.mesh, s.receptacle, &[s.floor], &cfg.align)?;
            if let Some(p) = aligned {
                write_json(p, &traj.transformed(&r.transform))?;
            }
            emit_json(out.as_ref(), &r)?;
        }
        Command::PlaceObject { scene: args, receptacle, object, end, out, placed } => {
            let s = scene(args, receptacle, cfg)?;
            let obj = load_mesh(object, None)?;
            let r = place_object(&s.mesh, s.receptacle, &[s.floor], end, &obj, &cfg.place)?;
            if let Some(p) = placed {
                write_mesh_with_labels(p, &obj.transformed(&r.pose), mesh_format(p)?, None)?;
            }
            emit_json(out.as_ref(), &r)?;
        }
        Command::AugmentPelvis { scene: args, receptacle, object_center, pelvis, out } => {
            let s = scene(args, receptacle, cfg)?;
            let grid = augment_grid(&s, &s.mesh, object_center, cfg)?;
            let ctx = AugmentContext {
                grid: &grid,
                scene_bounds: s.mesh.aabb().context("scene mesh is empty")?,
                receptacle_bounds: label_bounds(&s.mesh, s.receptacle).context("receptacle has no faces")?,
                object_center: *object_center,
            };
            let r = augment_pelvis(&ctx, pelvis, &cfg.augment, cfg.seed)?;
            info!(target: "augment", "{} of {} samples kept", r.report.returned, r.report.sampled);
            emit_json(out.as_ref(), &r)?;
        }
        Command::Voxelize { scene: path, labels, exclude, center, radius, no_fill, out, dump } => {
            let table = labels.as_deref().map(LabelTable::load).transpose()?;
            let mesh = load_mesh(path, table.as_ref())?;
            let ids: Vec<LabelId> = match (&table, exclude.is_empty()) {
                (_, true) => Vec::new(),
                (Some(t), false) => exclude.iter().map(|n| t.require(n)).collect::<Result<_, _>>()?,
                (None, false) => bail!("--exclude needs --labels"),
            };
            let region = match (center, radius) {
                (Some(c), Some(r)) => region_around(c, *r, None).context("empty region")?,
                _ => mesh.aabb().context("scene mesh is empty")?.expanded(cfg.pen.voxel_size),
            };
            let grid = if *no_fill {
                voxelize_filtered(&mesh, |f| !ids.contains(&mesh.face_label(f)), &region, cfg.pen.voxel_size, cfg.pen.cell_budget)?
            } else {
                scene_grid(&mesh, &ids, &region, cfg.pen.voxel_size, cfg.pen.cell_budget)?
            };
            let mut bytes = Vec::new();
            grid.write_binary(&mut bytes)?;
            write_atomic(out, &bytes)?;
            if let Some(p) = dump {
                write_json(p, &grid.to_debug_json()?)?;
            }
            info!(target: "voxelize", "{} of {} cells occupied", grid.occupied_count(), grid.cell_count());
        }
        Command::Eval { dataset, out } => {
            let d = Dataset::load(dataset)?;
            return Ok(summarize("eval", &evaluate_dataset(&d, cfg, out)?));
        }
        Command::Run { dataset, out } => {
            let d = Dataset::load(dataset)?;
            return Ok(summarize("run", &run_pipeline(&d, cfg, out)?));
        }
        Command::GenFixtures { kind, out } => {
            let kind: FixtureKind = kind.parse()?;
            gen_fixtures(kind, cfg.seed, out)?;
            info!(target: "fixtures", "wrote {kind} (seed {}) to {}", cfg.seed, out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    logging::init(cli.log_level);
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            log::error!(target: "cli", "{e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg) {
        Ok(code) => code,
        Err(e) => {
            let usage = e.downcast_ref::<PipelineError>().is_some_and(PipelineError::is_usage);
            log::error!(target: "cli", "{e:#}");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
