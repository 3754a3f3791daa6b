use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use scenegrasp_core::contact::FrameRecord;
use scenegrasp_pipeline::fixtures::{gen_fixtures, FixtureKind, Truth, DATASET_FILE};
use scenegrasp_pipeline::manifest::SampleFailure;
use scenegrasp_pipeline::run::{CSV_FILE, FAILURE_FILE, MANIFEST_FILE, REPORTS_FILE, TABLE_FILE};
use scenegrasp_pipeline::{run_pipeline, Dataset, PipelineConfig};

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// A three-sample dataset shared by the tests; copied before mutation.
fn shared_dataset() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        gen_fixtures(FixtureKind::Dataset(3), 21, dir.path()).unwrap();
        dir
    })
    .path()
}

fn copy_tree(from: &Path, to: &Path) {
    for (rel, bytes) in files(from) {
        let dst = to.join(rel);
        std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
        std::fs::write(dst, bytes).unwrap();
    }
}

fn cfg() -> PipelineConfig {
    PipelineConfig { seed: 21, ..PipelineConfig::default() }
}

#[test]
fn rerun_skips_completed_samples_and_changes_nothing() {
    let data = Dataset::load(&shared_dataset().join(DATASET_FILE)).unwrap();
    let out = tempfile::tempdir().unwrap();
    let first = run_pipeline(&data, &cfg(), out.path()).unwrap();
    assert_eq!(first.processed.len(), 3);
    assert!(first.is_success());
    let before = files(out.path());
    for name in [REPORTS_FILE, CSV_FILE, TABLE_FILE] {
        assert!(before.contains_key(Path::new(name)), "{name} missing");
    }

    let second = run_pipeline(&data, &cfg(), out.path()).unwrap();
    assert!(second.processed.is_empty());
    assert_eq!(second.skipped, first.processed);
    assert_eq!(files(out.path()), before);
}

#[test]
fn interrupted_run_resumes_to_the_same_outputs() {
    let data = Dataset::load(&shared_dataset().join(DATASET_FILE)).unwrap();
    let full = tempfile::tempdir().unwrap();
    run_pipeline(&data, &cfg(), full.path()).unwrap();

    let partial = tempfile::tempdir().unwrap();
    run_pipeline(&data, &cfg(), partial.path()).unwrap();
    // lose one sample's manifest, as if the run stopped before writing it
    let victim = &data.samples[1].id;
    std::fs::remove_file(partial.path().join(victim).join(MANIFEST_FILE)).unwrap();
    let resumed = run_pipeline(&data, &cfg(), partial.path()).unwrap();
    assert_eq!(resumed.processed, vec![victim.clone()]);
    assert_eq!(resumed.skipped.len(), 2);
    assert_eq!(files(partial.path()), files(full.path()));
}

#[test]
fn changed_config_reprocesses_every_sample() {
    let data = Dataset::load(&shared_dataset().join(DATASET_FILE)).unwrap();
    let out = tempfile::tempdir().unwrap();
    run_pipeline(&data, &cfg(), out.path()).unwrap();
    let other = PipelineConfig { seed: 22, ..cfg() };
    let again = run_pipeline(&data, &other, out.path()).unwrap();
    assert_eq!(again.processed.len(), 3);
    assert!(again.skipped.is_empty());
}

#[test]
fn job_count_does_not_change_outputs() {
    let data = Dataset::load(&shared_dataset().join(DATASET_FILE)).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&data, &PipelineConfig { jobs: 1, ..cfg() }, a.path()).unwrap();
    run_pipeline(&data, &PipelineConfig { jobs: 3, ..cfg() }, b.path()).unwrap();
    assert_eq!(files(a.path()), files(b.path()));
}

#[test]
fn missing_input_fails_only_its_sample() {
    let data_dir = tempfile::tempdir().unwrap();
    copy_tree(shared_dataset(), data_dir.path());
    let data = Dataset::load(&data_dir.path().join(DATASET_FILE)).unwrap();
    let broken = data.samples[0].clone();
    std::fs::remove_file(data.resolve(&broken.object)).unwrap();

    let out = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&data, &cfg(), out.path()).unwrap();
    assert_eq!(summary.processed.len(), 2);
    assert_eq!(summary.failed.len(), 1);
    assert_eq!(summary.failed[0].id, broken.id);

    let failure: SampleFailure =
        serde_json::from_slice(&std::fs::read(out.path().join(&broken.id).join(FAILURE_FILE)).unwrap()).unwrap();
    assert_eq!(failure.id, broken.id);
    assert!(!out.path().join(&broken.id).join(MANIFEST_FILE).exists());

    let reports = std::fs::read_to_string(out.path().join(REPORTS_FILE)).unwrap();
    let records: Vec<FrameRecord> = reports.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!records.is_empty());
    for r in &records {
        match r {
            FrameRecord::Ok(m) => assert_ne!(m.sample_id, broken.id),
            FrameRecord::Failed(f) => assert_ne!(f.sample_id, broken.id),
        }
    }

    // restoring the file lets a rerun finish the remaining sample
    copy_tree(shared_dataset(), data_dir.path());
    let again = run_pipeline(&data, &cfg(), out.path()).unwrap();
    assert_eq!(again.processed, vec![broken.id.clone()]);
    assert!(!out.path().join(&broken.id).join(FAILURE_FILE).exists());
}

#[test]
fn fixtures_are_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let ta = gen_fixtures(FixtureKind::WarpedFloor, 7, a.path()).unwrap();
    let tb = gen_fixtures(FixtureKind::WarpedFloor, 7, b.path()).unwrap();
    gen_fixtures(FixtureKind::WarpedFloor, 8, c.path()).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(files(a.path()), files(b.path()));
    assert_ne!(files(a.path()), files(c.path()));
}

#[test]
fn table_scene_sidecar_matches_written_scene() {
    let dir = tempfile::tempdir().unwrap();
    let Truth::TableScene(t) = gen_fixtures(FixtureKind::TableScene, 3, dir.path()).unwrap() else {
        panic!("wrong sidecar kind");
    };
    assert_eq!(t.table_max.z, t.table_top);
    assert!(t.clutter_min.z >= t.table_top - 1e-12);
    assert!(t.end_pelvis.x < t.table_min.x);
    for name in ["scene.obj", "labels.json", "object.obj", "trajectory.json", "truth.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}
