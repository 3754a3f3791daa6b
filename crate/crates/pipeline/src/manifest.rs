//! Dataset manifests (inputs) and per-sample output manifests.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scenegrasp_core::contact::{ContactSet, ContactTarget, FrameRecord};
use scenegrasp_core::floor::{FloorStats, RefineMode, WindowTransform};
use scenegrasp_core::synth::{AlignCandidate, AugmentResult, PlacementResult};
use scenegrasp_core::{Point, RigidTransform};

use crate::config::PipelineConfig;
use crate::io::read_json;
use crate::{PipelineError, Result};

/// One row of a dataset manifest. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub id: String,
    pub scene: PathBuf,
    pub labels: PathBuf,
    /// Label name of the supporting furniture.
    pub receptacle: String,
    pub object: PathBuf,
    /// Object pose used by `eval`; `run` places the object itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_pose: Option<RigidTransform>,
    /// Walking trajectory (JSON); `run` requires it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    /// Body meshes (OBJ or PLY) scored by the evaluation, in frame order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub body_frames: Vec<PathBuf>,
    /// Pelvis marker per body frame; derived from pelvis-labeled vertices
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pelvis: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_map: Option<PathBuf>,
    /// Ground-truth contacts per body frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_contacts: Vec<PathBuf>,
    /// Precomputed downward-filled scene grid used by `eval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
}

impl SampleSpec {
    pub fn paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = vec![&self.scene, &self.labels, &self.object];
        out.extend(self.trajectory.as_deref());
        out.extend(self.body_frames.iter().map(PathBuf::as_path));
        out.extend(self.part_map.as_deref());
        out.extend(self.gt_contacts.iter().map(PathBuf::as_path));
        out.extend(self.grid.as_deref());
        out
    }

    fn check_shape(&self) -> std::result::Result<(), String> {
        let ok_id = !self.id.is_empty()
            && self.id != "."
            && self.id != ".."
            && self.id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
        if !ok_id {
            return Err(format!("sample id `{}` must be non-empty ASCII letters, digits, `.`, `_` or `-`", self.id));
        }
        let n = self.body_frames.len();
        if n > 0 && self.part_map.is_none() {
            return Err(format!("sample `{}` has body frames but no part map", self.id));
        }
        if self.gt_contacts.len() != n {
            return Err(format!("sample `{}` has {n} body frames but {} contact files", self.id, self.gt_contacts.len()));
        }
        if let Some(p) = &self.pelvis {
            if p.len() != n {
                return Err(format!("sample `{}` has {n} body frames but {} pelvis markers", self.id, p.len()));
            }
        }
        Ok(())
    }
}

/// A loaded dataset manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub base: PathBuf,
    pub samples: Vec<SampleSpec>,
}

impl Dataset {
    /// Parse and check ids and per-sample shape. File existence is checked
    /// per sample by [`Dataset::missing_files`] so one bad row does not
    /// abort the others.
    pub fn load(path: &Path) -> Result<Self> {
        let samples: Vec<SampleSpec> = read_json(path).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, samples)
    }

    pub fn new(base: PathBuf, samples: Vec<SampleSpec>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &samples {
            s.check_shape().map_err(PipelineError::Manifest)?;
            if !seen.insert(s.id.as_str()) {
                return Err(PipelineError::Manifest(format!("duplicate sample id `{}`", s.id)));
            }
        }
        Ok(Self { base, samples })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn missing_files(&self, s: &SampleSpec) -> Vec<PathBuf> {
        s.paths().into_iter().map(|p| self.resolve(p)).filter(|p| !p.is_file()).collect()
    }
}

/// Ground-truth contact ids of one frame: `{"object": [...], "floor": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtContacts {
    pub object: Vec<usize>,
    pub floor: Vec<usize>,
}

impl GtContacts {
    pub fn sets(&self) -> (ContactSet, ContactSet) {
        (
            ContactSet::new(ContactTarget::Object, self.object.clone()),
            ContactSet::new(ContactTarget::Floor, self.floor.clone()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSummary {
    pub mode: RefineMode,
    pub passes: usize,
    pub before: FloorStats,
    pub after: FloorStats,
    pub windows: Vec<WindowTransform>,
    /// Refined scene written next to the manifest.
    pub refined_scene: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub transform: RigidTransform,
    pub candidate: AlignCandidate,
    pub candidates_evaluated: usize,
    pub end_pelvis: Point,
}

/// Slot for a learned stage that this toolkit does not run. Frames are
/// taken as provided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSlot {
    pub mode: String,
    pub frames: Vec<PathBuf>,
}

impl StageSlot {
    pub fn pass_through(frames: &[PathBuf]) -> Self {
        Self { mode: "pass_through".into(), frames: frames.to_vec() }
    }
}

/// Everything produced for one sample; written as `<out>/<id>/manifest.json`
/// once all stages finish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub id: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub input: SampleSpec,
    pub floor: FloorSummary,
    pub walk: WalkSummary,
    pub placement: PlacementResult,
    pub augmentation: AugmentResult,
    pub grasp: StageSlot,
    pub infill: StageSlot,
    pub frames: Vec<FrameRecord>,
}

/// Written instead of a manifest when a sample fails; a rerun retries it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub stage: String,
    pub reason: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str) -> SampleSpec {
        SampleSpec {
            id: id.into(),
            scene: "s.obj".into(),
            labels: "l.json".into(),
            receptacle: "table".into(),
            object: "o.obj".into(),
            object_pose: None,
            trajectory: None,
            body_frames: vec![],
            pelvis: None,
            part_map: None,
            gt_contacts: vec![],
            grid: None,
        }
    }

    #[test]
    fn ids_are_checked() {
        assert!(Dataset::new(".".into(), vec![spec("a"), spec("b")]).is_ok());
        assert!(Dataset::new(".".into(), vec![spec("a"), spec("a")]).is_err());
        assert!(Dataset::new(".".into(), vec![spec("../x")]).is_err());
        assert!(Dataset::new(".".into(), vec![spec("")]).is_err());
    }

    #[test]
    fn frame_counts_must_agree() {
        let mut s = spec("a");
        s.body_frames = vec!["f0.obj".into()];
        s.part_map = Some("p.json".into());
        assert!(Dataset::new(".".into(), vec![s.clone()]).is_err());
        s.gt_contacts = vec!["c0.json".into()];
        assert!(Dataset::new(".".into(), vec![s]).is_ok());
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let d = Dataset::new("/data/set".into(), vec![spec("a")]).unwrap();
        assert_eq!(d.resolve(Path::new("s.obj")), PathBuf::from("/data/set/s.obj"));
        assert_eq!(d.resolve(Path::new("/abs.obj")), PathBuf::from("/abs.obj"));
        assert_eq!(d.missing_files(&d.samples[0]).len(), 3);
    }
}
