use std::path::Path;

use serde::{Deserialize, Serialize};

use scenegrasp_core::contact::CONTACT_THRESHOLD;
use scenegrasp_core::floor::RefineConfig;
use scenegrasp_core::penetration::PenConfig;
use scenegrasp_core::synth::{AlignConfig, AugmentConfig, PlaceConfig};

use crate::{PipelineError, Result};

/// Everything a run depends on besides its inputs. Stored as TOML; every
/// section and field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Samples processed concurrently; 0 means one per available core.
    /// Never affects outputs.
    pub jobs: usize,
    /// Row label in the aggregate table.
    pub method: String,
    /// Contact distance threshold (meters).
    pub contact_threshold: f64,
    pub refine: RefineConfig,
    pub pen: PenConfig,
    pub align: AlignConfig,
    pub place: PlaceConfig,
    pub augment: AugmentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            method: "pipeline".into(),
            contact_threshold: CONTACT_THRESHOLD,
            refine: RefineConfig::default(),
            pen: PenConfig::default(),
            align: AlignConfig::default(),
            place: PlaceConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
        let cfg: Self = toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fails for seeds above `i64::MAX`, which TOML cannot hold.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let Err(e) = self.refine.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.pen.validate() {
            return bad(e);
        }
        if let Err(e) = self.augment.validate() {
            return bad(e.to_string());
        }
        let a = &self.align;
        if a.yaw_steps == 0 || !(a.lattice_step > 0.0 && a.reach_max > 0.0 && a.capsule_radius > 0.0 && a.voxel_size > 0.0) {
            return bad("align: yaw_steps, lattice_step, reach_max, capsule_radius and voxel_size must be positive".into());
        }
        let p = &self.place;
        if !(p.reach_max > 0.0 && p.voxel_size > 0.0) || !(-1.0..1.0).contains(&p.normal_z_min) {
            return bad("place: reach_max and voxel_size must be positive, normal_z_min in [-1, 1)".into());
        }
        if !(self.contact_threshold > 0.0) {
            return bad("contact_threshold must be positive".into());
        }
        if self.method.is_empty() || self.method.contains([',', '\n']) {
            return bad("method must be non-empty without commas or newlines".into());
        }
        Ok(())
    }

    /// Copy embedded in outputs: settings that cannot change results are
    /// normalized so snapshots compare equal across machines.
    pub fn snapshot(&self) -> Self {
        Self { jobs: 0, ..self.clone() }
    }
}
