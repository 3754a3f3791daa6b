//! Contact annotation, precision/recall/F1, per-frame reports and
//! aggregation into comparison-table rows.
//!
//! Contacts are compared as sets of body vertex ids. Empty-set conventions
//! for [`prf1`]: an empty prediction against non-empty truth scores
//! P = R = F1 = 0; empty against empty scores 1 (nothing to find, nothing
//! wrongly claimed). Aggregation macro-averages per-frame values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::geometry::{GeometryError, MeshQuery};
use crate::penetration::{
    floor_penetration, object_penetration, scene_penetration, BodyFrame, BodyPart, PenetrationError, VoxelGrid,
};

/// Contact distance threshold (meters).
pub const CONTACT_THRESHOLD: f64 = 0.02;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("body frame has no vertices")]
    EmptyBody,
    #[error("contact threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("body frame has no foot or lower-leg vertices")]
    NoFloorVertices,
    #[error("cannot compare {0:?} contacts against {1:?} contacts")]
    TargetMismatch(ContactTarget, ContactTarget),
    #[error("contact id {id} out of range for a body with {len} vertices")]
    IdOutOfRange { id: usize, len: usize },
    #[error("no successful frame reports to aggregate")]
    NothingToAggregate,
    #[error(transparent)]
    Penetration(#[from] PenetrationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactTarget {
    Object,
    Floor,
}

/// Body vertices in contact with a target; ids sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactSet {
    pub target: ContactTarget,
    #[serde(rename = "vertex_ids")]
    ids: Vec<usize>,
}

impl ContactSet {
    pub fn new(target: ContactTarget, mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self { target, ids }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    /// Size of the intersection with `other`.
    pub fn overlap(&self, other: &ContactSet) -> usize {
        let (mut a, mut b, mut n) = (0, 0, 0);
        while a < self.ids.len() && b < other.ids.len() {
            match self.ids[a].cmp(&other.ids[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        n
    }

    pub fn validate_for(&self, body_len: usize) -> Result<(), ContactError> {
        match self.ids.last() {
            Some(&id) if id >= body_len => Err(ContactError::IdOutOfRange { id, len: body_len }),
            _ => Ok(()),
        }
    }

    /// Relabel ids through a vertex permutation (new `i` = old `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> ContactSet {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Self::new(self.target, self.ids.iter().map(|&i| inverse[i]).collect())
    }
}

fn check_threshold(threshold: f64) -> Result<(), ContactError> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(ContactError::BadThreshold(threshold))
    }
}

/// Vertices closer than `threshold` to the object surface. For a closed
/// object, vertices inside it are in contact regardless of depth.
pub fn annotate_contacts(body: &BodyFrame, object: &MeshQuery, threshold: f64) -> Result<ContactSet, ContactError> {
    if body.is_empty() {
        return Err(ContactError::EmptyBody);
    }
    check_threshold(threshold)?;
    let hits = exec::map(body.vertices(), |v| -> Result<bool, GeometryError> {
        let d = object.distance(v)?;
        Ok(d < threshold || (object.is_watertight() && object.is_inside(v)))
    });
    let mut ids = Vec::new();
    for (i, h) in hits.into_iter().enumerate() {
        if h? {
            ids.push(i);
        }
    }
    Ok(ContactSet::new(ContactTarget::Object, ids))
}

/// Foot and lower-leg vertices within `threshold` of the z = 0 plane.
pub fn floor_contacts(body: &BodyFrame, threshold: f64) -> Result<ContactSet, ContactError> {
    check_threshold(threshold)?;
    let legs = body.ids_where(|p| matches!(p, BodyPart::Foot | BodyPart::LowerLeg));
    if legs.is_empty() {
        return Err(ContactError::NoFloorVertices);
    }
    let ids = legs
        .into_iter()
        .filter(|&i| body.vertices()[i].z.abs() < threshold)
        .collect();
    Ok(ContactSet::new(ContactTarget::Floor, ids))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf1 {
    fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

pub fn prf1(predicted: &ContactSet, truth: &ContactSet) -> Result<Prf1, ContactError> {
    if predicted.target != truth.target {
        return Err(ContactError::TargetMismatch(predicted.target, truth.target));
    }
    let tp = predicted.overlap(truth) as f64;
    let ratio = |denom: usize, other_empty: bool| {
        if denom > 0 {
            tp / denom as f64
        } else if other_empty {
            1.0
        } else {
            0.0
        }
    };
    Ok(Prf1::from_pr(
        ratio(predicted.len(), truth.is_empty()),
        ratio(truth.len(), predicted.is_empty()),
    ))
}

/// Metrics for one evaluated body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sample_id: String,
    pub frame: usize,
    pub scene_pen: f64,
    pub floor_pen: f64,
    /// Mean signed distance of hand vertices to the object (meters).
    pub object_pen_sdf: f64,
    pub object_pen_vertices: usize,
    pub object_contact: Prf1,
    pub floor_contact: Prf1,
}

/// Scene-side inputs for [`evaluate_frame`].
pub struct FrameAssets<'a> {
    /// Downward-filled scene occupancy.
    pub grid: &'a VoxelGrid,
    pub object: &'a MeshQuery,
    pub gt_object: &'a ContactSet,
    pub gt_floor: &'a ContactSet,
    pub threshold: f64,
}

pub fn evaluate_frame(
    sample_id: &str,
    frame: usize,
    body: &BodyFrame,
    assets: &FrameAssets<'_>,
) -> Result<MetricsReport, ContactError> {
    assets.gt_object.validate_for(body.len())?;
    assets.gt_floor.validate_for(body.len())?;
    let scene_pen = scene_penetration(body, assets.grid)?;
    let floor_pen = floor_penetration(body)?;
    let obj = object_penetration(body, assets.object)?;
    let pred_obj = annotate_contacts(body, assets.object, assets.threshold)?;
    let pred_floor = floor_contacts(body, assets.threshold)?;
    Ok(MetricsReport {
        sample_id: sample_id.to_string(),
        frame,
        scene_pen,
        floor_pen,
        object_pen_sdf: obj.mean_sdf,
        object_pen_vertices: obj.penetrating,
        object_contact: prf1(&pred_obj, assets.gt_object)?,
        floor_contact: prf1(&pred_floor, assets.gt_floor)?,
    })
}

/// A frame that could not be scored; kept out of the means but counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedFrame {
    pub sample_id: String,
    pub frame: usize,
    pub reason: String,
}

/// Per-frame JSON-lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FrameRecord {
    Ok(MetricsReport),
    Failed(FailedFrame),
}

/// Macro-averaged metrics for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub count: usize,
    pub failed: usize,
    pub scene_pen: f64,
    pub object_pen_sdf: f64,
    pub floor_pen: f64,
    pub object_contact: Prf1,
    pub floor_contact: Prf1,
}

/// Arithmetic means over successful reports, summed in (sample, frame)
/// order so the result does not depend on input order.
pub fn aggregate(reports: &[MetricsReport], failed: usize, method: &str) -> Result<AggregateRow, ContactError> {
    if reports.is_empty() {
        return Err(ContactError::NothingToAggregate);
    }
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.sample_id, a.frame).cmp(&(&b.sample_id, b.frame)));
    let n = sorted.len() as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| sorted.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(AggregateRow {
        method: method.to_string(),
        count: sorted.len(),
        failed,
        scene_pen: mean(&|r| r.scene_pen),
        object_pen_sdf: mean(&|r| r.object_pen_sdf),
        floor_pen: mean(&|r| r.floor_pen),
        object_contact: Prf1 {
            precision: mean(&|r| r.object_contact.precision),
            recall: mean(&|r| r.object_contact.recall),
            f1: mean(&|r| r.object_contact.f1),
        },
        floor_contact: Prf1 {
            precision: mean(&|r| r.floor_contact.precision),
            recall: mean(&|r| r.floor_contact.recall),
            f1: mean(&|r| r.floor_contact.f1),
        },
    })
}

pub const CSV_HEADER: &str = "method,samples,failed,\
penetration_scene,penetration_object_sdf_m,penetration_floor,\
object_contact_precision,object_contact_recall,object_contact_f1,\
floor_contact_precision,floor_contact_recall,floor_contact_f1";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.method),
            r.count,
            r.failed,
            r.scene_pen,
            r.object_pen_sdf,
            r.floor_pen,
            r.object_contact.precision,
            r.object_contact.recall,
            r.object_contact.f1,
            r.floor_contact.precision,
            r.floor_contact.recall,
            r.floor_contact.f1,
        );
    }
    out
}

/// Aligned text table grouped as Penetration / Object Contact / Floor Contact.
pub fn render_table(rows: &[AggregateRow]) -> String {
    let cells: Vec<[String; 10]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{:.2}%", r.scene_pen * 100.0),
                format!("{:.4} m", r.object_pen_sdf),
                format!("{:.2}%", r.floor_pen * 100.0),
                format!("{:.2}", r.object_contact.precision),
                format!("{:.2}", r.object_contact.recall),
                format!("{:.2}", r.object_contact.f1),
                format!("{:.2}", r.floor_contact.precision),
                format!("{:.2}", r.floor_contact.recall),
                format!("{:.2}", r.floor_contact.f1),
            ]
        })
        .collect();
    let heads = [
        "Method", "Scene", "Object", "Floor", "Precision", "Recall", "F1", "Precision", "Recall", "F1",
    ];
    let mut w: Vec<usize> = heads.iter().map(|h| h.chars().count()).collect();
    for row in &cells {
        for (i, c) in row.iter().enumerate() {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let groups = [("", 0..1), ("Penetration (↓)", 1..4), ("Object Contact (↑)", 4..7), ("Floor Contact (↑)", 7..10)];
    // widen the last column of a group if its title is wider than the columns
    for (title, range) in groups.iter() {
        let span: usize = range.clone().map(|i| w[i]).sum::<usize>() + 2 * (range.len() - 1);
        let need = title.chars().count();
        if need > span {
            w[range.end - 1] += need - span;
        }
    }
    let line = |vals: &[String]| {
        let mut s = String::new();
        for (gi, (_, range)) in groups.iter().enumerate() {
            if gi > 0 {
                s.push_str(" | ");
            }
            let parts: Vec<String> = range
                .clone()
                .map(|i| {
                    if i == 0 {
                        format!("{:<width$}", vals[i], width = w[i])
                    } else {
                        format!("{:>width$}", vals[i], width = w[i])
                    }
                })
                .collect();
            s.push_str(&parts.join("  "));
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    let mut title_line = String::new();
    for (gi, (title, range)) in groups.iter().enumerate() {
        if gi > 0 {
            title_line.push_str(" | ");
        }
        let span: usize = range.clone().map(|i| w[i]).sum::<usize>() + 2 * (range.len() - 1);
        let _ = write!(title_line, "{:^span$}", title);
    }
    out.push_str(title_line.trim_end());
    out.push('\n');
    out.push_str(&line(&heads.map(String::from)));
    out.push('\n');
    let total: usize = w.iter().sum::<usize>() + 2 * 6 + 3 * 3;
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
