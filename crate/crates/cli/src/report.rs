use std::collections::BTreeMap;

use serde::Serialize;

use dentreg::arch::{LabeledArch, ToothCode};
use dentreg::geom::{Point3, PointCloud, RigidTransform};
use dentreg::synth::{percentile, surface_distances, IcpSummary};

pub type LandmarkPairs = Vec<(ToothCode, Point3, Point3)>;

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    /// Directed Hausdorff distance, source teeth → target teeth, mm.
    pub e_surf: f64,
    pub e_surf_p95: f64,
    /// Mean landmark distance, mm; present when landmarks were given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_land: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToothReport {
    pub code: ToothCode,
    pub e_surf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_land: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageDetail {
    #[serde(flatten)]
    pub summary: StageReport,
    pub per_tooth: Vec<ToothReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrateReport {
    pub source_teeth: usize,
    pub target_teeth: usize,
    pub global_matches: usize,
    pub global_inliers: usize,
    pub registration: IcpSummary,
    pub post_global: StageReport,
    pub post_registration: StageDetail,
    pub post_correction: StageDetail,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub registered: StageDetail,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected: Option<StageDetail>,
}

/// Metrics of the source under per-tooth transforms; teeth missing from
/// `per_tooth` use `fallback`. Only codes present in both arches count.
pub fn evaluate_stage(
    src: &LabeledArch,
    tgt: &LabeledArch,
    fallback: &RigidTransform,
    per_tooth: &BTreeMap<ToothCode, RigidTransform>,
    landmarks: Option<&LandmarkPairs>,
) -> StageDetail {
    let transform_of = |c: &ToothCode| *per_tooth.get(c).unwrap_or(fallback);
    let tgt_teeth = tgt.teeth_cloud();
    let shared: Vec<ToothCode> = src.codes().filter(|c| tgt.segment(*c).is_some()).collect();

    let moved: Vec<PointCloud> = shared.iter().map(|c| src.segment(*c).expect("shared").transformed(&transform_of(c))).collect();
    let all = PointCloud::concat(&moved);
    let id = RigidTransform::identity();
    let d = surface_distances(&all, &tgt_teeth, &id).expect("shared teeth are nonempty");
    let lm_err = |code: Option<ToothCode>| {
        landmarks.map(|pairs| {
            let sel: Vec<_> = pairs.iter().filter(|(c, _, _)| code.is_none_or(|k| k == *c)).collect();
            let total: f64 = sel.iter().map(|(c, x, y)| (transform_of(c).apply(x) - y).norm()).sum();
            if sel.is_empty() {
                0.0
            } else {
                total / sel.len() as f64
            }
        })
    };
    let per_tooth = shared
        .iter()
        .zip(&moved)
        .map(|(c, cloud)| {
            let tooth_tgt = tgt.segment(*c).expect("shared");
            let e_surf = surface_distances(cloud, tooth_tgt, &id).expect("nonempty").into_iter().fold(0.0, f64::max);
            let has_lm = landmarks.is_some_and(|p| p.iter().any(|(k, _, _)| k == c));
            ToothReport { code: *c, e_surf, e_land: if has_lm { lm_err(Some(*c)) } else { None } }
        })
        .collect();
    StageDetail {
        summary: StageReport {
            e_surf: d.iter().copied().fold(0.0, f64::max),
            e_surf_p95: percentile(&d, 0.95).expect("nonempty"),
            e_land: lm_err(None),
        },
        per_tooth,
    }
}
