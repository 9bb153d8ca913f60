use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::generator::{generate_arch_pair, SynthConfig, SynthPair};
use super::metrics::{landmark_error, percentile, surface_distances};
use super::SynthError;
use crate::arch::{Jaw, ToothCode};
use crate::geom::{Point3, PointCloud, RigidTransform};
use crate::pipeline::{run_pipeline_observed, PipelineConfig, PipelineOutput};
use crate::registration::{CorrespondenceSet, IcpIteration, IcpReport, IcpStop};

/// Accuracy of one pipeline stage, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub e_land: f64,
    /// Directed Hausdorff distance, IOS teeth → CBCT teeth.
    pub e_surf: f64,
    /// 95th percentile of the same directed distances; a robustness figure,
    /// not part of the classic metric pair.
    pub e_surf_p95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToothMetrics {
    pub code: ToothCode,
    pub e_land_registered: f64,
    pub e_land_corrected: f64,
    pub e_surf_registered: f64,
    pub e_surf_corrected: f64,
}

/// Rotation angle and translation norm of `estimate ∘ truth⁻¹`-style
/// comparisons, rad and mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryError {
    pub rotation: f64,
    pub translation: f64,
}

impl RecoveryError {
    pub fn between(estimate: &RigidTransform, truth: &RigidTransform) -> Self {
        let (rotation, translation) = estimate.difference(truth);
        Self { rotation, translation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpSummary {
    pub iterations: usize,
    pub stop: String,
    pub final_residual: f64,
    pub residual_increased: bool,
}

impl IcpSummary {
    pub fn of(report: &IcpReport) -> Self {
        Self {
            iterations: report.iterations.len(),
            stop: match report.stop {
                IcpStop::Threshold => "threshold",
                IcpStop::FixedPoint => "fixed-point",
                IcpStop::MaxIterations => "max-iterations",
            }
            .to_string(),
            final_residual: report.final_residual(),
            residual_increased: report.residual_increased,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub jaw: Jaw,
    pub tooth_count: usize,
    pub pre_registration: StageMetrics,
    pub post_global: StageMetrics,
    pub post_registration: StageMetrics,
    pub post_correction: StageMetrics,
    pub per_tooth: Vec<ToothMetrics>,
    pub global_recovery: RecoveryError,
    pub registration_recovery: RecoveryError,
    pub global_inliers: usize,
    pub registration_icp: IcpSummary,
}

impl MetricsReport {
    /// Relative landmark-error reduction of the correction step; negative if
    /// correction made things worse.
    pub fn land_reduction(&self) -> f64 {
        let before = self.post_registration.e_land;
        if before > 0.0 {
            1.0 - self.post_correction.e_land / before
        } else {
            0.0
        }
    }
}

fn stage(src_landmarks: &[Point3], pair: &SynthPair, teeth: &PointCloud, target: &PointCloud, t: &RigidTransform) -> Result<StageMetrics, SynthError> {
    let e_land = landmark_error(src_landmarks, &pair.truth.cbct_landmarks(), t)?;
    let d = surface_distances(teeth, target, t)?;
    Ok(StageMetrics {
        e_land,
        e_surf: d.iter().copied().fold(0.0, f64::max),
        e_surf_p95: percentile(&d, 0.95).expect("nonempty"),
    })
}

/// Metrics of a finished pipeline run against the pair's ground truth.
pub fn evaluate(pair: &SynthPair, out: &PipelineOutput, seed: u64) -> Result<MetricsReport, SynthError> {
    let ios_teeth = pair.ios.teeth_cloud();
    let cbct_teeth = pair.cbct.teeth_cloud();
    let ios_lm = pair.truth.ios_landmarks();
    let t_star = out.transform();
    let id = RigidTransform::identity();

    let pre_registration = stage(&ios_lm, pair, &ios_teeth, &cbct_teeth, &id)?;
    let post_global = stage(&ios_lm, pair, &ios_teeth, &cbct_teeth, &out.global.transform)?;
    let post_registration = stage(&ios_lm, pair, &ios_teeth, &cbct_teeth, &t_star)?;

    // corrected landmarks: each through its own tooth's full transform
    let per_tooth_t = out.tooth_transforms();
    let corrected_lm: Vec<_> = pair.truth.landmarks.iter().map(|l| per_tooth_t[&l.code].apply(&l.ios)).collect();
    let corrected_teeth = out.corrected().teeth_cloud();
    let post_correction = stage(&corrected_lm, pair, &corrected_teeth, &cbct_teeth, &id)?;

    let per_tooth = pair
        .truth
        .landmarks
        .iter()
        .map(|l| {
            let seg = pair.ios.segment(l.code).expect("landmark tooth is segmented");
            let tgt = pair.cbct.segment(l.code).expect("landmark tooth in CBCT");
            let corrected = out.corrected().segment(l.code).expect("corrected tooth");
            let hausdorff = |src: &PointCloud, t: &RigidTransform| -> Result<f64, SynthError> {
                Ok(surface_distances(src, tgt, t)?.into_iter().fold(0.0, f64::max))
            };
            Ok(ToothMetrics {
                code: l.code,
                e_land_registered: (t_star.apply(&l.ios) - l.cbct).norm(),
                e_land_corrected: (per_tooth_t[&l.code].apply(&l.ios) - l.cbct).norm(),
                e_surf_registered: hausdorff(seg, &t_star)?,
                e_surf_corrected: hausdorff(corrected, &id)?,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    Ok(MetricsReport {
        seed,
        jaw: pair.ios.jaw(),
        tooth_count: pair.ios.tooth_count(),
        pre_registration,
        post_global,
        post_registration,
        post_correction,
        per_tooth,
        global_recovery: RecoveryError::between(&out.global.transform, &pair.truth.global),
        registration_recovery: RecoveryError::between(&t_star, &pair.truth.global),
        global_inliers: out.global.inliers.len(),
        registration_icp: IcpSummary::of(&out.registration),
    })
}

/// Generates a pair from `cfg`, runs the full pipeline and evaluates it.
pub fn run_benchmark(cfg: &SynthConfig, pipeline: &PipelineConfig) -> Result<MetricsReport, SynthError> {
    run_benchmark_observed(cfg, pipeline, &mut |_, _, _| {})
}

/// [`run_benchmark`] with an observer on the registration ICP iterations.
/// Correspondence indices refer to the teeth clouds of the generated arches,
/// whose labels are passed alongside.
pub fn run_benchmark_observed(
    cfg: &SynthConfig,
    pipeline: &PipelineConfig,
    observer: &mut dyn FnMut(&LabelView<'_>, &IcpIteration, &CorrespondenceSet),
) -> Result<MetricsReport, SynthError> {
    let pair = generate_arch_pair(cfg)?;
    let src_labels = pair.ios.teeth_labels();
    let tgt_labels = pair.cbct.teeth_labels();
    let view = LabelView { src: &src_labels, tgt: &tgt_labels };
    let out = run_pipeline_observed(&pair.ios, &pair.cbct, pipeline, &mut |it, corr| observer(&view, it, corr))?;
    evaluate(&pair, &out, cfg.rng_seed)
}

/// Tooth codes of the flattened source and target teeth clouds.
#[derive(Debug, Clone, Copy)]
pub struct LabelView<'a> {
    pub src: &'a [ToothCode],
    pub tgt: &'a [ToothCode],
}

/// Per-code landmark errors after applying per-tooth transforms.
pub fn tooth_landmark_errors(pair: &SynthPair, transforms: &BTreeMap<ToothCode, RigidTransform>) -> BTreeMap<ToothCode, f64> {
    pair.truth
        .landmarks
        .iter()
        .filter_map(|l| transforms.get(&l.code).map(|t| (l.code, (t.apply(&l.ios) - l.cbct).norm())))
        .collect()
}
