//! End-to-end IOS → CBCT integration: global alignment, tooth-aware ICP,
//! then per-tooth stitching correction.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::arch::{correct_stitching, partition_gingiva, transform_arch, ArchError, CorrectionResult, GingivaPartition, LabeledArch, ToothCode};
use crate::geom::RigidTransform;
use crate::registration::{
    global_align, ticp_refine_observed, CorrespondenceSet, GlobalAlignment, GlobalRegConfig, IcpIteration, IcpReport, RegistrationError,
    TicpConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("registration failed: {0}")]
    Registration(#[from] RegistrationError),
    #[error("stitching correction failed: {0}")]
    Arch(#[from] ArchError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub global: GlobalRegConfig,
    pub registration: TicpConfig,
    pub correction: TicpConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        self.global.validate()?;
        self.registration.validate()?;
        self.correction.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub global: GlobalAlignment,
    pub registration: IcpReport,
    pub gingiva: GingivaPartition,
    pub correction: CorrectionResult,
}

impl PipelineOutput {
    /// Registration transform `T*`.
    pub fn transform(&self) -> RigidTransform {
        self.registration.transform
    }

    /// Full IOS → CBCT map of each tooth: its correction after `T*`.
    pub fn tooth_transforms(&self) -> BTreeMap<ToothCode, RigidTransform> {
        let t = self.transform();
        self.correction.per_tooth.iter().map(|(&c, k)| (c, k.compose(&t))).collect()
    }

    /// The corrected IOS arch in the CBCT frame.
    pub fn corrected(&self) -> &LabeledArch {
        &self.correction.corrected
    }
}

pub fn run_pipeline(ios: &LabeledArch, cbct: &LabeledArch, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    run_pipeline_observed(ios, cbct, cfg, &mut |_, _| {})
}

/// As [`run_pipeline`], reporting every registration ICP iteration.
pub fn run_pipeline_observed(
    ios: &LabeledArch,
    cbct: &LabeledArch,
    cfg: &PipelineConfig,
    observer: &mut dyn FnMut(&IcpIteration, &CorrespondenceSet),
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    let global = global_align(ios, cbct, &cfg.global)?;
    let registration = ticp_refine_observed(ios, cbct, &global.transform, &cfg.registration, observer)?;
    let aligned = transform_arch(ios, &registration.transform);
    let gingiva = partition_gingiva(&aligned)?;
    let correction = correct_stitching(&aligned, cbct, &gingiva, &cfg.correction)?;
    Ok(PipelineOutput { global, registration, gingiva, correction })
}
