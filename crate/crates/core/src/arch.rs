//! Label-partitioned dental arches.
//!
//! An arch is a set of per-tooth point clouds keyed by universal tooth code
//! (1–16 maxilla, 17–32 mandible) plus a residual cloud holding everything
//! that is not a segmented tooth (gingiva for scans, unexposed teeth for
//! volumes).

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{PointCloud, RigidTransform, SpatialIndex};
use crate::registration::{vanilla_icp, RegistrationError, TicpConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("tooth code {0} outside 1..=32")]
    InvalidCode(u32),

    #[error("tooth code {code} does not belong to the {jaw}")]
    CodeNotInJaw { code: ToothCode, jaw: Jaw },

    #[error("an arch holds at most 16 teeth, got {0}")]
    TooManySegments(usize),

    #[error("segment for tooth {0} is empty")]
    EmptySegment(ToothCode),

    #[error("arch has no tooth segments")]
    NoSegments,

    #[error("tooth {0} is missing from the target arch")]
    MissingTargetCode(ToothCode),

    #[error("gingiva partition covers {got} points but the residual has {expected}")]
    PartitionMismatch { expected: usize, got: usize },

    #[error("correction of tooth {code} failed: {source}")]
    Correction { code: ToothCode, source: RegistrationError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Jaw {
    Maxilla,
    Mandible,
}

impl Jaw {
    pub fn codes(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Jaw::Maxilla => 1..=16,
            Jaw::Mandible => 17..=32,
        }
    }
}

impl fmt::Display for Jaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Jaw::Maxilla => "maxilla",
            Jaw::Mandible => "mandible",
        })
    }
}

impl std::str::FromStr for Jaw {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maxilla" => Ok(Jaw::Maxilla),
            "mandible" => Ok(Jaw::Mandible),
            other => Err(format!("unknown jaw {other:?}; expected maxilla or mandible")),
        }
    }
}

/// Universal tooth number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ToothCode(u8);

impl ToothCode {
    pub fn new(code: u32) -> Result<Self, ArchError> {
        if (1..=32).contains(&code) {
            Ok(Self(code as u8))
        } else {
            Err(ArchError::InvalidCode(code))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn jaw(self) -> Jaw {
        if self.0 <= 16 {
            Jaw::Maxilla
        } else {
            Jaw::Mandible
        }
    }

    /// Numerically adjacent codes within the same jaw.
    pub fn neighbours(self) -> impl Iterator<Item = ToothCode> {
        let range = self.jaw().codes();
        [self.0.wrapping_sub(1), self.0 + 1]
            .into_iter()
            .filter(move |c| range.contains(c))
            .map(ToothCode)
    }
}

impl TryFrom<u32> for ToothCode {
    type Error = ArchError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        ToothCode::new(v)
    }
}

impl From<ToothCode> for u32 {
    fn from(c: ToothCode) -> u32 {
        c.0 as u32
    }
}

impl fmt::Display for ToothCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-tooth segments plus a residual cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledArch {
    jaw: Jaw,
    segments: BTreeMap<ToothCode, PointCloud>,
    residual: PointCloud,
}

impl LabeledArch {
    pub fn new(jaw: Jaw, segments: BTreeMap<ToothCode, PointCloud>, residual: PointCloud) -> Result<Self, ArchError> {
        if segments.len() > 16 {
            return Err(ArchError::TooManySegments(segments.len()));
        }
        for (&code, cloud) in &segments {
            if code.jaw() != jaw {
                return Err(ArchError::CodeNotInJaw { code, jaw });
            }
            if cloud.is_empty() {
                return Err(ArchError::EmptySegment(code));
            }
        }
        Ok(Self { jaw, segments, residual })
    }

    pub fn jaw(&self) -> Jaw {
        self.jaw
    }

    pub fn segments(&self) -> &BTreeMap<ToothCode, PointCloud> {
        &self.segments
    }

    pub fn segment(&self, code: ToothCode) -> Option<&PointCloud> {
        self.segments.get(&code)
    }

    pub fn residual(&self) -> &PointCloud {
        &self.residual
    }

    pub fn codes(&self) -> impl Iterator<Item = ToothCode> + '_ {
        self.segments.keys().copied()
    }

    pub fn tooth_count(&self) -> usize {
        self.segments.len()
    }

    /// All tooth points, segments concatenated in ascending code order.
    pub fn teeth_cloud(&self) -> PointCloud {
        PointCloud::concat(self.segments.values())
    }

    /// Code of every point of [`teeth_cloud`](Self::teeth_cloud), same order.
    pub fn teeth_labels(&self) -> Vec<ToothCode> {
        self.segments
            .iter()
            .flat_map(|(&c, cloud)| std::iter::repeat_n(c, cloud.len()))
            .collect()
    }

    /// Same arch with the residual dropped.
    pub fn without_residual(&self) -> LabeledArch {
        LabeledArch { jaw: self.jaw, segments: self.segments.clone(), residual: PointCloud::default() }
    }

    pub fn into_parts(self) -> (Jaw, BTreeMap<ToothCode, PointCloud>, PointCloud) {
        (self.jaw, self.segments, self.residual)
    }
}

/// Applies `t` to every segment and the residual.
pub fn transform_arch(arch: &LabeledArch, t: &RigidTransform) -> LabeledArch {
    LabeledArch {
        jaw: arch.jaw,
        segments: arch.segments.iter().map(|(&c, cloud)| (c, cloud.transformed(t))).collect(),
        residual: arch.residual.transformed(t),
    }
}

/// Assignment of every residual point to the tooth owning its nearest tooth
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct GingivaPartition {
    assignment: Vec<ToothCode>,
    parts: BTreeMap<ToothCode, Vec<usize>>,
}

impl GingivaPartition {
    /// Owning code of residual point `i`.
    pub fn assignment(&self) -> &[ToothCode] {
        &self.assignment
    }

    /// Residual indices per code, ascending. Codes without points are absent.
    pub fn indices(&self) -> &BTreeMap<ToothCode, Vec<usize>> {
        &self.parts
    }

    pub fn part(&self, residual: &PointCloud, code: ToothCode) -> PointCloud {
        residual.select(self.parts.get(&code).map_or(&[][..], |v| v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

pub fn partition_gingiva(arch: &LabeledArch) -> Result<GingivaPartition, ArchError> {
    if arch.segments.is_empty() {
        return Err(ArchError::NoSegments);
    }
    let teeth = arch.teeth_cloud();
    let labels = arch.teeth_labels();
    let index = SpatialIndex::new(teeth.points());
    // Flattened order is ascending by code, so the lowest-index tie-break of
    // the index is also the lowest-code tie-break.
    let assignment: Vec<ToothCode> = arch
        .residual
        .points()
        .par_iter()
        .map(|p| labels[index.nearest(p).expect("teeth cloud is nonempty").0])
        .collect();
    let mut parts: BTreeMap<ToothCode, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        parts.entry(c).or_default().push(i);
    }
    Ok(GingivaPartition { assignment, parts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub per_tooth: BTreeMap<ToothCode, RigidTransform>,
    pub corrected: LabeledArch,
}

/// Per-tooth stitching correction.
///
/// For every source tooth `c`, a vanilla ICP from the identity aligns the
/// window `{c−1, c, c+1}` (codes present in both arches) of the source onto
/// the same window of the target. The result moves tooth `c` and the
/// gingiva points assigned to it; nothing else.
pub fn correct_stitching(
    src: &LabeledArch,
    tgt: &LabeledArch,
    gingiva: &GingivaPartition,
    cfg: &TicpConfig,
) -> Result<CorrectionResult, ArchError> {
    if gingiva.len() != src.residual.len() {
        return Err(ArchError::PartitionMismatch { expected: src.residual.len(), got: gingiva.len() });
    }
    if let Some(c) = src.codes().find(|c| !tgt.segments.contains_key(c)) {
        return Err(ArchError::MissingTargetCode(c));
    }

    let codes: Vec<ToothCode> = src.codes().collect();
    let per_tooth: Vec<RigidTransform> = codes
        .par_iter()
        .map(|&c| {
            let window: Vec<ToothCode> = std::iter::once(c)
                .chain(c.neighbours())
                .filter(|n| src.segments.contains_key(n) && tgt.segments.contains_key(n))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let source = PointCloud::concat(window.iter().map(|n| &src.segments[n]));
            let target = PointCloud::concat(window.iter().map(|n| &tgt.segments[n]));
            vanilla_icp(&source, &target, &RigidTransform::identity(), cfg)
                .map(|r| r.transform)
                .map_err(|source| ArchError::Correction { code: c, source })
        })
        .collect::<Result<_, _>>()?;
    let per_tooth: BTreeMap<ToothCode, RigidTransform> = codes.into_iter().zip(per_tooth).collect();

    let segments = src
        .segments
        .iter()
        .map(|(&c, cloud)| (c, cloud.transformed(&per_tooth[&c])))
        .collect();
    let residual_points = src
        .residual
        .points()
        .iter()
        .zip(&gingiva.assignment)
        .map(|(p, c)| per_tooth.get(c).map_or(*p, |t| t.apply(p)))
        .collect();
    let residual = match src.residual.normals() {
        Some(ns) => {
            let normals = ns
                .iter()
                .zip(&gingiva.assignment)
                .map(|(n, c)| per_tooth.get(c).map_or(*n, |t| t.apply_unit(n)))
                .collect();
            PointCloud::with_normals(residual_points, normals).expect("lengths preserved")
        }
        None => PointCloud::new(residual_points),
    };

    Ok(CorrectionResult {
        per_tooth,
        corrected: LabeledArch { jaw: src.jaw, segments, residual },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, Vector3};
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(c: u32) -> ToothCode {
        ToothCode::new(c).unwrap()
    }

    fn blob(center: Point3, n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    center + Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.0..3.0))
                })
                .collect(),
        )
    }

    fn row_arch(codes: &[u32], gingiva: usize, seed: u64) -> LabeledArch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segments = codes
            .iter()
            .enumerate()
            .map(|(i, &c)| (code(c), blob(Point3::new(5.0 * i as f64, 0.0, 0.0), 60, &mut rng)))
            .collect();
        let span = 5.0 * codes.len() as f64;
        let residual = PointCloud::new(
            (0..gingiva)
                .map(|_| Point3::new(rng.random_range(-3.0..span), rng.random_range(-4.0..4.0), rng.random_range(-3.0..-1.0)))
                .collect(),
        );
        LabeledArch::new(code(codes[0]).jaw(), segments, residual).unwrap()
    }

    #[test]
    fn codes_and_jaws() {
        assert!(ToothCode::new(0).is_err());
        assert!(ToothCode::new(33).is_err());
        assert_eq!(code(16).jaw(), Jaw::Maxilla);
        assert_eq!(code(17).jaw(), Jaw::Mandible);
        assert_eq!(code(1).neighbours().collect::<Vec<_>>(), vec![code(2)]);
        assert_eq!(code(17).neighbours().collect::<Vec<_>>(), vec![code(18)]);
        assert_eq!(code(24).neighbours().collect::<Vec<_>>(), vec![code(23), code(25)]);
        assert_eq!(code(16).neighbours().collect::<Vec<_>>(), vec![code(15)]);
    }

    #[test]
    fn arch_validation() {
        let one = PointCloud::new(vec![Point3::origin()]);
        let mut segs = BTreeMap::new();
        segs.insert(code(3), one.clone());
        assert!(matches!(
            LabeledArch::new(Jaw::Mandible, segs.clone(), PointCloud::default()),
            Err(ArchError::CodeNotInJaw { .. })
        ));
        segs.insert(code(4), PointCloud::default());
        assert_eq!(
            LabeledArch::new(Jaw::Maxilla, segs, PointCloud::default()).unwrap_err(),
            ArchError::EmptySegment(code(4))
        );
    }

    #[test]
    fn single_tooth_takes_all_gingiva() {
        let arch = row_arch(&[20], 40, 1);
        let part = partition_gingiva(&arch).unwrap();
        assert!(part.assignment().iter().all(|&c| c == code(20)));
        assert_eq!(part.indices()[&code(20)].len(), 40);
    }

    #[test]
    fn two_teeth_split_by_proximity() {
        let mut segs = BTreeMap::new();
        segs.insert(code(1), PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]));
        segs.insert(code(2), PointCloud::new(vec![Point3::new(10.0, 0.0, 0.0)]));
        let residual = PointCloud::new(vec![Point3::new(2.0, 0.0, 0.0), Point3::new(8.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)]);
        let arch = LabeledArch::new(Jaw::Maxilla, segs, residual).unwrap();
        let part = partition_gingiva(&arch).unwrap();
        // the midpoint tie goes to the lower code
        assert_eq!(part.assignment(), &[code(1), code(2), code(1)]);
    }

    #[test]
    fn partition_matches_brute_force() {
        let arch = row_arch(&[18, 19, 20, 21, 22, 23, 24, 25], 300, 4);
        let part = partition_gingiva(&arch).unwrap();
        for (i, p) in arch.residual().points().iter().enumerate() {
            let mut best = (f64::INFINITY, code(32));
            for (&c, cloud) in arch.segments() {
                for q in cloud.points() {
                    let d = (p - q).norm_squared();
                    if d < best.0 {
                        best = (d, c);
                    }
                }
            }
            assert_eq!(part.assignment()[i], best.1);
        }
        let total: usize = part.indices().values().map(Vec::len).sum();
        assert_eq!(total, arch.residual().len());
    }

    #[test]
    fn transform_roundtrip() {
        let arch = row_arch(&[5, 6, 7], 20, 2);
        let t = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 1.0, 0.2)), 0.8),
            Vector3::new(3.0, -1.0, 7.0),
        );
        let back = transform_arch(&transform_arch(&arch, &t), &t.inverse());
        assert_eq!(back.codes().collect::<Vec<_>>(), arch.codes().collect::<Vec<_>>());
        for (a, b) in back.teeth_cloud().points().iter().zip(arch.teeth_cloud().points()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert_eq!(transform_arch(&arch, &RigidTransform::identity()), arch);
    }

    #[test]
    fn perfect_input_needs_no_correction() {
        let arch = row_arch(&[20, 21, 22, 23], 50, 3);
        let part = partition_gingiva(&arch).unwrap();
        let res = correct_stitching(&arch, &arch, &part, &TicpConfig::default()).unwrap();
        for t in res.per_tooth.values() {
            let (a, d) = t.difference(&RigidTransform::identity());
            assert!(a < 1e-6 && d < 1e-6);
        }
        for (a, b) in res.corrected.teeth_cloud().points().iter().zip(arch.teeth_cloud().points()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    fn lattice_arch(codes: &[u32]) -> LabeledArch {
        let segments = codes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut pts = Vec::new();
                for a in 0..6 {
                    for b in 0..6 {
                        for h in 0..4 {
                            // sheared so no two teeth are translates along one axis
                            let x = 5.0 * i as f64 + 0.5 * a as f64 + 0.07 * h as f64;
                            pts.push(Point3::new(x, 0.5 * b as f64 + 0.05 * (i * a) as f64, 0.5 * h as f64));
                        }
                    }
                }
                (code(c), PointCloud::new(pts))
            })
            .collect();
        LabeledArch::new(code(codes[0]).jaw(), segments, PointCloud::default()).unwrap()
    }

    fn exact() -> TicpConfig {
        TicpConfig { epsilon: 1e-10, ..Default::default() }
    }

    #[test]
    fn coherent_window_drift_is_undone() {
        let tgt = lattice_arch(&[20, 21, 22]);
        let drift = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Vector3::z_axis(), 0.3f64.to_radians()),
            Vector3::new(0.08, -0.05, 0.02),
        );
        let src = transform_arch(&tgt, &drift);
        let part = partition_gingiva(&src).unwrap();
        let res = correct_stitching(&src, &tgt, &part, &exact()).unwrap();
        for (c, t) in &res.per_tooth {
            let (a, d) = t.difference(&drift.inverse());
            assert!(a < 1e-6 && d < 1e-6, "tooth {c}: {a} {d}");
        }
        // terminal teeth use two-tooth windows
        assert_eq!(res.per_tooth.len(), 3);
    }

    #[test]
    fn lone_displaced_tooth_moves_by_window_compromise() {
        let tgt = lattice_arch(&[20, 21, 22]);
        let shift = RigidTransform::from_translation(Vector3::new(0.06, 0.0, 0.0));
        let mut segs = tgt.segments().clone();
        segs.insert(code(21), segs[&code(21)].transformed(&shift));
        let src = LabeledArch::new(Jaw::Mandible, segs, PointCloud::default()).unwrap();
        let part = partition_gingiva(&src).unwrap();
        let res = correct_stitching(&src, &tgt, &part, &exact()).unwrap();

        // Oracle: least-squares fit of the window under the true pairing.
        let pairs: Vec<_> = src
            .teeth_cloud()
            .points()
            .iter()
            .zip(tgt.teeth_cloud().points())
            .map(|(x, y)| (*x, *y))
            .collect();
        let expected = crate::geom::fit_rigid(&pairs).unwrap();
        let (a, d) = res.per_tooth[&code(21)].difference(&expected);
        assert!(a < 1e-9 && d < 1e-9, "{a} {d}");
        // equal-size teeth: roughly a third of the displacement is undone
        let moved = res.per_tooth[&code(21)].translation().x;
        assert!((moved + 0.02).abs() < 2e-3, "{moved}");
    }

    #[test]
    fn missing_target_code() {
        let src = row_arch(&[20, 21], 0, 1);
        let tgt = row_arch(&[20], 0, 1);
        let part = partition_gingiva(&src).unwrap();
        assert_eq!(
            correct_stitching(&src, &tgt, &part, &TicpConfig::default()).unwrap_err(),
            ArchError::MissingTargetCode(code(21))
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn correction_is_rigid_per_segment_and_gingiva_follows(seed in 0u64..1000, dx in -0.4f64..0.4, dy in -0.4f64..0.4) {
            let tgt = row_arch(&[9, 10, 11, 12], 80, seed);
            let mut segs = tgt.segments().clone();
            let t = RigidTransform::from_translation(Vector3::new(dx, dy, 0.1));
            segs.insert(code(10), segs[&code(10)].transformed(&t));
            let src = LabeledArch::new(Jaw::Maxilla, segs, tgt.residual().clone()).unwrap();
            let part = partition_gingiva(&src).unwrap();
            let res = correct_stitching(&src, &tgt, &part, &TicpConfig::default()).unwrap();

            for (c, before) in src.segments() {
                let after = res.corrected.segment(*c).unwrap();
                prop_assert_eq!(before.len(), after.len());
                let (p, q) = (before.points(), after.points());
                for i in 0..p.len().min(10) {
                    for j in 0..p.len().min(10) {
                        prop_assert!(((p[i] - p[j]).norm() - (q[i] - q[j]).norm()).abs() < 1e-9);
                    }
                }
            }
            for (i, p) in src.residual().points().iter().enumerate() {
                let c = part.assignment()[i];
                let moved = res.per_tooth[&c].apply(p);
                prop_assert_eq!(moved, res.corrected.residual().points()[i]);
            }
        }
    }
}
