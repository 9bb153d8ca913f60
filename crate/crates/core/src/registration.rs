//! Rigid registration of labeled arches.
//!
//! Global alignment matches FPFH descriptors mutually, keeps pairs that
//! survive a random-triplet length-ratio test, and fits one rigid transform.
//! Refinement is ICP whose nearest-neighbour search can be restricted to
//! points carrying the same tooth code.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::arch::{LabeledArch, ToothCode};
use crate::fpfh::{self, Fpfh, FpfhError};
use crate::geom::{estimate_normals, fit_rigid, fit_rigid_indexed, GeomError, Point3, PointCloud, RigidTransform, SpatialIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("need at least 3 correspondences, got {0}")]
    TooFewCorrespondences(usize),

    #[error("no correspondence survived the triplet filter")]
    NoSurvivingPairs,

    #[error("source and target share no tooth code")]
    NoSharedCodes,

    #[error("empty input cloud")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Geom(#[from] GeomError),

    #[error(transparent)]
    Fpfh(#[from] FpfhError),
}

/// Index pairs `(source, target)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(usize, usize)>,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRegConfig {
    /// Length-ratio tolerance, `0.5 < tau < 1`.
    pub tau: f64,
    /// Random triplets to draw; `None` means three per correspondence.
    pub triplet_draws: Option<usize>,
    pub rng_seed: u64,
    pub fpfh_k: usize,
    pub normal_k: usize,
}

impl Default for GlobalRegConfig {
    fn default() -> Self {
        Self { tau: 0.9, triplet_draws: None, rng_seed: 0, fpfh_k: fpfh::DEFAULT_K, normal_k: 12 }
    }
}

impl GlobalRegConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if !(self.tau > 0.5 && self.tau < 1.0) {
            return Err(RegistrationError::InvalidConfig(format!("tau must satisfy 0.5 < tau < 1, got {}", self.tau)));
        }
        if self.triplet_draws == Some(0) {
            return Err(RegistrationError::InvalidConfig("triplet_draws must be positive".into()));
        }
        if self.fpfh_k < 2 {
            return Err(RegistrationError::InvalidConfig(format!("fpfh k must be >= 2, got {}", self.fpfh_k)));
        }
        if self.normal_k < 3 {
            return Err(RegistrationError::InvalidConfig(format!("normal k must be >= 3, got {}", self.normal_k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TicpConfig {
    /// Stop once the mean post-fit pair distance (mm) drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Optional rejection distance (mm) for matched pairs.
    pub max_distance: Option<f64>,
    /// Restrict matches to equal tooth codes. Ignored by [`vanilla_icp`].
    pub label_constraint: bool,
}

impl Default for TicpConfig {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_iterations: 100, max_distance: None, label_constraint: true }
    }
}

impl TicpConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(RegistrationError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(RegistrationError::InvalidConfig("max_iterations must be positive".into()));
        }
        if let Some(d) = self.max_distance {
            if !(d > 0.0) {
                return Err(RegistrationError::InvalidConfig(format!("max_distance must be positive, got {d}")));
            }
        }
        Ok(())
    }
}

/// Pairs `(i, j)` where each descriptor is the other's nearest neighbour in
/// Euclidean distance. Ties go to the lowest index.
pub fn mutual_fpfh_matches(src: &[Fpfh], tgt: &[Fpfh]) -> CorrespondenceSet {
    if src.is_empty() || tgt.is_empty() {
        return CorrespondenceSet::default();
    }
    let argmin = |q: &Fpfh, set: &[Fpfh]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for (i, d) in set.iter().enumerate() {
            let dist = q.distance_squared(d);
            if dist < best.0 {
                best = (dist, i);
            }
        }
        best.1
    };
    let forward: Vec<usize> = src.par_iter().map(|f| argmin(f, tgt)).collect();
    let backward: Vec<usize> = tgt.par_iter().map(|f| argmin(f, src)).collect();
    CorrespondenceSet {
        pairs: forward.iter().enumerate().filter(|&(i, &j)| backward[j] == i).map(|(i, &j)| (i, j)).collect(),
    }
}

/// Keeps the pairs belonging to at least one randomly drawn triplet whose
/// three source/target length ratios all lie strictly inside `(τ, 1/τ)`.
/// Surviving pairs keep their input order.
pub fn filter_triplets(
    corr: &CorrespondenceSet,
    src: &[Point3],
    tgt: &[Point3],
    cfg: &GlobalRegConfig,
) -> Result<CorrespondenceSet, RegistrationError> {
    cfg.validate()?;
    let n = corr.len();
    if n < 3 {
        return Err(RegistrationError::TooFewCorrespondences(n));
    }
    let draws = cfg.triplet_draws.unwrap_or(3 * n);
    let (lo, hi) = (cfg.tau, 1.0 / cfg.tau);
    let consistent = |a: usize, b: usize| {
        let (sa, ta) = corr.pairs[a];
        let (sb, tb) = corr.pairs[b];
        let dy = (tgt[ta] - tgt[tb]).norm();
        if dy == 0.0 {
            return false;
        }
        let r = (src[sa] - src[sb]).norm() / dy;
        r > lo && r < hi
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut keep = vec![false; n];
    for _ in 0..draws {
        let t = rand::seq::index::sample(&mut rng, n, 3);
        let (a, b, c) = (t.index(0), t.index(1), t.index(2));
        if consistent(a, b) && consistent(b, c) && consistent(a, c) {
            keep[a] = true;
            keep[b] = true;
            keep[c] = true;
        }
    }
    let pairs: Vec<_> = corr.pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
    if pairs.is_empty() {
        return Err(RegistrationError::NoSurvivingPairs);
    }
    Ok(CorrespondenceSet { pairs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalAlignment {
    pub transform: RigidTransform,
    /// Mutual descriptor matches before filtering.
    pub matches: usize,
    /// Pairs used for the fit, indices into the flattened clouds.
    pub inliers: CorrespondenceSet,
}

/// Global alignment of the tooth segments of `src` onto those of `tgt`.
/// Residual clouds are ignored.
pub fn global_align(src: &LabeledArch, tgt: &LabeledArch, cfg: &GlobalRegConfig) -> Result<GlobalAlignment, RegistrationError> {
    let parts = |a: &LabeledArch| a.segments().values().cloned().collect::<Vec<_>>();
    global_align_parts(&parts(src), &parts(tgt), cfg)
}

/// Global alignment of two clouds given as lists of parts. Normals are
/// estimated per part (each oriented away from its own centroid); features
/// and matches run on the concatenation.
pub fn global_align_parts(
    src_parts: &[PointCloud],
    tgt_parts: &[PointCloud],
    cfg: &GlobalRegConfig,
) -> Result<GlobalAlignment, RegistrationError> {
    cfg.validate()?;
    let src = with_part_normals(src_parts, cfg.normal_k)?;
    let tgt = with_part_normals(tgt_parts, cfg.normal_k)?;
    let src_f = fpfh::fpfh(&src, &SpatialIndex::new(src.points()), cfg.fpfh_k)?;
    let tgt_f = fpfh::fpfh(&tgt, &SpatialIndex::new(tgt.points()), cfg.fpfh_k)?;
    let corr = mutual_fpfh_matches(&src_f, &tgt_f);
    let inliers = filter_triplets(&corr, src.points(), tgt.points(), cfg)?;
    let transform = fit_rigid_indexed(src.points(), tgt.points(), &inliers.pairs)?;
    Ok(GlobalAlignment { transform, matches: corr.len(), inliers })
}

fn with_part_normals(parts: &[PointCloud], k: usize) -> Result<PointCloud, RegistrationError> {
    let parts: Vec<&PointCloud> = parts.iter().filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err(RegistrationError::EmptyInput);
    }
    let with: Vec<PointCloud> = parts
        .par_iter()
        .map(|p| estimate_normals(p, k.min(p.len())))
        .collect::<Result<_, _>>()?;
    Ok(PointCloud::concat(&with))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpIteration {
    pub pairs: usize,
    /// Mean pair distance right after matching.
    pub matched_residual: f64,
    /// Mean pair distance after this iteration's fit; the stopping quantity.
    pub residual: f64,
    /// Root-mean-square pair distance after the fit. This is the quantity
    /// the fit minimises, so it never rises on re-matching.
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpStop {
    /// Mean residual fell below epsilon.
    Threshold,
    /// Matching reproduced the previous iteration's pairs, so every later
    /// iteration would repeat it.
    FixedPoint,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpReport {
    pub transform: RigidTransform,
    pub iterations: Vec<IcpIteration>,
    pub stop: IcpStop,
    /// Post-fit RMS rose between consecutive iterations at least once
    /// (only possible with a distance gate).
    pub residual_increased: bool,
}

impl IcpReport {
    pub fn final_residual(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |it| it.residual)
    }
}

/// Called once per ICP iteration with that iteration's pairs, indexed into
/// the flattened source and target clouds.
pub type IcpObserver<'a> = dyn FnMut(&IcpIteration, &CorrespondenceSet) + 'a;

/// Plain ICP from `init`: every source point matched to its nearest target
/// point.
pub fn vanilla_icp(
    src: &PointCloud,
    tgt: &PointCloud,
    init: &RigidTransform,
    cfg: &TicpConfig,
) -> Result<IcpReport, RegistrationError> {
    cfg.validate()?;
    if src.is_empty() || tgt.is_empty() {
        return Err(RegistrationError::EmptyInput);
    }
    let group = Group::new((0..src.len()).collect(), tgt.points(), (0..tgt.len()).collect());
    run_icp(src.points(), tgt.points(), &[group], init, cfg, &mut |_, _| {})
}

/// Tooth-constrained ICP over the tooth segments of both arches.
pub fn ticp_refine(
    src: &LabeledArch,
    tgt: &LabeledArch,
    init: &RigidTransform,
    cfg: &TicpConfig,
) -> Result<IcpReport, RegistrationError> {
    ticp_refine_observed(src, tgt, init, cfg, &mut |_, _| {})
}

/// [`ticp_refine`] reporting every iteration's correspondences. Indices
/// refer to [`LabeledArch::teeth_cloud`] of each arch.
pub fn ticp_refine_observed(
    src: &LabeledArch,
    tgt: &LabeledArch,
    init: &RigidTransform,
    cfg: &TicpConfig,
    observer: &mut IcpObserver<'_>,
) -> Result<IcpReport, RegistrationError> {
    cfg.validate()?;
    let src_cloud = src.teeth_cloud();
    let tgt_cloud = tgt.teeth_cloud();
    if src_cloud.is_empty() || tgt_cloud.is_empty() {
        return Err(RegistrationError::EmptyInput);
    }

    let groups = if cfg.label_constraint {
        let src_labels = src.teeth_labels();
        let tgt_labels = tgt.teeth_labels();
        let shared: BTreeSet<ToothCode> = src.codes().filter(|c| tgt.segment(*c).is_some()).collect();
        if shared.is_empty() {
            return Err(RegistrationError::NoSharedCodes);
        }
        shared
            .iter()
            .map(|c| {
                let pick = |labels: &[ToothCode]| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == *c).collect() };
                Group::new(pick(&src_labels), tgt_cloud.points(), pick(&tgt_labels))
            })
            .collect::<Vec<_>>()
    } else {
        vec![Group::new((0..src_cloud.len()).collect(), tgt_cloud.points(), (0..tgt_cloud.len()).collect())]
    };
    run_icp(src_cloud.points(), tgt_cloud.points(), &groups, init, cfg, observer)
}

/// Source points matched only against one target subset.
struct Group {
    src: Vec<usize>,
    tgt: Vec<usize>,
    index: SpatialIndex,
}

impl Group {
    fn new(src: Vec<usize>, tgt_points: &[Point3], tgt: Vec<usize>) -> Self {
        let local: Vec<Point3> = tgt.iter().map(|&j| tgt_points[j]).collect();
        Self { src, tgt, index: SpatialIndex::new(&local) }
    }
}

fn run_icp(
    src: &[Point3],
    tgt: &[Point3],
    groups: &[Group],
    init: &RigidTransform,
    cfg: &TicpConfig,
    observer: &mut IcpObserver<'_>,
) -> Result<IcpReport, RegistrationError> {
    let gate = cfg.max_distance.map(|d| d * d);
    let mut current = *init;
    let mut iterations: Vec<IcpIteration> = Vec::new();
    let mut previous_pairs: Option<Vec<(usize, usize)>> = None;
    let mut residual_increased = false;
    let mut stop = IcpStop::MaxIterations;

    for _ in 0..cfg.max_iterations {
        let mut pairs = Vec::new();
        let mut moved_pairs = Vec::new();
        for g in groups {
            let matched: Vec<(usize, usize, Point3)> = g
                .src
                .par_iter()
                .filter_map(|&i| {
                    let moved = current.apply(&src[i]);
                    let (j, d2) = g.index.nearest(&moved)?;
                    match gate {
                        Some(limit) if d2 > limit => None,
                        _ => Some((i, g.tgt[j], moved)),
                    }
                })
                .collect();
            for (i, j, moved) in matched {
                pairs.push((i, j));
                moved_pairs.push((moved, tgt[j]));
            }
        }
        if pairs.len() < 3 {
            return Err(RegistrationError::TooFewCorrespondences(pairs.len()));
        }

        let n = pairs.len() as f64;
        let matched_residual = moved_pairs.iter().map(|(x, y)| (x - y).norm()).sum::<f64>() / n;
        let step = fit_rigid(&moved_pairs)?;
        let (sum, sse) = moved_pairs.iter().fold((0.0, 0.0), |(s, q), (x, y)| {
            let d2 = (step.apply(x) - y).norm_squared();
            (s + d2.sqrt(), q + d2)
        });
        let (residual, rms) = (sum / n, (sse / n).sqrt());
        current = step.compose(&current);

        let it = IcpIteration { pairs: pairs.len(), matched_residual, residual, rms };
        if let Some(prev) = iterations.last() {
            // relative slack absorbs rounding at convergence
            if it.rms > prev.rms * (1.0 + 1e-9) + 1e-15 {
                residual_increased = true;
            }
        }
        let corr = CorrespondenceSet { pairs };
        observer(&it, &corr);
        iterations.push(it);

        if residual < cfg.epsilon {
            stop = IcpStop::Threshold;
            break;
        }
        if previous_pairs.as_ref() == Some(&corr.pairs) {
            stop = IcpStop::FixedPoint;
            break;
        }
        previous_pairs = Some(corr.pairs);
    }

    Ok(IcpReport { transform: current, iterations, stop, residual_increased })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Jaw;
    use crate::geom::Vector3;
    use nalgebra::{Rotation3, Unit};
    use rand::Rng;
    use std::collections::BTreeMap;

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            .collect()
    }

    fn perturbation() -> RigidTransform {
        RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, 1.0, 0.4)), 1f64.to_radians()),
            Vector3::new(0.3, -0.4, 0.0),
        )
    }

    fn descriptor(v: f64) -> Fpfh {
        let mut a = [0.0; fpfh::DESCRIPTOR_LEN];
        a[0] = v;
        Fpfh(a)
    }

    #[test]
    fn mutual_matching_basics() {
        let ds: Vec<Fpfh> = (0..5).map(|i| descriptor(i as f64)).collect();
        let m = mutual_fpfh_matches(&ds, &ds);
        assert_eq!(m.pairs, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
        let m = mutual_fpfh_matches(&[descriptor(1.0)], &[descriptor(1.0), descriptor(1.0 + 1e-3)]);
        assert_eq!(m.pairs, vec![(0, 0)]);
    }

    #[test]
    fn triplets_keep_rigid_pairs() {
        let src = random_points(12, 1);
        let t = perturbation();
        let tgt: Vec<Point3> = src.iter().map(|p| t.apply(p)).collect();
        let corr = CorrespondenceSet { pairs: (0..12).map(|i| (i, i)).collect() };
        let cfg = GlobalRegConfig { triplet_draws: Some(500), ..Default::default() };
        assert_eq!(filter_triplets(&corr, &src, &tgt, &cfg).unwrap(), corr);
    }

    #[test]
    fn triplets_reject_scaled_set() {
        let src = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        let tgt: Vec<Point3> = src.iter().map(|p| Point3::from(p.coords * 0.5)).collect();
        let corr = CorrespondenceSet { pairs: vec![(0, 0), (1, 1), (2, 2)] };
        assert_eq!(
            filter_triplets(&corr, &src, &tgt, &GlobalRegConfig::default()),
            Err(RegistrationError::NoSurvivingPairs)
        );
        let two = CorrespondenceSet { pairs: vec![(0, 0), (1, 1)] };
        assert_eq!(
            filter_triplets(&two, &src, &tgt, &GlobalRegConfig::default()),
            Err(RegistrationError::TooFewCorrespondences(2))
        );
    }

    #[test]
    fn gross_outlier_is_dropped() {
        let src = random_points(10, 5);
        let t = perturbation();
        let mut tgt: Vec<Point3> = src.iter().map(|p| t.apply(p)).collect();
        tgt[4] += Vector3::new(40.0, 0.0, 0.0);
        let corr = CorrespondenceSet { pairs: (0..10).map(|i| (i, i)).collect() };
        // exhaustive: every triplet with pair 4 fails, every other passes
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    let tri = CorrespondenceSet { pairs: vec![(a, a), (b, b), (c, c)] };
                    let cfg = GlobalRegConfig { triplet_draws: Some(50), ..Default::default() };
                    let ok = filter_triplets(&tri, &src, &tgt, &cfg).is_ok();
                    assert_eq!(ok, ![a, b, c].contains(&4));
                }
            }
        }
        let cfg = GlobalRegConfig { triplet_draws: Some(1000), ..Default::default() };
        let kept = filter_triplets(&corr, &src, &tgt, &cfg).unwrap();
        assert!(!kept.pairs.contains(&(4, 4)));
        assert_eq!(kept.len(), 9);
    }

    #[test]
    fn config_validation() {
        for tau in [0.5, 1.0, 1.5, f64::NAN] {
            let cfg = GlobalRegConfig { tau, ..Default::default() };
            assert!(cfg.validate().is_err());
        }
        assert!(TicpConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(TicpConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn icp_on_identical_clouds_stops_immediately() {
        let cloud = PointCloud::new(random_points(300, 2));
        let r = vanilla_icp(&cloud, &cloud, &RigidTransform::identity(), &TicpConfig::default()).unwrap();
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.stop, IcpStop::Threshold);
        let (a, d) = r.transform.difference(&RigidTransform::identity());
        assert!(a < 1e-12 && d < 1e-12);
    }

    #[test]
    fn icp_recovers_small_perturbation() {
        let src = PointCloud::new(random_points(800, 3));
        let t = perturbation();
        let tgt = src.transformed(&t);
        let cfg = TicpConfig { epsilon: 1e-10, ..Default::default() };
        let r = vanilla_icp(&src, &tgt, &RigidTransform::identity(), &cfg).unwrap();
        let (a, d) = r.transform.difference(&t);
        assert!(a < 1e-6 && d < 1e-6, "{a} {d}");
        assert!(!r.residual_increased);
        // the default threshold stops earlier but close
        let coarse = vanilla_icp(&src, &tgt, &RigidTransform::identity(), &TicpConfig::default()).unwrap();
        assert!(coarse.final_residual() < 1e-4);
        assert!(coarse.transform.difference(&t).1 < 1e-3);
    }

    #[test]
    fn icp_against_subsample_does_not_get_worse() {
        let full = PointCloud::new(random_points(600, 8));
        let half = full.select(&(0..600).step_by(2).collect::<Vec<_>>());
        let src = full.transformed(&perturbation());
        let r = vanilla_icp(&src, &half, &RigidTransform::identity(), &TicpConfig::default()).unwrap();
        assert!(r.iterations.last().unwrap().rms <= r.iterations[0].rms);
        assert!(!r.residual_increased);
    }

    fn arch_of(clouds: Vec<(u32, Vec<Point3>)>) -> LabeledArch {
        let segs: BTreeMap<_, _> = clouds
            .into_iter()
            .map(|(c, pts)| (ToothCode::new(c).unwrap(), PointCloud::new(pts)))
            .collect();
        LabeledArch::new(Jaw::Mandible, segs, PointCloud::default()).unwrap()
    }

    #[test]
    fn label_restriction_keeps_pairs_within_codes() {
        let pts = random_points(400, 9);
        let src = arch_of(vec![(20, pts[..200].to_vec()), (21, pts[200..].to_vec())]);
        let tgt = crate::arch::transform_arch(&src, &perturbation());
        let src_labels = src.teeth_labels();
        let tgt_labels = tgt.teeth_labels();
        let mut seen = 0;
        let cfg = TicpConfig { epsilon: 1e-10, ..Default::default() };
        let r = ticp_refine_observed(&src, &tgt, &RigidTransform::identity(), &cfg, &mut |_, corr| {
            for &(i, j) in &corr.pairs {
                assert_eq!(src_labels[i], tgt_labels[j]);
            }
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, r.iterations.len());
        let (a, d) = r.transform.difference(&perturbation());
        assert!(a < 1e-6 && d < 1e-6);
    }

    #[test]
    fn unconstrained_single_segment_equals_vanilla() {
        let pts = random_points(300, 10);
        let src = arch_of(vec![(22, pts.clone())]);
        let tgt_pts: Vec<Point3> = random_points(300, 11);
        let tgt = arch_of(vec![(22, tgt_pts.clone())]);
        let init = perturbation();
        for label_constraint in [false, true] {
            let cfg = TicpConfig { label_constraint, max_iterations: 20, ..Default::default() };
            let a = ticp_refine(&src, &tgt, &init, &cfg).unwrap();
            let b = vanilla_icp(&PointCloud::new(pts.clone()), &PointCloud::new(tgt_pts.clone()), &init, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn disjoint_codes_rejected() {
        let pts = random_points(30, 1);
        let src = arch_of(vec![(20, pts.clone())]);
        let tgt = arch_of(vec![(21, pts)]);
        assert_eq!(
            ticp_refine(&src, &tgt, &RigidTransform::identity(), &TicpConfig::default()),
            Err(RegistrationError::NoSharedCodes)
        );
    }

    #[test]
    fn global_align_of_identical_clouds_is_identity() {
        let pts: Vec<Point3> = random_points(600, 12)
            .into_iter()
            .map(|p| Point3::new(p.x, p.y, 0.05 * p.x * p.x - 0.03 * p.y * p.y + 0.02 * p.x * p.y))
            .collect();
        let arch = arch_of(vec![(20, pts)]);
        let g = global_align(&arch, &arch, &GlobalRegConfig::default()).unwrap();
        assert!(g.transform.rotation_angle() < 1e-6);
    }
}
