//! Fast point feature histograms.
//!
//! For every ordered neighbour pair a Darboux frame yields three angles
//! `(ρ, φ, θ)`; each is binned into 11 equal intervals of `[0, π)` (θ after
//! halving). A point's SPFH averages these indicator vectors over its
//! k-neighbourhood with weight `1/k`, and its FPFH adds the neighbours' SPFH
//! weighted by `1/(k·(1 + distance))`.
//!
//! The neighbourhood includes the query point itself (distance 0), which
//! contributes no angle triple, so each SPFH sub-histogram sums to `(k−1)/k`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{Point3, PointCloud, SpatialIndex, UnitVector3};

pub const BINS: usize = 11;
pub const DESCRIPTOR_LEN: usize = 3 * BINS;
pub const DEFAULT_K: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpfhError {
    #[error("points {0} and {1} coincide; Darboux frame undefined")]
    CoincidentPoints(usize, usize),

    #[error("cloud has no normals")]
    MissingNormals,

    #[error("invalid neighbourhood size k = {k} for {n} points")]
    InvalidK { k: usize, n: usize },
}

/// Pair angles of the Darboux frame. `rho, phi ∈ [0, π]`, `theta ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxAngles {
    pub rho: f64,
    pub phi: f64,
    pub theta: f64,
}

/// Angle triple of the pair `(p, q)`.
///
/// The frame source is `p` when `⟨n_p, q − p⟩ ≤ ⟨n_q, p − q⟩` and `q`
/// otherwise, which makes the result symmetric in its arguments.
pub fn darboux_angles(
    p: &Point3,
    n_p: &UnitVector3,
    q: &Point3,
    n_q: &UnitVector3,
) -> Result<DarbouxAngles, FpfhError> {
    let d = q - p;
    let len = d.norm();
    if len == 0.0 {
        return Err(FpfhError::CoincidentPoints(0, 1));
    }
    let (n_s, n_t, dir) = if n_p.dot(&d) <= n_q.dot(&(-d)) { (n_p, n_q, d / len) } else { (n_q, n_p, -d / len) };

    let u = n_s.into_inner();
    let v = dir.cross(&u);
    let w = u.cross(&v);

    let rho = u.dot(&dir).clamp(-1.0, 1.0).acos();
    let phi = v.dot(n_t).clamp(-1.0, 1.0).acos();
    let base = u.dot(n_t).clamp(-1.0, 1.0).acos();
    let theta = if w.dot(n_t) >= 0.0 { base } else { base + PI };
    Ok(DarbouxAngles { rho, phi, theta })
}

/// Zero-based bin of `s` among 11 equal intervals of `[0, π)`. Values at or
/// beyond π fall into the last bin, negative values into the first.
pub fn bin_index(s: f64) -> usize {
    debug_assert!(!s.is_nan());
    let j = (s * BINS as f64 / PI).floor();
    if j <= 0.0 {
        0
    } else {
        (j as usize).min(BINS - 1)
    }
}

/// One-hot indicator of [`bin_index`].
pub fn bin_map(s: f64) -> [f64; BINS] {
    let mut out = [0.0; BINS];
    out[bin_index(s)] = 1.0;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spfh {
    pub rho: [f64; BINS],
    pub phi: [f64; BINS],
    pub theta: [f64; BINS],
}

/// 33-component descriptor: ρ, φ and θ/2 histograms concatenated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fpfh(pub [f64; DESCRIPTOR_LEN]);

impl Fpfh {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance_squared(&self, other: &Fpfh) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

fn require_normals(cloud: &PointCloud) -> Result<&[UnitVector3], FpfhError> {
    cloud.normals().ok_or(FpfhError::MissingNormals)
}

fn check_k(k: usize, n: usize) -> Result<(), FpfhError> {
    if k < 2 || k > n {
        return Err(FpfhError::InvalidK { k, n });
    }
    Ok(())
}

/// SPFH of the point at `point_idx` over its `k` nearest neighbours.
pub fn spfh(cloud: &PointCloud, index: &SpatialIndex, point_idx: usize, k: usize) -> Result<Spfh, FpfhError> {
    let normals = require_normals(cloud)?;
    check_k(k, cloud.len())?;
    let nbrs = index.knn(&cloud.points()[point_idx], k);
    spfh_from_neighbours(cloud.points(), normals, point_idx, &nbrs, k)
}

fn spfh_from_neighbours(
    points: &[Point3],
    normals: &[UnitVector3],
    i: usize,
    nbrs: &[usize],
    k: usize,
) -> Result<Spfh, FpfhError> {
    let w = 1.0 / k as f64;
    let mut h = Spfh::default();
    for &j in nbrs.iter().filter(|&&j| j != i) {
        let a = darboux_angles(&points[i], &normals[i], &points[j], &normals[j])
            .map_err(|_| FpfhError::CoincidentPoints(i, j))?;
        h.rho[bin_index(a.rho)] += w;
        h.phi[bin_index(a.phi)] += w;
        h.theta[bin_index(0.5 * a.theta)] += w;
    }
    Ok(h)
}

/// FPFH descriptor for every point of `cloud`, indexed by `index` (which
/// must be built over the same points).
pub fn fpfh(cloud: &PointCloud, index: &SpatialIndex, k: usize) -> Result<Vec<Fpfh>, FpfhError> {
    let normals = require_normals(cloud)?;
    let points = cloud.points();
    check_k(k, points.len())?;

    let neighbourhoods: Vec<Vec<usize>> = points.par_iter().map(|p| index.knn(p, k)).collect();
    // First pass: all SPFH; second pass reads them.
    let spfhs: Vec<Spfh> = (0..points.len())
        .into_par_iter()
        .map(|i| spfh_from_neighbours(points, normals, i, &neighbourhoods[i], k))
        .collect::<Result<_, _>>()?;

    let inv_k = 1.0 / k as f64;
    Ok((0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = &spfhs[i];
            let mut out = [0.0; DESCRIPTOR_LEN];
            out[..BINS].copy_from_slice(&own.rho);
            out[BINS..2 * BINS].copy_from_slice(&own.phi);
            out[2 * BINS..].copy_from_slice(&own.theta);
            for &j in neighbourhoods[i].iter().filter(|&&j| j != i) {
                let weight = inv_k / (1.0 + (points[i] - points[j]).norm());
                let s = &spfhs[j];
                for b in 0..BINS {
                    out[b] += weight * s.rho[b];
                    out[BINS + b] += weight * s.phi[b];
                    out[2 * BINS + b] += weight * s.theta[b];
                }
            }
            Fpfh(out)
        })
        .collect())
}
