use nalgebra::{SymmetricEigen, Unit};
use rayon::prelude::*;

use super::{centroid, GeomError, Matrix3, PointCloud, SpatialIndex, UnitVector3, Vector3};

/// Relative eigenvalue threshold below which a neighbourhood counts as
/// collinear (two vanishing eigenvalues).
const COLLINEAR_RATIO: f64 = 1e-12;

/// Estimates a unit normal per point from the covariance of its `k` nearest
/// neighbours (the point itself included).
///
/// The normal is the eigenvector of the smallest eigenvalue, oriented so that
/// `⟨n, p − c⟩ ≥ 0` for the cloud centroid `c`. When that product vanishes
/// (relative to `‖p − c‖`) the sign is canonical: positive z, else positive y,
/// else positive x.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud, GeomError> {
    let points = cloud.points();
    if k < 3 {
        return Err(GeomError::InvalidInput(format!("normal estimation needs k >= 3, got {k}")));
    }
    if points.len() < k {
        return Err(GeomError::InvalidInput(format!(
            "normal estimation needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    cloud.check_finite()?;
    let index = SpatialIndex::new(points);
    let center = centroid(points).unwrap();

    let normals: Result<Vec<UnitVector3>, GeomError> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let nbrs = index.knn(&points[i], k);
            let mut n = smallest_eigenvector(&nbrs.iter().map(|&j| points[j].coords).collect::<Vec<_>>())
                .ok_or(GeomError::DegenerateNeighborhood { index: i })?;
            n = canonical_sign(n);
            let offset = points[i] - center;
            let dot = n.dot(&offset);
            if dot < -1e-12 * offset.norm() {
                n = -n;
            }
            Ok(Unit::new_normalize(n))
        })
        .collect();

    PointCloud::with_normals(points.to_vec(), normals?)
}

fn smallest_eigenvector(nbrs: &[Vector3]) -> Option<Vector3> {
    let mean = nbrs.iter().fold(Vector3::zeros(), |a, v| a + v) / nbrs.len() as f64;
    let mut cov = Matrix3::zeros();
    for v in nbrs {
        let d = v - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 0.0) || middle <= COLLINEAR_RATIO * largest {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).into_owned())
}

fn canonical_sign(n: Vector3) -> Vector3 {
    let key = if n.z != 0.0 {
        n.z
    } else if n.y != 0.0 {
        n.y
    } else {
        n.x
    };
    if key < 0.0 {
        -n
    } else {
        n
    }
}
