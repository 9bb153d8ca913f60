use super::SynthError;
use crate::geom::{Point3, PointCloud, RigidTransform, SpatialIndex};

/// Mean distance `(1/N)·Σ‖t(xᵢ) − yᵢ‖` between corresponding landmarks.
pub fn landmark_error(src: &[Point3], tgt: &[Point3], t: &RigidTransform) -> Result<f64, SynthError> {
    if src.len() != tgt.len() {
        return Err(SynthError::LengthMismatch { src: src.len(), tgt: tgt.len() });
    }
    if src.is_empty() {
        return Err(SynthError::EmptyInput);
    }
    let total: f64 = src.iter().zip(tgt).map(|(x, y)| (t.apply(x) - y).norm()).sum();
    Ok(total / src.len() as f64)
}

/// Distance from every transformed source point to its nearest target point.
pub fn surface_distances(src: &PointCloud, tgt: &PointCloud, t: &RigidTransform) -> Result<Vec<f64>, SynthError> {
    if src.is_empty() || tgt.is_empty() {
        return Err(SynthError::EmptyInput);
    }
    let index = SpatialIndex::new(tgt.points());
    Ok(src
        .points()
        .iter()
        .map(|p| index.nearest(&t.apply(p)).expect("target is nonempty").1.sqrt())
        .collect())
}

/// Directed Hausdorff distance from `t(src)` to `tgt`. Not symmetric.
pub fn surface_error(src: &PointCloud, tgt: &PointCloud, t: &RigidTransform) -> Result<f64, SynthError> {
    Ok(surface_distances(src, tgt, t)?.into_iter().fold(0.0, f64::max))
}

/// Nearest-rank percentile, `q ∈ [0, 1]`. `None` for an empty slice.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.saturating_sub(1)])
}
