use nalgebra::SymmetricEigen;

use super::{GeomError, Matrix3, Point3, RigidTransform, Vector3};

/// Relative spread below which the source points are treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-12;

/// Least-squares rigid transform mapping each `x` onto its paired `y`
/// (orthogonal Procrustes / Kabsch with a reflection guard).
pub fn fit_rigid(pairs: &[(Point3, Point3)]) -> Result<RigidTransform, GeomError> {
    fit_iter(pairs.len(), || pairs.iter().map(|(x, y)| (x, y)))
}

/// [`fit_rigid`] over index pairs `(i, j)` into `source` and `target`.
pub fn fit_rigid_indexed(
    source: &[Point3],
    target: &[Point3],
    pairs: &[(usize, usize)],
) -> Result<RigidTransform, GeomError> {
    fit_iter(pairs.len(), || pairs.iter().map(|&(i, j)| (&source[i], &target[j])))
}

fn fit_iter<'a, I, F>(n: usize, pairs: F) -> Result<RigidTransform, GeomError>
where
    I: Iterator<Item = (&'a Point3, &'a Point3)>,
    F: Fn() -> I,
{
    if n < 3 {
        return Err(GeomError::DegenerateConfiguration(format!("rigid fit needs >= 3 pairs, got {n}")));
    }
    let inv_n = 1.0 / n as f64;
    let (sx, sy) = pairs().fold((Vector3::zeros(), Vector3::zeros()), |(a, b), (x, y)| (a + x.coords, b + y.coords));
    let cx = sx * inv_n;
    let cy = sy * inv_n;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for (x, y) in pairs() {
        let dx = x.coords - cx;
        let dy = y.coords - cy;
        cross += dx * dy.transpose();
        scatter += dx * dx.transpose();
    }
    if !cross.iter().chain(scatter.iter()).all(|v| v.is_finite()) {
        return Err(GeomError::InvalidInput("non-finite coordinates in rigid fit".into()));
    }

    let mut spread: Vec<f64> = SymmetricEigen::new(scatter).eigenvalues.iter().copied().collect();
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= COLLINEAR_RATIO * spread[0] {
        return Err(GeomError::DegenerateConfiguration(
            "source points are collinear or coincident; rotation is not determined".into(),
        ));
    }

    // cross = U Σ Vᵀ, R = V·diag(1, 1, d)·Uᵀ with d = sign det(V Uᵀ).
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or_else(|| GeomError::DegenerateConfiguration("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| GeomError::DegenerateConfiguration("SVD failed".into()))?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let mut correction = Matrix3::identity();
    correction[(2, 2)] = d;
    // nalgebra sorts singular values descending, so the smallest is last.
    let rotation = v * correction * u.transpose();
    let translation = cy - rotation * cx;
    RigidTransform::new(rotation, translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(t: &RigidTransform, pairs: &[(Point3, Point3)]) -> f64 {
        pairs.iter().map(|(x, y)| (t.apply(x) - y).norm_squared()).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_on_identical_pairs() {
        let pts = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let pairs: Vec<_> = pts.iter().map(|p| (*p, *p)).collect();
        let t = fit_rigid(&pairs).unwrap();
        let (a, tr) = t.difference(&RigidTransform::identity());
        assert!(a < 1e-12 && tr < 1e-12);
        assert!(residual(&t, &pairs) < 1e-12);
    }

    #[test]
    fn recovers_quarter_turn_about_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let pairs: Vec<_> = (0..10)
            .map(|_| {
                let x = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                (x, truth.apply(&x))
            })
            .collect();
        let t = fit_rigid(&pairs).unwrap();
        let (a, tr) = t.difference(&truth);
        assert!(a < 1e-9 && tr < 1e-9, "{a} {tr}");
        assert!(residual(&t, &pairs) < 1e-9);
    }

    #[test]
    fn planar_three_point_fit_has_no_reflection() {
        let truth = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, -0.5)), 2.2),
            Vector3::new(-4.0, 0.5, 9.0),
        );
        let xs = [Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0), Point3::new(0.0, 2.0, 0.0)];
        let pairs: Vec<_> = xs.iter().map(|x| (*x, truth.apply(x))).collect();
        let t = fit_rigid(&pairs).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-12);
        let (a, tr) = t.difference(&truth);
        assert!(a < 1e-9 && tr < 1e-9);
    }

    #[test]
    fn collinear_and_coincident_sources_are_degenerate() {
        let line: Vec<_> = (0..3).map(|i| (Point3::new(i as f64, 0.0, 0.0), Point3::new(0.0, i as f64, 0.0))).collect();
        assert!(matches!(fit_rigid(&line), Err(GeomError::DegenerateConfiguration(_))));
        let same = vec![(Point3::new(1.0, 1.0, 1.0), Point3::origin()); 4];
        assert!(matches!(fit_rigid(&same), Err(GeomError::DegenerateConfiguration(_))));
        assert!(fit_rigid(&line[..2]).is_err());
    }

    #[test]
    fn adding_an_exact_pair_keeps_residual_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7),
            Vector3::new(0.3, -2.0, 5.0),
        );
        let mut pairs = Vec::new();
        for _ in 0..3 {
            let x = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            pairs.push((x, truth.apply(&x)));
        }
        let mut prev = residual(&fit_rigid(&pairs).unwrap(), &pairs);
        for _ in 0..10 {
            let x = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            pairs.push((x, truth.apply(&x)));
            let r = residual(&fit_rigid(&pairs).unwrap(), &pairs);
            assert!(r <= prev.max(1e-9));
            prev = r;
        }
    }

    #[test]
    fn indexed_variant_agrees() {
        let src = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), Point3::new(0.0, 0.0, 1.0)];
        let t = RigidTransform::from_translation(Vector3::new(1.0, 1.0, 1.0));
        let tgt: Vec<_> = src.iter().rev().map(|p| t.apply(p)).collect();
        let pairs = [(0, 3), (1, 2), (2, 1), (3, 0)];
        let fit = fit_rigid_indexed(&src, &tgt, &pairs).unwrap();
        assert!(fit.difference(&t).1 < 1e-12);
    }
}
