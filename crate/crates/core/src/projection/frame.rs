use nalgebra::SymmetricEigen;

use super::ProjectionError;
use crate::geom::{Matrix3, Point3, PointCloud, RigidTransform, UnitVector3, Vector3};

/// Eigenvalue gaps below this fraction of the largest eigenvalue count as
/// ties.
const TIE_RATIO: f64 = 1e-9;

/// Right-handed orthonormal frame centred on the cloud centroid. `u1`, `u2`,
/// `u3` are roughly the horizontal, sagittal and occlusal directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusalFrame {
    pub origin: Point3,
    pub u1: UnitVector3,
    pub u2: UnitVector3,
    pub u3: UnitVector3,
}

impl OcclusalFrame {
    /// Coordinates of `p` along `(u1, u2, u3)`.
    pub fn to_local(&self, p: &Point3) -> Vector3 {
        let d = p - self.origin;
        Vector3::new(self.u1.dot(&d), self.u2.dot(&d), self.u3.dot(&d))
    }

    pub fn to_world(&self, local: &Vector3) -> Point3 {
        self.origin + self.u1.into_inner() * local.x + self.u2.into_inner() * local.y + self.u3.into_inner() * local.z
    }

    /// World → frame coordinates as a rigid transform.
    pub fn world_to_local(&self) -> RigidTransform {
        let r = Matrix3::from_rows(&[self.u1.transpose(), self.u2.transpose(), self.u3.transpose()]);
        RigidTransform::new(r, -(r * self.origin.coords)).expect("frame axes are orthonormal")
    }

    /// The frame carried along by `t`.
    pub fn transformed(&self, t: &RigidTransform) -> OcclusalFrame {
        OcclusalFrame {
            origin: t.apply(&self.origin),
            u1: t.apply_unit(&self.u1),
            u2: t.apply_unit(&self.u2),
            u3: t.apply_unit(&self.u3),
        }
    }
}

/// PCA frame with the sign rules: `u2 = ±pc2` facing the sum of unit
/// directions from the centroid, `u3 = ±pc3` facing the sum of normals,
/// `u1 = u2 × u3`.
pub fn occlusal_frame(cloud: &PointCloud) -> Result<OcclusalFrame, ProjectionError> {
    let normals = cloud.normals().ok_or(ProjectionError::MissingNormals)?;
    if cloud.len() < 3 {
        return Err(ProjectionError::DegenerateConfiguration(format!("need >= 3 points, got {}", cloud.len())));
    }
    let origin = cloud.centroid().expect("nonempty");
    let mut cov = Matrix3::zeros();
    for p in cloud.points() {
        let d = p - origin;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let [l1, l2, l3] = order.map(|i| eig.eigenvalues[i]);
    if !(l1 > 0.0) || l2 <= TIE_RATIO * l1 {
        return Err(ProjectionError::DegenerateConfiguration("points are collinear or coincident".into()));
    }
    if l1 - l2 <= TIE_RATIO * l1 || l2 - l3 <= TIE_RATIO * l1 {
        return Err(ProjectionError::DegenerateConfiguration(format!(
            "principal variances tie ({l1:.6e}, {l2:.6e}, {l3:.6e}); axes are not unique"
        )));
    }
    let pc2: Vector3 = eig.eigenvectors.column(order[1]).into_owned();
    let pc3: Vector3 = eig.eigenvectors.column(order[2]).into_owned();

    let spread = cloud.points().iter().fold(Vector3::zeros(), |acc, p| {
        let d = p - origin;
        let n = d.norm();
        if n > 0.0 {
            acc + d / n
        } else {
            acc
        }
    });
    let up = normals.iter().fold(Vector3::zeros(), |acc, n| acc + n.into_inner());

    let u2 = if pc2.dot(&spread) >= 0.0 { pc2 } else { -pc2 };
    let u3 = if pc3.dot(&up) >= 0.0 { pc3 } else { -pc3 };
    let u1 = u2.cross(&u3);
    Ok(OcclusalFrame {
        origin,
        u1: UnitVector3::new_normalize(u1),
        u2: UnitVector3::new_normalize(u2),
        u3: UnitVector3::new_normalize(u3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Horseshoe of points opening towards −y with a little height relief.
    fn horseshoe(seed: u64, up: f64) -> PointCloud {
        horseshoe_with_relief(seed, up, 1.0)
    }

    fn horseshoe_with_relief(seed: u64, up: f64, relief: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..800 {
            let x: f64 = rng.random_range(-25.0..25.0);
            let y = -0.03 * x * x + rng.random_range(-2.0..2.0);
            pts.push(Point3::new(x, y, relief * rng.random_range(0.0..1.0)));
        }
        let n = pts.len();
        PointCloud::with_normals(pts, vec![Unit::new_normalize(Vector3::new(0.0, 0.0, up)); n]).unwrap()
    }

    fn close(a: &Vector3, b: &Vector3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn flat_arch_with_up_normals() {
        let f = occlusal_frame(&horseshoe_with_relief(1, 1.0, 0.0)).unwrap();
        assert!(close(&f.u3, &Vector3::z(), 1e-9));
        assert!(close(&f.u1, &f.u2.cross(&f.u3), 1e-12));
        let down = occlusal_frame(&horseshoe_with_relief(1, -1.0, 0.0)).unwrap();
        assert!(close(&down.u3, &-Vector3::z(), 1e-9));
    }

    #[test]
    fn mirror_flips_u2_and_u1() {
        let cloud = horseshoe(2, 1.0);
        let f = occlusal_frame(&cloud).unwrap();
        // reflect through the plane orthogonal to u2 that contains the origin
        let m = Matrix3::identity() - 2.0 * f.u2.into_inner() * f.u2.transpose();
        let mirrored = PointCloud::with_normals(
            cloud.points().iter().map(|p| Point3::from(m * p.coords)).collect(),
            cloud.normals().unwrap().iter().map(|n| Unit::new_normalize(m * n.into_inner())).collect(),
        )
        .unwrap();
        let g = occlusal_frame(&mirrored).unwrap();
        let mu = |v: &UnitVector3| m * v.into_inner();
        assert!(close(&g.u2, &mu(&f.u2), 1e-9));
        assert!(close(&g.u2, &-f.u2.into_inner(), 1e-9));
        assert!(close(&g.u3, &f.u3, 1e-9));
        assert!(close(&g.u1, &-f.u1.into_inner(), 1e-9));
        assert!(close(&g.u1, &g.u2.cross(&g.u3), 1e-12));
    }

    #[test]
    fn rigid_equivariance() {
        let cloud = horseshoe(3, 1.0);
        let t = RigidTransform::from_rotation(
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, -2.0, 0.5)), 2.0),
            Vector3::new(4.0, 5.0, -6.0),
        );
        let f = occlusal_frame(&cloud).unwrap().transformed(&t);
        let g = occlusal_frame(&cloud.transformed(&t)).unwrap();
        assert!((f.origin - g.origin).norm() < 1e-9);
        for (a, b) in [(f.u1, g.u1), (f.u2, g.u2), (f.u3, g.u3)] {
            assert!(close(&a, &b, 1e-9));
        }
        let local = g.world_to_local();
        let p = Point3::new(1.0, 2.0, 3.0);
        assert!((local.apply(&p).coords - g.to_local(&p)).norm() < 1e-12);
        assert!((g.to_world(&g.to_local(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn tied_minor_axes_are_rejected() {
        // points on a circle in the xz-plane plus a long y extent: λ(x) = λ(z)
        let mut pts = Vec::new();
        for i in 0..64 {
            let a = i as f64 * std::f64::consts::TAU / 64.0;
            for y in [-10.0, 10.0] {
                pts.push(Point3::new(a.cos(), y, a.sin()));
            }
        }
        let n = pts.len();
        let cloud = PointCloud::with_normals(pts, vec![Vector3::z_axis(); n]).unwrap();
        assert!(matches!(occlusal_frame(&cloud), Err(ProjectionError::DegenerateConfiguration(_))));
    }
}
