use std::ops::Mul;

use nalgebra::{Matrix4, Rotation3, Unit};

use super::{GeomError, Matrix3, Point3, UnitVector3, Vector3};

/// Orthonormality / determinant tolerance of the rotation block.
const ROTATION_TOLERANCE: f64 = 1e-9;

/// An element of SE(3): `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3,
    translation: Vector3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Builds a transform, checking `RᵀR = I` and `det R = 1` within 1e-9.
    pub fn new(rotation: Matrix3, translation: Vector3) -> Result<Self, GeomError> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidInput("non-finite translation".into()));
        }
        let err = rotation_defect(&rotation);
        if !(err <= ROTATION_TOLERANCE) {
            return Err(GeomError::InvalidInput(format!(
                "rotation block is not a proper rotation (defect {err:.3e})"
            )));
        }
        Ok(Self { rotation, translation })
    }

    /// Like [`RigidTransform::new`] but snaps a nearly orthonormal block
    /// (defect up to `tolerance`) onto the closest rotation.
    pub fn new_orthonormalized(rotation: Matrix3, translation: Vector3, tolerance: f64) -> Result<Self, GeomError> {
        let err = rotation_defect(&rotation);
        if err <= ROTATION_TOLERANCE {
            return Self::new(rotation, translation);
        }
        if !(err <= tolerance) {
            return Err(GeomError::InvalidInput(format!(
                "rotation block is not a proper rotation (defect {err:.3e})"
            )));
        }
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        Self::new(u * v_t, translation)
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vector3) -> Self {
        Self { rotation: *rotation.matrix(), translation }
    }

    pub fn from_translation(translation: Vector3) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Rotation of `angle` radians about `axis` through `center`.
    pub fn rotation_about(axis: &UnitVector3, angle: f64, center: &Point3) -> Self {
        let r = Rotation3::from_axis_angle(axis, angle);
        let t = center.coords - r * center.coords;
        Self::from_rotation(r, t)
    }

    pub fn rotation(&self) -> &Matrix3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3 {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn apply_unit(&self, n: &UnitVector3) -> UnitVector3 {
        Unit::new_normalize(self.rotation * n.as_ref())
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let r_t = self.rotation.transpose();
        RigidTransform { rotation: r_t, translation: -(r_t * self.translation) }
    }

    /// Rotation angle in radians, accurate near zero.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle_of(&self.rotation)
    }

    /// Angle of `R_self · R_otherᵀ` and `‖t_self − t_other‖`.
    pub fn difference(&self, other: &RigidTransform) -> (f64, f64) {
        let rel = self.rotation * other.rotation.transpose();
        (rotation_angle_of(&rel), (self.translation - other.translation).norm())
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix4(m: &Matrix4<f64>) -> Result<Self, GeomError> {
        check_bottom_row(m)?;
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }
}

pub(crate) fn check_bottom_row(m: &Matrix4<f64>) -> Result<(), GeomError> {
    if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
        return Err(GeomError::InvalidInput("bottom row must be (0, 0, 0, 1)".into()));
    }
    Ok(())
}

fn rotation_defect(r: &Matrix3) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    let det = (r.determinant() - 1.0).abs();
    if ortho.is_nan() || det.is_nan() {
        f64::INFINITY
    } else {
        ortho.max(det)
    }
}

/// ‖R − I‖_F = 2√2·sin(θ/2), which stays well conditioned for small θ
/// where `acos((tr R − 1)/2)` does not.
fn rotation_angle_of(r: &Matrix3) -> f64 {
    let chord = (r - Matrix3::identity()).norm() / (2.0 * std::f64::consts::SQRT_2);
    if chord < std::f64::consts::FRAC_1_SQRT_2 {
        2.0 * chord.asin()
    } else {
        let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transform() -> impl Strategy<Value = RigidTransform> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.0f64..3.0,
            prop::array::uniform3(-50.0f64..50.0),
        )
            .prop_filter("axis nonzero", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
            .prop_map(|(a, ang, t)| {
                let axis = Unit::new_normalize(Vector3::from(a));
                RigidTransform::from_rotation(Rotation3::from_axis_angle(&axis, ang), Vector3::from(t))
            })
    }

    proptest! {
        #[test]
        fn composition_is_associative(a in arb_transform(), b in arb_transform(), c in arb_transform()) {
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            prop_assert!((lhs.to_matrix4() - rhs.to_matrix4()).amax() < 1e-9);
        }

        #[test]
        fn inverse_cancels(a in arb_transform()) {
            let id = a * a.inverse();
            let (ang, tr) = id.difference(&RigidTransform::identity());
            prop_assert!(ang < 1e-9 && tr < 1e-9);
        }
    }

    #[test]
    fn small_angles_are_resolved() {
        let axis = Vector3::x_axis();
        for &ang in &[1e-12, 1e-9, 1e-6, 0.5, 3.0] {
            let t = RigidTransform::from_rotation(Rotation3::from_axis_angle(&axis, ang), Vector3::zeros());
            assert!((t.rotation_angle() - ang).abs() < 1e-15 + ang * 1e-12, "{ang}");
        }
    }

    #[test]
    fn rejects_reflection_and_bad_bottom_row() {
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(refl, Vector3::zeros()).is_err());
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.5;
        assert!(RigidTransform::from_matrix4(&m).is_err());
    }

    #[test]
    fn orthonormalizes_slightly_off_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 1)] = 1e-7;
        assert!(RigidTransform::new(r, Vector3::zeros()).is_err());
        let t = RigidTransform::new_orthonormalized(r, Vector3::zeros(), 1e-6).unwrap();
        assert!((t.rotation().transpose() * t.rotation() - Matrix3::identity()).amax() < 1e-12);
    }
}
