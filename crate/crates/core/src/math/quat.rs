use core::ops::Mul;

#[allow(unused_imports)] // inherent float methods exist only when std is in the build graph
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::Vec3;

/// Tolerance on `‖q‖ − 1` accepted by the rotation helpers.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Hamilton quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let Some(a) = axis.normalized() else {
            return Self::IDENTITY;
        };
        let (s, c) = (angle * 0.5).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map of a rotation vector (axis × angle).
    pub fn from_rotation_vector(r: Vec3) -> Self {
        let angle = r.norm();
        if angle < 1e-12 {
            // first-order expansion keeps the map smooth through zero
            return Self::new(1.0, 0.5 * r.x, 0.5 * r.y, 0.5 * r.z).normalized();
        }
        Self::from_axis_angle(r, angle)
    }

    /// Logarithm map: the rotation vector of the shortest equivalent rotation.
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = self.canonical();
        let v = q.vector();
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Representative with `w ≥ 0` (q and −q are the same rotation).
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Self::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn inverse(self) -> Self {
        let n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z;
        let c = self.conjugate();
        Self::new(c.w / n2, c.x / n2, c.y / n2, c.z / n2)
    }

    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// `q v q⁻¹` for a unit quaternion, without the unit-norm check.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = self.vector();
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Geodesic rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        let q = self.canonical();
        2.0 * q.vector().norm().atan2(q.w)
    }

    /// Geodesic angle between two orientations.
    pub fn angle_to(self, other: Quaternion) -> f64 {
        (self.conjugate() * other).angle()
    }

    /// Spherical interpolation along the shortest arc.
    pub fn slerp(self, other: Quaternion, t: f64) -> Quaternion {
        let mut o = other;
        if self.dot(o) < 0.0 {
            o = Quaternion::new(-o.w, -o.x, -o.y, -o.z);
        }
        let delta = (self.conjugate() * o).to_rotation_vector();
        self * Quaternion::from_rotation_vector(delta * t)
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Quaternion of a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Self {
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quaternion::new(0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quaternion::new((m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quaternion::new((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s)
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quaternion::new((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s)
        };
        q.normalized().canonical()
    }

    /// Heading angle (rotation about world z) of the body x axis.
    pub fn yaw(self) -> f64 {
        let fwd = self.rotate(Vec3::X);
        fwd.y.atan2(fwd.x)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

/// Rotates `v` by the unit quaternion `q`.
///
/// Panics if `q` is not unit-norm within [`UNIT_TOLERANCE`].
pub fn quat_rotate(q: Quaternion, v: Vec3) -> Vec3 {
    assert!(q.is_unit(), "quat_rotate: non-unit quaternion (norm {})", q.norm());
    q.rotate(v)
}

/// Relative orientation `q_i⁻¹ ⊗ q_j`, normalized with `w ≥ 0`.
pub fn quat_relative(q_i: Quaternion, q_j: Quaternion) -> Quaternion {
    debug_assert!(q_i.is_unit() && q_j.is_unit());
    (q_i.conjugate() * q_j).normalized().canonical()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn random_quat(rng: &mut Rng) -> Quaternion {
        Quaternion::new(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized().canonical()
    }

    fn mat_vec(m: [[f64; 3]; 3], v: Vec3) -> Vec3 {
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    // Rotation matrix from axis-angle via Rodrigues, independent of the quaternion path.
    fn rodrigues(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
        let k = axis.normalized().unwrap();
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [c + k.x * k.x * t, k.x * k.y * t - k.z * s, k.x * k.z * t + k.y * s],
            [k.y * k.x * t + k.z * s, c + k.y * k.y * t, k.y * k.z * t - k.x * s],
            [k.z * k.x * t - k.y * s, k.z * k.y * t + k.x * s, c + k.z * k.z * t],
        ]
    }

    #[test]
    fn rotate_identity_and_axis_cases() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(quat_rotate(Quaternion::IDENTITY, v), v);
        let q = Quaternion::from_axis_angle(Vec3::Z, FRAC_PI_2);
        assert!(close(quat_rotate(q, Vec3::X), Vec3::Y, 1e-15));
    }

    #[test]
    fn rotate_matches_rodrigues_matrix() {
        let mut rng = Rng::seed_from(11);
        for _ in 0..200 {
            let axis = Vec3::new(rng.normal(), rng.normal(), rng.normal());
            let angle = rng.uniform_range(-3.0, 3.0);
            let v = Vec3::new(rng.normal(), rng.normal(), rng.normal());
            let q = Quaternion::from_axis_angle(axis, angle);
            let expected = mat_vec(rodrigues(axis, angle), v);
            assert!(close(quat_rotate(q, v), expected, 1e-12));
            assert!((quat_rotate(q, v).norm() - v.norm()).abs() < 1e-12);
            assert!(close(mat_vec(q.to_matrix(), v), expected, 1e-12));
        }
    }

    #[test]
    #[should_panic(expected = "non-unit")]
    fn rotate_rejects_non_unit() {
        quat_rotate(Quaternion::new(1.0, 0.1, 0.0, 0.0), Vec3::X);
    }

    #[test]
    fn relative_cases() {
        let q = Quaternion::from_axis_angle(Vec3::new(1.0, 2.0, -1.0), 0.7);
        let r = quat_relative(q, q);
        assert!(r.angle() < 1e-12);
        let x30 = Quaternion::from_axis_angle(Vec3::X, FRAC_PI_6);
        let r = quat_relative(Quaternion::IDENTITY, x30);
        assert!(r.angle_to(x30) < 1e-12);
        assert!((r.angle() - FRAC_PI_6).abs() < 1e-12);

        let mut rng = Rng::seed_from(3);
        for _ in 0..200 {
            let qi = random_quat(&mut rng);
            let qj = random_quat(&mut rng);
            let r = quat_relative(qi, qj);
            assert!(r.w >= 0.0);
            let back = (qi * r).canonical();
            let qj = qj.canonical();
            for (a, b) in back.to_array().iter().zip(qj.to_array()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matrix_round_trip() {
        let mut rng = Rng::seed_from(5);
        for _ in 0..200 {
            let q = random_quat(&mut rng);
            let back = Quaternion::from_matrix(q.to_matrix());
            assert!(q.angle_to(back) < 1e-9);
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = Rng::seed_from(9);
        for _ in 0..200 {
            let r = Vec3::new(rng.normal(), rng.normal(), rng.normal()) * 0.9;
            let back = Quaternion::from_rotation_vector(r).to_rotation_vector();
            assert!(close(r, back, 1e-12));
        }
    }

    #[test]
    fn associativity_and_idempotent_normalize() {
        let mut rng = Rng::seed_from(21);
        for _ in 0..500 {
            let (a, b, c) = (random_quat(&mut rng), random_quat(&mut rng), random_quat(&mut rng));
            let l = (a * b) * c;
            let r = a * (b * c);
            for (x, y) in l.to_array().iter().zip(r.to_array()) {
                assert!((x - y).abs() < 1e-12);
            }
            let n = Quaternion::new(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
            assert!((n.norm() - 1.0).abs() < 1e-9);
            let nn = n.normalized();
            for (x, y) in n.to_array().iter().zip(nn.to_array()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }
}
