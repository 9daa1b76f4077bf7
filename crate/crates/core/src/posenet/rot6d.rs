//! Continuous 6D rotation representation: the first two columns of the
//! rotation matrix, recovered by Gram-Schmidt.

use crate::math::{Quaternion, Vec3};

pub fn to_6d(q: Quaternion) -> [f64; 6] {
    let m = q.to_matrix();
    [m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]]
}

/// Nearest rotation to an arbitrary 6-vector. Degenerate inputs (a zero or
/// parallel column) fall back to the identity's missing axes.
pub fn from_6d(r: &[f64; 6]) -> Quaternion {
    let a = Vec3::new(r[0], r[1], r[2]);
    let b = Vec3::new(r[3], r[4], r[5]);
    let c0 = a.normalized().unwrap_or(Vec3::X);
    let b_perp = b - c0 * c0.dot(b);
    let c1 = b_perp.normalized().unwrap_or_else(|| {
        let t = if c0.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        (t - c0 * c0.dot(t)).normalized().expect("helper axis is not parallel")
    });
    let c2 = c0.cross(c1);
    Quaternion::from_matrix([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    #[test]
    fn round_trip() {
        let mut rng = Rng::seed_from(3);
        for _ in 0..1000 {
            let q = Quaternion::new(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized().canonical();
            assert!(from_6d(&to_6d(q)).angle_to(q) < 1e-7);
        }
    }

    #[test]
    fn orthonormalizes_noisy_input() {
        let q = Quaternion::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.8);
        let mut r = to_6d(q);
        for v in &mut r {
            *v *= 1.7;
        }
        r[3] += 0.3 * r[0];
        r[4] += 0.3 * r[1];
        r[5] += 0.3 * r[2];
        assert!(from_6d(&r).angle_to(q) < 1e-9);
        assert!(from_6d(&[0.0; 6]).angle_to(Quaternion::IDENTITY) < 1e-12);
    }
}
