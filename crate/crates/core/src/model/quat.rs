//! Unit quaternions for joint and sensor orientations.
//!
//! Hamilton convention, scalar first: `q = w + xi + yj + zk`. A quaternion
//! `q` rotates a vector `v` as `q v q*`, and `a * b` applies `b` first, then `a`.

use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Raw constructor; does not normalize.
    pub const fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Normalized constructor. Falls back to identity for a zero quaternion.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }.normalized()
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Quat::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Rotation vector (axis * angle) to quaternion.
    pub fn from_rotation_vector(r: Vec3) -> Self {
        Self::from_axis_angle(r, r.norm())
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Self::IDENTITY;
        }
        if n == 1.0 {
            return self;
        }
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(&self) -> Self {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Inverse of a unit quaternion (its conjugate).
    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Hamilton product without renormalization. Used where one operand is a
    /// quaternion derivative rather than a rotation.
    pub fn mul_raw(&self, b: &Quat) -> Quat {
        let a = self;
        Quat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    /// Rotates `v` by this quaternion.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = self.vector();
        let t = 2.0 * u.cross(&v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let Quat { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method). The result has
    /// a non-negative scalar part.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > 0.0 {
            let s = 2.0 * (trace + 1.0).sqrt();
            Quat::from_wxyz(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            Quat::from_wxyz(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            Quat::from_wxyz(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            Quat::from_wxyz(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        let q = q.normalized();
        if q.w < 0.0 {
            -q
        } else {
            q
        }
    }

    /// Minimal-angle rotation taking the direction of `from` onto the
    /// direction of `to`.
    ///
    /// For exactly antiparallel inputs the result is a half turn about
    /// `from x X`, or `from x Y` when `from` is parallel to X. Zero-length
    /// inputs give the identity.
    pub fn shortest_arc(from: Vec3, to: Vec3) -> Self {
        let (na, nb) = (from.norm(), to.norm());
        if na == 0.0 || nb == 0.0 {
            return Self::IDENTITY;
        }
        let a = from / na;
        let b = to / nb;
        let half = a + b;
        let hn = half.norm();
        if hn < 1e-12 {
            let mut axis = a.cross(&Vec3::x());
            if axis.norm() < 1e-6 {
                axis = a.cross(&Vec3::y());
            }
            let axis = axis.normalize();
            return Quat::from_wxyz(0.0, axis.x, axis.y, axis.z);
        }
        // Rotation by twice the angle between a and the half vector h.
        let h = half / hn;
        let c = a.cross(&h);
        Quat::new(a.dot(&h), c.x, c.y, c.z)
    }

    /// Spherical interpolation along the shorter arc. `t = 0` returns `self`
    /// and `t = 1` returns `other` (up to sign).
    pub fn slerp(&self, other: &Quat, t: f64) -> Quat {
        if self == other || t == 0.0 {
            return *self;
        }
        let mut b = *other;
        let mut cos = self.dot(&b);
        if cos < 0.0 {
            b = -b;
            cos = -cos;
        }
        if t == 1.0 {
            return b;
        }
        let (wa, wb) = if cos > 1.0 - 1e-12 {
            (1.0 - t, t)
        } else {
            let theta = cos.min(1.0).acos();
            let s = theta.sin();
            (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
        };
        Quat::new(
            wa * self.w + wb * b.w,
            wa * self.x + wb * b.x,
            wa * self.y + wb * b.y,
            wa * self.z + wb * b.z,
        )
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> f64 {
        2.0 * self.vector().norm().atan2(self.w.abs())
    }
}

impl Mul for Quat {
    type Output = Quat;

    /// Hamilton product, renormalized.
    fn mul(self, rhs: Quat) -> Quat {
        self.mul_raw(&rhs).normalized()
    }
}

impl Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat::from_wxyz(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Flips signs in place so consecutive quaternions have non-negative dot
/// products.
pub fn make_sign_continuous(seq: &mut [Quat]) {
    for i in 1..seq.len() {
        if seq[i].dot(&seq[i - 1]) < 0.0 {
            seq[i] = -seq[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;

    use super::*;

    fn close_q(a: Quat, b: Quat, tol: f64) -> bool {
        // q and -q are the same rotation
        let d1 = (0..4)
            .map(|i| (a.to_array()[i] - b.to_array()[i]).abs())
            .fold(0.0, f64::max);
        let d2 = (0..4)
            .map(|i| (a.to_array()[i] + b.to_array()[i]).abs())
            .fold(0.0, f64::max);
        d1.min(d2) < tol
    }

    fn close_v(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn unit_quat() -> impl Strategy<Value = Quat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quat::new(w, x, y, z))
    }

    fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
        (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    #[test]
    fn identity_is_neutral() {
        let q = Quat::new(0.3, -0.2, 0.9, 0.1);
        assert!(close_q(Quat::IDENTITY * q, q, 1e-15));
        assert!(close_q(q * Quat::IDENTITY, q, 1e-15));
    }

    #[test]
    fn inverse_cancels() {
        let q = Quat::new(0.3, -0.2, 0.9, 0.1);
        assert!(close_q(q * q.inverse(), Quat::IDENTITY, 1e-15));
    }

    #[test]
    fn two_quarter_turns_about_x_make_half_turn() {
        // Oracle: the matrix product R_x(90) R_x(90) converted back.
        let rx = |a: f64| nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos());
        let expected = Quat::from_matrix(&(rx(FRAC_PI_2) * rx(FRAC_PI_2)));
        let q = Quat::from_axis_angle(Vec3::x(), FRAC_PI_2);
        let got = q * q;
        assert!(close_q(got, expected, 1e-12));
        assert!(close_q(got, Quat::from_wxyz(0.0, 1.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn rotate_examples() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Quat::IDENTITY.rotate(v), v);
        let qz = Quat::from_axis_angle(Vec3::z(), FRAC_PI_2);
        assert!(close_v(qz.rotate(Vec3::x()), Vec3::y(), 1e-15));
    }

    #[test]
    fn shortest_arc_examples() {
        assert!(close_q(Quat::shortest_arc(Vec3::x(), Vec3::x()), Quat::IDENTITY, 1e-15));
        let q = Quat::shortest_arc(Vec3::x(), Vec3::y());
        assert!(close_q(q, Quat::from_axis_angle(Vec3::z(), FRAC_PI_2), 1e-15));
    }

    #[test]
    fn shortest_arc_antiparallel_is_deterministic_half_turn() {
        for from in [Vec3::x(), Vec3::y(), Vec3::new(0.3, -0.4, 0.5)] {
            let q = Quat::shortest_arc(from, -from);
            assert!((q.angle() - std::f64::consts::PI).abs() < 1e-12);
            assert!(close_v(q.rotate(from.normalize()), -from.normalize(), 1e-12));
            assert_eq!(q, Quat::shortest_arc(from, -from));
        }
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Quat::IDENTITY;
        let b = Quat::from_axis_angle(Vec3::y(), 1.0);
        assert_eq!(a.slerp(&b, 0.0), a);
        assert!(close_q(a.slerp(&b, 1.0), b, 1e-15));
        assert!(close_q(a.slerp(&b, 0.5), Quat::from_axis_angle(Vec3::y(), 0.5), 1e-14));
        assert_eq!(b.slerp(&b, 0.37), b);
    }

    #[test]
    fn sign_continuity() {
        let q = Quat::from_axis_angle(Vec3::z(), 0.1);
        let mut seq = vec![q, -q, q, -q];
        make_sign_continuous(&mut seq);
        assert!(seq.windows(2).all(|w| w[0].dot(&w[1]) >= 0.0));
    }

    proptest! {
        #[test]
        fn product_of_units_is_unit(a in unit_quat(), b in unit_quat()) {
            prop_assert!(((a * b).norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotate_matches_matrix_form(q in unit_quat(), v in vec3(10.0)) {
            prop_assert!(close_v(q.rotate(v), q.to_matrix() * v, 1e-9));
            prop_assert!((q.rotate(v).norm() - v.norm()).abs() < 1e-9);
        }

        #[test]
        fn rotate_distributes_over_composition(a in unit_quat(), b in unit_quat(), v in vec3(10.0)) {
            prop_assert!(close_v((a * b).rotate(v), a.rotate(b.rotate(v)), 1e-9));
        }

        #[test]
        fn matrix_round_trip(q in unit_quat()) {
            prop_assert!(close_q(Quat::from_matrix(&q.to_matrix()), q, 1e-9));
        }

        #[test]
        fn shortest_arc_maps_from_onto_to(a in vec3(5.0), b in vec3(5.0)) {
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let q = Quat::shortest_arc(a, b);
            prop_assert!(close_v(q.rotate(a / a.norm()), b / b.norm(), 1e-9));
            // minimal angle: rotation angle equals the angle between the vectors
            let between = (a.normalize().dot(&b.normalize())).clamp(-1.0, 1.0).acos();
            prop_assert!((q.angle() - between).abs() < 1e-7);
        }
    }
}
