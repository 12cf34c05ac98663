//! Quaternion and rotation algebra: points of `S^3`, `S^2`, `SO(3)`, `SO(4)`,
//! the double cover `S^3 -> SO(3)`, complex power maps, sphere sampling,
//! global tangent frames, and stereographic projection.
//!
//! Conventions fixed here and used everywhere else:
//! - `R^3` is identified with the pure-imaginary quaternions via
//!   `(i, j, k) <-> (e1, e2, e3)`.
//! - `S^3` is identified with the unit sphere of `C^2` via
//!   `q = w + xi + yj + zk = (w + xi) + (y + zi) j`, i.e. `z1 = w + xi`,
//!   `z2 = y + zi`.
//! - The oriented tangent frame of `S^3` at `q` is `(iq, jq, kq)`.
//! - The base point of `S^2` is `N = (1, 0, 0)`, so that evaluating the
//!   double cover at `N` is the classical Hopf fibration.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the unit-norm invariants of `S^3` and `S^2` points.
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance accepted on construction before renormalizing.
pub const UNIT_CONSTRUCT_TOL: f64 = 1e-9;
/// Tolerance on orthogonality and determinant of rotation matrices.
pub const ROT_TOL: f64 = 1e-10;

/// Default evaluation point of `S^2`; with this choice the evaluated double
/// cover is the classical Hopf fibration.
pub const BASE_POINT: [f64; 3] = [1.0, 0.0, 0.0];

/// A unit quaternion, i.e. a point of `S^3`. Scalar-first storage.
///
/// `q` and `-q` are distinct values representing the same rotation under the
/// double cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitQuaternion {
    /// The identity quaternion `1`.
    pub const ONE: UnitQuaternion = UnitQuaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };
    pub const I: UnitQuaternion = UnitQuaternion {
        w: 0.0,
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const J: UnitQuaternion = UnitQuaternion {
        w: 0.0,
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const K: UnitQuaternion = UnitQuaternion {
        w: 0.0,
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Build from components, rejecting inputs farther than `1e-9` from the
    /// unit sphere and renormalizing the rest to machine precision.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = w * w + x * x + y * y + z * z;
        let deviation = (n2 - 1.0).abs();
        if !n2.is_finite() || deviation > UNIT_CONSTRUCT_TOL {
            return Err(Error::NotUnit { deviation });
        }
        let inv = 1.0 / n2.sqrt();
        Ok(UnitQuaternion {
            w: w * inv,
            x: x * inv,
            y: y * inv,
            z: z * inv,
        })
    }

    /// Normalize an arbitrary nonzero 4-vector onto `S^3`.
    pub fn from_unnormalized(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-9 {
            return Err(Error::NotUnit { deviation: 1.0 });
        }
        Ok(UnitQuaternion {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_vector(v: Vector4<f64>) -> Result<Self> {
        Self::from_unnormalized(v[0], v[1], v[2], v[3])
    }

    /// Components as an ambient vector `(w, x, y, z)`.
    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    /// The pair `(z1, z2) = (w + xi, y + zi)` identifying `S^3` with the
    /// unit sphere of `C^2`.
    pub fn to_complex_pair(self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.w, self.x),
            Complex64::new(self.y, self.z),
        )
    }

    pub fn from_complex_pair(z1: Complex64, z2: Complex64) -> Result<Self> {
        Self::from_unnormalized(z1.re, z1.im, z2.re, z2.im)
    }

    pub fn conjugate(self) -> Self {
        UnitQuaternion {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn dot(self, rhs: Self) -> f64 {
        self.w * rhs.w + self.x * rhs.x + self.y * rhs.y + self.z * rhs.z
    }

    /// Chordal distance in the ambient `R^4`.
    pub fn distance(self, rhs: Self) -> f64 {
        (self.to_vector() - rhs.to_vector()).norm()
    }

    /// Quaternion product with an arbitrary 4-vector (not necessarily unit).
    pub fn mul_vector(self, v: Vector4<f64>) -> Vector4<f64> {
        quaternion_product(self.to_vector(), v)
    }

    /// Imaginary part as a vector of `R^3`.
    pub fn imaginary(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Oriented orthonormal tangent frame `(iq, jq, kq)` at `self`.
    pub fn tangent_frame(self) -> [Vector4<f64>; 3] {
        let q = self.to_vector();
        [
            quaternion_product(UnitQuaternion::I.to_vector(), q),
            quaternion_product(UnitQuaternion::J.to_vector(), q),
            quaternion_product(UnitQuaternion::K.to_vector(), q),
        ]
    }
}

impl std::ops::Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, rhs: Self) -> Self {
        let p = quaternion_product(self.to_vector(), rhs.to_vector());
        // product of unit quaternions is unit up to rounding
        UnitQuaternion {
            w: p[0],
            x: p[1],
            y: p[2],
            z: p[3],
        }
    }
}

impl std::ops::Neg for UnitQuaternion {
    type Output = UnitQuaternion;
    fn neg(self) -> Self {
        UnitQuaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Hamilton product on raw 4-vectors in `(w, x, y, z)` order.
pub fn quaternion_product(a: Vector4<f64>, b: Vector4<f64>) -> Vector4<f64> {
    Vector4::new(
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    )
}

/// Conjugate of a raw quaternion 4-vector.
pub fn quaternion_conj(a: Vector4<f64>) -> Vector4<f64> {
    Vector4::new(a[0], -a[1], -a[2], -a[3])
}

/// A point of `S^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointS2 {
    n1: f64,
    n2: f64,
    n3: f64,
}

impl PointS2 {
    pub fn new(n1: f64, n2: f64, n3: f64) -> Result<Self> {
        let n2sum = n1 * n1 + n2 * n2 + n3 * n3;
        let deviation = (n2sum - 1.0).abs();
        if !n2sum.is_finite() || deviation > UNIT_CONSTRUCT_TOL {
            return Err(Error::NotUnit { deviation });
        }
        let inv = 1.0 / n2sum.sqrt();
        Ok(PointS2 {
            n1: n1 * inv,
            n2: n2 * inv,
            n3: n3 * inv,
        })
    }

    pub fn from_unnormalized(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-9 {
            return Err(Error::NotUnit { deviation: 1.0 });
        }
        Ok(PointS2 {
            n1: v[0] / n,
            n2: v[1] / n,
            n3: v[2] / n,
        })
    }

    /// The fixed base point `N = (1, 0, 0)`.
    pub fn base_point() -> Self {
        PointS2 {
            n1: BASE_POINT[0],
            n2: BASE_POINT[1],
            n3: BASE_POINT[2],
        }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.n1, self.n2, self.n3)
    }

    pub fn antipode(self) -> Self {
        PointS2 {
            n1: -self.n1,
            n2: -self.n2,
            n3: -self.n3,
        }
    }

    pub fn distance(self, rhs: Self) -> f64 {
        (self.to_vector() - rhs.to_vector()).norm()
    }

    /// The pure-imaginary quaternion with imaginary part `self`.
    pub fn to_pure_quaternion(self) -> Vector4<f64> {
        Vector4::new(0.0, self.n1, self.n2, self.n3)
    }

    /// Oriented orthonormal basis `(b1, b2)` of the tangent plane, built by
    /// Gram-Schmidt from the two coordinate axes least aligned with `self`
    /// and completed so that `det[b1, b2, n] = +1`.
    pub fn tangent_basis(self) -> [Vector3<f64>; 2] {
        let n = self.to_vector();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap());
        let mut b1 = Vector3::zeros();
        b1[idx[0]] = 1.0;
        b1 -= n * n[idx[0]];
        b1 /= b1.norm();
        let b2 = n.cross(&b1);
        [b1, b2]
    }
}

/// An element of `SO(3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Matrix3<f64>);

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Matrix3::identity())
    }

    /// Validate orthogonality and `det = +1` to `1e-10`.
    pub fn try_new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho > ROT_TOL * 10.0 {
            return Err(Error::NotRotation {
                reason: format!("|R^T R - I| = {ortho:.3e}"),
            });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROT_TOL * 10.0 {
            return Err(Error::NotRotation {
                reason: format!("det = {det:.12}"),
            });
        }
        Ok(Rot3(m))
    }

    /// The double cover `S^3 -> SO(3)`: the rotation `v -> Im(q v q~)` in the
    /// fixed identification of `R^3` with the pure imaginary quaternions.
    pub fn from_quaternion(q: UnitQuaternion) -> Self {
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Rot3(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Evaluate the rotation at a point of `S^2`.
    pub fn act(&self, n: PointS2) -> PointS2 {
        let v = self.0 * n.to_vector();
        PointS2 {
            n1: v[0],
            n2: v[1],
            n3: v[2],
        }
    }

    pub fn compose(&self, rhs: &Rot3) -> Rot3 {
        Rot3(self.0 * rhs.0)
    }

    pub fn frobenius_distance(&self, rhs: &Rot3) -> f64 {
        (self.0 - rhs.0).norm()
    }
}

/// An element of `SO(4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot4(Matrix4<f64>);

impl Rot4 {
    pub fn identity() -> Self {
        Rot4(Matrix4::identity())
    }

    pub fn try_new(m: Matrix4<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix4::identity()).norm();
        if ortho > ROT_TOL * 10.0 {
            return Err(Error::NotRotation {
                reason: format!("|A^T A - I| = {ortho:.3e}"),
            });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROT_TOL * 10.0 {
            return Err(Error::NotRotation {
                reason: format!("det = {det:.12}"),
            });
        }
        Ok(Rot4(m))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Embed a rotation of the imaginary 3-space as the element of `SO(4)`
    /// fixing the real axis.
    pub fn from_rot3(r: &Rot3) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(r.matrix());
        Rot4(m)
    }

    pub fn apply(&self, v: Vector4<f64>) -> Vector4<f64> {
        self.0 * v
    }

    /// Evaluate at the real axis: the first column, as a point of `S^3`.
    pub fn act_on_one(&self) -> UnitQuaternion {
        let c = self.0.column(0);
        UnitQuaternion {
            w: c[0],
            x: c[1],
            y: c[2],
            z: c[3],
        }
    }

    pub fn compose(&self, rhs: &Rot4) -> Rot4 {
        Rot4(self.0 * rhs.0)
    }
}

/// The normalized complex power map `(z1, z2) -> (z1^m, z2) / |.|`, smooth on
/// all of `S^3` and of mapping degree `m`.
pub fn complex_power(q: UnitQuaternion, m: u32) -> Result<UnitQuaternion> {
    if m == 0 {
        return Err(Error::UnsupportedExponent(0));
    }
    let (z1, z2) = q.to_complex_pair();
    UnitQuaternion::from_complex_pair(z1.powu(m), z2)
}

/// Conformal stereographic projection of `S^3 \ {pole}` onto the hyperplane
/// orthogonal to the pole, expressed in an oriented orthonormal basis of that
/// hyperplane (`det[pole, b1, b2, b3] = +1`). The antipode of the pole maps
/// to the origin.
#[derive(Debug, Clone, Copy)]
pub struct Stereographic {
    pole: Vector4<f64>,
    basis: [Vector4<f64>; 3],
}

impl Stereographic {
    pub fn new(pole: UnitQuaternion) -> Self {
        let n = pole.to_vector();
        // drop the axis most aligned with the pole, Gram-Schmidt the rest
        let mut drop = 0;
        for a in 1..4 {
            if n[a].abs() > n[drop].abs() {
                drop = a;
            }
        }
        let mut basis = [Vector4::zeros(); 3];
        let mut count = 0;
        for a in 0..4 {
            if a == drop {
                continue;
            }
            let mut b = Vector4::zeros();
            b[a] = 1.0;
            b -= n * n.dot(&b);
            for prev in basis.iter().take(count) {
                b -= prev * prev.dot(&b);
            }
            basis[count] = b / b.norm();
            count += 1;
        }
        let det = Matrix4::from_columns(&[n, basis[0], basis[1], basis[2]]).determinant();
        if det < 0.0 {
            basis[2] = -basis[2];
        }
        Stereographic { pole: n, basis }
    }

    pub fn pole(&self) -> UnitQuaternion {
        UnitQuaternion {
            w: self.pole[0],
            x: self.pole[1],
            y: self.pole[2],
            z: self.pole[3],
        }
    }

    /// Project a point; fails within `1e-9` of the pole.
    pub fn project(&self, p: UnitQuaternion) -> Result<Vector3<f64>> {
        let v = p.to_vector();
        let c = v.dot(&self.pole);
        let denom = 1.0 - c;
        let distance = (v - self.pole).norm();
        if distance < 1e-9 {
            return Err(Error::PoleTooClose { distance });
        }
        let residual = (v - self.pole * c) / denom;
        Ok(Vector3::new(
            residual.dot(&self.basis[0]),
            residual.dot(&self.basis[1]),
            residual.dot(&self.basis[2]),
        ))
    }

    /// Inverse projection back onto `S^3`.
    pub fn unproject(&self, y: Vector3<f64>) -> UnitQuaternion {
        let amb = self.basis[0] * y[0] + self.basis[1] * y[1] + self.basis[2] * y[2];
        let r2 = y.norm_squared();
        let v = (self.pole * (r2 - 1.0) + amb * 2.0) / (r2 + 1.0);
        UnitQuaternion {
            w: v[0],
            x: v[1],
            y: v[2],
            z: v[3],
        }
    }
}

/// Uniform point of `S^3` by normalizing four Gaussian components.
pub fn sample_s3<R: Rng>(rng: &mut R) -> UnitQuaternion {
    loop {
        let w: f64 = rng.sample(StandardNormal);
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        if let Ok(q) = UnitQuaternion::from_unnormalized(w, x, y, z) {
            return q;
        }
    }
}

/// Uniform point of `S^2` by normalizing three Gaussian components.
pub fn sample_s2<R: Rng>(rng: &mut R) -> PointS2 {
    loop {
        let v = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Ok(p) = PointS2::from_unnormalized(v) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rotate_by_conjugation(q: UnitQuaternion, v: Vector3<f64>) -> Vector3<f64> {
        // independent oracle: literal quaternion conjugation arithmetic
        let pure = Vector4::new(0.0, v[0], v[1], v[2]);
        let out = quaternion_product(
            quaternion_product(q.to_vector(), pure),
            quaternion_conj(q.to_vector()),
        );
        Vector3::new(out[1], out[2], out[3])
    }

    #[test]
    fn double_cover_identity() {
        let r = Rot3::from_quaternion(UnitQuaternion::ONE);
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn double_cover_equals_conjugation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q = sample_s3(&mut rng);
            let r = Rot3::from_quaternion(q);
            for axis in 0..3 {
                let mut v = Vector3::zeros();
                v[axis] = 1.0;
                let expect = rotate_by_conjugation(q, v);
                let got = r.matrix() * v;
                assert!((expect - got).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn double_cover_sends_negation_to_same_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let q = sample_s3(&mut rng);
            let a = Rot3::from_quaternion(q);
            let b = Rot3::from_quaternion(-q);
            assert!(a.frobenius_distance(&b) < 1e-14);
        }
    }

    #[test]
    fn double_cover_doubles_the_angle_about_first_axis() {
        // q = cos(pi/4) + i sin(pi/4) rotates by pi/2 about e1: (0,1,0) -> (0,0,1)
        let t = std::f64::consts::FRAC_PI_4;
        let q = UnitQuaternion::new(t.cos(), t.sin(), 0.0, 0.0).unwrap();
        let r = Rot3::from_quaternion(q);
        let image = r.act(PointS2::new(0.0, 1.0, 0.0).unwrap());
        assert!(image.distance(PointS2::new(0.0, 0.0, 1.0).unwrap()) < 1e-12);
        let oracle = rotate_by_conjugation(q, Vector3::new(0.0, 1.0, 0.0));
        assert!((oracle - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn double_cover_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let a = sample_s3(&mut rng);
            let b = sample_s3(&mut rng);
            let lhs = Rot3::from_quaternion(a * b);
            let rhs = Rot3::from_quaternion(a).compose(&Rot3::from_quaternion(b));
            assert!(lhs.frobenius_distance(&rhs) < 1e-9);
        }
    }

    #[test]
    fn double_cover_lands_in_so3() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let q = sample_s3(&mut rng);
            let r = Rot3::from_quaternion(q);
            assert!(Rot3::try_new(*r.matrix()).is_ok());
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn power_map_fixes_unit_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let q = sample_s3(&mut rng);
            let p = complex_power(q, 1).unwrap();
            assert!(q.distance(p) < 1e-14);
        }
    }

    #[test]
    fn power_map_fixes_z1_zero_locus() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = UnitQuaternion::new(0.0, 0.0, phi.cos(), phi.sin()).unwrap();
            for m in 2..5 {
                let p = complex_power(q, m).unwrap();
                assert!(q.distance(p) < 1e-14);
            }
        }
    }

    #[test]
    fn power_map_multiplies_circle_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let theta: f64 = rng.gen_range(-3.0..3.0);
            let q = UnitQuaternion::new(theta.cos(), theta.sin(), 0.0, 0.0).unwrap();
            for m in 1..5u32 {
                let p = complex_power(q, m).unwrap();
                let angle = f64::atan2(p.x, p.w);
                let expect = m as f64 * theta;
                let delta = (angle - expect).rem_euclid(std::f64::consts::TAU);
                let delta = delta.min(std::f64::consts::TAU - delta);
                assert!(delta < 1e-12, "m = {m}, delta = {delta:.3e}");
            }
        }
    }

    #[test]
    fn power_map_rejects_zero_exponent() {
        assert!(matches!(
            complex_power(UnitQuaternion::ONE, 0),
            Err(Error::UnsupportedExponent(0))
        ));
    }

    #[test]
    fn tangent_frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let q = sample_s3(&mut rng);
            let frame = q.tangent_frame();
            let base = q.to_vector();
            for a in 0..3 {
                assert!(frame[a].dot(&base).abs() < 1e-12);
                for b in 0..3 {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((frame[a].dot(&frame[b]) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn s2_basis_is_oriented() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let n = sample_s2(&mut rng);
            let [b1, b2] = n.tangent_basis();
            assert!(b1.dot(&b2).abs() < 1e-12);
            assert!((b1.norm() - 1.0).abs() < 1e-12);
            assert!((b2.norm() - 1.0).abs() < 1e-12);
            let det = Matrix3::from_columns(&[b1, b2, n.to_vector()]).determinant();
            assert!((det - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stereographic_sends_antipode_to_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let pole = sample_s3(&mut rng);
            let proj = Stereographic::new(pole);
            let image = proj.project(-pole).unwrap();
            assert!(image.norm() < 1e-12);
        }
    }

    #[test]
    fn stereographic_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pole = sample_s3(&mut rng);
        let proj = Stereographic::new(pole);
        for _ in 0..100 {
            let p = sample_s3(&mut rng);
            if p.distance(pole) < 1e-3 {
                continue;
            }
            let back = proj.unproject(proj.project(p).unwrap());
            assert!(p.distance(back) < 1e-12);
        }
    }

    #[test]
    fn stereographic_rejects_the_pole() {
        let pole = UnitQuaternion::ONE;
        let proj = Stereographic::new(pole);
        assert!(matches!(
            proj.project(pole),
            Err(Error::PoleTooClose { .. })
        ));
    }

    #[test]
    fn construction_rejects_far_from_unit() {
        assert!(UnitQuaternion::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(PointS2::new(0.5, 0.0, 0.0).is_err());
    }
}
