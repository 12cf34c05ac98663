//! Smooth maps out of `S^3` as first-class values: an evaluation rule, an
//! optional analytic differential, and a name for reports. Targets are the
//! manifolds the invariant engines consume (`S^3`, `S^2`, `SO(3)`, `SO(4)`),
//! abstracted by [`ManifoldPoint`].

use std::sync::Arc;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quat::{quaternion_conj, quaternion_product, PointS2, Rot3, Rot4, UnitQuaternion};

/// Ambient-vector operations needed by the finite-difference machinery.
pub trait Ambient: Copy + Send + Sync + 'static {
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn dot(self, rhs: Self) -> f64;
    fn is_finite(self) -> bool;

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl<const N: usize> Ambient for SVector<f64, N> {
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn dot(self, rhs: Self) -> f64 {
        nalgebra::SVector::dot(&self, &rhs)
    }
    fn is_finite(self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// A point of one of the target manifolds, together with its embedding and
/// an orthonormal tangent frame at itself.
pub trait ManifoldPoint: Clone + Send + Sync + 'static {
    type Ambient: Ambient;

    fn tangent_dim() -> usize;
    fn embed(&self) -> Self::Ambient;
    /// Orthonormal tangent frame at `self`, expressed in ambient coordinates.
    fn tangent_frame_ambient(&self) -> Vec<Self::Ambient>;
}

impl ManifoldPoint for UnitQuaternion {
    type Ambient = Vector4<f64>;

    fn tangent_dim() -> usize {
        3
    }
    fn embed(&self) -> Vector4<f64> {
        self.to_vector()
    }
    fn tangent_frame_ambient(&self) -> Vec<Vector4<f64>> {
        self.tangent_frame().to_vec()
    }
}

impl ManifoldPoint for PointS2 {
    type Ambient = Vector3<f64>;

    fn tangent_dim() -> usize {
        2
    }
    fn embed(&self) -> Vector3<f64> {
        self.to_vector()
    }
    fn tangent_frame_ambient(&self) -> Vec<Vector3<f64>> {
        self.tangent_basis().to_vec()
    }
}

fn skew3_basis() -> [Matrix3<f64>; 3] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -s, 0.0, s, 0.0),
        Matrix3::new(0.0, 0.0, s, 0.0, 0.0, 0.0, -s, 0.0, 0.0),
        Matrix3::new(0.0, -s, 0.0, s, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

impl ManifoldPoint for Rot3 {
    type Ambient = SVector<f64, 9>;

    fn tangent_dim() -> usize {
        3
    }
    fn embed(&self) -> SVector<f64, 9> {
        SVector::from_column_slice(self.matrix().as_slice())
    }
    fn tangent_frame_ambient(&self) -> Vec<SVector<f64, 9>> {
        // left translates of the Frobenius-orthonormal skew basis
        skew3_basis()
            .iter()
            .map(|e| {
                let t = self.matrix() * e;
                SVector::from_column_slice(t.as_slice())
            })
            .collect()
    }
}

impl ManifoldPoint for Rot4 {
    type Ambient = SVector<f64, 16>;

    fn tangent_dim() -> usize {
        6
    }
    fn embed(&self) -> SVector<f64, 16> {
        SVector::from_column_slice(self.matrix().as_slice())
    }
    fn tangent_frame_ambient(&self) -> Vec<SVector<f64, 16>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut frame = Vec::with_capacity(6);
        for a in 0..4 {
            for b in (a + 1)..4 {
                let mut e = SMatrix::<f64, 4, 4>::zeros();
                e[(a, b)] = -s;
                e[(b, a)] = s;
                let t = self.matrix() * e;
                frame.push(SVector::from_column_slice(t.as_slice()));
            }
        }
        frame
    }
}

type EvalRule<T> = Arc<dyn Fn(&UnitQuaternion) -> T + Send + Sync>;
type DiffRule<T> =
    Arc<dyn Fn(&UnitQuaternion, Vector4<f64>) -> <T as ManifoldPoint>::Ambient + Send + Sync>;

/// A smooth map `S^3 -> T` given by an evaluation rule plus an optional
/// analytic differential. Evaluation rules carry no mutable state, so
/// handles are freely shareable across workers.
#[derive(Clone)]
pub struct MapHandle<T: ManifoldPoint> {
    name: String,
    eval: EvalRule<T>,
    diff: Option<DiffRule<T>>,
}

impl<T: ManifoldPoint> MapHandle<T> {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&UnitQuaternion) -> T + Send + Sync + 'static,
    ) -> Self {
        MapHandle {
            name: name.into(),
            eval: Arc::new(eval),
            diff: None,
        }
    }

    pub fn with_diff(
        mut self,
        diff: impl Fn(&UnitQuaternion, Vector4<f64>) -> T::Ambient + Send + Sync + 'static,
    ) -> Self {
        self.diff = Some(Arc::new(diff));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, q: &UnitQuaternion) -> T {
        (self.eval)(q)
    }

    pub fn has_analytic_diff(&self) -> bool {
        self.diff.is_some()
    }

    /// Analytic differential at `q` applied to the tangent vector `u`.
    pub fn diff_at(&self, q: &UnitQuaternion, u: Vector4<f64>) -> Option<T::Ambient> {
        self.diff.as_ref().map(|d| d(q, u))
    }

    /// Precompose with a rotation of the ambient `R^4` (an isometry of `S^3`).
    pub fn precompose_rotation(&self, a: Rot4) -> MapHandle<T> {
        let eval = self.eval.clone();
        let diff = self.diff.clone();
        MapHandle {
            name: format!("{} . rot4", self.name),
            eval: Arc::new(move |q| {
                let p = UnitQuaternion::from_vector(a.apply(q.to_vector()))
                    .expect("rotation of a unit vector");
                eval(&p)
            }),
            diff: diff.map(|d| {
                let rule: DiffRule<T> = Arc::new(move |q, u| {
                    let p = UnitQuaternion::from_vector(a.apply(q.to_vector()))
                        .expect("rotation of a unit vector");
                    d(&p, a.apply(u))
                });
                rule
            }),
        }
    }

    /// Compose with an inner self-map of `S^3`: `self . inner`.
    pub fn compose_inner(&self, inner: &MapHandle<UnitQuaternion>) -> MapHandle<T> {
        let outer_eval = self.eval.clone();
        let outer_diff = self.diff.clone();
        let inner_eval = inner.eval.clone();
        let inner_diff = inner.diff.clone();
        let name = format!("{} . {}", self.name, inner.name);
        let diff = match (outer_diff, inner_diff) {
            (Some(od), Some(id)) => {
                let ie = inner_eval.clone();
                let rule: DiffRule<T> = Arc::new(move |q, u| {
                    let mid = ie(q);
                    od(&mid, id(q, u))
                });
                Some(rule)
            }
            _ => None,
        };
        MapHandle {
            name,
            eval: Arc::new(move |q| outer_eval(&inner_eval(q))),
            diff,
        }
    }
}

/// The identity of `S^3`.
pub fn identity_map() -> MapHandle<UnitQuaternion> {
    MapHandle::new("identity", |q: &UnitQuaternion| *q).with_diff(|_, u| u)
}

/// The antipodal map of `S^3`.
pub fn antipodal_map() -> MapHandle<UnitQuaternion> {
    MapHandle::new("antipodal", |q: &UnitQuaternion| -*q).with_diff(|_, u| -u)
}

/// Left translation by a fixed unit quaternion.
pub fn left_translation(c: UnitQuaternion) -> MapHandle<UnitQuaternion> {
    MapHandle::new("left-mult", move |q: &UnitQuaternion| c * *q)
        .with_diff(move |_, u| quaternion_product(c.to_vector(), u))
}

/// The constant map at a fixed point of `S^3`.
pub fn constant_s3(p: UnitQuaternion) -> MapHandle<UnitQuaternion> {
    MapHandle::new("constant", move |_: &UnitQuaternion| p)
}

/// The constant map into `SO(3)`.
pub fn constant_so3(r: Rot3) -> MapHandle<Rot3> {
    MapHandle::new("constant-so3", move |_: &UnitQuaternion| r)
}

fn power_eval(q: &UnitQuaternion, m: u32) -> UnitQuaternion {
    crate::quat::complex_power(*q, m).expect("positive exponent")
}

/// The degree-`m` self-map `(z1, z2) -> (z1^m, z2)/|.|` as a handle,
/// with its analytic differential.
pub fn power_map(m: u32) -> Result<MapHandle<UnitQuaternion>> {
    if m == 0 {
        return Err(Error::UnsupportedExponent(0));
    }
    let handle = MapHandle::new(format!("pow_{m}"), move |q: &UnitQuaternion| {
        power_eval(q, m)
    })
    .with_diff(move |q, u| {
        let (z1, z2) = q.to_complex_pair();
        let u1 = Complex64::new(u[0], u[1]);
        let u2 = Complex64::new(u[2], u[3]);
        let p1 = z1.powu(m);
        let dp1 = Complex64::new(m as f64, 0.0) * z1.powu(m - 1) * u1;
        let p = Vector4::new(p1.re, p1.im, z2.re, z2.im);
        let dp = Vector4::new(dp1.re, dp1.im, u2.re, u2.im);
        let r2 = p.norm_squared();
        let r = r2.sqrt();
        // d(p/|p|) = dp/|p| - p <p, dp>/|p|^3
        dp / r - p * (p.dot(dp) / (r2 * r))
    });
    Ok(handle)
}

/// Pointwise quaternion product of two self-maps; its degree is the sum of
/// the factor degrees.
pub fn pointwise_product(
    f: &MapHandle<UnitQuaternion>,
    g: &MapHandle<UnitQuaternion>,
) -> MapHandle<UnitQuaternion> {
    let fe = f.eval.clone();
    let ge = g.eval.clone();
    let name = format!("({} * {})", f.name, g.name);
    let mut handle = MapHandle {
        name,
        eval: Arc::new(move |q: &UnitQuaternion| fe(q) * ge(q)),
        diff: None,
    };
    if let (Some(fd), Some(gd)) = (f.diff.clone(), g.diff.clone()) {
        let fe = f.eval.clone();
        let ge = g.eval.clone();
        handle.diff = Some(Arc::new(move |q, u| {
            let fv = fe(q).to_vector();
            let gv = ge(q).to_vector();
            let dfv = fd(q, u);
            let dgv = gd(q, u);
            quaternion_product(dfv, gv) + quaternion_product(fv, dgv)
        }));
    }
    handle
}

/// The family `q -> rho(pow_m(q))` of rotations, representing the class `m`
/// in `pi_3(SO(3))` under the conventions of this crate.
pub fn rotation_family(m: u32) -> Result<MapHandle<Rot3>> {
    if m == 0 {
        return Err(Error::UnsupportedExponent(0));
    }
    let pow = power_map(m)?;
    let pow_eval = pow.eval.clone();
    let pow_diff = pow.diff.clone().expect("power map carries a differential");
    let pe = pow_eval.clone();
    Ok(MapHandle {
        name: format!("rotation_family_{m}"),
        eval: Arc::new(move |q: &UnitQuaternion| Rot3::from_quaternion(pow_eval(q))),
        diff: Some(Arc::new(move |q, u| {
            // d(v -> p v p~) along dp: columns dp e_a p~ + p e_a dp~
            let p = pe(q).to_vector();
            let dp = pow_diff(q, u);
            let mut out = SVector::<f64, 9>::zeros();
            for a in 0..3 {
                let mut e = Vector4::zeros();
                e[a + 1] = 1.0;
                let col = quaternion_product(quaternion_product(dp, e), quaternion_conj(p))
                    + quaternion_product(quaternion_product(p, e), quaternion_conj(dp));
                for r in 0..3 {
                    out[a * 3 + r] = col[r + 1];
                }
            }
            out
        })),
    })
}

/// Evaluate a rotation family at a fixed point of `S^2`.
pub fn evaluated_at(family: &MapHandle<Rot3>, n: PointS2) -> MapHandle<PointS2> {
    let fe = family.eval.clone();
    let fd = family.diff.clone();
    let name = format!("eval_N({})", family.name);
    MapHandle {
        name,
        eval: Arc::new(move |q: &UnitQuaternion| fe(q).act(n)),
        diff: fd.map(|d| {
            let nv = n.to_vector();
            let rule: DiffRule<PointS2> = Arc::new(move |q, u| {
                let dr = d(q, u);
                let mut out = Vector3::zeros();
                for r in 0..3 {
                    out[r] = dr[r] * nv[0] + dr[3 + r] * nv[1] + dr[6 + r] * nv[2];
                }
                out
            });
            rule
        }),
    }
}

/// The classical Hopf fibration `q -> Im(q i q~)`, i.e. the rotation family
/// of class 1 evaluated at the base point.
pub fn hopf_fibration() -> MapHandle<PointS2> {
    let family = rotation_family(1).expect("m = 1");
    let mut handle = evaluated_at(&family, PointS2::base_point());
    handle.name = "hopf_fibration".into();
    handle
}

/// `eval_N . rotation_family(m)`: the maps whose Hopf invariant is `m`.
pub fn evaluated_family(m: u32) -> Result<MapHandle<PointS2>> {
    Ok(evaluated_at(&rotation_family(m)?, PointS2::base_point()))
}

/// The restriction of the twist diffeomorphism
/// `(x, y) -> (x, family_m(x) y)` of `S^3 x S^2` to `S^3 x {N}`:
/// the pair of component maps `x -> x` and `x -> family_m(x) N`.
pub struct TwistRestriction {
    pub base: MapHandle<UnitQuaternion>,
    pub fiber: MapHandle<PointS2>,
}

/// Component maps of the twist restriction for exponent `m`.
pub fn twist_restriction(m: u32) -> Result<TwistRestriction> {
    Ok(TwistRestriction {
        base: identity_map(),
        fiber: evaluated_family(m)?,
    })
}

/// The constant map into `S^2` obtained by freezing a value.
pub fn constant_s2(value: PointS2) -> MapHandle<PointS2> {
    MapHandle::new("constant-s2", move |_: &UnitQuaternion| value)
}
