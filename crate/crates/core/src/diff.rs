//! Numerical differentials of map handles in orthonormal frames, Jacobian
//! coefficient matrices, and regular-value testing.
//!
//! The differential of `f: S^3 -> T` at `p` is stored as the
//! `3 x k` matrix `J[a][j] = <df(e_a), t_j>` where `(e_a)` is the frame
//! `(ip, jp, kp)` of the domain and `(t_j)` the orthonormal frame of the
//! target at `f(p)`. Composition then corresponds to the matrix product
//! `J_f J_g`, and for self-maps of `S^3` the determinant of `J` is the
//! Jacobian determinant entering the degree integral.

use nalgebra::{DMatrix, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::{Ambient, ManifoldPoint, MapHandle};
use crate::quat::{sample_s3, PointS2, UnitQuaternion};

/// Default finite-difference step for unit-scale geometry.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Admissible finite-difference steps.
pub const STEP_RANGE: (f64, f64) = (1e-7, 1e-3);
/// Disagreement between the `h` and `h/2` stencils beyond this raises the
/// precision warning.
pub const RICHARDSON_WARN: f64 = 1e-4;
/// Smallest singular value above which a located preimage counts as regular.
pub const REGULAR_MARGIN: f64 = 1e-4;

/// The differential of a map handle at a base point, in orthonormal frames.
#[derive(Debug, Clone)]
pub struct JacobianSample {
    pub base: UnitQuaternion,
    /// Rows indexed by the domain frame `(ip, jp, kp)`, columns by the
    /// target frame.
    pub coeffs: DMatrix<f64>,
    pub sigma_min: f64,
    /// Set when the `h` and `h/2` stencils disagreed by more than
    /// [`RICHARDSON_WARN`]; the returned matrix is then still the
    /// extrapolated one.
    pub precision_warning: bool,
}

fn check_step(h: f64) -> Result<()> {
    if !(STEP_RANGE.0..=STEP_RANGE.1).contains(&h) {
        return Err(Error::StepOutOfRange(h));
    }
    Ok(())
}

fn step_on_sphere(p: &UnitQuaternion, u: Vector4<f64>, h: f64) -> UnitQuaternion {
    let v = p.to_vector() + u * h;
    UnitQuaternion::from_vector(v).expect("retraction of a near-unit vector")
}

fn central_difference<T: ManifoldPoint>(
    f: &MapHandle<T>,
    p: &UnitQuaternion,
    u: Vector4<f64>,
    h: f64,
) -> Result<T::Ambient> {
    let plus = f.eval(&step_on_sphere(p, u, h)).embed();
    let minus = f.eval(&step_on_sphere(p, u, -h)).embed();
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFiniteEvaluation {
            w: p.w,
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }
    Ok(plus.sub(minus).scale(0.5 / h))
}

fn coefficients_of<T: ManifoldPoint>(
    derivs: &[T::Ambient],
    target_frame: &[T::Ambient],
) -> DMatrix<f64> {
    let k = target_frame.len();
    let mut m = DMatrix::zeros(3, k);
    for (a, d) in derivs.iter().enumerate() {
        for (j, t) in target_frame.iter().enumerate() {
            m[(a, j)] = d.dot(*t);
        }
    }
    m
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Finite-difference differential, ignoring any analytic rule. Uses the `h`
/// and `h/2` central stencils and returns the Richardson-extrapolated
/// matrix, flagging a precision warning when the two stencils disagree.
pub fn differential_fd<T: ManifoldPoint>(
    f: &MapHandle<T>,
    p: &UnitQuaternion,
    h: f64,
) -> Result<JacobianSample> {
    check_step(h)?;
    let frame = p.tangent_frame();
    let value = f.eval(p);
    let target_frame = value.tangent_frame_ambient();

    let mut coarse = Vec::with_capacity(3);
    let mut fine = Vec::with_capacity(3);
    for u in frame {
        coarse.push(central_difference(f, p, u, h)?);
        fine.push(central_difference(f, p, u, h / 2.0)?);
    }
    let coarse_m = coefficients_of::<T>(&coarse, &target_frame);
    let fine_m = coefficients_of::<T>(&fine, &target_frame);
    let disagreement = (&fine_m - &coarse_m).abs().max();
    // Richardson: (4 D_{h/2} - D_h) / 3 cancels the O(h^2) term
    let extrapolated = (fine_m * 4.0 - coarse_m) / 3.0;
    let sigma_min = smallest_singular_value(&extrapolated);
    Ok(JacobianSample {
        base: *p,
        coeffs: extrapolated,
        sigma_min,
        precision_warning: disagreement > RICHARDSON_WARN,
    })
}

/// Differential of `f` at `p` in orthonormal frames. Uses the analytic rule
/// when the handle carries one and central finite differences otherwise.
pub fn differential<T: ManifoldPoint>(
    f: &MapHandle<T>,
    p: &UnitQuaternion,
    h: f64,
) -> Result<JacobianSample> {
    if !f.has_analytic_diff() {
        return differential_fd(f, p, h);
    }
    check_step(h)?;
    let frame = p.tangent_frame();
    let value = f.eval(p);
    let target_frame = value.tangent_frame_ambient();
    let derivs: Vec<T::Ambient> = frame
        .iter()
        .map(|&u| f.diff_at(p, u).expect("analytic differential"))
        .collect();
    if derivs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFiniteEvaluation {
            w: p.w,
            x: p.x,
            y: p.y,
            z: p.z,
        });
    }
    let coeffs = coefficients_of::<T>(&derivs, &target_frame);
    let sigma_min = smallest_singular_value(&coeffs);
    Ok(JacobianSample {
        base: *p,
        coeffs,
        sigma_min,
        precision_warning: false,
    })
}

/// Differential with the default step.
pub fn differential_default<T: ManifoldPoint>(
    f: &MapHandle<T>,
    p: &UnitQuaternion,
) -> Result<JacobianSample> {
    differential(f, p, DEFAULT_STEP)
}

/// Gauss-Newton correction of `p0` onto the fiber `f^{-1}(v)`, moving by
/// least-norm steps. Fails if the residual does not reach `tol`.
pub fn correct_to_fiber(
    f: &MapHandle<PointS2>,
    v: PointS2,
    p0: UnitQuaternion,
    tol: f64,
    max_iter: usize,
) -> Result<UnitQuaternion> {
    let target_frame = v.tangent_basis();
    let vv = v.to_vector();
    let mut p = p0;
    for it in 0..max_iter {
        let fp = f.eval(&p).to_vector();
        let r = [
            (fp - vv).dot(target_frame[0]),
            (fp - vv).dot(target_frame[1]),
        ];
        let residual = (fp - vv).norm();
        if residual < tol {
            return Ok(p);
        }
        // directional derivatives projected against the frame at v, so the
        // linearization matches the residual coordinates
        let frame = p.tangent_frame();
        let mut d = [[0.0f64; 2]; 3];
        for (a, &u) in frame.iter().enumerate() {
            let deriv = match f.diff_at(&p, u) {
                Some(x) => x,
                None => central_difference(f, &p, u, DEFAULT_STEP)?,
            };
            d[a] = [deriv.dot(target_frame[0]), deriv.dot(target_frame[1])];
        }
        // least-norm step c = -D (D^T D)^{-1} r
        let g00: f64 = (0..3).map(|a| d[a][0] * d[a][0]).sum();
        let g01: f64 = (0..3).map(|a| d[a][0] * d[a][1]).sum();
        let g11: f64 = (0..3).map(|a| d[a][1] * d[a][1]).sum();
        let det = g00 * g11 - g01 * g01;
        if det.abs() < 1e-18 {
            return Err(Error::CorrectorDiverged {
                iterations: it,
                residual,
            });
        }
        let y0 = (g11 * r[0] - g01 * r[1]) / det;
        let y1 = (-g01 * r[0] + g00 * r[1]) / det;
        let mut stepv = Vector4::zeros();
        for (a, &u) in frame.iter().enumerate() {
            stepv += u * (-(d[a][0] * y0 + d[a][1] * y1));
        }
        let next = UnitQuaternion::from_vector(p.to_vector() + stepv);
        match next {
            Ok(n) => p = n,
            Err(_) => {
                return Err(Error::CorrectorDiverged {
                    iterations: it,
                    residual,
                })
            }
        }
    }
    let residual = (f.eval(&p).to_vector() - vv).norm();
    if residual < tol {
        Ok(p)
    } else {
        Err(Error::CorrectorDiverged {
            iterations: max_iter,
            residual,
        })
    }
}

/// Outcome of a regular-value test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    /// Every located preimage had `sigma_min` above the margin; carries the
    /// worst margin seen.
    Regular { margin: f64 },
    /// Some located preimage dropped below the margin.
    Critical { margin: f64 },
    /// No preimage was found within the seed budget; distinct from a
    /// critical value.
    Indeterminate,
}

impl Regularity {
    pub fn is_regular(&self) -> bool {
        matches!(self, Regularity::Regular { .. })
    }
}

/// Test whether `v` is a regular value of `f` by locating preimages from
/// `samples` random seeds and checking the smallest singular value of the
/// differential at each.
pub fn is_regular_value(
    f: &MapHandle<PointS2>,
    v: PointS2,
    samples: u32,
    seed: u64,
) -> Result<Regularity> {
    if samples < 10 {
        return Err(Error::TooFewSamples {
            got: samples as u64,
            minimum: 10,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(f64, UnitQuaternion)> = (0..samples)
        .map(|_| {
            let q = sample_s3(&mut rng);
            ((f.eval(&q).to_vector() - v.to_vector()).norm(), q)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let budget = (samples as usize).min(24);
    let mut margin = f64::INFINITY;
    let mut located = 0usize;
    for (_, q) in candidates.into_iter().take(budget) {
        let Ok(p) = correct_to_fiber(f, v, q, 1e-10, 60) else {
            continue;
        };
        located += 1;
        let jac = differential(f, &p, DEFAULT_STEP)?;
        margin = margin.min(jac.sigma_min);
        if jac.sigma_min <= REGULAR_MARGIN {
            return Ok(Regularity::Critical { margin });
        }
    }
    if located == 0 {
        return Ok(Regularity::Indeterminate);
    }
    Ok(Regularity::Regular { margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{constant_s2, evaluated_family, hopf_fibration, identity_map, power_map};
    use crate::quat::PointS2;
    use nalgebra::DMatrix;

    #[test]
    fn differential_of_identity_is_identity_matrix() {
        let id = identity_map();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let p = sample_s3(&mut rng);
            let jac = differential_fd(&id, &p, DEFAULT_STEP).unwrap();
            let expect = DMatrix::identity(3, 3);
            assert!((jac.coeffs - expect).abs().max() < 1e-6);
        }
    }

    #[test]
    fn differential_of_power_two_on_the_circle_has_coefficient_two() {
        // on (cos t, sin t, 0, 0) the map restricts to t -> 2t
        let pow2 = power_map(2).unwrap();
        for k in 0..16 {
            let t = k as f64 * std::f64::consts::TAU / 16.0 + 0.05;
            let p = UnitQuaternion::new(t.cos(), t.sin(), 0.0, 0.0).unwrap();
            let jac = differential_fd(&pow2, &p, DEFAULT_STEP).unwrap();
            assert!((jac.coeffs[(0, 0)] - 2.0).abs() < 1e-5);
        }
    }

    #[test]
    fn differential_of_constant_map_is_zero() {
        let c = constant_s2(PointS2::base_point());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let p = sample_s3(&mut rng);
            let jac = differential_fd(&c, &p, DEFAULT_STEP).unwrap();
            assert!(jac.coeffs.abs().max() < 1e-8);
        }
    }

    #[test]
    fn finite_differences_agree_with_analytic_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let maps = vec![
            power_map(1).unwrap(),
            power_map(2).unwrap(),
            power_map(3).unwrap(),
        ];
        for f in &maps {
            for _ in 0..333 {
                let p = sample_s3(&mut rng);
                let fd = differential_fd(f, &p, DEFAULT_STEP).unwrap();
                let an = differential(f, &p, DEFAULT_STEP).unwrap();
                assert!((fd.coeffs - an.coeffs).abs().max() < 1e-5);
            }
        }
        let hopf = hopf_fibration();
        for _ in 0..333 {
            let p = sample_s3(&mut rng);
            let fd = differential_fd(&hopf, &p, DEFAULT_STEP).unwrap();
            let an = differential(&hopf, &p, DEFAULT_STEP).unwrap();
            assert!((fd.coeffs - an.coeffs).abs().max() < 1e-5);
        }
    }

    #[test]
    fn differential_respects_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let inner = power_map(2).unwrap();
        let outer = hopf_fibration();
        let composed = outer.compose_inner(&inner);
        for _ in 0..100 {
            let p = sample_s3(&mut rng);
            let ji = differential(&inner, &p, DEFAULT_STEP).unwrap();
            let mid = inner.eval(&p);
            let jo = differential(&outer, &mid, DEFAULT_STEP).unwrap();
            let jc = differential(&composed, &p, DEFAULT_STEP).unwrap();
            let product = ji.coeffs * jo.coeffs;
            assert!((product - jc.coeffs).abs().max() < 1e-4);
        }
    }

    #[test]
    fn hopf_fibration_is_regular_with_uniform_margin() {
        let hopf = hopf_fibration();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut margins = Vec::new();
        for _ in 0..5 {
            let v = crate::quat::sample_s2(&mut rng);
            match is_regular_value(&hopf, v, 64, 7).unwrap() {
                Regularity::Regular { margin } => margins.push(margin),
                other => panic!("expected regular, got {other:?}"),
            }
        }
        // the fibration is a Riemannian submersion up to the factor 2
        for m in &margins {
            assert!((m - 2.0).abs() < 1e-5, "margin {m}");
        }
    }

    #[test]
    fn constant_map_value_is_critical() {
        let c = constant_s2(PointS2::base_point());
        let reg = is_regular_value(&c, PointS2::base_point(), 32, 3).unwrap();
        assert!(matches!(reg, Regularity::Critical { .. }));
    }

    #[test]
    fn constant_map_off_value_is_indeterminate() {
        let c = constant_s2(PointS2::base_point());
        let off = PointS2::new(0.0, 1.0, 0.0).unwrap();
        let reg = is_regular_value(&c, off, 32, 3).unwrap();
        assert_eq!(reg, Regularity::Indeterminate);
    }

    #[test]
    fn evaluated_family_two_generic_value_is_regular() {
        let f2 = evaluated_family(2).unwrap();
        let v = PointS2::new(0.2, 0.5, (1.0f64 - 0.04 - 0.25).sqrt()).unwrap();
        let reg = is_regular_value(&f2, v, 64, 9).unwrap();
        assert!(reg.is_regular(), "{reg:?}");
    }

    #[test]
    fn rejects_tiny_sample_budget() {
        let hopf = hopf_fibration();
        assert!(matches!(
            is_regular_value(&hopf, PointS2::base_point(), 5, 1),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn rejects_step_outside_range() {
        let id = identity_map();
        assert!(matches!(
            differential_fd(&id, &UnitQuaternion::ONE, 1e-2),
            Err(Error::StepOutOfRange(_))
        ));
    }

    #[test]
    fn precision_warning_flags_oscillatory_maps() {
        // wavelength far below the stencil makes the h and h/2 stencils
        // disagree, which must raise the warning flag
        let wiggle = crate::maps::MapHandle::new("wiggle", |q: &UnitQuaternion| {
            let t = 4.0e4 * q.w;
            PointS2::from_unnormalized(nalgebra::Vector3::new(t.sin(), t.cos(), 1.0)).unwrap()
        });
        let p = sample_s3(&mut ChaCha8Rng::seed_from_u64(46));
        let jac = differential_fd(&wiggle, &p, DEFAULT_STEP).unwrap();
        assert!(jac.precision_warning);

        let hopf = hopf_fibration();
        let jac = differential_fd(&hopf, &p, DEFAULT_STEP).unwrap();
        assert!(!jac.precision_warning);
    }
}
