//! Integer homotopy invariants: mapping degree by Monte-Carlo integration of
//! Jacobian determinants, Hopf invariant by preimage linking, and the
//! `pi_3(SO_3)` class through the evaluated rotation family.
//!
//! Degree estimation samples `S^3` uniformly in fixed-size batches, one
//! ChaCha stream per batch index, and merges batch sums in index order, so a
//! result is a pure function of `(seed, samples)` no matter how many worker
//! threads run the batches. The mean of the Jacobian determinant in the
//! global quaternionic frames equals the degree: the `1/(2 pi^2)` volume
//! normalization of `S^3` cancels against the uniform sampling measure.

use nalgebra::{Matrix3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::{linking_number, trace_preimage, TraceConfig};
use crate::diff::{is_regular_value, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::maps::{ManifoldPoint, MapHandle};
use crate::quat::{sample_s2, sample_s3, PointS2, Rot3, UnitQuaternion};

/// Samples per RNG stream; fixed so that results do not depend on the
/// worker count.
pub const BATCH_SIZE: u64 = 8192;
/// Minimum sample budget accepted by the degree estimator.
pub const MIN_DEGREE_SAMPLES: u64 = 10_000;
/// Residual gate for accepting an integer estimate.
pub const RESIDUAL_GATE: f64 = 0.1;
/// Standard-error gate for accepting an integer estimate.
pub const STDERR_GATE: f64 = 0.05;

/// Global sign of the Hopf invariant pipeline, calibrated once so that the
/// Hopf fibration has invariant +1 under the loop-orientation and
/// projection-orientation conventions of [`crate::curves`].
pub const HOPF_SIGN: f64 = -1.0;

/// A numerically estimated integer invariant.
#[derive(Debug, Clone, Serialize)]
pub struct IntegerEstimate {
    pub raw: f64,
    pub rounded: i64,
    pub residual: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub elapsed_ms: u64,
}

impl IntegerEstimate {
    /// Whether the estimate meets the residual and standard-error gates.
    pub fn accepted(&self) -> bool {
        self.residual < RESIDUAL_GATE && self.std_error < STDERR_GATE
    }

    fn from_raw(raw: f64, std_error: f64, samples: u64, seed: u64, elapsed_ms: u64) -> Self {
        let rounded = raw.round();
        IntegerEstimate {
            raw,
            rounded: rounded as i64,
            residual: (raw - rounded).abs(),
            std_error,
            samples,
            seed,
            elapsed_ms,
        }
    }
}

/// Jacobian determinant of a self-map of `S^3` at `q`, in the global
/// quaternionic frames at `q` and `f(q)`.
pub fn jacobian_det(f: &MapHandle<UnitQuaternion>, q: &UnitQuaternion, h: f64) -> f64 {
    let frame = q.tangent_frame();
    let value = f.eval(q);
    let target = value.tangent_frame_ambient();
    let mut m = Matrix3::zeros();
    for (a, &u) in frame.iter().enumerate() {
        let deriv: Vector4<f64> = match f.diff_at(q, u) {
            Some(d) => d,
            None => {
                let plus = f
                    .eval(&UnitQuaternion::from_vector(q.to_vector() + u * h).unwrap())
                    .to_vector();
                let minus = f
                    .eval(&UnitQuaternion::from_vector(q.to_vector() - u * h).unwrap())
                    .to_vector();
                (plus - minus) / (2.0 * h)
            }
        };
        for j in 0..3 {
            m[(a, j)] = deriv.dot(&target[j]);
        }
    }
    m.determinant()
}

struct BatchMoments {
    sum: f64,
    sum_sq: f64,
    count: u64,
}

fn batched_mean<F: Fn(&mut ChaCha8Rng) -> f64 + Sync>(samples: u64, seed: u64, f: F) -> (f64, f64) {
    let batches = samples.div_ceil(BATCH_SIZE);
    let moments: Vec<BatchMoments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let x = f(&mut rng);
                sum += x;
                sum_sq += x * x;
            }
            BatchMoments { sum, sum_sq, count }
        })
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0u64;
    for m in &moments {
        sum += m.sum;
        sum_sq += m.sum_sq;
        count += m.count;
    }
    let n = count as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    let std_error = (variance / n).sqrt();
    (mean, std_error)
}

/// Mapping degree of a smooth self-map of `S^3`.
pub fn degree(f: &MapHandle<UnitQuaternion>, samples: u64, seed: u64) -> Result<IntegerEstimate> {
    if samples < MIN_DEGREE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples,
            minimum: MIN_DEGREE_SAMPLES,
        });
    }
    let started = std::time::Instant::now();
    let (mean, std_error) = batched_mean(samples, seed, |rng| {
        let q = sample_s3(rng);
        jacobian_det(f, &q, DEFAULT_STEP)
    });
    let estimate = IntegerEstimate::from_raw(
        mean,
        std_error,
        samples,
        seed,
        started.elapsed().as_millis() as u64,
    );
    if estimate.accepted() {
        Ok(estimate)
    } else {
        Err(Error::Inconclusive { estimate })
    }
}

/// Degree with sample doubling up to `cap` until the estimate passes its
/// gates; deterministic given the seed since the batch partition is fixed.
pub fn degree_with_growth(
    f: &MapHandle<UnitQuaternion>,
    start: u64,
    cap: u64,
    seed: u64,
) -> Result<IntegerEstimate> {
    let mut n = start.max(MIN_DEGREE_SAMPLES);
    loop {
        match degree(f, n, seed) {
            Ok(e) => return Ok(e),
            Err(Error::Inconclusive { estimate }) if n < cap => {
                let _ = estimate;
                n = (n * 2).min(cap);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Hopf invariant of `f` from the fibers over two regular values: the sum of
/// linking numbers over all component pairs, one from each fiber, globally
/// signed so that the Hopf fibration returns +1.
pub fn hopf_invariant(
    f: &MapHandle<PointS2>,
    v1: PointS2,
    v2: PointS2,
    cfg: &TraceConfig,
) -> Result<IntegerEstimate> {
    let started = std::time::Instant::now();
    let fibers1 = trace_preimage(f, v1, cfg)?;
    let fibers2 = trace_preimage(f, v2, cfg)?;
    let mut raw = 0.0;
    let mut pair_samples = 0u64;
    for a in &fibers1 {
        for b in &fibers2 {
            let lk = linking_number(a, b)?;
            raw += lk.raw;
            pair_samples += lk.samples;
        }
    }
    raw *= HOPF_SIGN;
    let estimate = IntegerEstimate::from_raw(
        raw,
        0.0,
        pair_samples,
        cfg.seed,
        started.elapsed().as_millis() as u64,
    );
    if estimate.residual >= RESIDUAL_GATE {
        return Err(Error::Inconclusive { estimate });
    }
    Ok(estimate)
}

/// Pick a pair of well-separated regular values of `f`, deterministically
/// from the seed. The `attempt` index advances the stream so callers can
/// retry or collect several distinct pairs.
pub fn pick_regular_pair(
    f: &MapHandle<PointS2>,
    seed: u64,
    attempt: u64,
) -> Result<(PointS2, PointS2)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(1_000_000 + attempt);
    for _ in 0..50 {
        let v1 = sample_s2(&mut rng);
        let v2 = sample_s2(&mut rng);
        if v1.distance(v2) < 0.6 {
            continue;
        }
        if !is_regular_value(f, v1, 64, seed)?.is_regular() {
            continue;
        }
        if !is_regular_value(f, v2, 64, seed)?.is_regular() {
            continue;
        }
        return Ok((v1, v2));
    }
    Err(Error::NoPreimage)
}

/// Hopf invariant over an automatically chosen regular-value pair, retrying
/// with fresh pairs on fiber-proximity failures.
pub fn hopf_invariant_auto(f: &MapHandle<PointS2>, cfg: &TraceConfig) -> Result<IntegerEstimate> {
    let mut last = None;
    for attempt in 0..8 {
        let (v1, v2) = pick_regular_pair(f, cfg.seed, attempt)?;
        match hopf_invariant(f, v1, v2, cfg) {
            Ok(e) => return Ok(e),
            Err(e @ Error::LoopsTooClose { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::NoPreimage))
}

/// The class of a family `S^3 -> SO(3)` in `pi_3(SO_3)`, computed as the
/// Hopf invariant of the family evaluated at the base point of `S^2`.
pub fn so3_class(mu: &MapHandle<Rot3>, cfg: &TraceConfig) -> Result<IntegerEstimate> {
    let evaluated = crate::maps::evaluated_at(mu, PointS2::base_point());
    // a constant family has class 0 but no regular values; detect it directly
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = evaluated.eval(&sample_s3(&mut rng));
    let constant = (0..16).all(|_| evaluated.eval(&sample_s3(&mut rng)).distance(base) < 1e-12);
    if constant {
        return Ok(IntegerEstimate::from_raw(0.0, 0.0, 16, cfg.seed, 0));
    }
    hopf_invariant_auto(&evaluated, cfg)
}
