//! Preimage-circle tracing for maps `S^3 -> S^2` and exact linking numbers
//! of closed polygonal curves.
//!
//! Tracing is predictor-corrector continuation: at a fiber point the kernel
//! of the differential is one-dimensional, the predictor steps along it, and
//! the corrector runs Newton iterations in the 2-plane of the tangent space
//! orthogonal to the current direction. The traced loop is oriented by the
//! convention that `det[k, w1, w2] > 0` in the domain frame, where `w1, w2`
//! are the preimages under `df` of the oriented tangent basis at the value,
//! taken orthogonal to the curve direction `k`. Equivalently `k` is the
//! normalized cross product of the two gradient columns, which is what the
//! tracer computes.
//!
//! Linking numbers are exact: after stereographic projection the Gauss map
//! of a pair of segments sweeps a spherical quadrilateral, and the signed
//! solid angles are summed with the two-triangle arctangent formula. For
//! disjoint closed polygons the total is the linking integer up to floating
//! point roundoff, so the residual from the nearest integer doubles as an
//! error estimate.

use std::io::Write;

use nalgebra::{Vector3, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diff::{correct_to_fiber, is_regular_value, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::invariants::IntegerEstimate;
use crate::maps::MapHandle;
use crate::quat::{sample_s3, PointS2, Stereographic, UnitQuaternion};

/// Minimum number of vertices of a valid traced loop.
pub const MIN_VERTICES: usize = 12;
/// Residual above which a linking sum is rejected as inconclusive.
pub const LINKING_REJECT: f64 = 1e-3;

/// Configuration of the fiber tracer.
#[derive(Debug, Clone)]
pub struct TraceConfig {
    /// Predictor step size; must lie in `[1e-4, 5e-2]`.
    pub step: f64,
    /// Corrector residual tolerance.
    pub corrector_tol: f64,
    /// Hard cap on predictor steps per loop.
    pub max_steps: usize,
    /// Number of random seeds used to find fiber components.
    pub seed_budget: u32,
    /// RNG seed for the seeding stage.
    pub seed: u64,
    /// Trace with the reversed oriented basis of the target tangent plane,
    /// flipping every loop orientation.
    pub reverse_target_basis: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            step: 5e-3,
            corrector_tol: 1e-10,
            max_steps: 1_000_000,
            seed_budget: 64,
            seed: 0,
            reverse_target_basis: false,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1e-4..=5e-2).contains(&self.step) {
            return Err(Error::BadTraceConfig {
                reason: format!("step {} outside [1e-4, 5e-2]", self.step),
            });
        }
        if self.corrector_tol <= 0.0 || self.corrector_tol > 1e-6 {
            return Err(Error::BadTraceConfig {
                reason: format!(
                    "corrector tolerance {} outside (0, 1e-6]",
                    self.corrector_tol
                ),
            });
        }
        if self.seed_budget < 4 {
            return Err(Error::BadTraceConfig {
                reason: "seed budget below 4".into(),
            });
        }
        Ok(())
    }
}

/// A closed oriented polygonal curve on `S^3` produced by the tracer.
#[derive(Debug, Clone)]
pub struct PolylineLoop {
    vertices: Vec<UnitQuaternion>,
    /// True when the vertex order follows the determinant orientation rule
    /// with the standard oriented basis at the value.
    orientation_positive: bool,
    step: f64,
    closure_gap: f64,
    max_gap: f64,
}

impl PolylineLoop {
    /// Validate the loop invariants: at least [`MIN_VERTICES`] vertices,
    /// consecutive gaps below `2 * step`, closure gap below `step`.
    pub fn new(
        vertices: Vec<UnitQuaternion>,
        orientation_positive: bool,
        step: f64,
    ) -> Result<Self> {
        if vertices.len() < MIN_VERTICES {
            return Err(Error::LoopTooShort {
                vertices: vertices.len(),
            });
        }
        let mut max_gap: f64 = 0.0;
        for pair in vertices.windows(2) {
            max_gap = max_gap.max(pair[0].distance(pair[1]));
        }
        let closure_gap = vertices[0].distance(*vertices.last().unwrap());
        if max_gap >= 2.0 * step || closure_gap >= step {
            return Err(Error::NonClosure {
                steps: vertices.len(),
                gap: closure_gap.max(max_gap),
            });
        }
        Ok(PolylineLoop {
            vertices,
            orientation_positive,
            step,
            closure_gap,
            max_gap,
        })
    }

    pub fn vertices(&self) -> &[UnitQuaternion] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn closure_gap(&self) -> f64 {
        self.closure_gap
    }

    pub fn max_gap(&self) -> f64 {
        self.max_gap
    }

    pub fn orientation_positive(&self) -> bool {
        self.orientation_positive
    }

    /// Reverse the orientation (vertex order and flag).
    pub fn reversed(&self) -> PolylineLoop {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        PolylineLoop {
            vertices,
            orientation_positive: !self.orientation_positive,
            step: self.step,
            closure_gap: self.closure_gap,
            max_gap: self.max_gap,
        }
    }

    /// Refine by inserting normalized midpoints; halves the nominal step.
    pub fn refined(&self) -> PolylineLoop {
        let n = self.vertices.len();
        let mut vertices = Vec::with_capacity(2 * n);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            vertices.push(a);
            let mid = (a.to_vector() + b.to_vector()) * 0.5;
            vertices
                .push(UnitQuaternion::from_vector(mid).expect("midpoint of nearby unit vectors"));
        }
        let mut max_gap: f64 = 0.0;
        for k in 0..vertices.len() {
            let d = vertices[k].distance(vertices[(k + 1) % vertices.len()]);
            max_gap = max_gap.max(d);
        }
        PolylineLoop {
            vertices,
            orientation_positive: self.orientation_positive,
            step: self.step / 2.0,
            closure_gap: self.closure_gap,
            max_gap,
        }
    }

    /// Project all vertices from the given pole.
    pub fn project(&self, projection: &Stereographic) -> Result<Vec<Vector3<f64>>> {
        self.vertices
            .iter()
            .map(|&v| projection.project(v))
            .collect()
    }

    /// Distance from a point to the closed polyline (vertex-to-segment).
    pub fn distance_to_point(&self, p: UnitQuaternion) -> f64 {
        let pv = p.to_vector();
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for k in 0..n {
            let a = self.vertices[k].to_vector();
            let b = self.vertices[(k + 1) % n].to_vector();
            best = best.min(point_segment_distance(&pv, &a, &b));
        }
        best
    }

    /// Minimal vertex-to-segment distance between two loops, both ways.
    pub fn min_distance(&self, other: &PolylineLoop) -> f64 {
        let d1 = other
            .vertices
            .iter()
            .map(|&v| self.distance_to_point(v))
            .fold(f64::INFINITY, f64::min);
        let d2 = self
            .vertices
            .iter()
            .map(|&v| other.distance_to_point(v))
            .fold(f64::INFINITY, f64::min);
        d1.min(d2)
    }

    /// Bidirectional Hausdorff distance (vertex-to-segment).
    pub fn hausdorff(&self, other: &PolylineLoop) -> f64 {
        let d1 = other
            .vertices
            .iter()
            .map(|&v| self.distance_to_point(v))
            .fold(0.0, f64::max);
        let d2 = self
            .vertices
            .iter()
            .map(|&v| other.distance_to_point(v))
            .fold(0.0, f64::max);
        d1.max(d2)
    }

    /// Write the loop as a plain-text vertex table: `#`-prefixed header
    /// lines, then one whitespace-separated vertex per line (four
    /// coordinates, or three after projection).
    pub fn export<W: Write>(
        &self,
        mut out: W,
        map_name: &str,
        value: PointS2,
        cfg: &TraceConfig,
        projection: Option<&Stereographic>,
    ) -> std::io::Result<()> {
        let v = value.to_vector();
        writeln!(out, "# map: {map_name}")?;
        writeln!(out, "# value: {} {} {}", v[0], v[1], v[2])?;
        writeln!(
            out,
            "# step: {}  corrector_tol: {}  max_steps: {}  seed_budget: {}",
            cfg.step, cfg.corrector_tol, cfg.max_steps, cfg.seed_budget
        )?;
        writeln!(out, "# seed: {}", cfg.seed)?;
        writeln!(
            out,
            "# vertices: {}  closure_gap: {:.6e}  orientation: {}",
            self.vertices.len(),
            self.closure_gap,
            if self.orientation_positive { "+" } else { "-" }
        )?;
        match projection {
            None => {
                for q in &self.vertices {
                    writeln!(out, "{:.17} {:.17} {:.17} {:.17}", q.w, q.x, q.y, q.z)?;
                }
            }
            Some(proj) => {
                for q in &self.vertices {
                    let p = proj.project(*q).map_err(|e| {
                        std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())
                    })?;
                    writeln!(out, "{:.17} {:.17} {:.17}", p[0], p[1], p[2])?;
                }
            }
        }
        Ok(())
    }
}

fn point_segment_distance(p: &Vector4<f64>, a: &Vector4<f64>, b: &Vector4<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-30 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Fiber direction at `p`: the normalized cross product of the two gradient
/// columns of the differential, in domain-frame coordinates, together with
/// the coefficient columns themselves.
fn fiber_direction(
    f: &MapHandle<PointS2>,
    p: &UnitQuaternion,
    basis: &[Vector3<f64>; 2],
) -> Result<(Vector3<f64>, [Vector3<f64>; 2])> {
    let frame = p.tangent_frame();
    let mut d1 = Vector3::zeros();
    let mut d2 = Vector3::zeros();
    for (a, &u) in frame.iter().enumerate() {
        let deriv = match f.diff_at(p, u) {
            Some(x) => x,
            None => {
                let plus = f
                    .eval(&UnitQuaternion::from_vector(p.to_vector() + u * DEFAULT_STEP).unwrap())
                    .to_vector();
                let minus = f
                    .eval(&UnitQuaternion::from_vector(p.to_vector() - u * DEFAULT_STEP).unwrap())
                    .to_vector();
                (plus - minus) / (2.0 * DEFAULT_STEP)
            }
        };
        d1[a] = deriv.dot(&basis[0]);
        d2[a] = deriv.dot(&basis[1]);
    }
    let cross = d1.cross(&d2);
    let n = cross.norm();
    if n < 1e-12 {
        return Err(Error::NotRegularValue {
            map: f.name().to_string(),
            margin: n,
        });
    }
    Ok((cross / n, [d1, d2]))
}

/// One corrector solve: Newton in the 2-plane of `T_p S^3` orthogonal to
/// the current direction, renormalizing to `S^3` each iteration.
fn correct_orthogonal(
    f: &MapHandle<PointS2>,
    v: PointS2,
    basis: &[Vector3<f64>; 2],
    direction: Vector3<f64>,
    p0: UnitQuaternion,
    tol: f64,
) -> Result<UnitQuaternion> {
    // orthonormal pair spanning the complement of `direction` in coefficients
    let mut a = Vector3::new(1.0, 0.0, 0.0);
    if direction[0].abs() > 0.9 {
        a = Vector3::new(0.0, 1.0, 0.0);
    }
    a -= direction * direction.dot(&a);
    a /= a.norm();
    let b = direction.cross(&a);

    let vv = v.to_vector();
    let mut p = p0;
    for it in 0..30 {
        let fp = f.eval(&p).to_vector();
        let r0 = (fp - vv).dot(&basis[0]);
        let r1 = (fp - vv).dot(&basis[1]);
        if (r0 * r0 + r1 * r1).sqrt() < tol {
            return Ok(p);
        }
        let frame = p.tangent_frame();
        let dir_a = frame[0] * a[0] + frame[1] * a[1] + frame[2] * a[2];
        let dir_b = frame[0] * b[0] + frame[1] * b[1] + frame[2] * b[2];
        let mut m = [[0.0f64; 2]; 2];
        for (col, dir) in [dir_a, dir_b].into_iter().enumerate() {
            let deriv = match f.diff_at(&p, dir) {
                Some(x) => x,
                None => {
                    let plus = f
                        .eval(
                            &UnitQuaternion::from_vector(p.to_vector() + dir * DEFAULT_STEP)
                                .unwrap(),
                        )
                        .to_vector();
                    let minus = f
                        .eval(
                            &UnitQuaternion::from_vector(p.to_vector() - dir * DEFAULT_STEP)
                                .unwrap(),
                        )
                        .to_vector();
                    (plus - minus) / (2.0 * DEFAULT_STEP)
                }
            };
            m[0][col] = deriv.dot(&basis[0]);
            m[1][col] = deriv.dot(&basis[1]);
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-16 {
            return Err(Error::CorrectorDiverged {
                iterations: it,
                residual: (r0 * r0 + r1 * r1).sqrt(),
            });
        }
        let c0 = (-r0 * m[1][1] + r1 * m[0][1]) / det;
        let c1 = (-m[0][0] * r1 + m[1][0] * r0) / det;
        let step = dir_a * c0 + dir_b * c1;
        p = UnitQuaternion::from_vector(p.to_vector() + step).map_err(|_| {
            Error::CorrectorDiverged {
                iterations: it,
                residual: (r0 * r0 + r1 * r1).sqrt(),
            }
        })?;
    }
    let residual = (f.eval(&p).to_vector() - vv).norm();
    if residual < tol {
        Ok(p)
    } else {
        Err(Error::CorrectorDiverged {
            iterations: 30,
            residual,
        })
    }
}

fn trace_single_loop(
    f: &MapHandle<PointS2>,
    v: PointS2,
    basis: &[Vector3<f64>; 2],
    start: UnitQuaternion,
    cfg: &TraceConfig,
) -> Result<Vec<UnitQuaternion>> {
    let mut vertices = vec![start];
    let mut p = start;
    for step_count in 0..cfg.max_steps {
        let (dir, _) = fiber_direction(f, &p, basis)?;
        let frame = p.tangent_frame();
        let predictor = frame[0] * dir[0] + frame[1] * dir[1] + frame[2] * dir[2];
        let predicted = UnitQuaternion::from_vector(p.to_vector() + predictor * cfg.step)
            .expect("predictor stays near the sphere");
        let corrected = correct_orthogonal(f, v, basis, dir, predicted, cfg.corrector_tol)?;
        p = corrected;
        vertices.push(p);
        let gap_to_start = p.distance(start);
        if vertices.len() >= MIN_VERTICES && gap_to_start < cfg.step {
            return Ok(vertices);
        }
        if step_count + 1 == cfg.max_steps {
            return Err(Error::NonClosure {
                steps: cfg.max_steps,
                gap: gap_to_start,
            });
        }
    }
    Err(Error::NonClosure {
        steps: cfg.max_steps,
        gap: f64::INFINITY,
    })
}

/// Trace all components of the fiber `f^{-1}(v)` found within the seed
/// budget, deduplicated by Hausdorff distance.
pub fn trace_preimage(
    f: &MapHandle<PointS2>,
    v: PointS2,
    cfg: &TraceConfig,
) -> Result<Vec<PolylineLoop>> {
    cfg.validate()?;
    match is_regular_value(f, v, cfg.seed_budget.max(32), cfg.seed)? {
        reg if reg.is_regular() => {}
        crate::diff::Regularity::Indeterminate => return Err(Error::NoPreimage),
        crate::diff::Regularity::Critical { margin } => {
            return Err(Error::NotRegularValue {
                map: f.name().to_string(),
                margin,
            })
        }
        _ => unreachable!(),
    }

    let mut basis = v.tangent_basis();
    if cfg.reverse_target_basis {
        basis.swap(0, 1);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates: Vec<(f64, UnitQuaternion)> = (0..cfg.seed_budget)
        .map(|_| {
            let q = sample_s3(&mut rng);
            ((f.eval(&q).to_vector() - v.to_vector()).norm(), q)
        })
        .collect();
    candidates.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut loops: Vec<PolylineLoop> = Vec::new();
    for (_, raw_seed) in candidates {
        let Ok(on_fiber) = correct_to_fiber(f, v, raw_seed, cfg.corrector_tol, 60) else {
            continue;
        };
        if loops
            .iter()
            .any(|l| l.distance_to_point(on_fiber) < 2.0 * cfg.step)
        {
            continue;
        }
        let vertices = trace_single_loop(f, v, &basis, on_fiber, cfg)?;
        let candidate = PolylineLoop::new(vertices, !cfg.reverse_target_basis, cfg.step)?;
        if loops
            .iter()
            .all(|l| l.hausdorff(&candidate) > 5.0 * cfg.step)
        {
            loops.push(candidate);
        }
    }
    if loops.is_empty() {
        return Err(Error::NoPreimage);
    }
    Ok(loops)
}

/// Signed solid angle of the spherical triangle with unit vertices
/// `(a, b, c)` by the two-argument arctangent formula.
fn triangle_solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Raw Gauss linking sum of two closed polygons in `R^3`: the sum over
/// segment pairs of the signed spherical quadrilateral areas swept by the
/// Gauss map, divided by `4 pi`. Exact up to roundoff for disjoint polygons.
pub fn gauss_linking_sum(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let na = a.len();
    let nb = b.len();
    let per_segment: Vec<f64> = (0..na)
        .into_par_iter()
        .map(|i| {
            let p1 = a[i];
            let p2 = a[(i + 1) % na];
            let mut acc = 0.0;
            for j in 0..nb {
                let q1 = b[j];
                let q2 = b[(j + 1) % nb];
                let r00 = (q1 - p1).normalize();
                let r10 = (q1 - p2).normalize();
                let r11 = (q2 - p2).normalize();
                let r01 = (q2 - p1).normalize();
                acc +=
                    triangle_solid_angle(&r00, &r10, &r11) + triangle_solid_angle(&r00, &r11, &r01);
            }
            acc
        })
        .collect();
    // merge per-segment sums in index order, independent of scheduling
    let total: f64 = per_segment.iter().sum();
    -total / (4.0 * std::f64::consts::PI)
}

/// Exact linking number of two disjoint traced loops.
///
/// Projects both loops stereographically from the admissible pole
/// maximizing the minimal distance to both, sums the exact per-segment-pair
/// solid angles, and gates the result on its residual from the nearest
/// integer. Antisymmetric under orientation reversal of either loop.
pub fn linking_number(a: &PolylineLoop, b: &PolylineLoop) -> Result<IntegerEstimate> {
    let pole = select_projection_pole(&[a, b]);
    linking_number_with_pole(a, b, pole)
}

/// Linking number with an explicitly chosen projection pole.
pub fn linking_number_with_pole(
    a: &PolylineLoop,
    b: &PolylineLoop,
    pole: UnitQuaternion,
) -> Result<IntegerEstimate> {
    let started = std::time::Instant::now();
    let required = 10.0 * a.step().max(b.step());
    let min_distance = a.min_distance(b);
    if min_distance <= required {
        return Err(Error::LoopsTooClose {
            min_distance,
            required,
        });
    }
    let projection = Stereographic::new(pole);
    let pa = a.project(&projection)?;
    let pb = b.project(&projection)?;
    let raw = gauss_linking_sum(&pa, &pb);
    let rounded = raw.round();
    let residual = (raw - rounded).abs();
    if residual >= LINKING_REJECT {
        return Err(Error::LinkingInconclusive { residual });
    }
    Ok(IntegerEstimate {
        raw,
        rounded: rounded as i64,
        residual,
        std_error: 0.0,
        samples: (a.len() as u64) * (b.len() as u64),
        seed: 0,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

/// Fixed well-spread candidate poles; returns the one maximizing the minimal
/// distance to all given loops.
pub fn select_projection_pole(loops: &[&PolylineLoop]) -> UnitQuaternion {
    let mut candidates = Vec::with_capacity(48);
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = Vector4::zeros();
            v[axis] = sign;
            candidates.push(v);
        }
    }
    let h = 0.5;
    for mask in 0..16u32 {
        let v = Vector4::new(
            if mask & 1 == 0 { h } else { -h },
            if mask & 2 == 0 { h } else { -h },
            if mask & 4 == 0 { h } else { -h },
            if mask & 8 == 0 { h } else { -h },
        );
        candidates.push(v);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..4 {
        for j in (i + 1)..4 {
            for (si, sj) in [(s, s), (s, -s), (-s, s), (-s, -s)] {
                let mut v = Vector4::zeros();
                v[i] = si;
                v[j] = sj;
                candidates.push(v);
            }
        }
    }

    let mut best = UnitQuaternion::ONE;
    let mut best_score = -1.0;
    for c in candidates {
        let q = UnitQuaternion::from_vector(c).expect("unit candidate");
        let score = loops
            .iter()
            .flat_map(|l| l.vertices().iter())
            .map(|v| v.distance(q))
            .fold(f64::INFINITY, f64::min);
        if score > best_score {
            best_score = score;
            best = q;
        }
    }
    best
}

/// Closed polygonal approximation of the great circle through the
/// orthonormal pair `(u, w)`.
pub fn great_circle(u: UnitQuaternion, w: UnitQuaternion, n: usize) -> PolylineLoop {
    let vertices: Vec<UnitQuaternion> = (0..n)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / n as f64;
            UnitQuaternion::from_vector(u.to_vector() * t.cos() + w.to_vector() * t.sin())
                .expect("unit combination")
        })
        .collect();
    let step = (vertices[0].distance(vertices[1])) * 1.5;
    PolylineLoop::new(vertices, true, step).expect("regular polygon closes")
}
