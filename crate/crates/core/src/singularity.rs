//! Executable geometry of the variety `X_d = { xy - z(z + v^d) = 0 }` in
//! `C^4` and of the link it cuts out of the unit 7-sphere.
//!
//! The variety minus the origin is covered by two charts. On chart A the
//! embedding is `(t, x, v) -> (x, t^2 x + t v^d, tx, v)`, on chart B it is
//! `(t', y, v) -> (t'^2 y - t' v^d, y, t'y - v^d, v)`, and the coordinate
//! change `t' = 1/t`, `y = t^2 x + t v^d` glues them. The `t = 0` slice is
//! the coordinate plane `{(x, 0, 0, v)}`, and along it two complex normal
//! fields are available: the chart velocity `(v^d, x)` and the gradient
//! `(x, -v^d)` of the defining equation (written in the `(y, z)` slots).
//! Doubling each by its `i`-image yields four real normal vectors `u1..u4`.
//!
//! Two conventions ship for the second pair. The `literal` convention takes
//! the holomorphic gradient itself; its frame degenerates on
//! `x^2 + v^(2d) = 0`, which meets the unit sphere. The `conjugate`
//! convention replaces the gradient pair by the conjugated gradient
//! `(x~, -v~^d)` and its `i`-image; its determinant is
//! `-(|x|^2 + |v^d|^2)^2`, bounded away from zero on the sphere, so the
//! orthonormalized frame is a smooth map into `SO(4)` after one fixed
//! orientation swap. The class of that map splits as
//! `(d, ?) in pi_3(S^3) + pi_3(SO_3)` and the invariant pipeline extracts
//! `d` as the degree of the evaluation `q -> frame(q) e_1` together with
//! its mod-2 image.

use std::io::Write;

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::{degree_with_growth, IntegerEstimate};
use crate::maps::MapHandle;
use crate::quat::{Rot4, UnitQuaternion};
use crate::so4::{pair_degrees, PairDegrees};

/// Residual bound for points claimed on the variety, at unit scale.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Sixth singular value threshold of the chart Jacobians.
pub const IMMERSION_SIGMA: f64 = 1e-6;
/// `|det|` below this counts as a located degeneracy of the literal frame.
pub const DEGENERACY_DET: f64 = 1e-8;

/// A point of `C^4` in the coordinates `(x, y, z, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientPoint {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
    pub v: Complex64,
}

impl AmbientPoint {
    /// Residual of the defining equation `g = xy - z(z + v^d)`.
    pub fn defining_residual(&self, d: u32) -> f64 {
        (self.x * self.y - self.z * (self.z + self.v.powu(d))).norm()
    }

    pub fn coordinate_norm(&self) -> f64 {
        self.x.norm() + self.y.norm() + self.z.norm() + self.v.norm()
    }

    fn to_real8(self) -> [f64; 8] {
        [
            self.x.re, self.x.im, self.y.re, self.y.im, self.z.re, self.z.im, self.v.re, self.v.im,
        ]
    }

    pub fn distance(&self, rhs: &AmbientPoint) -> f64 {
        let a = self.to_real8();
        let b = rhs.to_real8();
        a.iter()
            .zip(b.iter())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

/// Coordinates `(t, x, v)` on chart A; the fiber coordinates never both
/// vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPointA {
    pub t: Complex64,
    pub x: Complex64,
    pub v: Complex64,
}

/// Coordinates `(t', y, v)` on chart B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPointB {
    pub t_prime: Complex64,
    pub y: Complex64,
    pub v: Complex64,
}

impl ChartPointA {
    pub fn new(t: Complex64, x: Complex64, v: Complex64) -> Result<Self> {
        if x.norm() + v.norm() == 0.0 {
            return Err(Error::OutsideChart {
                reason: "fiber coordinates (x, v) vanish".into(),
            });
        }
        Ok(ChartPointA { t, x, v })
    }
}

impl ChartPointB {
    pub fn new(t_prime: Complex64, y: Complex64, v: Complex64) -> Result<Self> {
        if y.norm() + v.norm() == 0.0 {
            return Err(Error::OutsideChart {
                reason: "fiber coordinates (y, v) vanish".into(),
            });
        }
        Ok(ChartPointB { t_prime, y, v })
    }
}

/// Chart-A embedding `(t, x, v) -> (x, t^2 x + t v^d, tx, v)`.
pub fn embed_chart_a(p: &ChartPointA, d: u32) -> AmbientPoint {
    let vd = p.v.powu(d);
    AmbientPoint {
        x: p.x,
        y: p.t * p.t * p.x + p.t * vd,
        z: p.t * p.x,
        v: p.v,
    }
}

/// Chart-B embedding `(t', y, v) -> (t'^2 y - t' v^d, y, t'y - v^d, v)`.
pub fn embed_chart_b(p: &ChartPointB, d: u32) -> AmbientPoint {
    let vd = p.v.powu(d);
    AmbientPoint {
        x: p.t_prime * p.t_prime * p.y - p.t_prime * vd,
        y: p.y,
        z: p.t_prime * p.y - vd,
        v: p.v,
    }
}

/// Coordinate change A -> B on the overlap `t != 0`:
/// `(t', y, v) = (1/t, t^2 x + t v^d, v)`.
pub fn chart_change(p: &ChartPointA, d: u32) -> Result<ChartPointB> {
    if p.t.norm() < 1e-9 {
        return Err(Error::OutsideChart {
            reason: format!("|t| = {:.3e} too small for the overlap", p.t.norm()),
        });
    }
    let vd = p.v.powu(d);
    ChartPointB::new(p.t.inv(), p.t * p.t * p.x + p.t * vd, p.v)
}

/// Coordinate change B -> A on the overlap `t' != 0`.
pub fn chart_change_inverse(p: &ChartPointB, d: u32) -> Result<ChartPointA> {
    if p.t_prime.norm() < 1e-9 {
        return Err(Error::OutsideChart {
            reason: format!("|t'| = {:.3e} too small for the overlap", p.t_prime.norm()),
        });
    }
    let vd = p.v.powu(d);
    ChartPointA::new(
        p.t_prime.inv(),
        p.t_prime * p.t_prime * p.y - p.t_prime * vd,
        p.v,
    )
}

/// The shear `(t, x, v) -> (t, x - s t v^d, v)`, a diffeotopy from the
/// identity at `s = 0`.
pub fn shear(p: &ChartPointA, s: f64, d: u32) -> ChartPointA {
    ChartPointA {
        t: p.t,
        x: p.x - Complex64::new(s, 0.0) * p.t * p.v.powu(d),
        v: p.v,
    }
}

/// Inverse of [`shear`] at the same parameter.
pub fn shear_inverse(p: &ChartPointA, s: f64, d: u32) -> ChartPointA {
    ChartPointA {
        t: p.t,
        x: p.x + Complex64::new(s, 0.0) * p.t * p.v.powu(d),
        v: p.v,
    }
}

/// The clutching map `(t, x, v) -> (t, t^2 x, v)` of the equatorial
/// transition.
pub fn clutching(p: &ChartPointA) -> ChartPointA {
    ChartPointA {
        t: p.t,
        x: p.t * p.t * p.x,
        v: p.v,
    }
}

/// Which second pair of normal vectors the frame uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrameConvention {
    /// Frame built from the holomorphic gradient; degenerates on
    /// `x^2 + v^(2d) = 0`.
    Literal,
    /// The conjugated gradient; never degenerate away from the origin.
    Conjugate,
}

impl FrameConvention {
    pub fn label(&self) -> &'static str {
        match self {
            FrameConvention::Literal => "paper",
            FrameConvention::Conjugate => "conjugate",
        }
    }
}

impl std::str::FromStr for FrameConvention {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" | "literal" => Ok(FrameConvention::Literal),
            "conjugate" => Ok(FrameConvention::Conjugate),
            other => Err(format!("unknown convention `{other}`")),
        }
    }
}

/// The four normal vectors along the `t = 0` slice, in the real coordinates
/// `(y1, y2, z1, z2)` of the `(y, z)` plane.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub vectors: [Vector4<f64>; 4],
    pub gram: Matrix4<f64>,
    pub det: f64,
    pub convention: FrameConvention,
}

/// Evaluate the normal frame at `(x, v)`, nonzero.
pub fn frame_field(
    x: Complex64,
    v: Complex64,
    d: u32,
    convention: FrameConvention,
) -> Result<NormalFrame> {
    if x.norm() + v.norm() == 0.0 {
        return Err(Error::OutsideChart {
            reason: "frame undefined at the origin".into(),
        });
    }
    let vd = v.powu(d);
    let (a1, a2) = (vd.re, vd.im);
    let (x1, x2) = (x.re, x.im);
    let u1 = Vector4::new(a1, a2, x1, x2);
    let u2 = Vector4::new(a2, -a1, x2, -x1);
    let (u3, u4) = match convention {
        FrameConvention::Literal => (
            Vector4::new(x1, x2, -a1, -a2),
            Vector4::new(-x2, x1, a2, -a1),
        ),
        FrameConvention::Conjugate => (
            Vector4::new(x1, -x2, -a1, a2),
            Vector4::new(x2, x1, -a2, -a1),
        ),
    };
    let vectors = [u1, u2, u3, u4];
    let mut gram = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            gram[(i, j)] = vectors[i].dot(&vectors[j]);
        }
    }
    let det = Matrix4::from_columns(&vectors).determinant();
    Ok(NormalFrame {
        vectors,
        gram,
        det,
        convention,
    })
}

/// A point of the unit sphere of `x^2 + v^(2d) = 0`: the locus where the
/// literal frame degenerates.
pub fn literal_degeneracy_witness(d: u32) -> (Complex64, Complex64) {
    // solve r^2 + r^(2d) = 1 for r = |v|, then set x = i v^d
    let g = |r: f64| r * r + r.powi(2 * d as i32) - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let v = Complex64::new(r, 0.0);
    let x = Complex64::i() * v.powu(d);
    (x, v)
}

/// Gram-Schmidt the frame in order and normalize the orientation by the
/// fixed swap of the last two vectors when the determinant is negative.
/// Returns the rotation and whether the swap was applied.
pub fn frame_matrix(
    x: Complex64,
    v: Complex64,
    d: u32,
    convention: FrameConvention,
) -> Result<(Rot4, bool)> {
    let frame = frame_field(x, v, d, convention)?;
    if frame.det.abs() < 1e-12 {
        return Err(Error::DegenerateFrameConvention {
            witness_det: frame.det.abs(),
            x_re: x.re,
            x_im: x.im,
            v_re: v.re,
            v_im: v.im,
        });
    }
    let mut columns = [Vector4::zeros(); 4];
    for (k, u) in frame.vectors.iter().enumerate() {
        let mut col = *u;
        for prev in columns.iter().take(k) {
            col -= prev * prev.dot(&col);
        }
        columns[k] = col / col.norm();
    }
    let mut m = Matrix4::from_columns(&columns);
    let swapped = m.determinant() < 0.0;
    if swapped {
        m.swap_columns(2, 3);
    }
    Ok((Rot4::try_new(m)?, swapped))
}

/// Whether the orientation swap is applied for this `(d, convention)`;
/// constant over the sphere, so probing the `v = 0` fiber decides it.
pub fn orientation_swap_applied(d: u32, convention: FrameConvention) -> Result<bool> {
    let (_, swapped) = frame_matrix(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        d,
        convention,
    )?;
    Ok(swapped)
}

/// The frame as a smooth map `S^3 -> SO(4)`, identifying the domain point
/// `q` with `(x, v) = (w + xi, y + zi)`. Only the conjugate convention
/// yields a map defined on the whole sphere; the literal convention is
/// refused with a degeneracy witness.
pub fn frame_map(d: u32, convention: FrameConvention) -> Result<MapHandle<Rot4>> {
    if d == 0 || d > 6 {
        return Err(Error::UnsupportedLinkDegree(d as i64));
    }
    if convention == FrameConvention::Literal {
        let (x, v) = literal_degeneracy_witness(d);
        let det = frame_field(x, v, d, convention)?.det;
        return Err(Error::DegenerateFrameConvention {
            witness_det: det.abs(),
            x_re: x.re,
            x_im: x.im,
            v_re: v.re,
            v_im: v.im,
        });
    }
    Ok(MapHandle::new(
        format!("frame_map_{d}"),
        move |q: &UnitQuaternion| {
            let (x, v) = q.to_complex_pair();
            let (rot, _) =
                frame_matrix(x, v, d, convention).expect("conjugate frame is nondegenerate");
            rot
        },
    ))
}

/// The extracted invariants of the link for a given `d`.
#[derive(Debug, Clone, Serialize)]
pub struct LinkClass {
    /// Degree of the evaluation `q -> frame(q) e_1`; equals the
    /// `pi_3(S^3)` component `a - b` of the frame map.
    pub s3_component: IntegerEstimate,
    /// Its mod-2 reduction, the image-regular-homotopy datum.
    pub mod2: u8,
    /// Whether the fixed orientation swap was applied to the frame.
    pub orientation_swapped: bool,
}

/// Compute the link invariants for `d` via the evaluation fast path.
pub fn link_class(d: u32, samples: u64, seed: u64) -> Result<LinkClass> {
    let map = frame_map(d, FrameConvention::Conjugate)?;
    let ev = crate::so4::evaluation_map(&map);
    let estimate = degree_with_growth(&ev, samples, 1_000_000, seed)?;
    Ok(LinkClass {
        mod2: estimate.rounded.rem_euclid(2) as u8,
        orientation_swapped: orientation_swap_applied(d, FrameConvention::Conjugate)?,
        s3_component: estimate,
    })
}

/// Cross-check of [`link_class`] through the full isoclinic pair degrees;
/// also reports the `pi_3(SO_3)` component, which carries no pinned
/// expected value.
pub fn link_class_pair_degrees(d: u32, samples: u64, seed: u64) -> Result<PairDegrees> {
    let map = frame_map(d, FrameConvention::Conjugate)?;
    pair_degrees(&map, samples, seed)
}

/// Which chart an immersion check runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    A,
    B,
}

/// Summary of an immersion/residual/injectivity sweep over one chart.
#[derive(Debug, Clone, Serialize)]
pub struct ImmersionReport {
    pub chart: Chart,
    pub d: u32,
    pub samples: u64,
    pub seed: u64,
    pub min_sigma6: f64,
    pub max_residual: f64,
    pub injectivity_pairs: u64,
    pub min_image_separation: f64,
}

fn sample_disk<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    loop {
        let re = rng.gen_range(-radius..radius);
        let im = rng.gen_range(-radius..radius);
        if re * re + im * im <= radius * radius {
            return Complex64::new(re, im);
        }
    }
}

fn sample_chart_a<R: Rng>(rng: &mut R, radius: f64) -> ChartPointA {
    loop {
        let t = sample_disk(rng, radius);
        let x = sample_disk(rng, radius);
        let v = sample_disk(rng, radius);
        // stay away from the zero section, where the chart leaves E_0
        if x.norm_sqr() + v.norm_sqr() >= 1e-2 {
            return ChartPointA { t, x, v };
        }
    }
}

fn sample_chart_b<R: Rng>(rng: &mut R, radius: f64) -> ChartPointB {
    let a = sample_chart_a(rng, radius);
    ChartPointB {
        t_prime: a.t,
        y: a.x,
        v: a.v,
    }
}

fn complex_jacobian_a(p: &ChartPointA, d: u32) -> [[Complex64; 3]; 4] {
    let vd = p.v.powu(d);
    let dvd = Complex64::new(d as f64, 0.0) * p.v.powu(d - 1);
    let two = Complex64::new(2.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // columns: d/dt, d/dx, d/dv of (x, t^2 x + t v^d, tx, v)
    [
        [zero, one, zero],
        [two * p.t * p.x + vd, p.t * p.t, p.t * dvd],
        [p.x, p.t, zero],
        [zero, zero, one],
    ]
}

fn complex_jacobian_b(p: &ChartPointB, d: u32) -> [[Complex64; 3]; 4] {
    let vd = p.v.powu(d);
    let dvd = Complex64::new(d as f64, 0.0) * p.v.powu(d - 1);
    let two = Complex64::new(2.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // columns: d/dt', d/dy, d/dv of (t'^2 y - t'v^d, y, t'y - v^d, v)
    [
        [
            two * p.t_prime * p.y - vd,
            p.t_prime * p.t_prime,
            -p.t_prime * dvd,
        ],
        [zero, one, zero],
        [p.y, p.t_prime, -dvd],
        [zero, zero, one],
    ]
}

fn realify(jc: &[[Complex64; 3]; 4]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(8, 6);
    for r in 0..4 {
        for c in 0..3 {
            let z = jc[r][c];
            m[(2 * r, 2 * c)] = z.re;
            m[(2 * r, 2 * c + 1)] = -z.im;
            m[(2 * r + 1, 2 * c)] = z.im;
            m[(2 * r + 1, 2 * c + 1)] = z.re;
        }
    }
    m
}

fn sigma6(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Sweep random chart points: the real `8 x 6` Jacobian must keep its sixth
/// singular value above [`IMMERSION_SIGMA`], the image must satisfy the
/// defining equation, and random distinct parameter pairs must map to
/// distinct images.
pub fn immersion_check(d: u32, chart: Chart, samples: u64, seed: u64) -> Result<ImmersionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_sigma6 = f64::INFINITY;
    let mut max_residual: f64 = 0.0;
    for _ in 0..samples {
        let (jac, image) = match chart {
            Chart::A => {
                let p = sample_chart_a(&mut rng, 2.0);
                (realify(&complex_jacobian_a(&p, d)), embed_chart_a(&p, d))
            }
            Chart::B => {
                let p = sample_chart_b(&mut rng, 2.0);
                (realify(&complex_jacobian_b(&p, d)), embed_chart_b(&p, d))
            }
        };
        let s = sigma6(&jac);
        let r = image.defining_residual(d);
        min_sigma6 = min_sigma6.min(s);
        max_residual = max_residual.max(r);
        if s <= IMMERSION_SIGMA {
            return Err(Error::RankDrop { sigma: s });
        }
    }

    let injectivity_pairs = 1000;
    let mut min_image_separation = f64::INFINITY;
    for _ in 0..injectivity_pairs {
        let (i1, i2) = match chart {
            Chart::A => {
                let p1 = sample_chart_a(&mut rng, 2.0);
                let p2 = sample_chart_a(&mut rng, 2.0);
                (embed_chart_a(&p1, d), embed_chart_a(&p2, d))
            }
            Chart::B => {
                let p1 = sample_chart_b(&mut rng, 2.0);
                let p2 = sample_chart_b(&mut rng, 2.0);
                (embed_chart_b(&p1, d), embed_chart_b(&p2, d))
            }
        };
        let sep = i1.distance(&i2);
        if sep < 1e-9 {
            return Err(Error::RankDrop { sigma: sep });
        }
        min_image_separation = min_image_separation.min(sep);
    }

    Ok(ImmersionReport {
        chart,
        d,
        samples,
        seed,
        min_sigma6,
        max_residual,
        injectivity_pairs,
        min_image_separation,
    })
}

/// Singular values of the restricted `t = 0` embedding `(x, v) -> (x, 0, 0, v)`:
/// the coordinate inclusion, all singular values exactly 1.
pub fn slice_singular_values() -> Vec<f64> {
    let mut m = DMatrix::zeros(8, 4);
    // complex columns d/dx = (1,0,0,0), d/dv = (0,0,0,1), realified
    m[(0, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    m[(6, 2)] = 1.0;
    m[(7, 3)] = 1.0;
    let sv = m.svd(false, false).singular_values;
    sv.iter().copied().collect()
}

/// Export sampled frames as a plain-text table.
pub fn export_frame_table<W: Write>(
    mut out: W,
    d: u32,
    convention: FrameConvention,
    n: usize,
    seed: u64,
) -> Result<()> {
    writeln!(
        out,
        "# d: {d}  convention: {}  seed: {seed}",
        convention.label()
    )
    .map_err(io_error)?;
    writeln!(
        out,
        "# columns: x_re x_im v_re v_im | u1(4) u2(4) u3(4) u4(4) | det"
    )
    .map_err(io_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let q = crate::quat::sample_s3(&mut rng);
        let (x, v) = q.to_complex_pair();
        let frame = frame_field(x, v, d, convention)?;
        let mut line = format!("{:.12} {:.12} {:.12} {:.12}", x.re, x.im, v.re, v.im);
        for u in &frame.vectors {
            for k in 0..4 {
                line.push_str(&format!(" {:.12}", u[k]));
            }
        }
        line.push_str(&format!(" {:.12}", frame.det));
        writeln!(out, "{line}").map_err(io_error)?;
    }
    Ok(())
}

/// Export sampled chart points and their images as a plain-text table.
pub fn export_chart_table<W: Write>(
    mut out: W,
    chart: Chart,
    d: u32,
    n: usize,
    seed: u64,
) -> Result<()> {
    writeln!(out, "# d: {d}  chart: {chart:?}  seed: {seed}").map_err(io_error)?;
    writeln!(
        out,
        "# columns: t_re t_im fiber_re fiber_im v_re v_im | image(8) | residual"
    )
    .map_err(io_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let (t, fiber, v, image) = match chart {
            Chart::A => {
                let p = sample_chart_a(&mut rng, 1.0);
                (p.t, p.x, p.v, embed_chart_a(&p, d))
            }
            Chart::B => {
                let p = sample_chart_b(&mut rng, 1.0);
                (p.t_prime, p.y, p.v, embed_chart_b(&p, d))
            }
        };
        let img = image.to_real8();
        let mut line = format!(
            "{:.12} {:.12} {:.12} {:.12} {:.12} {:.12}",
            t.re, t.im, fiber.re, fiber.im, v.re, v.im
        );
        for c in img {
            line.push_str(&format!(" {c:.12}"));
        }
        line.push_str(&format!(" {:.3e}", image.defining_residual(d)));
        writeln!(out, "{line}").map_err(io_error)?;
    }
    Ok(())
}

fn io_error(e: std::io::Error) -> Error {
    Error::BadTraceConfig {
        reason: format!("write failed: {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chart_a_restricts_to_the_coordinate_plane_at_t_zero() {
        let p = ChartPointA::new(c(0.0, 0.0), c(0.7, -0.1), c(0.2, 0.4)).unwrap();
        for d in 1..4 {
            let img = embed_chart_a(&p, d);
            assert_eq!(img.x, p.x);
            assert_eq!(img.v, p.v);
            assert_eq!(img.y, c(0.0, 0.0));
            assert_eq!(img.z, c(0.0, 0.0));
        }
    }

    #[test]
    fn chart_a_example_point() {
        let p = ChartPointA::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let img = embed_chart_a(&p, 2);
        assert_eq!(img.x, c(1.0, 0.0));
        assert_eq!(img.y, c(1.0, 0.0));
        assert_eq!(img.z, c(1.0, 0.0));
        assert_eq!(img.v, c(0.0, 0.0));
    }

    #[test]
    fn chart_b_slice_at_t_prime_zero() {
        let p = ChartPointB::new(c(0.0, 0.0), c(0.3, 0.2), c(0.5, -0.1)).unwrap();
        let d = 2;
        let img = embed_chart_b(&p, d);
        assert_eq!(img.x, c(0.0, 0.0));
        assert_eq!(img.y, p.y);
        assert!((img.z + p.v.powu(d)).norm() < 1e-15);
        assert_eq!(img.v, p.v);
    }

    #[test]
    fn both_charts_satisfy_the_defining_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for d in 1..4 {
            for _ in 0..10_000 {
                let a = sample_chart_a(&mut rng, 1.0);
                assert!(embed_chart_a(&a, d).defining_residual(d) < RESIDUAL_TOL);
                let b = sample_chart_b(&mut rng, 1.0);
                assert!(embed_chart_b(&b, d).defining_residual(d) < RESIDUAL_TOL);
            }
        }
    }

    #[test]
    fn chart_change_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for d in 1..4 {
            for _ in 0..10_000 {
                let mut a = sample_chart_a(&mut rng, 1.0);
                // |t| in [0.1, 10]
                let scale = rng.gen_range(0.1..10.0);
                if a.t.norm() < 1e-3 {
                    a.t = c(0.5, 0.5);
                }
                a.t = a.t / a.t.norm() * scale;
                let b = chart_change(&a, d).unwrap();
                let back = chart_change_inverse(&b, d).unwrap();
                let err = (back.t - a.t).norm() / a.t.norm().max(1.0)
                    + (back.x - a.x).norm() / a.x.norm().max(1.0)
                    + (back.v - a.v).norm();
                assert!(err < 1e-12, "round trip error {err:.3e}");
            }
        }
    }

    #[test]
    fn chart_change_example_point() {
        let a = ChartPointA::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let b = chart_change(&a, 1).unwrap();
        assert!((b.t_prime - c(1.0, 0.0)).norm() < 1e-15);
        assert!((b.y - c(1.0, 0.0)).norm() < 1e-15);
        assert!((b.v - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn charts_glue_on_the_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for d in 1..4 {
            for _ in 0..2_000 {
                let mut a = sample_chart_a(&mut rng, 1.0);
                if a.t.norm() < 0.1 {
                    a.t += c(0.5, 0.0);
                }
                let b = chart_change(&a, d).unwrap();
                let img_a = embed_chart_a(&a, d);
                let img_b = embed_chart_b(&b, d);
                let scale = img_a.coordinate_norm().max(1.0);
                assert!(img_a.distance(&img_b) / scale < 1e-10);
            }
        }
    }

    #[test]
    fn chart_change_rejects_t_zero() {
        let a = ChartPointA::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            chart_change(&a, 1),
            Err(Error::OutsideChart { .. })
        ));
    }

    #[test]
    fn shear_is_a_diffeotopy() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for _ in 0..100 {
            let p = sample_chart_a(&mut rng, 1.0);
            let same = shear(&p, 0.0, 2);
            assert_eq!(same, p);
            let once = shear(&p, 1.0, 2);
            let back = shear_inverse(&once, 1.0, 2);
            assert!((back.x - p.x).norm() < 1e-14);
        }
    }

    #[test]
    fn unshear_after_clutching_recovers_the_chart_change() {
        // on |t| = 1 the transition y = t^2 x + t v^d is the clutching map
        // followed by the inverse shear
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        for d in 1..4 {
            for _ in 0..200 {
                let mut p = sample_chart_a(&mut rng, 1.0);
                if p.t.norm() < 1e-3 {
                    p.t = c(0.6, 0.8);
                }
                p.t /= p.t.norm();
                let transitioned = chart_change(&p, d).unwrap();
                let via_clutch = shear_inverse(&clutching(&p), 1.0, d);
                assert!((via_clutch.x - transitioned.y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_field_at_the_reference_point() {
        for convention in [FrameConvention::Literal, FrameConvention::Conjugate] {
            for d in 1..4 {
                let frame = frame_field(c(1.0, 0.0), c(0.0, 0.0), d, convention).unwrap();
                assert_eq!(frame.vectors[0], Vector4::new(0.0, 0.0, 1.0, 0.0));
                assert_eq!(frame.vectors[1], Vector4::new(0.0, 0.0, 0.0, -1.0));
                assert_eq!(frame.vectors[2], Vector4::new(1.0, 0.0, 0.0, 0.0));
                assert_eq!(frame.vectors[3], Vector4::new(0.0, 1.0, 0.0, 0.0));
                assert!((frame.det + 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conjugate_determinant_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        for d in 1..4 {
            for _ in 0..10_000 {
                let q = crate::quat::sample_s3(&mut rng);
                let (x, v) = q.to_complex_pair();
                let frame = frame_field(x, v, d, FrameConvention::Conjugate).unwrap();
                let expect = (x.norm_sqr() + v.powu(d).norm_sqr()).powi(2);
                assert!((frame.det.abs() - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conjugate_frame_is_orthogonal_with_equal_lengths() {
        // the conjugate gram matrix is (|x|^2 + |v^d|^2) I, so the frame
        // only needs normalization
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..1000 {
            let q = crate::quat::sample_s3(&mut rng);
            let (x, v) = q.to_complex_pair();
            let d = 2;
            let frame = frame_field(x, v, d, FrameConvention::Conjugate).unwrap();
            let scale = x.norm_sqr() + v.powu(d).norm_sqr();
            let expect = Matrix4::identity() * scale;
            assert!((frame.gram - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn literal_frame_degenerates_on_the_witness_locus() {
        for d in 1..4u32 {
            let (x, v) = literal_degeneracy_witness(d);
            // the witness lies on the unit sphere and on x^2 + v^(2d) = 0
            assert!((x.norm_sqr() + v.norm_sqr() - 1.0).abs() < 1e-12);
            assert!((x * x + v.powu(2 * d)).norm() < 1e-12);
            let frame = frame_field(x, v, d, FrameConvention::Literal).unwrap();
            assert!(frame.det.abs() < DEGENERACY_DET);
        }
        // spot value: d = 1 gives v = 1/sqrt(2), x = i/sqrt(2)
        let (x, v) = literal_degeneracy_witness(1);
        assert!((v.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((x - Complex64::i() * std::f64::consts::FRAC_1_SQRT_2).norm() < 1e-9);
    }

    #[test]
    fn frame_matrix_is_orthogonal_and_swap_is_d_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut flags = Vec::new();
        for d in 1..4 {
            for _ in 0..1000 {
                let q = crate::quat::sample_s3(&mut rng);
                let (x, v) = q.to_complex_pair();
                let (rot, _) = frame_matrix(x, v, d, FrameConvention::Conjugate).unwrap();
                assert!(Rot4::try_new(*rot.matrix()).is_ok());
            }
            flags.push(orientation_swap_applied(d, FrameConvention::Conjugate).unwrap());
        }
        assert!(flags.iter().all(|&f| f == flags[0]));
    }

    #[test]
    fn frame_map_factors_through_the_branched_cover() {
        // frame_map(d) at (x, v) equals frame_map(1) at normalized (x, v^d)
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for d in 2..4 {
            let fd = frame_map(d, FrameConvention::Conjugate).unwrap();
            let f1 = frame_map(1, FrameConvention::Conjugate).unwrap();
            for _ in 0..200 {
                let q = crate::quat::sample_s3(&mut rng);
                let (x, v) = q.to_complex_pair();
                let scale = (x.norm_sqr() + v.powu(d).norm_sqr()).sqrt();
                let covered =
                    UnitQuaternion::from_complex_pair(x / scale, v.powu(d) / scale).unwrap();
                let lhs = fd.eval(&q);
                let rhs = f1.eval(&covered);
                assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn literal_frame_map_is_refused_with_a_witness() {
        match frame_map(2, FrameConvention::Literal) {
            Err(Error::DegenerateFrameConvention { witness_det, .. }) => {
                assert!(witness_det < DEGENERACY_DET);
            }
            Err(other) => panic!("expected degeneracy refusal, got {other:?}"),
            Ok(_) => panic!("expected degeneracy refusal, got a handle"),
        }
    }

    #[test]
    fn slice_jacobian_is_the_coordinate_inclusion() {
        let sv = slice_singular_values();
        assert_eq!(sv.len(), 4);
        for s in sv {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn immersion_sweep_chart_a() {
        let report = immersion_check(1, Chart::A, 10_000, 5).unwrap();
        assert!(report.min_sigma6 > IMMERSION_SIGMA);
        assert!(report.max_residual < 1e-11);
        assert!(report.min_image_separation > 1e-9);
    }

    #[test]
    fn immersion_sweep_chart_b() {
        let report = immersion_check(1, Chart::B, 10_000, 6).unwrap();
        assert!(report.min_sigma6 > IMMERSION_SIGMA);
        assert!(report.max_residual < 1e-11);
    }

    #[test]
    fn link_class_small_degrees() {
        let mut signs = Vec::new();
        for d in 1..3u32 {
            let lc = link_class(d, 100_000, 40 + d as u64).unwrap();
            assert_eq!(lc.s3_component.rounded.unsigned_abs(), d as u64);
            assert_eq!(lc.mod2, (d % 2) as u8);
            signs.push(lc.s3_component.rounded.signum());
        }
        assert_eq!(signs[0], signs[1]);
    }

    #[test]
    fn pair_degrees_cross_check_the_evaluation_fast_path() {
        // ev(A) = q_L q_R~, so the evaluation degree must equal a - b; the
        // two routes share nothing but the frame map itself
        for d in 1..3u32 {
            let lc = link_class(d, 100_000, 90 + d as u64).unwrap();
            let pd = link_class_pair_degrees(d, 100_000, 90 + d as u64).unwrap();
            assert_eq!(
                pd.s3_component(),
                lc.s3_component.rounded,
                "d = {d}: pair degrees ({}, {})",
                pd.left.rounded,
                pd.right.rounded
            );
            assert_eq!(pd.mod2(), (d % 2) as u8);
        }
    }

    #[test]
    fn link_class_rejects_out_of_range_degree() {
        assert!(matches!(
            link_class(0, 100_000, 1),
            Err(Error::UnsupportedLinkDegree(0))
        ));
        assert!(matches!(
            link_class(9, 100_000, 1),
            Err(Error::UnsupportedLinkDegree(9))
        ));
    }

    #[test]
    fn exports_have_headers_and_rows() {
        let mut buf = Vec::new();
        export_frame_table(&mut buf, 2, FrameConvention::Conjugate, 8, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 2);
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 8);

        let mut buf = Vec::new();
        export_chart_table(&mut buf, Chart::A, 1, 5, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
    }
}
