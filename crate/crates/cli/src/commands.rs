//! Implementations of the CLI subcommands and the verification suites.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde_json::{json, Value};

use regulink::curves::{great_circle, trace_preimage, TraceConfig};
use regulink::invariants::{degree_with_growth, hopf_invariant, pick_regular_pair};
use regulink::maps::{evaluated_family, hopf_fibration, identity_map, left_translation, power_map};
use regulink::quat::{sample_s3, PointS2, UnitQuaternion};
use regulink::singularity::{
    chart_change, embed_chart_a, embed_chart_b, export_frame_table, frame_field, frame_map,
    immersion_check, link_class, literal_degeneracy_witness, Chart, ChartPointA, ChartPointB,
    FrameConvention,
};
use regulink::so4::{
    evaluation_map, isoclinic_split, left_mult_family, pair_degrees, rot4_from_pair,
    stabilizer_family,
};
use regulink::Error as CoreError;

use crate::report::{CheckEntry, Conventions, RunReport};

/// Failure cases with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: bad arguments or parameters outside their domains.
    Usage(String),
    /// Exit 3: file system problems.
    Io(String),
    /// Exit 4: numerically inconclusive; more samples or a different
    /// configuration might succeed.
    Inconclusive(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Inconclusive(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Io(m) | Failure::Inconclusive(m) => m,
        }
    }
}

pub fn classify(e: CoreError) -> Failure {
    match e {
        CoreError::UnsupportedExponent(_)
        | CoreError::UnsupportedLinkDegree(_)
        | CoreError::TooFewSamples { .. }
        | CoreError::BadTraceConfig { .. }
        | CoreError::StepOutOfRange(_)
        | CoreError::OutsideChart { .. }
        | CoreError::NotUnit { .. } => Failure::Usage(e.to_string()),
        other => Failure::Inconclusive(other.to_string()),
    }
}

type CmdResult = Result<RunReport, Failure>;

fn params_from(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

/// `hopf`: the invariant of the evaluated rotation family over three
/// regular-value pairs; pass iff every pair yields `m`.
pub fn cmd_hopf(m: u32, samples: u32, seed: u64, step: f64, workers: Value) -> CmdResult {
    if samples < 10 {
        return Err(Failure::Usage(format!(
            "--samples {samples} below the minimum 10"
        )));
    }
    let started = Instant::now();
    let f = evaluated_family(m).map_err(classify)?;
    let mut checks = Vec::new();
    for attempt in 0..3u64 {
        let cfg = TraceConfig {
            step,
            seed: seed.wrapping_add(attempt),
            seed_budget: samples,
            ..TraceConfig::default()
        };
        cfg.validate().map_err(classify)?;
        let (v1, v2) = pick_regular_pair(&f, cfg.seed, attempt).map_err(classify)?;
        let estimate = hopf_invariant(&f, v1, v2, &cfg).map_err(classify)?;
        checks.push(CheckEntry::from_estimate(
            format!("hopf invariant, value pair {}", attempt + 1),
            format!("hopf(eval_N . rotation_family({m})) == {m}"),
            &estimate,
            Some(m as i64),
        ));
    }
    Ok(RunReport {
        command: "hopf".into(),
        params: params_from(&[
            ("m", json!(m)),
            ("samples", json!(samples)),
            ("step", json!(step)),
            ("workers", workers),
        ]),
        checks,
        seed,
        samples: samples as u64,
        elapsed_ms: started.elapsed().as_millis() as u64,
        conventions: Conventions::snapshot("conjugate"),
    })
}

/// `degree`: estimate the degree of a registered self-map of `S^3`.
pub fn cmd_degree(map_key: &str, samples: u64, seed: u64, workers: Value) -> CmdResult {
    let started = Instant::now();
    let (map, expected, anchor) = registry_lookup(map_key)?;
    let estimate = degree_with_growth(&map, samples, 1_000_000, seed).map_err(classify)?;
    let checks = vec![CheckEntry::from_estimate(
        format!("degree of {map_key}"),
        anchor,
        &estimate,
        expected,
    )];
    Ok(RunReport {
        command: "degree".into(),
        params: params_from(&[
            ("map", json!(map_key)),
            ("samples", json!(samples)),
            ("workers", workers),
        ]),
        checks,
        seed,
        samples: estimate.samples,
        elapsed_ms: started.elapsed().as_millis() as u64,
        conventions: Conventions::snapshot("conjugate"),
    })
}

fn registry_lookup(
    key: &str,
) -> Result<
    (
        regulink::maps::MapHandle<UnitQuaternion>,
        Option<i64>,
        String,
    ),
    Failure,
> {
    if key == "identity" {
        return Ok((identity_map(), Some(1), "deg(identity) == 1".into()));
    }
    if key == "left-mult" {
        let c = UnitQuaternion::from_unnormalized(1.0, 2.0, 3.0, 4.0).expect("fixed unit");
        return Ok((
            left_translation(c),
            Some(1),
            "deg(left multiplication) == 1".into(),
        ));
    }
    if let Some(m) = key.strip_prefix("pow:") {
        let m: u32 = m
            .parse()
            .map_err(|_| Failure::Usage(format!("bad exponent in map key `{key}`")))?;
        let map = power_map(m).map_err(classify)?;
        return Ok((map, Some(m as i64), format!("deg(pow_{m}) == {m}")));
    }
    if let Some(d) = key.strip_prefix("eval-frame:") {
        let d: u32 = d
            .parse()
            .map_err(|_| Failure::Usage(format!("bad degree in map key `{key}`")))?;
        let frame = frame_map(d, FrameConvention::Conjugate).map_err(classify)?;
        return Ok((
            evaluation_map(&frame),
            None,
            format!("|deg(ev . frame_map({d}))| == {d}"),
        ));
    }
    Err(Failure::Usage(format!(
        "unknown map key `{key}`; expected identity, pow:m, eval-frame:d, or left-mult"
    )))
}

/// `link-class`: the regular-homotopy integer and its mod-2 image for the
/// link of degree `d`, plus chart residual and gluing checks.
pub fn cmd_link_class(
    d: u32,
    convention: FrameConvention,
    samples: u64,
    seed: u64,
    out: Option<&Path>,
    workers: Value,
) -> CmdResult {
    if d == 0 || d > 6 {
        return Err(Failure::Usage(format!("--d {d} outside [1, 6]")));
    }
    let started = Instant::now();
    let mut checks = Vec::new();

    if convention == FrameConvention::Literal {
        // the literal frame degenerates on the sphere; report the located
        // degeneracy instead of an estimate
        let (x, v) = literal_degeneracy_witness(d);
        let frame = frame_field(x, v, d, convention).map_err(classify)?;
        checks.push(CheckEntry::from_bound(
            "literal frame determinant at the witness",
            "literal frame degenerates on x^2 + v^(2d) = 0",
            frame.det.abs(),
            frame.det.abs() < 1e-8,
        ));
        let report = RunReport {
            command: "link-class".into(),
            params: params_from(&[
                ("d", json!(d)),
                ("convention", json!(convention.label())),
                ("samples", json!(samples)),
                ("workers", workers),
            ]),
            checks,
            seed,
            samples: 0,
            elapsed_ms: started.elapsed().as_millis() as u64,
            conventions: Conventions::snapshot(convention.label()),
        };
        report.print_summary();
        return Err(Failure::Inconclusive(
            "the requested frame convention degenerates on the sphere; no class estimate"
                .to_string(),
        ));
    }

    // parametrization residual and gluing checks at this d
    let residual = chart_residual_sweep(d, 2_000, seed);
    checks.push(CheckEntry::from_bound(
        "max |g| over chart samples",
        "g(chart image) == 0",
        residual.0,
        residual.0 < 1e-12,
    ));
    checks.push(CheckEntry::from_bound(
        "max relative gluing defect",
        "charts agree on the overlap",
        residual.1,
        residual.1 < 1e-10,
    ));

    let lc = link_class(d, samples, seed).map_err(classify)?;
    checks.push(CheckEntry::from_estimate(
        "evaluation degree (pi_3(S^3) component)",
        format!("|component| == {d}"),
        &lc.s3_component,
        None,
    ));
    checks.push(CheckEntry::from_bound(
        "absolute component equals d",
        format!("|component| == {d}"),
        lc.s3_component.rounded.unsigned_abs() as f64,
        lc.s3_component.rounded.unsigned_abs() == d as u64,
    ));
    checks.push(CheckEntry::from_bound(
        "mod-2 class",
        "mod2(component) == d mod 2",
        lc.mod2 as f64,
        lc.mod2 == (d % 2) as u8,
    ));

    if let Some(path) = out {
        let file = std::fs::File::create(path).map_err(|e| Failure::Io(format!("--out: {e}")))?;
        export_frame_table(file, d, convention, 256, seed)
            .map_err(|e| Failure::Io(e.to_string()))?;
        let chart_path = path.with_extension("charts.txt");
        let file = std::fs::File::create(&chart_path)
            .map_err(|e| Failure::Io(format!("--out charts: {e}")))?;
        regulink::singularity::export_chart_table(file, Chart::A, d, 256, seed)
            .map_err(|e| Failure::Io(e.to_string()))?;
    }

    Ok(RunReport {
        command: "link-class".into(),
        params: params_from(&[
            ("d", json!(d)),
            ("convention", json!(convention.label())),
            ("samples", json!(samples)),
            ("workers", workers),
        ]),
        checks,
        seed,
        samples: lc.s3_component.samples,
        elapsed_ms: started.elapsed().as_millis() as u64,
        conventions: Conventions::snapshot(convention.label()),
    })
}

fn chart_residual_sweep(d: u32, n: usize, seed: u64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut disk = |r: f64| loop {
        let re = rng.gen_range(-r..r);
        let im = rng.gen_range(-r..r);
        if re * re + im * im <= r * r {
            return Complex64::new(re, im);
        }
    };
    let mut max_residual: f64 = 0.0;
    let mut max_gluing: f64 = 0.0;
    for _ in 0..n {
        let mut t = disk(1.0);
        let (x, v) = loop {
            let x = disk(1.0);
            let v = disk(1.0);
            if x.norm_sqr() + v.norm_sqr() >= 1e-2 {
                break (x, v);
            }
        };
        let a = ChartPointA { t, x, v };
        max_residual = max_residual.max(embed_chart_a(&a, d).defining_residual(d));
        let b = ChartPointB {
            t_prime: t,
            y: x,
            v,
        };
        max_residual = max_residual.max(embed_chart_b(&b, d).defining_residual(d));
        if t.norm() < 0.1 {
            t += Complex64::new(0.5, 0.0);
        }
        let a = ChartPointA { t, x, v };
        if let Ok(bb) = chart_change(&a, d) {
            let ia = embed_chart_a(&a, d);
            let ib = embed_chart_b(&bb, d);
            max_gluing = max_gluing.max(ia.distance(&ib) / ia.coordinate_norm().max(1.0));
        }
    }
    (max_residual, max_gluing)
}

/// `trace`: export the fiber of the evaluated family over a value.
pub fn cmd_trace(
    m: u32,
    value: PointS2,
    out: &Path,
    step: f64,
    samples: u32,
    seed: u64,
) -> Result<RunReport, Failure> {
    let started = Instant::now();
    let cfg = TraceConfig {
        step,
        seed,
        seed_budget: samples.max(16),
        ..TraceConfig::default()
    };
    cfg.validate().map_err(classify)?;
    let f = evaluated_family(m).map_err(classify)?;
    let loops = trace_preimage(&f, value, &cfg).map_err(classify)?;

    let mut file = std::fs::File::create(out).map_err(|e| Failure::Io(format!("--out: {e}")))?;
    let mut checks = Vec::new();
    for (k, l) in loops.iter().enumerate() {
        use std::io::Write;
        writeln!(file, "# component: {}", k + 1).map_err(|e| Failure::Io(e.to_string()))?;
        l.export(&mut file, f.name(), value, &cfg, None)
            .map_err(|e| Failure::Io(e.to_string()))?;
        checks.push(CheckEntry::from_bound(
            format!("component {} closure gap", k + 1),
            "traced loop closes within one step",
            l.closure_gap(),
            l.closure_gap() < cfg.step,
        ));
    }
    Ok(RunReport {
        command: "trace".into(),
        params: params_from(&[
            ("m", json!(m)),
            ("value", json!(value.to_vector().as_slice())),
            ("step", json!(step)),
            ("samples", json!(samples)),
            ("out", json!(out.display().to_string())),
        ]),
        checks,
        seed,
        samples: loops.iter().map(|l| l.len() as u64).sum(),
        elapsed_ms: started.elapsed().as_millis() as u64,
        conventions: Conventions::snapshot("conjugate"),
    })
}

/// Verification suites runnable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LemmaA,
    Lemma1,
    Lemma2,
    Theorem3,
}

impl Suite {
    pub fn label(&self) -> &'static str {
        match self {
            Suite::LemmaA => "lemmaA",
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Theorem3 => "theorem3",
        }
    }
}

/// Run one suite and report every check.
pub fn run_suite(suite: Suite, samples: u64, seed: u64, workers: Value) -> CmdResult {
    let started = Instant::now();
    let checks = match suite {
        Suite::LemmaA => suite_lemma_a(seed).map_err(classify)?,
        Suite::Lemma1 => suite_lemma_1(samples, seed).map_err(classify)?,
        Suite::Lemma2 => suite_lemma_2(samples, seed).map_err(classify)?,
        Suite::Theorem3 => suite_theorem_3(samples, seed).map_err(classify)?,
    };
    Ok(RunReport {
        command: format!("verify:{}", suite.label()),
        params: params_from(&[
            ("samples", json!(samples)),
            ("suite", json!(suite.label())),
            ("workers", workers),
        ]),
        checks,
        seed,
        samples,
        elapsed_ms: started.elapsed().as_millis() as u64,
        conventions: Conventions::snapshot("conjugate"),
    })
}

fn suite_lemma_a(seed: u64) -> Result<Vec<CheckEntry>, CoreError> {
    let mut checks = Vec::new();

    // fiducial: the Hopf fibration itself, with its closed-form fibers
    let hopf = hopf_fibration();
    let cfg = TraceConfig {
        seed,
        ..TraceConfig::default()
    };
    let est = hopf_invariant(
        &hopf,
        PointS2::base_point(),
        PointS2::base_point().antipode(),
        &cfg,
    )?;
    checks.push(CheckEntry::from_estimate(
        "hopf fibration invariant",
        "hopf(hopf_fibration) == +1",
        &est,
        Some(1),
    ));
    let loops_n = trace_preimage(&hopf, PointS2::base_point(), &cfg)?;
    let circle_n = great_circle(UnitQuaternion::ONE, UnitQuaternion::I, 40_000);
    let h = loops_n[0].hausdorff(&circle_n);
    checks.push(CheckEntry::from_bound(
        "fiber over N vs stabilizer circle",
        "traced fiber matches the closed-form great circle",
        h,
        h < 1e-5,
    ));
    let loops_s = trace_preimage(&hopf, PointS2::base_point().antipode(), &cfg)?;
    let circle_s = great_circle(UnitQuaternion::J, UnitQuaternion::K, 40_000);
    let h = loops_s[0].hausdorff(&circle_s);
    checks.push(CheckEntry::from_bound(
        "fiber over -N vs coset circle",
        "traced fiber matches the closed-form great circle",
        h,
        h < 1e-5,
    ));

    for m in 1..=3u32 {
        let f = evaluated_family(m)?;
        for attempt in 0..3u64 {
            let cfg = TraceConfig {
                seed: seed.wrapping_add(1000 * m as u64 + attempt),
                ..TraceConfig::default()
            };
            let (v1, v2) = pick_regular_pair(&f, cfg.seed, attempt)?;
            let est = hopf_invariant(&f, v1, v2, &cfg)?;
            checks.push(CheckEntry::from_estimate(
                format!("hopf invariant m = {m}, pair {}", attempt + 1),
                format!("hopf(eval_N . rotation_family({m})) == {m}"),
                &est,
                Some(m as i64),
            ));
        }
    }
    Ok(checks)
}

fn suite_lemma_1(samples: u64, seed: u64) -> Result<Vec<CheckEntry>, CoreError> {
    use rand::SeedableRng;
    let mut checks = Vec::new();

    // isoclinic split round trip
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = sample_s3(&mut rng);
        let q = sample_s3(&mut rng);
        let pair = isoclinic_split(&rot4_from_pair(p, q), None)?;
        let direct = pair.left.distance(p).max(pair.right.distance(q));
        let negated = pair.left.distance(-p).max(pair.right.distance(-q));
        worst = worst.max(direct.min(negated));
    }
    checks.push(CheckEntry::from_bound(
        "isoclinic split round trip",
        "split(rot(p, q)) == (p, q) up to simultaneous sign",
        worst,
        worst < 1e-9,
    ));

    for m in 1..=2u32 {
        let family = stabilizer_family(m)?;
        let pd = pair_degrees(&family, samples, seed.wrapping_add(m as u64))?;
        checks.push(CheckEntry::from_estimate(
            format!("stabilizer family m = {m}, left degree"),
            format!("pair degrees of the stabilizer family == ({m}, {m})"),
            &pd.left,
            Some(m as i64),
        ));
        checks.push(CheckEntry::from_estimate(
            format!("stabilizer family m = {m}, right degree"),
            format!("pair degrees of the stabilizer family == ({m}, {m})"),
            &pd.right,
            Some(m as i64),
        ));
        checks.push(CheckEntry::from_bound(
            format!("stable class m = {m}"),
            format!("stable class == {}", 2 * m),
            pd.stable_class() as f64,
            pd.stable_class() == 2 * m as i64,
        ));
        checks.push(CheckEntry::from_bound(
            format!("mod-2 class m = {m}"),
            "stabilizer image vanishes mod 2",
            pd.mod2() as f64,
            pd.mod2() == 0,
        ));
    }

    let lm = pair_degrees(&left_mult_family(), samples, seed.wrapping_add(9))?;
    checks.push(CheckEntry::from_estimate(
        "left multiplication, left degree",
        "pair degrees of left multiplication == (1, 0)",
        &lm.left,
        Some(1),
    ));
    checks.push(CheckEntry::from_estimate(
        "left multiplication, right degree",
        "pair degrees of left multiplication == (1, 0)",
        &lm.right,
        Some(0),
    ));
    Ok(checks)
}

fn suite_lemma_2(samples: u64, seed: u64) -> Result<Vec<CheckEntry>, CoreError> {
    let mut checks = Vec::new();

    // the twist restriction: identity base component, fiber of class m
    let twist = regulink::maps::twist_restriction(2)?;
    let base = degree_with_growth(&twist.base, samples.max(20_000), 1_000_000, seed)?;
    checks.push(CheckEntry::from_estimate(
        "twist base component degree",
        "deg(first component) == 1",
        &base,
        Some(1),
    ));
    for m in 1..=2u32 {
        let twist = regulink::maps::twist_restriction(m)?;
        let cfg = TraceConfig {
            seed: seed.wrapping_add(m as u64),
            ..TraceConfig::default()
        };
        let est = regulink::invariants::hopf_invariant_auto(&twist.fiber, &cfg)?;
        checks.push(CheckEntry::from_estimate(
            format!("twist fiber component m = {m}"),
            format!("hopf(second component) == {m}"),
            &est,
            Some(m as i64),
        ));
    }

    // pointwise products add degrees
    for (a, b) in [(1u32, 1u32), (1, 2)] {
        let prod = regulink::maps::pointwise_product(&power_map(a)?, &power_map(b)?);
        let est = degree_with_growth(&prod, samples.max(200_000), 1_000_000, seed)?;
        checks.push(CheckEntry::from_estimate(
            format!("degree of pow_{a} * pow_{b}"),
            "deg(f * g) == deg(f) + deg(g)",
            &est,
            Some((a + b) as i64),
        ));
    }
    Ok(checks)
}

fn suite_theorem_3(samples: u64, seed: u64) -> Result<Vec<CheckEntry>, CoreError> {
    use rand::SeedableRng;
    let mut checks = Vec::new();

    for d in 1..=3u32 {
        let (residual, gluing) = chart_residual_sweep(d, 10_000, seed.wrapping_add(d as u64));
        checks.push(CheckEntry::from_bound(
            format!("chart residual sweep d = {d}"),
            "g(chart image) == 0",
            residual,
            residual < 1e-12,
        ));
        checks.push(CheckEntry::from_bound(
            format!("gluing defect d = {d}"),
            "charts agree on the overlap",
            gluing,
            gluing < 1e-10,
        ));
    }

    for chart in [Chart::A, Chart::B] {
        match immersion_check(1, chart, 10_000, seed) {
            Ok(report) => checks.push(CheckEntry::from_bound(
                format!("immersion sigma_6, chart {chart:?}"),
                "sixth singular value stays above 1e-6",
                report.min_sigma6,
                report.min_sigma6 > 1e-6,
            )),
            Err(CoreError::RankDrop { sigma }) => checks.push(CheckEntry::from_bound(
                format!("immersion sigma_6, chart {chart:?}"),
                "sixth singular value stays above 1e-6",
                sigma,
                false,
            )),
            Err(e) => return Err(e),
        }
    }

    // frame determinant bound and literal degeneracy
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for d in 1..=3u32 {
        let mut min_det = f64::INFINITY;
        let mut min_bound = f64::INFINITY;
        for _ in 0..100_000 {
            let q = sample_s3(&mut rng);
            let (x, v) = q.to_complex_pair();
            let frame = frame_field(x, v, d, FrameConvention::Conjugate)?;
            min_det = min_det.min(frame.det.abs());
            min_bound = min_bound.min((x.norm_sqr() + v.powu(d).norm_sqr()).powi(2));
        }
        checks.push(CheckEntry::from_bound(
            format!("conjugate frame det lower bound d = {d}"),
            "min |det| >= 0.9 min (|x|^2 + |v^d|^2)^2",
            min_det / min_bound,
            min_det >= 0.9 * min_bound,
        ));
        let (x, v) = literal_degeneracy_witness(d);
        let frame = frame_field(x, v, d, FrameConvention::Literal)?;
        checks.push(CheckEntry::from_bound(
            format!("literal degeneracy witness d = {d}"),
            "literal frame det == 0 on x^2 + v^(2d) = 0",
            frame.det.abs(),
            frame.det.abs() < 1e-8,
        ));
    }

    // the class extraction and its mod-2 alternation
    let mut signs = Vec::new();
    let mut mod2 = Vec::new();
    for d in 1..=4u32 {
        let lc = link_class(d, samples, seed.wrapping_add(100 + d as u64))?;
        checks.push(CheckEntry::from_estimate(
            format!("link component d = {d}"),
            format!("|component| == {d}"),
            &lc.s3_component,
            None,
        ));
        let ok = lc.s3_component.rounded.unsigned_abs() == d as u64;
        checks.push(CheckEntry::from_bound(
            format!("absolute component d = {d}"),
            format!("|component| == {d}"),
            lc.s3_component.rounded.unsigned_abs() as f64,
            ok,
        ));
        signs.push(lc.s3_component.rounded.signum());
        mod2.push(lc.mod2);
    }
    checks.push(CheckEntry::from_bound(
        "sign consistency across d",
        "component sign is d-independent",
        signs.iter().map(|s| *s as f64).sum::<f64>().abs(),
        signs.iter().all(|&s| s == signs[0]),
    ));
    checks.push(CheckEntry::from_bound(
        "mod-2 alternation",
        "mod2(d) == (1, 0, 1, 0) for d = 1..4",
        mod2.iter().map(|&b| b as f64).sum(),
        mod2 == vec![1, 0, 1, 0],
    ));
    Ok(checks)
}
