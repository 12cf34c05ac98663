//! Machine-readable run reports. The JSON schema has a stable key order
//! (struct declaration order plus sorted parameter maps), so two runs with
//! the same command and seed produce byte-identical files except for the
//! elapsed-time fields.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use regulink::invariants::{IntegerEstimate, BATCH_SIZE, HOPF_SIGN};

/// One verified claim: an estimate against its expected integer.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    /// Label of the mathematical claim this check verifies.
    pub anchor: String,
    pub raw: f64,
    pub rounded: Option<i64>,
    pub residual: Option<f64>,
    pub stderr: Option<f64>,
    pub pass: bool,
}

impl CheckEntry {
    pub fn from_estimate(
        name: impl Into<String>,
        anchor: impl Into<String>,
        estimate: &IntegerEstimate,
        expected: Option<i64>,
    ) -> Self {
        let pass = estimate.accepted() && expected.is_none_or(|e| estimate.rounded == e);
        CheckEntry {
            name: name.into(),
            anchor: anchor.into(),
            raw: estimate.raw,
            rounded: Some(estimate.rounded),
            residual: Some(estimate.residual),
            stderr: Some(estimate.std_error),
            pass,
        }
    }

    pub fn from_bound(
        name: impl Into<String>,
        anchor: impl Into<String>,
        raw: f64,
        pass: bool,
    ) -> Self {
        CheckEntry {
            name: name.into(),
            anchor: anchor.into(),
            raw,
            rounded: None,
            residual: None,
            stderr: None,
            pass,
        }
    }
}

/// Snapshot of the fixed conventions behind every reported number.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub base_point: [f64; 3],
    pub r3_identification: &'static str,
    pub degree_m_map: &'static str,
    pub s3_tangent_frame: &'static str,
    pub loop_orientation: &'static str,
    pub hopf_sign: i64,
    pub stabilization: &'static str,
    pub frame_convention: String,
    pub batch_size: u64,
}

impl Conventions {
    pub fn snapshot(frame_convention: &str) -> Self {
        Conventions {
            base_point: regulink::quat::BASE_POINT,
            r3_identification: "(i, j, k) <-> (e1, e2, e3)",
            degree_m_map: "(z1, z2) -> (z1^m, z2)/|.|",
            s3_tangent_frame: "(iq, jq, kq)",
            loop_orientation: "det[k, w1, w2] > 0 against the oriented basis of the value",
            hopf_sign: HOPF_SIGN as i64,
            stabilization: "stable class = a + b; kernel generated by (1, -1)",
            frame_convention: frame_convention.to_string(),
            batch_size: BATCH_SIZE,
        }
    }
}

/// A full run report; field order is the wire order.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub checks: Vec<CheckEntry>,
    pub seed: u64,
    pub samples: u64,
    pub elapsed_ms: u64,
    pub conventions: Conventions,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Print a human summary: one line per check plus a verdict.
    pub fn print_summary(&self) {
        for check in &self.checks {
            let status = if check.pass { "pass" } else { "FAIL" };
            match check.rounded {
                Some(r) => println!(
                    "  [{status}] {name}: raw {raw:.6} -> {r} (residual {res:.2e}, stderr {se:.2e})  # {anchor}",
                    name = check.name,
                    raw = check.raw,
                    res = check.residual.unwrap_or(0.0),
                    se = check.stderr.unwrap_or(0.0),
                    anchor = check.anchor,
                ),
                None => println!(
                    "  [{status}] {name}: {raw:.6e}  # {anchor}",
                    name = check.name,
                    raw = check.raw,
                    anchor = check.anchor,
                ),
            }
        }
        let verdict = if self.all_pass() { "PASS" } else { "FAIL" };
        println!(
            "{command}: {verdict} ({n} checks, {ms} ms)",
            command = self.command,
            n = self.checks.len(),
            ms = self.elapsed_ms
        );
    }
}

/// Write reports as a JSON array (one report per suite or command).
pub fn write_reports(path: &Path, reports: &[RunReport]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(reports).expect("reports serialize");
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}
