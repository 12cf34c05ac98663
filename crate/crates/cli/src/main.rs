//! `regulink`: verify integer homotopy invariants of explicit smooth maps
//! and extract the regular-homotopy data of singularity links.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::{classify, cmd_degree, cmd_hopf, cmd_link_class, cmd_trace, run_suite, Failure};
use regulink::quat::PointS2;
use regulink::singularity::FrameConvention;
use report::{write_reports, RunReport};

#[derive(Parser)]
#[command(
    name = "regulink",
    version,
    about = "Numerical homotopy invariants: mapping degrees, Hopf invariants, isoclinic pair degrees, and singularity-link classes",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// RNG seed recorded in every report.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Write the JSON run report(s) to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Worker threads; falls back to REGULINK_WORKERS, then all cores.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Hopf invariant of the evaluated rotation family over three
    /// regular-value pairs.
    Hopf {
        /// Exponent of the family (class in pi_3(SO_3)).
        #[arg(long)]
        m: u32,
        /// Seed budget for locating fiber components.
        #[arg(long, default_value_t = 64)]
        samples: u32,
        /// Tracer step size.
        #[arg(long, default_value_t = 5e-3)]
        step: f64,
    },
    /// Mapping degree of a registered self-map of S^3.
    Degree {
        /// Map key: identity, pow:m, eval-frame:d, or left-mult.
        map: String,
        /// Monte-Carlo sample budget (grown up to 10^6 if inconclusive).
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
    },
    /// Regular-homotopy component and mod-2 class of the link of degree d.
    LinkClass {
        #[arg(long)]
        d: u32,
        /// Normal frame convention.
        #[arg(long, default_value = "conjugate")]
        convention: ConventionArg,
        #[arg(long, default_value_t = 150_000)]
        samples: u64,
        /// Also export a sampled frame table to this path.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Trace the fiber of the evaluated family over a value of S^2 and
    /// export the vertex table.
    Trace {
        #[arg(long)]
        m: u32,
        /// Target value as three comma-separated coordinates, e.g. 1,0,0.
        #[arg(long, allow_hyphen_values = true)]
        value: String,
        /// Output path for the vertex table.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, default_value_t = 5e-3)]
        step: f64,
        /// Seed budget for locating fiber components.
        #[arg(long, default_value_t = 64)]
        samples: u32,
    },
    /// Run a verification suite and exit 0 iff every check passes.
    Verify {
        #[arg(long, default_value = "all")]
        suite: SuiteArg,
        /// Monte-Carlo sample budget for the degree-based checks.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConventionArg {
    /// Frame built from the holomorphic gradient; degenerates on a
    /// curve on the sphere.
    Paper,
    /// Conjugated-gradient frame; nondegenerate.
    Conjugate,
}

impl From<ConventionArg> for FrameConvention {
    fn from(c: ConventionArg) -> FrameConvention {
        match c {
            ConventionArg::Paper => FrameConvention::Literal,
            ConventionArg::Conjugate => FrameConvention::Conjugate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    #[value(name = "lemmaA")]
    LemmaA,
    Lemma1,
    Lemma2,
    Theorem3,
}

fn parse_value(text: &str) -> Result<PointS2, Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Failure::Usage(format!(
            "--value expects three comma-separated coordinates, got `{text}`"
        )));
    }
    let mut coords = [0.0f64; 3];
    for (k, p) in parts.iter().enumerate() {
        coords[k] = p
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("bad coordinate `{p}` in --value")))?;
    }
    PointS2::new(coords[0], coords[1], coords[2]).map_err(classify)
}

fn resolve_workers(cli: Option<usize>) -> Option<usize> {
    cli.or_else(|| {
        std::env::var("REGULINK_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn run(cli: Cli) -> Result<Vec<RunReport>, Failure> {
    let workers = resolve_workers(cli.workers);
    let workers_value = match workers {
        Some(n) => json!(n),
        None => json!("auto"),
    };
    let seed = cli.seed;

    let body = move || -> Result<Vec<RunReport>, Failure> {
        match cli.command {
            Command::Hopf { m, samples, step } => {
                Ok(vec![cmd_hopf(m, samples, seed, step, workers_value)?])
            }
            Command::Degree { map, samples } => {
                Ok(vec![cmd_degree(&map, samples, seed, workers_value)?])
            }
            Command::LinkClass {
                d,
                convention,
                samples,
                out,
            } => Ok(vec![cmd_link_class(
                d,
                convention.into(),
                samples,
                seed,
                out.as_deref(),
                workers_value,
            )?]),
            Command::Trace {
                m,
                value,
                out,
                step,
                samples,
            } => {
                let v = parse_value(&value)?;
                Ok(vec![cmd_trace(m, v, &out, step, samples, seed)?])
            }
            Command::Verify { suite, samples } => {
                let suites = match suite {
                    SuiteArg::All => vec![
                        commands::Suite::LemmaA,
                        commands::Suite::Lemma1,
                        commands::Suite::Lemma2,
                        commands::Suite::Theorem3,
                    ],
                    SuiteArg::LemmaA => vec![commands::Suite::LemmaA],
                    SuiteArg::Lemma1 => vec![commands::Suite::Lemma1],
                    SuiteArg::Lemma2 => vec![commands::Suite::Lemma2],
                    SuiteArg::Theorem3 => vec![commands::Suite::Theorem3],
                };
                let mut reports = Vec::new();
                for s in suites {
                    reports.push(run_suite(s, samples, seed, workers_value.clone())?);
                }
                Ok(reports)
            }
        }
    };

    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Usage(format!("--workers: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_path = cli.json.clone();
    match run(cli) {
        Ok(reports) => {
            for r in &reports {
                r.print_summary();
            }
            if let Some(path) = json_path {
                if let Err(e) = write_reports(&path, &reports) {
                    eprintln!("error: cannot write report to {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            }
            if reports.iter().all(|r| r.all_pass()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
