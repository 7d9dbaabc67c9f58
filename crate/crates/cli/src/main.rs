use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use carousel_core::election::ElectorConfig;
use carousel_core::experiment::{comparison_csv, sweep, to_csv, ExperimentSpec, RunSummary};
use carousel_core::sim::{run, ExecutionConfig, SimError, Trace, FORMAT_VERSION};
use carousel_core::verify::{verify, VerificationReport};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Leader-aware SMR simulator and trace verifier.
#[derive(Parser)]
#[command(name = "carousel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration; writes trace.jsonl and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        /// carousel[:pick_rule] or round_robin
        #[arg(long)]
        elector: Option<ElectorConfig>,
    },
    /// Run every (elector, fault schedule, seed) point of an experiment spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Re-verify a stored trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-config aggregate table for an experiment spec.
    Compare {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Usage, configuration and I/O problems. Always exit code 2.
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Failure { kind, message: message.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_json(report: &VerificationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn verdict_code(report: &VerificationReport) -> ExitCode {
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        for (name, v) in report.failures() {
            eprintln!("FAIL {name}: {}", serde_json::to_string(v).expect("verdict serializes"));
        }
        ExitCode::from(1)
    }
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, Failure> {
    let spec: ExperimentSpec = serde_json::from_str(&read(path)?).map_err(|e| Failure::new("spec", e))?;
    spec.validate().map_err(|e| Failure::new("spec", e))?;
    Ok(spec)
}

fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<RunSummary>, Failure> {
    let grid = spec.expand();
    eprintln!("sweep `{}`: {} grid points", spec.name, grid.len());
    let mut last = None;
    for p in &grid {
        if last != Some(&p.config_name) {
            eprintln!("  {}", p.config_name);
            last = Some(&p.config_name);
        }
    }
    sweep(spec).map_err(|e| Failure::new("spec", e))
}

fn rows_json(rows: &[RunSummary]) -> String {
    let runs: Vec<_> = rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(rep) => json!({"config": r.config_name, "seed": r.seed, "status": "ok", "report": rep}),
            Err(e) => json!({"config": r.config_name, "seed": r.seed, "status": "error", "error": e}),
        })
        .collect();
    let aggregates = carousel_core::experiment::aggregate(rows);
    let mut s = serde_json::to_string_pretty(&json!({
        "format_version": FORMAT_VERSION,
        "runs": runs,
        "aggregates": aggregates,
    }))
    .expect("rows serialize");
    s.push('\n');
    s
}

fn execute(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Run { config, out, seed, horizon, elector } => {
            let mut cfg: ExecutionConfig =
                serde_json::from_str(&read(&config)?).map_err(|e| Failure::new("config", e))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(h) = horizon {
                cfg.horizon_rounds = h;
            }
            if let Some(e) = elector {
                cfg.elector = e;
            }
            let trace = run(&cfg).map_err(|e| match e {
                SimError::Config(_) => Failure::new("config", e),
                SimError::Envelope(_) => Failure::new("envelope", e),
                _ => Failure::new("internal", e),
            })?;
            let report = verify(&trace);
            fs::create_dir_all(&out).map_err(|e| Failure::new("io", format!("{}: {e}", out.display())))?;
            write(&out.join("trace.jsonl"), &trace.to_jsonl())?;
            write(&out.join("report.json"), &report_json(&report))?;
            Ok(verdict_code(&report))
        }
        Command::Verify { trace, out } => {
            let t = Trace::from_jsonl(&read(&trace)?).map_err(|e| Failure::new("trace", e))?;
            let report = verify(&t);
            emit(out.as_deref(), &report_json(&report))?;
            Ok(verdict_code(&report))
        }
        Command::Sweep { spec, out, format } => {
            let spec = load_spec(&spec)?;
            let rows = run_sweep(&spec)?;
            let text = match format {
                Format::Csv => to_csv(&rows).map_err(|e| Failure::new("io", e))?,
                Format::Json => rows_json(&rows),
            };
            emit(out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { spec, out, format } => {
            let spec = load_spec(&spec)?;
            let rows = run_sweep(&spec)?;
            let text = match format {
                Format::Csv => comparison_csv(&rows).map_err(|e| Failure::new("io", e))?,
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&carousel_core::experiment::aggregate(&rows))
                        .expect("aggregates serialize");
                    s.push('\n');
                    s
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            let err = json!({"format_version": FORMAT_VERSION, "error": f.kind, "message": f.message});
            eprintln!("{err}");
            ExitCode::from(2)
        }
    }
}
