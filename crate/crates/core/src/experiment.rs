//! Seed sweeps over a grid of electors and fault schedules, with CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::ElectorConfig;
use crate::sim::config::{AdversaryAction, ExecutionConfig, FaultSchedule, FORMAT_VERSION};
use crate::sim::run;
use crate::verify::{verify_with, VerificationReport, VerifyOptions, DEFAULT_OFFERED_LOAD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFaults {
    pub name: String,
    #[serde(default)]
    pub faults: FaultSchedule,
    #[serde(default)]
    pub adversary_script: Vec<AdversaryAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

/// A sweep definition. An omitted axis takes its value from `base`; an
/// axis given as an empty list makes the grid empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub name: String,
    pub base: ExecutionConfig,
    #[serde(default)]
    pub electors: Option<Vec<ElectorConfig>>,
    #[serde(default)]
    pub fault_schedules: Option<Vec<NamedFaults>>,
    #[serde(default)]
    pub seeds: Option<Seeds>,
    #[serde(default)]
    pub offered_load: Option<f64>,
    #[serde(default)]
    pub output_directory: Option<String>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
    #[error("duplicate fault schedule name `{0}`")]
    DuplicateName(String),
    #[error("offered_load must be a finite non-negative number")]
    OfferedLoad,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    /// `<elector>/<fault schedule>`
    pub config_name: String,
    pub seed: u64,
    pub config: ExecutionConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ExperimentError::FormatVersion(self.format_version));
        }
        if let Some(fs) = &self.fault_schedules {
            let mut names = std::collections::BTreeSet::new();
            for f in fs {
                if !names.insert(&f.name) {
                    return Err(ExperimentError::DuplicateName(f.name.clone()));
                }
            }
        }
        let load = self.load();
        if !load.is_finite() || load < 0.0 {
            return Err(ExperimentError::OfferedLoad);
        }
        Ok(())
    }

    pub fn load(&self) -> f64 {
        self.offered_load.unwrap_or(DEFAULT_OFFERED_LOAD)
    }

    /// Deterministic expansion, electors outermost, then fault schedules,
    /// then seeds.
    pub fn expand(&self) -> Vec<GridPoint> {
        let electors = self.electors.clone().unwrap_or_else(|| vec![self.base.elector]);
        let faults = self.fault_schedules.clone().unwrap_or_else(|| {
            vec![NamedFaults {
                name: "base".into(),
                faults: self.base.faults.clone(),
                adversary_script: self.base.adversary_script.clone(),
            }]
        });
        let seeds = self.seeds.as_ref().map_or_else(|| vec![self.base.seed], Seeds::expand);
        let mut out = Vec::new();
        for e in &electors {
            for fs in &faults {
                for &seed in &seeds {
                    let mut config = self.base.clone();
                    config.elector = *e;
                    config.faults = fs.faults.clone();
                    config.adversary_script = fs.adversary_script.clone();
                    config.seed = seed;
                    out.push(GridPoint { config_name: format!("{}/{}", e.name(), fs.name), seed, config });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub config_name: String,
    pub seed: u64,
    pub outcome: Result<VerificationReport, String>,
}

pub fn run_point(point: &GridPoint, load: f64) -> RunSummary {
    let opts = VerifyOptions { offered_load: load, ..VerifyOptions::default() };
    let outcome = run(&point.config).map(|t| verify_with(&t, &opts)).map_err(|e| e.to_string());
    RunSummary { config_name: point.config_name.clone(), seed: point.seed, outcome }
}

/// Runs every grid point in parallel. The result is sorted by
/// `(config_name, seed)` whatever order the workers finish in.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<RunSummary>, ExperimentError> {
    spec.validate()?;
    let load = spec.load();
    let mut rows: Vec<RunSummary> = spec.expand().par_iter().map(|p| run_point(p, load)).collect();
    rows.sort_by(|a, b| (&a.config_name, a.seed).cmp(&(&b.config_name, b.seed)));
    Ok(rows)
}

const METRICS: [&str; 8] = [
    "commits_per_round",
    "skipped_rounds",
    "skipped_rate",
    "latency_in_rounds",
    "slot_latency_in_rounds",
    "censored_transactions",
    "chain_quality_worst_window",
    "honest_block_ratio",
];

fn metric_values(r: &VerificationReport) -> [f64; 8] {
    let m = &r.metrics;
    let post_gst = m.gst_round.map_or(0, |g| (m.horizon.0 + 1).saturating_sub(g.0));
    let skipped_rate = if post_gst == 0 { 0.0 } else { m.skipped_round_count as f64 / post_gst as f64 };
    [
        m.commits_per_round,
        m.skipped_round_count as f64,
        skipped_rate,
        m.latency_in_rounds,
        m.slot_latency_in_rounds,
        m.censored_transactions,
        m.chain_quality_worst_window as f64,
        m.honest_block_ratio,
    ]
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub config_name: String,
    pub runs: usize,
    pub errors: usize,
    pub passed: usize,
    pub mean: [f64; 8],
    pub std: [f64; 8],
}

pub fn aggregate(rows: &[RunSummary]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    for group in rows.chunk_by(|a, b| a.config_name == b.config_name) {
        let ok: Vec<&VerificationReport> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let values: Vec<[f64; 8]> = ok.iter().map(|r| metric_values(r)).collect();
        let mut mean = [0.0; 8];
        let mut std = [0.0; 8];
        for k in 0..8 {
            let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
            (mean[k], std[k]) = mean_std(&col);
        }
        out.push(Aggregate {
            config_name: group[0].config_name.clone(),
            runs: ok.len(),
            errors: group.len() - ok.len(),
            passed: ok.iter().filter(|r| r.passed()).count(),
            mean,
            std,
        });
    }
    out
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["format_version", "config", "seed", "status", "runs", "passed", "failures"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(METRICS.iter().map(|m| m.to_string()));
    h.extend(METRICS.iter().map(|m| format!("{m}_std")));
    h
}

/// One row per run, then one `aggregate` row per config right after its
/// runs. Failed simulations become `error` rows carrying the message.
pub fn to_csv(rows: &[RunSummary]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header())?;
    let aggregates = aggregate(rows);
    let mut agg = aggregates.iter();
    for group in rows.chunk_by(|a, b| a.config_name == b.config_name) {
        for r in group {
            let mut rec = vec![FORMAT_VERSION.to_string(), r.config_name.clone(), r.seed.to_string()];
            match &r.outcome {
                Ok(rep) => {
                    let failed: Vec<&str> = rep.failures().map(|(k, _)| k).collect();
                    rec.extend(["ok".into(), "1".into(), u8::from(rep.passed()).to_string(), failed.join(";")]);
                    rec.extend(metric_values(rep).iter().map(|x| fmt(*x)));
                    rec.extend(std::iter::repeat_n(String::new(), METRICS.len()));
                }
                Err(e) => {
                    rec.extend(["error".into(), "0".into(), "0".into(), e.clone()]);
                    rec.extend(std::iter::repeat_n(String::new(), 2 * METRICS.len()));
                }
            }
            w.write_record(&rec)?;
        }
        let a = agg.next().expect("one aggregate per group");
        let mut rec = vec![
            FORMAT_VERSION.to_string(),
            a.config_name.clone(),
            String::new(),
            "aggregate".into(),
            a.runs.to_string(),
            a.passed.to_string(),
            if a.errors > 0 { format!("errors={}", a.errors) } else { String::new() },
        ];
        rec.extend(a.mean.iter().map(|x| fmt(*x)));
        rec.extend(a.std.iter().map(|x| fmt(*x)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Comparison table: aggregate rows only.
pub fn comparison_csv(rows: &[RunSummary]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h = vec!["format_version".to_string(), "config".into(), "runs".into(), "passed".into()];
    h.extend(METRICS.iter().map(|m| m.to_string()));
    w.write_record(&h)?;
    for a in aggregate(rows) {
        let mut rec = vec![FORMAT_VERSION.to_string(), a.config_name, a.runs.to_string(), a.passed.to_string()];
        rec.extend(a.mean.iter().map(|x| fmt(*x)));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
