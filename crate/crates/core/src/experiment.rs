//! Batch runner: scenarios x seeds in parallel, windowed metrics to CSV,
//! and a policy x jammer summary.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::arena::{Arena, ArenaError, SlotLog};
use crate::metrics::{self, MetricsRow};
use crate::policy::PolicyKind;
use crate::scenario::{JammerKind, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("scenario `{scenario}` seed {seed}: {source}")]
    Run { scenario: String, seed: u64, source: ArenaError },
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenarios: Vec<ScenarioConfig>,
    pub seeds: Vec<u64>,
    /// Metric window in decision slots.
    pub window: usize,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
}

impl ExperimentSpec {
    pub const DEFAULT_WINDOW: usize = 100;

    pub fn new(scenarios: Vec<ScenarioConfig>, seeds: Vec<u64>) -> Self {
        Self { scenarios, seeds, window: Self::DEFAULT_WINDOW, out_dir: None, workers: 1 }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Spec(m));
        if self.scenarios.is_empty() {
            return bad("no scenarios".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("scenario names must be distinct".into());
        }
        for s in &self.scenarios {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return bad(format!("scenario name `{}` must be non-empty [A-Za-z0-9._-]", s.name));
            }
            s.validate().map_err(|e| ExperimentError::Spec(format!("scenario `{}`: {e}", s.name)))?;
        }
        Ok(())
    }
}

/// Converged-regime values for one run (final fifth of the slots).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged {
    pub jammed_prob: f64,
    pub sensing_prob: f64,
    pub mean_r: f64,
    pub norm_throughput: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: String,
    pub policy: PolicyKind,
    pub jammer: JammerKind,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub converged: Converged,
}

pub fn summarize(config: &ScenarioConfig, logs: &[SlotLog], window: usize, best_sinr: f64) -> RunResult {
    let tail = metrics::converged_tail(logs);
    RunResult {
        scenario: config.name.clone(),
        policy: config.user.policy,
        jammer: config.jammer.kind,
        seed: config.seed,
        rows: metrics::windowed(logs, window, best_sinr),
        converged: Converged {
            jammed_prob: metrics::jammed_probability(logs),
            sensing_prob: metrics::sensing_probability(tail),
            mean_r: metrics::mean_correlation(tail),
            norm_throughput: metrics::normalized_throughput(tail, best_sinr),
        },
    }
}

/// Runs one scenario with the given seed and reduces it to metrics.
pub fn run_one(config: &ScenarioConfig, seed: u64, window: usize) -> Result<RunResult, ExperimentError> {
    let cfg = ScenarioConfig { seed, ..config.clone() };
    let err = |source| ExperimentError::Run { scenario: cfg.name.clone(), seed, source };
    let mut arena = Arena::new(cfg.clone()).map_err(err)?;
    let best = arena.best_sinr();
    let logs = arena.run_to_end().map_err(err)?;
    Ok(summarize(&cfg, &logs, window, best))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate of all seeds of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: PolicyKind,
    pub jammer: JammerKind,
    pub runs: usize,
    pub jammed_prob: (f64, f64),
    pub sensing_prob: (f64, f64),
    pub mean_r: (f64, f64),
    pub norm_throughput: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingReduction {
    pub jammer: JammerKind,
    pub policy: PolicyKind,
    pub baseline: PolicyKind,
    /// `1 - sensing(policy) / sensing(baseline)`; `None` when the baseline is zero.
    pub reduction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
    pub reductions: Vec<SensingReduction>,
}

pub fn summary_rows(runs: &[RunResult]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in runs {
        if !names.contains(&r.scenario.as_str()) {
            names.push(&r.scenario);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&RunResult> = runs.iter().filter(|r| r.scenario == name).collect();
            let col = |f: fn(&Converged) -> f64| mean_std(&group.iter().map(|r| f(&r.converged)).collect::<Vec<_>>());
            SummaryRow {
                scenario: name.to_string(),
                policy: group[0].policy,
                jammer: group[0].jammer,
                runs: group.len(),
                jammed_prob: col(|c| c.jammed_prob),
                sensing_prob: col(|c| c.sensing_prob),
                mean_r: col(|c| c.mean_r),
                norm_throughput: col(|c| c.norm_throughput),
            }
        })
        .collect()
}

/// Every ordered pair of distinct policies facing the same jammer.
pub fn sensing_reductions(summary: &[SummaryRow]) -> Vec<SensingReduction> {
    let mut out = Vec::new();
    for a in summary {
        for b in summary {
            if a.jammer == b.jammer && a.policy != b.policy {
                let base = b.sensing_prob.0;
                out.push(SensingReduction {
                    jammer: a.jammer,
                    policy: a.policy,
                    baseline: b.policy,
                    reduction: (base > 0.0).then(|| 1.0 - a.sensing_prob.0 / base),
                });
            }
        }
    }
    out
}

/// Runs every (scenario, seed) pair, writing CSVs when an output directory
/// is set. Results are ordered by scenario, then seed, whatever the
/// worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Output { path: dir.display().to_string(), source })?;
    }
    let jobs: Vec<(&ScenarioConfig, u64)> =
        spec.scenarios.iter().flat_map(|s| spec.seeds.iter().map(move |&seed| (s, seed))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let runs: Vec<RunResult> =
        pool.install(|| jobs.par_iter().map(|&(s, seed)| run_one(s, seed, spec.window)).collect::<Result<_, _>>())?;
    let summary = summary_rows(&runs);
    let reductions = sensing_reductions(&summary);
    if let Some(dir) = &spec.out_dir {
        for r in &runs {
            write_run_csv(&dir.join(run_file_name(r)), &r.rows)?;
        }
        write_summary_csv(&dir.join("summary.csv"), &summary)?;
        write_reductions_csv(&dir.join("sensing_reductions.csv"), &reductions)?;
    }
    Ok(ExperimentReport { runs, summary, reductions })
}

pub fn run_file_name(r: &RunResult) -> String {
    format!("{}_seed{}.csv", r.scenario, r.seed)
}

/// Decimal rendering with six significant digits.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v == 0.0 { "0".into() } else { format!("{v}") };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, ExperimentError> {
    let file = fs::File::create(path).map_err(|source| ExperimentError::Output { path: path.display().to_string(), source })?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub const RUN_HEADER: [&str; 5] = ["window", "sensing_prob", "mean_R", "norm_throughput", "jammed_prob"];

pub fn write_run_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record(RUN_HEADER)?;
    for r in rows {
        let mut rec = vec![r.window.to_string()];
        rec.extend(r.values().iter().map(|&v| fmt_sig6(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| ExperimentError::Output { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record([
        "scenario",
        "policy",
        "jammer",
        "runs",
        "jammed_prob_mean",
        "jammed_prob_std",
        "sensing_prob_mean",
        "sensing_prob_std",
        "mean_R_mean",
        "mean_R_std",
        "norm_throughput_mean",
        "norm_throughput_std",
    ])?;
    for r in rows {
        let mut rec = vec![r.scenario.clone(), r.policy.to_string(), r.jammer.to_string(), r.runs.to_string()];
        for (m, s) in [r.jammed_prob, r.sensing_prob, r.mean_r, r.norm_throughput] {
            rec.push(fmt_sig6(m));
            rec.push(fmt_sig6(s));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| ExperimentError::Output { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_reductions_csv(path: &Path, rows: &[SensingReduction]) -> Result<(), ExperimentError> {
    let mut w = writer(path)?;
    w.write_record(["jammer", "policy", "baseline", "sensing_reduction"])?;
    for r in rows {
        w.write_record([
            r.jammer.to_string(),
            r.policy.to_string(),
            r.baseline.to_string(),
            r.reduction.map_or_else(|| "nan".to_string(), fmt_sig6),
        ])?;
    }
    w.flush().map_err(|source| ExperimentError::Output { path: path.display().to_string(), source })?;
    Ok(())
}

/// The four policies against the follower and the Q-learning jammer,
/// each derived from `base`.
pub fn policy_jammer_grid(base: &ScenarioConfig) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    for jammer in [JammerKind::Follower, JammerKind::Qlearning] {
        for policy in PolicyKind::ALL {
            let mut cfg = base.clone();
            cfg.name = format!("{}_{}_{}", base.name, policy.name().to_lowercase(), jammer.name());
            cfg.user.policy = policy;
            cfg.jammer.kind = jammer;
            out.push(cfg);
        }
    }
    out
}
