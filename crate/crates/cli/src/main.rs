use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hidejam_core::experiment::{self, ExperimentReport, ExperimentSpec};
use hidejam_core::scenario::ScenarioConfig;

const METRICS_DOC: &str = "\
Per-window CSV files are named <scenario>_seed<seed>.csv and hold one row per
window of W decision slots (the last window may be shorter):

  window           zero-based window index
  sensing_prob     fraction of slots in which the jammer's detection equals the
                   user's true channel (NONE never matches)
  mean_R           mean of the user's per-slot lag-correlation score R between
                   its own channel history and the jammer channels it estimated
                   from its received spectrum
  norm_throughput  mean of log2(1+SINR) / log2(1+SINR_best), clipped to [0,1];
                   SINR_best is the jam-free, interference-free SINR on the
                   user's best channel
  jammed_prob      fraction of slots in which the jammer hit the user's channel

summary.csv has one row per scenario with mean and population std over seeds
of the converged metrics. Converged means the final 20% of the run.

sensing_reductions.csv lists, for every pair of policies facing the same
jammer kind, 1 - sensing(policy) / sensing(baseline).

All floats carry 6 significant digits.";

#[derive(Parser)]
#[command(name = "hidejam", version, about = "Hidden anti-jamming simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario over one or more seeds.
    Run(RunArgs),
    /// Run the 4-policy x 2-jammer grid derived from a base scenario.
    Grid(RunArgs),
    /// Describe the columns of the CSV outputs.
    #[command(long_about = METRICS_DOC)]
    Metrics,
    /// Print the default scenario as TOML.
    Defaults,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file; omitted keys take their defaults.
    config: PathBuf,
    /// Directory for CSV outputs; nothing is written without it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; defaults to the scenario's own seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Override the number of decision slots per run.
    #[arg(long)]
    slots: Option<u64>,
    /// Metric window in decision slots.
    #[arg(long, default_value_t = ExperimentSpec::DEFAULT_WINDOW)]
    window: usize,
}

impl RunArgs {
    fn spec(&self, grid: bool) -> Result<ExperimentSpec> {
        let mut base = ScenarioConfig::load(&self.config)
            .with_context(|| format!("loading scenario {}", self.config.display()))?;
        if let Some(slots) = self.slots {
            base.decision_slots = slots;
            base.validate().context("--slots")?;
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        let seeds = if self.seeds.is_empty() { vec![base.seed] } else { self.seeds.clone() };
        let scenarios = if grid { experiment::policy_jammer_grid(&base) } else { vec![base] };
        Ok(ExperimentSpec {
            window: self.window,
            out_dir: self.out.clone(),
            workers: self.workers,
            ..ExperimentSpec::new(scenarios, seeds)
        })
    }
}

fn print_report(report: &ExperimentReport) {
    println!(
        "{:<32} {:>6} {:>10} {:>4}  {:>17}  {:>17}  {:>17}  {:>17}",
        "scenario", "policy", "jammer", "runs", "jammed", "sensing", "mean R", "throughput"
    );
    for r in &report.summary {
        let cell = |(m, s): (f64, f64)| format!("{m:.4} ± {s:.4}");
        println!(
            "{:<32} {:>6} {:>10} {:>4}  {:>17}  {:>17}  {:>17}  {:>17}",
            r.scenario,
            r.policy.to_string(),
            r.jammer.to_string(),
            r.runs,
            cell(r.jammed_prob),
            cell(r.sensing_prob),
            cell(r.mean_r),
            cell(r.norm_throughput)
        );
    }
    if !report.reductions.is_empty() {
        println!();
        println!("sensing reduction (1 - policy/baseline):");
        for s in &report.reductions {
            let v = s.reduction.map_or_else(|| "n/a".to_string(), |v| format!("{:+.1}%", 100.0 * v));
            println!("  {:<10} {:>6} vs {:<6} {v}", s.jammer.to_string(), s.policy.to_string(), s.baseline.to_string());
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => execute(&args.spec(false)?),
        Command::Grid(args) => execute(&args.spec(true)?),
        Command::Metrics => {
            println!("{METRICS_DOC}");
            Ok(())
        }
        Command::Defaults => {
            print!("{}", ScenarioConfig::default().to_toml_string());
            Ok(())
        }
    }
}

fn execute(spec: &ExperimentSpec) -> Result<()> {
    let report = experiment::run_experiment(spec)?;
    print_report(&report);
    if let Some(dir) = &spec.out_dir {
        eprintln!("wrote {} run files and summaries to {}", report.runs.len(), dir.display());
    }
    Ok(())
}
