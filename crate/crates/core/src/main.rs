use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use holobeam::experiment::{parse_spec, run_experiment, write_results, ExperimentSpec, Sweep};

/// MMSE hybrid holographic beamforming experiments.
#[derive(Parser)]
#[command(name = "holobeam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep declared in the experiment file.
    Run(Common),
    /// Record per-iteration sum-rate traces of the base scenario.
    Convergence(Common),
    /// Measure wall time per iteration over surface sizes.
    Timing(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (JSON).
    spec: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common) -> anyhow::Result<ExperimentSpec> {
    let text = fs::read_to_string(&common.spec)
        .with_context(|| format!("cannot read {}", common.spec.display()))?;
    let mut spec = parse_spec(&text)
        .with_context(|| format!("invalid experiment file {}", common.spec.display()))?;
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.num_trials = trials;
    }
    if let Some(out) = &common.out {
        spec.output_path = out.clone();
    }
    Ok(spec)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let (common, wanted) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::Convergence(c) => (c, Some("convergence")),
        Command::Timing(c) => (c, Some("timing")),
    };
    let mut spec = load(common)?;
    match wanted {
        // The convergence trace needs nothing beyond the base scenario.
        Some("convergence") => spec.sweep = Sweep::Convergence,
        Some(kind) if spec.sweep.kind() != kind => bail!(
            "`{kind}` needs a {kind} sweep, but {} declares `{}`",
            common.spec.display(),
            spec.sweep.kind()
        ),
        _ => {}
    }
    let result = run_experiment(&spec)?;
    let files = write_results(&result, &spec.output_path)?;
    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} records ({failed} failed) written to {}",
        result.records.len(),
        files.results.display()
    );
    for s in &result.summary {
        eprintln!(
            "  {:>8} {:<9} mean {:.4} +- {:.4}  ({:.3} ms/iter)",
            s.grid_value,
            s.method.name(),
            s.mean_sum_rate,
            s.std_err_sum_rate,
            s.mean_ms_per_iteration
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
