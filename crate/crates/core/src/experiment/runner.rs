use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{ExperimentSpec, Method, Sweep};
use crate::channel::generate_channels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, build_phase_matrix};
use crate::optimizer::{init_seed, initialize, IterationRecord, Optimizer, RunTrace};
use crate::oracles::random_w_start;
use crate::seeds::derive_seed;

/// One (grid point, trial, method) run. `wall_time_ms` and
/// `ms_per_iteration` are the only fields that vary between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub grid_value: f64,
    pub trial: usize,
    pub method: Method,
    pub channel_seed: u64,
    pub initial_sum_rate: Option<f64>,
    pub sum_rate: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub ms_per_iteration: Option<f64>,
    pub error: Option<String>,
}

/// One iteration of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trial: usize,
    pub method: Method,
    pub iteration: usize,
    pub sum_rate: f64,
    pub weighted_sum_mse: f64,
    pub power_used: f64,
    pub min_w: f64,
    pub max_w: f64,
    pub objective_start: f64,
    pub objective_after_digital: f64,
    pub objective_after_holo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_value: f64,
    pub method: Method,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_sum_rate: f64,
    pub std_err_sum_rate: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
    pub mean_ms_per_iteration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub records: Vec<TrialRecord>,
    pub traces: Vec<TraceRecord>,
    pub summary: Vec<GridSummary>,
}

impl ExperimentResult {
    pub fn summary_for(&self, grid_value: f64, method: Method) -> Option<&GridSummary> {
        self.summary
            .iter()
            .find(|s| s.grid_value == grid_value && s.method == method)
    }

    /// Successful sum rates at one grid point, indexed by trial.
    pub fn sum_rates(&self, grid_value: f64, method: Method) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.grid_value == grid_value && r.method == method)
            .map(|r| r.sum_rate)
            .collect()
    }
}

/// Channel seed of trial `trial`, shared by every grid point and method.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    derive_seed(master_seed, trial as u64)
}

struct Outcome {
    record: TrialRecord,
    trace: Vec<TraceRecord>,
}

enum Mode {
    UntilConverged,
    Fixed(usize),
}

fn run_one(
    config: &SystemConfig,
    spec: &ExperimentSpec,
    method: Method,
    mode: &Mode,
) -> Result<(RunTrace, f64)> {
    let geom = build_geometry(config)?;
    let phi = build_phase_matrix(&geom, config.k_surface_mag);
    let channels = generate_channels(config, &geom)?;
    let settings = spec.optimizer.clone();
    let state = match method {
        Method::Proposed => initialize(config, &channels, &phi, &settings, init_seed(config.seed))?,
        Method::RandomW => random_w_start(config, &channels, &phi, config.seed)?,
    };
    let mut opt = Optimizer::new(config, &channels, &phi, settings, state)?;
    if method == Method::RandomW {
        opt = opt.freeze_holographic();
    }
    let start = Instant::now();
    let (_, trace) = match mode {
        Mode::UntilConverged => opt.run_to_convergence()?,
        Mode::Fixed(n) => opt.run_fixed(*n)?,
    };
    Ok((trace, start.elapsed().as_secs_f64() * 1e3))
}

fn execute(
    spec: &ExperimentSpec,
    grid_value: f64,
    trial: usize,
    method: Method,
    mode: &Mode,
    keep_trace: bool,
) -> Outcome {
    let channel_seed = trial_seed(spec.master_seed, trial);
    let config = SystemConfig {
        seed: channel_seed,
        ..spec.config_at(grid_value)
    };
    let mut record = TrialRecord {
        grid_value,
        trial,
        method,
        channel_seed,
        initial_sum_rate: None,
        sum_rate: None,
        iterations: 0,
        converged: false,
        wall_time_ms: 0.0,
        ms_per_iteration: None,
        error: None,
    };
    let mut trace_rows = Vec::new();
    match run_one(&config, spec, method, mode) {
        Ok((trace, ms)) => {
            let rate = trace.final_sum_rate();
            if rate.is_finite() && rate >= 0.0 {
                record.sum_rate = Some(rate);
            } else {
                record.error = Some(format!("non-finite sum rate {rate}"));
            }
            record.initial_sum_rate = Some(trace.initial_sum_rate);
            record.iterations = trace.iterations_run;
            record.converged = trace.converged;
            record.wall_time_ms = ms;
            if trace.iterations_run > 0 {
                record.ms_per_iteration = Some(ms / trace.iterations_run as f64);
            }
            if keep_trace {
                trace_rows = trace
                    .records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| trace_row(trial, method, i + 1, r))
                    .collect();
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    Outcome {
        record,
        trace: trace_rows,
    }
}

fn trace_row(trial: usize, method: Method, iteration: usize, r: &IterationRecord) -> TraceRecord {
    TraceRecord {
        trial,
        method,
        iteration,
        sum_rate: r.sum_rate,
        weighted_sum_mse: r.weighted_sum_mse,
        power_used: r.power_used,
        min_w: r.min_w,
        max_w: r.max_w,
        objective_start: r.objective_start,
        objective_after_digital: r.objective_after_digital,
        objective_after_holo: r.objective_after_holo,
    }
}

/// Run every (grid point, trial, method) combination.
///
/// Trials run on the rayon pool except in timing mode, which is sequential
/// and preceded by one unrecorded warm-up run per grid point. Failed runs
/// are kept as records carrying the error; more than 10% failures abort.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let grid = spec.sweep.grid();
    let jobs: Vec<(f64, usize, Method)> = grid
        .iter()
        .flat_map(|&g| {
            (0..spec.num_trials).flat_map(move |t| spec.methods.iter().map(move |&m| (g, t, m)))
        })
        .collect();

    let outcomes: Vec<Outcome> = match &spec.sweep {
        Sweep::Timing { iterations, .. } => {
            let mode = Mode::Fixed(*iterations);
            let mut out = Vec::with_capacity(jobs.len());
            for &g in &grid {
                for &m in &spec.methods {
                    let _ = execute(spec, g, 0, m, &mode, false);
                }
                for &(jg, t, m) in jobs.iter().filter(|j| j.0 == g) {
                    out.push(execute(spec, jg, t, m, &mode, false));
                }
            }
            out
        }
        Sweep::Convergence => {
            let mode = Mode::Fixed(spec.optimizer.max_iters);
            jobs.par_iter()
                .map(|&(g, t, m)| execute(spec, g, t, m, &mode, true))
                .collect()
        }
        Sweep::Snr { .. } | Sweep::RhsSize { .. } => jobs
            .par_iter()
            .map(|&(g, t, m)| execute(spec, g, t, m, &Mode::UntilConverged, false))
            .collect(),
    };

    let failed = outcomes.iter().filter(|o| o.record.error.is_some()).count();
    if failed * 10 > outcomes.len() {
        return Err(Error::TooManyFailures {
            failed,
            total: outcomes.len(),
        });
    }
    let mut records = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::new();
    for o in outcomes {
        records.push(o.record);
        traces.extend(o.trace);
    }
    let summary = summarize(&grid, &spec.methods, &records);
    Ok(ExperimentResult {
        spec: spec.clone(),
        records,
        traces,
        summary,
    })
}

/// Mean and standard error of the mean; zero error for a single sample.
pub fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn summarize(grid: &[f64], methods: &[Method], records: &[TrialRecord]) -> Vec<GridSummary> {
    let mut out = Vec::new();
    for &g in grid {
        for &method in methods {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.grid_value == g && r.method == method)
                .collect();
            let ok: Vec<&TrialRecord> =
                rows.iter().copied().filter(|r| r.error.is_none()).collect();
            let rates: Vec<f64> = ok.iter().filter_map(|r| r.sum_rate).collect();
            let (mean, se) = mean_and_std_err(&rates);
            let n = ok.len().max(1) as f64;
            let per_iter: Vec<f64> = ok.iter().filter_map(|r| r.ms_per_iteration).collect();
            out.push(GridSummary {
                grid_value: g,
                method,
                trials_ok: ok.len(),
                trials_failed: rows.len() - ok.len(),
                mean_sum_rate: mean,
                std_err_sum_rate: se,
                mean_iterations: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                converged_fraction: ok.iter().filter(|r| r.converged).count() as f64 / n,
                mean_ms_per_iteration: mean_and_std_err(&per_iter).0,
            });
        }
    }
    out
}
