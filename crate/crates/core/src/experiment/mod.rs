//! Seeded Monte-Carlo experiments: SNR and surface-size sweeps, convergence
//! traces and timing runs, plus their result files.

mod output;
mod runner;
mod spec;

pub use output::{
    read_records, read_traces, render_plot, write_results, OutputFiles, RESULT_COLUMNS,
    TRACE_COLUMNS, WALL_TIME_COLUMNS,
};
pub use runner::{
    mean_and_std_err, run_experiment, trial_seed, ExperimentResult, GridSummary, TraceRecord,
    TrialRecord,
};
pub use spec::{parse_spec, snr_to_noise_var, BaseConfig, ExperimentSpec, Method, Sweep};
