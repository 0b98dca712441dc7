//! Experiment description files (JSON).
//!
//! ```json
//! {
//!   "base": { "num_users": 3, "num_feeds": 6, "rhs_rows": 5, "rhs_cols": 5 },
//!   "snr_db": 10.0,
//!   "sweep": { "kind": "snr", "snr_db": [-10, 0, 10, 20] },
//!   "num_trials": 50,
//!   "methods": ["proposed", "random_w"],
//!   "output_path": "out/snr",
//!   "master_seed": 1
//! }
//! ```
//!
//! Every field of `base` falls back to the default scenario. When `snr_db`
//! is given it overrides `base.noise_vars`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::{noise_var_from_snr_db, surface_shape, SystemConfig};
use crate::error::{Error, Result};
use crate::optimizer::OptimizerSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Joint digital and holographic optimization.
    Proposed,
    /// Digital optimization only, on uniformly random holographic weights.
    RandomW,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::RandomW => "random_w",
        }
    }
}

fn default_timing_iters() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Sum rate against transmit SNR.
    Snr { snr_db: Vec<f64> },
    /// Sum rate against surface size at a fixed SNR. Each size is laid out
    /// as the most square grid.
    RhsSize { m: Vec<usize>, snr_db: Option<f64> },
    /// Per-iteration traces of the base scenario, always `max_iters` long.
    Convergence,
    /// Wall time per iteration against surface size; runs sequentially.
    Timing {
        m: Vec<usize>,
        #[serde(default = "default_timing_iters")]
        iterations: usize,
    },
}

impl Sweep {
    pub fn kind(&self) -> &'static str {
        match self {
            Sweep::Snr { .. } => "snr",
            Sweep::RhsSize { .. } => "rhs_size",
            Sweep::Convergence => "convergence",
            Sweep::Timing { .. } => "timing",
        }
    }

    /// Values along the x-axis; the convergence sweep has a single point.
    pub fn grid(&self) -> Vec<f64> {
        match self {
            Sweep::Snr { snr_db } => snr_db.clone(),
            Sweep::RhsSize { m, .. } | Sweep::Timing { m, .. } => {
                m.iter().map(|&x| x as f64).collect()
            }
            Sweep::Convergence => vec![0.0],
        }
    }
}

fn default_trials() -> usize {
    50
}

fn default_methods() -> Vec<Method> {
    vec![Method::Proposed, Method::RandomW]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub sweep: Sweep,
    #[serde(default = "default_trials")]
    pub num_trials: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

/// [`SystemConfig`] with every field optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub num_users: Option<usize>,
    pub num_feeds: Option<usize>,
    pub rhs_rows: Option<usize>,
    pub rhs_cols: Option<usize>,
    pub carrier_freq_hz: Option<f64>,
    pub element_spacing_m: Option<f64>,
    pub k_free_mag: Option<f64>,
    pub k_surface_mag: Option<f64>,
    pub noise_vars: Option<Vec<f64>>,
    pub power_budget: Option<f64>,
    pub num_paths: Option<usize>,
}

impl BaseConfig {
    pub fn resolve(&self) -> SystemConfig {
        let d = SystemConfig::default();
        let num_users = self.num_users.unwrap_or(d.num_users);
        let noise_vars = self.noise_vars.clone().unwrap_or_else(|| {
            let var = d.noise_vars[0];
            vec![var; num_users]
        });
        SystemConfig {
            num_users,
            num_feeds: self.num_feeds.unwrap_or(d.num_feeds),
            rhs_rows: self.rhs_rows.unwrap_or(d.rhs_rows),
            rhs_cols: self.rhs_cols.unwrap_or(d.rhs_cols),
            carrier_freq_hz: self.carrier_freq_hz.unwrap_or(d.carrier_freq_hz),
            element_spacing_m: self.element_spacing_m.unwrap_or(d.element_spacing_m),
            k_free_mag: self.k_free_mag.unwrap_or(d.k_free_mag),
            k_surface_mag: self.k_surface_mag.unwrap_or(d.k_surface_mag),
            noise_vars,
            power_budget: self.power_budget.unwrap_or(d.power_budget),
            num_paths: self.num_paths.unwrap_or(d.num_paths),
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    /// Base scenario with the top-level SNR applied.
    pub fn base_config(&self) -> SystemConfig {
        let config = self.base.resolve();
        match self.snr_db {
            Some(snr) => config.with_snr_db(snr),
            None => config,
        }
    }

    /// Scenario at one grid value of the sweep.
    pub fn config_at(&self, grid_value: f64) -> SystemConfig {
        let base = self.base_config();
        match &self.sweep {
            Sweep::Snr { .. } => base.with_snr_db(grid_value),
            Sweep::RhsSize { snr_db, .. } => {
                let (rows, cols) = surface_shape(grid_value as usize);
                let config = base.with_surface(rows, cols);
                match snr_db {
                    Some(snr) => config.with_snr_db(*snr),
                    None => config,
                }
            }
            Sweep::Timing { .. } => {
                let (rows, cols) = surface_shape(grid_value as usize);
                base.with_surface(rows, cols)
            }
            Sweep::Convergence => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::invalid("num_trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "must name at least one method"));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::invalid("methods", "contains duplicates"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db", "must be finite"));
            }
        }
        self.optimizer
            .validate()
            .map_err(|e| prefix_field("optimizer", e))?;
        match &self.sweep {
            Sweep::Snr { snr_db } => {
                if snr_db.is_empty() {
                    return Err(Error::invalid("sweep.snr_db", "grid is empty"));
                }
                if snr_db.iter().any(|s| !s.is_finite()) {
                    return Err(Error::invalid("sweep.snr_db", "values must be finite"));
                }
            }
            Sweep::RhsSize { m, snr_db } => {
                check_sizes("sweep.m", m)?;
                if snr_db.is_some_and(|s| !s.is_finite()) {
                    return Err(Error::invalid("sweep.snr_db", "must be finite"));
                }
            }
            Sweep::Timing { m, iterations } => {
                check_sizes("sweep.m", m)?;
                if *iterations == 0 {
                    return Err(Error::invalid("sweep.iterations", "must be at least 1"));
                }
            }
            Sweep::Convergence => {}
        }
        for g in self.sweep.grid() {
            self.config_at(g)
                .validate()
                .map_err(|e| prefix_field("base", e))?;
        }
        Ok(())
    }
}

fn check_sizes(field: &str, m: &[usize]) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid(field, "grid is empty"));
    }
    if m.contains(&0) {
        return Err(Error::invalid(field, "surface sizes must be positive"));
    }
    Ok(())
}

fn prefix_field(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Parse and validate an experiment file.
pub fn parse_spec(contents: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_str(contents)?;
    spec.validate()?;
    Ok(spec)
}

pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    noise_var_from_snr_db(snr_db, 1.0)
}
