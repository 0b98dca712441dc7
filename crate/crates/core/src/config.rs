//! Scenario parameters shared by every stage of the pipeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rounded so that 30 GHz gives exactly `lambda = 1 cm`, consistent with
/// the default `|k_f| = 200 pi`.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// All scalars describing one downlink scenario.
///
/// `num_feeds` doubles as the number of RF chains. Noise variances are
/// stored per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_feeds: usize,
    pub rhs_rows: usize,
    pub rhs_cols: usize,
    pub carrier_freq_hz: f64,
    pub element_spacing_m: f64,
    /// Free-space wave number magnitude in rad/m.
    pub k_free_mag: f64,
    /// Reference-wave (surface) wave number magnitude in rad/m.
    pub k_surface_mag: f64,
    pub noise_vars: Vec<f64>,
    pub power_budget: f64,
    pub num_paths: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// Three users, six feeds, a 5x5 surface at 30 GHz with quarter-wavelength
    /// spacing, five propagation paths and 0 dB transmit SNR.
    fn default() -> Self {
        let carrier = 30e9;
        let num_users = 3;
        Self {
            num_users,
            num_feeds: 6,
            rhs_rows: 5,
            rhs_cols: 5,
            carrier_freq_hz: carrier,
            element_spacing_m: wavelength(carrier) / 4.0,
            k_free_mag: 200.0 * PI,
            k_surface_mag: 200.0 * 3f64.sqrt() * PI,
            noise_vars: vec![1.0; num_users],
            power_budget: 1.0,
            num_paths: 5,
            seed: 0,
        }
    }
}

pub fn wavelength(carrier_freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_freq_hz
}

/// Noise variance giving `snr_db` of transmit SNR for a power budget `alpha`.
pub fn noise_var_from_snr_db(snr_db: f64, alpha: f64) -> f64 {
    alpha * 10f64.powf(-snr_db / 10.0)
}

/// Most square `rows x cols` factorization of `num_elements` with `rows <= cols`.
pub fn surface_shape(num_elements: usize) -> (usize, usize) {
    let mut rows = (num_elements as f64).sqrt() as usize;
    while rows > 1 && !num_elements.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, num_elements / rows)
}

impl SystemConfig {
    /// Number of surface elements `M`.
    pub fn num_elements(&self) -> usize {
        self.rhs_rows * self.rhs_cols
    }

    /// Set every user's noise variance from a transmit SNR in dB.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let var = noise_var_from_snr_db(snr_db, self.power_budget);
        self.noise_vars = vec![var; self.num_users];
        self
    }

    /// Resize the surface, keeping everything else.
    pub fn with_surface(mut self, rows: usize, cols: usize) -> Self {
        self.rhs_rows = rows;
        self.rhs_cols = cols;
        self
    }

    /// Change the user/feed counts and resize the noise vector, reusing the
    /// first user's noise variance.
    pub fn with_users_and_feeds(mut self, users: usize, feeds: usize) -> Self {
        let var = self.noise_vars.first().copied().unwrap_or(1.0);
        self.num_users = users;
        self.num_feeds = feeds;
        self.noise_vars = vec![var; users];
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive_count("num_users", self.num_users)?;
        positive_count("num_feeds", self.num_feeds)?;
        positive_count("rhs_rows", self.rhs_rows)?;
        positive_count("rhs_cols", self.rhs_cols)?;
        positive_count("num_paths", self.num_paths)?;
        if self.rhs_rows.checked_mul(self.rhs_cols).is_none() {
            return Err(Error::invalid("rhs_rows", "rhs_rows * rhs_cols overflows"));
        }
        if self.num_feeds < self.num_users {
            return Err(Error::invalid(
                "num_feeds",
                format!(
                    "need at least as many feeds as users ({} < {})",
                    self.num_feeds, self.num_users
                ),
            ));
        }
        positive_real("carrier_freq_hz", self.carrier_freq_hz)?;
        positive_real("element_spacing_m", self.element_spacing_m)?;
        positive_real("k_free_mag", self.k_free_mag)?;
        positive_real("k_surface_mag", self.k_surface_mag)?;
        positive_real("power_budget", self.power_budget)?;
        if self.k_surface_mag < self.k_free_mag {
            return Err(Error::invalid(
                "k_surface_mag",
                "surface wave number must not be smaller than the free-space one",
            ));
        }
        if self.noise_vars.len() != self.num_users {
            return Err(Error::invalid(
                "noise_vars",
                format!(
                    "expected {} entries, found {}",
                    self.num_users,
                    self.noise_vars.len()
                ),
            ));
        }
        for (d, &var) in self.noise_vars.iter().enumerate() {
            positive_real(&format!("noise_vars[{d}]"), var)?;
        }
        Ok(())
    }
}

fn positive_count(field: &str, value: usize) -> Result<()> {
    if value == 0 {
        Err(Error::invalid(field, "must be a positive integer"))
    } else {
        Ok(())
    }
}

fn positive_real(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}
