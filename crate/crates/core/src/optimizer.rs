//! Alternating minimization loop: MMSE combiners, MSE weights, digital
//! precoder, then one holographic sweep per iteration.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, ChannelSet};
use crate::config::SystemConfig;
use crate::error::{check_dim, Error, Result};
use crate::geometry::PhaseMatrix;
use crate::mse::{
    compute_gains, mmse_combiner, mse_per_user, mse_weights, radiated_power, sum_rate,
    weighted_sum_mse, BeamformingState,
};
use crate::seeds::{derive_seed, INIT_STREAM};
use crate::updates::{
    scale_to_budget, update_digital, update_digital_constrained, update_holo_all,
    update_holo_all_capped, DEFAULT_RIDGE_SCALE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Ones,
    Half,
    UniformRandom,
}

/// How the digital block is updated inside the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DigitalUpdate {
    /// Exact minimizer on the power sphere (Lagrange multiplier solved for).
    #[default]
    PowerConstrained,
    /// Ridge-regularized unconstrained solve followed by a joint rescale.
    /// Cheaper, but the rescale can raise the objective.
    ScaledRidge,
}

/// How the holographic sweep treats the power budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoloUpdate {
    /// Each element's box is narrowed so the sweep never exceeds the budget.
    #[default]
    PowerCapped,
    /// Plain box projection; the power may leave the budget and is restored
    /// by the rescale that ends the iteration.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Relative sum-rate change that ends the loop.
    pub tol: f64,
    pub max_iters: usize,
    /// Only used by [`DigitalUpdate::ScaledRidge`].
    pub ridge_scale: f64,
    pub init_mode: InitMode,
    pub digital_update: DigitalUpdate,
    pub holo_update: HoloUpdate,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 100,
            ridge_scale: DEFAULT_RIDGE_SCALE,
            init_mode: InitMode::Ones,
            digital_update: DigitalUpdate::PowerConstrained,
            holo_update: HoloUpdate::PowerCapped,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol", "must be finite and > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.ridge_scale >= 0.0 && self.ridge_scale.is_finite()) {
            return Err(Error::invalid("ridge_scale", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Metrics after one full iteration.
///
/// The three `objective_*` values are the weighted sum-MSE with the
/// combiners and MSE weights of this iteration held fixed: at the start, after
/// the digital update and after the holographic sweep. The sweep is followed
/// by a rescale of `V` back onto the power budget; `sum_rate`, `power_used`
/// and `weighted_sum_mse` describe the state after that rescale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub sum_rate: f64,
    pub weighted_sum_mse: f64,
    pub power_used: f64,
    pub max_w: f64,
    pub min_w: f64,
    pub objective_start: f64,
    pub objective_after_digital: f64,
    pub objective_after_holo: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub initial_sum_rate: f64,
    pub records: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl RunTrace {
    pub fn final_sum_rate(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_sum_rate, |r| r.sum_rate)
    }

    pub fn sum_rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sum_rate).collect()
    }
}

/// Seed of the initial precoder for a run keyed by `run_seed`.
pub fn init_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, INIT_STREAM)
}

/// Random feasible starting point: `w` per `init_mode`, `V` i.i.d. complex
/// Gaussian scaled onto the power budget, combiners and MSE weights matched
/// to that state.
pub fn initialize(
    config: &SystemConfig,
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<BeamformingState> {
    let elements = phi.num_elements();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let holo_weights = match settings.init_mode {
        InitMode::Ones => DVector::from_element(elements, 1.0),
        InitMode::Half => DVector::from_element(elements, 0.5),
        InitMode::UniformRandom => DVector::from_fn(elements, |_, _| rng.random_range(0.0..=1.0)),
    };
    initial_state(config, channels, phi, holo_weights, &mut rng)
}

pub(crate) fn initial_state(
    config: &SystemConfig,
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    holo_weights: DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<BeamformingState> {
    check_dim("channel users", config.num_users, channels.num_users())?;
    check_dim("phase matrix feeds", config.num_feeds, phi.num_feeds())?;
    let raw = DMatrix::from_fn(config.num_feeds, config.num_users, |_, _| {
        complex_gaussian(rng)
    });
    let digital = scale_to_budget(&holo_weights, phi, &raw, config.power_budget)?;
    let gains = compute_gains(channels, &holo_weights, phi, &digital)?;
    let combiners = mmse_combiner(&gains, &config.noise_vars)?;
    let mse = mse_per_user(&gains, &combiners, &config.noise_vars)?;
    Ok(BeamformingState {
        digital,
        holo_weights,
        combiners,
        mse_weights: mse_weights(&mse)?,
    })
}

/// Stepwise driver of the alternating loop.
pub struct Optimizer<'a> {
    config: &'a SystemConfig,
    channels: &'a ChannelSet,
    phi: &'a PhaseMatrix,
    settings: OptimizerSettings,
    state: BeamformingState,
    freeze_holo: bool,
    trace: RunTrace,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        config: &'a SystemConfig,
        channels: &'a ChannelSet,
        phi: &'a PhaseMatrix,
        settings: OptimizerSettings,
        state: BeamformingState,
    ) -> Result<Self> {
        settings.validate()?;
        check_dim(
            "channel length",
            phi.num_elements(),
            channels.num_elements(),
        )?;
        check_dim(
            "holographic weights",
            phi.num_elements(),
            state.holo_weights.len(),
        )?;
        let gains = compute_gains(channels, &state.holo_weights, phi, &state.digital)?;
        let initial_sum_rate = sum_rate(&gains, &config.noise_vars)?;
        Ok(Self {
            config,
            channels,
            phi,
            settings,
            state,
            freeze_holo: false,
            trace: RunTrace {
                initial_sum_rate,
                ..RunTrace::default()
            },
        })
    }

    /// Skip the holographic sweep, optimizing only the digital side.
    pub fn freeze_holographic(mut self) -> Self {
        self.freeze_holo = true;
        self
    }

    pub fn state(&self) -> &BeamformingState {
        &self.state
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    /// One full iteration. Returns the new record.
    pub fn step(&mut self) -> Result<&IterationRecord> {
        let noise = &self.config.noise_vars;
        let state = &mut self.state;

        let gains = compute_gains(self.channels, &state.holo_weights, self.phi, &state.digital)?;
        let combiners = mmse_combiner(&gains, noise)?;
        let mse = mse_per_user(&gains, &combiners, noise)?;
        let weights = mse_weights(&mse)?;
        let objective_start = mse.dot(&weights);

        // With no signal path to any user the objective is flat in V.
        let update = match self.settings.digital_update {
            DigitalUpdate::PowerConstrained => update_digital_constrained(
                self.channels,
                self.phi,
                &state.holo_weights,
                &combiners,
                &weights,
                self.config.power_budget,
            ),
            DigitalUpdate::ScaledRidge => update_digital(
                self.channels,
                self.phi,
                &state.holo_weights,
                &combiners,
                &weights,
                self.config.power_budget,
                self.settings.ridge_scale,
            ),
        };
        let digital = match update {
            Ok(v) => v,
            Err(Error::Degenerate | Error::NoRadiatedPower) => state.digital.clone(),
            Err(e) => return Err(e),
        };
        let gains = compute_gains(self.channels, &state.holo_weights, self.phi, &digital)?;
        let objective_after_digital = weighted_sum_mse(&gains, &combiners, noise, &weights)?;

        let (holo_weights, gains, objective_after_holo) = if self.freeze_holo {
            (state.holo_weights.clone(), gains, objective_after_digital)
        } else {
            let w = match self.settings.holo_update {
                HoloUpdate::PowerCapped => update_holo_all_capped(
                    self.channels,
                    self.phi,
                    &digital,
                    &combiners,
                    &weights,
                    &state.holo_weights,
                    self.config.power_budget,
                )?,
                HoloUpdate::Unconstrained => update_holo_all(
                    self.channels,
                    self.phi,
                    &digital,
                    &combiners,
                    &weights,
                    &state.holo_weights,
                )?,
            };
            let gains = compute_gains(self.channels, &w, self.phi, &digital)?;
            let objective = weighted_sum_mse(&gains, &combiners, noise, &weights)?;
            (w, gains, objective)
        };

        // The sweep changes the radiated power; put it back on the budget.
        let (digital, gains) = if self.freeze_holo {
            (digital, gains)
        } else {
            match scale_to_budget(&holo_weights, self.phi, &digital, self.config.power_budget) {
                Ok(v) => {
                    let g = compute_gains(self.channels, &holo_weights, self.phi, &v)?;
                    (v, g)
                }
                Err(Error::NoRadiatedPower) => (digital, gains),
                Err(e) => return Err(e),
            }
        };

        let record = IterationRecord {
            sum_rate: sum_rate(&gains, noise)?,
            weighted_sum_mse: weighted_sum_mse(&gains, &combiners, noise, &weights)?,
            power_used: radiated_power(&holo_weights, self.phi, &digital)?,
            max_w: holo_weights.max(),
            min_w: holo_weights.min(),
            objective_start,
            objective_after_digital,
            objective_after_holo,
        };
        *state = BeamformingState {
            digital,
            holo_weights,
            combiners,
            mse_weights: weights,
        };
        self.trace.records.push(record);
        self.trace.iterations_run += 1;
        Ok(self.trace.records.last().expect("just pushed"))
    }

    /// Iterate until the relative sum-rate change drops to `tol` or
    /// `max_iters` iterations have run.
    pub fn run_to_convergence(mut self) -> Result<(BeamformingState, RunTrace)> {
        let mut previous = self.trace.initial_sum_rate;
        while self.trace.iterations_run < self.settings.max_iters {
            let rate = self.step()?.sum_rate;
            if (rate - previous).abs() <= self.settings.tol * previous.max(1.0) {
                self.trace.converged = true;
                break;
            }
            previous = rate;
        }
        self.refresh_receivers()?;
        Ok((self.state, self.trace))
    }

    /// Run exactly `iterations` more iterations, ignoring the stopping rule.
    /// `converged` reports whether the rule was met at some point.
    pub fn run_fixed(mut self, iterations: usize) -> Result<(BeamformingState, RunTrace)> {
        let mut previous = self
            .trace
            .records
            .last()
            .map_or(self.trace.initial_sum_rate, |r| r.sum_rate);
        for _ in 0..iterations {
            let rate = self.step()?.sum_rate;
            if (rate - previous).abs() <= self.settings.tol * previous.max(1.0) {
                self.trace.converged = true;
            }
            previous = rate;
        }
        self.refresh_receivers()?;
        Ok((self.state, self.trace))
    }

    /// Match combiners and MSE weights to the current precoders.
    fn refresh_receivers(&mut self) -> Result<()> {
        let noise = &self.config.noise_vars;
        let gains = compute_gains(
            self.channels,
            &self.state.holo_weights,
            self.phi,
            &self.state.digital,
        )?;
        self.state.combiners = mmse_combiner(&gains, noise)?;
        let mse = mse_per_user(&gains, &self.state.combiners, noise)?;
        self.state.mse_weights = mse_weights(&mse)?;
        Ok(())
    }
}

/// Full run from the seeded initial point derived from `config.seed`.
pub fn run(
    config: &SystemConfig,
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    settings: &OptimizerSettings,
) -> Result<(BeamformingState, RunTrace)> {
    let state = initialize(config, channels, phi, settings, init_seed(config.seed))?;
    Optimizer::new(config, channels, phi, settings.clone(), state)?.run_to_convergence()
}

/// Apply a common phase to one precoder column. Used by invariance checks.
pub fn rotate_column(v: &mut DMatrix<Complex64>, column: usize, theta: f64) {
    let rot = Complex64::from_polar(1.0, theta);
    v.column_mut(column).iter_mut().for_each(|z| *z *= rot);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;
    use crate::geometry::{build_geometry, build_phase_matrix};

    fn scenario(
        users: usize,
        feeds: usize,
        rows: usize,
        cols: usize,
        snr_db: f64,
        seed: u64,
    ) -> (SystemConfig, ChannelSet, PhaseMatrix) {
        let config = SystemConfig {
            seed,
            ..SystemConfig::default()
        }
        .with_users_and_feeds(users, feeds)
        .with_surface(rows, cols)
        .with_snr_db(snr_db);
        let geom = build_geometry(&config).unwrap();
        let phi = build_phase_matrix(&geom, config.k_surface_mag);
        let channels = generate_channels(&config, &geom).unwrap();
        (config, channels, phi)
    }

    #[test]
    fn ones_init_meets_budget() {
        let (config, channels, phi) = scenario(3, 6, 5, 5, 0.0, 1);
        let s = initialize(&config, &channels, &phi, &OptimizerSettings::default(), 9).unwrap();
        assert!(s.holo_weights.iter().all(|&w| w == 1.0));
        let p = radiated_power(&s.holo_weights, &phi, &s.digital).unwrap();
        assert!((p - 1.0).abs() <= 1e-9);
        let again = initialize(&config, &channels, &phi, &OptimizerSettings::default(), 9).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn other_init_modes() {
        let (config, channels, phi) = scenario(2, 4, 4, 4, 0.0, 2);
        for (mode, check) in [
            (InitMode::Half, (|w: f64| w == 0.5) as fn(f64) -> bool),
            (InitMode::UniformRandom, |w: f64| (0.0..=1.0).contains(&w)),
        ] {
            let settings = OptimizerSettings {
                init_mode: mode,
                ..OptimizerSettings::default()
            };
            let s = initialize(&config, &channels, &phi, &settings, 5).unwrap();
            assert!(s.holo_weights.iter().all(|&w| check(w)));
            let p = radiated_power(&s.holo_weights, &phi, &s.digital).unwrap();
            assert!((p - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn settings_validation() {
        assert!(OptimizerSettings {
            tol: 0.0,
            ..OptimizerSettings::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerSettings {
            max_iters: 0,
            ..OptimizerSettings::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn single_iteration_budget() {
        let (config, channels, phi) = scenario(2, 4, 4, 4, 0.0, 3);
        let settings = OptimizerSettings {
            max_iters: 1,
            ..OptimizerSettings::default()
        };
        let (_, trace) = run(&config, &channels, &phi, &settings).unwrap();
        assert_eq!(trace.iterations_run, 1);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn scalar_system_opens_the_aperture() {
        for seed in 0..10 {
            let (config, channels, phi) = scenario(1, 1, 1, 1, 0.0, seed);
            let (state, trace) =
                run(&config, &channels, &phi, &OptimizerSettings::default()).unwrap();
            assert!(trace.converged && trace.iterations_run <= 5, "{trace:?}");
            assert_eq!(state.holo_weights[0], 1.0);
            // Exhaustive check over the aperture weight: rate peaks at w = 1.
            let rate_at = |w: f64| {
                let w = DVector::from_element(1, w);
                let v = scale_to_budget(&w, &phi, &state.digital, 1.0).unwrap();
                sum_rate(
                    &compute_gains(&channels, &w, &phi, &v).unwrap(),
                    &config.noise_vars,
                )
                .unwrap()
            };
            let best = (1..=1000)
                .map(|i| rate_at(i as f64 / 1000.0))
                .fold(0.0, f64::max);
            assert!(rate_at(1.0) >= best - 1e-12);
        }
    }

    #[test]
    fn runs_improve_and_respect_constraints() {
        for seed in 0..20 {
            let (config, channels, phi) = scenario(2, 4, 4, 4, 10.0, 1000 + seed);
            let (state, trace) =
                run(&config, &channels, &phi, &OptimizerSettings::default()).unwrap();
            assert!(
                trace.final_sum_rate() >= trace.initial_sum_rate,
                "seed {seed}"
            );
            let mut previous = trace.initial_sum_rate;
            for r in &trace.records {
                assert!(r.sum_rate >= previous - 1e-9, "seed {seed}");
                previous = r.sum_rate;
                assert!(r.min_w >= 0.0 && r.max_w <= 1.0);
                assert!((r.power_used - 1.0).abs() <= 1e-9);
                assert!(r.objective_after_digital <= r.objective_start + 1e-9);
                assert!(r.objective_after_holo <= r.objective_after_digital + 1e-9);
            }
            assert!(state.holo_weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }

    #[test]
    fn scaled_ridge_variant_stays_feasible() {
        let settings = OptimizerSettings {
            digital_update: DigitalUpdate::ScaledRidge,
            holo_update: HoloUpdate::Unconstrained,
            ..OptimizerSettings::default()
        };
        for seed in 0..10 {
            let (config, channels, phi) = scenario(3, 6, 5, 5, 0.0, 50 + seed);
            let (state, trace) = run(&config, &channels, &phi, &settings).unwrap();
            for r in &trace.records {
                assert!(r.min_w >= 0.0 && r.max_w <= 1.0);
                assert!((r.power_used - 1.0).abs() <= 1e-9);
                assert!(r.objective_after_holo <= r.objective_after_digital + 1e-9);
            }
            let p = radiated_power(&state.holo_weights, &phi, &state.digital).unwrap();
            assert!((p - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn settings_parse_with_defaults() {
        let s: OptimizerSettings =
            serde_json::from_str(r#"{"tol": 1e-3, "digital_update": "scaled-ridge"}"#).unwrap();
        assert_eq!(s.tol, 1e-3);
        assert_eq!(s.digital_update, DigitalUpdate::ScaledRidge);
        assert_eq!(s.holo_update, HoloUpdate::PowerCapped);
        assert_eq!(s.max_iters, 100);
    }

    #[test]
    fn run_is_deterministic() {
        let (config, channels, phi) = scenario(3, 6, 5, 5, 0.0, 42);
        let a = run(&config, &channels, &phi, &OptimizerSettings::default()).unwrap();
        let b = run(&config, &channels, &phi, &OptimizerSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_holographic_keeps_weights() {
        let (config, channels, phi) = scenario(2, 4, 3, 3, 5.0, 4);
        let settings = OptimizerSettings {
            init_mode: InitMode::UniformRandom,
            ..OptimizerSettings::default()
        };
        let s = initialize(&config, &channels, &phi, &settings, 1).unwrap();
        let w0 = s.holo_weights.clone();
        let (s, _) = Optimizer::new(&config, &channels, &phi, settings, s)
            .unwrap()
            .freeze_holographic()
            .run_to_convergence()
            .unwrap();
        assert_eq!(s.holo_weights, w0);
    }
}
