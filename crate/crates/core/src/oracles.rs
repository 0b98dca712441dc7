//! Reference implementations used to check the closed-form updates: the
//! random holographic-weights baseline and brute-force oracles.
//!
//! The oracles evaluate the weighted sum-MSE with their own scalar loops over
//! `h`, `w`, `Phi` and `V`, so agreement with the closed forms is not
//! circular.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channels, ChannelSet};
use crate::config::{surface_shape, SystemConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, build_phase_matrix, PhaseMatrix};
use crate::mse::BeamformingState;
use crate::optimizer::{initial_state, Optimizer, OptimizerSettings};
use crate::seeds::{derive_seed, RANDOM_W_STREAM};

/// A complete problem instance plus a state to evaluate objectives at.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub phi: PhaseMatrix,
    pub noise_vars: Vec<f64>,
    pub state: BeamformingState,
}

/// Random instance with `users` users, `feeds` feeds and `elements` surface
/// elements. Channels come from the seeded path model; noise variances are
/// uniform on `[0.1, 2]`, holographic weights uniform on `[0.05, 1]`, and the
/// precoder is Gaussian scaled onto a unit power budget. Combiners and MSE
/// weights are the MMSE ones for that state.
pub fn random_instance(users: usize, feeds: usize, elements: usize, seed: u64) -> Instance {
    let (rows, cols) = surface_shape(elements);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x1257));
    let noise_vars: Vec<f64> = (0..users).map(|_| rng.random_range(0.1..2.0)).collect();
    let config = SystemConfig {
        seed,
        noise_vars: noise_vars.clone(),
        ..SystemConfig::default()
    }
    .with_surface(rows, cols);
    let config = SystemConfig {
        num_users: users,
        num_feeds: feeds,
        ..config
    };
    let geom = build_geometry(&config).expect("valid random instance");
    let phi = build_phase_matrix(&geom, config.k_surface_mag);
    let channels = generate_channels(&config, &geom).expect("valid random instance");
    let w = DVector::from_fn(elements, |_, _| rng.random_range(0.05..=1.0));
    let state =
        initial_state(&config, &channels, &phi, w, &mut rng).expect("valid random instance");
    Instance {
        config,
        channels,
        phi,
        noise_vars,
        state,
    }
}

/// Worst-case disagreement between a closed form and its oracle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub max_abs_discrepancy: f64,
    pub location: String,
    pub samples_checked: usize,
}

impl OracleReport {
    pub fn record(&mut self, discrepancy: f64, location: impl FnOnce() -> String) {
        self.samples_checked += 1;
        let discrepancy = discrepancy.abs();
        if discrepancy > self.max_abs_discrepancy || self.samples_checked == 1 {
            self.max_abs_discrepancy = discrepancy;
            self.location = location();
        }
    }
}

/// Weighted sum-MSE by direct accumulation, for arbitrary precoder, weights
/// and combiners.
pub fn naive_weighted_sum_mse(
    inst: &Instance,
    digital: &DMatrix<Complex64>,
    holo_weights: &DVector<f64>,
    combiners: &DVector<Complex64>,
) -> f64 {
    let h = &inst.channels.channels;
    let phi = &inst.phi.phi;
    let users = h.ncols();
    let mut total = 0.0;
    for d in 0..users {
        let mut received = 0.0;
        let mut desired = Complex64::new(0.0, 0.0);
        for l in 0..users {
            let mut g = Complex64::new(0.0, 0.0);
            for m in 0..h.nrows() {
                let mut mix = Complex64::new(0.0, 0.0);
                for k in 0..phi.ncols() {
                    mix += phi[(m, k)] * digital[(k, l)];
                }
                g += h[(m, d)].conj() * holo_weights[m] * mix;
            }
            received += g.norm_sqr();
            if l == d {
                desired = g;
            }
        }
        let f = combiners[d];
        let mse =
            f.norm_sqr() * (received + inst.noise_vars[d]) - 2.0 * (f.conj() * desired).re + 1.0;
        total += inst.state.mse_weights[d] * mse;
    }
    total
}

/// The frozen-state objective of `inst`.
pub fn objective(inst: &Instance) -> f64 {
    let s = &inst.state;
    naive_weighted_sum_mse(inst, &s.digital, &s.holo_weights, &s.combiners)
}

/// Grid minimizer of the weighted sum-MSE over `w_m` alone, on
/// `{0, step, 2 step, ..., 1}`.
pub fn grid_oracle_w(inst: &Instance, m_index: usize, step: f64) -> Result<f64> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::invalid("step", "must lie in (0, 0.1]"));
    }
    let len = inst.state.holo_weights.len();
    if m_index >= len {
        return Err(Error::IndexOutOfRange {
            index: m_index,
            len,
        });
    }
    let s = &inst.state;
    let mut w = s.holo_weights.clone();
    let points = (1.0 / step).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=points {
        let x = (i as f64 * step).min(1.0);
        w[m_index] = x;
        let value = naive_weighted_sum_mse(inst, &s.digital, &w, &s.combiners);
        if value < best.0 {
            best = (value, x);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Empirical `E|conj(f) y - s_user|^2` for
/// `y = sum_k gains_row[k] s_k + n`, with unit-power circular Gaussian
/// symbols and `n ~ CN(0, noise_var)`.
pub fn mc_mse_oracle(
    gains_row: &[Complex64],
    user: usize,
    combiner: Complex64,
    noise_var: f64,
    num_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if num_samples < 10_000 {
        return Err(Error::invalid("num_samples", "need at least 10^4 samples"));
    }
    if user >= gains_row.len() {
        return Err(Error::IndexOutOfRange {
            index: user,
            len: gains_row.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_sd = (noise_var / 2.0).sqrt();
    let mut symbols = vec![Complex64::new(0.0, 0.0); gains_row.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..num_samples {
        for s in symbols.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s = Complex64::new(re, im) * FRAC_1_SQRT_2;
        }
        let nre: f64 = rng.sample(StandardNormal);
        let nim: f64 = rng.sample(StandardNormal);
        let mut y = Complex64::new(nre * noise_sd, nim * noise_sd);
        for (g, s) in gains_row.iter().zip(&symbols) {
            y += g * s;
        }
        let err = (combiner.conj() * y - symbols[user]).norm_sqr();
        sum += err;
        sum_sq += err * err;
    }
    let n = num_samples as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_err: (var.max(0.0) / n).sqrt(),
    })
}

/// Real parameters differentiated by [`fd_gradient_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// Re/Im of every combiner entry.
    Combiners,
    /// Re/Im of one user's combiner.
    Combiner(usize),
    /// Re/Im of every precoder entry, column-major.
    Precoder,
    HoloWeight(usize),
}

/// Central-difference gradient of the weighted sum-MSE of `inst` with
/// respect to `variable`.
pub fn fd_gradient_oracle(inst: &Instance, variable: Variable, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::invalid("step", "must lie in (0, 1e-3]"));
    }
    let s = &inst.state;
    let users = s.combiners.len();
    let eval = |v: &DMatrix<Complex64>, w: &DVector<f64>, f: &DVector<Complex64>| {
        naive_weighted_sum_mse(inst, v, w, f)
    };
    let units = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let mut grad = Vec::new();
    match variable {
        Variable::Combiners | Variable::Combiner(_) => {
            let range = match variable {
                Variable::Combiner(d) if d >= users => {
                    return Err(Error::IndexOutOfRange {
                        index: d,
                        len: users,
                    })
                }
                Variable::Combiner(d) => d..d + 1,
                _ => 0..users,
            };
            for d in range {
                for unit in units {
                    let mut plus = s.combiners.clone();
                    plus[d] += unit * step;
                    let mut minus = s.combiners.clone();
                    minus[d] -= unit * step;
                    grad.push(
                        (eval(&s.digital, &s.holo_weights, &plus)
                            - eval(&s.digital, &s.holo_weights, &minus))
                            / (2.0 * step),
                    );
                }
            }
        }
        Variable::Precoder => {
            for idx in 0..s.digital.len() {
                for unit in units {
                    let mut plus = s.digital.clone();
                    plus[idx] += unit * step;
                    let mut minus = s.digital.clone();
                    minus[idx] -= unit * step;
                    grad.push(
                        (eval(&plus, &s.holo_weights, &s.combiners)
                            - eval(&minus, &s.holo_weights, &s.combiners))
                            / (2.0 * step),
                    );
                }
            }
        }
        Variable::HoloWeight(m) => {
            let len = s.holo_weights.len();
            if m >= len {
                return Err(Error::IndexOutOfRange { index: m, len });
            }
            let mut plus = s.holo_weights.clone();
            plus[m] += step;
            let mut minus = s.holo_weights.clone();
            minus[m] -= step;
            grad.push(
                (eval(&s.digital, &plus, &s.combiners) - eval(&s.digital, &minus, &s.combiners))
                    / (2.0 * step),
            );
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub state: BeamformingState,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Starting point of the random-weight benchmark: `w` uniform on `[0, 1]`
/// and a Gaussian precoder on the budget, both drawn from `seed`.
pub fn random_w_start(
    config: &SystemConfig,
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    seed: u64,
) -> Result<BeamformingState> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, RANDOM_W_STREAM));
    let w = DVector::from_fn(phi.num_elements(), |_, _| rng.random_range(0.0..=1.0));
    initial_state(config, channels, phi, w, &mut rng)
}

/// Holographic weights drawn i.i.d. uniform on `[0, 1]` and frozen; the
/// digital side then runs the combiner / weight / precoder loop until the
/// sum rate settles.
pub fn random_w_baseline(
    config: &SystemConfig,
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<BaselineOutcome> {
    let state = random_w_start(config, channels, phi, seed)?;
    let (state, trace) = Optimizer::new(config, channels, phi, settings.clone(), state)?
        .freeze_holographic()
        .run_to_convergence()?;
    Ok(BaselineOutcome {
        state,
        sum_rate: trace.final_sum_rate(),
        iterations: trace.iterations_run,
        converged: trace.converged,
    })
}
