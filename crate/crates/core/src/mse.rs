//! Per-user MSE, the MMSE receive combiner, MSE weights and sum rate.
//!
//! Receiver convention: user `d` estimates its symbol as `conj(f_d) * y_d`,
//! so the MSE is
//! `|f_d|^2 (sum_k |g_dk|^2 + sigma_d^2) - 2 Re(conj(f_d) g_dd) + 1`
//! with `g_dk = h_d^H diag(w) Phi v_k`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{check_dim, Error, Result};
use crate::geometry::PhaseMatrix;

/// Optimization variables of the hybrid beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingState {
    /// `K x D` digital precoder, column `d` feeds user `d`.
    pub digital: DMatrix<Complex64>,
    /// Holographic amplitude per element, each in `[0, 1]`.
    pub holo_weights: DVector<f64>,
    pub combiners: DVector<Complex64>,
    pub mse_weights: DVector<f64>,
}

/// `g[(d, k)] = h_d^H W v_k`: row is the receiving user, column the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    pub g: DMatrix<Complex64>,
}

impl EffectiveGains {
    pub fn num_users(&self) -> usize {
        self.g.nrows()
    }

    /// Total received power at user `d` excluding noise.
    pub fn received_power(&self, d: usize) -> f64 {
        self.g.row(d).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn desired(&self, d: usize) -> Complex64 {
        self.g[(d, d)]
    }
}

/// `diag(w) * Phi`.
pub fn effective_matrix(w: &DVector<f64>, phi: &PhaseMatrix) -> Result<DMatrix<Complex64>> {
    check_dim("holographic weights", phi.num_elements(), w.len())?;
    let mut out = phi.phi.clone();
    for (m, mut row) in out.row_iter_mut().enumerate() {
        row *= Complex64::new(w[m], 0.0);
    }
    Ok(out)
}

/// Radiated power `Tr(W V V^H W^H) = ||W V||_F^2`.
pub fn radiated_power(w: &DVector<f64>, phi: &PhaseMatrix, v: &DMatrix<Complex64>) -> Result<f64> {
    check_dim("precoder rows", phi.num_feeds(), v.nrows())?;
    let wm = effective_matrix(w, phi)?;
    Ok((wm * v).norm_squared())
}

pub fn compute_gains(
    channels: &ChannelSet,
    w: &DVector<f64>,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
) -> Result<EffectiveGains> {
    check_dim(
        "channel length",
        phi.num_elements(),
        channels.num_elements(),
    )?;
    check_dim("precoder rows", phi.num_feeds(), v.nrows())?;
    check_dim("precoder columns", channels.num_users(), v.ncols())?;
    let transmitted = effective_matrix(w, phi)? * v;
    Ok(EffectiveGains {
        g: channels.channels.adjoint() * transmitted,
    })
}

/// MMSE combiner `f_d = g_dd / (sum_k |g_dk|^2 + sigma_d^2)`.
pub fn mmse_combiner(gains: &EffectiveGains, noise_vars: &[f64]) -> Result<DVector<Complex64>> {
    check_dim("noise variances", gains.num_users(), noise_vars.len())?;
    Ok(DVector::from_fn(gains.num_users(), |d, _| {
        gains.desired(d) / (gains.received_power(d) + noise_vars[d])
    }))
}

pub fn mse_per_user(
    gains: &EffectiveGains,
    combiners: &DVector<Complex64>,
    noise_vars: &[f64],
) -> Result<DVector<f64>> {
    check_dim("noise variances", gains.num_users(), noise_vars.len())?;
    check_dim("combiners", gains.num_users(), combiners.len())?;
    Ok(DVector::from_fn(gains.num_users(), |d, _| {
        let f = combiners[d];
        f.norm_sqr() * (gains.received_power(d) + noise_vars[d])
            - 2.0 * (f.conj() * gains.desired(d)).re
            + 1.0
    }))
}

/// `m_d = 1 / (ln 2 * MSE_d)`.
pub fn mse_weights(mse: &DVector<f64>) -> Result<DVector<f64>> {
    for (user, &value) in mse.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveMse { user, value });
        }
    }
    Ok(mse.map(|e| 1.0 / (LN_2 * e)))
}

/// `sum_d m_d MSE_d`.
pub fn weighted_sum_mse(
    gains: &EffectiveGains,
    combiners: &DVector<Complex64>,
    noise_vars: &[f64],
    weights: &DVector<f64>,
) -> Result<f64> {
    let mse = mse_per_user(gains, combiners, noise_vars)?;
    check_dim("MSE weights", mse.len(), weights.len())?;
    Ok(mse.dot(weights))
}

pub fn sinr(gains: &EffectiveGains, noise_vars: &[f64]) -> Result<DVector<f64>> {
    check_dim("noise variances", gains.num_users(), noise_vars.len())?;
    Ok(DVector::from_fn(gains.num_users(), |d, _| {
        let desired = gains.desired(d).norm_sqr();
        desired / (gains.received_power(d) - desired + noise_vars[d])
    }))
}

/// Achievable sum rate in bits/s/Hz.
pub fn sum_rate(gains: &EffectiveGains, noise_vars: &[f64]) -> Result<f64> {
    Ok(sinr(gains, noise_vars)?
        .iter()
        .map(|s| (1.0 + s).log2())
        .sum())
}
