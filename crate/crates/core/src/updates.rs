//! Closed-form block updates. The digital precoder is either solved exactly
//! on the power sphere or ridge-solved and rescaled. Holographic weights are
//! updated one element at a time.
//!
//! With the combiners `f`, MSE weights `m` and precoder `V` fixed, the
//! weighted sum-MSE is an exact quadratic in each holographic weight:
//!
//! ```text
//! J(w_m) = a_m w_m^2 - 2 b_m w_m + const
//! u_dl   = conj(h_d[m]) * (Phi V)[m, l]
//! c_dl   = g_dl - u_dl w_m                  (contribution of the other elements)
//! a_m    = sum_d m_d |f_d|^2 sum_l |u_dl|^2
//! b_m    = sum_d m_d ( Re(conj(f_d) u_dd) - |f_d|^2 sum_l Re(conj(c_dl) u_dl) )
//! ```
//!
//! The `c_dl` cross terms couple element `m` to the rest of the surface.
//! The sweep keeps the gain matrix `g` current after every element so each
//! coefficient pair costs `O(KD + D^2)` and a sweep stays linear in `M`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{check_dim, Error, Result};
use crate::geometry::PhaseMatrix;
use crate::mse::{compute_gains, effective_matrix, radiated_power};

/// Condition estimate above which the digital normal equations are rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Relative ridge used by default on the digital normal equations.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-8;

/// Per-element coefficients of the weighted sum-MSE,
/// `J(w_m) = a[m] w_m^2 - 2 b[m] w_m + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoeffs {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

/// Unconstrained minimizer of the frozen-combiner weighted sum-MSE over `V`,
/// regularized by `ridge_scale * tr(A) / K`, before power scaling.
pub fn solve_digital_unscaled(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    w: &DVector<f64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    ridge_scale: f64,
) -> Result<DMatrix<Complex64>> {
    let users = channels.num_users();
    let feeds = phi.num_feeds();
    check_dim(
        "channel length",
        phi.num_elements(),
        channels.num_elements(),
    )?;
    check_dim("combiners", users, combiners.len())?;
    check_dim("MSE weights", users, mse_weights.len())?;

    // Column d is W^H h_d.
    let eff = effective_matrix(w, phi)?.adjoint() * &channels.channels;
    let mut scaled = eff.clone();
    for d in 0..users {
        let s = mse_weights[d] * combiners[d].norm_sqr();
        scaled.column_mut(d).scale_mut(s);
    }
    let mut normal = &scaled * eff.adjoint();
    let trace = normal.trace().re;
    if !(trace > 0.0) {
        return Err(Error::Degenerate);
    }
    let ridge = ridge_scale * trace / feeds as f64;
    for k in 0..feeds {
        normal[(k, k)] += ridge;
    }
    // Hermitian by construction; symmetrize away rounding before factorizing.
    let normal = (&normal + normal.adjoint()) * Complex64::new(0.5, 0.0);

    let eigen = normal.clone().symmetric_eigenvalues();
    let max = eigen.max();
    let min = eigen.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }

    let mut rhs = eff;
    for d in 0..users {
        let s = combiners[d] * mse_weights[d];
        rhs.column_mut(d).iter_mut().for_each(|z| *z *= s);
    }
    let chol = normal
        .cholesky()
        .ok_or(Error::SingularSystem { condition })?;
    Ok(chol.solve(&rhs))
}

/// Rescale all columns jointly so that `||diag(w) Phi V||_F^2 = alpha`.
pub fn scale_to_budget(
    w: &DVector<f64>,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    let power = radiated_power(w, phi, v)?;
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::NoRadiatedPower);
    }
    Ok(v * Complex64::new((alpha / power).sqrt(), 0.0))
}

pub fn update_digital(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    w: &DVector<f64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    alpha: f64,
    ridge_scale: f64,
) -> Result<DMatrix<Complex64>> {
    let v = solve_digital_unscaled(channels, phi, w, combiners, mse_weights, ridge_scale)?;
    scale_to_budget(w, phi, &v, alpha)
}

/// Exact minimizer of the frozen-combiner weighted sum-MSE over `V` on the
/// sphere `||diag(w) Phi V||_F^2 = alpha`.
///
/// Stationarity of the Lagrangian gives `(A + mu Q) v_d = m_d f_d W^H h_d`
/// with `Q = W^H W`. Whitening by `Q` on its range turns this into a
/// trust-region subproblem with an equality constraint, whose global
/// solution takes the unique `mu > -lambda_min` that meets the budget.
/// Directions in the null space of `W` radiate nothing and are left at zero.
pub fn update_digital_constrained(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    w: &DVector<f64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    alpha: f64,
) -> Result<DMatrix<Complex64>> {
    let users = channels.num_users();
    check_dim(
        "channel length",
        phi.num_elements(),
        channels.num_elements(),
    )?;
    check_dim("combiners", users, combiners.len())?;
    check_dim("MSE weights", users, mse_weights.len())?;

    let wm = effective_matrix(w, phi)?;
    let gram = wm.adjoint() * &wm;
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let q = gram.symmetric_eigen();
    let q_max = q.eigenvalues.max();
    if !(q_max > 0.0) {
        return Err(Error::NoRadiatedPower);
    }
    let keep: Vec<usize> = (0..q.eigenvalues.len())
        .filter(|&i| q.eigenvalues[i] > 1e-12 * q_max)
        .collect();
    // Columns of `t` map whitened coordinates back to feed space.
    let t = DMatrix::from_fn(phi.num_feeds(), keep.len(), |r, c| {
        q.eigenvectors[(r, keep[c])] / q.eigenvalues[keep[c]].sqrt()
    });

    let eff = wm.adjoint() * &channels.channels;
    let eff_t = t.adjoint() * &eff;
    let mut scaled = eff_t.clone();
    let mut rhs = eff_t.clone();
    for d in 0..users {
        scaled
            .column_mut(d)
            .scale_mut(mse_weights[d] * combiners[d].norm_sqr());
        let s = combiners[d] * mse_weights[d];
        rhs.column_mut(d).iter_mut().for_each(|z| *z *= s);
    }
    let normal = &scaled * eff_t.adjoint();
    let normal = (&normal + normal.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = normal.symmetric_eigen();
    let lam = &eig.eigenvalues;
    let coeffs = eig.eigenvectors.adjoint() * &rhs;
    let energy: Vec<f64> = coeffs
        .row_iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let total: f64 = energy.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate);
    }

    let (low_idx, low) = lam
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, l)| if l < acc.1 { (i, l) } else { acc },
        );
    // With shift s = mu + lambda_min > 0 the radiated power is
    // sum_i energy_i / (lambda_i - lambda_min + s)^2, decreasing in s.
    let power_at = |shift: f64| -> f64 {
        lam.iter()
            .zip(&energy)
            .map(|(&l, &e)| e / (l - low + shift).powi(2))
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = (total / alpha).sqrt();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power_at(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = hi;
    let mut whitened = coeffs.clone();
    for (i, mut row) in whitened.row_iter_mut().enumerate() {
        row /= Complex64::new(lam[i] - low + shift, 0.0);
    }
    // Hard case: the linear term misses the lowest mode, so the budget is
    // filled along that mode instead.
    let deficit = alpha - power_at(shift);
    if deficit > 1e-9 * alpha {
        whitened[(low_idx, 0)] += Complex64::new(deficit.sqrt(), 0.0);
    }
    let v = t * (eig.eigenvectors * whitened);
    scale_to_budget(w, phi, &v, alpha)
}

/// Coefficients for one element given the current gains.
///
/// `h` holds `h_d[m]` for every user and `z` holds `(Phi V)[m, l]` for every
/// stream.
fn element_coefficients(
    h: &[Complex64],
    z: &[Complex64],
    gains: &DMatrix<Complex64>,
    w_m: f64,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
) -> (f64, f64) {
    let users = h.len();
    let z_energy: f64 = z.iter().map(|x| x.norm_sqr()).sum();
    let mut a = 0.0;
    let mut b = 0.0;
    for d in 0..users {
        let hc = h[d].conj();
        let f = combiners[d];
        let f2 = f.norm_sqr();
        a += mse_weights[d] * f2 * h[d].norm_sqr() * z_energy;

        let mut cross = 0.0;
        for l in 0..users {
            let u = hc * z[l];
            let others = gains[(d, l)] - u * w_m;
            cross += (others.conj() * u).re;
        }
        let desired = (f.conj() * hc * z[d]).re;
        b += mse_weights[d] * (desired - f2 * cross);
    }
    (a, b)
}

/// `(Phi V)[m, l]` for every element and stream.
fn feed_mix(phi: &PhaseMatrix, v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    check_dim("precoder rows", phi.num_feeds(), v.nrows())?;
    Ok(&phi.phi * v)
}

#[allow(clippy::too_many_arguments)]
pub fn extract_quadratic(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    w: &DVector<f64>,
    m_index: usize,
) -> Result<(f64, f64)> {
    if m_index >= phi.num_elements() {
        return Err(Error::IndexOutOfRange {
            index: m_index,
            len: phi.num_elements(),
        });
    }
    let users = channels.num_users();
    check_dim("combiners", users, combiners.len())?;
    check_dim("MSE weights", users, mse_weights.len())?;
    let gains = compute_gains(channels, w, phi, v)?;
    let h: Vec<Complex64> = channels.channels.row(m_index).iter().copied().collect();
    let z: Vec<Complex64> = (phi.phi.row(m_index) * v).iter().copied().collect();
    Ok(element_coefficients(
        &h,
        &z,
        &gains.g,
        w[m_index],
        combiners,
        mse_weights,
    ))
}

/// Coefficients of every element at the current `w` (each with the others
/// held fixed).
pub fn quadratic_coeffs(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<QuadraticCoeffs> {
    let users = channels.num_users();
    check_dim("combiners", users, combiners.len())?;
    check_dim("MSE weights", users, mse_weights.len())?;
    let gains = compute_gains(channels, w, phi, v)?;
    let mix = feed_mix(phi, v)?;
    let elements = phi.num_elements();
    let mut a = DVector::zeros(elements);
    let mut b = DVector::zeros(elements);
    for m in 0..elements {
        let h: Vec<Complex64> = channels.channels.row(m).iter().copied().collect();
        let z: Vec<Complex64> = mix.row(m).iter().copied().collect();
        let (am, bm) = element_coefficients(&h, &z, &gains.g, w[m], combiners, mse_weights);
        a[m] = am;
        b[m] = bm;
    }
    Ok(QuadraticCoeffs { a, b })
}

/// Minimize `a w^2 - 2 b w` over `[0, 1]`; flat elements keep `w_prev`.
pub fn update_holo_element(a: f64, b: f64, w_prev: f64) -> f64 {
    if a > 1e-14 * (1.0 + b.abs()) {
        (b / a).clamp(0.0, 1.0)
    } else {
        w_prev
    }
}

/// One Gauss-Seidel sweep over the elements in ascending order.
pub fn update_holo_all(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    sweep(channels, phi, v, combiners, mse_weights, w, None)
}

/// Sweep that also keeps the radiated power `sum_m w_m^2 ||(Phi V)[m, :]||^2`
/// at or below `alpha`.
///
/// The power is separable in `w`, so each element just gets a tighter upper
/// bound. If `w` starts over the budget, the first elements absorb the excess.
pub fn update_holo_all_capped(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    w: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    sweep(channels, phi, v, combiners, mse_weights, w, Some(alpha))
}

fn sweep(
    channels: &ChannelSet,
    phi: &PhaseMatrix,
    v: &DMatrix<Complex64>,
    combiners: &DVector<Complex64>,
    mse_weights: &DVector<f64>,
    w: &DVector<f64>,
    budget: Option<f64>,
) -> Result<DVector<f64>> {
    let users = channels.num_users();
    check_dim("combiners", users, combiners.len())?;
    check_dim("MSE weights", users, mse_weights.len())?;
    let mut gains = compute_gains(channels, w, phi, v)?.g;
    let mix = feed_mix(phi, v)?;
    let row_power: Vec<f64> = mix
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mut power: f64 = w.iter().zip(&row_power).map(|(x, p)| x * x * p).sum();
    let mut w = w.clone();
    let mut h = vec![Complex64::new(0.0, 0.0); users];
    let mut z = vec![Complex64::new(0.0, 0.0); users];
    for m in 0..phi.num_elements() {
        for d in 0..users {
            h[d] = channels.channels[(m, d)];
            z[d] = mix[(m, d)];
        }
        let (a, b) = element_coefficients(&h, &z, &gains, w[m], combiners, mse_weights);
        let mut next = update_holo_element(a, b, w[m]);
        let others = power - w[m] * w[m] * row_power[m];
        if let Some(alpha) = budget {
            if row_power[m] > 0.0 {
                let mut cap = ((alpha - others).max(0.0) / row_power[m]).sqrt().min(1.0);
                if power <= alpha * (1.0 + 1e-12) {
                    // Staying put is feasible; do not let rounding push below it.
                    cap = cap.max(w[m]);
                }
                if next > cap {
                    // The objective is convex in w_m, so the best feasible
                    // point above the minimizer is the cap itself.
                    next = cap;
                }
            }
        }
        let delta = next - w[m];
        if delta != 0.0 {
            for d in 0..users {
                let hc = h[d].conj() * delta;
                for l in 0..users {
                    gains[(d, l)] += hc * z[l];
                }
            }
            w[m] = next;
            power = others + next * next * row_power[m];
        }
    }
    Ok(w)
}
