//! Per-bin occupancy estimation.
//!
//! The pilot gives `y_b = d0·K_b + N(0, 1)` with `(K_1, …, K_B)` multinomial
//! `(K, 1/B)`; [`lmmse_estimate`] is the linear MMSE estimator for that model.
//! The AMP effective observation supports two further estimators:
//! [`mmse_posterior_estimate`] works from the bin sum `r_b` and the
//! complement sum `r_!b`, and [`ml_epsilon_estimate`] fits the per-entry
//! activity of one bin by maximum likelihood.

use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyMethod {
    Lmmse,
    MmsePosterior,
    MlEpsilon,
    Genie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyEstimate {
    /// `K̂_b` per bin, within `[0, K]`.
    pub k_hat: Vec<f64>,
    pub method: OccupancyMethod,
}

impl OccupancyEstimate {
    /// Exact occupancy, as a genie would report it.
    pub fn genie(counts: &[usize]) -> Self {
        OccupancyEstimate {
            k_hat: counts.iter().map(|&k| k as f64).collect(),
            method: OccupancyMethod::Genie,
        }
    }

    /// Mean absolute error against the true counts.
    pub fn mean_abs_error(&self, counts: &[usize]) -> f64 {
        let n = counts.len().max(1) as f64;
        self.k_hat.iter().zip(counts).map(|(k, &c)| (k - c as f64).abs()).sum::<f64>() / n
    }
}

/// Linear MMSE occupancy estimate from the pilot.
///
/// With `Σ = (K/B)(I − 11ᵀ/B)` the gain `Σ d0 (d0² Σ + I)^{-1}` collapses to
/// `g (I − 11ᵀ/B)` with `g = d0 K/B / (1 + d0² K/B)`, so
/// `K̂_b = K/B + g (y_b − ȳ)`, clamped to `[0, K]`.
pub fn lmmse_estimate(y_pilot: &[f64], d0: f64, total: usize, bins: usize) -> Result<OccupancyEstimate> {
    if y_pilot.len() != bins {
        return Err(Error::DimensionMismatch {
            expected: bins,
            actual: y_pilot.len(),
        });
    }
    if !(d0 > 0.0) {
        return Err(Error::Config(format!("pilot amplitude d0 = {d0} must be positive")));
    }
    let k = total as f64;
    let b = bins as f64;
    let prior_mean = k / b;
    let gain = d0 * prior_mean / (1.0 + d0 * d0 * prior_mean);
    let y_bar = y_pilot.iter().sum::<f64>() / b;
    let k_hat = y_pilot
        .iter()
        .map(|&y| (prior_mean + gain * (y - y_bar)).clamp(0.0, k))
        .collect();
    Ok(OccupancyEstimate {
        k_hat,
        method: OccupancyMethod::Lmmse,
    })
}

/// Large-system Gaussian model of the effective-observation sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumStatisticModel {
    /// Signal amplitude `d`.
    pub amplitude: f64,
    /// Effective noise level `τ`.
    pub tau: f64,
    /// Entries per section, `m = 2^v`.
    pub entries_per_section: usize,
    /// Sections `L`.
    pub sections: usize,
    /// Total active devices `K`.
    pub total: usize,
    pub bins: usize,
}

/// Posterior mean of `K_b` given `r_b ~ N(dLK_b, mLτ²)` and
/// `r_!b ~ N(dL(K − K_b), mL(B−1)τ²)` (conditionally independent) under the
/// binomial `(K, 1/B)` prior. Evaluated in the log domain.
pub fn mmse_posterior_estimate(r_bin: f64, r_rest: f64, model: &SumStatisticModel) -> Result<f64> {
    let SumStatisticModel {
        amplitude: d,
        tau,
        entries_per_section: m,
        sections: l,
        total,
        bins,
    } = *model;
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau = {tau} must be positive")));
    }
    if !r_bin.is_finite() || !r_rest.is_finite() {
        return Err(Error::NonFinite("sum statistic"));
    }
    if bins <= 1 {
        return Ok(total as f64);
    }
    let (k, b, l, m) = (total as f64, bins as f64, l as f64, m as f64);
    let var_bin = m * l * tau * tau;
    let var_rest = var_bin * (b - 1.0);
    let log_weights: Vec<f64> = (0..=total)
        .map(|kb| {
            let kb_f = kb as f64;
            let prior = ln_binomial(total as u64, kb as u64) + (k - kb_f) * (b - 1.0).ln() - k * b.ln();
            let e1 = r_bin - d * l * kb_f;
            let e2 = r_rest - d * l * (k - kb_f);
            prior - e1 * e1 / (2.0 * var_bin) - e2 * e2 / (2.0 * var_rest)
        })
        .collect();
    let peak = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (kb, lw) in log_weights.iter().enumerate() {
        let w = (lw - peak).exp();
        num += kb as f64 * w;
        den += w;
    }
    Ok((num / den).clamp(0.0, k))
}

/// Terms `(g − 1)/(1 + ε(g − 1))` of the ε-likelihood derivative, with
/// `g = exp(u)`, written to stay finite when `g` overflows.
fn stationarity_term(u: f64, eps: f64) -> f64 {
    if u > 0.0 {
        let e = (-u).exp();
        (1.0 - e) / (eps + (1.0 - eps) * e)
    } else {
        let gm1 = u.exp_m1();
        gm1 / (1.0 + eps * gm1)
    }
}

/// Derivative of the ε log-likelihood `Σ log(1 − ε + ε g)` for one bin.
pub fn epsilon_score(r_bin: &[f64], d: f64, tau: f64, eps: f64) -> f64 {
    let t2 = tau * tau;
    r_bin
        .iter()
        .map(|&r| stationarity_term(d * r / t2 - d * d / (2.0 * t2), eps))
        .sum()
}

/// Maximum-likelihood per-entry activity `ε̂` for one bin and the occupancy
/// it implies, `K̂_b = ln(1 − ε̂)/ln(1 − 2^{-v})`, clamped to `[0, K]`.
///
/// The score is strictly decreasing in `ε`, so the root is bracketed on
/// `[0, 1]` and found by safeguarded Newton steps.
pub fn ml_epsilon_estimate(
    r_bin: &[f64],
    d: f64,
    tau: f64,
    alphabet: usize,
    total: usize,
) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau = {tau} must be positive")));
    }
    if r_bin.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("effective observation"));
    }
    let score = |eps: f64| epsilon_score(r_bin, d, tau, eps);
    let eps = if r_bin.is_empty() || score(0.0) <= 0.0 {
        0.0
    } else if score(1.0) >= 0.0 {
        1.0
    } else {
        let t2 = tau * tau;
        let us: Vec<f64> = r_bin.iter().map(|&r| d * r / t2 - d * d / (2.0 * t2)).collect();
        let slope = |eps: f64| -> f64 { -us.iter().map(|&u| stationarity_term(u, eps).powi(2)).sum::<f64>() };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = 0.5;
        let tol = 1e-9 * r_bin.len() as f64;
        for _ in 0..200 {
            let f = score(x);
            if f.abs() < tol {
                break;
            }
            if f > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / slope(x);
            x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-300 {
                break;
            }
        }
        x
    };
    let k_hat = if eps >= 1.0 {
        total as f64
    } else {
        ((-eps).ln_1p() / (-(1.0 / alphabet as f64)).ln_1p()).clamp(0.0, total as f64)
    };
    Ok((eps, k_hat))
}
