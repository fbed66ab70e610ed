//! AMP recovery of the concatenated bin states with a BP-aware denoiser.
//!
//! Each iteration computes the residual with its Onsager correction,
//! `z = y − d Σ_b A_b s_b + (z_prev / n) · div`, forms the effective
//! observation `r_b = d s_b + A_bᵀ z`, and denoises every bin: a PME pass
//! seeds one (or more) BP rounds on the bin's outer graph, whose extrinsic
//! beliefs set per-entry priors for the final PME pass.

use rayon::prelude::*;

use crate::config::{Refinement, SystemConfig};
use crate::encoder::{compute_amplitudes, SparseState};
use crate::error::{Error, Result};
use crate::occupancy::{ml_epsilon_estimate, mmse_posterior_estimate, OccupancyEstimate, SumStatisticModel};
use crate::outer_code::{bp_round, BeliefState, OuterFactorGraph};
use crate::sensing::SensingOperator;

/// Lower bound for the effective noise level.
pub const TAU_FLOOR: f64 = 1e-9;

/// Posterior mean of a `{0, 1}` entry with prior `P(1) = q` observed as
/// `r = d·s + N(0, τ²)`, in logistic form.
pub fn pme(q: f64, r: f64, d: f64, tau: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let t = d * (r - 0.5 * d) / (tau * tau) + (q / (1.0 - q)).ln();
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `q = 1 − (1 − 2^{-v})^{K̂}`: probability a given entry of a section is hit
/// by at least one of `K̂` uniformly random codewords.
pub fn compute_q(k_hat: f64, v: u32) -> f64 {
    dynamic_prior(1.0 / (1u64 << v) as f64, k_hat)
}

/// `1 − (1 − λ)^{K̂}`, the prior that at least one of `K̂` codewords picks an
/// entry whose belief is `λ`.
pub fn dynamic_prior(lambda: f64, k_hat: f64) -> f64 {
    if k_hat <= 0.0 {
        return 0.0;
    }
    if lambda >= 1.0 {
        return 1.0;
    }
    -(k_hat * (-lambda.max(0.0)).ln_1p()).exp_m1()
}

/// Denoises one bin of the effective observation.
///
/// With `bp_rounds == 0` (or a check-free graph) this is the elementwise PME
/// with the constant prior [`compute_q`].
pub fn denoise_bin(
    r_bin: &[f64],
    k_hat: f64,
    graph: &OuterFactorGraph,
    d: f64,
    tau: f64,
    bp_rounds: usize,
) -> Result<Vec<f64>> {
    let q0 = compute_q(k_hat, graph.bits());
    if q0 == 0.0 {
        return Ok(vec![0.0; r_bin.len()]);
    }
    let initial: Vec<f64> = r_bin.iter().map(|&r| pme(q0, r, d, tau)).collect();
    if bp_rounds == 0 {
        return Ok(initial);
    }
    let mut state = BeliefState::new(graph);
    for _ in 0..bp_rounds {
        state = bp_round(&state, &initial, graph)?;
    }
    Ok(r_bin
        .iter()
        .zip(state.extrinsic())
        .map(|(&r, &lambda)| pme(dynamic_prior(lambda, k_hat), r, d, tau))
        .collect())
}

/// Divergence of `d·η` with respect to `r` when the priors are held fixed:
/// `(d²/τ²)(‖η‖₁ − ‖η‖₂²)`.
pub fn onsager_divergence(eta: &[f64], d: f64, tau: f64) -> f64 {
    let (l1, l2) = eta.iter().fold((0.0, 0.0), |(a, b), &x| (a + x.abs(), b + x * x));
    d * d / (tau * tau) * (l1 - l2)
}

/// `τ = sqrt(‖z‖² / n)`, floored at [`TAU_FLOOR`].
pub fn estimate_tau(z: &[f64]) -> f64 {
    if z.is_empty() {
        return TAU_FLOOR;
    }
    (z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64).sqrt().max(TAU_FLOOR)
}

/// Effective observation `r_b = d s_b + A_bᵀ z` for every bin.
pub fn effective_observation(
    s: &SparseState,
    z: &[f64],
    ops: &[SensingOperator],
    d: f64,
) -> Result<SparseState> {
    let blocks = ops
        .par_iter()
        .enumerate()
        .map(|(b, op)| {
            let mut r = op.adjoint(z)?;
            for (ri, si) in r.iter_mut().zip(s.block(b)) {
                *ri += d * si;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    SparseState::from_blocks(s.sections(), s.alphabet(), blocks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpOutput {
    /// `s^{(T)}`.
    pub state: SparseState,
    /// `τ_t` for every iteration.
    pub tau_trace: Vec<f64>,
    /// Occupancy used in the last denoising step (differs from the input only
    /// when a refinement is configured).
    pub occupancy: OccupancyEstimate,
}

fn refine(
    method: Refinement,
    r: &SparseState,
    k_hat: &mut OccupancyEstimate,
    cfg: &SystemConfig,
    d: f64,
    tau: f64,
) -> Result<()> {
    use crate::occupancy::OccupancyMethod;
    match method {
        Refinement::None => {}
        Refinement::MmsePosterior => {
            let model = SumStatisticModel {
                amplitude: d,
                tau,
                entries_per_section: cfg.alphabet(),
                sections: cfg.sections,
                total: cfg.active_devices,
                bins: cfg.bins,
            };
            let sums: Vec<f64> = r.blocks().map(|b| b.iter().sum()).collect();
            let total: f64 = sums.iter().sum();
            k_hat.k_hat = sums
                .iter()
                .map(|&rb| mmse_posterior_estimate(rb, total - rb, &model))
                .collect::<Result<_>>()?;
            k_hat.method = OccupancyMethod::MmsePosterior;
        }
        Refinement::MlEpsilon => {
            k_hat.k_hat = r
                .blocks()
                .map(|b| ml_epsilon_estimate(b, d, tau, cfg.alphabet(), cfg.active_devices).map(|(_, k)| k))
                .collect::<Result<_>>()?;
            k_hat.method = OccupancyMethod::MlEpsilon;
        }
    }
    Ok(())
}

/// Runs `cfg.amp_iterations` AMP iterations.
pub fn amp_decode(
    y_main: &[f64],
    ops: &[SensingOperator],
    k_hat: &OccupancyEstimate,
    cfg: &SystemConfig,
    graph: &OuterFactorGraph,
) -> Result<AmpOutput> {
    let n = y_main.len();
    if ops.len() != cfg.bins || k_hat.k_hat.len() != cfg.bins {
        return Err(Error::DimensionMismatch {
            expected: cfg.bins,
            actual: if ops.len() != cfg.bins { ops.len() } else { k_hat.k_hat.len() },
        });
    }
    if let Some(op) = ops.iter().find(|op| op.n_rows() != n || op.columns() != cfg.column_count()) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: op.n_rows(),
        });
    }
    let d = compute_amplitudes(cfg)?.main;
    let mut occupancy = k_hat.clone();
    let mut s = SparseState::for_config(cfg);
    let mut z_prev = vec![0.0; n];
    let mut divergence = 0.0;
    let mut tau_trace = Vec::with_capacity(cfg.amp_iterations);

    for t in 0..cfg.amp_iterations {
        let projections = ops
            .par_iter()
            .enumerate()
            .map(|(b, op)| op.forward(s.block(b)))
            .collect::<Result<Vec<_>>>()?;
        let correction = divergence / n as f64;
        let mut z: Vec<f64> = y_main
            .iter()
            .zip(&z_prev)
            .map(|(y, zp)| y + correction * zp)
            .collect();
        for proj in &projections {
            for (zi, p) in z.iter_mut().zip(proj) {
                *zi -= d * p;
            }
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                iteration: t,
                detail: "non-finite residual".into(),
            });
        }
        let tau = estimate_tau(&z);
        tau_trace.push(tau);

        let r = effective_observation(&s, &z, ops, d)?;
        if t > 0 {
            refine(cfg.occupancy_refinement, &r, &mut occupancy, cfg, d, tau)?;
        }
        let blocks = (0..cfg.bins)
            .into_par_iter()
            .map(|b| denoise_bin(r.block(b), occupancy.k_hat[b], graph, d, tau, cfg.bp_rounds_per_denoise))
            .collect::<Result<Vec<_>>>()?;
        s = SparseState::from_blocks(cfg.sections, cfg.alphabet(), blocks)?;
        if s.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                iteration: t,
                detail: "non-finite denoiser output".into(),
            });
        }
        divergence = onsager_divergence(s.as_slice(), d, tau);
        z_prev = z;
    }

    Ok(AmpOutput {
        state: s,
        tau_trace,
        occupancy,
    })
}
