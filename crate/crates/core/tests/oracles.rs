//! Estimators checked against independent reference computations.

use coded_demixing::occupancy::{
    epsilon_score, lmmse_estimate, ml_epsilon_estimate, mmse_posterior_estimate, SumStatisticModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

mod common;
use common::{dense_lmmse, mixture, pilot_draw, MMSE_REFERENCE};

#[test]
fn mmse_posterior_matches_high_precision_reference() {
    for &(total, bins, m, l, d, tau, rb, rr, expected) in &MMSE_REFERENCE {
        let model = SumStatisticModel {
            amplitude: d,
            tau,
            entries_per_section: m,
            sections: l,
            total,
            bins,
        };
        let got = mmse_posterior_estimate(rb, rr, &model).unwrap();
        assert!(
            (got - expected).abs() < 1e-8,
            "K={total} B={bins}: {got} vs {expected}"
        );
    }
}

#[test]
fn lmmse_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for &(total, bins, d0) in &[(24, 2, 0.3), (24, 4, 1.1), (64, 8, 0.7), (8, 2, 2.0), (5, 16, 0.4)] {
        for _ in 0..50 {
            let (_, y) = pilot_draw(&mut rng, total, bins, d0);
            let fast = lmmse_estimate(&y, d0, total, bins).unwrap();
            let dense = dense_lmmse(&y, d0, total, bins);
            for (f, e) in fast.k_hat.iter().zip(&dense) {
                let expected = e.clamp(0.0, total as f64);
                assert!((f - expected).abs() < 1e-10 * (1.0 + expected.abs()), "{f} vs {expected}");
            }
        }
    }
}

/// Exact posterior mean of `K_1` for two bins, by enumeration.
fn exact_two_bin_posterior(y: &[f64], d0: f64, total: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k1 in 0..=total {
        let k2 = total - k1;
        let prior = statrs::function::factorial::binomial(total as u64, k1 as u64);
        let e1 = y[0] - d0 * k1 as f64;
        let e2 = y[1] - d0 * k2 as f64;
        let w = prior * (-0.5 * (e1 * e1 + e2 * e2)).exp();
        num += k1 as f64 * w;
        den += w;
    }
    num / den
}

#[test]
fn lmmse_against_exact_posterior_mean() {
    let (total, d0) = (8usize, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 10_000;
    let (mut mse_lin, mut mse_exact) = (0.0, 0.0);
    for _ in 0..trials {
        let k1 = (0..total).filter(|_| rng.random_bool(0.5)).count();
        let counts = [k1, total - k1];
        let y: Vec<f64> = counts
            .iter()
            .map(|&k| d0 * k as f64 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lin = lmmse_estimate(&y, d0, total, 2).unwrap().k_hat[0];
        let exact = exact_two_bin_posterior(&y, d0, total);
        mse_lin += (lin - k1 as f64).powi(2) / trials as f64;
        mse_exact += (exact - k1 as f64).powi(2) / trials as f64;
    }
    let prior_var = total as f64 * 0.25;
    assert!(mse_lin < prior_var, "LMMSE mse {mse_lin} vs prior {prior_var}");
    assert!(mse_exact <= mse_lin + 1e-3, "posterior mean {mse_exact} worse than LMMSE {mse_lin}");
    assert!(mse_lin < 0.3, "d0 = 2 should resolve counts closely, mse {mse_lin}");
}

#[test]
fn ml_epsilon_is_stationary_and_consistent() {
    let (v, l, eps) = (10u32, 16usize, 0.01);
    let alphabet = 1usize << v;
    let (d, tau) = (3.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 100;
    let mut mean = 0.0;
    for _ in 0..trials {
        let r = mixture(&mut rng, eps, l * alphabet, d, tau);
        let (eps_hat, k_hat) = ml_epsilon_estimate(&r, d, tau, alphabet, 64).unwrap();
        assert!(eps_hat > 0.0 && eps_hat < 1.0);
        let residual = epsilon_score(&r, d, tau, eps_hat).abs() / r.len() as f64;
        assert!(residual < 1e-6, "stationarity residual {residual}");
        let implied = (1.0 - eps_hat).ln() / (1.0 - 1.0 / alphabet as f64).ln();
        assert!((k_hat - implied.clamp(0.0, 64.0)).abs() < 1e-9);
        mean += eps_hat / trials as f64;
    }
    assert!((mean - eps).abs() < 0.2 * eps, "mean eps_hat {mean}");
}
