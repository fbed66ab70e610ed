#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// (K, B, m, L, d, tau, r_b, r_!b, posterior mean) evaluated with 40-digit
/// arithmetic by direct summation over K_b = 0..K.
pub const MMSE_REFERENCE: [(usize, usize, usize, usize, f64, f64, f64, f64, f64); 12] = [
    (6, 2, 16, 4, 2.0, 0.5, 25.36575650259353, 11.5341786820319, 3.935107541974274076),
    (6, 2, 8, 4, 2.0, 1.5, 34.9823657669788, 10.964306072500051, 4.1150450428104102388),
    (6, 2, 8, 8, 2.0, 1.0, 10.658503102866007, 85.66169967298536, 0.95730130406775111575),
    (6, 2, 4, 8, 1.25, 1.0, 18.175253975321738, 34.5201405516871, 2.1497163415646323298),
    (6, 2, 4, 8, 3.0, 1.5, 78.51900139605911, 50.873688290762004, 3.7165521600845472375),
    (6, 2, 8, 8, 2.0, 1.5, 70.08660662238374, 22.14772526705253, 4.2522751017219520767),
    (8, 4, 16, 8, 3.0, 1.5, 10.748356014241859, 145.233700019462, 1.0268577606468161763),
    (8, 4, 16, 8, 1.25, 0.5, 25.61157726286974, 43.36014261436637, 2.753115264255791106),
    (8, 4, 4, 4, 0.5, 1.5, 4.154414891350116, 4.636284572818653, 2.1458221556203425704),
    (8, 4, 8, 2, 2.0, 0.5, 11.000471433137188, 22.490064349039404, 2.609051131773444043),
    (1, 2, 8, 2, 0.5, 1.0, -6.18199916168702, -0.5821989183059819, 0.41338544861467743024),
    (8, 2, 8, 2, 3.0, 1.5, 25.89994738898614, 8.477296124612488, 5.1770840456676421429),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Entry of the Sylvester Hadamard matrix from the bit-parity definition.
pub fn sylvester(row: usize, col: usize) -> f64 {
    if (row & col).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `μ + Σ d0 (d0² Σ + I)^{-1} (y − d0 μ)` with the multinomial covariance,
/// solved densely and left unclamped.
pub fn dense_lmmse(y: &[f64], d0: f64, total: usize, bins: usize) -> Vec<f64> {
    let b = bins as f64;
    let mu = total as f64 / b;
    let sigma = DMatrix::from_fn(bins, bins, |i, j| mu * (if i == j { 1.0 } else { 0.0 } - 1.0 / b));
    let gram = &sigma * (d0 * d0) + DMatrix::identity(bins, bins);
    let innov = DVector::from_iterator(bins, y.iter().map(|&yi| yi - d0 * mu));
    let solved = gram.lu().solve(&innov).unwrap();
    let k_hat = DVector::from_element(bins, mu) + &sigma * solved * d0;
    k_hat.iter().copied().collect()
}

/// Pilot observation for `total` devices choosing bins uniformly.
pub fn pilot_draw(rng: &mut ChaCha8Rng, total: usize, bins: usize, d0: f64) -> (Vec<usize>, Vec<f64>) {
    let mut counts = vec![0usize; bins];
    for _ in 0..total {
        counts[rng.random_range(0..bins)] += 1;
    }
    let y = counts
        .iter()
        .map(|&k| d0 * k as f64 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (counts, y)
}

/// `d·s + τ·N(0, 1)` with `s ~ Bernoulli(ε)`.
pub fn mixture(rng: &mut ChaCha8Rng, eps: f64, len: usize, d: f64, tau: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let s = if rng.random_bool(eps) { 1.0 } else { 0.0 };
            d * s + tau * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}
