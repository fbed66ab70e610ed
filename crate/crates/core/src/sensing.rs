//! Per-bin sensing operators built from randomly sampled rows of a
//! Sylvester Hadamard matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::wht::{fwht_in_place, hadamard_entry};

/// `A_b`: `n_main` distinct Hadamard rows (never row 0), restricted to the
/// first `L·2^v` columns, each row multiplied by a random sign, and scaled
/// so every column has unit ℓ2 norm.
///
/// The signs leave the Gram matrix of a bin unchanged. Across bins they
/// break the columns every bin would otherwise share (column 0 is all ones
/// on any row set).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOperator {
    bin: usize,
    hadamard_dim: usize,
    rows: Vec<usize>,
    /// `±1/√n_main` per measurement.
    weights: Vec<f64>,
    columns: usize,
}

impl SensingOperator {
    /// Operator for `bin`, deterministic in `(cfg, bin, seed)`. Each bin
    /// draws its rows from its own generator stream.
    pub fn build(cfg: &SystemConfig, bin: usize, seed: u64) -> Result<Self> {
        Self::sample(cfg.column_count(), cfg.n_main(), bin, seed)
    }

    pub fn sample(columns: usize, n_rows: usize, bin: usize, seed: u64) -> Result<Self> {
        let hadamard_dim = columns.next_power_of_two();
        if n_rows == 0 || n_rows > hadamard_dim - 1 {
            return Err(Error::Config(format!(
                "cannot draw {n_rows} rows from a {hadamard_dim}-dimensional Hadamard matrix without row 0"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(bin as u64 + 1);
        // kept in sampled (shuffled) order: sorting would map measurement i
        // to nearby rows in every bin and make low-sequency columns of
        // different bins nearly collinear
        let rows: Vec<usize> = rand::seq::index::sample(&mut rng, hadamard_dim - 1, n_rows)
            .into_iter()
            .map(|r| r + 1)
            .collect();
        let scale = 1.0 / (n_rows as f64).sqrt();
        let weights = (0..n_rows)
            .map(|_| if rng.random::<bool>() { scale } else { -scale })
            .collect();
        Ok(SensingOperator {
            bin,
            hadamard_dim,
            rows,
            weights,
            columns,
        })
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn hadamard_dim(&self) -> usize {
        self.hadamard_dim
    }

    /// Hadamard row behind each measurement, in measurement order.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Signed scale `±1/√n_main` applied to each measurement.
    pub fn row_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of measurements `n_main`.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    /// `A_b x`, through one length-`m_H` transform.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.columns {
            return Err(Error::DimensionMismatch {
                expected: self.columns,
                actual: x.len(),
            });
        }
        let mut buf = vec![0.0; self.hadamard_dim];
        buf[..self.columns].copy_from_slice(x);
        fwht_in_place(&mut buf);
        Ok(self.rows.iter().zip(&self.weights).map(|(&r, w)| buf[r] * w).collect())
    }

    /// `A_bᵀ y`. The Sylvester matrix is symmetric, so this is a signed
    /// scatter into the sampled rows followed by the same transform.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                actual: y.len(),
            });
        }
        let mut buf = vec![0.0; self.hadamard_dim];
        for ((&r, w), &v) in self.rows.iter().zip(&self.weights).zip(y) {
            buf[r] = v * w;
        }
        fwht_in_place(&mut buf);
        buf.truncate(self.columns);
        Ok(buf)
    }

    /// Dense entry `A_b[i, c]`; for checks on small instances.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        hadamard_entry(self.rows[row], col) * self.weights[row]
    }
}

/// Builds `A_1, …, A_B` from one seed.
pub fn build_operators(cfg: &SystemConfig, seed: u64) -> Result<Vec<SensingOperator>> {
    (0..cfg.bins).map(|b| SensingOperator::build(cfg, b, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small() -> SensingOperator {
        SensingOperator::sample(48, 20, 0, 9).unwrap()
    }

    #[test]
    fn deterministic_and_excludes_row_zero() {
        let a = small();
        assert_eq!(a, small());
        assert_eq!(a.hadamard_dim(), 64);
        assert!(a.rows().iter().all(|&r| r > 0 && r < 64));
        let distinct: std::collections::BTreeSet<_> = a.rows().iter().collect();
        assert_eq!(distinct.len(), a.n_rows());
    }

    #[test]
    fn bins_draw_different_rows() {
        let a = SensingOperator::sample(1024, 300, 0, 1).unwrap();
        let b = SensingOperator::sample(1024, 300, 1, 1).unwrap();
        assert_ne!(a.rows(), b.rows());
        let theirs: std::collections::BTreeSet<_> = b.rows().iter().collect();
        let overlap = a.rows().iter().filter(|r| theirs.contains(r)).count();
        // Independent draws overlap in about n²/m rows.
        let expected = 300.0 * 300.0 / 1023.0;
        assert!((overlap as f64 - expected).abs() < 5.0 * expected.sqrt(), "{overlap}");
    }

    #[test]
    fn low_sequency_columns_decorrelate_across_bins() {
        let (columns, n) = (8 * 1024, 2998);
        let a = SensingOperator::sample(columns, n, 0, 5).unwrap();
        let b = SensingOperator::sample(columns, n, 1, 5).unwrap();
        for c in (0..8).map(|l| l * 1024) {
            let mut x = vec![0.0; columns];
            x[c] = 1.0;
            let ca = a.forward(&x).unwrap();
            let cb = b.forward(&x).unwrap();
            let inner: f64 = ca.iter().zip(&cb).map(|(p, q)| p * q).sum();
            assert!(inner.abs() < 5.0 / (n as f64).sqrt(), "column {c}: {inner}");
        }
    }

    #[test]
    fn full_preset_dimension() {
        let cfg = SystemConfig::paper();
        assert_eq!(cfg.hadamard_dim(), 1 << 20);
    }

    #[test]
    fn too_many_rows() {
        assert!(SensingOperator::sample(64, 64, 0, 0).is_err());
        assert!(SensingOperator::sample(64, 63, 0, 0).is_ok());
    }

    #[test]
    fn zero_in_zero_out() {
        let a = small();
        assert!(a.forward(&[0.0; 48]).unwrap().iter().all(|&x| x == 0.0));
        assert!(a.adjoint(&[0.0; 20]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_hot_column_has_unit_norm() {
        let a = small();
        for c in [0, 7, 47] {
            let mut x = vec![0.0; 48];
            x[c] = 1.0;
            let col = a.forward(&x).unwrap();
            let norm: f64 = col.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            for (i, v) in col.iter().enumerate() {
                assert_eq!(*v, a.entry(i, c));
            }
            assert!((a.adjoint(&col).unwrap()[c] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let a = small();
        assert!(matches!(a.forward(&[0.0; 47]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(a.adjoint(&[0.0; 21]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn adjoint_identity() {
        let a = SensingOperator::sample(768, 200, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..768).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs: f64 = a.forward(&x).unwrap().iter().zip(&y).map(|(p, q)| p * q).sum();
            let rhs: f64 = x.iter().zip(a.adjoint(&y).unwrap()).map(|(p, q)| p * q).sum();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((lhs - rhs).abs() < 1e-9 * nx * ny);
        }
    }
}
