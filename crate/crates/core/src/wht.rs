//! Unnormalized fast Walsh–Hadamard transform in Sylvester (natural) order.

use crate::error::{Error, Result};

/// In-place unnormalized transform. Applying it twice scales by `x.len()`.
///
/// Panics if the length is not a power of two; use [`fwht`] for a checked
/// variant.
pub fn fwht_in_place(x: &mut [f64]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "fwht length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, w) = (*a, *b);
                *a = u + w;
                *b = u - w;
            }
        }
        h *= 2;
    }
}

/// Returns the unnormalized Walsh–Hadamard transform of `x`.
pub fn fwht(x: &[f64]) -> Result<Vec<f64>> {
    if !x.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(x.len()));
    }
    let mut out = x.to_vec();
    fwht_in_place(&mut out);
    Ok(out)
}

/// Entry `(row, col)` of the Sylvester Hadamard matrix: `(-1)^popcount(row & col)`.
#[inline]
pub fn hadamard_entry(row: usize, col: usize) -> f64 {
    if (row & col).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
