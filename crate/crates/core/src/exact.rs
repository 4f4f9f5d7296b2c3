//! Exact permanents and the two weak baselines (determinant and scaled
//! diagonal product).
//!
//! Both exact routes divide each row by its largest entry before summing and
//! add the log of those factors back at the end, so intermediate values stay
//! near unity regardless of the entry scale.

use crate::error::{Error, Result};
use crate::logspace::{ln_factorial, LogValue, Sign};
use crate::matrix::SquareMatrix;

pub const BRUTE_FORCE_MAX_N: usize = 12;
pub const RYSER_MAX_N: usize = 30;

/// Rows rescaled to unit maximum and the accumulated log correction.
/// `None` when some row is entirely zero, i.e. the permanent is zero.
fn row_normalized(m: &SquareMatrix) -> Option<(Vec<f64>, f64)> {
    let n = m.n();
    let mut data = Vec::with_capacity(n * n);
    let mut ln_scale = 0.0;
    for row in m.rows() {
        let max = row.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return None;
        }
        ln_scale += max.ln();
        data.extend(row.iter().map(|w| w / max));
    }
    Some((data, ln_scale))
}

/// Direct sum over all `n!` permutations, by depth-first Laplace expansion.
pub fn brute_force_permanent(m: &SquareMatrix) -> Result<LogValue> {
    let n = m.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Size {
            what: "brute-force permanent",
            n,
            limit: BRUTE_FORCE_MAX_N,
        });
    }
    let Some((a, ln_scale)) = row_normalized(m) else {
        return Ok(LogValue::ZERO);
    };

    fn expand(a: &[f64], n: usize, row: usize, used: u32) -> f64 {
        if row == n {
            return 1.0;
        }
        let mut total = 0.0;
        for j in 0..n {
            let w = a[row * n + j];
            if used & (1 << j) == 0 && w != 0.0 {
                total += w * expand(a, n, row + 1, used | (1 << j));
            }
        }
        total
    }

    Ok(LogValue::from_f64(expand(&a, n, 0, 0)).mul_ln(ln_scale))
}

/// Ryser's inclusion-exclusion formula over column subsets, visited in
/// binary-reflected Gray-code order so each step toggles one column and
/// updates the row sums in O(n).
pub fn ryser_permanent(m: &SquareMatrix) -> Result<LogValue> {
    let n = m.n();
    if n > RYSER_MAX_N {
        return Err(Error::Size {
            what: "Ryser permanent",
            n,
            limit: RYSER_MAX_N,
        });
    }
    let Some((a, ln_scale)) = row_normalized(m) else {
        return Ok(LogValue::ZERO);
    };

    let mut row_sums = vec![0.0f64; n];
    let mut subset: u64 = 0;
    // Neumaier-compensated running total
    let mut total = 0.0f64;
    let mut compensation = 0.0f64;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        subset ^= 1 << col;
        if subset & (1 << col) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += a[i * n + col];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= a[i * n + col];
            }
        }
        let product: f64 = row_sums.iter().product();
        let term = if (n - subset.count_ones() as usize).is_multiple_of(2) {
            product
        } else {
            -product
        };
        let t = total + term;
        compensation += if total.abs() >= term.abs() {
            (total - t) + term
        } else {
            (term - t) + total
        };
        total = t;
    }
    let per = total + compensation;
    if per > 0.0 {
        Ok(LogValue::from_f64(per).mul_ln(ln_scale))
    } else {
        Ok(LogValue::ZERO)
    }
}

/// Determinant by LU elimination with partial pivoting.
pub fn determinant(m: &SquareMatrix) -> LogValue {
    let n = m.n();
    let mut a = m.as_slice().to_vec();
    let mut ln_abs = 0.0;
    let mut negative = false;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap();
        let pivot = a[pivot_row * n + col];
        if pivot == 0.0 {
            return LogValue::ZERO;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            negative = !negative;
        }
        if pivot < 0.0 {
            negative = !negative;
        }
        ln_abs += pivot.abs().ln();
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor != 0.0 {
                for j in col + 1..n {
                    a[r * n + j] -= factor * a[col * n + j];
                }
            }
        }
    }
    let sign = if negative {
        Sign::Negative
    } else {
        Sign::Positive
    };
    LogValue::from_signed_ln(sign, ln_abs)
}

/// `n! * prod_i W_ii`: the diagonal product scaled so it is exact on
/// constant matrices.
pub fn scaled_diagonal(m: &SquareMatrix) -> LogValue {
    let ln_diag: f64 = (0..m.n()).map(|i| m.get(i, i).ln()).sum();
    LogValue::from_ln(ln_diag).mul_ln(ln_factorial(m.n()))
}
