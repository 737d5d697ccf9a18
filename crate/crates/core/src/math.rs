//! Scalar helpers shared by the solvers.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub(crate) const BISECTION_CAP: usize = 200;
const BRACKET_CAP: usize = 2200;

#[inline]
pub(crate) fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// Compensated (Neumaier) summation.
pub(crate) fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Locates a bracket `[lo, hi]` around the sign change of a monotone
/// predicate on `(0, cap)`. `above(x)` must be true when the root lies
/// strictly above `x`. The search starts at 1 and doubles or halves; with a
/// cap the upper end never exceeds `cap * (1 - 2^-40)`.
pub(crate) fn bracket(
    cap: Option<f64>,
    context: &'static str,
    mut above: impl FnMut(f64) -> Result<bool>,
) -> Result<(f64, f64)> {
    let ceiling = cap.map(|c| c * (1.0 - libm::exp2(-40.0)));
    let mut x = match ceiling {
        Some(c) if c <= 1.0 => 0.5 * c,
        _ => 1.0,
    };
    if above(x)? {
        let mut lo = x;
        for _ in 0..BRACKET_CAP {
            let next = match ceiling {
                Some(c) => (2.0 * x).min(c),
                None => 2.0 * x,
            };
            if next <= x || !next.is_finite() {
                break;
            }
            if !above(next)? {
                return Ok((lo, next));
            }
            lo = next;
            x = next;
        }
        Err(Error::NonConvergence {
            context,
            iterations: BRACKET_CAP,
            residual: f64::INFINITY,
        })
    } else {
        let mut hi = x;
        for _ in 0..BRACKET_CAP {
            let next = 0.5 * x;
            if next < f64::MIN_POSITIVE {
                return Ok((0.0, hi));
            }
            if above(next)? {
                return Ok((next, hi));
            }
            hi = next;
            x = next;
        }
        Ok((0.0, hi))
    }
}

/// Bisects `[lo, hi]` until the relative width drops below `rel_tol` or the
/// endpoints are adjacent floats. `above(x)` is true when the root lies
/// strictly above `x`.
pub(crate) fn bisect(
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    context: &'static str,
    mut above: impl FnMut(f64) -> Result<bool>,
) -> Result<(f64, f64)> {
    for _ in 0..BISECTION_CAP {
        if hi - lo <= rel_tol * hi.abs() {
            return Ok((lo, hi));
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Ok((lo, hi));
        }
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
        Ok((lo, hi))
    } else {
        Err(Error::NonConvergence {
            context,
            iterations: BISECTION_CAP,
            residual: hi - lo,
        })
    }
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` when a pivot falls below `1e-300`.
pub(crate) fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &k| m[i][c].abs().total_cmp(&m[k][c].abs()))?;
        if !(m[piv][c].abs() > 1e-300) {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for i in c + 1..n {
            let t = m[i][c] / m[c][c];
            if t != 0.0 {
                for k in c..n {
                    m[i][k] -= t * m[c][k];
                }
                b[i] -= t * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (b[i] - tail) / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(sum(v), 2e-16);
    }

    #[test]
    fn bracket_and_bisect_find_sqrt_two() {
        let above = |x: f64| Ok(x * x < 2.0);
        let (lo, hi) = bracket(None, "test", above).unwrap();
        assert!(lo * lo < 2.0 && hi * hi >= 2.0);
        let (lo, hi) = bisect(lo, hi, 0.0, "test", above).unwrap();
        assert!((hi - core::f64::consts::SQRT_2).abs() <= 2.0 * f64::EPSILON);
        assert!(hi - lo <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn bracket_respects_cap() {
        let (lo, hi) = bracket(Some(3.0), "test", |x| Ok(x < 2.9)).unwrap();
        assert!(lo < 2.9 && (2.9..3.0).contains(&hi));
        assert!(bracket(Some(3.0), "test", |_| Ok(true)).is_err());
    }

    #[test]
    fn bracket_walks_down_for_tiny_roots() {
        let (lo, hi) = bracket(None, "test", |x| Ok(x < 1e-200)).unwrap();
        assert!(lo < 1e-200 && hi >= 1e-200 && hi <= 2.0 * lo.max(1e-200) + 1e-200);
    }
}
