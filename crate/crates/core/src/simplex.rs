//! Dense primal simplex for small problems `max c.y s.t. A y <= b, y >= 0`
//! with `b >= 0`, so the origin is a feasible starting vertex.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Entries smaller than this are treated as zero when choosing pivots.
pub const PIVOT_TOL: f64 = 1e-11;

const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub y: Vec<f64>,
    pub pivots: usize,
}

/// Maximizes `c.y` subject to `rows[i].y <= rhs[i]` and `y >= 0`, pivoting
/// with Bland's rule.
pub fn maximize(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = rows.len();
    if rhs.len() != m {
        return Err(Error::Domain(format!("{m} rows but {} bounds", rhs.len())));
    }
    if let Some(row) = rows.iter().find(|row| row.len() != n) {
        return Err(Error::Domain(format!(
            "row of length {} for {n} variables",
            row.len()
        )));
    }
    if let Some(b) = rhs.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Domain(format!("bound {b} must be finite and >= 0")));
    }

    // Tableau rows: [A | I | b]; objective row holds reduced costs -c.
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .enumerate()
        .map(|(i, (row, &b))| {
            let mut line = vec![0.0; width];
            line[..n].copy_from_slice(row);
            line[n + i] = 1.0;
            line[width - 1] = b;
            line
        })
        .collect();
    let mut obj = vec![0.0; width];
    for (o, &cj) in obj.iter_mut().zip(c) {
        *o = -cj;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    while let Some(enter) = (0..n + m).find(|&j| obj[j] < -PIVOT_TOL) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i][enter];
            if a > PIVOT_TOL {
                let q = t[i][width - 1] / a;
                leave = match leave {
                    None => Some((i, q)),
                    Some((k, best)) => {
                        if q < best || (q == best && basis[i] < basis[k]) {
                            Some((i, q))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::Degenerate("linear program is unbounded".into()));
        };
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::NonConvergence {
                context: "simplex",
                iterations: pivots,
                residual: f64::NAN,
            });
        }
        let pivot = t[row][enter];
        for v in t[row].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[row].clone();
        for (i, line) in t.iter_mut().enumerate() {
            if i != row {
                let factor = line[enter];
                if factor != 0.0 {
                    for (v, p) in line.iter_mut().zip(&pivot_row) {
                        *v -= factor * p;
                    }
                }
            }
        }
        let factor = obj[enter];
        for (v, p) in obj.iter_mut().zip(&pivot_row) {
            *v -= factor * p;
        }
        basis[row] = enter;
    }

    let mut y = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            y[var] = t[i][width - 1].max(0.0);
        }
    }
    let objective = crate::math::sum(c.iter().zip(&y).map(|(a, b)| a * b));
    Ok(LpSolution {
        objective,
        y,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let rows = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        let sol = maximize(&[3.0, 5.0], &rows, &[4.0, 12.0, 18.0]).unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.y[0] - 2.0).abs() < 1e-12 && (sol.y[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_bounds_and_degeneracy() {
        let rows = vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let sol = maximize(&[1.0, 1.0], &rows, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(sol.objective, 0.0);
        let sol = maximize(&[1.0, 1.0], &rows, &[1.0, 1.0, 1.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_and_bad_input() {
        let rows = vec![vec![1.0, -1.0]];
        assert!(matches!(
            maximize(&[0.0, 1.0], &rows, &[1.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(maximize(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
        assert!(maximize(&[1.0], &[vec![1.0, 2.0]], &[1.0]).is_err());
    }
}
