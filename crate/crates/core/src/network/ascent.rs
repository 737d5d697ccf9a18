//! Maximization of a smooth concave function of path rates over `y >= 0`.

use alloc::vec::Vec;

use crate::math::{self, sum};
use crate::{Error, Result};

pub(crate) trait PathObjective {
    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>>;
    /// Negated Hessian restricted to the coordinates `free`.
    fn curvature(&self, y: &[f64], free: &[usize]) -> Result<Vec<Vec<f64>>>;
    fn in_domain(&self, y: &[f64]) -> bool;
    /// Exact maximizer along coordinate `q` with the others fixed.
    fn coordinate_max(&self, y: &[f64], q: usize) -> Result<f64>;
}

/// `max_q |y_q - max(0, y_q + g_q)|`.
pub(crate) fn natural_residual(y: &[f64], g: &[f64]) -> f64 {
    y.iter()
        .zip(g)
        .map(|(&v, &s)| (v - (v + s).max(0.0)).abs())
        .fold(0.0, f64::max)
}

fn newton_step<P: PathObjective>(
    p: &P,
    y: &[f64],
    g: &[f64],
    residual: f64,
) -> Result<Option<Vec<f64>>> {
    let free: Vec<usize> = (0..y.len()).filter(|&q| y[q] > 0.0 || g[q] > 0.0).collect();
    if free.is_empty() {
        return Ok(None);
    }
    let mut m = p.curvature(y, &free)?;
    let scale = m
        .iter()
        .enumerate()
        .map(|(i, row)| row[i])
        .fold(0.0, f64::max);
    if !(scale > 0.0 && scale.is_finite()) {
        return Ok(None);
    }
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += 1e-12 * scale;
    }
    let Some(s) = math::solve_dense(m, free.iter().map(|&q| g[q]).collect()) else {
        return Ok(None);
    };
    let mut t = 1.0;
    for _ in 0..40 {
        let mut trial = y.to_vec();
        for (&q, &v) in free.iter().zip(&s) {
            trial[q] = (y[q] + t * v).max(0.0);
        }
        if p.in_domain(&trial) {
            // Concavity gives f(trial) - f(y) >= g(trial) . (trial - y).
            let g_trial = p.gradient(&trial)?;
            let rise = sum(trial
                .iter()
                .zip(y)
                .zip(&g_trial)
                .map(|((a, b), s)| (a - b) * s));
            if rise >= 0.0 && natural_residual(&trial, &g_trial) < residual {
                return Ok(Some(trial));
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Alternates projected Newton steps (kept only when they ascend and lower
/// the natural residual) with sweeps of exact coordinate ascent until the natural
/// residual is at most `tol`. Returns the point, its residual and the number
/// of sweeps.
pub(crate) fn maximize<P: PathObjective>(
    p: &P,
    mut y: Vec<f64>,
    tol: f64,
    max_sweeps: usize,
    context: &'static str,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut residual = f64::INFINITY;
    for sweep in 0..=max_sweeps {
        let g = p.gradient(&y)?;
        residual = natural_residual(&y, &g);
        if residual > tol {
            if let Some(better) = newton_step(p, &y, &g, residual)? {
                y = better;
                residual = natural_residual(&y, &p.gradient(&y)?);
            }
        }
        if residual <= tol {
            return Ok((y, residual, sweep));
        }
        for q in 0..y.len() {
            y[q] = p.coordinate_max(&y, q)?;
        }
    }
    Err(Error::NonConvergence {
        context,
        iterations: max_sweeps,
        residual,
    })
}
