//! The price-anticipating game on a single link.
//!
//! Each user chooses a bid `w_r >= 0` to maximize `Q_r = U_r(d_r(w)) - w_r`,
//! knowing that its bid moves the clearing price. Two solvers are provided
//! (damped best-response sweeps and a direct solve of the equilibrium
//! conditions), and every result is gated by [`verify_nash`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::market::{self, check_bids, clear, clear_total, ClearingOutcome, LinkInstance};
use crate::math::{self, pow, sum};
use crate::models::{PriceModel, UtilityModel};
use crate::{Error, Result};

/// A bid vector, one entry per user.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub bids: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(bids: Vec<f64>) -> Result<Self> {
        check_bids(&bids)?;
        Ok(StrategyProfile { bids })
    }

    pub fn zeros(users: usize) -> Self {
        StrategyProfile {
            bids: vec![0.0; users],
        }
    }

    pub fn total(&self) -> f64 {
        sum(self.bids.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NashMethod {
    BestResponse,
    Direct,
    Constructed,
}

impl NashMethod {
    pub fn name(self) -> &'static str {
        match self {
            NashMethod::BestResponse => "best_response",
            NashMethod::Direct => "direct",
            NashMethod::Constructed => "constructed",
        }
    }
}

/// Solver knobs shared by the single-link and network solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Convergence tolerance on bid changes, relative to `max(1, max bid)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Weight `theta` on the new best response in each Gauss-Seidel update.
    pub damping: f64,
    pub seed: u64,
    /// Unilateral deviations sampled per user when verifying.
    pub deviation_samples: usize,
    /// Tolerance used by the equilibrium verifier.
    pub verify_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_sweeps: 10_000,
            damping: 0.5,
            seed: 0,
            deviation_samples: 64,
            verify_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                constraint: "tol > 0",
                value: self.tol,
            });
        }
        if !(self.verify_tol > 0.0 && self.verify_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "verify_tol",
                constraint: "verify_tol > 0",
                value: self.verify_tol,
            });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "damping",
                constraint: "0 < damping <= 1",
                value: self.damping,
            });
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_sweeps",
                constraint: "max_sweeps >= 1",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Violations of the two equilibrium inequalities for one user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserResidual {
    /// `max(0, U'(d)(1 - beta+ d/f) - p(f))`.
    pub upper: f64,
    /// `max(0, p(f) - U'(d)(1 - beta- d/f))` when `d > 0`, else 0.
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub passed: bool,
    /// False when every bid is zero, which is never an equilibrium.
    pub positive_total: bool,
    pub residuals: Vec<UserResidual>,
    pub max_residual: f64,
    /// Largest payoff gain found among sampled unilateral deviations.
    pub max_deviation_gain: f64,
    /// User and bid of the most profitable sampled deviation, when it beats
    /// the tolerance.
    pub worst_deviation: Option<(usize, f64)>,
    pub deviations_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashResult {
    pub profile: StrategyProfile,
    pub outcome: ClearingOutcome,
    pub method: NashMethod,
    pub sweeps: usize,
    pub max_bid_delta: f64,
    pub report: VerifyReport,
}

impl NashResult {
    pub fn surplus(&self, inst: &LinkInstance) -> Result<f64> {
        market::surplus(inst, &self.outcome.rates)
    }
}

fn check_profile(inst: &LinkInstance, bids: &[f64]) -> Result<()> {
    if bids.len() != inst.users.len() {
        return Err(Error::Domain(format!(
            "{} bids for {} users",
            bids.len(),
            inst.users.len()
        )));
    }
    check_bids(bids)
}

fn check_user(inst: &LinkInstance, r: usize) -> Result<()> {
    if r >= inst.users.len() {
        return Err(Error::Domain(format!(
            "user {r} out of range for {} users",
            inst.users.len()
        )));
    }
    Ok(())
}

fn others_total(bids: &[f64], r: usize) -> f64 {
    sum(bids
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != r)
        .map(|(_, &w)| w))
}

/// Payoff of a user bidding `own` while the others bid `others` in total.
pub(crate) fn payoff_given_total(
    price: &PriceModel,
    user: &UtilityModel,
    own: f64,
    others: f64,
) -> Result<f64> {
    if own == 0.0 {
        return Ok(user.value_unchecked(0.0));
    }
    let f = clear_total(price, others + own)?;
    let d = own / price.price_unchecked(f);
    Ok(user.value_unchecked(d) - own)
}

/// `Q_r(w) = U_r(d_r(w)) - w_r`.
pub fn payoff_anticipating(inst: &LinkInstance, r: usize, bids: &[f64]) -> Result<f64> {
    check_profile(inst, bids)?;
    check_user(inst, r)?;
    payoff_given_total(&inst.price, &inst.users[r], bids[r], others_total(bids, r))
}

/// Left and right derivatives of `d_r` with respect to `w_r`.
pub fn allocation_derivs(inst: &LinkInstance, r: usize, bids: &[f64]) -> Result<(f64, f64)> {
    check_profile(inst, bids)?;
    check_user(inst, r)?;
    let out = clear(&inst.price, bids)?;
    if out.total_rate == 0.0 {
        return Err(Error::Degenerate(
            "allocation derivatives need a positive total bid".into(),
        ));
    }
    let (b_lo, b_hi) = inst.price.beta(out.total_rate)?;
    let share = out.rates[r] / out.total_rate;
    Ok((
        (1.0 - share * b_lo) / out.price,
        (1.0 - share * b_hi) / out.price,
    ))
}

/// Right derivative of `Q_r` in the user's own bid, given the others' total.
fn payoff_slope_right(
    price: &PriceModel,
    user: &UtilityModel,
    own: f64,
    others: f64,
) -> Result<f64> {
    let total = own + others;
    if total == 0.0 {
        let p0 = price.price_unchecked(0.0);
        return Ok(if p0 > 0.0 {
            user.marginal_at_zero() / p0 - 1.0
        } else {
            f64::INFINITY
        });
    }
    let f = clear_total(price, total)?;
    let p = price.price_unchecked(f);
    if own == 0.0 {
        return Ok(user.marginal_at_zero() / p - 1.0);
    }
    let d = own / p;
    let (_, b_hi) = price.beta(f)?;
    Ok(user.marginal_unchecked(d) * (1.0 - b_hi * d / f) / p - 1.0)
}

/// Best response of a user facing a total bid of `others` from everyone else.
pub(crate) fn best_response_total(
    price: &PriceModel,
    user: &UtilityModel,
    others: f64,
) -> Result<f64> {
    let slope = |x: f64| payoff_slope_right(price, user, x, others);
    if slope(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    // Past this bid even a lone user pays more per unit than it values.
    let top = user.marginal_at_zero();
    let mut cap = 1.0;
    let mut doublings = 0;
    while price.price_unchecked(clear_total(price, cap)?) < top {
        cap *= 2.0;
        doublings += 1;
        if doublings > 2000 {
            return Err(Error::NonConvergence {
                context: "best-response bid bound",
                iterations: doublings,
                residual: f64::INFINITY,
            });
        }
    }
    let (lo, hi) = math::bisect(0.0, cap, 0.0, "best response", |x| Ok(slope(x)? > 0.0))?;
    if let Some(k) = price.kink() {
        let at_kink = k * price.price_unchecked(k) - others;
        if at_kink > 0.0 && (hi - at_kink).abs() <= 1e-9 * at_kink.max(1.0) {
            return Ok(at_kink);
        }
    }
    let q_lo = payoff_given_total(price, user, lo, others)?;
    let q_hi = payoff_given_total(price, user, hi, others)?;
    Ok(if q_lo > q_hi { lo } else { hi })
}

/// Bid maximizing `Q_r` when the others bid `bids` (the entry `bids[r]` is
/// ignored).
pub fn best_response(inst: &LinkInstance, r: usize, bids: &[f64]) -> Result<f64> {
    check_profile(inst, bids)?;
    check_user(inst, r)?;
    best_response_total(&inst.price, &inst.users[r], others_total(bids, r))
}

fn gated(
    inst: &LinkInstance,
    bids: Vec<f64>,
    method: NashMethod,
    sweeps: usize,
    max_bid_delta: f64,
    cfg: &SolverConfig,
) -> Result<NashResult> {
    let report = verify_nash(inst, &bids, cfg.verify_tol, cfg.deviation_samples)?;
    if !report.passed {
        return Err(Error::NonConvergence {
            context: "Nash verification",
            iterations: sweeps,
            residual: report.max_residual.max(report.max_deviation_gain),
        });
    }
    let outcome = clear(&inst.price, &bids)?;
    Ok(NashResult {
        profile: StrategyProfile { bids },
        outcome,
        method,
        sweeps,
        max_bid_delta,
        report,
    })
}

/// Damped Gauss-Seidel best-response sweeps from `init`.
pub fn solve_nash_best_response(
    inst: &LinkInstance,
    init: &StrategyProfile,
    cfg: &SolverConfig,
) -> Result<NashResult> {
    inst.validate()?;
    cfg.validate()?;
    check_profile(inst, &init.bids)?;
    let mut w = init.bids.clone();
    let theta = cfg.damping;
    let mut delta = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        delta = 0.0;
        for r in 0..w.len() {
            let br = best_response_total(&inst.price, &inst.users[r], others_total(&w, r))?;
            let next = if br == 0.0 {
                0.0
            } else {
                (1.0 - theta) * w[r] + theta * br
            };
            delta = f64::max(delta, (next - w[r]).abs());
            w[r] = next;
        }
        let scale = w.iter().copied().fold(1.0, f64::max);
        if delta <= cfg.tol * scale {
            // One undamped pass lands kinked equilibria exactly on the knee.
            for r in 0..w.len() {
                w[r] = best_response_total(&inst.price, &inst.users[r], others_total(&w, r))?;
            }
            return gated(inst, w, NashMethod::BestResponse, sweep, delta, cfg);
        }
    }
    Err(Error::NonConvergence {
        context: "best-response sweeps",
        iterations: cfg.max_sweeps,
        residual: delta,
    })
}

/// Rate user `r` takes at an equilibrium with total rate `f`: the root of
/// `U'(d)(1 - beta d/f) = p(f)` on `[0, f/beta)`.
fn direct_user_rate(user: &UtilityModel, f: f64, p: f64, beta: f64) -> Result<f64> {
    if user.marginal_at_zero() <= p {
        return Ok(0.0);
    }
    let top = f / beta;
    let (lo, hi) = math::bisect(0.0, top, 0.0, "direct user rate", |d| {
        Ok(user.marginal_unchecked(d) * (1.0 - beta * d / f) > p)
    })?;
    Ok(0.5 * (lo + hi))
}

fn direct_rates(inst: &LinkInstance, f: f64) -> Result<Vec<f64>> {
    let p = inst.price.price_unchecked(f);
    let (beta, _) = inst.price.beta(f)?;
    inst.users
        .iter()
        .map(|u| direct_user_rate(u, f, p, beta))
        .collect()
}

/// Solves the equilibrium conditions for the total rate directly.
///
/// Requires a differentiable price with nondecreasing elasticity, where the
/// equilibrium is unique.
pub fn solve_nash_direct(inst: &LinkInstance, cfg: &SolverConfig) -> Result<NashResult> {
    inst.validate()?;
    cfg.validate()?;
    if !inst.price.has_nondecreasing_elasticity() {
        return Err(Error::Precondition(
            "the direct solver needs a differentiable price with nondecreasing elasticity".into(),
        ));
    }
    let mut evaluations = 0;
    let mut above = |f: f64| -> Result<bool> {
        evaluations += 1;
        Ok(sum(direct_rates(inst, f)?) > f)
    };
    let (lo, hi) = math::bracket(inst.price.domain_cap(), "direct Nash rate", &mut above)?;
    let (_, f) = math::bisect(lo, hi, 0.0, "direct Nash rate", &mut above)?;
    let rates = direct_rates(inst, f)?;
    let p = inst.price.price_unchecked(f);
    let bids = rates.iter().map(|d| p * d).collect();
    gated(inst, bids, NashMethod::Direct, evaluations, 0.0, cfg)
}

/// Bids at which user `r`'s deviations are sampled: zero plus log-spaced
/// multiples of the current bid (or of the mean bid when it is zero).
pub(crate) fn deviation_grid(base: f64, samples: usize) -> impl Iterator<Item = f64> {
    let half = samples / 2;
    core::iter::once(0.0).chain((1..=half).flat_map(move |k| {
        let s = pow(2.0, 0.25 * k as f64);
        [base * s, base / s]
    }))
}

/// Checks the equilibrium inequalities at `bids` and samples unilateral
/// deviations. Residuals are measured relative to `max(1, p(f))` and payoff
/// gains relative to `max(1, |Q_r|)`.
pub fn verify_nash(
    inst: &LinkInstance,
    bids: &[f64],
    tol: f64,
    samples: usize,
) -> Result<VerifyReport> {
    check_profile(inst, bids)?;
    let n = bids.len();
    let total = sum(bids.iter().copied());
    if total == 0.0 {
        return Ok(VerifyReport {
            passed: false,
            positive_total: false,
            residuals: vec![UserResidual::default(); n],
            max_residual: 0.0,
            max_deviation_gain: 0.0,
            worst_deviation: None,
            deviations_checked: 0,
        });
    }
    let price = &inst.price;
    let out = clear(price, bids)?;
    let (f, p) = (out.total_rate, out.price);
    let (b_lo, b_hi) = price.beta(f)?;
    let scale = p.max(1.0);
    let residuals: Vec<UserResidual> = inst
        .users
        .iter()
        .zip(&out.rates)
        .map(|(u, &d)| {
            let m = u.marginal_unchecked(d);
            UserResidual {
                upper: (m * (1.0 - b_hi * d / f) - p).max(0.0),
                lower: if d > 0.0 {
                    (p - m * (1.0 - b_lo * d / f)).max(0.0)
                } else {
                    0.0
                },
            }
        })
        .collect();
    let max_residual = residuals
        .iter()
        .map(|r| r.upper.max(r.lower))
        .fold(0.0, f64::max);

    let mut max_gain = f64::NEG_INFINITY;
    let mut worst = None;
    let mut checked = 0;
    let mean = total / n as f64;
    for (r, user) in inst.users.iter().enumerate() {
        let own = bids[r];
        let others = (total - own).max(0.0);
        let base_q = payoff_given_total(price, user, own, others)?;
        let allowance = tol * base_q.abs().max(1.0);
        let base = if own > 0.0 { own } else { mean };
        for alt in deviation_grid(base, samples) {
            if alt == own {
                continue;
            }
            let gain = payoff_given_total(price, user, alt, others)? - base_q;
            checked += 1;
            if gain > max_gain {
                max_gain = gain;
            }
            if gain > allowance && worst.map_or(true, |(_, _, g)| gain > g) {
                worst = Some((r, alt, gain));
            }
        }
    }
    let max_deviation_gain = if checked == 0 { 0.0 } else { max_gain };
    Ok(VerifyReport {
        passed: max_residual <= tol * scale && worst.is_none(),
        positive_total: true,
        residuals,
        max_residual,
        max_deviation_gain,
        worst_deviation: worst.map(|(r, alt, _)| (r, alt)),
        deviations_checked: checked,
    })
}

/// Wraps a known equilibrium profile, verified, as a [`NashResult`].
pub fn constructed(inst: &LinkInstance, bids: Vec<f64>, cfg: &SolverConfig) -> Result<NashResult> {
    check_profile(inst, &bids)?;
    let report = verify_nash(inst, &bids, cfg.verify_tol, cfg.deviation_samples)?;
    let outcome = clear(&inst.price, &bids)?;
    Ok(NashResult {
        profile: StrategyProfile { bids },
        outcome,
        method: NashMethod::Constructed,
        sweeps: 0,
        max_bid_delta: 0.0,
        report,
    })
}
