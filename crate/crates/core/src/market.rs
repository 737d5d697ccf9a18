//! Market clearing on a single link, aggregate surplus, the social optimum
//! and the price-taking equilibrium that attains it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, sum};
use crate::models::{Demand, PriceModel, UtilityModel};
use crate::{Error, Result};

/// Relative tolerance on the clearing identity `sum(w) = f * p(f)`.
pub const CLEARING_TOL: f64 = 1e-12;

/// Tolerance on the price-taking stationarity conditions, relative to
/// `max(1, price)`.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// One link shared by `R >= 1` users.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkInstance {
    pub price: PriceModel,
    pub users: Vec<UtilityModel>,
}

impl LinkInstance {
    pub fn new(price: PriceModel, users: Vec<UtilityModel>) -> Result<Self> {
        let inst = LinkInstance { price, users };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Domain("a link needs at least one user".into()));
        }
        self.price.validate()?;
        self.users.iter().try_for_each(UtilityModel::validate)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}

/// Result of clearing the market for a bid vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingOutcome {
    /// Total rate `f(w)`.
    pub total_rate: f64,
    /// Price `mu(w) = p(f(w))`, or 0 when no one bids.
    pub price: f64,
    /// Per-user rates `d_r(w)`.
    pub rates: Vec<f64>,
    /// `|sum(w) - f * p(f)|`.
    pub residual: f64,
}

pub(crate) fn check_bids(bids: &[f64]) -> Result<()> {
    match bids.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        Some(r) => Err(Error::Domain(format!(
            "bid {r} = {} must be finite and >= 0",
            bids[r]
        ))),
        None => Ok(()),
    }
}

/// Total rate `f` solving `total_bid = f * p(f)`, by bisection on the
/// strictly increasing map `f -> f * p(f)`.
///
/// When the curve has a kink whose clearing value agrees with `total_bid` to
/// within [`CLEARING_TOL`], the kink itself is returned: the one-sided
/// slopes there differ, and the equilibrium conditions depend on which side
/// of the kink the rate falls.
pub fn clear_total(price: &PriceModel, total_bid: f64) -> Result<f64> {
    if !(total_bid.is_finite() && total_bid >= 0.0) {
        return Err(Error::Domain(format!(
            "total bid {total_bid} must be finite and >= 0"
        )));
    }
    if total_bid == 0.0 {
        return Ok(0.0);
    }
    let revenue = |f: f64| f * price.price_unchecked(f);
    if let Some(k) = price.kink() {
        if (revenue(k) - total_bid).abs() <= CLEARING_TOL * total_bid {
            return Ok(k);
        }
    }
    let below = |f: f64| Ok(revenue(f) < total_bid);
    let (lo, hi) = math::bracket(price.domain_cap(), "market clearing", below)?;
    let (lo, hi) = math::bisect(lo, hi, 0.0, "market clearing", below)?;
    if lo == 0.0 {
        return Ok(hi);
    }
    Ok(
        if (total_bid - revenue(lo)).abs() < (revenue(hi) - total_bid).abs() {
            lo
        } else {
            hi
        },
    )
}

/// Clears the link for the bid vector `bids`.
pub fn clear(price: &PriceModel, bids: &[f64]) -> Result<ClearingOutcome> {
    check_bids(bids)?;
    let total_bid = sum(bids.iter().copied());
    let f = clear_total(price, total_bid)?;
    if f == 0.0 {
        return Ok(ClearingOutcome {
            total_rate: 0.0,
            price: 0.0,
            rates: vec![0.0; bids.len()],
            residual: 0.0,
        });
    }
    let mu = price.price_unchecked(f);
    let rates = bids
        .iter()
        .map(|&w| if w > 0.0 { w / mu } else { 0.0 })
        .collect();
    Ok(ClearingOutcome {
        total_rate: f,
        price: mu,
        rates,
        residual: (total_bid - f * mu).abs(),
    })
}

/// Aggregate surplus `sum_r U_r(d_r) - C(sum_r d_r)`.
pub fn surplus(inst: &LinkInstance, rates: &[f64]) -> Result<f64> {
    if rates.len() != inst.users.len() {
        return Err(Error::Domain(format!(
            "{} rates for {} users",
            rates.len(),
            inst.users.len()
        )));
    }
    let mut utilities = Vec::with_capacity(rates.len());
    for (u, &d) in inst.users.iter().zip(rates) {
        utilities.push(u.value(d)?);
    }
    let f = sum(rates.iter().copied());
    let cost = inst.price.cost(f)?;
    Ok(sum(utilities) - cost)
}

/// Optimal allocation of the social welfare problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSolution {
    pub rates: Vec<f64>,
    pub total_rate: f64,
    /// Marginal price `p(f)` at the optimum.
    pub price: f64,
    pub surplus: f64,
    /// Largest violation of the optimality conditions.
    pub kkt_residual: f64,
}

fn finite_demand_total(inst: &LinkInstance, level: f64) -> Result<f64> {
    let mut parts = Vec::new();
    for u in inst.users.iter().filter(|u| u.linear_slope().is_none()) {
        match u.demand(level)? {
            Demand::Finite(d) => parts.push(d),
            Demand::Unbounded => unreachable!("only linear utilities have unbounded demand"),
        }
    }
    Ok(sum(parts))
}

/// Maximizes aggregate surplus over `d >= 0`.
///
/// The total rate is found by bisection on `f -> sum_r demand_r(p(f)) - f`.
/// Linear users have a flat demand curve; when the price settles exactly at
/// the largest linear slope, the rate left over by the other users goes to
/// the lowest-indexed user with that slope.
pub fn solve_system(inst: &LinkInstance, tol: f64) -> Result<SystemSolution> {
    inst.validate()?;
    let price = &inst.price;
    let top_linear = inst
        .users
        .iter()
        .enumerate()
        .filter_map(|(r, u)| u.linear_slope().map(|a| (r, a)))
        .fold(None, |best: Option<(usize, f64)>, (r, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((r, a)),
        });

    let p0 = price.price_unchecked(0.0);
    let mut rates = vec![0.0; inst.users.len()];
    let mut floor = 0.0;

    if let Some((owner, alpha)) = top_linear {
        if alpha > p0 {
            let f_lin = price.rate_at_price(alpha)?;
            let others = finite_demand_total(inst, alpha)?;
            if others <= f_lin {
                for (r, u) in inst.users.iter().enumerate() {
                    if u.linear_slope().is_none() {
                        rates[r] = u.demand(alpha)?.finite().unwrap_or(0.0);
                    }
                }
                rates[owner] = f_lin - others;
                return finish_system(inst, rates);
            }
            floor = f_lin;
        }
    }

    let any_finite = inst.users.iter().any(|u| u.linear_slope().is_none());
    if any_finite {
        let excess = |f: f64| -> Result<bool> {
            if f <= floor {
                return Ok(true);
            }
            let level = price.price_unchecked(f);
            if level <= 0.0 {
                return Ok(true);
            }
            Ok(finite_demand_total(inst, level)? > f)
        };
        let positive_at_zero = inst
            .users
            .iter()
            .filter(|u| u.linear_slope().is_none())
            .any(|u| u.marginal_at_zero() > p0);
        if positive_at_zero || floor > 0.0 {
            let (lo, hi) = math::bracket(price.domain_cap(), "system rate", excess)?;
            let (_, hi) = math::bisect(lo, hi, tol.max(0.0), "system rate", excess)?;
            let level = price.price_unchecked(hi);
            for (r, u) in inst.users.iter().enumerate() {
                if u.linear_slope().is_none() {
                    rates[r] = u.demand(level)?.finite().unwrap_or(0.0);
                }
            }
        }
    } else if top_linear.is_none() {
        return Err(Error::Degenerate("no users".into()));
    }
    finish_system(inst, rates)
}

fn finish_system(inst: &LinkInstance, rates: Vec<f64>) -> Result<SystemSolution> {
    let f = sum(rates.iter().copied());
    let lam = inst.price.price(f)?;
    let kkt = inst
        .users
        .iter()
        .zip(&rates)
        .map(|(u, &d)| {
            if d > 0.0 {
                (u.marginal_unchecked(d) - lam).abs()
            } else {
                (u.marginal_at_zero() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    let surplus = surplus(inst, &rates)?;
    Ok(SystemSolution {
        rates,
        total_rate: f,
        price: lam,
        surplus,
        kkt_residual: kkt,
    })
}

/// Bids at which every price-taking user is optimal and the induced
/// allocation solves the welfare problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTaking {
    pub bids: Vec<f64>,
    pub outcome: ClearingOutcome,
    pub system: SystemSolution,
    /// Largest violation of the price-taker's first-order conditions.
    pub stationarity_residual: f64,
}

/// Payoff of a price taker: `U_r(w_r / mu) - w_r`.
pub fn price_taking_payoff(user: &UtilityModel, bid: f64, mu: f64) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::Domain(format!("price {mu} must be > 0")));
    }
    Ok(user.value(bid / mu)? - bid)
}

/// Bids `w_r = d_r * p(f)` built from the welfare optimum, checked against
/// the price-taker conditions.
pub fn price_taking_equilibrium(inst: &LinkInstance, tol: f64) -> Result<PriceTaking> {
    let system = solve_system(inst, tol)?;
    let mu_star = system.price;
    let bids: Vec<f64> = system.rates.iter().map(|d| d * mu_star).collect();
    let outcome = clear(&inst.price, &bids)?;
    let mu = if outcome.total_rate > 0.0 {
        outcome.price
    } else {
        mu_star
    };
    let stationarity_residual = inst
        .users
        .iter()
        .zip(&bids)
        .map(|(u, &w)| {
            if w > 0.0 {
                (u.marginal_unchecked(w / mu) - mu).abs()
            } else {
                (u.marginal_at_zero() - mu).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    if stationarity_residual > STATIONARITY_TOL * mu.max(1.0) {
        return Err(Error::NonConvergence {
            context: "price-taking stationarity",
            iterations: 0,
            residual: stationarity_residual,
        });
    }
    Ok(PriceTaking {
        bids,
        outcome,
        system,
        stationarity_residual,
    })
}
