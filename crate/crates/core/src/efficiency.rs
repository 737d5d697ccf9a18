//! Efficiency loss of Nash equilibria relative to the social optimum.
//!
//! Provides the closed-form worst-case ratio curves, their minimization, the
//! ratio reports used by the bound checks, and a constructor for the
//! many-user linear-utility instances that attain the worst case.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::market::{self, solve_system, LinkInstance, SystemSolution};
use crate::math::{pow, sum};
use crate::models::{PriceModel, UtilityModel};
use crate::nash::{self, NashResult, SolverConfig};
use crate::{Error, Result};

/// `4 sqrt(2) - 5`, the worst-case ratio over convex prices with `p(0) = 0`.
pub const WORST_CASE_RATIO: f64 = 4.0 * SQRT_2 - 5.0;

/// `2 - sqrt(2)`, the first slope at which the worst case is attained.
pub const WORST_CASE_SLOPE: f64 = 2.0 - SQRT_2;

/// Efficiency of an equilibrium against the optimum, with the applicable
/// lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub nash_surplus: f64,
    pub system_surplus: f64,
    pub ratio: f64,
    pub bound: f64,
    /// `ratio - bound`.
    pub margin: f64,
    /// False when the price violates `p(0) = 0`, so no bound is guaranteed.
    pub bound_applies: bool,
}

/// Lower bound on the efficiency ratio for the given price: `g(B)` for
/// monomial prices (a linear price is the case `B = 1`) and `4 sqrt(2) - 5`
/// otherwise.
pub fn ratio_bound(price: &PriceModel) -> f64 {
    match *price {
        PriceModel::Linear { .. } => g(1.0).unwrap_or(WORST_CASE_RATIO),
        PriceModel::Monomial { exponent, .. } => g(exponent).unwrap_or(WORST_CASE_RATIO),
        _ => WORST_CASE_RATIO,
    }
}

/// Builds a [`RatioReport`] from the two surpluses.
pub fn ratio_from_surplus(
    nash_surplus: f64,
    system_surplus: f64,
    bound: f64,
    bound_applies: bool,
) -> Result<RatioReport> {
    if !(system_surplus > 0.0) {
        return Err(Error::Degenerate(alloc::format!(
            "optimal surplus {system_surplus} must be > 0"
        )));
    }
    let ratio = nash_surplus / system_surplus;
    Ok(RatioReport {
        nash_surplus,
        system_surplus,
        ratio,
        bound,
        margin: ratio - bound,
        bound_applies,
    })
}

/// Ratio of the surplus at `nash` to the optimal surplus `sys`.
pub fn ratio(inst: &LinkInstance, nash: &NashResult, sys: &SystemSolution) -> Result<RatioReport> {
    let nash_surplus = market::surplus(inst, &nash.outcome.rates)?;
    ratio_from_surplus(
        nash_surplus,
        sys.surplus,
        ratio_bound(&inst.price),
        !inst.price.violates_p0(),
    )
}

fn check_nash_at_one(price: &PriceModel) -> Result<(f64, f64, f64)> {
    price.check_rate(1.0).map_err(|_| {
        Error::Precondition("the price must be defined at the normalized rate 1".into())
    })?;
    let p1 = price.price_unchecked(1.0);
    let (b_lo, b_hi) = price.beta(1.0)?;
    if !(1.0 - b_hi <= p1 && p1 < 1.0) {
        return Err(Error::Precondition(alloc::format!(
            "an equilibrium at rate 1 needs 1 - beta+(1) <= p(1) < 1, got p(1) = {p1}, beta+(1) = {b_hi}"
        )));
    }
    Ok((p1, b_lo, b_hi))
}

/// Worst-case efficiency ratio over linear-utility games whose equilibrium
/// total rate is 1, in the limit of many users.
#[allow(non_snake_case)]
pub fn F_of_p(price: &PriceModel) -> Result<f64> {
    let (p1, _, b_hi) = check_nash_at_one(price)?;
    let numerator = p1 + (1.0 - p1) * (1.0 - p1) / b_hi - price.cost(1.0)?;
    let f_sys = price.rate_at_price(1.0)?;
    let denominator = f_sys - price.cost(f_sys)?;
    Ok(numerator / denominator)
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(alloc::format!("a = {a} must lie in (0, 1)")));
    }
    if !(b >= a.max(1.0 - a)) || b.is_infinite() {
        return Err(Error::Domain(alloc::format!(
            "b = {b} must be finite and >= max(a, 1 - a)"
        )));
    }
    Ok(())
}

/// `F` for the two-piece price with slopes `a`, `b` and knee 1.
#[allow(non_snake_case)]
pub fn H(a: f64, b: f64) -> Result<f64> {
    check_ab(a, b)?;
    let c = (1.0 - a) * (1.0 - a);
    Ok((a * b + 2.0 * (a + b) * c) / (2.0 * b - a * b + c))
}

/// `H(a, max(a, 1 - a))`.
#[allow(non_snake_case)]
pub fn H1(a: f64) -> Result<f64> {
    check_ab(a, a.max(1.0 - a))?;
    Ok(if a <= 0.5 {
        (2.0 - a) / (3.0 - 2.0 * a)
    } else {
        a * a + 4.0 * a * (1.0 - a) * (1.0 - a)
    })
}

/// `H(a, b)` as `b` grows without bound.
#[allow(non_snake_case)]
pub fn H2(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(alloc::format!("a = {a} must lie in (0, 1)")));
    }
    Ok((a + 2.0 * (1.0 - a) * (1.0 - a)) / (2.0 - a))
}

/// Minimum of `H` over its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMinimum {
    pub a: f64,
    pub value: f64,
    /// Minimizer found by the numeric search.
    pub numeric_a: f64,
    pub numeric_value: f64,
}

const B_SEARCH_MAX: f64 = 1e8;

fn min_over_b(a: f64) -> f64 {
    let lo = a.max(1.0 - a);
    let steps = 64;
    let ratio = B_SEARCH_MAX / lo;
    (0..=steps)
        .map(|i| {
            let b = if i == steps {
                B_SEARCH_MAX
            } else {
                lo * pow(ratio, i as f64 / steps as f64)
            };
            H(a, b).unwrap_or(f64::INFINITY)
        })
        .fold(f64::INFINITY, f64::min)
}

/// The analytic minimizer of `H`, together with a numeric confirmation by a
/// grid over `a`, a log grid over `b` up to `1e8`, and golden-section
/// refinement in `a`.
#[allow(non_snake_case)]
pub fn minimize_H() -> HMinimum {
    let n = 1000;
    let mut best = (f64::INFINITY, 0.5);
    for i in 1..n {
        let a = i as f64 / n as f64;
        let v = min_over_b(a);
        if v < best.0 {
            best = (v, a);
        }
    }
    let step = 1.0 / n as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(1e-9), (best.1 + step).min(1.0 - 1e-9));
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut v1, mut v2) = (min_over_b(x1), min_over_b(x2));
    while hi - lo > 1e-10 {
        if v1 < v2 {
            hi = x2;
            x2 = x1;
            v2 = v1;
            x1 = hi - inv_phi * (hi - lo);
            v1 = min_over_b(x1);
        } else {
            lo = x1;
            x1 = x2;
            v1 = v2;
            x2 = lo + inv_phi * (hi - lo);
            v2 = min_over_b(x2);
        }
    }
    let a = 0.5 * (lo + hi);
    HMinimum {
        a: WORST_CASE_SLOPE,
        value: WORST_CASE_RATIO,
        numeric_a: a,
        numeric_value: min_over_b(a),
    }
}

fn check_exponent(b: f64) -> Result<()> {
    if b >= 1.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(alloc::format!("B = {b} must be >= 1")))
    }
}

/// Worst-case ratio for monomial prices `a f^B`.
pub fn g(b: f64) -> Result<f64> {
    g2(b)
}

/// Value of the monomial worst case at the critical point `1 / (B + 1)`.
pub fn g1(b: f64) -> Result<f64> {
    check_exponent(b)?;
    Ok(pow(1.0 / (b + 1.0), 1.0 / b) * (b + 2.0) / (b + 1.0))
}

/// Value of the monomial worst case at the critical point `(B + 1) / (2B + 1)`.
pub fn g2(b: f64) -> Result<f64> {
    check_exponent(b)?;
    let m = 2.0 * b + 1.0;
    Ok(pow((b + 1.0) / m, 1.0 / b) * (b + 1.0) * (3.0 * b + 2.0) / (m * m))
}

/// Critical coefficients `(1 / (B + 1), (B + 1) / (2B + 1))`.
pub fn monomial_critical_as(b: f64) -> Result<(f64, f64)> {
    check_exponent(b)?;
    Ok((1.0 / (b + 1.0), (b + 1.0) / (2.0 * b + 1.0)))
}

/// The two-piece price with slopes `a`, `b` and knee 1.
pub fn worst_case_two_piece(a: f64, b: f64) -> Result<PriceModel> {
    PriceModel::two_piece(a, b, 1.0)
}

/// The monomial price `a2 f^B` at which `F` is minimized.
pub fn worst_case_monomial(b: f64) -> Result<PriceModel> {
    let (_, a2) = monomial_critical_as(b)?;
    PriceModel::monomial(a2, b)
}

/// A linear-utility game with a known equilibrium at total rate 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseInstance {
    pub instance: LinkInstance,
    pub nash: NashResult,
    /// Rates chosen by the construction.
    pub rates: Vec<f64>,
    pub total_rate: f64,
    pub system: SystemSolution,
    /// Surplus ratio achieved by the constructed equilibrium.
    pub predicted_ratio: f64,
    pub report: RatioReport,
    pub users: usize,
}

/// Smallest user count for which the construction is feasible at `price`.
pub fn worst_case_min_users(price: &PriceModel) -> Result<usize> {
    let (p1, b_lo, b_hi) = check_nash_at_one(price)?;
    let d1 = (1.0 - p1) / b_hi;
    let needed = libm::ceil((1.0 - d1) * b_lo / (1.0 - p1));
    Ok(1 + (needed.max(1.0) as usize))
}

/// Builds the `users`-user worst-case game for a price normalized so the
/// equilibrium total rate is 1: a high-value user 1 with `alpha = 1` and
/// `users - 1` identical small users whose valuations make the equilibrium
/// conditions tight.
pub fn build_worst_case(
    price: &PriceModel,
    users: usize,
    cfg: &SolverConfig,
) -> Result<WorstCaseInstance> {
    let (p1, b_lo, b_hi) = check_nash_at_one(price).map_err(|e| match e {
        Error::Precondition(reason) => Error::Infeasible {
            reason,
            min_users: None,
        },
        other => other,
    })?;
    let min_users = worst_case_min_users(price)?;
    if users < min_users {
        return Err(Error::Infeasible {
            reason: alloc::format!(
                "{users} users cannot absorb the rate left by user 1: need d_1 + (R - 1)(1 - p(1))/beta-(1) >= 1"
            ),
            min_users: Some(min_users),
        });
    }
    let d1 = (1.0 - p1) / b_hi;
    let dr = (1.0 - d1) / (users - 1) as f64;
    let alpha_r = p1 / (1.0 - b_lo * dr);
    let mut rates = Vec::with_capacity(users);
    rates.push(d1);
    rates.resize(users, dr);
    let mut utilities = Vec::with_capacity(users);
    utilities.push(UtilityModel::linear(1.0)?);
    utilities.resize(users, UtilityModel::linear(alpha_r)?);
    let instance = LinkInstance::new(*price, utilities)?;
    let bids: Vec<f64> = rates.iter().map(|d| p1 * d).collect();
    let nash = nash::constructed(&instance, bids, cfg)?;
    let system = solve_system(&instance, 0.0)?;
    let report = ratio(&instance, &nash, &system)?;
    Ok(WorstCaseInstance {
        total_rate: sum(rates.iter().copied()),
        rates,
        nash,
        system,
        predicted_ratio: report.ratio,
        report,
        users,
        instance,
    })
}

/// Rate at which the linear-utility optimum sits, for a price normalized as
/// in [`F_of_p`].
pub fn system_rate(price: &PriceModel) -> Result<f64> {
    price.rate_at_price(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert!((WORST_CASE_RATIO - 0.656_854_249_492_380_2).abs() < 1e-15);
        assert!((WORST_CASE_SLOPE - 0.585_786_437_626_905).abs() < 1e-15);
    }

    #[test]
    fn h_examples() {
        assert!((H1(2.0 / 3.0).unwrap() - 20.0 / 27.0).abs() < 1e-15);
        assert!((H1(1e-9).unwrap() - 2.0 / 3.0).abs() < 1e-9);
        assert!((H2(WORST_CASE_SLOPE).unwrap() - WORST_CASE_RATIO).abs() < 1e-15);
        assert!((H(WORST_CASE_SLOPE, 100.0).unwrap() - 0.657478).abs() < 1e-6);
        assert!(H(0.3, 0.5).is_err());
        assert!(H(1.0, 5.0).is_err());
        assert!(H2(0.0).is_err());
        for a in [0.1, 0.4, 0.5, 0.7, 0.9] {
            let b = f64::max(a, 1.0 - a);
            assert!((H1(a).unwrap() - H(a, b).unwrap()).abs() < 1e-14);
            assert!((H(a, 1e12).unwrap() - H2(a).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn h_decreases_in_b_at_the_minimizer() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let b = WORST_CASE_SLOPE.max(1.0 - WORST_CASE_SLOPE) * 1.5f64.powi(k);
            let v = H(WORST_CASE_SLOPE, b).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn h_minimum() {
        let m = minimize_H();
        assert_eq!(m.a, WORST_CASE_SLOPE);
        assert!((m.numeric_value - WORST_CASE_RATIO).abs() < 1e-6);
        assert!((m.numeric_a - WORST_CASE_SLOPE).abs() < 1e-4);
    }

    #[test]
    fn f_matches_h_for_two_piece() {
        for (a, b) in [
            (0.3, 0.7),
            (WORST_CASE_SLOPE, 100.0),
            (0.8, 3.0),
            (0.5, 1e6),
        ] {
            let p = worst_case_two_piece(a, b).unwrap();
            assert!((F_of_p(&p).unwrap() - H(a, b).unwrap()).abs() < 1e-12);
        }
        let p = worst_case_two_piece(WORST_CASE_SLOPE, 1e6).unwrap();
        assert!((F_of_p(&p).unwrap() - 0.656854).abs() < 1e-4);
        assert!(matches!(
            F_of_p(&PriceModel::linear(1.5).unwrap()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn f_of_monomial_is_g() {
        for b in [1.0, 2.0, 5.0, 10.0] {
            let p = worst_case_monomial(b).unwrap();
            assert!((F_of_p(&p).unwrap() - g(b).unwrap()).abs() < 1e-12, "{b}");
        }
    }

    #[test]
    fn g_examples() {
        assert!((g(1.0).unwrap() - 20.0 / 27.0).abs() < 1e-15);
        assert!((g1(1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((g(1000.0).unwrap() - 0.74998).abs() < 1e-4);
        assert!(g(0.5).is_err());
        let (a1, a2) = monomial_critical_as(3.0).unwrap();
        assert_eq!((a1, a2), (0.25, 4.0 / 7.0));
        let grid = [1.0, 2.0, 5.0, 10.0, 100.0];
        for w in grid.windows(2) {
            assert!(g(w[0]).unwrap() < g(w[1]).unwrap());
            assert!(g1(w[0]).unwrap() < g1(w[1]).unwrap());
        }
        for b in grid {
            assert!(g1(b).unwrap() >= 0.75);
        }
    }

    #[test]
    fn worst_case_reference_values() {
        let p = worst_case_two_piece(WORST_CASE_SLOPE, 100.0).unwrap();
        let wc = build_worst_case(&p, 50, &SolverConfig::default()).unwrap();
        assert!((wc.rates[0] - 0.41664).abs() < 1e-5);
        assert!((wc.rates[1] - 0.011905).abs() < 1e-6);
        match wc.instance.users[1] {
            UtilityModel::Linear { alpha } => assert!((alpha - 0.58929).abs() < 1e-5),
            _ => unreachable!(),
        }
        assert!((wc.predicted_ratio - 0.660_368_417_690_004).abs() < 1e-9);
        assert!(wc.nash.report.passed);
        assert!((wc.total_rate - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn worst_case_ratio_shrinks_with_more_users() {
        let p = worst_case_two_piece(WORST_CASE_SLOPE, 100.0).unwrap();
        let cfg = SolverConfig::default();
        let expected = [
            (3, 0.739_892_116_582_728),
            (10, 0.673_645_221_825_214),
            (100, 0.658_904_272_382_894),
        ];
        for (users, ratio) in expected {
            let wc = build_worst_case(&p, users, &cfg).unwrap();
            assert!((wc.predicted_ratio - ratio).abs() < 1e-9, "{users}");
            assert!(wc.nash.report.passed, "{users}");
        }
    }

    #[test]
    fn worst_case_infeasible_pairs() {
        let p = worst_case_two_piece(0.05, 0.06).unwrap();
        let err = build_worst_case(&p, 2, &SolverConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible {
                min_users: None,
                ..
            }
        ));
        let p = PriceModel::two_piece(0.9, 100.0, 1.0).unwrap();
        let need = worst_case_min_users(&p).unwrap();
        assert_eq!(need, 6);
        match build_worst_case(&p, need - 1, &SolverConfig::default()) {
            Err(Error::Infeasible { min_users, .. }) => assert_eq!(min_users, Some(need)),
            other => panic!("{other:?}"),
        }
        assert!(build_worst_case(&p, need, &SolverConfig::default()).is_ok());
    }
}
