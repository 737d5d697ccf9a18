//! The experiments behind each subcommand. Every command yields a JSON
//! report body and a CSV table; the caller decides which to write.

use elastic_market_core::efficiency::{self, RatioReport};
use elastic_market_core::market::{self, ClearingOutcome};
use elastic_market_core::nash::{self, NashResult, StrategyProfile, VerifyReport};
use elastic_market_core::network::{self, BidMatrix, NetworkInstance};
use elastic_market_core::{LinkInstance, PriceModel, SolverConfig};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::random;
use crate::report::fmt_f64;
use crate::scenario::{PriceSpec, Scenario, UtilitySpec};

/// Tolerance on `ratio - bound` below which `bound-check` reports a violation.
pub const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BestResponse,
    Direct,
}

/// Rows of a CSV file, already formatted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub report: Value,
    pub table: Table,
    /// Set when `bound-check` found a ratio below its bound.
    pub violation: Option<String>,
    /// Set when some runs of a batch failed to solve.
    pub failure: Option<String>,
}

impl Output {
    fn new(report: Value, table: Table) -> Self {
        Output {
            report,
            table,
            violation: None,
            failure: None,
        }
    }
}

fn num(v: f64) -> String {
    fmt_f64(v)
}

fn int(v: usize) -> String {
    v.to_string()
}

fn flag(v: bool) -> String {
    v.to_string()
}

fn outcome_json(out: &ClearingOutcome) -> Value {
    json!({
        "f": out.total_rate,
        "mu": out.price,
        "d": out.rates,
        "clearing_residual": out.residual,
    })
}

fn verify_json(rep: &VerifyReport) -> Value {
    json!({
        "passed": rep.passed,
        "positive_total": rep.positive_total,
        "upper_residuals": rep.residuals.iter().map(|r| r.upper).collect::<Vec<_>>(),
        "lower_residuals": rep.residuals.iter().map(|r| r.lower).collect::<Vec<_>>(),
        "max_residual": rep.max_residual,
        "max_deviation_gain": rep.max_deviation_gain,
        "worst_deviation": rep.worst_deviation.map(|(r, w)| json!({"user": r, "bid": w})),
        "deviations_checked": rep.deviations_checked,
    })
}

fn ratio_json(rep: &RatioReport) -> Value {
    json!({
        "nash_surplus": rep.nash_surplus,
        "system_surplus": rep.system_surplus,
        "ratio": rep.ratio,
        "bound": rep.bound,
        "margin": rep.margin,
        "bound_applies": rep.bound_applies,
    })
}

fn bids_from(flag: Option<&Vec<f64>>, scenario: &Scenario) -> Result<Vec<f64>, CliError> {
    flag.or(scenario.experiment.bids.as_ref())
        .cloned()
        .ok_or_else(|| CliError::Validation("bids: pass --bids or set experiment.bids".into()))
}

fn per_user_table(bids: &[f64], out: &ClearingOutcome, verify: Option<&VerifyReport>) -> Table {
    let mut t = Table::new(&["user", "bid", "rate", "upper_residual", "lower_residual"]);
    for (r, (&w, &d)) in bids.iter().zip(&out.rates).enumerate() {
        let res = verify.map(|v| v.residuals[r]).unwrap_or_default();
        t.push(vec![int(r), num(w), num(d), num(res.upper), num(res.lower)]);
    }
    t
}

pub fn clear(scenario: &Scenario, bids: Option<&Vec<f64>>) -> Result<Output, CliError> {
    let inst = scenario.single_link()?;
    let bids = bids_from(bids, scenario)?;
    if bids.len() != inst.num_users() {
        return Err(CliError::Validation(format!(
            "bids: {} bids for {} users",
            bids.len(),
            inst.num_users()
        )));
    }
    let out = market::clear(&inst.price, &bids)?;
    Ok(Output::new(
        json!({ "bids": bids, "outcome": outcome_json(&out) }),
        per_user_table(&bids, &out, None),
    ))
}

pub fn system(scenario: &Scenario) -> Result<Output, CliError> {
    let inst = scenario.single_link()?;
    let sys = market::solve_system(inst, 0.0)?;
    let mut t = Table::new(&["user", "rate"]);
    for (r, &d) in sys.rates.iter().enumerate() {
        t.push(vec![int(r), num(d)]);
    }
    Ok(Output::new(
        json!({
            "d": sys.rates,
            "f": sys.total_rate,
            "mu": sys.price,
            "surplus": sys.surplus,
            "kkt_residual": sys.kkt_residual,
        }),
        t,
    ))
}

pub fn price_taking(scenario: &Scenario) -> Result<Output, CliError> {
    let inst = scenario.single_link()?;
    let pt = market::price_taking_equilibrium(inst, 0.0)?;
    let surplus = market::surplus(inst, &pt.outcome.rates)?;
    Ok(Output::new(
        json!({
            "w": pt.bids,
            "outcome": outcome_json(&pt.outcome),
            "surplus": surplus,
            "system_surplus": pt.system.surplus,
            "stationarity_residual": pt.stationarity_residual,
        }),
        per_user_table(&pt.bids, &pt.outcome, None),
    ))
}

fn solve_nash(
    inst: &LinkInstance,
    method: Method,
    cfg: &SolverConfig,
) -> Result<NashResult, CliError> {
    Ok(match method {
        Method::BestResponse => {
            nash::solve_nash_best_response(inst, &StrategyProfile::zeros(inst.num_users()), cfg)?
        }
        Method::Direct => nash::solve_nash_direct(inst, cfg)?,
    })
}

pub fn nash(scenario: &Scenario, method: Method) -> Result<Output, CliError> {
    let inst = scenario.single_link()?;
    let cfg = &scenario.solver;
    let res = solve_nash(inst, method, cfg)?;
    let sys = market::solve_system(inst, 0.0)?;
    let ratio = efficiency::ratio(inst, &res, &sys)?;
    Ok(Output::new(
        json!({
            "method": res.method.name(),
            "w": res.profile.bids,
            "outcome": outcome_json(&res.outcome),
            "surplus": ratio.nash_surplus,
            "efficiency": ratio_json(&ratio),
            "sweeps": res.sweeps,
            "max_bid_delta": res.max_bid_delta,
            "verification": verify_json(&res.report),
        }),
        per_user_table(&res.profile.bids, &res.outcome, Some(&res.report)),
    ))
}

pub fn verify(scenario: &Scenario, bids: Option<&Vec<f64>>) -> Result<Output, CliError> {
    let inst = scenario.single_link()?;
    let bids = bids_from(bids, scenario)?;
    let cfg = &scenario.solver;
    let rep = nash::verify_nash(inst, &bids, cfg.verify_tol, cfg.deviation_samples)?;
    let out = market::clear(&inst.price, &bids)?;
    Ok(Output::new(
        json!({ "bids": bids, "outcome": outcome_json(&out), "verification": verify_json(&rep) }),
        per_user_table(&bids, &out, Some(&rep)),
    ))
}

/// Which worst-case family to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorstCaseFamily {
    TwoPiece { a: f64, b: f64 },
    Monomial { exponent: f64 },
}

pub fn worst_case(
    family: WorstCaseFamily,
    user_counts: &[usize],
    cfg: &SolverConfig,
) -> Result<Output, CliError> {
    if user_counts.is_empty() {
        return Err(CliError::Validation(
            "R: give at least one user count".into(),
        ));
    }
    let (price, limit) = match family {
        WorstCaseFamily::TwoPiece { a, b } => (
            efficiency::worst_case_two_piece(a, b)?,
            efficiency::H(a, b)?,
        ),
        WorstCaseFamily::Monomial { exponent } => (
            efficiency::worst_case_monomial(exponent)?,
            efficiency::g(exponent)?,
        ),
    };
    let runs: Vec<_> = user_counts
        .par_iter()
        .map(|&users| {
            let wc = efficiency::build_worst_case(&price, users, cfg)?;
            let rep = nash::verify_nash(
                &wc.instance,
                &wc.nash.profile.bids,
                cfg.verify_tol,
                cfg.deviation_samples,
            )?;
            Ok::<_, CliError>((wc, rep))
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&[
        "R",
        "ratio",
        "limit",
        "nash_surplus",
        "system_surplus",
        "d_1",
        "d_r",
        "alpha_r",
        "verified",
        "max_residual",
    ]);
    let mut rows = Vec::new();
    for (wc, rep) in &runs {
        let alpha_r = wc
            .instance
            .users
            .get(1)
            .and_then(|u| u.linear_slope())
            .unwrap_or(f64::NAN);
        let d_r = wc.rates.get(1).copied().unwrap_or(f64::NAN);
        t.push(vec![
            int(wc.users),
            num(wc.report.ratio),
            num(limit),
            num(wc.report.nash_surplus),
            num(wc.report.system_surplus),
            num(wc.rates[0]),
            num(d_r),
            num(alpha_r),
            flag(rep.passed),
            num(rep.max_residual),
        ]);
        rows.push(json!({
            "R": wc.users,
            "efficiency": ratio_json(&wc.report),
            "d_1": wc.rates[0],
            "d_r": d_r,
            "alpha_r": alpha_r,
            "verification": verify_json(rep),
        }));
    }
    Ok(Output::new(
        json!({ "price": PriceSpec::from_model(&price), "limit": limit, "runs": rows }),
        t,
    ))
}

pub fn sweep_g(grid: &[f64]) -> Result<Output, CliError> {
    let rows: Vec<[f64; 6]> = grid
        .par_iter()
        .map(|&b| {
            let (a1, a2) = efficiency::monomial_critical_as(b)?;
            Ok::<_, CliError>([
                b,
                efficiency::g(b)?,
                efficiency::g1(b)?,
                efficiency::g2(b)?,
                a1,
                a2,
            ])
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["B", "g", "g1", "g2", "a1", "a2"]);
    for row in &rows {
        t.push(row.iter().map(|&v| num(v)).collect());
    }
    let report = rows
        .iter()
        .map(|r| json!({"B": r[0], "g": r[1], "g1": r[2], "g2": r[3], "a1": r[4], "a2": r[5]}))
        .collect::<Vec<_>>();
    Ok(Output::new(json!({ "rows": report }), t))
}

pub fn sweep_h(a_grid: &[f64], b_grid: &[f64]) -> Result<Output, CliError> {
    let points: Vec<(f64, f64)> = a_grid
        .iter()
        .flat_map(|&a| b_grid.iter().map(move |&b| (a, b)))
        .collect();
    // Points outside the domain b >= max(a, 1 - a) are left empty.
    let values: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(a, b)| efficiency::H(a, b).ok())
        .collect();
    let mut t = Table::new(&["a", "b", "H"]);
    let mut rows = Vec::new();
    for (&(a, b), h) in points.iter().zip(&values) {
        t.push(vec![num(a), num(b), h.map(num).unwrap_or_default()]);
        rows.push(json!({"a": a, "b": b, "H": h}));
    }
    let min = efficiency::minimize_H();
    Ok(Output::new(
        json!({
            "rows": rows,
            "minimum": {"a": min.a, "value": min.value, "numeric_a": min.numeric_a, "numeric_value": min.numeric_value},
        }),
        t,
    ))
}

pub fn network_system(scenario: &Scenario) -> Result<Output, CliError> {
    let inst = scenario.network()?;
    let sys = network::solve_network_system(inst, &scenario.solver)?;
    let mut t = Table::new(&["path", "user", "rate"]);
    for (q, (path, &y)) in inst.topology.paths().iter().zip(&sys.y).enumerate() {
        t.push(vec![int(q), int(path.user), num(y)]);
    }
    Ok(Output::new(
        json!({
            "y": sys.y,
            "f": sys.f,
            "d": sys.d,
            "surplus": sys.surplus,
            "kkt_residual": sys.kkt_residual,
            "iterations": sys.iterations,
        }),
        t,
    ))
}

fn network_run(
    inst: &NetworkInstance,
    cfg: &SolverConfig,
) -> Result<
    (
        network::NetworkNashResult,
        network::NetworkSystemSolution,
        RatioReport,
    ),
    CliError,
> {
    let nash = network::solve_network_nash(inst, &BidMatrix::zeros(&inst.topology), cfg)?;
    let sys = network::solve_network_system(inst, cfg)?;
    let ratio = network::check_network_bound(inst, &nash, &sys)?;
    Ok((nash, sys, ratio))
}

pub fn network_nash(scenario: &Scenario) -> Result<Output, CliError> {
    let inst = scenario.network()?;
    let (res, _, ratio) = network_run(inst, &scenario.solver)?;
    let mut t = Table::new(&["link", "user", "bid", "granted"]);
    for j in 0..inst.num_links() {
        for r in 0..inst.num_users() {
            t.push(vec![
                int(j),
                int(r),
                num(res.bids.get(j, r)),
                num(res.allocation.x[j][r]),
            ]);
        }
    }
    Ok(Output::new(
        json!({
            "w": res.bids.rows(),
            "x": res.allocation.x,
            "f": res.allocation.f,
            "mu": res.allocation.mu,
            "y": res.allocation.y,
            "d": res.allocation.d,
            "efficiency": ratio_json(&ratio),
            "sweeps": res.sweeps,
            "restarts": res.restarts,
            "max_bid_delta": res.max_bid_delta,
            "verification": {
                "passed": res.report.passed,
                "user_gains": res.report.user_gains,
                "max_gain": res.report.max_gain,
                "deviations_checked": res.report.deviations_checked,
            },
        }),
        t,
    ))
}

fn violated(rep: &RatioReport) -> bool {
    rep.bound_applies && rep.margin < -BOUND_SLACK
}

/// Nash, optimum and ratio for the scenario's instance.
pub fn bound_check(scenario: &Scenario, method: Method) -> Result<Output, CliError> {
    let cfg = &scenario.solver;
    let ratio = match &scenario.model {
        crate::scenario::Model::SingleLink(inst) => {
            let res = solve_nash(inst, method, cfg)?;
            let sys = market::solve_system(inst, 0.0)?;
            efficiency::ratio(inst, &res, &sys)?
        }
        crate::scenario::Model::Network(inst) => network_run(inst, cfg)?.2,
    };
    let mut t = Table::new(&[
        "nash_surplus",
        "system_surplus",
        "ratio",
        "bound",
        "margin",
        "bound_applies",
    ]);
    t.push(vec![
        num(ratio.nash_surplus),
        num(ratio.system_surplus),
        num(ratio.ratio),
        num(ratio.bound),
        num(ratio.margin),
        flag(ratio.bound_applies),
    ]);
    let mut out = Output::new(json!({ "efficiency": ratio_json(&ratio) }), t);
    if violated(&ratio) {
        out.violation = Some(format!("ratio {} < bound {}", ratio.ratio, ratio.bound));
    }
    Ok(out)
}

/// One random single-link instance: its description, Nash and optimum.
#[derive(Debug, Clone)]
pub struct RandomRun {
    pub index: usize,
    pub instance: LinkInstance,
    pub result: Result<RatioReport, String>,
}

/// Checks `count` random `p(0) = 0` instances drawn from `seed`. Instance `i`
/// is generated from its own stream so results do not depend on the thread
/// count.
pub fn random_runs(count: usize, seed: u64, method: Method, cfg: &SolverConfig) -> Vec<RandomRun> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::rng(seed.wrapping_add(i as u64));
            let price = if i % 4 == 3 {
                random::monomial_price(&mut rng)
            } else {
                random::zero_start_price(&mut rng)
            };
            let instance = random::link_instance(&mut rng, price, 5);
            let method =
                if method == Method::Direct && !instance.price.has_nondecreasing_elasticity() {
                    Method::BestResponse
                } else {
                    method
                };
            let result = solve_nash(&instance, method, cfg)
                .and_then(|res| {
                    let sys = market::solve_system(&instance, 0.0)?;
                    Ok(efficiency::ratio(&instance, &res, &sys)?)
                })
                .map_err(|e| e.to_string());
            RandomRun {
                index: i,
                instance,
                result,
            }
        })
        .collect()
}

fn family(p: &PriceModel) -> &'static str {
    match p {
        PriceModel::Linear { .. } => "linear",
        PriceModel::Monomial { .. } => "monomial",
        PriceModel::TwoPiece { .. } => "two_piece",
        PriceModel::Mm1Queue { .. } => "mm1",
    }
}

pub fn bound_check_random(
    count: usize,
    method: Method,
    cfg: &SolverConfig,
) -> Result<Output, CliError> {
    let runs = random_runs(count, cfg.seed, method, cfg);
    let mut t = Table::new(&[
        "instance",
        "family",
        "users",
        "nash_surplus",
        "system_surplus",
        "ratio",
        "bound",
        "margin",
        "status",
    ]);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut failures = 0;
    for run in &runs {
        let fam = family(&run.instance.price);
        let users = run.instance.num_users();
        match &run.result {
            Ok(rep) => {
                let status = if violated(rep) { "violated" } else { "ok" };
                if violated(rep) {
                    violations.push(run.index);
                }
                t.push(vec![
                    int(run.index),
                    fam.into(),
                    int(users),
                    num(rep.nash_surplus),
                    num(rep.system_surplus),
                    num(rep.ratio),
                    num(rep.bound),
                    num(rep.margin),
                    status.into(),
                ]);
                rows.push(json!({
                    "instance": run.index,
                    "price": PriceSpec::from_model(&run.instance.price),
                    "users": run.instance.users.iter().map(UtilitySpec::from_model).collect::<Vec<_>>(),
                    "efficiency": ratio_json(rep),
                }));
            }
            Err(msg) => {
                failures += 1;
                t.push(vec![
                    int(run.index),
                    fam.into(),
                    int(users),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "solver_error".into(),
                ]);
                rows.push(json!({ "instance": run.index, "error": msg }));
            }
        }
    }
    let mut out = Output::new(
        json!({
            "count": count,
            "violations": violations,
            "solver_errors": failures,
            "runs": rows,
        }),
        t,
    );
    if !violations.is_empty() {
        out.violation = Some(format!(
            "{} of {count} instances fall below their bound",
            violations.len()
        ));
    }
    if failures > 0 {
        out.failure = Some(format!("{failures} of {count} instances did not solve"));
    }
    Ok(out)
}
