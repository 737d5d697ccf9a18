use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ascent::{self, PathObjective};
use super::system::NetworkSystemSolution;
use super::{allocate, max_rate, network_surplus, BidMatrix, NetworkAllocation, NetworkInstance};
use crate::efficiency::{ratio_from_surplus, RatioReport, WORST_CASE_RATIO};
use crate::market::clear_total;
use crate::math::{self, pow, sum};
use crate::models::PriceModel;
use crate::nash::SolverConfig;
use crate::{Error, Result};

const RESTARTS: usize = 3;

fn check_below_cap(price: &PriceModel, xbar: f64) -> Result<()> {
    if !(xbar.is_finite() && xbar >= 0.0) {
        return Err(Error::Domain(format!(
            "target rate {xbar} must be finite and >= 0"
        )));
    }
    if let Some(s) = price.domain_cap() {
        if xbar >= s {
            return Err(Error::Domain(format!(
                "target rate {xbar} is not below the service rate {s}"
            )));
        }
    }
    Ok(())
}

/// Total rate at a link when one user is granted `xbar` and the others bid
/// `others` in total.
fn omega_rate(price: &PriceModel, xbar: f64, others: f64) -> Result<f64> {
    check_below_cap(price, xbar)?;
    if others == 0.0 {
        return Ok(xbar);
    }
    if xbar == 0.0 {
        return clear_total(price, others);
    }
    let above = |f: f64| Ok(f <= xbar || (f - xbar) * price.price_unchecked(f) < others);
    let (lo, hi) = math::bracket(price.domain_cap(), "bid inversion", above)?;
    let (_, hi) = math::bisect(lo, hi, 0.0, "bid inversion", above)?;
    Ok(hi)
}

/// Bid needed at a link to be granted `xbar` when the others bid `others` in
/// total. Strictly increasing and convex in `xbar`, with `omega(0) = 0`.
pub fn omega(price: &PriceModel, xbar: f64, others: f64) -> Result<f64> {
    if !(others.is_finite() && others >= 0.0) {
        return Err(Error::Domain(format!(
            "others' bid {others} must be finite and >= 0"
        )));
    }
    if xbar == 0.0 {
        return Ok(0.0);
    }
    let f = omega_rate(price, xbar, others)?;
    Ok(xbar * price.price_unchecked(f))
}

/// Right derivative of [`omega`] in `xbar`.
fn omega_slope(price: &PriceModel, xbar: f64, others: f64) -> Result<f64> {
    let f = omega_rate(price, xbar, others)?;
    if f == 0.0 {
        return Ok(price.price_unchecked(0.0));
    }
    let p = price.price_unchecked(f);
    let (_, dp) = price.derivatives(f)?;
    Ok(p + xbar * dp * p / (p + (f - xbar) * dp))
}

fn others_at(bids: &BidMatrix, j: usize, r: usize) -> f64 {
    sum(bids
        .link(j)
        .iter()
        .enumerate()
        .filter(|&(q, _)| q != r)
        .map(|(_, &w)| w))
}

/// The pieces of the network a single user optimizes over.
struct UserProblem<'a> {
    inst: &'a NetworkInstance,
    r: usize,
    links: &'a [usize],
    others: Vec<f64>,
    /// For each of the user's paths, positions into `links`.
    paths: Vec<Vec<usize>>,
}

impl<'a> UserProblem<'a> {
    fn new(inst: &'a NetworkInstance, r: usize, bids: &BidMatrix) -> Self {
        let topo = &inst.topology;
        let links = topo.user_links(r);
        let others = links.iter().map(|&j| others_at(bids, j, r)).collect();
        let paths = topo
            .user_paths(r)
            .iter()
            .map(|&q| {
                topo.paths()[q]
                    .links
                    .iter()
                    .map(|j| links.binary_search(j).unwrap_or_default())
                    .collect()
            })
            .collect();
        UserProblem {
            inst,
            r,
            links,
            others,
            paths,
        }
    }

    fn price(&self, l: usize) -> &PriceModel {
        &self.inst.prices[self.links[l]]
    }

    fn loads(&self, y: &[f64]) -> Vec<f64> {
        let mut parts = vec![Vec::new(); self.links.len()];
        for (ls, &v) in self.paths.iter().zip(y) {
            for &l in ls {
                parts[l].push(v);
            }
        }
        parts.into_iter().map(sum).collect()
    }

    fn bids_for(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.links.len())
            .map(|l| omega(self.price(l), x[l], self.others[l]))
            .collect()
    }

    /// `F_r(xbar) = U_r(d_r(xbar)) - sum_j omega_j(xbar_j)` over the user's
    /// links.
    fn value(&self, x: &[f64]) -> Result<f64> {
        let mut full = vec![0.0; self.inst.num_links()];
        for (l, &j) in self.links.iter().enumerate() {
            full[j] = x[l];
        }
        let d = max_rate(&self.inst.topology, self.r, &full)?.rate;
        let paid = sum(self.bids_for(x)?);
        Ok(self.inst.users[self.r].value(d)? - paid)
    }

    /// Maximizes `U(sum y) - sum_j omega_j((A y)_j)` over the user's path
    /// rates, starting from `y`.
    fn ascend(&self, y: Vec<f64>, cfg: &SolverConfig) -> Result<Vec<f64>> {
        ascent::maximize(self, y, cfg.tol, cfg.max_sweeps, "network best response")
            .map(|(y, _, _)| y)
    }
}

impl PathObjective for UserProblem<'_> {
    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let x = self.loads(y);
        let mut slopes = Vec::with_capacity(x.len());
        for (l, &v) in x.iter().enumerate() {
            slopes.push(omega_slope(self.price(l), v, self.others[l])?);
        }
        let m = self.inst.users[self.r].marginal_unchecked(sum(y.iter().copied()));
        Ok(self
            .paths
            .iter()
            .map(|ls| m - sum(ls.iter().map(|&l| slopes[l])))
            .collect())
    }

    fn curvature(&self, y: &[f64], free: &[usize]) -> Result<Vec<Vec<f64>>> {
        let x = self.loads(y);
        let mut bend = Vec::with_capacity(x.len());
        for (l, &v) in x.iter().enumerate() {
            let (p, others) = (self.price(l), self.others[l]);
            let h = 1e-6 * v.max(1e-6);
            let ahead = omega_slope(p, v + h, others);
            bend.push(match ahead {
                Ok(s) => (s - omega_slope(p, v, others)?) / h,
                Err(_) => 0.0,
            });
        }
        let u = -self.inst.users[self.r].curvature_unchecked(sum(y.iter().copied()));
        Ok(free
            .iter()
            .map(|&a| {
                free.iter()
                    .map(|&b| {
                        let (pa, pb) = (&self.paths[a], &self.paths[b]);
                        u + sum(pa.iter().filter(|l| pb.contains(l)).map(|&l| bend[l]))
                    })
                    .collect()
            })
            .collect())
    }

    fn in_domain(&self, y: &[f64]) -> bool {
        let x = self.loads(y);
        x.iter()
            .enumerate()
            .all(|(l, &v)| self.price(l).domain_cap().map_or(true, |c| v < c))
    }

    fn coordinate_max(&self, y: &[f64], q: usize) -> Result<f64> {
        let utility = &self.inst.users[self.r];
        let mut rest = y.to_vec();
        rest[q] = 0.0;
        let base = self.loads(&rest);
        let others_rate = sum(rest.iter().copied());
        let path = &self.paths[q];
        let slope = |t: f64| -> Result<f64> {
            let mut cost = Vec::with_capacity(path.len());
            for &l in path {
                cost.push(omega_slope(self.price(l), base[l] + t, self.others[l])?);
            }
            Ok(utility.marginal_unchecked(others_rate + t) - sum(cost))
        };
        if slope(0.0)? <= 0.0 {
            return Ok(0.0);
        }
        let cap = path
            .iter()
            .filter_map(|&l| self.price(l).domain_cap().map(|s| s - base[l]))
            .reduce(f64::min);
        let above = |t: f64| Ok(slope(t)? > 0.0);
        let (lo, hi) = math::bracket(cap, "network best response", above)?;
        let (lo, hi) = math::bisect(lo, hi, 0.0, "network best response", above)?;
        Ok(0.5 * (lo + hi))
    }
}

fn user_start(inst: &NetworkInstance, r: usize, alloc: &NetworkAllocation) -> Vec<f64> {
    inst.topology
        .user_paths(r)
        .iter()
        .map(|&q| alloc.y[q])
        .collect()
}

/// Bids of user `r` maximizing its payoff against the others' bids in
/// `bids`, indexed by link. Links off the user's paths get 0.
///
/// The search runs over the user's path rates: any bid vector that grants
/// capacity the user cannot route is dominated, so the best response buys
/// exactly the link rates `A_r y` of some path-rate vector `y`.
pub fn best_response_network(
    inst: &NetworkInstance,
    r: usize,
    bids: &BidMatrix,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if r >= inst.num_users() {
        return Err(Error::Domain(format!("user {r} out of range")));
    }
    let alloc = allocate(inst, bids)?;
    best_response_from(inst, r, bids, user_start(inst, r, &alloc), cfg)
}

fn best_response_from(
    inst: &NetworkInstance,
    r: usize,
    bids: &BidMatrix,
    start: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let problem = UserProblem::new(inst, r, bids);
    let y = problem.ascend(start, cfg)?;
    let local = problem.bids_for(&problem.loads(&y))?;
    let mut out = vec![0.0; inst.num_links()];
    for (l, &j) in problem.links.iter().enumerate() {
        out[j] = local[l];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkVerifyReport {
    pub passed: bool,
    pub positive_total: bool,
    /// Largest sampled improvement of each user's payoff.
    pub user_gains: Vec<f64>,
    pub max_gain: f64,
    /// First user with an improving deviation beyond the tolerance.
    pub failing_user: Option<usize>,
    pub deviations_checked: usize,
}

/// Samples deviations of each user's granted rates around `x_r(W)` and
/// checks that none improves `F_r` by more than `tol * max(1, |F_r|)`.
///
/// Samples per user: zero and quarter-octave scalings of the whole vector
/// and of each coordinate, plus seeded random directions.
pub fn verify_network_nash(
    inst: &NetworkInstance,
    bids: &BidMatrix,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<NetworkVerifyReport> {
    let alloc = allocate(inst, bids)?;
    let users = inst.num_users();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut user_gains = vec![0.0; users];
    let mut failing_user = None;
    let mut checked = 0;
    let steps = (samples / 8).max(1);
    for r in 0..users {
        let problem = UserProblem::new(inst, r, bids);
        let x: Vec<f64> = problem.links.iter().map(|&j| alloc.x[j][r]).collect();
        let base: Vec<f64> = problem
            .links
            .iter()
            .zip(&x)
            .map(|(&j, &v)| {
                if v > 0.0 {
                    v
                } else if alloc.f[j] > 0.0 {
                    alloc.f[j] / users as f64
                } else {
                    1e-3
                }
            })
            .collect();
        let f0 = problem.value(&x)?;
        let allowance = tol * f0.abs().max(1.0);
        let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; x.len()]];
        for k in 1..=steps {
            let s = pow(2.0, 0.25 * k as f64);
            for factor in [s, 1.0 / s] {
                candidates.push(base.iter().map(|v| v * factor).collect());
                for l in 0..x.len() {
                    let mut c = x.clone();
                    c[l] = base[l] * factor;
                    candidates.push(c);
                }
            }
        }
        for l in 0..x.len() {
            let mut c = x.clone();
            c[l] = 0.0;
            candidates.push(c);
        }
        for i in 0..samples / 2 {
            let m = pow(2.0, -((i % 8) as f64));
            candidates.push(
                x.iter()
                    .zip(&base)
                    .map(|(&v, &b)| (v + m * b * rng.gen_range(-1.0..=1.0)).max(0.0))
                    .collect(),
            );
        }
        let mut best: f64 = 0.0;
        for c in candidates {
            if c == x {
                continue;
            }
            let value = match problem.value(&c) {
                Ok(v) => v,
                Err(Error::Domain(_)) => continue,
                Err(e) => return Err(e),
            };
            checked += 1;
            best = best.max(value - f0);
        }
        user_gains[r] = best;
        if best > allowance && failing_user.is_none() {
            failing_user = Some(r);
        }
    }
    let max_gain = user_gains.iter().copied().fold(0.0, f64::max);
    Ok(NetworkVerifyReport {
        passed: failing_user.is_none(),
        positive_total: bids.total() > 0.0,
        user_gains,
        max_gain,
        failing_user,
        deviations_checked: checked,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkNashResult {
    pub bids: BidMatrix,
    pub allocation: NetworkAllocation,
    pub sweeps: usize,
    pub max_bid_delta: f64,
    pub restarts: usize,
    pub report: NetworkVerifyReport,
}

fn perturb(inst: &NetworkInstance, bids: &BidMatrix, rng: &mut ChaCha8Rng) -> BidMatrix {
    let mut out = bids.clone();
    for r in 0..inst.num_users() {
        for &j in inst.topology.user_links(r) {
            let w = bids.get(j, r);
            let u: f64 = rng.gen_range(-1.0..=1.0);
            out.set_unchecked(j, r, w * libm::exp(0.2 * u) + 1e-3 * (u + 1.0));
        }
    }
    out
}

enum Attempt {
    Done(NetworkNashResult),
    Failed {
        bids: BidMatrix,
        sweeps: usize,
        residual: f64,
    },
}

fn attempt(
    inst: &NetworkInstance,
    mut bids: BidMatrix,
    cfg: &SolverConfig,
    restarts: usize,
) -> Result<Attempt> {
    let theta = cfg.damping;
    let samples = 2 * cfg.deviation_samples;
    let mut delta = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        delta = 0.0;
        for r in 0..inst.num_users() {
            let br = match best_response_network(inst, r, &bids, cfg) {
                Ok(br) => br,
                Err(Error::NonConvergence { .. }) => {
                    return Ok(Attempt::Failed {
                        bids,
                        sweeps: sweep,
                        residual: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            };
            for &j in inst.topology.user_links(r) {
                let old = bids.get(j, r);
                let new = (1.0 - theta) * old + theta * br[j];
                delta = delta.max((new - old).abs());
                bids.set_unchecked(j, r, new);
            }
        }
        if delta <= cfg.tol * bids.max_bid().max(1.0) {
            let report = verify_network_nash(inst, &bids, cfg.verify_tol, samples, cfg.seed)?;
            if report.passed {
                let allocation = allocate(inst, &bids)?;
                return Ok(Attempt::Done(NetworkNashResult {
                    bids,
                    allocation,
                    sweeps: sweep,
                    max_bid_delta: delta,
                    restarts,
                    report,
                }));
            }
            return Ok(Attempt::Failed {
                bids,
                sweeps: sweep,
                residual: report.max_gain,
            });
        }
    }
    Ok(Attempt::Failed {
        bids,
        sweeps: cfg.max_sweeps,
        residual: delta,
    })
}

/// Damped Gauss-Seidel over users' network best responses from `init`. A
/// run that stalls or fails verification restarts from a randomly perturbed
/// point, up to three times.
pub fn solve_network_nash(
    inst: &NetworkInstance,
    init: &BidMatrix,
    cfg: &SolverConfig,
) -> Result<NetworkNashResult> {
    inst.validate()?;
    cfg.validate()?;
    if init.num_links() != inst.num_links() || init.num_users() != inst.num_users() {
        return Err(Error::Domain(
            "initial bids do not match the network".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut bids = init.clone();
    let mut total_sweeps = 0;
    let mut residual = f64::INFINITY;
    for restart in 0..=RESTARTS {
        match attempt(inst, bids, cfg, restart)? {
            Attempt::Done(mut res) => {
                res.sweeps += total_sweeps;
                return Ok(res);
            }
            Attempt::Failed {
                bids: last,
                sweeps,
                residual: res,
            } => {
                total_sweeps += sweeps;
                residual = res;
                bids = perturb(inst, &last, &mut rng);
            }
        }
    }
    Err(Error::NonConvergence {
        context: "network Nash",
        iterations: total_sweeps,
        residual,
    })
}

/// Efficiency of a network equilibrium against the network optimum.
pub fn check_network_bound(
    inst: &NetworkInstance,
    nash: &NetworkNashResult,
    system: &NetworkSystemSolution,
) -> Result<RatioReport> {
    let nash_surplus = network_surplus(inst, &nash.allocation.d, &nash.allocation.f)?;
    ratio_from_surplus(
        nash_surplus,
        system.surplus,
        WORST_CASE_RATIO,
        inst.prices.iter().all(|p| !p.violates_p0()),
    )
}
