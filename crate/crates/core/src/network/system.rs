use alloc::vec;
use alloc::vec::Vec;

use super::ascent::{self, PathObjective};
use super::{network_surplus, NetworkInstance};
use crate::math::{self, sum};
use crate::models::PriceModel;
use crate::nash::SolverConfig;
use crate::Result;

/// Optimal path rates of the network welfare problem. The link rates `f` and
/// user rates `d` are unique even when `y` is not.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSystemSolution {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub d: Vec<f64>,
    pub surplus: f64,
    /// `max_q |y_q - max(0, y_q + grad_q)|`.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Network surplus as a function of path rates.
struct Welfare<'a>(&'a NetworkInstance);

impl Welfare<'_> {
    fn slope_of(price: &PriceModel, f: f64) -> f64 {
        price
            .derivatives(f.max(f64::MIN_POSITIVE))
            .map_or(0.0, |(_, hi)| hi)
    }
}

impl PathObjective for Welfare<'_> {
    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let inst = self.0;
        let topo = &inst.topology;
        let f = topo.link_loads(y);
        let d = topo.user_totals(y);
        let prices: Vec<f64> = inst
            .prices
            .iter()
            .zip(&f)
            .map(|(p, &v)| p.price_unchecked(v))
            .collect();
        Ok(topo
            .paths()
            .iter()
            .map(|path| {
                let congestion = sum(path.links.iter().map(|&j| prices[j]));
                inst.users[path.user].marginal_unchecked(d[path.user]) - congestion
            })
            .collect())
    }

    fn curvature(&self, y: &[f64], free: &[usize]) -> Result<Vec<Vec<f64>>> {
        let inst = self.0;
        let topo = &inst.topology;
        let f = topo.link_loads(y);
        let d = topo.user_totals(y);
        let slopes: Vec<f64> = inst
            .prices
            .iter()
            .zip(&f)
            .map(|(p, &v)| Self::slope_of(p, v))
            .collect();
        let paths = topo.paths();
        Ok(free
            .iter()
            .map(|&a| {
                free.iter()
                    .map(|&b| {
                        let (pa, pb) = (&paths[a], &paths[b]);
                        let shared = sum(pa
                            .links
                            .iter()
                            .filter(|j| pb.links.contains(j))
                            .map(|&j| slopes[j]));
                        let own = if pa.user == pb.user {
                            -inst.users[pa.user].curvature_unchecked(d[pa.user])
                        } else {
                            0.0
                        };
                        shared + own
                    })
                    .collect()
            })
            .collect())
    }

    fn in_domain(&self, y: &[f64]) -> bool {
        let f = self.0.topology.link_loads(y);
        self.0
            .prices
            .iter()
            .zip(&f)
            .all(|(p, &v)| p.check_rate(v).is_ok())
    }

    fn coordinate_max(&self, y: &[f64], q: usize) -> Result<f64> {
        let inst = self.0;
        let topo = &inst.topology;
        let mut rest = y.to_vec();
        rest[q] = 0.0;
        let loads = topo.link_loads(&rest);
        let path = &topo.paths()[q];
        let base_rate = topo.user_totals(&rest)[path.user];
        let slope = |t: f64| {
            let congestion = sum(path
                .links
                .iter()
                .map(|&j| inst.prices[j].price_unchecked(loads[j] + t)));
            inst.users[path.user].marginal_unchecked(base_rate + t) - congestion
        };
        if slope(0.0) <= 0.0 {
            return Ok(0.0);
        }
        let cap = path
            .links
            .iter()
            .filter_map(|&j| inst.prices[j].domain_cap().map(|c| c - loads[j]))
            .reduce(f64::min);
        let above = |t: f64| Ok(slope(t) > 0.0);
        let (lo, hi) = math::bracket(cap, "network path rate", above)?;
        let (lo, hi) = math::bisect(lo, hi, 0.0, "network path rate", above)?;
        Ok(0.5 * (lo + hi))
    }
}

/// Maximizes network surplus over path rates `y >= 0` by projected Newton
/// steps interleaved with exact coordinate ascent, until the natural residual
/// `|y - max(0, y + grad)|` is within `cfg.tol`.
pub fn solve_network_system(
    inst: &NetworkInstance,
    cfg: &SolverConfig,
) -> Result<NetworkSystemSolution> {
    inst.validate()?;
    cfg.validate()?;
    let topo = &inst.topology;
    let (y, residual, iterations) = ascent::maximize(
        &Welfare(inst),
        vec![0.0; topo.num_paths()],
        cfg.tol,
        cfg.max_sweeps,
        "network system",
    )?;
    let f = topo.link_loads(&y);
    let d = topo.user_totals(&y);
    Ok(NetworkSystemSolution {
        surplus: network_surplus(inst, &d, &f)?,
        y,
        f,
        d,
        kkt_residual: residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{solve_system, LinkInstance};
    use crate::network::{Path, Topology};
    use crate::{PriceModel, UtilityModel};
    use alloc::vec;

    fn lin() -> PriceModel {
        PriceModel::linear(1.0).unwrap()
    }

    #[test]
    fn series_links() {
        let topo = Topology::new(
            2,
            1,
            vec![Path {
                links: vec![0, 1],
                user: 0,
            }],
        )
        .unwrap();
        let inst = NetworkInstance::new(
            topo,
            vec![lin(), lin()],
            vec![UtilityModel::linear(1.0).unwrap()],
        )
        .unwrap();
        let s = solve_network_system(&inst, &SolverConfig::default()).unwrap();
        assert!((s.d[0] - 0.5).abs() < 1e-9);
        assert!((s.f[0] - 0.5).abs() < 1e-9 && (s.f[1] - 0.5).abs() < 1e-9);
        assert!((s.surplus - 0.25).abs() < 1e-12);
    }

    #[test]
    fn parallel_links() {
        let topo = Topology::new(
            2,
            1,
            vec![
                Path {
                    links: vec![0],
                    user: 0,
                },
                Path {
                    links: vec![1],
                    user: 0,
                },
            ],
        )
        .unwrap();
        let inst = NetworkInstance::new(
            topo,
            vec![lin(), lin()],
            vec![UtilityModel::linear(1.0).unwrap()],
        )
        .unwrap();
        let s = solve_network_system(&inst, &SolverConfig::default()).unwrap();
        assert!((s.y[0] - 1.0).abs() < 1e-9 && (s.y[1] - 1.0).abs() < 1e-9);
        assert!((s.surplus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_link_matches_market_solver() {
        let users = vec![
            UtilityModel::log_one_plus(2.0, 1.0).unwrap(),
            UtilityModel::shifted_power(1.0, 0.5, 2.0).unwrap(),
            UtilityModel::linear(0.7).unwrap(),
        ];
        let price = PriceModel::monomial(1.3, 2.0).unwrap();
        let topo = Topology::new(
            1,
            3,
            (0..3)
                .map(|r| Path {
                    links: vec![0],
                    user: r,
                })
                .collect(),
        )
        .unwrap();
        let net = NetworkInstance::new(topo, vec![price], users.clone()).unwrap();
        let s = solve_network_system(&net, &SolverConfig::default()).unwrap();
        let single = solve_system(&LinkInstance::new(price, users).unwrap(), 0.0).unwrap();
        assert!((s.surplus - single.surplus).abs() < 1e-9);
        for (a, b) in s.d.iter().zip(&single.rates) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
