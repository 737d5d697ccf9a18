#![allow(clippy::needless_range_loop)]

mod common;

use common::utility;
use elastic_market_core::efficiency::WORST_CASE_RATIO;
use elastic_market_core::market::{clear_total, solve_system};
use elastic_market_core::nash::{solve_nash_best_response, StrategyProfile};
use elastic_market_core::network::*;
use elastic_market_core::{LinkInstance, PriceModel, SolverConfig, UtilityModel};
use proptest::prelude::*;

/// Nonempty link subsets of `0..links`, as bit masks.
fn path_mask(links: usize) -> impl Strategy<Value = Vec<usize>> {
    (1usize..(1 << links)).prop_map(move |m| (0..links).filter(|j| m >> j & 1 == 1).collect())
}

fn single_user_topology() -> impl Strategy<Value = Topology> {
    (1usize..=4).prop_flat_map(|links| {
        prop::collection::vec(path_mask(links), 1..=3).prop_map(move |ps| {
            let paths = ps
                .into_iter()
                .map(|links| Path { links, user: 0 })
                .collect();
            Topology::new(links, 1, paths).unwrap()
        })
    })
}

fn topology() -> impl Strategy<Value = Topology> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(links, users)| {
        prop::collection::vec(prop::collection::vec(path_mask(links), 1..=2), users).prop_map(
            move |per_user| {
                let paths = per_user
                    .into_iter()
                    .enumerate()
                    .flat_map(|(r, ps)| ps.into_iter().map(move |links| Path { links, user: r }))
                    .collect();
                Topology::new(links, users, paths).unwrap()
            },
        )
    })
}

fn network_price() -> impl Strategy<Value = PriceModel> {
    prop_oneof![
        (0.2..3.0f64).prop_map(|a| PriceModel::linear(a).unwrap()),
        (0.2..3.0f64, 1.0..3.0f64).prop_map(|(a, b)| PriceModel::monomial(a, b).unwrap()),
    ]
}

fn network() -> impl Strategy<Value = NetworkInstance> {
    topology().prop_flat_map(|t| {
        let prices = prop::collection::vec(network_price(), t.num_links());
        let users = prop::collection::vec(utility(), t.num_users());
        (Just(t), prices, users).prop_map(|(t, p, u)| NetworkInstance::new(t, p, u).unwrap())
    })
}

/// Solves the square system `m x = b`; `None` when singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &k| m[i][c].abs().total_cmp(&m[k][c].abs()))?;
        if m[piv][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for i in 0..n {
            if i != c {
                let t = m[i][c] / m[c][c];
                for k in 0..n {
                    m[i][k] -= t * m[c][k];
                }
                b[i] -= t * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / m[i][i]).collect())
}

/// Maximum routable rate by enumerating every vertex of the feasible set.
fn max_rate_by_vertices(topo: &Topology, xbar: &[f64]) -> f64 {
    let paths = topo.num_paths();
    let mut rows: Vec<(Vec<f64>, f64)> = (0..topo.num_links())
        .map(|j| {
            let row = topo
                .paths()
                .iter()
                .map(|p| f64::from(p.links.contains(&j) as u8))
                .collect();
            (row, xbar[j])
        })
        .collect();
    for q in 0..paths {
        let mut row = vec![0.0; paths];
        row[q] = -1.0;
        rows.push((row, 0.0));
    }
    let mut best = 0.0f64;
    for mask in 0u32..(1 << rows.len()) {
        if mask.count_ones() as usize != paths {
            continue;
        }
        let chosen: Vec<_> = (0..rows.len()).filter(|i| mask >> i & 1 == 1).collect();
        let m = chosen.iter().map(|&i| rows[i].0.clone()).collect();
        let b = chosen.iter().map(|&i| rows[i].1).collect();
        if let Some(y) = solve_square(m, b) {
            let feasible = rows.iter().all(|(row, rhs)| {
                row.iter().zip(&y).map(|(a, v)| a * v).sum::<f64>() <= rhs + 1e-9
            });
            if feasible {
                best = best.max(y.iter().sum());
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn max_rate_matches_vertex_enumeration(
        topo in single_user_topology(),
        xbar in prop::collection::vec(0.0..5.0f64, 4),
    ) {
        let xbar = &xbar[..topo.num_links()];
        let m = max_rate(&topo, 0, xbar).unwrap();
        let brute = max_rate_by_vertices(&topo, xbar);
        prop_assert!((m.rate - brute).abs() <= 1e-10 * brute.max(1.0), "{} vs {}", m.rate, brute);
        let loads = topo.link_loads(&{
            let mut y = vec![0.0; topo.num_paths()];
            for (&q, &v) in m.paths.iter().zip(&m.y) { y[q] = v; }
            y
        });
        for (l, x) in loads.iter().zip(xbar) {
            prop_assert!(*l <= x + 1e-10);
        }
    }

    #[test]
    fn max_rate_is_monotone_and_concave(
        topo in single_user_topology(),
        a in prop::collection::vec(0.0..5.0f64, 4),
        b in prop::collection::vec(0.0..5.0f64, 4),
    ) {
        let n = topo.num_links();
        let (a, b) = (&a[..n], &b[..n]);
        let hi: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let rate = |x: &[f64]| max_rate(&topo, 0, x).unwrap().rate;
        prop_assert!(rate(&hi) >= rate(a) - 1e-10);
        prop_assert!(rate(&mid) >= 0.5 * (rate(a) + rate(b)) - 1e-10);
    }

    #[test]
    fn omega_grants_the_requested_rate(p in network_price(), x in 1e-3..5.0f64, others in 0.0..10.0f64) {
        let w = omega(&p, x, others).unwrap();
        let f = clear_total(&p, w + others).unwrap();
        let granted = w / p.price(f).unwrap();
        prop_assert!((granted - x).abs() <= 1e-9 * x.max(1.0));
        prop_assert!(omega(&p, 1.1 * x, others).unwrap() > w);
    }

    #[test]
    fn one_link_networks_reduce_to_the_single_link_game(
        p in network_price(),
        users in prop::collection::vec(utility(), 1..=3),
    ) {
        let topo = Topology::new(
            1,
            users.len(),
            (0..users.len()).map(|r| Path { links: vec![0], user: r }).collect(),
        )
        .unwrap();
        let net = NetworkInstance::new(topo.clone(), vec![p], users.clone()).unwrap();
        let single = LinkInstance::new(p, users.clone()).unwrap();
        let cfg = SolverConfig::default();

        let sys = solve_network_system(&net, &cfg).unwrap();
        let reference = solve_system(&single, 0.0).unwrap();
        prop_assert!((sys.surplus - reference.surplus).abs() <= 1e-7 * reference.surplus.abs().max(1.0));

        let nash = solve_network_nash(&net, &BidMatrix::zeros(&topo), &cfg).unwrap();
        let one = solve_nash_best_response(&single, &StrategyProfile::zeros(users.len()), &cfg).unwrap();
        for (a, b) in nash.bids.link(0).iter().zip(&one.profile.bids) {
            prop_assert!((a - b).abs() <= 1e-6 * b.max(1.0), "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn small_networks_respect_the_efficiency_bound(inst in network()) {
        let cfg = SolverConfig::default();
        let sys = solve_network_system(&inst, &cfg).unwrap();
        let nash = solve_network_nash(&inst, &BidMatrix::zeros(&inst.topology), &cfg).unwrap();
        prop_assert!(nash.report.passed);
        if sys.surplus > 1e-9 {
            let report = check_network_bound(&inst, &nash, &sys).unwrap();
            prop_assert!(report.ratio >= WORST_CASE_RATIO - 1e-6, "{report:?}");
            prop_assert!(report.ratio <= 1.0 + 1e-6, "{report:?}");
        }
    }
}

#[test]
fn linear_utility_on_two_parallel_links() {
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
    let lin = PriceModel::linear(1.0).unwrap();
    let inst = NetworkInstance::new(
        topo.clone(),
        vec![lin, lin],
        vec![UtilityModel::linear(1.0).unwrap()],
    )
    .unwrap();
    let nash =
        solve_network_nash(&inst, &BidMatrix::zeros(&topo), &SolverConfig::default()).unwrap();
    // A lone user buys f with f = 1/2 on each link (marginal 1 = 2f).
    for j in 0..2 {
        assert!((nash.allocation.f[j] - 0.5).abs() < 1e-8);
        assert!((nash.bids.get(j, 0) - 0.25).abs() < 1e-8);
    }
}
