use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{BidMatrix, NetworkAllocation, NetworkInstance, Topology};
use crate::market::clear;
use crate::math::sum;
use crate::simplex;
use crate::{Error, Result};

/// Per-link clearing of a bid matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkClearing {
    pub f: Vec<f64>,
    pub mu: Vec<f64>,
    /// `x[j][r]`.
    pub x: Vec<Vec<f64>>,
}

/// Clears every link independently on its own column of bids.
pub fn clear_links(inst: &NetworkInstance, bids: &BidMatrix) -> Result<LinkClearing> {
    if bids.num_links() != inst.num_links() || bids.num_users() != inst.num_users() {
        return Err(Error::Domain(format!(
            "bid matrix is {} x {} but the network has {} links and {} users",
            bids.num_links(),
            bids.num_users(),
            inst.num_links(),
            inst.num_users()
        )));
    }
    let mut out = LinkClearing {
        f: Vec::with_capacity(inst.num_links()),
        mu: Vec::with_capacity(inst.num_links()),
        x: Vec::with_capacity(inst.num_links()),
    };
    for (j, price) in inst.prices.iter().enumerate() {
        let c = clear(price, bids.link(j))?;
        out.f.push(c.total_rate);
        out.mu.push(c.price);
        out.x.push(c.rates);
    }
    Ok(out)
}

/// Largest total rate user `r` can route with `xbar[j]` available on each
/// link `j`, with the path rates achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRate {
    pub rate: f64,
    /// The user's path indices.
    pub paths: Vec<usize>,
    /// Rate on each of those paths.
    pub y: Vec<f64>,
}

/// Solves `max sum_q y_q` over the user's paths subject to the per-link
/// capacities `xbar` (indexed by link; entries for links the user does not
/// touch are ignored).
pub fn max_rate(topology: &Topology, r: usize, xbar: &[f64]) -> Result<MaxRate> {
    if r >= topology.num_users() {
        return Err(Error::Domain(format!("user {r} out of range")));
    }
    if xbar.len() != topology.num_links() {
        return Err(Error::Domain(format!(
            "{} capacities for {} links",
            xbar.len(),
            topology.num_links()
        )));
    }
    let paths = topology.user_paths(r).to_vec();
    let links = topology.user_links(r);
    let rows: Vec<Vec<f64>> = links
        .iter()
        .map(|j| {
            paths
                .iter()
                .map(|&q| {
                    if topology.paths()[q].links.contains(j) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = links.iter().map(|&j| xbar[j]).collect();
    let sol = simplex::maximize(&vec![1.0; paths.len()], &rows, &rhs)?;
    Ok(MaxRate {
        rate: sol.objective,
        paths,
        y: sol.y,
    })
}

/// Clears every link and routes each user's grant at its maximum rate.
pub fn allocate(inst: &NetworkInstance, bids: &BidMatrix) -> Result<NetworkAllocation> {
    let cl = clear_links(inst, bids)?;
    let topo = &inst.topology;
    let mut y = vec![0.0; topo.num_paths()];
    let mut d = Vec::with_capacity(inst.num_users());
    for r in 0..inst.num_users() {
        let xbar: Vec<f64> = cl.x.iter().map(|row| row[r]).collect();
        let m = max_rate(topo, r, &xbar)?;
        for (&q, &v) in m.paths.iter().zip(&m.y) {
            y[q] = v;
        }
        d.push(m.rate);
    }
    Ok(NetworkAllocation {
        x: cl.x,
        f: cl.f,
        mu: cl.mu,
        y,
        d,
    })
}

/// `sum_r U_r(d_r) - sum_j C_j(f_j)`.
pub fn network_surplus(inst: &NetworkInstance, d: &[f64], f: &[f64]) -> Result<f64> {
    if d.len() != inst.num_users() || f.len() != inst.num_links() {
        return Err(Error::Domain(format!(
            "expected {} user rates and {} link rates",
            inst.num_users(),
            inst.num_links()
        )));
    }
    let mut utility = Vec::with_capacity(d.len());
    for (u, &v) in inst.users.iter().zip(d) {
        utility.push(u.value(v)?);
    }
    let mut cost = Vec::with_capacity(f.len());
    for (p, &v) in inst.prices.iter().zip(f) {
        cost.push(p.cost(v)?);
    }
    Ok(sum(utility) - sum(cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Path;
    use crate::{PriceModel, UtilityModel};
    use alloc::vec;

    fn p(links: Vec<usize>, user: usize) -> Path {
        Path { links, user }
    }

    #[test]
    fn max_rate_examples() {
        let parallel = Topology::new(2, 1, vec![p(vec![0], 0), p(vec![1], 0)]).unwrap();
        assert!((max_rate(&parallel, 0, &[2.0, 3.0]).unwrap().rate - 5.0).abs() < 1e-12);
        let series = Topology::new(2, 1, vec![p(vec![0, 1], 0)]).unwrap();
        assert!((max_rate(&series, 0, &[2.0, 3.0]).unwrap().rate - 2.0).abs() < 1e-12);
        let shared = Topology::new(3, 1, vec![p(vec![0, 1], 0), p(vec![1, 2], 0)]).unwrap();
        let m = max_rate(&shared, 0, &[1.0, 1.0, 1.0]).unwrap();
        assert!((m.rate - 1.0).abs() < 1e-12);
        assert!((m.y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clear_links_examples() {
        let topo = Topology::new(2, 2, vec![p(vec![0], 0), p(vec![0, 1], 1)]).unwrap();
        let lin = PriceModel::linear(1.0).unwrap();
        let u = UtilityModel::linear(1.0).unwrap();
        let inst = NetworkInstance::new(topo.clone(), vec![lin, lin], vec![u, u]).unwrap();
        let w = BidMatrix::from_rows(&topo, &[vec![3.0, 1.0], vec![0.0, 4.0]]).unwrap();
        let cl = clear_links(&inst, &w).unwrap();
        assert_eq!(cl.f, vec![2.0, 2.0]);
        assert_eq!(cl.x[0], vec![1.5, 0.5]);
        let alloc = allocate(&inst, &w).unwrap();
        assert_eq!(alloc.d, vec![1.5, 0.5]);
        let zero = allocate(&inst, &BidMatrix::zeros(&topo)).unwrap();
        assert_eq!(zero.f, vec![0.0, 0.0]);
        assert_eq!(zero.d, vec![0.0, 0.0]);
        assert!(BidMatrix::from_rows(&topo, &[vec![0.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn surplus_examples() {
        let series = Topology::new(2, 1, vec![p(vec![0, 1], 0)]).unwrap();
        let lin = PriceModel::linear(1.0).unwrap();
        let inst = NetworkInstance::new(
            series,
            vec![lin, lin],
            vec![UtilityModel::linear(1.0).unwrap()],
        )
        .unwrap();
        assert_eq!(network_surplus(&inst, &[1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(network_surplus(&inst, &[0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }
}
