//! The multi-link game. Users bid separately on every link; each link clears
//! on its own, and a user's rate is the largest flow it can route over its
//! paths within the capacity granted to it on each link.

mod allocation;
mod ascent;
mod game;
mod system;
mod topology;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::models::{PriceModel, UtilityModel};
use crate::{Error, Result};

pub use allocation::{allocate, clear_links, max_rate, network_surplus, LinkClearing, MaxRate};
pub use game::{
    best_response_network, check_network_bound, omega, solve_network_nash, verify_network_nash,
    NetworkNashResult, NetworkVerifyReport,
};
pub use system::{solve_network_system, NetworkSystemSolution};
pub use topology::{Path, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    pub topology: Topology,
    pub prices: Vec<PriceModel>,
    pub users: Vec<UtilityModel>,
}

impl NetworkInstance {
    pub fn new(
        topology: Topology,
        prices: Vec<PriceModel>,
        users: Vec<UtilityModel>,
    ) -> Result<Self> {
        let inst = NetworkInstance {
            topology,
            prices,
            users,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prices.len() != self.topology.num_links() {
            return Err(Error::Domain(format!(
                "{} prices for {} links",
                self.prices.len(),
                self.topology.num_links()
            )));
        }
        if self.users.len() != self.topology.num_users() {
            return Err(Error::Domain(format!(
                "{} utilities for {} users",
                self.users.len(),
                self.topology.num_users()
            )));
        }
        self.prices.iter().try_for_each(PriceModel::validate)?;
        self.users.iter().try_for_each(UtilityModel::validate)
    }

    pub fn num_links(&self) -> usize {
        self.topology.num_links()
    }

    pub fn num_users(&self) -> usize {
        self.topology.num_users()
    }
}

/// Bids `w_jr`, stored link-major. Entries on links a user cannot route
/// through are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BidMatrix {
    links: usize,
    users: usize,
    data: Vec<f64>,
}

impl BidMatrix {
    pub fn zeros(topology: &Topology) -> Self {
        BidMatrix {
            links: topology.num_links(),
            users: topology.num_users(),
            data: vec![0.0; topology.num_links() * topology.num_users()],
        }
    }

    /// Builds a matrix from rows `bids[j][r]`.
    pub fn from_rows(topology: &Topology, bids: &[Vec<f64>]) -> Result<Self> {
        let mut m = BidMatrix::zeros(topology);
        if bids.len() != m.links || bids.iter().any(|row| row.len() != m.users) {
            return Err(Error::Domain(format!(
                "bid matrix must be {} x {}",
                m.links, m.users
            )));
        }
        for (j, row) in bids.iter().enumerate() {
            for (r, &w) in row.iter().enumerate() {
                m.set(topology, j, r, w)?;
            }
        }
        Ok(m)
    }

    pub fn num_links(&self) -> usize {
        self.links
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn get(&self, j: usize, r: usize) -> f64 {
        self.data[j * self.users + r]
    }

    pub fn set(&mut self, topology: &Topology, j: usize, r: usize, w: f64) -> Result<()> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Domain(format!(
                "bid of user {r} on link {j} is {w}; bids must be finite and >= 0"
            )));
        }
        if w > 0.0 && topology.user_links(r).binary_search(&j).is_err() {
            return Err(Error::Domain(format!(
                "user {r} has no path through link {j}, so its bid there must be 0"
            )));
        }
        self.data[j * self.users + r] = w;
        Ok(())
    }

    /// Bids of every user at link `j`.
    pub fn link(&self, j: usize) -> &[f64] {
        &self.data[j * self.users..(j + 1) * self.users]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.links).map(|j| self.link(j).to_vec()).collect()
    }

    pub fn total(&self) -> f64 {
        crate::math::sum(self.data.iter().copied())
    }

    pub fn max_abs_diff(&self, other: &BidMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_bid(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn set_unchecked(&mut self, j: usize, r: usize, w: f64) {
        self.data[j * self.users + r] = w;
    }
}

/// Rates granted by a bid matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAllocation {
    /// `x[j][r]`, the rate granted to user `r` on link `j`.
    pub x: Vec<Vec<f64>>,
    /// Total rate per link.
    pub f: Vec<f64>,
    /// Price per link.
    pub mu: Vec<f64>,
    /// Path rates realizing `d`.
    pub y: Vec<f64>,
    /// Per-user rate.
    pub d: Vec<f64>,
}
