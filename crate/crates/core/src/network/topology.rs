use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A route through the network, owned by exactly one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub links: Vec<usize>,
    pub user: usize,
}

/// Links, users and the paths connecting them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    links: usize,
    users: usize,
    paths: Vec<Path>,
    user_paths: Vec<Vec<usize>>,
    user_links: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(links: usize, users: usize, paths: Vec<Path>) -> Result<Self> {
        if links == 0 || users == 0 {
            return Err(Error::Domain(
                "a network needs at least one link and one user".into(),
            ));
        }
        let mut user_paths = vec![Vec::new(); users];
        let mut user_links = vec![Vec::new(); users];
        for (q, path) in paths.iter().enumerate() {
            if path.links.is_empty() {
                return Err(Error::Domain(format!("path {q} uses no links")));
            }
            if path.user >= users {
                return Err(Error::Domain(format!(
                    "path {q} is owned by user {} but there are {users} users",
                    path.user
                )));
            }
            for (i, &j) in path.links.iter().enumerate() {
                if j >= links {
                    return Err(Error::Domain(format!(
                        "path {q} uses link {j} but there are {links} links"
                    )));
                }
                if path.links[..i].contains(&j) {
                    return Err(Error::Domain(format!("path {q} repeats link {j}")));
                }
            }
            user_paths[path.user].push(q);
            user_links[path.user].extend_from_slice(&path.links);
        }
        if let Some(r) = user_paths.iter().position(Vec::is_empty) {
            return Err(Error::Domain(format!("user {r} owns no path")));
        }
        for l in &mut user_links {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Topology {
            links,
            users,
            paths,
            user_paths,
            user_links,
        })
    }

    /// Builds a topology from the `J x P` path-link incidence `a` and the
    /// `R x P` path-user incidence `h`. Every column of `h` must hold exactly
    /// one 1.
    pub fn from_incidence(a: &[Vec<u8>], h: &[Vec<u8>]) -> Result<Self> {
        let links = a.len();
        let users = h.len();
        let num_paths = a.first().map_or(0, Vec::len);
        if a.iter().chain(h).any(|row| row.len() != num_paths) {
            return Err(Error::Domain(
                "incidence matrices must have one column per path".into(),
            ));
        }
        if a.iter().chain(h).flatten().any(|&v| v > 1) {
            return Err(Error::Domain("incidence entries must be 0 or 1".into()));
        }
        let mut paths = Vec::with_capacity(num_paths);
        for q in 0..num_paths {
            let owners: Vec<usize> = (0..users).filter(|&r| h[r][q] == 1).collect();
            if owners.len() != 1 {
                return Err(Error::Domain(format!(
                    "column {q} of H has {} ones; each path belongs to exactly one user",
                    owners.len()
                )));
            }
            paths.push(Path {
                links: (0..links).filter(|&j| a[j][q] == 1).collect(),
                user: owners[0],
            });
        }
        Topology::new(links, users, paths)
    }

    pub fn num_links(&self) -> usize {
        self.links
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// Indices of the paths owned by user `r`.
    pub fn user_paths(&self, r: usize) -> &[usize] {
        &self.user_paths[r]
    }

    /// Sorted links used by any path of user `r`.
    pub fn user_links(&self, r: usize) -> &[usize] {
        &self.user_links[r]
    }

    /// `A[j][q] = 1` when path `q` uses link `j`.
    pub fn path_link_incidence(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0; self.paths.len()]; self.links];
        for (q, path) in self.paths.iter().enumerate() {
            for &j in &path.links {
                a[j][q] = 1;
            }
        }
        a
    }

    /// `H[r][q] = 1` when path `q` belongs to user `r`.
    pub fn path_user_incidence(&self) -> Vec<Vec<u8>> {
        let mut h = vec![vec![0; self.paths.len()]; self.users];
        for (q, path) in self.paths.iter().enumerate() {
            h[path.user][q] = 1;
        }
        h
    }

    /// Per-link loads `A y` for path rates `y`.
    pub fn link_loads(&self, y: &[f64]) -> Vec<f64> {
        let mut parts = vec![Vec::new(); self.links];
        for (path, &rate) in self.paths.iter().zip(y) {
            for &j in &path.links {
                parts[j].push(rate);
            }
        }
        parts.into_iter().map(crate::math::sum).collect()
    }

    /// Per-user totals `H y`.
    pub fn user_totals(&self, y: &[f64]) -> Vec<f64> {
        self.user_paths
            .iter()
            .map(|qs| crate::math::sum(qs.iter().map(|&q| y[q])))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn incidence_round_trip() {
        let topo = Topology::new(
            3,
            2,
            vec![
                Path {
                    links: vec![0, 1],
                    user: 0,
                },
                Path {
                    links: vec![2],
                    user: 0,
                },
                Path {
                    links: vec![1, 2],
                    user: 1,
                },
            ],
        )
        .unwrap();
        let a = topo.path_link_incidence();
        let h = topo.path_user_incidence();
        assert_eq!(a, vec![vec![1, 0, 0], vec![1, 0, 1], vec![0, 1, 1]]);
        assert_eq!(h, vec![vec![1, 1, 0], vec![0, 0, 1]]);
        assert_eq!(Topology::from_incidence(&a, &h).unwrap(), topo);
        assert_eq!(topo.user_links(0), &[0, 1, 2]);
        assert_eq!(topo.link_loads(&[1.0, 2.0, 3.0]), vec![1.0, 4.0, 5.0]);
        assert_eq!(topo.user_totals(&[1.0, 2.0, 3.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn invariants_are_enforced() {
        let h_shared = vec![vec![1u8], vec![1u8]];
        assert!(Topology::from_incidence(&[vec![1]], &h_shared).is_err());
        assert!(Topology::from_incidence(&[vec![1]], &[vec![0]]).is_err());
        let p = |links: Vec<usize>, user| Path { links, user };
        assert!(Topology::new(1, 1, vec![p(vec![], 0)]).is_err());
        assert!(Topology::new(1, 1, vec![p(vec![1], 0)]).is_err());
        assert!(Topology::new(1, 2, vec![p(vec![0], 0)]).is_err());
        assert!(Topology::new(2, 1, vec![p(vec![0, 0], 0)]).is_err());
    }
}
