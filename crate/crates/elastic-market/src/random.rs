//! Seeded random instances for property runs and `bound-check --random`.

use elastic_market_core::network::{NetworkInstance, Path, Topology};
use elastic_market_core::{LinkInstance, PriceModel, UtilityModel};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere a seed is accepted.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Linear, monomial or two-piece price, all with `p(0) = 0`.
pub fn zero_start_price<R: Rng>(rng: &mut R) -> PriceModel {
    match rng.gen_range(0..3) {
        0 => PriceModel::linear(rng.gen_range(0.2..3.0)),
        1 => PriceModel::monomial(rng.gen_range(0.2..3.0), rng.gen_range(1.0..5.0)),
        _ => {
            let a = rng.gen_range(0.2..2.0);
            PriceModel::two_piece(a, a * rng.gen_range(1.0..20.0), rng.gen_range(0.2..3.0))
        }
    }
    .expect("sampled parameters are valid")
}

/// Monomial price, `p(0) = 0`.
pub fn monomial_price<R: Rng>(rng: &mut R) -> PriceModel {
    PriceModel::monomial(rng.gen_range(0.2..3.0), rng.gen_range(1.0..6.0))
        .expect("sampled parameters are valid")
}

/// Differentiable price with nondecreasing elasticity.
pub fn smooth_price<R: Rng>(rng: &mut R) -> PriceModel {
    match rng.gen_range(0..3) {
        0 => PriceModel::linear(rng.gen_range(0.2..3.0)),
        1 => PriceModel::monomial(rng.gen_range(0.2..3.0), rng.gen_range(1.0..5.0)),
        _ => PriceModel::mm1_queue(rng.gen_range(0.05..1.0), rng.gen_range(1.0..6.0)),
    }
    .expect("sampled parameters are valid")
}

pub fn utility<R: Rng>(rng: &mut R) -> UtilityModel {
    match rng.gen_range(0..3) {
        0 => UtilityModel::linear(rng.gen_range(0.2..3.0)),
        1 => UtilityModel::log_one_plus(rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)),
        _ => {
            let gamma = if rng.gen_bool(0.5) {
                rng.gen_range(0.3..0.9)
            } else {
                rng.gen_range(1.2..4.0)
            };
            UtilityModel::shifted_power(rng.gen_range(0.2..3.0), rng.gen_range(0.3..3.0), gamma)
        }
    }
    .expect("sampled parameters are valid")
}

/// A link with `1..=max_users` random users.
pub fn link_instance<R: Rng>(rng: &mut R, price: PriceModel, max_users: usize) -> LinkInstance {
    let users = (0..rng.gen_range(1..=max_users))
        .map(|_| utility(rng))
        .collect();
    LinkInstance::new(price, users).expect("random users are valid")
}

/// A random network with at most `max_links` links, `max_users` users and
/// `max_paths` paths (at least one per user). Links carry linear or
/// monomial prices.
pub fn network<R: Rng>(
    rng: &mut R,
    max_links: usize,
    max_users: usize,
    max_paths: usize,
) -> NetworkInstance {
    let links = rng.gen_range(1..=max_links);
    let users = rng.gen_range(1..=max_users.min(max_paths));
    let total = rng.gen_range(users..=max_paths);
    let mut owners: Vec<usize> = (0..users).collect();
    owners.extend((users..total).map(|_| rng.gen_range(0..users)));
    owners.shuffle(rng);
    let paths = owners
        .into_iter()
        .map(|user| {
            let mask = rng.gen_range(1u32..(1 << links));
            Path {
                links: (0..links).filter(|j| mask >> j & 1 == 1).collect(),
                user,
            }
        })
        .collect();
    let topology = Topology::new(links, users, paths).expect("every user owns a path");
    let prices = (0..links)
        .map(|_| {
            if rng.gen_bool(0.5) {
                PriceModel::linear(rng.gen_range(0.2..3.0))
            } else {
                PriceModel::monomial(rng.gen_range(0.2..3.0), rng.gen_range(1.0..3.0))
            }
            .expect("sampled parameters are valid")
        })
        .collect();
    let utilities = (0..users).map(|_| utility(rng)).collect();
    NetworkInstance::new(topology, prices, utilities).expect("sizes match")
}
