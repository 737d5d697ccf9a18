#![allow(dead_code)]

use elastic_market_core::{LinkInstance, PriceModel, UtilityModel};
use proptest::prelude::*;

/// Price curves with `p(0) = 0`.
pub fn zero_start_price() -> impl Strategy<Value = PriceModel> {
    prop_oneof![
        (0.1..5.0f64).prop_map(|a| PriceModel::linear(a).unwrap()),
        (0.1..5.0f64, 1.0..5.0f64).prop_map(|(a, b)| PriceModel::monomial(a, b).unwrap()),
        (0.1..2.0f64, 1.0..20.0f64, 0.2..3.0f64).prop_map(|(a, m, k)| PriceModel::two_piece(
            a,
            a * m,
            k
        )
        .unwrap()),
    ]
}

/// Differentiable price curves with nondecreasing elasticity.
pub fn smooth_price() -> impl Strategy<Value = PriceModel> {
    prop_oneof![
        (0.1..5.0f64).prop_map(|a| PriceModel::linear(a).unwrap()),
        (0.1..5.0f64, 1.0..5.0f64).prop_map(|(a, b)| PriceModel::monomial(a, b).unwrap()),
        (0.05..1.0f64, 1.0..6.0f64).prop_map(|(a, s)| PriceModel::mm1_queue(a, s).unwrap()),
    ]
}

pub fn any_price() -> impl Strategy<Value = PriceModel> {
    prop_oneof![
        zero_start_price(),
        (0.05..1.0f64, 1.0..6.0f64).prop_map(|(a, s)| PriceModel::mm1_queue(a, s).unwrap()),
    ]
}

pub fn utility() -> impl Strategy<Value = UtilityModel> {
    prop_oneof![
        (0.2..3.0f64).prop_map(|a| UtilityModel::linear(a).unwrap()),
        (0.2..3.0f64, 0.2..3.0f64).prop_map(|(a, k)| UtilityModel::log_one_plus(a, k).unwrap()),
        (
            0.2..3.0f64,
            0.3..3.0f64,
            prop_oneof![0.3..0.9f64, 1.2..4.0f64]
        )
            .prop_map(|(a, k, g)| UtilityModel::shifted_power(a, k, g).unwrap()),
    ]
}

pub fn instance(
    price: impl Strategy<Value = PriceModel>,
    max_users: usize,
) -> impl Strategy<Value = LinkInstance> {
    (price, prop::collection::vec(utility(), 1..=max_users))
        .prop_map(|(p, us)| LinkInstance::new(p, us).unwrap())
}

/// A rate strictly inside the domain of `p`, scaled by `t` in (0, 1).
pub fn rate_in_domain(p: &PriceModel, t: f64) -> f64 {
    match p.domain_cap() {
        Some(s) => s * t * 0.95,
        None => 4.0 * t,
    }
}
