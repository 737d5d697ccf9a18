mod common;

use common::{instance, zero_start_price};
use elastic_market_core::market::{
    clear, clear_total, price_taking_equilibrium, solve_system, surplus,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn clearing_is_a_fixed_point(p in zero_start_price(), bids in prop::collection::vec(0.0..10.0f64, 1..8)) {
        let out = clear(&p, &bids).unwrap();
        let total: f64 = bids.iter().sum();
        prop_assert!(out.residual <= 1e-12 * total.max(1.0));
        let rates: f64 = out.rates.iter().sum();
        prop_assert!((rates - out.total_rate).abs() <= 1e-12 * out.total_rate.max(1.0));
        for (w, d) in bids.iter().zip(&out.rates) {
            prop_assert_eq!(*w == 0.0, *d == 0.0);
        }
    }

    #[test]
    fn rate_is_increasing_and_concave_in_total_bid(p in zero_start_price(), w in 0.01..10.0f64, h in 0.001..1.0f64) {
        let f0 = clear_total(&p, w).unwrap();
        let f1 = clear_total(&p, w + h).unwrap();
        let f2 = clear_total(&p, w + 2.0 * h).unwrap();
        prop_assert!(f0 < f1 && f1 < f2);
        prop_assert!(f2 - 2.0 * f1 + f0 <= 1e-9);
    }

    #[test]
    fn own_bid_raises_total_rate(p in zero_start_price(), others in prop::collection::vec(0.0..5.0f64, 1..5), a in 0.0..5.0f64, b in 0.0..5.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut w = others.clone();
        w.push(lo);
        let f_lo = clear(&p, &w).unwrap().total_rate;
        *w.last_mut().unwrap() = hi;
        let f_hi = clear(&p, &w).unwrap().total_rate;
        prop_assert!(f_hi > f_lo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn price_taking_attains_the_optimum(inst in instance(zero_start_price(), 6)) {
        let pt = price_taking_equilibrium(&inst, 0.0).unwrap();
        let realized = surplus(&inst, &pt.outcome.rates).unwrap();
        prop_assert!((realized - pt.system.surplus).abs() <= 1e-8);
        for (a, b) in pt.outcome.rates.iter().zip(&pt.system.rates) {
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
    }

    #[test]
    fn optimum_beats_perturbations(inst in instance(zero_start_price(), 5), seed in any::<u64>()) {
        let s = solve_system(&inst, 0.0).unwrap();
        prop_assert!(s.kkt_residual < 1e-9);
        let mut state = seed | 1;
        for _ in 0..50 {
            let d: Vec<f64> = s.rates.iter().map(|&v| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                (v + 0.2 * u).max(0.0)
            }).collect();
            prop_assert!(surplus(&inst, &d).unwrap() <= s.surplus + 1e-10);
        }
    }
}
