//! Parametric price curves and user utilities.
//!
//! Every derived quantity (cost integral, one-sided slopes, elasticity and the
//! shading factors `beta`) is evaluated in closed form per family. Nothing in
//! this module differentiates numerically.

use alloc::format;

use crate::math::{self, ln_1p, pow};
use crate::{Error, Result};

/// A convex, strictly increasing marginal-cost price curve `p(f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceModel {
    /// `p(f) = slope * f`.
    Linear { slope: f64 },
    /// `p(f) = coefficient * f^exponent`, `exponent >= 1`.
    Monomial { coefficient: f64, exponent: f64 },
    /// Slope `slope` up to `knee`, then slope `steep_slope >= slope`.
    TwoPiece {
        slope: f64,
        steep_slope: f64,
        knee: f64,
    },
    /// Marginal cost of an M/M/1 queue, `p(f) = scale * s / (s - f)^2` on
    /// `0 <= f < s`, derived from the cost `C(f) = scale * f / (s - f)`.
    ///
    /// Note `p(0) = scale / s > 0`; see [`PriceModel::violates_p0`].
    Mm1Queue { scale: f64, service_rate: f64 },
}

fn positive(name: &'static str, constraint: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint,
            value,
        })
    }
}

impl PriceModel {
    pub fn linear(slope: f64) -> Result<Self> {
        let p = PriceModel::Linear { slope };
        p.validate()?;
        Ok(p)
    }

    pub fn monomial(coefficient: f64, exponent: f64) -> Result<Self> {
        let p = PriceModel::Monomial {
            coefficient,
            exponent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn two_piece(slope: f64, steep_slope: f64, knee: f64) -> Result<Self> {
        let p = PriceModel::TwoPiece {
            slope,
            steep_slope,
            knee,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn mm1_queue(scale: f64, service_rate: f64) -> Result<Self> {
        let p = PriceModel::Mm1Queue {
            scale,
            service_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriceModel::Linear { slope } => positive("a", "a > 0", slope),
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => {
                positive("a", "a > 0", coefficient)?;
                if exponent.is_finite() && exponent >= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "B",
                        constraint: "B >= 1",
                        value: exponent,
                    })
                }
            }
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => {
                positive("a", "a > 0", slope)?;
                positive("k", "k > 0", knee)?;
                if steep_slope.is_finite() && steep_slope >= slope {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "b",
                        constraint: "b >= a",
                        value: steep_slope,
                    })
                }
            }
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => {
                positive("a", "a > 0", scale)?;
                positive("s", "s > 0", service_rate)
            }
        }
    }

    /// Upper end of the (open) domain, if finite.
    pub fn domain_cap(&self) -> Option<f64> {
        match *self {
            PriceModel::Mm1Queue { service_rate, .. } => Some(service_rate),
            _ => None,
        }
    }

    /// True for families whose price at zero is positive.
    pub fn violates_p0(&self) -> bool {
        matches!(self, PriceModel::Mm1Queue { .. })
    }

    /// Rate at which the curve has a kink.
    pub fn kink(&self) -> Option<f64> {
        match *self {
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } if steep_slope > slope => Some(knee),
            _ => None,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        self.kink().is_none()
    }

    /// Differentiable with nondecreasing elasticity, the setting in which the
    /// equilibrium is unique and the direct solver applies.
    pub fn has_nondecreasing_elasticity(&self) -> bool {
        self.is_differentiable()
    }

    pub fn check_rate(&self, f: f64) -> Result<()> {
        if f.is_nan() || f < 0.0 {
            return Err(Error::Domain(format!("rate {f} must be >= 0")));
        }
        if let Some(s) = self.domain_cap() {
            if f >= s {
                return Err(Error::Domain(format!(
                    "rate {f} must be below the service rate {s}"
                )));
            }
        }
        if f.is_infinite() {
            return Err(Error::Domain(format!("rate {f} must be finite")));
        }
        Ok(())
    }

    fn check_open(&self, f: f64) -> Result<()> {
        self.check_rate(f)?;
        if f == 0.0 {
            return Err(Error::Domain(
                "one-sided derivatives are taken at f > 0".into(),
            ));
        }
        Ok(())
    }

    /// `p(f)`.
    pub fn price(&self, f: f64) -> Result<f64> {
        self.check_rate(f)?;
        Ok(self.price_unchecked(f))
    }

    pub(crate) fn price_unchecked(&self, f: f64) -> f64 {
        match *self {
            PriceModel::Linear { slope } => slope * f,
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => coefficient * pow(f, exponent),
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => {
                if f <= knee {
                    slope * f
                } else {
                    slope * knee + steep_slope * (f - knee)
                }
            }
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => {
                let gap = service_rate - f;
                scale * service_rate / (gap * gap)
            }
        }
    }

    /// `C(f)`, the integral of `p` over `[0, f]`.
    pub fn cost(&self, f: f64) -> Result<f64> {
        self.check_rate(f)?;
        Ok(match *self {
            PriceModel::Linear { slope } => 0.5 * slope * f * f,
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => coefficient * pow(f, exponent + 1.0) / (exponent + 1.0),
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => {
                if f <= knee {
                    0.5 * slope * f * f
                } else {
                    let e = f - knee;
                    0.5 * slope * knee * knee + slope * knee * e + 0.5 * steep_slope * e * e
                }
            }
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => scale * f / (service_rate - f),
        })
    }

    /// Left and right derivatives of `p` at `f > 0`.
    pub fn derivatives(&self, f: f64) -> Result<(f64, f64)> {
        self.check_open(f)?;
        Ok(match *self {
            PriceModel::Linear { slope } => (slope, slope),
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => {
                let d = coefficient * exponent * pow(f, exponent - 1.0);
                (d, d)
            }
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => {
                if f < knee {
                    (slope, slope)
                } else if f > knee {
                    (steep_slope, steep_slope)
                } else {
                    (slope, steep_slope)
                }
            }
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => {
                let gap = service_rate - f;
                let d = 2.0 * scale * service_rate / (gap * gap * gap);
                (d, d)
            }
        })
    }

    /// Left and right elasticities `(f / p(f)) * dp/df`.
    pub fn elasticity(&self, f: f64) -> Result<(f64, f64)> {
        self.check_rate(f)?;
        if f == 0.0 {
            return Err(Error::Degenerate("elasticity is undefined at f = 0".into()));
        }
        Ok(match *self {
            PriceModel::Linear { .. } => (1.0, 1.0),
            PriceModel::Monomial { exponent, .. } => (exponent, exponent),
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => {
                if f < knee {
                    (1.0, 1.0)
                } else if f > knee {
                    let e = steep_slope * f / (slope * knee + steep_slope * (f - knee));
                    (e, e)
                } else {
                    (1.0, steep_slope / slope)
                }
            }
            PriceModel::Mm1Queue { service_rate, .. } => {
                let e = 2.0 * f / (service_rate - f);
                (e, e)
            }
        })
    }

    /// Left and right shading factors `beta = eps / (1 + eps)`.
    pub fn beta(&self, f: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.elasticity(f)?;
        Ok((lo / (1.0 + lo), hi / (1.0 + hi)))
    }

    /// The curve `f -> p(rate * f)`: the same cost structure measured in
    /// units of `rate`, under which a total rate of `rate` becomes 1.
    pub fn rescaled(&self, rate: f64) -> Result<Self> {
        positive("rate", "rate > 0", rate)?;
        let p = match *self {
            PriceModel::Linear { slope } => PriceModel::Linear {
                slope: slope * rate,
            },
            PriceModel::Monomial {
                coefficient,
                exponent,
            } => PriceModel::Monomial {
                coefficient: coefficient * pow(rate, exponent),
                exponent,
            },
            PriceModel::TwoPiece {
                slope,
                steep_slope,
                knee,
            } => PriceModel::TwoPiece {
                slope: slope * rate,
                steep_slope: steep_slope * rate,
                knee: knee / rate,
            },
            PriceModel::Mm1Queue {
                scale,
                service_rate,
            } => PriceModel::Mm1Queue {
                scale: scale / rate,
                service_rate: service_rate / rate,
            },
        };
        p.validate()?;
        Ok(p)
    }

    /// The rate at which `p` reaches `level`, by bisection; 0 when
    /// `level <= p(0)`.
    pub fn rate_at_price(&self, level: f64) -> Result<f64> {
        if level.is_nan() || level < 0.0 {
            return Err(Error::Domain(format!("price level {level} must be >= 0")));
        }
        if level <= self.price_unchecked(0.0) {
            return Ok(0.0);
        }
        let (lo, hi) = math::bracket(self.domain_cap(), "price inversion", |f| {
            Ok(self.price_unchecked(f) < level)
        })?;
        let (lo, hi) = math::bisect(lo, hi, 0.0, "price inversion", |f| {
            Ok(self.price_unchecked(f) < level)
        })?;
        let (plo, phi) = (self.price_unchecked(lo), self.price_unchecked(hi));
        Ok(if (level - plo).abs() < (phi - level).abs() {
            lo
        } else {
            hi
        })
    }
}

/// Rate demanded by a price-taking user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demand {
    Finite(f64),
    /// Marginal utility exceeds the price at every rate.
    Unbounded,
}

impl Demand {
    pub fn finite(self) -> Option<f64> {
        match self {
            Demand::Finite(d) => Some(d),
            Demand::Unbounded => None,
        }
    }
}

/// A concave, strictly increasing, continuously differentiable utility with
/// `U(0) = 0` and a finite positive slope at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityModel {
    /// `U(d) = alpha * d`.
    Linear { alpha: f64 },
    /// `U(d) = alpha * kappa * ln(1 + d / kappa)`.
    LogOnePlus { alpha: f64, kappa: f64 },
    /// `U(d) = alpha * ((d + kappa)^(1 - gamma) - kappa^(1 - gamma)) / (1 - gamma)`.
    ShiftedPower { alpha: f64, kappa: f64, gamma: f64 },
}

impl UtilityModel {
    pub fn linear(alpha: f64) -> Result<Self> {
        let u = UtilityModel::Linear { alpha };
        u.validate()?;
        Ok(u)
    }

    pub fn log_one_plus(alpha: f64, kappa: f64) -> Result<Self> {
        let u = UtilityModel::LogOnePlus { alpha, kappa };
        u.validate()?;
        Ok(u)
    }

    pub fn shifted_power(alpha: f64, kappa: f64, gamma: f64) -> Result<Self> {
        let u = UtilityModel::ShiftedPower {
            alpha,
            kappa,
            gamma,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityModel::Linear { alpha } => positive("alpha", "alpha > 0", alpha),
            UtilityModel::LogOnePlus { alpha, kappa } => {
                positive("alpha", "alpha > 0", alpha)?;
                positive("kappa", "kappa > 0", kappa)
            }
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => {
                positive("alpha", "alpha > 0", alpha)?;
                positive("kappa", "kappa > 0", kappa)?;
                positive("gamma", "gamma > 0", gamma)?;
                if gamma == 1.0 {
                    return Err(Error::InvalidParameter {
                        name: "gamma",
                        constraint: "gamma != 1",
                        value: gamma,
                    });
                }
                Ok(())
            }
        }
    }

    fn check(d: f64) -> Result<()> {
        if d.is_nan() || d < 0.0 {
            Err(Error::Domain(format!("rate {d} must be >= 0")))
        } else {
            Ok(())
        }
    }

    /// `U(d)`.
    pub fn value(&self, d: f64) -> Result<f64> {
        Self::check(d)?;
        Ok(self.value_unchecked(d))
    }

    pub(crate) fn value_unchecked(&self, d: f64) -> f64 {
        match *self {
            UtilityModel::Linear { alpha } => alpha * d,
            UtilityModel::LogOnePlus { alpha, kappa } => alpha * kappa * ln_1p(d / kappa),
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => {
                let e = 1.0 - gamma;
                alpha * (pow(d + kappa, e) - pow(kappa, e)) / e
            }
        }
    }

    /// `U'(d)` (the right derivative at 0).
    pub fn marginal(&self, d: f64) -> Result<f64> {
        Self::check(d)?;
        Ok(self.marginal_unchecked(d))
    }

    pub(crate) fn marginal_unchecked(&self, d: f64) -> f64 {
        match *self {
            UtilityModel::Linear { alpha } => alpha,
            UtilityModel::LogOnePlus { alpha, kappa } => alpha / (1.0 + d / kappa),
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => alpha * pow(d + kappa, -gamma),
        }
    }

    /// `U''(d)`.
    pub(crate) fn curvature_unchecked(&self, d: f64) -> f64 {
        match *self {
            UtilityModel::Linear { .. } => 0.0,
            UtilityModel::LogOnePlus { alpha, kappa } => {
                let t = 1.0 + d / kappa;
                -alpha / (kappa * t * t)
            }
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => -gamma * alpha * pow(d + kappa, -gamma - 1.0),
        }
    }

    pub fn marginal_at_zero(&self) -> f64 {
        self.marginal_unchecked(0.0)
    }

    /// Slope of a linear utility.
    pub fn linear_slope(&self) -> Option<f64> {
        match *self {
            UtilityModel::Linear { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// `sup { d >= 0 : U'(d) >= price }`, with 0 whenever `U'(0) <= price`.
    pub fn demand(&self, price: f64) -> Result<Demand> {
        if price.is_nan() || price <= 0.0 {
            return Err(Error::Domain(format!("price {price} must be > 0")));
        }
        if self.marginal_at_zero() <= price {
            return Ok(Demand::Finite(0.0));
        }
        Ok(match *self {
            UtilityModel::Linear { .. } => Demand::Unbounded,
            UtilityModel::LogOnePlus { alpha, kappa } => {
                Demand::Finite(kappa * (alpha / price - 1.0))
            }
            UtilityModel::ShiftedPower {
                alpha,
                kappa,
                gamma,
            } => Demand::Finite((pow(alpha / price, 1.0 / gamma) - kappa).max(0.0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn price_examples() {
        assert_eq!(
            PriceModel::monomial(2.0, 2.0).unwrap().price(1.0).unwrap(),
            2.0
        );
        let tp = PriceModel::two_piece(0.3, 4.0, 1.0).unwrap();
        assert_eq!(tp.price(1.0).unwrap(), 0.3);
        let q = PriceModel::mm1_queue(1.0, 2.0).unwrap();
        assert_eq!(q.price(1.0).unwrap(), 2.0);
    }

    #[test]
    fn price_domain_errors() {
        let q = PriceModel::mm1_queue(1.0, 2.0).unwrap();
        assert!(matches!(q.price(2.0), Err(Error::Domain(_))));
        assert!(matches!(q.price(3.0), Err(Error::Domain(_))));
        let l = PriceModel::linear(1.0).unwrap();
        assert!(matches!(l.price(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(l.cost(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters_name_the_constraint() {
        match PriceModel::linear(-1.0) {
            Err(Error::InvalidParameter { constraint, .. }) => assert_eq!(constraint, "a > 0"),
            other => panic!("{other:?}"),
        }
        assert!(PriceModel::monomial(1.0, 0.5).is_err());
        assert!(PriceModel::two_piece(2.0, 1.0, 1.0).is_err());
        assert!(UtilityModel::shifted_power(1.0, 1.0, 1.0).is_err());
        assert!(UtilityModel::log_one_plus(1.0, 0.0).is_err());
    }

    #[test]
    fn cost_examples() {
        assert_eq!(PriceModel::linear(1.0).unwrap().cost(1.0).unwrap(), 0.5);
        assert_eq!(
            PriceModel::monomial(1.0, 1.0).unwrap().cost(2.0).unwrap(),
            2.0
        );
        let m = PriceModel::monomial(3.0, 2.5).unwrap();
        assert!(close(
            m.cost(1.7).unwrap(),
            3.0 * pow(1.7, 3.5) / 3.5,
            1e-15
        ));
        assert_eq!(
            PriceModel::mm1_queue(1.0, 2.0).unwrap().cost(1.0).unwrap(),
            1.0
        );
        for p in [
            PriceModel::linear(2.0).unwrap(),
            PriceModel::two_piece(0.5, 3.0, 1.0).unwrap(),
            PriceModel::mm1_queue(1.0, 2.0).unwrap(),
        ] {
            assert_eq!(p.cost(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_examples() {
        let tp = PriceModel::two_piece(0.5, 3.0, 1.0).unwrap();
        assert_eq!(tp.derivatives(1.0).unwrap(), (0.5, 3.0));
        assert_eq!(tp.derivatives(0.5).unwrap(), (0.5, 0.5));
        assert_eq!(tp.derivatives(1.5).unwrap(), (3.0, 3.0));
        assert_eq!(
            PriceModel::linear(2.0).unwrap().derivatives(5.0).unwrap(),
            (2.0, 2.0)
        );
        assert_eq!(
            PriceModel::monomial(1.0, 2.0)
                .unwrap()
                .derivatives(1.0)
                .unwrap(),
            (2.0, 2.0)
        );
        assert!(tp.derivatives(0.0).is_err());
    }

    #[test]
    fn elasticity_examples() {
        let m = PriceModel::monomial(0.7, 3.0).unwrap();
        for f in [0.1, 1.0, 7.0] {
            assert_eq!(m.elasticity(f).unwrap(), (3.0, 3.0));
            let (lo, hi) = m.beta(f).unwrap();
            assert_eq!(lo, 0.75);
            assert_eq!(hi, 0.75);
        }
        let (a, b) = (0.4, 6.0);
        let tp = PriceModel::two_piece(a, b, 1.0).unwrap();
        assert_eq!(tp.elasticity(1.0).unwrap(), (1.0, b / a));
        let (lo, hi) = tp.beta(1.0).unwrap();
        assert_eq!(lo, 0.5);
        assert!(close(hi, b / (a + b), 1e-15));
        let q = PriceModel::mm1_queue(3.0, 2.0).unwrap();
        assert_eq!(q.elasticity(1.0).unwrap(), (2.0, 2.0));
        assert_eq!(
            PriceModel::linear(5.0).unwrap().beta(3.0).unwrap(),
            (0.5, 0.5)
        );
        assert!(matches!(m.elasticity(0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn elasticity_matches_derivative_definition() {
        let models = [
            PriceModel::monomial(1.3, 2.2).unwrap(),
            PriceModel::two_piece(0.5, 3.0, 0.8).unwrap(),
            PriceModel::mm1_queue(0.5, 3.0).unwrap(),
        ];
        for p in models {
            for f in [0.3, 0.8, 1.9] {
                let (dl, dr) = p.derivatives(f).unwrap();
                let (el, er) = p.elasticity(f).unwrap();
                let scale = f / p.price(f).unwrap();
                assert!(close(el, scale * dl, 1e-13), "{p:?} {f}");
                assert!(close(er, scale * dr, 1e-13), "{p:?} {f}");
            }
        }
    }

    #[test]
    fn rescaling_moves_the_knee() {
        let tp = PriceModel::two_piece(0.5, 3.0, 2.0).unwrap();
        let r = tp.rescaled(2.0).unwrap();
        assert_eq!(r.kink(), Some(1.0));
        for x in [0.2, 1.0, 1.7] {
            assert!(close(
                r.price(x).unwrap(),
                tp.price(2.0 * x).unwrap(),
                1e-15
            ));
            assert!(close(
                r.cost(x).unwrap(),
                tp.cost(2.0 * x).unwrap() / 2.0,
                1e-15
            ));
        }
        let q = PriceModel::mm1_queue(1.5, 3.0).unwrap();
        let rq = q.rescaled(0.5).unwrap();
        for x in [0.1, 2.0, 5.0] {
            assert!(close(
                rq.price(x).unwrap(),
                q.price(0.5 * x).unwrap(),
                1e-14
            ));
        }
        let m = PriceModel::monomial(2.0, 3.0).unwrap();
        let rm = m.rescaled(1.5).unwrap();
        assert!(close(rm.price(0.9).unwrap(), m.price(1.35).unwrap(), 1e-14));
    }

    #[test]
    fn rate_at_price_inverts() {
        let tp = PriceModel::two_piece(0.5, 3.0, 1.0).unwrap();
        let f = tp.rate_at_price(1.0).unwrap();
        assert!(close(f, 1.0 + 0.5 / 3.0, 1e-15));
        let q = PriceModel::mm1_queue(1.0, 2.0).unwrap();
        assert_eq!(q.rate_at_price(0.25).unwrap(), 0.0);
        assert!(close(q.rate_at_price(2.0).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn utility_examples() {
        let l = UtilityModel::linear(0.7).unwrap();
        assert!(close(l.value(2.0).unwrap(), 1.4, 1e-15));
        assert_eq!(l.marginal(2.0).unwrap(), 0.7);
        let g = UtilityModel::log_one_plus(1.0, 1.0).unwrap();
        assert_eq!(g.value(0.0).unwrap(), 0.0);
        assert_eq!(g.marginal(0.0).unwrap(), 1.0);
        let s = UtilityModel::shifted_power(1.0, 1.0, 2.0).unwrap();
        assert!(close(s.value(1.0).unwrap(), 0.5, 1e-15));
        assert!(close(s.marginal(1.0).unwrap(), 0.25, 1e-15));
        assert_eq!(s.marginal_at_zero(), 1.0);
        assert!(matches!(s.value(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn demand_examples() {
        let g = UtilityModel::log_one_plus(1.0, 1.0).unwrap();
        assert_eq!(g.demand(0.5).unwrap(), Demand::Finite(1.0));
        let l = UtilityModel::linear(1.0).unwrap();
        assert_eq!(l.demand(2.0).unwrap(), Demand::Finite(0.0));
        assert_eq!(l.demand(1.0).unwrap(), Demand::Finite(0.0));
        assert_eq!(l.demand(0.5).unwrap(), Demand::Unbounded);
        let s = UtilityModel::shifted_power(2.0, 0.5, 0.5).unwrap();
        let d = s.demand(1.0).unwrap().finite().unwrap();
        assert!(close(s.marginal(d).unwrap(), 1.0, 1e-14));
    }
}
