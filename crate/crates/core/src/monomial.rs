//! Leading-order arithmetic on asymptotic monomials `c * eps^q`.
//!
//! Every quantity produced by the hierarchy is a nonnegative combination of
//! jump rates, so sums never cancel and the leading term of any expression is
//! determined by the leading terms of its operands. Exponents are kept as
//! exact rationals; only coefficients are floating point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact exponent of `eps`.
pub type Exponent = Rational64;

/// Parses a rational exponent string such as `"3"`, `"-1/2"`.
pub fn parse_exponent(text: &str) -> Result<Exponent> {
    let trimmed = text.trim();
    Exponent::from_str(trimmed).map_err(|_| Error::Exponent(text.to_string()))
}

/// Relative order of two quantities as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    /// `a / b -> 0`
    SmallerOrder,
    /// `a / b -> c` with `0 < c < inf`
    SameOrder,
    /// `a / b -> inf`
    LargerOrder,
}

/// Limit of a nonnegative sequence as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Finite(f64),
    Infinite,
}

impl Limit {
    pub fn finite(self) -> Option<f64> {
        match self {
            Limit::Finite(v) => Some(v),
            Limit::Infinite => None,
        }
    }
}

/// A strictly positive monomial `coeff * eps^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    coeff: f64,
    exponent: Exponent,
}

impl Monomial {
    /// Builds a monomial, rejecting non-positive or non-finite coefficients.
    pub fn new(coeff: f64, exponent: Exponent) -> Result<Self> {
        if !(coeff > 0.0) || !coeff.is_finite() {
            return Err(Error::Coefficient(coeff));
        }
        Ok(Monomial { coeff, exponent })
    }

    /// Convenience constructor for integer exponents. Panics on a non-positive
    /// coefficient; meant for literals.
    pub fn int(coeff: f64, exponent: i64) -> Self {
        Monomial::new(coeff, Exponent::from_integer(exponent)).expect("positive coefficient")
    }

    pub fn one() -> Self {
        Monomial::int(1.0, 0)
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    /// Exponent as a float, for fits and reporting.
    pub fn exponent_f64(&self) -> f64 {
        *self.exponent.numer() as f64 / *self.exponent.denom() as f64
    }

    pub fn recip(&self) -> Monomial {
        Monomial {
            coeff: 1.0 / self.coeff,
            exponent: -self.exponent,
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            coeff: self.coeff * other.coeff,
            exponent: self.exponent + other.exponent,
        }
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial {
            coeff: self.coeff / other.coeff,
            exponent: self.exponent - other.exponent,
        }
    }

    pub fn scale(&self, factor: f64) -> Result<Monomial> {
        Monomial::new(self.coeff * factor, self.exponent)
    }

    /// Leading term of the sum.
    pub fn add(&self, other: &Monomial) -> Monomial {
        match self.exponent.cmp(&other.exponent) {
            Ordering::Less => *self,
            Ordering::Greater => *other,
            Ordering::Equal => Monomial {
                coeff: self.coeff + other.coeff,
                exponent: self.exponent,
            },
        }
    }

    /// Value at a concrete `eps`.
    pub fn eval(&self, eps: f64) -> f64 {
        if *self.exponent.denom() == 1 {
            let k = *self.exponent.numer();
            if let Ok(k) = i32::try_from(k) {
                return self.coeff * eps.powi(k);
            }
        }
        self.coeff * eps.powf(self.exponent_f64())
    }

    pub fn limit(&self) -> Limit {
        if self.exponent.is_positive() {
            Limit::Finite(0.0)
        } else if self.exponent.is_zero() {
            Limit::Finite(self.coeff)
        } else {
            Limit::Infinite
        }
    }

    /// Order of `self` relative to `other`; decided by exponents alone.
    pub fn compare_order(&self, other: &Monomial) -> Order {
        match self.exponent.cmp(&other.exponent) {
            Ordering::Greater => Order::SmallerOrder,
            Ordering::Equal => Order::SameOrder,
            Ordering::Less => Order::LargerOrder,
        }
    }

    /// Total order by magnitude at leading order: exponent first (a smaller
    /// exponent is larger), then coefficient.
    pub fn cmp_magnitude(&self, other: &Monomial) -> Ordering {
        other
            .exponent
            .cmp(&self.exponent)
            .then_with(|| self.coeff.total_cmp(&other.coeff))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*eps^({})", self.coeff, self.exponent)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonomialRepr {
    coeff: f64,
    exponent: String,
}

impl Serialize for Monomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MonomialRepr {
            coeff: self.coeff,
            exponent: self.exponent.to_string(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Monomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MonomialRepr::deserialize(deserializer)?;
        let exponent = parse_exponent(&repr.exponent).map_err(serde::de::Error::custom)?;
        Monomial::new(repr.coeff, exponent).map_err(serde::de::Error::custom)
    }
}

/// A monomial or the structural zero (an absent rate).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MaybeZero {
    #[default]
    Zero,
    Mono(Monomial),
}

impl MaybeZero {
    pub fn is_zero(&self) -> bool {
        matches!(self, MaybeZero::Zero)
    }

    pub fn monomial(&self) -> Option<Monomial> {
        match self {
            MaybeZero::Zero => None,
            MaybeZero::Mono(m) => Some(*m),
        }
    }

    /// Division by a nonzero quantity; dividing by `Zero` is an error.
    pub fn checked_div(&self, divisor: &MaybeZero) -> Result<MaybeZero> {
        match divisor {
            MaybeZero::Zero => Err(Error::DivisionByZero),
            MaybeZero::Mono(d) => Ok(self.div_mono(d)),
        }
    }

    pub fn div_mono(&self, divisor: &Monomial) -> MaybeZero {
        match self {
            MaybeZero::Zero => MaybeZero::Zero,
            MaybeZero::Mono(m) => MaybeZero::Mono(m.div(divisor)),
        }
    }

    pub fn limit(&self) -> Limit {
        match self {
            MaybeZero::Zero => Limit::Finite(0.0),
            MaybeZero::Mono(m) => m.limit(),
        }
    }

    pub fn eval(&self, eps: f64) -> f64 {
        match self {
            MaybeZero::Zero => 0.0,
            MaybeZero::Mono(m) => m.eval(eps),
        }
    }

    /// Total magnitude order with `Zero` below every monomial.
    pub fn cmp_magnitude(&self, other: &MaybeZero) -> Ordering {
        match (self, other) {
            (MaybeZero::Zero, MaybeZero::Zero) => Ordering::Equal,
            (MaybeZero::Zero, _) => Ordering::Less,
            (_, MaybeZero::Zero) => Ordering::Greater,
            (MaybeZero::Mono(a), MaybeZero::Mono(b)) => a.cmp_magnitude(b),
        }
    }

    /// Leading-order sum of an iterator of terms.
    pub fn sum<I: IntoIterator<Item = MaybeZero>>(terms: I) -> MaybeZero {
        terms.into_iter().fold(MaybeZero::Zero, |acc, t| acc + t)
    }
}

impl From<Monomial> for MaybeZero {
    fn from(m: Monomial) -> Self {
        MaybeZero::Mono(m)
    }
}

impl Add for MaybeZero {
    type Output = MaybeZero;

    fn add(self, rhs: MaybeZero) -> MaybeZero {
        match (self, rhs) {
            (MaybeZero::Zero, x) | (x, MaybeZero::Zero) => x,
            (MaybeZero::Mono(a), MaybeZero::Mono(b)) => MaybeZero::Mono(a.add(&b)),
        }
    }
}

impl Mul for MaybeZero {
    type Output = MaybeZero;

    fn mul(self, rhs: MaybeZero) -> MaybeZero {
        match (self, rhs) {
            (MaybeZero::Mono(a), MaybeZero::Mono(b)) => MaybeZero::Mono(a.mul(&b)),
            _ => MaybeZero::Zero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Exponent {
        Exponent::new(n, d)
    }

    fn m(c: f64, e: Exponent) -> MaybeZero {
        MaybeZero::Mono(Monomial::new(c, e).unwrap())
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    }

    fn same(a: MaybeZero, b: MaybeZero) -> bool {
        match (a, b) {
            (MaybeZero::Zero, MaybeZero::Zero) => true,
            (MaybeZero::Mono(x), MaybeZero::Mono(y)) => x.exponent() == y.exponent() && close(x.coeff(), y.coeff()),
            _ => false,
        }
    }

    #[test]
    fn add_examples() {
        assert_eq!(m(2.0, q(1, 1)) + m(3.0, q(1, 1)), m(5.0, q(1, 1)));
        assert_eq!(m(2.0, q(1, 1)) + m(3.0, q(2, 1)), m(2.0, q(1, 1)));
        assert_eq!(MaybeZero::Zero + m(1.0, q(0, 1)), m(1.0, q(0, 1)));
    }

    #[test]
    fn mul_div_examples() {
        assert_eq!(m(2.0, q(1, 1)) * m(3.0, q(2, 1)), m(6.0, q(3, 1)));
        let quotient = m(6.0, q(3, 1)).checked_div(&m(3.0, q(2, 1))).unwrap();
        assert_eq!(quotient, m(2.0, q(1, 1)));
        assert_eq!(MaybeZero::Zero * m(5.0, q(-1, 1)), MaybeZero::Zero);
        assert!(matches!(
            m(1.0, q(0, 1)).checked_div(&MaybeZero::Zero),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn limit_examples() {
        assert_eq!(m(0.5, q(0, 1)).limit(), Limit::Finite(0.5));
        assert_eq!(m(7.0, q(1, 2)).limit(), Limit::Finite(0.0));
        assert_eq!(m(7.0, q(-2, 1)).limit(), Limit::Infinite);
        assert_eq!(MaybeZero::Zero.limit(), Limit::Finite(0.0));
    }

    #[test]
    fn order_examples() {
        let a = Monomial::int(100.0, 2);
        let b = Monomial::int(0.01, 1);
        assert_eq!(a.compare_order(&b), Order::SmallerOrder);
        assert_eq!(
            Monomial::int(1.0, 1).compare_order(&Monomial::int(9.0, 1)),
            Order::SameOrder
        );
        assert_eq!(
            Monomial::int(1.0, -1).compare_order(&Monomial::int(1.0, 0)),
            Order::LargerOrder
        );
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(Monomial::new(0.0, q(1, 1)).is_err());
        assert!(Monomial::new(-1.0, q(1, 1)).is_err());
        assert!(Monomial::new(f64::NAN, q(1, 1)).is_err());
    }

    #[test]
    fn serde_form() {
        let mono = Monomial::new(2.0, q(-1, 2)).unwrap();
        let text = serde_json::to_string(&mono).unwrap();
        assert_eq!(text, r#"{"coeff":2.0,"exponent":"-1/2"}"#);
        let back: Monomial = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mono);
        let three: Monomial = serde_json::from_str(r#"{"coeff":1.0,"exponent":"3"}"#).unwrap();
        assert_eq!(three.exponent(), q(3, 1));
        assert!(serde_json::from_str::<Monomial>(r#"{"coeff":1.0,"exponent":"x"}"#).is_err());
    }

    #[test]
    fn eval_fractional() {
        let mono = Monomial::new(2.0, q(-1, 2)).unwrap();
        assert!((mono.eval(0.04) - 10.0).abs() < 1e-12);
    }

    fn arb_mono() -> impl Strategy<Value = MaybeZero> {
        prop_oneof![
            1 => Just(MaybeZero::Zero),
            6 => (0.1f64..10.0, -6i64..6, 1i64..4)
                .prop_map(|(c, n, d)| m(c, q(n, d))),
        ]
    }

    proptest! {
        #[test]
        fn add_commutative_associative(a in arb_mono(), b in arb_mono(), c in arb_mono()) {
            prop_assert!(same(a + b, b + a));
            prop_assert!(same((a + b) + c, a + (b + c)));
        }

        #[test]
        fn mul_distributes(a in arb_mono(), b in arb_mono(), c in arb_mono()) {
            prop_assert!(same(a * (b + c), a * b + a * c));
        }

        #[test]
        fn coefficients_stay_positive(a in arb_mono(), b in arb_mono(), c in arb_mono()) {
            let expr = (a * b + c) * (a + b);
            if let MaybeZero::Mono(x) = expr {
                prop_assert!(x.coeff() > 0.0);
            }
            if let (MaybeZero::Mono(_), MaybeZero::Mono(d)) = (a, c) {
                if let MaybeZero::Mono(x) = (a + b).div_mono(&d) {
                    prop_assert!(x.coeff() > 0.0);
                }
            }
        }

        #[test]
        fn numeric_ratio_agrees_with_order(
            ca in 0.1f64..10.0, na in -4i64..4,
            cb in 0.1f64..10.0, nb in -4i64..4,
        ) {
            let a = Monomial::int(ca, na);
            let b = Monomial::int(cb, nb);
            let ratio = |eps: f64| a.eval(eps) / b.eval(eps);
            let (r2, r4) = (ratio(1e-2), ratio(1e-4));
            let observed = if (r4 / r2 - 1.0).abs() < 1e-9 {
                Order::SameOrder
            } else if r4 < r2 {
                Order::SmallerOrder
            } else {
                Order::LargerOrder
            };
            prop_assert!(ratio(1e-3).is_finite());
            prop_assert_eq!(observed, a.compare_order(&b));
        }
    }
}
