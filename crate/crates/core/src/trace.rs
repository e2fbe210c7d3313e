//! Trace processes by successive state elimination.
//!
//! Removing a state `z` from the observed set replaces every rate `R(a, b)`
//! by `[R(a, b) * out(z) + R(a, z) * R(z, b)] / out(z)` where `out(z)` is the
//! total out-rate of `z`. The same code runs over plain floats and over
//! leading-order monomials.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::monomial::MaybeZero;

/// Semiring-like value type the elimination formula is evaluated in.
pub trait RateValue: Clone + Debug {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn plus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    /// `None` when the divisor is zero.
    fn over(&self, divisor: &Self) -> Option<Self>;
}

impl RateValue for f64 {
    fn zero() -> Self {
        0.0
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn plus(&self, other: &Self) -> Self {
        self + other
    }

    fn times(&self, other: &Self) -> Self {
        self * other
    }

    fn over(&self, divisor: &Self) -> Option<Self> {
        (*divisor != 0.0).then(|| self / divisor)
    }
}

impl RateValue for MaybeZero {
    fn zero() -> Self {
        MaybeZero::Zero
    }

    fn is_zero(&self) -> bool {
        MaybeZero::is_zero(self)
    }

    fn plus(&self, other: &Self) -> Self {
        *self + *other
    }

    fn times(&self, other: &Self) -> Self {
        *self * *other
    }

    fn over(&self, divisor: &Self) -> Option<Self> {
        self.checked_div(divisor).ok()
    }
}

/// Jump rates of a chain observed on a subset of the full index space.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable<V> {
    n: usize,
    active: Vec<bool>,
    rates: Vec<V>,
}

impl<V: RateValue> RateTable<V> {
    /// Table over all `n` states with every rate zero.
    pub fn full(n: usize) -> Self {
        RateTable {
            n,
            active: vec![true; n],
            rates: vec![V::zero(); n * n],
        }
    }

    /// Table over `subset` of an `n`-state space with every rate zero.
    pub fn zeros_on(n: usize, subset: &[usize]) -> Self {
        let mut active = vec![false; n];
        for &s in subset {
            active[s] = true;
        }
        RateTable {
            n,
            active,
            rates: vec![V::zero(); n * n],
        }
    }

    /// Size of the underlying index space (not of the subset).
    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn contains(&self, state: usize) -> bool {
        state < self.n && self.active[state]
    }

    /// Active states in ascending order.
    pub fn subset(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.active[i]).collect()
    }

    pub fn get(&self, from: usize, to: usize) -> &V {
        &self.rates[from * self.n + to]
    }

    pub fn set(&mut self, from: usize, to: usize, value: V) {
        assert!(from != to, "rate tables carry no self-loops");
        assert!(self.contains(from) && self.contains(to));
        self.rates[from * self.n + to] = value;
    }

    /// Total rate out of `state` into the active subset.
    pub fn out_rate(&self, state: usize) -> V {
        (0..self.n)
            .filter(|&w| w != state && self.active[w])
            .fold(V::zero(), |acc, w| acc.plus(self.get(state, w)))
    }

    /// Removes `zeta` from the observed subset.
    pub fn eliminate_state(&self, zeta: usize) -> Result<Self> {
        if !self.contains(zeta) {
            return Err(Error::NotInSubset(zeta));
        }
        let out = self.out_rate(zeta);
        if out.is_zero() {
            return Err(Error::ZeroOutRate(zeta));
        }
        let n = self.n;
        let mut next = RateTable {
            n,
            active: self.active.clone(),
            rates: vec![V::zero(); n * n],
        };
        next.active[zeta] = false;
        let kept: Vec<usize> = next.subset();
        for &a in &kept {
            let into_zeta = self.get(a, zeta);
            for &b in &kept {
                if a == b {
                    continue;
                }
                let numerator = self.get(a, b).times(&out).plus(&into_zeta.times(self.get(zeta, b)));
                next.rates[a * n + b] = numerator.over(&out).expect("out-rate checked nonzero");
            }
        }
        Ok(next)
    }

    /// Trace on `target`, eliminating the complement in ascending index order.
    pub fn trace_on(&self, target: &[usize]) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut keep = vec![false; self.n];
        for &s in target {
            if !self.contains(s) {
                return Err(Error::NotInSubset(s));
            }
            keep[s] = true;
        }
        let order: Vec<usize> = self.subset().into_iter().filter(|&s| !keep[s]).collect();
        self.eliminate_in_order(&order)
    }

    /// Eliminates the given states in the given order.
    pub fn eliminate_in_order(&self, order: &[usize]) -> Result<Self> {
        let mut table = self.clone();
        for &zeta in order {
            table = table.eliminate_state(zeta)?;
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{fixtures, random_chain};
    use crate::monomial::Monomial;

    fn mono(c: f64, k: i64) -> MaybeZero {
        MaybeZero::Mono(Monomial::int(c, k))
    }

    #[test]
    fn numeric_elimination_example() {
        // states 1,2,3 -> indices 0,1,2
        let mut t = RateTable::<f64>::full(3);
        t.set(0, 1, 1.0);
        t.set(0, 2, 2.0);
        t.set(2, 1, 1.0);
        t.set(2, 0, 1.0);
        let r = t.eliminate_state(2).unwrap();
        assert!((r.get(0, 1) - 2.0).abs() < 1e-15);
        assert_eq!(r.subset(), vec![0, 1]);
    }

    #[test]
    fn chain_c_eliminate_middle() {
        let t = fixtures::chain_c().rate_table().eliminate_state(1).unwrap();
        assert_eq!(*t.get(0, 2), mono(0.5, 2));
        assert_eq!(*t.get(2, 0), mono(0.5, 1));
    }

    #[test]
    fn eliminating_a_leaf_keeps_other_bonds() {
        // 1 <-> 2 <-> 3 plus leaf 4 hanging off 1
        let mut t = RateTable::<f64>::full(4);
        for (a, b, r) in [
            (0, 1, 1.0),
            (1, 0, 2.0),
            (1, 2, 3.0),
            (2, 1, 4.0),
            (0, 3, 5.0),
            (3, 0, 6.0),
        ] {
            t.set(a, b, r);
        }
        let r = t.eliminate_state(3).unwrap();
        for (a, b) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((r.get(a, b) - t.get(a, b)).abs() < 1e-14);
        }
        assert_eq!(*r.get(0, 2), 0.0);
    }

    #[test]
    fn chain_e_trace_on_valleys() {
        let t = fixtures::chain_e().rate_table().trace_on(&[0, 2, 4]).unwrap();
        assert_eq!(*t.get(0, 2), mono(0.5, 1));
        assert_eq!(*t.get(2, 0), mono(0.5, 1));
        assert_eq!(*t.get(2, 4), mono(0.5, 3));
        assert_eq!(*t.get(4, 2), mono(0.5, 2));
        assert!(t.get(0, 4).is_zero() && t.get(4, 0).is_zero());
    }

    #[test]
    fn numeric_chain_c_trace() {
        let chain = fixtures::chain_c().evaluate_at(0.1).unwrap();
        let t = chain.rate_table().trace_on(&[0, 2]).unwrap();
        assert!((t.get(0, 2) - 0.005).abs() < 1e-15);
        assert!((t.get(2, 0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn trace_on_full_set_is_identity() {
        let table = fixtures::chain_e().rate_table();
        assert_eq!(table.trace_on(&[0, 1, 2, 3, 4]).unwrap(), table);
    }

    #[test]
    fn errors() {
        let table = fixtures::chain_c().rate_table();
        assert!(matches!(table.trace_on(&[]), Err(Error::EmptySubset)));
        let smaller = table.eliminate_state(1).unwrap();
        assert!(matches!(smaller.eliminate_state(1), Err(Error::NotInSubset(1))));
        let mut t = RateTable::<f64>::full(2);
        t.set(0, 1, 1.0);
        assert!(matches!(t.eliminate_state(1), Err(Error::ZeroOutRate(1))));
    }

    #[test]
    fn nested_traces_compose() {
        for seed in 0..10 {
            let spec = random_chain(6, seed);
            let chain = spec.evaluate_at(0.2).unwrap().rate_table();
            let direct = chain.trace_on(&[1, 4]).unwrap();
            let nested = chain.trace_on(&[0, 1, 3, 4]).unwrap().trace_on(&[1, 4]).unwrap();
            for (a, b) in [(1, 4), (4, 1)] {
                let (x, y) = (*direct.get(a, b), *nested.get(a, b));
                assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()));
            }
            let mono = spec.rate_table();
            let direct = mono.trace_on(&[1, 4]).unwrap();
            let nested = mono.trace_on(&[0, 1, 3, 4]).unwrap().trace_on(&[1, 4]).unwrap();
            for (a, b) in [(1, 4), (4, 1)] {
                let (x, y) = (
                    direct.get(a, b).monomial().unwrap(),
                    nested.get(a, b).monomial().unwrap(),
                );
                assert_eq!(x.exponent(), y.exponent());
                assert!((x.coeff() - y.coeff()).abs() <= 1e-12 * x.coeff());
            }
        }
    }
}
