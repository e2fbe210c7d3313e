//! Chain specifications with monomial jump rates, and their numeric
//! instantiation at a fixed `eps`.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monomial::{parse_exponent, Exponent, MaybeZero, Monomial};
use crate::trace::RateTable;

/// One bond of the on-disk chain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondDoc {
    pub from: String,
    pub to: String,
    pub coeff: f64,
    pub exponent: String,
}

/// The on-disk chain document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDoc {
    pub states: Vec<String>,
    pub bonds: Vec<BondDoc>,
}

/// A validated, irreducible chain with monomial rates on its bond set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    bonds: BTreeMap<(usize, usize), Monomial>,
}

impl ChainSpec {
    /// Builds a spec from labels and indexed bonds, validating every invariant.
    pub fn new(labels: Vec<String>, bonds: Vec<((usize, usize), Monomial)>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::NoStates);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateState(label.clone()));
            }
        }
        let mut table = BTreeMap::new();
        for ((from, to), rate) in bonds {
            let (Some(a), Some(b)) = (labels.get(from), labels.get(to)) else {
                return Err(Error::UnknownState(format!("#{}", from.max(to))));
            };
            if from == to {
                return Err(Error::SelfLoop(a.clone()));
            }
            if table.insert((from, to), rate).is_some() {
                return Err(Error::DuplicateBond(a.clone(), b.clone()));
            }
        }
        let spec = ChainSpec {
            labels,
            index,
            bonds: table,
        };
        spec.check_irreducible()?;
        Ok(spec)
    }

    pub fn from_doc(doc: &ChainDoc) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, label) in doc.states.iter().enumerate() {
            if index.insert(label.as_str(), i).is_some() {
                return Err(Error::DuplicateState(label.clone()));
            }
        }
        let mut bonds = Vec::with_capacity(doc.bonds.len());
        for bond in &doc.bonds {
            let lookup = |label: &String| {
                index
                    .get(label.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownState(label.clone()))
            };
            let from = lookup(&bond.from)?;
            let to = lookup(&bond.to)?;
            let wrap = |source: Error| Error::Bond {
                from: bond.from.clone(),
                to: bond.to.clone(),
                source: Box::new(source),
            };
            let exponent = parse_exponent(&bond.exponent).map_err(wrap)?;
            let rate = Monomial::new(bond.coeff, exponent).map_err(wrap)?;
            bonds.push(((from, to), rate));
        }
        ChainSpec::new(doc.states.clone(), bonds)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChainDoc = serde_json::from_str(text)?;
        ChainSpec::from_doc(&doc)
    }

    pub fn to_doc(&self) -> ChainDoc {
        ChainDoc {
            states: self.labels.clone(),
            bonds: self
                .bonds
                .iter()
                .map(|(&(from, to), rate)| BondDoc {
                    from: self.labels[from].clone(),
                    to: self.labels[to].clone(),
                    coeff: rate.coeff(),
                    exponent: rate.exponent().to_string(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("chain document serializes")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn bonds(&self) -> &BTreeMap<(usize, usize), Monomial> {
        &self.bonds
    }

    pub fn rate(&self, from: usize, to: usize) -> MaybeZero {
        self.bonds
            .get(&(from, to))
            .map_or(MaybeZero::Zero, |&m| MaybeZero::Mono(m))
    }

    /// Full-space rate table in leading-order arithmetic.
    pub fn rate_table(&self) -> RateTable<MaybeZero> {
        let n = self.len();
        let mut table = RateTable::full(n);
        for (&(a, b), &m) in &self.bonds {
            table.set(a, b, MaybeZero::Mono(m));
        }
        table
    }

    pub fn evaluate_at(&self, eps: f64) -> Result<NumericChain> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Epsilon(eps));
        }
        let n = self.len();
        let mut rates = vec![0.0; n * n];
        for (&(a, b), m) in &self.bonds {
            rates[a * n + b] = m.eval(eps);
        }
        let mut chain = NumericChain::from_matrix(n, rates)?;
        chain.epsilon = Some(eps);
        Ok(chain)
    }

    fn check_irreducible(&self) -> Result<()> {
        let n = self.len();
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        for &(a, b) in self.bonds.keys() {
            forward[a].push(b);
            backward[b].push(a);
        }
        if !reachable(0, &forward).iter().all(|&s| s) {
            return Err(Error::NotIrreducible(self.labels[0].clone()));
        }
        if let Some(stuck) = reachable(0, &backward).iter().position(|&s| !s) {
            return Err(Error::NotIrreducible(self.labels[stuck].clone()));
        }
        Ok(())
    }
}

fn reachable(start: usize, adjacency: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// A chain with concrete nonnegative rates.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericChain {
    pub epsilon: Option<f64>,
    n: usize,
    rates: Vec<f64>,
    holding: Vec<f64>,
}

impl NumericChain {
    /// Row-major `n x n` rate matrix; the diagonal is ignored and zeroed.
    pub fn from_matrix(n: usize, mut rates: Vec<f64>) -> Result<Self> {
        if n == 0 || rates.len() != n * n {
            return Err(Error::Precondition(format!("rate matrix must be {n}x{n} and nonempty")));
        }
        for i in 0..n {
            rates[i * n + i] = 0.0;
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Precondition("rates must be finite and nonnegative".into()));
        }
        let holding = (0..n).map(|i| rates[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(NumericChain {
            epsilon: None,
            n,
            rates,
            holding,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rates[from * self.n..(from + 1) * self.n]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn holding(&self, state: usize) -> f64 {
        self.holding[state]
    }

    pub fn jump_prob(&self, from: usize, to: usize) -> f64 {
        let lambda = self.holding[from];
        if lambda > 0.0 {
            self.rate(from, to) / lambda
        } else {
            0.0
        }
    }

    pub fn rate_table(&self) -> RateTable<f64> {
        let mut table = RateTable::full(self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                if a != b {
                    table.set(a, b, self.rate(a, b));
                }
            }
        }
        table
    }
}

/// Labels "1".."n".
pub fn numbered_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Random strongly connected chain on `n` states: a random Hamiltonian cycle
/// plus each remaining ordered pair with probability 0.35. Integer exponents
/// in `[0, 4]`, coefficients uniform in `[0.5, 2]`.
pub fn random_chain(n: usize, seed: u64) -> ChainSpec {
    assert!(n >= 2, "random chains need at least two states");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut present = vec![false; n * n];
    for w in 0..n {
        let (a, b) = (order[w], order[(w + 1) % n]);
        present[a * n + b] = true;
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && !present[a * n + b] && rng.gen_bool(0.35) {
                present[a * n + b] = true;
            }
        }
    }
    let mut bonds = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if present[a * n + b] {
                let exponent = rng.gen_range(0..=4i64);
                let coeff = rng.gen_range(0.5..=2.0);
                let rate = Monomial::new(coeff, Exponent::from_integer(exponent)).expect("coefficient in [0.5, 2]");
                bonds.push(((a, b), rate));
            }
        }
    }
    ChainSpec::new(numbered_labels(n), bonds).expect("hamiltonian cycle makes it irreducible")
}

/// Canonical fixtures built in code, mirroring the shipped JSON files.
pub mod fixtures {
    use super::*;

    fn build(n: usize, bonds: &[(usize, usize, f64, i64)]) -> ChainSpec {
        let bonds = bonds
            .iter()
            .map(|&(a, b, c, k)| ((a - 1, b - 1), Monomial::int(c, k)))
            .collect();
        ChainSpec::new(numbered_labels(n), bonds).expect("fixture is valid")
    }

    /// Symmetric two-state chain, both rates `eps`.
    pub fn chain_b() -> ChainSpec {
        build(2, &[(1, 2, 1.0, 1), (2, 1, 1.0, 1)])
    }

    /// Three-state birth-death chain with valleys {1} and {3}.
    pub fn chain_c() -> ChainSpec {
        build(3, &[(1, 2, 1.0, 2), (2, 1, 1.0, 0), (2, 3, 1.0, 0), (3, 2, 1.0, 1)])
    }

    /// Five-state birth-death chain with a two-level hierarchy.
    pub fn chain_e() -> ChainSpec {
        build(
            5,
            &[
                (1, 2, 1.0, 1),
                (2, 1, 1.0, 0),
                (2, 3, 1.0, 0),
                (3, 2, 1.0, 1),
                (3, 4, 1.0, 3),
                (4, 3, 1.0, 0),
                (4, 5, 1.0, 0),
                (5, 4, 1.0, 2),
            ],
        )
    }
}
