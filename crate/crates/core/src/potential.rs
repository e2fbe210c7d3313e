//! Stationary measures, capacities and conductances.
//!
//! The leading-order side works on [`ChainSpec`] with monomial arithmetic:
//! measure ratios come from two-state traces, capacities from the trace on
//! `A ∪ B`. The numeric side works on a [`NumericChain`] and solves the
//! global-balance and hitting-probability systems directly; it serves as the
//! independent oracle for the former.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::chain::{ChainSpec, NumericChain};
use crate::error::{Error, Result};
use crate::linalg::{exact, rational_zero, solve, to_f64};
use crate::monomial::{MaybeZero, Monomial};
use crate::trace::RateTable;

/// Leading-order stationary measure, normalized to total mass `(1, q=0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    values: Vec<Monomial>,
}

impl MeasureTable {
    pub fn get(&self, state: usize) -> Monomial {
        self.values[state]
    }

    pub fn values(&self) -> &[Monomial] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading-order measure of a nonempty set.
    pub fn of_set(&self, set: &[usize]) -> Monomial {
        MaybeZero::sum(set.iter().map(|&s| MaybeZero::Mono(self.values[s])))
            .monomial()
            .expect("nonempty set has positive measure")
    }
}

/// Unnormalized ratios `mu(s) / mu(0)`, each from the trace on `{0, s}`.
pub fn stationary_ratio_terms(spec: &ChainSpec) -> Vec<Monomial> {
    let table = spec.rate_table();
    let mut ratios = Vec::with_capacity(spec.len());
    ratios.push(Monomial::one());
    for s in 1..spec.len() {
        let pair = table.trace_on(&[0, s]).expect("valid subset of an irreducible chain");
        let forward = pair.get(0, s).monomial().expect("irreducible: trace rate positive");
        let backward = pair.get(s, 0).monomial().expect("irreducible: trace rate positive");
        ratios.push(forward.div(&backward));
    }
    ratios
}

pub fn stationary_ratios(spec: &ChainSpec) -> MeasureTable {
    let ratios = stationary_ratio_terms(spec);
    let total = MaybeZero::sum(ratios.iter().map(|&m| MaybeZero::Mono(m)))
        .monomial()
        .expect("at least one state");
    MeasureTable {
        values: ratios.iter().map(|r| r.div(&total)).collect(),
    }
}

pub(crate) fn check_sets(n: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidSets("sets must be nonempty".into()));
    }
    let mut seen = vec![0u8; n];
    for (tag, set) in [(1u8, a), (2u8, b)] {
        for &s in set {
            if s >= n {
                return Err(Error::InvalidSets(format!("state index {s} out of range")));
            }
            if seen[s] != 0 {
                let what = if seen[s] == tag {
                    "repeated state"
                } else {
                    "sets overlap at state"
                };
                return Err(Error::InvalidSets(format!("{what} {s}")));
            }
            seen[s] = tag;
        }
    }
    Ok(())
}

pub(crate) fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u
}

/// `Cap(A, B) = sum_{a in A} mu(a) sum_{b in B} R^{A∪B}(a, b)` at leading order.
pub fn capacity(spec: &ChainSpec, mu: &MeasureTable, a: &[usize], b: &[usize]) -> Result<Monomial> {
    check_sets(spec.len(), a, b)?;
    let trace = spec.rate_table().trace_on(&union_sorted(a, b))?;
    Ok(capacity_from_trace(&trace, mu, a, b))
}

/// Capacity from an already computed trace on exactly `A ∪ B`.
pub(crate) fn capacity_from_trace(
    trace: &RateTable<MaybeZero>,
    mu: &MeasureTable,
    a: &[usize],
    b: &[usize],
) -> Monomial {
    let flow = MaybeZero::sum(
        a.iter()
            .flat_map(|&x| b.iter().map(move |&y| MaybeZero::Mono(mu.get(x)) * *trace.get(x, y))),
    );
    flow.monomial()
        .expect("irreducible chain has positive capacity between disjoint sets")
}

/// Symmetrized conductances on the symmetrized bond set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceTable {
    n: usize,
    entries: BTreeMap<(usize, usize), Monomial>,
}

impl ConductanceTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, a: usize, b: usize) -> MaybeZero {
        self.entries
            .get(&(a, b))
            .map_or(MaybeZero::Zero, |&m| MaybeZero::Mono(m))
    }

    pub fn entries(&self) -> &BTreeMap<(usize, usize), Monomial> {
        &self.entries
    }
}

/// `c^s(a, b) = (mu(a) R(a, b) + mu(b) R(b, a)) / 2`.
pub fn symmetric_conductances(spec: &ChainSpec, mu: &MeasureTable) -> ConductanceTable {
    let half = MaybeZero::Mono(Monomial::int(0.5, 0));
    let mut entries = BTreeMap::new();
    for &(a, b) in spec.bonds().keys() {
        let forward = MaybeZero::Mono(mu.get(a)) * spec.rate(a, b);
        let backward = MaybeZero::Mono(mu.get(b)) * spec.rate(b, a);
        let value = ((forward + backward) * half)
            .monomial()
            .expect("bond carries a positive rate");
        entries.insert((a, b), value);
        entries.insert((b, a), value);
    }
    ConductanceTable { n: spec.len(), entries }
}

/// Max over paths from `sources` to `targets` of the minimum edge weight.
/// `weight` returns `None` for missing edges.
pub fn widest_path<T: Copy>(
    n: usize,
    sources: &[usize],
    targets: &[usize],
    weight: impl Fn(usize, usize) -> Option<T>,
    cmp: impl Fn(&T, &T) -> Ordering,
) -> Option<T> {
    #[derive(Clone, Copy)]
    enum Width<T> {
        Unreached,
        Source,
        Through(T),
    }
    let better = |new: &T, old: &Width<T>| match old {
        Width::Unreached => true,
        Width::Source => false,
        Width::Through(o) => cmp(new, o) == Ordering::Greater,
    };
    let mut width = vec![Width::Unreached; n];
    let mut done = vec![false; n];
    for &s in sources {
        width[s] = Width::Source;
    }
    let is_target = {
        let mut t = vec![false; n];
        for &s in targets {
            t[s] = true;
        }
        t
    };
    loop {
        // pick the undone vertex with the widest bottleneck
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            match (width[v], pick.map(|p| width[p])) {
                (Width::Unreached, _) => {}
                (_, None) => pick = Some(v),
                (Width::Source, Some(Width::Through(_))) => pick = Some(v),
                (Width::Through(x), Some(Width::Through(y))) if cmp(&x, &y) == Ordering::Greater => pick = Some(v),
                _ => {}
            }
        }
        let v = pick?;
        done[v] = true;
        if is_target[v] {
            return match width[v] {
                Width::Through(x) => Some(x),
                // a state in both sets is rejected upstream
                _ => None,
            };
        }
        for w in 0..n {
            if w == v || done[w] {
                continue;
            }
            if let Some(edge) = weight(v, w) {
                let through = match width[v] {
                    Width::Source => edge,
                    Width::Through(x) => {
                        if cmp(&edge, &x) == Ordering::Less {
                            edge
                        } else {
                            x
                        }
                    }
                    Width::Unreached => unreachable!(),
                };
                if better(&through, &width[w]) {
                    width[w] = Width::Through(through);
                }
            }
        }
    }
}

/// Bottleneck (max-min path) conductance between `a` and `b`.
pub fn bottleneck_conductance(table: &ConductanceTable, a: &[usize], b: &[usize]) -> Result<Monomial> {
    check_sets(table.n, a, b)?;
    widest_path(
        table.n,
        a,
        b,
        |x, y| table.get(x, y).monomial(),
        |p, q| p.cmp_magnitude(q),
    )
    .ok_or_else(|| Error::InvalidSets("sets are not connected".into()))
}

// ---------------------------------------------------------------------------
// numeric oracles

/// Exact sum of the float rates out of `state`; the rounded float sum would
/// perturb fluxes many orders of magnitude below the largest rate.
fn exact_holding(chain: &NumericChain, state: usize) -> BigRational {
    chain
        .row(state)
        .iter()
        .filter(|r| **r != 0.0)
        .fold(rational_zero(), |acc, &r| acc + exact(r))
}

/// Unique stationary probability vector of an irreducible chain.
pub fn stationary_numeric(chain: &NumericChain) -> Result<Vec<f64>> {
    Ok(stationary_exact(chain)?.iter().map(to_f64).collect())
}

/// Stationary vector of the float rates, read as exact rationals.
pub fn stationary_exact(chain: &NumericChain) -> Result<Vec<BigRational>> {
    let n = chain.len();
    let zero = rational_zero();
    let mut a = vec![vec![zero.clone(); n]; n];
    for i in 0..n {
        for j in 0..n {
            // row i of Q^T: inflow into i minus outflow from i
            a[i][j] = if i == j {
                -exact_holding(chain, i)
            } else {
                exact(chain.rate(j, i))
            };
        }
    }
    let one = exact(1.0);
    a[n - 1] = vec![one.clone(); n];
    let mut b = vec![zero; n];
    b[n - 1] = one;
    solve(a, b)
}

/// Exact hitting probabilities `h(x) = P_x[H_B < H_A]` on the complement of
/// `A ∪ B`; entries on `A` are 0 and on `B` are 1.
fn hitting_probabilities(chain: &NumericChain, a: &[usize], b: &[usize]) -> Result<Vec<BigRational>> {
    let n = chain.len();
    let mut h = vec![rational_zero(); n];
    let mut in_b = vec![false; n];
    let mut fixed = vec![false; n];
    for &s in a {
        fixed[s] = true;
    }
    for &s in b {
        fixed[s] = true;
        in_b[s] = true;
        h[s] = exact(1.0);
    }
    let free: Vec<usize> = (0..n).filter(|&s| !fixed[s]).collect();
    if free.is_empty() {
        return Ok(h);
    }
    let pos: BTreeMap<usize, usize> = free.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = free.len();
    let mut mat = vec![vec![rational_zero(); m]; m];
    let mut rhs = vec![rational_zero(); m];
    for (i, &x) in free.iter().enumerate() {
        mat[i][i] = exact_holding(chain, x);
        for y in 0..n {
            let r = chain.rate(x, y);
            if r == 0.0 || y == x {
                continue;
            }
            if let Some(&j) = pos.get(&y) {
                mat[i][j] = &mat[i][j] - exact(r);
            } else if in_b[y] {
                rhs[i] = &rhs[i] + exact(r);
            }
        }
    }
    let sol = solve(mat, rhs)?;
    for (i, &x) in free.iter().enumerate() {
        h[x] = sol[i].clone();
    }
    Ok(h)
}

/// `Cap(A, B) = sum_{a in A} pi(a) lambda(a) P_a[H_B < H_A^+]` by first-step
/// analysis.
pub fn capacity_numeric(chain: &NumericChain, pi: &[f64], a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(chain.len(), a, b)?;
    let h = hitting_probabilities(chain, a, b)?;
    let mut total = 0.0;
    for &x in a {
        let mut escape = rational_zero();
        for (y, hy) in h.iter().enumerate() {
            let r = chain.rate(x, y);
            if r != 0.0 && !hy.is_zero() {
                escape += exact(r) * hy;
            }
        }
        total += pi[x] * to_f64(&escape);
    }
    Ok(total)
}

/// Capacity through the floating-point trace on `A ∪ B`.
pub fn capacity_by_trace_numeric(chain: &NumericChain, pi: &[f64], a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(chain.len(), a, b)?;
    let trace = chain.rate_table().trace_on(&union_sorted(a, b))?;
    Ok(a.iter()
        .map(|&x| pi[x] * b.iter().map(|&y| *trace.get(x, y)).sum::<f64>())
        .sum())
}

/// Trace rates on `target` from exact hitting distributions,
/// `R^F(x, y) = R(x, y) + sum_{z not in F} R(x, z) P_z[first entry into F at y]`.
pub fn trace_rates_by_hitting(chain: &NumericChain, target: &[usize]) -> Result<RateTable<f64>> {
    let n = chain.len();
    if target.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut table = RateTable::zeros_on(n, target);
    let mut in_target = vec![false; n];
    for &s in target {
        in_target[s] = true;
    }
    let outside: Vec<usize> = (0..n).filter(|&s| !in_target[s]).collect();
    let mut via = vec![vec![rational_zero(); n]; n];
    for &y in target {
        let rest: Vec<usize> = target.iter().copied().filter(|&s| s != y).collect();
        let h = if rest.is_empty() {
            vec![exact(1.0); n]
        } else {
            hitting_probabilities(chain, &rest, &[y])?
        };
        for &x in target {
            if x == y {
                continue;
            }
            let mut acc = exact(chain.rate(x, y));
            for &z in &outside {
                let r = chain.rate(x, z);
                if r != 0.0 {
                    acc += exact(r) * &h[z];
                }
            }
            via[x][y] = acc;
        }
    }
    for &x in target {
        for &y in target {
            if x != y {
                table.set(x, y, to_f64(&via[x][y]));
            }
        }
    }
    Ok(table)
}

/// Reversible chain `R^s(a, b) = (R(a, b) + pi(b)/pi(a) R(b, a)) / 2`.
pub fn reversible_chain(chain: &NumericChain, pi: &[f64]) -> Result<NumericChain> {
    let n = chain.len();
    let mut rates = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                rates[a * n + b] = 0.5 * (chain.rate(a, b) + pi[b] / pi[a] * chain.rate(b, a));
            }
        }
    }
    let mut rev = NumericChain::from_matrix(n, rates)?;
    rev.epsilon = chain.epsilon;
    Ok(rev)
}

/// Numeric symmetric conductances, row-major.
pub fn symmetric_conductances_numeric(chain: &NumericChain, pi: &[f64]) -> Vec<f64> {
    let n = chain.len();
    let mut c = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                c[a * n + b] = 0.5 * (pi[a] * chain.rate(a, b) + pi[b] * chain.rate(b, a));
            }
        }
    }
    c
}

pub fn bottleneck_numeric(n: usize, conductances: &[f64], a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(n, a, b)?;
    widest_path(
        n,
        a,
        b,
        |x, y| {
            let c = conductances[x * n + y];
            (c > 0.0).then_some(c)
        },
        |p, q| p.total_cmp(q),
    )
    .ok_or_else(|| Error::InvalidSets("sets are not connected".into()))
}

/// Outcome of comparing a capacity with its reversible counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub cap: f64,
    pub cap_s: f64,
    pub ratio: f64,
    pub upper_bound: f64,
}

pub const SANDWICH_SLACK: f64 = 1e-9;

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.ratio >= 1.0 - SANDWICH_SLACK && self.ratio <= self.upper_bound + SANDWICH_SLACK
    }
}

/// Both capacities and their ratio, without judging the bounds.
pub fn sandwich_report(chain: &NumericChain, pi: &[f64], a: &[usize], b: &[usize]) -> Result<SandwichReport> {
    let rev = reversible_chain(chain, pi)?;
    let cap = capacity_numeric(chain, pi, a, b)?;
    let cap_s = capacity_numeric(&rev, pi, a, b)?;
    Ok(SandwichReport {
        cap,
        cap_s,
        ratio: cap / cap_s,
        upper_bound: 2.0 * chain.len() as f64,
    })
}

/// Checks `Cap^s <= Cap <= 2|E| Cap^s`.
pub fn sandwich_check(chain: &NumericChain, a: &[usize], b: &[usize]) -> Result<SandwichReport> {
    let pi = stationary_numeric(chain)?;
    let report = sandwich_report(chain, &pi, a, b)?;
    if !report.holds() {
        return Err(Error::Invariant(format!(
            "capacity ratio {} outside [1, {}]",
            report.ratio, report.upper_bound
        )));
    }
    Ok(report)
}
