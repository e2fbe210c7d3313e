//! The recursive construction of metastable time-scales and valleys.
//!
//! Level 1 takes the recurrent classes of the limit chain `lim alpha R` as
//! valleys. Each level then fixes its time-scale from the capacities of its
//! valleys, computes the limiting mean jump rates between them, and merges
//! the recurrent classes of that reduced chain into the next level's valleys.
//! The recursion stops when a single recurrent class remains.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::monomial::{Limit, MaybeZero, Monomial};
use crate::potential::{capacity, capacity_from_trace, stationary_ratios, MeasureTable};
use crate::trace::RateTable;

pub const NO_VALLEYS: &str = "no valleys";

/// Valleys plus the separating set at one level, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub valleys: Vec<Vec<usize>>,
    pub delta: Vec<usize>,
}

impl Partition {
    fn canonical(mut valleys: Vec<Vec<usize>>, mut delta: Vec<usize>) -> Self {
        for v in &mut valleys {
            v.sort_unstable();
        }
        valleys.sort_by_key(|v| v[0]);
        delta.sort_unstable();
        Partition { valleys, delta }
    }

    pub fn len(&self) -> usize {
        self.valleys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valleys.is_empty()
    }

    /// All valley states, ascending.
    pub fn union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.valleys.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// States of every valley except `x`, ascending.
    pub fn complement_of(&self, x: usize) -> Vec<usize> {
        let mut rest: Vec<usize> = self
            .valleys
            .iter()
            .enumerate()
            .filter(|&(y, _)| y != x)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        rest.sort_unstable();
        rest
    }

    /// Valley index of `state`, or `None` when it lies in the separating set.
    pub fn project(&self, state: usize) -> Option<usize> {
        self.valleys.iter().position(|v| v.contains(&state))
    }
}

/// Dense reduced-rate matrix between the valleys of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedRates {
    p: usize,
    values: Vec<f64>,
}

impl ReducedRates {
    pub fn len(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.p + y]
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        (0..self.p).filter(|&y| y != x).map(|y| self.get(x, y)).sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn as_matrix(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub timescale: Monomial,
    pub partition: Partition,
    pub reduced_rates: ReducedRates,
    /// `weights[x][k]` is the leading-order share of `valleys[x][k]` in valley `x`.
    pub weights: Vec<Vec<Monomial>>,
    /// Indices of the previous level's valleys merged into each valley.
    pub merged_from: Vec<Vec<usize>>,
}

impl Level {
    /// Limit weight `m_x(eta)`; zero when the share vanishes.
    pub fn weight(&self, x: usize, k: usize) -> f64 {
        self.weights[x][k].limit().finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hierarchy {
    pub alpha: Monomial,
    pub levels: Vec<Level>,
    pub terminal_class: Vec<usize>,
    pub diagnostic: Option<String>,
}

/// Result of merging the recurrent classes of a reduced chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Coarsening {
    pub partition: Partition,
    /// For each new valley, the old valley indices it unites.
    pub groups: Vec<Vec<usize>>,
}

/// `1 / alpha` is the leading-order sum of all rates.
pub fn base_timescale(spec: &ChainSpec) -> Monomial {
    MaybeZero::sum(spec.bonds().values().map(|&m| MaybeZero::Mono(m)))
        .monomial()
        .expect("irreducible chain has a bond")
        .recip()
}

/// Row-major `lim alpha R(a, b)`.
pub fn limit_chain(spec: &ChainSpec, alpha: &Monomial) -> Result<Vec<f64>> {
    let n = spec.len();
    let mut rates = vec![0.0; n * n];
    for (&(a, b), rate) in spec.bonds() {
        rates[a * n + b] = match alpha.mul(rate).limit() {
            Limit::Finite(v) => v,
            Limit::Infinite => {
                return Err(Error::InfiniteLimit(format!(
                    "limit chain rate {} -> {}",
                    spec.label(a),
                    spec.label(b)
                )))
            }
        };
    }
    Ok(rates)
}

/// Closed communicating classes of a nonnegative rate matrix; the rest is `delta`.
pub fn recurrent_classes(n: usize, rates: &[f64]) -> Partition {
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for a in 0..n {
        for b in 0..n {
            if a != b && rates[a * n + b] > 0.0 {
                graph.add_edge(nodes[a], nodes[b], ());
            }
        }
    }
    let mut component = vec![0; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut valleys = Vec::new();
    let mut delta = Vec::new();
    for members in &sccs {
        let states: Vec<usize> = members.iter().map(|v| v.index()).collect();
        let closed = states
            .iter()
            .all(|&a| (0..n).all(|b| rates[a * n + b] <= 0.0 || component[b] == component[a]));
        if closed {
            valleys.push(states);
        } else {
            delta.extend(states);
        }
    }
    Partition::canonical(valleys, delta)
}

fn valley_trace(spec: &ChainSpec, partition: &Partition) -> Result<RateTable<MaybeZero>> {
    spec.rate_table().trace_on(&partition.union())
}

/// Leading-order flows `sum_{eta in x} mu(eta) sum_{xi in y} R^E(eta, xi)`.
fn valley_flows(trace: &RateTable<MaybeZero>, mu: &MeasureTable, partition: &Partition) -> Vec<Vec<MaybeZero>> {
    let p = partition.len();
    let mut flows = vec![vec![MaybeZero::Zero; p]; p];
    for (x, from) in partition.valleys.iter().enumerate() {
        for (y, to) in partition.valleys.iter().enumerate() {
            if x != y {
                flows[x][y] = MaybeZero::sum(
                    from.iter()
                        .flat_map(|&a| to.iter().map(move |&b| MaybeZero::Mono(mu.get(a)) * *trace.get(a, b))),
                );
            }
        }
    }
    flows
}

fn timescale_from_trace(trace: &RateTable<MaybeZero>, mu: &MeasureTable, partition: &Partition) -> Monomial {
    MaybeZero::sum((0..partition.len()).map(|x| {
        let cap = capacity_from_trace(trace, mu, &partition.valleys[x], &partition.complement_of(x));
        MaybeZero::Mono(cap.div(&mu.of_set(&partition.valleys[x])))
    }))
    .monomial()
    .expect("capacities are positive")
    .recip()
}

/// `1 / theta = sum_x Cap(E_x, E_x complement) / mu(E_x)`.
pub fn level_timescale(spec: &ChainSpec, mu: &MeasureTable, partition: &Partition) -> Result<Monomial> {
    if partition.len() < 2 {
        return Err(Error::TooFewValleys);
    }
    Ok(timescale_from_trace(&valley_trace(spec, partition)?, mu, partition))
}

fn rates_from_trace(
    trace: &RateTable<MaybeZero>,
    mu: &MeasureTable,
    partition: &Partition,
    theta: &Monomial,
) -> Result<ReducedRates> {
    let p = partition.len();
    let flows = valley_flows(trace, mu, partition);
    let mut values = vec![0.0; p * p];
    for x in 0..p {
        let scale = theta.div(&mu.of_set(&partition.valleys[x]));
        for y in 0..p {
            values[x * p + y] = match flows[x][y].div_mono(&scale.recip()).limit() {
                Limit::Finite(v) => v,
                Limit::Infinite => return Err(Error::InfiniteLimit(format!("reduced rate {x} -> {y}"))),
            };
        }
    }
    Ok(ReducedRates { p, values })
}

/// `r(x, y) = lim theta / mu(E_x) * sum_{eta in x} mu(eta) sum_{xi in y} R^E(eta, xi)`.
pub fn mean_jump_rates(
    spec: &ChainSpec,
    mu: &MeasureTable,
    partition: &Partition,
    theta: &Monomial,
) -> Result<ReducedRates> {
    if partition.len() < 2 {
        return Err(Error::TooFewValleys);
    }
    rates_from_trace(&valley_trace(spec, partition)?, mu, partition, theta)
}

/// Merges the recurrent classes of the reduced chain; transient valleys join `delta`.
pub fn coarsen(partition: &Partition, rates: &ReducedRates) -> Coarsening {
    let classes = recurrent_classes(rates.len(), rates.as_matrix());
    let mut delta = partition.delta.clone();
    for &x in &classes.delta {
        delta.extend(&partition.valleys[x]);
    }
    let valleys = classes
        .valleys
        .iter()
        .map(|group| {
            group
                .iter()
                .flat_map(|&x| partition.valleys[x].iter().copied())
                .collect()
        })
        .collect();
    // groups are ordered by smallest old index, which is also the smallest state order
    Coarsening {
        partition: Partition::canonical(valleys, delta),
        groups: classes.valleys,
    }
}

fn weights(mu: &MeasureTable, partition: &Partition) -> Vec<Vec<Monomial>> {
    partition
        .valleys
        .iter()
        .map(|v| {
            let total = mu.of_set(v);
            v.iter().map(|&s| mu.get(s).div(&total)).collect()
        })
        .collect()
}

fn build_level(
    spec: &ChainSpec,
    mu: &MeasureTable,
    partition: Partition,
    merged_from: Vec<Vec<usize>>,
) -> Result<Level> {
    let trace = valley_trace(spec, &partition)?;
    let timescale = timescale_from_trace(&trace, mu, &partition);
    let reduced_rates = rates_from_trace(&trace, mu, &partition, &timescale)?;
    Ok(Level {
        timescale,
        weights: weights(mu, &partition),
        partition,
        reduced_rates,
        merged_from,
    })
}

pub fn full_hierarchy(spec: &ChainSpec) -> Result<Hierarchy> {
    let alpha = base_timescale(spec);
    let limit = limit_chain(spec, &alpha)?;
    let first = recurrent_classes(spec.len(), &limit);
    if first.len() == 1 {
        return Ok(Hierarchy {
            alpha,
            levels: Vec::new(),
            terminal_class: first.valleys[0].clone(),
            diagnostic: Some(NO_VALLEYS.to_string()),
        });
    }
    let mu = stationary_ratios(spec);
    let mut levels = vec![build_level(spec, &mu, first, Vec::new())?];
    loop {
        let last = levels.last().expect("at least one level");
        let next = coarsen(&last.partition, &last.reduced_rates);
        if next.partition.len() >= last.partition.len() {
            return Err(Error::Invariant(format!(
                "coarsening did not reduce the valley count at level {}",
                levels.len()
            )));
        }
        if next.partition.len() == 1 {
            return Ok(Hierarchy {
                alpha,
                terminal_class: next.partition.valleys[0].clone(),
                levels,
                diagnostic: None,
            });
        }
        let level = build_level(spec, &mu, next.partition, next.groups)?;
        if level.timescale.exponent() >= last.timescale.exponent() {
            return Err(Error::Invariant(format!(
                "time-scale exponent did not decrease at level {}",
                levels.len() + 1
            )));
        }
        levels.push(level);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Vacuous,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// One-based level number.
    pub level: usize,
    pub checks: Vec<Check>,
    /// Inverse of the leading inter-valley trace rate sum.
    pub gamma: Monomial,
    /// `lim gamma / theta`.
    pub ell: Option<f64>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

fn check(name: &'static str, problems: Vec<String>, vacuous: bool) -> Check {
    let status = if !problems.is_empty() {
        Status::Fail
    } else if vacuous {
        Status::Vacuous
    } else {
        Status::Pass
    };
    Check {
        name,
        status,
        detail: problems.join("; "),
    }
}

/// Order checks (H0), (H1), (H2) and the gamma cross-check for level `index` (zero-based).
pub fn check_conditions(spec: &ChainSpec, hierarchy: &Hierarchy, index: usize) -> Result<ConditionReport> {
    let level = hierarchy
        .levels
        .get(index)
        .ok_or_else(|| Error::Precondition(format!("level {} out of range", index + 1)))?;
    let partition = &level.partition;
    let mu = stationary_ratios(spec);
    let zero = num_rational::Rational64::from_integer(0);
    let mut checks = Vec::new();

    let mut problems = Vec::new();
    for (x, valley) in partition.valleys.iter().enumerate() {
        let mut total = 0.0;
        for (k, w) in level.weights[x].iter().enumerate() {
            if w.exponent() != zero {
                problems.push(format!("weight of state {} has order {}", spec.label(valley[k]), w));
            }
            total += level.weight(x, k);
        }
        if problems.is_empty() && (total - 1.0).abs() > 1e-12 {
            problems.push(format!("weights of valley {x} sum to {total}"));
        }
    }
    checks.push(check("H0", problems, false));

    let rates = &level.reduced_rates;
    let mut problems = Vec::new();
    if rates.as_matrix().iter().any(|r| !r.is_finite() || *r < 0.0) {
        problems.push("reduced rate not finite and nonnegative".to_string());
    }
    if rates.total() <= 0.0 {
        problems.push("reduced rates sum to zero".to_string());
    }
    checks.push(check("H1", problems, false));

    // fast internal mixing measured on the previous scale
    let previous = if index == 0 {
        hierarchy.alpha
    } else {
        hierarchy.levels[index - 1].timescale
    };
    let mut problems = Vec::new();
    let mut vacuous = true;
    for valley in &partition.valleys {
        let mass = mu.of_set(valley);
        for (i, &a) in valley.iter().enumerate() {
            for &b in &valley[i + 1..] {
                vacuous = false;
                let order = previous.mul(&capacity(spec, &mu, &[a], &[b])?).div(&mass);
                let ok = if index == 0 {
                    order.exponent() == zero
                } else {
                    order.exponent() <= zero
                };
                if !ok {
                    problems.push(format!(
                        "capacity between {} and {} has scaled order {}",
                        spec.label(a),
                        spec.label(b),
                        order
                    ));
                }
            }
        }
    }
    checks.push(check("H2", problems, vacuous));

    let trace = valley_trace(spec, partition)?;
    let exits = MaybeZero::sum((0..partition.len()).flat_map(|x| {
        let rest = partition.complement_of(x);
        let trace = &trace;
        partition.valleys[x]
            .iter()
            .flat_map(move |&a| rest.iter().map(move |&b| *trace.get(a, b)).collect::<Vec<_>>())
    }));
    let gamma = exits.monomial().expect("valleys exchange mass in the trace").recip();
    let ratio = gamma.div(&level.timescale);
    let ell = ratio.limit().finite().filter(|_| ratio.exponent() == zero);
    let problems = if ell.is_none() {
        vec![format!(
            "gamma {} is not of the order of theta {}",
            gamma, level.timescale
        )]
    } else {
        Vec::new()
    };
    checks.push(check("gamma", problems, false));

    Ok(ConditionReport {
        level: index + 1,
        checks,
        gamma,
        ell,
    })
}

/// Condition reports for every level.
pub fn check_all(spec: &ChainSpec, hierarchy: &Hierarchy) -> Result<Vec<ConditionReport>> {
    (0..hierarchy.levels.len())
        .map(|i| check_conditions(spec, hierarchy, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{fixtures, random_chain};

    fn mono(c: f64, k: i64) -> Monomial {
        Monomial::int(c, k)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn base_timescales() {
        assert_eq!(base_timescale(&fixtures::chain_b()), mono(0.5, -1));
        assert_eq!(base_timescale(&fixtures::chain_c()), mono(0.5, 0));
        assert_eq!(base_timescale(&fixtures::chain_e()), mono(0.25, 0));
    }

    #[test]
    fn limit_chains() {
        let b = fixtures::chain_b();
        assert_eq!(limit_chain(&b, &base_timescale(&b)).unwrap(), vec![0.0, 0.5, 0.5, 0.0]);
        let c = fixtures::chain_c();
        let r = limit_chain(&c, &base_timescale(&c)).unwrap();
        assert_eq!(r, vec![0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0]);
        let e = fixtures::chain_e();
        let r = limit_chain(&e, &base_timescale(&e)).unwrap();
        let positive: Vec<usize> = (0..25).filter(|&i| r[i] > 0.0).collect();
        assert_eq!(positive, vec![5, 7, 17, 19]);
        assert!(positive.iter().all(|&i| r[i] == 0.25));
        assert!(limit_chain(&e, &mono(1.0, -1)).is_err());
    }

    #[test]
    fn limit_classes() {
        let classes = |spec: &ChainSpec| {
            let r = limit_chain(spec, &base_timescale(spec)).unwrap();
            recurrent_classes(spec.len(), &r)
        };
        let b = classes(&fixtures::chain_b());
        assert_eq!(b.valleys, vec![vec![0, 1]]);
        assert!(b.delta.is_empty());
        let c = classes(&fixtures::chain_c());
        assert_eq!(c.valleys, vec![vec![0], vec![2]]);
        assert_eq!(c.delta, vec![1]);
        let e = classes(&fixtures::chain_e());
        assert_eq!(e.valleys, vec![vec![0], vec![2], vec![4]]);
        assert_eq!(e.delta, vec![1, 3]);
    }

    #[test]
    fn chain_c_hierarchy() {
        let h = full_hierarchy(&fixtures::chain_c()).unwrap();
        assert_eq!(h.levels.len(), 1);
        let level = &h.levels[0];
        assert_eq!(level.timescale, mono(2.0, -1));
        assert!(close(level.reduced_rates.get(1, 0), 1.0));
        assert_eq!(level.reduced_rates.get(0, 1), 0.0);
        assert_eq!(h.terminal_class, vec![0]);
        assert!(h.diagnostic.is_none());
    }

    #[test]
    fn chain_e_hierarchy() {
        let spec = fixtures::chain_e();
        let h = full_hierarchy(&spec).unwrap();
        assert_eq!(h.levels.len(), 2);
        let (one, two) = (&h.levels[0], &h.levels[1]);
        assert_eq!(one.timescale, mono(1.0, -1));
        assert_eq!(one.partition.valleys, vec![vec![0], vec![2], vec![4]]);
        assert!(close(one.reduced_rates.get(0, 1), 0.5) && close(one.reduced_rates.get(1, 0), 0.5));
        for (x, y) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
            assert_eq!(one.reduced_rates.get(x, y), 0.0);
        }
        assert_eq!(two.timescale, mono(2.0, -2));
        assert_eq!(two.partition.valleys, vec![vec![0, 2], vec![4]]);
        assert_eq!(two.partition.delta, vec![1, 3]);
        assert_eq!(two.merged_from, vec![vec![0, 1], vec![2]]);
        assert!(close(two.reduced_rates.get(1, 0), 1.0));
        assert_eq!(two.reduced_rates.get(0, 1), 0.0);
        assert_eq!(h.terminal_class, vec![0, 2]);
    }

    #[test]
    fn standalone_operations_agree_with_full_hierarchy() {
        let spec = fixtures::chain_e();
        let h = full_hierarchy(&spec).unwrap();
        let mu = stationary_ratios(&spec);
        for level in &h.levels {
            let theta = level_timescale(&spec, &mu, &level.partition).unwrap();
            assert_eq!(theta, level.timescale);
            let rates = mean_jump_rates(&spec, &mu, &level.partition, &theta).unwrap();
            assert_eq!(rates, level.reduced_rates);
        }
        let single = Partition::canonical(vec![vec![0, 1, 2, 3, 4]], vec![]);
        assert!(matches!(
            level_timescale(&spec, &mu, &single),
            Err(Error::TooFewValleys)
        ));
    }

    #[test]
    fn no_valleys() {
        let h = full_hierarchy(&fixtures::chain_b()).unwrap();
        assert!(h.levels.is_empty());
        assert_eq!(h.diagnostic.as_deref(), Some(NO_VALLEYS));
        assert_eq!(h.terminal_class, vec![0, 1]);

        let flat = ChainSpec::new(
            crate::chain::numbered_labels(3),
            vec![((0, 1), mono(1.0, 0)), ((1, 2), mono(2.0, 0)), ((2, 0), mono(3.0, 0))],
        )
        .unwrap();
        assert!(full_hierarchy(&flat).unwrap().levels.is_empty());
    }

    #[test]
    fn coarsen_cases() {
        let partition = Partition::canonical(vec![vec![0], vec![2]], vec![1]);
        let absorbing = ReducedRates {
            p: 2,
            values: vec![0.0, 0.0, 1.0, 0.0],
        };
        let merged = coarsen(&partition, &absorbing);
        assert_eq!(merged.partition.valleys, vec![vec![0]]);
        assert_eq!(merged.partition.delta, vec![1, 2]);
        let irreducible = ReducedRates {
            p: 2,
            values: vec![0.0, 1.0, 1.0, 0.0],
        };
        let merged = coarsen(&partition, &irreducible);
        assert_eq!(merged.partition.valleys, vec![vec![0, 2]]);
        assert_eq!(merged.groups, vec![vec![0, 1]]);
    }

    #[test]
    fn chain_e_conditions() {
        let spec = fixtures::chain_e();
        let h = full_hierarchy(&spec).unwrap();
        let one = check_conditions(&spec, &h, 0).unwrap();
        assert!(one.passed());
        assert_eq!(one.gamma, mono(1.0, -1));
        assert_eq!(one.ell, Some(1.0));
        assert_eq!(one.checks[2].status, Status::Vacuous);
        let two = check_conditions(&spec, &h, 1).unwrap();
        assert!(two.passed());
        assert_eq!(two.checks[2].status, Status::Pass);
        assert!(check_conditions(&spec, &h, 2).is_err());

        let c = fixtures::chain_c();
        let report = check_conditions(&c, &full_hierarchy(&c).unwrap(), 0).unwrap();
        assert_eq!(report.checks[2].status, Status::Vacuous);
    }

    fn check_structure(spec: &ChainSpec, h: &Hierarchy) {
        let n = spec.len();
        for (j, level) in h.levels.iter().enumerate() {
            let mut seen = level.partition.union();
            seen.extend(&level.partition.delta);
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            assert!(level.partition.len() >= 2);
            assert!((level.reduced_rates.total() - 1.0).abs() < 1e-9);
            if j > 0 {
                let prev = &h.levels[j - 1];
                assert!(level.timescale.exponent() < prev.timescale.exponent());
                assert!(level.partition.len() < prev.partition.len());
                assert!(prev.partition.delta.iter().all(|s| level.partition.delta.contains(s)));
                for (x, valley) in level.partition.valleys.iter().enumerate() {
                    let mut union: Vec<usize> = level.merged_from[x]
                        .iter()
                        .flat_map(|&y| prev.partition.valleys[y].iter().copied())
                        .collect();
                    union.sort_unstable();
                    assert_eq!(&union, valley);
                }
                // projections commute with the merge map
                for s in prev.partition.union() {
                    let old = prev.partition.project(s).unwrap();
                    let merged = level.merged_from.iter().position(|g| g.contains(&old));
                    assert_eq!(level.partition.project(s), merged);
                }
            }
        }
        let terminal = h
            .levels
            .last()
            .map(|l| l.partition.union())
            .unwrap_or_else(|| (0..n).collect());
        assert!(h.terminal_class.iter().all(|s| terminal.contains(s)));
    }

    #[test]
    fn random_hierarchies_satisfy_conditions() {
        let mut nontrivial = 0;
        for seed in 0..50 {
            let spec = random_chain(3 + (seed % 5) as usize, seed);
            let h = full_hierarchy(&spec).unwrap();
            check_structure(&spec, &h);
            nontrivial += usize::from(!h.levels.is_empty());
            for report in check_all(&spec, &h).unwrap() {
                assert!(report.passed(), "seed {seed}: {report:?}");
            }
        }
        assert!(nontrivial >= 25, "only {nontrivial} chains had valleys");
    }
}
