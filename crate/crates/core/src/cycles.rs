//! Decomposition of a stationary generator into cycle generators, and an
//! empirical probe of its sector constant.
//!
//! Cycles are peeled off shortest first: every 2-cycle, then every 3-cycle,
//! and so on. Each extracted cycle carries the largest constant flow
//! `pi(x_i) r_i` the residual allows, which zeroes at least one arrow.

use std::collections::VecDeque;

use num_rational::BigRational;
use num_traits::Signed;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::NumericChain;
use crate::error::{Error, Result};
use crate::linalg::{exact, to_f64};
use crate::potential::stationary_exact;
use crate::rng;

/// Tolerance on the global-balance residual accepted as stationary.
pub const STATIONARITY_TOL: f64 = 1e-10;
/// Dirichlet forms below this are resampled in the sector probe.
pub const DEGENERATE_FORM: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedCycle {
    pub states: Vec<usize>,
    pub flow: f64,
    /// Rate on the arrow `states[i] -> states[i + 1]` (cyclically).
    pub rates: Vec<f64>,
}

impl WeightedCycle {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn arrows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.states.len();
        (0..n).map(move |i| (self.states[i], self.states[(i + 1) % n]))
    }
}

/// Largest global-balance imbalance relative to the largest probability flux.
pub fn stationarity_defect(chain: &NumericChain, pi: &[f64]) -> f64 {
    let n = chain.len();
    let scale = (0..n)
        .map(|i| pi[i] * chain.holding(i))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).map(|j| pi[j] * chain.rate(j, i)).sum();
            (inflow - pi[i] * chain.holding(i)).abs()
        })
        .fold(0.0f64, f64::max)
        / scale
}

/// Shortest cycle through arrows accepted by `arrow`, lexicographically
/// smallest among the shortest once rotated to start at its least state.
fn shortest_cycle(n: usize, arrow: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let arrow = |a: usize, b: usize| a != b && arrow(a, b);
    let mut best: Option<Vec<usize>> = None;
    for start in 0..n {
        // distance from each v >= start back to start, avoiding states below start
        let mut back = vec![usize::MAX; n];
        back[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for u in start..n {
                if back[u] == usize::MAX && arrow(u, v) {
                    back[u] = back[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        let length = (start + 1..n)
            .filter(|&w| arrow(start, w) && back[w] != usize::MAX)
            .map(|w| back[w] + 1)
            .min();
        let Some(length) = length else { continue };
        if best.as_ref().is_some_and(|c| c.len() <= length) {
            continue;
        }
        let mut cycle = vec![start];
        let mut at = start;
        for remaining in (1..length).rev() {
            let next = (start + 1..n)
                .find(|&w| arrow(at, w) && back[w] == remaining)
                .expect("a shortest path continues");
            cycle.push(next);
            at = next;
        }
        best = Some(cycle);
        if length == 2 {
            break;
        }
    }
    best
}

fn successor(states: &[usize], i: usize) -> usize {
    states[(i + 1) % states.len()]
}

/// Shortest positive-rate cycle of the residual, lexicographically smallest
/// among the shortest, with the largest admissible constant flow.
pub fn find_cycle(residual: &NumericChain, pi: &[f64]) -> Result<WeightedCycle> {
    if !residual.rates().iter().any(|&r| r > 0.0) {
        return Err(Error::NoPositiveArrow);
    }
    let states = shortest_cycle(residual.len(), |a, b| residual.rate(a, b) > 0.0).ok_or(Error::Undecomposable)?;
    let flow = (0..states.len())
        .map(|i| pi[states[i]] * residual.rate(states[i], successor(&states, i)))
        .fold(f64::INFINITY, f64::min);
    let rates = states.iter().map(|&s| flow / pi[s]).collect();
    Ok(WeightedCycle { states, flow, rates })
}

/// Writes a generator as a sum of cycle generators stationary for `pi`.
///
/// `pi` must be stationary within [`STATIONARITY_TOL`]. The peeling itself
/// runs in exact rational arithmetic on the float rates and their exact
/// stationary vector, so every extraction zeroes its arrows exactly and no
/// rounding dust is left to form spurious arrows.
pub fn decompose(chain: &NumericChain, pi: &[f64]) -> Result<Vec<WeightedCycle>> {
    let defect = stationarity_defect(chain, pi);
    if defect > STATIONARITY_TOL {
        return Err(Error::NotStationary(defect));
    }
    let n = chain.len();
    let weights = stationary_exact(chain)?;
    let mut residual: Vec<BigRational> = chain.rates().iter().map(|&r| exact(r)).collect();
    let mut arrows = residual.iter().filter(|r| r.is_positive()).count();
    let mut cycles = Vec::new();
    while arrows > 0 {
        let states = shortest_cycle(n, |a, b| residual[a * n + b].is_positive()).ok_or(Error::Undecomposable)?;
        let flow = (0..states.len())
            .map(|i| &weights[states[i]] * &residual[states[i] * n + successor(&states, i)])
            .min()
            .expect("cycles have arrows");
        let mut rates = Vec::with_capacity(states.len());
        for (i, &a) in states.iter().enumerate() {
            let b = successor(&states, i);
            let rate = &flow / &weights[a];
            let slot = &mut residual[a * n + b];
            *slot -= &rate;
            if slot.is_negative() {
                return Err(Error::NegativeResidual(to_f64(slot), a, b));
            }
            rates.push(to_f64(&rate));
        }
        let remaining = residual.iter().filter(|r| r.is_positive()).count();
        debug_assert!(remaining < arrows, "each extraction removes an arrow");
        arrows = remaining;
        cycles.push(WeightedCycle {
            states,
            flow: to_f64(&flow),
            rates,
        });
    }
    Ok(cycles)
}

/// Largest entrywise gap between the summed cycle generators and the chain.
pub fn reconstruction_residual(chain: &NumericChain, cycles: &[WeightedCycle]) -> f64 {
    let n = chain.len();
    let mut sum = vec![0.0; n * n];
    for cycle in cycles {
        for ((a, b), rate) in cycle.arrows().zip(&cycle.rates) {
            sum[a * n + b] += rate;
        }
    }
    sum.iter()
        .zip(chain.rates())
        .map(|(s, r)| (s - r).abs())
        .fold(0.0, f64::max)
}

fn apply_generator(chain: &NumericChain, f: &[f64]) -> Vec<f64> {
    (0..chain.len())
        .map(|x| chain.row(x).iter().enumerate().map(|(y, r)| r * (f[y] - f[x])).sum())
        .collect()
}

fn inner(pi: &[f64], f: &[f64], g: &[f64]) -> f64 {
    pi.iter().zip(f).zip(g).map(|((p, a), b)| p * a * b).sum()
}

/// Returns `(<Lf, g>^2, <-Lf, f>, <-Lg, g>)` in `L^2(pi)`.
pub fn sector_terms(chain: &NumericChain, pi: &[f64], f: &[f64], g: &[f64]) -> (f64, f64, f64) {
    let lf = apply_generator(chain, f);
    let lg = apply_generator(chain, g);
    let cross = inner(pi, &lf, g);
    (cross * cross, -inner(pi, &lf, f), -inner(pi, &lg, g))
}

pub fn sector_quotient(chain: &NumericChain, pi: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let (cross, df, dg) = sector_terms(chain, pi, f, g);
    cross / (df * dg)
}

/// Maximum of the sector quotient over `trials` random centred Gaussian pairs.
pub fn sector_constant_probe(chain: &NumericChain, pi: &[f64], trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Precondition("sector probe needs at least one trial".into()));
    }
    let n = chain.len();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mean = inner(pi, &v, &vec![1.0; n]);
        v.iter_mut().for_each(|x| *x -= mean);
        v
    };
    let quotients: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, trial);
            loop {
                let f = draw(&mut rng);
                let g = draw(&mut rng);
                let (cross, df, dg) = sector_terms(chain, pi, &f, &g);
                if df >= DEGENERATE_FORM && dg >= DEGENERATE_FORM {
                    return cross / (df * dg);
                }
            }
        })
        .collect();
    Ok(quotients.into_iter().fold(0.0, f64::max))
}
