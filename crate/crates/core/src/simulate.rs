//! Exact CTMC sampling and the Monte-Carlo statistics used to check a level
//! of the hierarchy at finite `eps`.
//!
//! Replica `i` of a run draws from stream `i` of the root seed, and replicas
//! are folded in index order, so every statistic is a pure function of its
//! inputs regardless of thread count.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainSpec, NumericChain};
use crate::error::{Error, Result};
use crate::hierarchy::{Level, Partition};
use crate::rng;

/// Default safety horizon, in units of the level time-scale.
pub const SAFETY_HORIZON: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Replicas still running after this many time-scale units are truncated.
    pub safety_horizon: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            safety_horizon: SAFETY_HORIZON,
        }
    }
}

/// Holding rates and jump distributions of a chain, ready for sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    holding: Vec<f64>,
    jumps: Vec<WeightedIndex<f64>>,
}

impl Sampler {
    pub fn new(chain: &NumericChain) -> Result<Self> {
        let jumps = (0..chain.len())
            .map(|s| WeightedIndex::new(chain.row(s)).map_err(|_| Error::ZeroOutRate(s)))
            .collect::<Result<_>>()?;
        Ok(Sampler {
            holding: (0..chain.len()).map(|s| chain.holding(s)).collect(),
            jumps,
        })
    }

    /// Holding time in `state` and the state jumped to.
    pub fn step<R: Rng>(&self, state: usize, rng: &mut R) -> (f64, usize) {
        let wait: f64 = rng.sample::<f64, _>(Exp1) / self.holding[state];
        (wait, self.jumps[state].sample(rng))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub initial: usize,
    /// `(time, new state)` for every jump before the horizon.
    pub jumps: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl Trajectory {
    /// Total time spent in each state up to the horizon.
    pub fn occupation(&self, n: usize) -> Vec<f64> {
        let mut time = vec![0.0; n];
        let mut state = self.initial;
        let mut clock = 0.0;
        for &(t, next) in &self.jumps {
            time[state] += t - clock;
            clock = t;
            state = next;
        }
        time[state] += self.horizon - clock;
        time
    }

    /// `(time, state)` rows starting with the initial state at time zero.
    pub fn rows(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        std::iter::once((0.0, self.initial)).chain(self.jumps.iter().copied())
    }
}

pub fn simulate_with<R: Rng>(sampler: &Sampler, start: usize, horizon: f64, rng: &mut R) -> Trajectory {
    let mut jumps = Vec::new();
    let mut state = start;
    let mut clock = 0.0;
    loop {
        let (wait, next) = sampler.step(state, rng);
        clock += wait;
        if clock >= horizon {
            break;
        }
        jumps.push((clock, next));
        state = next;
    }
    Trajectory {
        initial: start,
        jumps,
        horizon,
    }
}

pub fn simulate(chain: &NumericChain, start: usize, horizon: f64, seed: u64) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    if start >= chain.len() {
        return Err(Error::Precondition(format!("start state index {start} out of range")));
    }
    let sampler = Sampler::new(chain)?;
    Ok(simulate_with(&sampler, start, horizon, &mut rng::stream(seed, 0)))
}

/// Piecewise-constant path over valley indices; `None` marks the separating set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPath {
    /// `(start time, label)` in time-scale units, consecutive labels distinct.
    pub segments: Vec<(f64, Option<usize>)>,
    pub end: f64,
}

impl ProjectedPath {
    /// Fraction of the path spent on `label`.
    pub fn fraction(&self, label: Option<usize>) -> f64 {
        let mut total = 0.0;
        for (i, &(start, l)) in self.segments.iter().enumerate() {
            let stop = self.segments.get(i + 1).map_or(self.end, |s| s.0);
            if l == label {
                total += stop - start;
            }
        }
        total / self.end
    }
}

pub fn project(trajectory: &Trajectory, partition: &Partition, timescale: f64) -> ProjectedPath {
    let mut segments: Vec<(f64, Option<usize>)> = Vec::new();
    for (t, state) in trajectory.rows() {
        let label = partition.project(state);
        if segments.last().map(|s| s.1) != Some(label) {
            segments.push((t / timescale, label));
        }
    }
    ProjectedPath {
        segments,
        end: trajectory.horizon / timescale,
    }
}

fn evaluate(spec: &ChainSpec, level: &Level, eps: f64) -> Result<(NumericChain, Sampler, f64)> {
    let chain = spec.evaluate_at(eps)?;
    let sampler = Sampler::new(&chain)?;
    Ok((chain, sampler, level.timescale.eval(eps)))
}

fn valley(level: &Level, x: usize) -> Result<&[usize]> {
    level
        .partition
        .valleys
        .get(x)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::Precondition(format!("valley {} out of range", x + 1)))
}

fn check_replicas(replicas: usize, minimum: usize) -> Result<()> {
    if replicas < minimum {
        return Err(Error::Precondition(format!(
            "need at least {minimum} replicas, got {replicas}"
        )));
    }
    Ok(())
}

fn membership(n: usize, states: &[usize]) -> Vec<bool> {
    let mut member = vec![false; n];
    for &s in states {
        member[s] = true;
    }
    member
}

/// Runs until `stop` holds or `limit` elapses; returns the stopping time.
fn run_until<R: Rng>(
    sampler: &Sampler,
    start: usize,
    limit: f64,
    rng: &mut R,
    mut stop: impl FnMut(usize) -> bool,
) -> Option<f64> {
    let mut state = start;
    let mut clock = 0.0;
    loop {
        let (wait, next) = sampler.step(state, rng);
        clock += wait;
        if clock > limit {
            return None;
        }
        state = next;
        if stop(state) {
            return Some(clock);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitStats {
    pub valley: usize,
    pub replicas: usize,
    pub completed: usize,
    pub truncated: usize,
    /// Exit times of completed replicas, in time-scale units.
    pub exit_times: Vec<f64>,
    /// Maximum-likelihood exponential mean, truncated replicas censored at the safety horizon.
    pub mean: Option<f64>,
    /// `1 / sum_y r(x, y)`, absent when the valley does not exit at this scale.
    pub predicted_mean: Option<f64>,
    pub mean_ratio: Option<f64>,
    /// Kolmogorov-Smirnov distance to the exponential law with that mean,
    /// taken below the safety horizon.
    pub ks: Option<f64>,
}

/// Sup-distance between the empirical law of `samples` and `Exp(1 / mean)`.
pub fn ks_exponential(samples: &[f64], mean: f64) -> f64 {
    ks_exponential_censored(samples, 0, mean)
}

/// As [`ks_exponential`] with `censored` further samples known only to
/// exceed every observed one; the distance is taken over the observed range.
pub fn ks_exponential_censored(samples: &[f64], censored: usize, mean: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = (sorted.len() + censored) as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x / mean).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Exit law of valley `x` towards the other valleys, starts cycling over its states.
pub fn exit_time_stats(
    spec: &ChainSpec,
    level: &Level,
    x: usize,
    eps: f64,
    replicas: usize,
    seed: u64,
    options: SimOptions,
) -> Result<ExitStats> {
    if level.partition.len() < 2 {
        return Err(Error::TooFewValleys);
    }
    check_replicas(replicas, 100)?;
    let members = valley(level, x)?;
    let (chain, sampler, theta) = evaluate(spec, level, eps)?;
    let target = membership(chain.len(), &level.partition.complement_of(x));
    let limit = options.safety_horizon * theta;
    let times: Vec<Option<f64>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let start = members[i % members.len()];
            run_until(&sampler, start, limit, &mut rng, |s| target[s]).map(|t| t / theta)
        })
        .collect();
    let exit_times: Vec<f64> = times.iter().flatten().copied().collect();
    let completed = exit_times.len();
    let truncated = replicas - completed;
    let exposure = exit_times.iter().sum::<f64>() + truncated as f64 * options.safety_horizon;
    let mean = (completed > 0).then(|| exposure / completed as f64);
    let exit_rate = level.reduced_rates.exit_rate(x);
    let predicted_mean = (exit_rate > 0.0).then(|| 1.0 / exit_rate);
    Ok(ExitStats {
        valley: x,
        replicas,
        completed,
        truncated,
        ks: mean.map(|m| ks_exponential_censored(&exit_times, truncated, m)),
        mean_ratio: mean.zip(predicted_mean).map(|(m, p)| m / p),
        mean,
        predicted_mean,
        exit_times,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaOccupation {
    pub replicas: usize,
    pub horizon: f64,
    pub fraction: f64,
}

/// Share of time spent in the separating set, starts cycling over all states.
pub fn delta_occupation(
    spec: &ChainSpec,
    level: &Level,
    eps: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<DeltaOccupation> {
    if horizon < 1.0 {
        return Err(Error::Precondition(
            "horizon must be at least one time-scale unit".into(),
        ));
    }
    check_replicas(replicas, 1)?;
    let (chain, sampler, theta) = evaluate(spec, level, eps)?;
    let n = chain.len();
    let delta = &level.partition.delta;
    let shares: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            if delta.is_empty() {
                return 0.0;
            }
            let mut rng = rng::stream(seed, i as u64);
            let path = simulate_with(&sampler, i % n, horizon * theta, &mut rng);
            let time = path.occupation(n);
            delta.iter().map(|&s| time[s]).sum::<f64>() / path.horizon
        })
        .collect();
    Ok(DeltaOccupation {
        replicas,
        horizon,
        fraction: shares.iter().sum::<f64>() / replicas as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub valley: usize,
    pub replicas: usize,
    pub truncated: usize,
    pub probability: f64,
    /// `(start state, success probability)` per starting state.
    pub by_start: Vec<(usize, f64)>,
}

/// Probability of visiting all of valley `x` before reaching another valley.
pub fn visit_coverage(
    spec: &ChainSpec,
    level: &Level,
    x: usize,
    eps: f64,
    replicas: usize,
    seed: u64,
    options: SimOptions,
) -> Result<Coverage> {
    let members = valley(level, x)?;
    if members.len() < 2 {
        return Err(Error::Precondition(
            "visit coverage needs a valley with at least two states".into(),
        ));
    }
    check_replicas(replicas, 1)?;
    let (chain, sampler, theta) = evaluate(spec, level, eps)?;
    let n = chain.len();
    let target = membership(n, &level.partition.complement_of(x));
    let inside = membership(n, members);
    let limit = options.safety_horizon * theta;
    // Some(true) covered, Some(false) left early, None truncated
    let outcomes: Vec<Option<bool>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let start = members[i % members.len()];
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut missing = members.len() - 1;
            let mut covered = false;
            run_until(&sampler, start, limit, &mut rng, |s| {
                if inside[s] && !seen[s] {
                    seen[s] = true;
                    missing -= 1;
                }
                covered = missing == 0;
                covered || target[s]
            })?;
            Some(covered)
        })
        .collect();
    let mut by_start = Vec::with_capacity(members.len());
    for (k, &start) in members.iter().enumerate() {
        let runs: Vec<_> = outcomes.iter().skip(k).step_by(members.len()).collect();
        let hits = runs.iter().filter(|o| ***o == Some(true)).count();
        by_start.push((start, hits as f64 / runs.len().max(1) as f64));
    }
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    Ok(Coverage {
        valley: x,
        replicas,
        truncated: outcomes.iter().filter(|o| o.is_none()).count(),
        probability: hits as f64 / replicas as f64,
        by_start,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorEstimate {
    /// Bridged transition counts `x -> y`.
    pub counts: Vec<Vec<u64>>,
    /// Time spent inside each valley, in time-scale units.
    pub occupation: Vec<f64>,
    /// Estimated rates; a row is `None` when its valley was never visited.
    pub rates: Vec<Option<Vec<f64>>>,
}

impl GeneratorEstimate {
    pub fn insufficient(&self) -> Vec<usize> {
        (0..self.rates.len()).filter(|&x| self.rates[x].is_none()).collect()
    }
}

/// Jump counts of the trace-projected path per unit of valley occupation time.
pub fn empirical_generator(
    spec: &ChainSpec,
    level: &Level,
    eps: f64,
    budget: f64,
    replicas: usize,
    seed: u64,
) -> Result<GeneratorEstimate> {
    if budget < 100.0 {
        return Err(Error::Precondition(
            "generator budget must be at least 100 time-scale units".into(),
        ));
    }
    check_replicas(replicas, 1)?;
    let (_, sampler, theta) = evaluate(spec, level, eps)?;
    let partition = &level.partition;
    let p = partition.len();
    let starts = partition.union();
    let label: Vec<Option<usize>> = (0..spec.len()).map(|s| partition.project(s)).collect();
    let horizon = budget / replicas as f64 * theta;
    let runs: Vec<(Vec<u64>, Vec<f64>)> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let path = simulate_with(&sampler, starts[i % starts.len()], horizon, &mut rng);
            let mut counts = vec![0u64; p * p];
            let mut time = vec![0.0; p];
            let mut last = label[path.initial];
            let mut state = path.initial;
            let mut clock = 0.0;
            for (t, next) in path.jumps.iter().copied().chain([(path.horizon, usize::MAX)]) {
                if let Some(x) = label[state] {
                    time[x] += t - clock;
                }
                if next == usize::MAX {
                    break;
                }
                if let Some(y) = label[next] {
                    if let Some(x) = last.filter(|&x| x != y) {
                        counts[x * p + y] += 1;
                    }
                    last = Some(y);
                }
                clock = t;
                state = next;
            }
            (counts, time)
        })
        .collect();
    let mut counts = vec![vec![0u64; p]; p];
    let mut occupation = vec![0.0; p];
    for (c, t) in &runs {
        for x in 0..p {
            occupation[x] += t[x] / theta;
            for y in 0..p {
                counts[x][y] += c[x * p + y];
            }
        }
    }
    let rates = (0..p)
        .map(|x| (occupation[x] > 0.0).then(|| counts[x].iter().map(|&c| c as f64 / occupation[x]).collect()))
        .collect();
    Ok(GeneratorEstimate {
        counts,
        occupation,
        rates,
    })
}
