//! Finite-`eps` checks of the leading-order quantities against the numeric
//! oracles: exponent fits over an `eps` grid, the two capacity formulas, the
//! reversible sandwich and the bottleneck comparison.

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{ChainSpec, NumericChain};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::monomial::Monomial;
use crate::potential::{
    bottleneck_conductance, bottleneck_numeric, capacity, capacity_by_trace_numeric, capacity_numeric, sandwich_report,
    stationary_numeric, stationary_ratios, symmetric_conductances, symmetric_conductances_numeric, SandwichReport,
};

pub const SLOPE_TOL: f64 = 0.05;
pub const COEFF_TOL: f64 = 0.10;
pub const EQUIVALENCE_TOL: f64 = 1e-10;
/// Relative slack on the trace-rate bound by capacity.
pub const TRACE_BOUND_SLACK: f64 = 1e-9;

/// Least-squares slope of `ln value` against `ln eps`.
pub fn log_log_slope(eps: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Precondition("epsilon grid needs at least two values".into()));
    }
    if let Some(e) = grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::Epsilon(*e));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() != grid.len() {
        return Err(Error::Precondition("epsilon grid has repeated values".into()));
    }
    Ok(())
}

fn smallest(grid: &[f64]) -> usize {
    (0..grid.len())
        .min_by(|&i, &j| grid[i].total_cmp(&grid[j]))
        .expect("nonempty grid")
}

/// Numeric values of one leading-order quantity across the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub quantity: String,
    pub exponent: f64,
    pub coeff: f64,
    pub values: Vec<f64>,
    pub slope: f64,
    /// Numeric over monomial value at the smallest `eps`.
    pub coeff_ratio: f64,
    pub passed: bool,
}

pub fn fit(quantity: String, predicted: &Monomial, grid: &[f64], values: Vec<f64>) -> ExponentFit {
    let slope = log_log_slope(grid, &values);
    let k = smallest(grid);
    let coeff_ratio = values[k] / predicted.eval(grid[k]);
    let exponent = predicted.exponent_f64();
    ExponentFit {
        passed: (slope - exponent).abs() <= SLOPE_TOL && (coeff_ratio - 1.0).abs() <= COEFF_TOL,
        quantity,
        exponent,
        coeff: predicted.coeff(),
        values,
        slope,
        coeff_ratio,
    }
}

struct Point {
    chain: NumericChain,
    pi: Vec<f64>,
}

fn points(spec: &ChainSpec, grid: &[f64]) -> Result<Vec<Point>> {
    grid.par_iter()
        .map(|&eps| {
            let chain = spec.evaluate_at(eps)?;
            let pi = stationary_numeric(&chain)?;
            Ok(Point { chain, pi })
        })
        .collect()
}

/// A leading-order quantity together with its numeric evaluation.
struct Quantity {
    name: String,
    predicted: Monomial,
    numeric: Box<dyn Fn(&Point) -> Result<f64> + Send + Sync>,
}

fn set_label(spec: &ChainSpec, set: &[usize]) -> String {
    let labels: Vec<&str> = set.iter().map(|&s| spec.label(s)).collect();
    format!("{{{}}}", labels.join(","))
}

fn quantities(spec: &ChainSpec, hierarchy: &Hierarchy) -> Result<Vec<Quantity>> {
    let mu = stationary_ratios(spec);
    let mut out = Vec::new();
    for s in 0..spec.len() {
        out.push(Quantity {
            name: format!("mu({})", spec.label(s)),
            predicted: mu.get(s),
            numeric: Box::new(move |p| Ok(p.pi[s])),
        });
    }
    for (j, level) in hierarchy.levels.iter().enumerate() {
        let partition = level.partition.clone();
        for (x, valley) in partition.valleys.iter().enumerate() {
            let rest = partition.complement_of(x);
            let (a, b) = (valley.clone(), rest.clone());
            out.push(Quantity {
                name: format!("level {} Cap({}, rest)", j + 1, set_label(spec, valley)),
                predicted: capacity(spec, &mu, valley, &rest)?,
                numeric: Box::new(move |p| capacity_numeric(&p.chain, &p.pi, &a, &b)),
            });
            for (i, &s) in valley.iter().enumerate() {
                for &t in &valley[i + 1..] {
                    out.push(Quantity {
                        name: format!("Cap({}, {})", spec.label(s), spec.label(t)),
                        predicted: capacity(spec, &mu, &[s], &[t])?,
                        numeric: Box::new(move |p| capacity_numeric(&p.chain, &p.pi, &[s], &[t])),
                    });
                }
            }
        }
        out.push(Quantity {
            name: format!("level {} 1/timescale", j + 1),
            predicted: level.timescale.recip(),
            numeric: Box::new(move |p| {
                let mut total = 0.0;
                for (x, valley) in partition.valleys.iter().enumerate() {
                    let cap = capacity_numeric(&p.chain, &p.pi, valley, &partition.complement_of(x))?;
                    total += cap / valley.iter().map(|&s| p.pi[s]).sum::<f64>();
                }
                Ok(total)
            }),
        });
    }
    Ok(out)
}

/// Fits every measure, capacity and inverse time-scale the hierarchy uses.
pub fn exponent_fidelity(spec: &ChainSpec, hierarchy: &Hierarchy, grid: &[f64]) -> Result<Vec<ExponentFit>> {
    check_grid(grid)?;
    let points = points(spec, grid)?;
    quantities(spec, hierarchy)?
        .into_par_iter()
        .map(|q| {
            let values = points.iter().map(|p| (q.numeric)(p)).collect::<Result<Vec<_>>>()?;
            Ok(fit(q.name, &q.predicted, grid, values))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalence {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub by_trace: f64,
    pub by_hitting: f64,
    pub relative_gap: f64,
    pub passed: bool,
}

/// Capacity from the trace on `A ∪ B` against the hitting-probability formula.
pub fn capacity_equivalence(chain: &NumericChain, pi: &[f64], a: &[usize], b: &[usize]) -> Result<Equivalence> {
    let by_trace = capacity_by_trace_numeric(chain, pi, a, b)?;
    let by_hitting = capacity_numeric(chain, pi, a, b)?;
    let relative_gap = (by_trace - by_hitting).abs() / by_trace.abs().max(by_hitting.abs());
    Ok(Equivalence {
        a: a.to_vec(),
        b: b.to_vec(),
        by_trace,
        by_hitting,
        relative_gap,
        passed: relative_gap <= EQUIVALENCE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckRatio {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// `Cap^s / c^s` at each grid point.
    pub ratios: Vec<f64>,
    pub slope: f64,
    pub passed: bool,
}

/// Reversible capacity over bottleneck conductance across the grid; its
/// slope should vanish.
pub fn bottleneck_ratio(spec: &ChainSpec, grid: &[f64], a: &[usize], b: &[usize]) -> Result<BottleneckRatio> {
    check_grid(grid)?;
    let points = points(spec, grid)?;
    bottleneck_ratio_at(&points, grid, a, b)
}

fn bottleneck_ratio_at(points: &[Point], grid: &[f64], a: &[usize], b: &[usize]) -> Result<BottleneckRatio> {
    let ratios = points
        .iter()
        .map(|p| {
            let report = sandwich_report(&p.chain, &p.pi, a, b)?;
            let conductances = symmetric_conductances_numeric(&p.chain, &p.pi);
            Ok(report.cap_s / bottleneck_numeric(p.chain.len(), &conductances, a, b)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = log_log_slope(grid, &ratios);
    Ok(BottleneckRatio {
        a: a.to_vec(),
        b: b.to_vec(),
        ratios,
        slope,
        passed: slope.abs() <= SLOPE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceBound {
    pub subset: Vec<usize>,
    pub from: usize,
    pub to: usize,
    pub flow: f64,
    pub capacity: f64,
    pub passed: bool,
}

/// `mu(x) R^A(x, y) <= Cap(x, y)` for `x, y` in `A`.
pub fn trace_bound(chain: &NumericChain, pi: &[f64], subset: &[usize], x: usize, y: usize) -> Result<TraceBound> {
    if !(subset.contains(&x) && subset.contains(&y)) || x == y {
        return Err(Error::InvalidSets(
            "both states must be distinct members of the subset".into(),
        ));
    }
    let trace = chain.rate_table().trace_on(subset)?;
    let flow = pi[x] * trace.get(x, y);
    let capacity = capacity_numeric(chain, pi, &[x], &[y])?;
    Ok(TraceBound {
        subset: subset.to_vec(),
        from: x,
        to: y,
        flow,
        capacity,
        passed: flow <= capacity * (1.0 + TRACE_BOUND_SLACK),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    pub a: usize,
    pub b: usize,
    pub via: usize,
    pub direct: Monomial,
    pub first: Monomial,
    pub second: Monomial,
    pub passed: bool,
}

/// `c^s(A, B) >= min(c^s(A, eta), c^s(eta, B))` in monomial order.
pub fn bottleneck_composition(spec: &ChainSpec, a: usize, b: usize, via: usize) -> Result<Composition> {
    let table = symmetric_conductances(spec, &stationary_ratios(spec));
    let direct = bottleneck_conductance(&table, &[a], &[b])?;
    let first = bottleneck_conductance(&table, &[a], &[via])?;
    let second = bottleneck_conductance(&table, &[via], &[b])?;
    let weaker = if first.cmp_magnitude(&second).is_le() {
        first
    } else {
        second
    };
    Ok(Composition {
        a,
        b,
        via,
        passed: direct.cmp_magnitude(&weaker).is_ge(),
        direct,
        first,
        second,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichEntry {
    pub eps: f64,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub report: SandwichReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub grid: Vec<f64>,
    pub exponent_fits: Vec<ExponentFit>,
    /// Per grid point, capacity formula agreement on all singleton pairs.
    pub equivalence: Vec<Vec<Equivalence>>,
    pub sandwich: Vec<SandwichEntry>,
    pub bottleneck: Vec<BottleneckRatio>,
    pub trace_bounds: Vec<TraceBound>,
    pub composition: Vec<Composition>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend(
            self.exponent_fits
                .iter()
                .filter(|f| !f.passed)
                .map(|f| format!("exponent fit {}", f.quantity)),
        );
        for (k, row) in self.equivalence.iter().enumerate() {
            out.extend(row.iter().filter(|e| !e.passed).map(|e| {
                format!(
                    "capacity formulas disagree for {:?}/{:?} at eps {}",
                    e.a, e.b, self.grid[k]
                )
            }));
        }
        out.extend(
            self.sandwich
                .iter()
                .filter(|s| !s.passed)
                .map(|s| format!("sandwich violated for {:?}/{:?} at eps {}", s.a, s.b, s.eps)),
        );
        out.extend(
            self.bottleneck
                .iter()
                .filter(|b| !b.passed)
                .map(|b| format!("bottleneck ratio drifts for {:?}/{:?}", b.a, b.b)),
        );
        out.extend(self.trace_bounds.iter().filter(|t| !t.passed).map(|t| {
            format!(
                "trace flow exceeds capacity for {} -> {} on {:?}",
                t.from, t.to, t.subset
            )
        }));
        out.extend(
            self.composition
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("bottleneck composition fails for {} -> {} via {}", c.a, c.b, c.via)),
        );
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

fn singleton_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Every oracle comparison for one chain over the grid.
pub fn validate(spec: &ChainSpec, hierarchy: &Hierarchy, grid: &[f64]) -> Result<ValidationReport> {
    check_grid(grid)?;
    let n = spec.len();
    let pairs = singleton_pairs(n);
    let points = points(spec, grid)?;
    let exponent_fits = exponent_fidelity(spec, hierarchy, grid)?;

    let equivalence = points
        .par_iter()
        .map(|p| {
            pairs
                .iter()
                .map(|&(a, b)| capacity_equivalence(&p.chain, &p.pi, &[a], &[b]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut set_pairs: Vec<(Vec<usize>, Vec<usize>)> = pairs.iter().map(|&(a, b)| (vec![a], vec![b])).collect();
    for level in &hierarchy.levels {
        for (x, valley) in level.partition.valleys.iter().enumerate() {
            set_pairs.push((valley.clone(), level.partition.complement_of(x)));
        }
    }
    let sandwich = points
        .par_iter()
        .zip(grid)
        .map(|(p, &eps)| {
            set_pairs
                .iter()
                .map(|(a, b)| {
                    let report = sandwich_report(&p.chain, &p.pi, a, b)?;
                    Ok(SandwichEntry {
                        eps,
                        a: a.clone(),
                        b: b.clone(),
                        passed: report.holds(),
                        report,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let bottleneck = pairs
        .par_iter()
        .map(|&(a, b)| bottleneck_ratio_at(&points, grid, &[a], &[b]))
        .collect::<Result<Vec<_>>>()?;

    let first = &points[0];
    let everything: Vec<usize> = (0..n).collect();
    let mut trace_bounds = Vec::new();
    for &(a, b) in &pairs {
        let mut subsets = vec![vec![a, b], everything.clone()];
        subsets.extend(
            (0..n)
                .filter(|&k| k != a && k != b)
                .map(|k| everything.iter().copied().filter(|&s| s != k).collect::<Vec<_>>()),
        );
        for subset in subsets {
            trace_bounds.push(trace_bound(&first.chain, &first.pi, &subset, a, b)?);
            trace_bounds.push(trace_bound(&first.chain, &first.pi, &subset, b, a)?);
        }
    }

    let mut composition = Vec::new();
    for &(a, b) in &pairs {
        for via in (0..n).filter(|&v| v != a && v != b) {
            composition.push(bottleneck_composition(spec, a, b, via)?);
        }
    }

    Ok(ValidationReport {
        grid: grid.to_vec(),
        exponent_fits,
        equivalence,
        sandwich,
        bottleneck,
        trace_bounds,
        composition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{fixtures, random_chain};
    use crate::hierarchy::full_hierarchy;

    const GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];

    #[test]
    fn slope_of_power_law() {
        let values: Vec<f64> = GRID.iter().map(|e| 3.0 * e.powf(1.5)).collect();
        assert!((log_log_slope(&GRID, &values) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn grid_checks() {
        assert!(check_grid(&[0.1]).is_err());
        assert!(check_grid(&[0.1, 1.0]).is_err());
        assert!(check_grid(&[0.1, 0.1]).is_err());
        assert!(check_grid(&[0.1, 0.01]).is_ok());
    }

    #[test]
    fn fixtures_validate() {
        for spec in [fixtures::chain_b(), fixtures::chain_c(), fixtures::chain_e()] {
            let h = full_hierarchy(&spec).unwrap();
            let report = validate(&spec, &h, &GRID).unwrap();
            assert!(report.passed(), "{:?}", report.failures());
            // reversible fixtures sit exactly at the lower end of the sandwich
            assert!(report.sandwich.iter().all(|s| (s.report.ratio - 1.0).abs() <= 1e-9));
        }
    }

    #[test]
    fn chain_e_level_timescales_from_oracle() {
        let spec = fixtures::chain_e();
        let h = full_hierarchy(&spec).unwrap();
        let fits = exponent_fidelity(&spec, &h, &GRID).unwrap();
        let find = |name: &str| fits.iter().find(|f| f.quantity == name).unwrap();
        assert_eq!(find("level 1 1/timescale").exponent, 1.0);
        assert_eq!(find("level 2 1/timescale").exponent, 2.0);
        assert!(fits.iter().all(|f| f.passed));
    }

    #[test]
    fn random_chain_equivalence() {
        let spec = random_chain(6, 4);
        let chain = spec.evaluate_at(0.1).unwrap();
        let pi = stationary_numeric(&chain).unwrap();
        for (a, b) in singleton_pairs(6) {
            assert!(capacity_equivalence(&chain, &pi, &[a], &[b]).unwrap().passed);
        }
    }
}
