use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use valleyscope_core::chain::random_chain;
use valleyscope_core::cycles::{decompose, reconstruction_residual, sector_constant_probe};
use valleyscope_core::hierarchy::{check_all, full_hierarchy, Hierarchy, Level};
use valleyscope_core::potential::stationary_numeric;
use valleyscope_core::report::{spec_digest, OracleSummary, SCHEMA_VERSION};
use valleyscope_core::simulate::{
    delta_occupation, empirical_generator, exit_time_stats, simulate as simulate_path, visit_coverage, SimOptions,
};
use valleyscope_core::validation::{check_grid, exponent_fidelity, validate as run_validation, ValidationReport};
use valleyscope_core::{AnalysisReport, ChainSpec};

use crate::checks::{judge_coverage, judge_delta, judge_exit, judge_generator};
use crate::failure::Failure;
use crate::{AnalyzeArgs, Check, CyclesArgs, GenerateArgs, SimulateArgs, ValidateArgs};

/// Largest entrywise gap between the generator and its cycle sum.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Largest relative deviation of `pi(i) * rate(i)` from a cycle's flow.
pub const FLOW_TOL: f64 = 1e-10;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn load(path: &Path) -> Result<ChainSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    ChainSpec::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_out(out, &text)
}

fn labels(spec: &ChainSpec, states: &[usize]) -> Vec<String> {
    states.iter().map(|&s| spec.label(s).to_string()).collect()
}

fn state_index(spec: &ChainSpec, label: &str) -> Result<usize, Failure> {
    spec.index_of(label)
        .ok_or_else(|| Failure::Input(format!("unknown state {label:?}")))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<bool, Failure> {
    let spec = load(&args.spec)?;
    let hierarchy = full_hierarchy(&spec)?;
    let conditions = check_all(&spec, &hierarchy)?;
    let oracle = if args.no_oracle {
        None
    } else {
        check_grid(&args.eps_grid)?;
        let fits = exponent_fidelity(&spec, &hierarchy, &args.eps_grid)?;
        Some(OracleSummary::new(&args.eps_grid, fits))
    };
    let report = AnalysisReport::new(VERSION, &spec, &hierarchy, conditions, oracle);
    emit(args.out.as_deref(), &report)?;
    for c in &report.conditions {
        for check in c.failures() {
            eprintln!("level {}: {} failed: {}", c.level, check.name, check.detail);
        }
    }
    if let Some(o) = &report.oracle {
        for q in &o.failed {
            eprintln!("exponent fit failed: {q}");
        }
    }
    Ok(report.passed())
}

fn level_of(hierarchy: &Hierarchy, k: usize) -> Result<&Level, Failure> {
    k.checked_sub(1).and_then(|i| hierarchy.levels.get(i)).ok_or_else(|| {
        Failure::Input(format!(
            "level out of range: {k} requested, hierarchy has {} level(s)",
            hierarchy.levels.len()
        ))
    })
}

/// Valley indices addressed by `--valley`, or all valleys passing `keep`.
fn selected_valleys(
    spec: &ChainSpec,
    level: &Level,
    label: Option<&str>,
    keep: impl Fn(&[usize]) -> bool,
) -> Result<Vec<usize>, Failure> {
    match label {
        Some(label) => {
            let s = state_index(spec, label)?;
            let x = level
                .partition
                .project(s)
                .ok_or_else(|| Failure::Input(format!("state {label:?} lies in no valley at this level")))?;
            Ok(vec![x])
        }
        None => Ok((0..level.partition.len())
            .filter(|&x| keep(&level.partition.valleys[x]))
            .collect()),
    }
}

#[derive(Serialize)]
struct SimulationHeader {
    schema_version: u32,
    tool_version: &'static str,
    spec_digest: String,
    check: &'static str,
    level: usize,
    epsilon: f64,
    timescale: f64,
    seed: u64,
    replicas: usize,
    valleys: Vec<Vec<String>>,
    delta: Vec<String>,
    passed: bool,
}

#[derive(Serialize)]
struct SimulationDoc<T> {
    #[serde(flatten)]
    header: SimulationHeader,
    result: T,
}

pub fn simulate(args: &SimulateArgs) -> Result<bool, Failure> {
    let spec = load(&args.spec)?;
    if !(args.epsilon > 0.0 && args.epsilon < 1.0) {
        return Err(valleyscope_core::Error::Epsilon(args.epsilon).into());
    }
    let hierarchy = full_hierarchy(&spec)?;
    let level = level_of(&hierarchy, args.level)?;
    let options = SimOptions {
        safety_horizon: args.safety_horizon,
    };
    let (eps, seed, replicas) = (args.epsilon, args.seed, args.replicas);
    let header = |check: &'static str, passed: bool| SimulationHeader {
        schema_version: SCHEMA_VERSION,
        tool_version: VERSION,
        spec_digest: spec_digest(&spec),
        check,
        level: args.level,
        epsilon: eps,
        timescale: level.timescale.eval(eps),
        seed,
        replicas,
        valleys: level.partition.valleys.iter().map(|v| labels(&spec, v)).collect(),
        delta: labels(&spec, &level.partition.delta),
        passed,
    };
    let out = args.out.as_deref();
    let passed = match args.check {
        Check::Exit => {
            let valleys = selected_valleys(&spec, level, args.valley.as_deref(), |_| true)?;
            let mut verdicts = Vec::new();
            for x in valleys {
                let stats = exit_time_stats(&spec, level, x, eps, replicas, seed, options)?;
                verdicts.push(judge_exit(labels(&spec, &level.partition.valleys[x]), level, stats));
            }
            let passed = verdicts.iter().all(|v| v.passed);
            emit(
                out,
                &SimulationDoc {
                    header: header("exit", passed),
                    result: verdicts,
                },
            )?;
            passed
        }
        Check::Delta => {
            let stats = delta_occupation(&spec, level, eps, args.horizon, replicas, seed)?;
            let verdict = judge_delta(eps, stats);
            let passed = verdict.passed;
            emit(
                out,
                &SimulationDoc {
                    header: header("delta", passed),
                    result: verdict,
                },
            )?;
            passed
        }
        Check::Coverage => {
            let valleys = selected_valleys(&spec, level, args.valley.as_deref(), |v| v.len() >= 2)?;
            if valleys.is_empty() {
                return Err(Failure::Input(
                    "no valley with at least two states at this level".into(),
                ));
            }
            let mut verdicts = Vec::new();
            for x in valleys {
                let stats = visit_coverage(&spec, level, x, eps, replicas, seed, options)?;
                verdicts.push(judge_coverage(labels(&spec, &level.partition.valleys[x]), stats));
            }
            let passed = verdicts.iter().all(|v| v.passed);
            emit(
                out,
                &SimulationDoc {
                    header: header("coverage", passed),
                    result: verdicts,
                },
            )?;
            passed
        }
        Check::Generator => {
            let estimate = empirical_generator(&spec, level, eps, args.budget, replicas, seed)?;
            let verdict = judge_generator(level, estimate);
            let passed = verdict.passed;
            emit(
                out,
                &SimulationDoc {
                    header: header("generator", passed),
                    result: verdict,
                },
            )?;
            passed
        }
    };
    if let Some(path) = &args.trajectory_out {
        let start = match &args.start {
            Some(label) => state_index(&spec, label)?,
            None => 0,
        };
        let chain = spec.evaluate_at(eps)?;
        let path_data = simulate_path(&chain, start, args.horizon * level.timescale.eval(eps), seed)?;
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["time", "state"])?;
        for (t, s) in path_data.rows() {
            writer.write_record([t.to_string(), spec.label(s).to_string()])?;
        }
        writer.flush()?;
    }
    Ok(passed)
}

fn write_plot(path: &Path, report: &ValidationReport) -> Result<(), Failure> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["quantity", "epsilon", "value", "predicted"])?;
    for fit in &report.exponent_fits {
        for (&eps, &value) in report.grid.iter().zip(&fit.values) {
            let predicted = fit.coeff * eps.powf(fit.exponent);
            writer.write_record([
                fit.quantity.clone(),
                eps.to_string(),
                value.to_string(),
                predicted.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<bool, Failure> {
    let spec = load(&args.spec)?;
    check_grid(&args.eps_grid)?;
    let hierarchy = full_hierarchy(&spec)?;
    let report = run_validation(&spec, &hierarchy, &args.eps_grid)?;
    emit(args.out.as_deref(), &report)?;
    if let Some(path) = &args.plot_out {
        write_plot(path, &report)?;
    }
    for f in report.failures() {
        eprintln!("failed: {f}");
    }
    Ok(report.passed())
}

#[derive(Serialize)]
struct CycleDoc {
    states: Vec<String>,
    flow: f64,
    rates: Vec<f64>,
    flow_defect: f64,
}

#[derive(Serialize)]
struct SectorDoc {
    trials: usize,
    seed: u64,
    max: f64,
    bound: f64,
}

#[derive(Serialize)]
struct CyclesReport {
    schema_version: u32,
    tool_version: &'static str,
    spec_digest: String,
    epsilon: f64,
    stationary: Vec<f64>,
    cycles: Vec<CycleDoc>,
    residual: f64,
    max_flow_defect: f64,
    sector: SectorDoc,
    passed: bool,
}

pub fn cycles(args: &CyclesArgs) -> Result<bool, Failure> {
    let spec = load(&args.spec)?;
    let chain = spec.evaluate_at(args.epsilon)?;
    let pi = stationary_numeric(&chain)?;
    let found = decompose(&chain, &pi)?;
    let residual = reconstruction_residual(&chain, &found);
    let max = sector_constant_probe(&chain, &pi, args.trials, args.seed)?;
    let bound = 2.0 * spec.len() as f64;
    let docs: Vec<CycleDoc> = found
        .iter()
        .map(|c| CycleDoc {
            states: labels(&spec, &c.states),
            flow: c.flow,
            rates: c.rates.clone(),
            flow_defect: c
                .states
                .iter()
                .zip(&c.rates)
                .map(|(&s, &r)| (pi[s] * r - c.flow).abs() / c.flow)
                .fold(0.0, f64::max),
        })
        .collect();
    let max_flow_defect = docs.iter().map(|c| c.flow_defect).fold(0.0, f64::max);
    let passed = residual <= RECONSTRUCTION_TOL && max_flow_defect <= FLOW_TOL && max <= bound;
    emit(
        args.out.as_deref(),
        &CyclesReport {
            schema_version: SCHEMA_VERSION,
            tool_version: VERSION,
            spec_digest: spec_digest(&spec),
            epsilon: args.epsilon,
            stationary: pi,
            cycles: docs,
            residual,
            max_flow_defect,
            sector: SectorDoc {
                trials: args.trials,
                seed: args.seed,
                max,
                bound,
            },
            passed,
        },
    )?;
    Ok(passed)
}

pub fn generate(args: &GenerateArgs) -> Result<bool, Failure> {
    if args.states < 2 {
        return Err(Failure::Input("a random chain needs at least two states".into()));
    }
    let mut text = random_chain(args.states, args.seed).to_json();
    text.push('\n');
    write_out(args.out.as_deref(), &text)?;
    Ok(true)
}
