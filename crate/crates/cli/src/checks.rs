//! Calibrated tolerances for the simulation checks and their verdicts.

use serde::Serialize;
use valleyscope_core::hierarchy::Level;
use valleyscope_core::simulate::{Coverage, DeltaOccupation, ExitStats, GeneratorEstimate};

/// Largest KS distance between exit times and the fitted exponential.
pub const KS_TOL: f64 = 0.05;
/// Accepted band for the mean exit time over its predicted value.
pub const MEAN_BAND: (f64, f64) = (0.9, 1.1);
/// A valley with vanishing exit rate may lose at most this share of replicas...
pub const FAST_EXIT_SHARE: f64 = 0.01;
/// ...within this many time-scale units.
pub const FAST_EXIT_WINDOW: f64 = 1.0;
/// Largest separating-set share for epsilon at or below 1e-3, and above it.
pub const DELTA_TOL_FINE: f64 = 0.01;
pub const DELTA_TOL_COARSE: f64 = 0.05;
/// Relative error allowed on positive reduced rates.
pub const GENERATOR_REL: f64 = 0.15;
/// Largest estimate allowed for a vanishing reduced rate.
pub const GENERATOR_ZERO: f64 = 0.02;
/// Smallest accepted probability of covering a valley before leaving it.
pub const COVERAGE_MIN: f64 = 0.95;

pub fn delta_tolerance(eps: f64) -> f64 {
    if eps <= 1e-3 {
        DELTA_TOL_FINE
    } else {
        DELTA_TOL_COARSE
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitVerdict {
    pub valley: Vec<String>,
    pub exit_rate: f64,
    pub passed: bool,
    pub reason: String,
    pub stats: ExitStats,
}

pub fn judge_exit(valley: Vec<String>, level: &Level, stats: ExitStats) -> ExitVerdict {
    let exit_rate = level.reduced_rates.exit_rate(stats.valley);
    let ks = stats.ks.unwrap_or(f64::INFINITY);
    let (passed, reason) = if stats.completed == 0 {
        (exit_rate == 0.0, "no replica left the valley".to_string())
    } else if ks > KS_TOL {
        (false, format!("KS distance {ks:.4} above {KS_TOL}"))
    } else if exit_rate > 0.0 {
        let ratio = stats.mean_ratio.unwrap_or(f64::NAN);
        if (MEAN_BAND.0..=MEAN_BAND.1).contains(&ratio) {
            (true, format!("KS {ks:.4}, mean ratio {ratio:.4}"))
        } else {
            (
                false,
                format!("mean ratio {ratio:.4} outside [{}, {}]", MEAN_BAND.0, MEAN_BAND.1),
            )
        }
    } else {
        let fast = stats.exit_times.iter().filter(|&&t| t <= FAST_EXIT_WINDOW).count();
        let share = fast as f64 / stats.replicas as f64;
        if share <= FAST_EXIT_SHARE {
            (
                true,
                format!(
                    "KS {ks:.4}, {:.2}% left within {FAST_EXIT_WINDOW} time-scale unit",
                    100.0 * share
                ),
            )
        } else {
            (
                false,
                format!(
                    "{:.2}% left within {FAST_EXIT_WINDOW} time-scale unit despite a vanishing rate",
                    100.0 * share
                ),
            )
        }
    };
    ExitVerdict {
        valley,
        exit_rate,
        passed,
        reason,
        stats,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaVerdict {
    pub tolerance: f64,
    pub passed: bool,
    pub stats: DeltaOccupation,
}

pub fn judge_delta(eps: f64, stats: DeltaOccupation) -> DeltaVerdict {
    let tolerance = delta_tolerance(eps);
    DeltaVerdict {
        tolerance,
        passed: stats.fraction <= tolerance,
        stats,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageVerdict {
    pub valley: Vec<String>,
    pub threshold: f64,
    pub passed: bool,
    pub stats: Coverage,
}

pub fn judge_coverage(valley: Vec<String>, stats: Coverage) -> CoverageVerdict {
    CoverageVerdict {
        valley,
        threshold: COVERAGE_MIN,
        passed: stats.truncated == 0 && stats.probability >= COVERAGE_MIN,
        stats,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateComparison {
    pub from: usize,
    pub to: usize,
    pub predicted: f64,
    pub estimated: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorVerdict {
    pub relative_tolerance: f64,
    pub zero_tolerance: f64,
    pub insufficient: Vec<usize>,
    pub entries: Vec<RateComparison>,
    pub passed: bool,
    pub estimate: GeneratorEstimate,
}

pub fn rate_matches(predicted: f64, estimated: f64) -> bool {
    if predicted > 0.0 {
        (estimated - predicted).abs() <= GENERATOR_REL * predicted
    } else {
        estimated <= GENERATOR_ZERO
    }
}

pub fn judge_generator(level: &Level, estimate: GeneratorEstimate) -> GeneratorVerdict {
    let p = level.partition.len();
    let mut entries = Vec::new();
    for x in 0..p {
        for y in (0..p).filter(|&y| y != x) {
            let predicted = level.reduced_rates.get(x, y);
            let estimated = estimate.rates[x].as_ref().map(|row| row[y]);
            entries.push(RateComparison {
                from: x,
                to: y,
                predicted,
                estimated,
                passed: estimated.is_some_and(|e| rate_matches(predicted, e)),
            });
        }
    }
    GeneratorVerdict {
        relative_tolerance: GENERATOR_REL,
        zero_tolerance: GENERATOR_ZERO,
        insufficient: estimate.insufficient(),
        passed: entries.iter().all(|e| e.passed),
        entries,
        estimate,
    }
}
