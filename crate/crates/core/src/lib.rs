//! Leading-order metastability analysis of finite Markov chains whose jump
//! rates are monomials `c * eps^q` in a small parameter.
//!
//! The crate computes the hierarchy of metastable time-scales, valley
//! partitions and reduced chains exactly at leading order, and ships the
//! numeric and Monte-Carlo machinery used to check it at finite `eps`.

pub mod chain;
pub mod cycles;
pub mod error;
pub mod hierarchy;
pub mod linalg;
pub mod monomial;
pub mod potential;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod trace;
pub mod validation;

pub use chain::{ChainDoc, ChainSpec, NumericChain};
pub use cycles::WeightedCycle;
pub use error::{Error, Result};
pub use hierarchy::{ConditionReport, Hierarchy, Level, Partition, ReducedRates};
pub use monomial::{Limit, MaybeZero, Monomial, Order};
pub use potential::{ConductanceTable, MeasureTable};
pub use report::AnalysisReport;
pub use simulate::{ExitStats, SimOptions, Trajectory};
pub use trace::{RateTable, RateValue};
