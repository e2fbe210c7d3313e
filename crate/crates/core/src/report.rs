//! Serializable views of the analysis, with state labels in place of indices.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chain::{ChainDoc, ChainSpec};
use crate::hierarchy::{ConditionReport, Hierarchy, Level};
use crate::monomial::Monomial;
use crate::validation::ExponentFit;

pub const SCHEMA_VERSION: u32 = 1;

/// `sha256:<hex>` of the canonical JSON form of the chain.
pub fn spec_digest(spec: &ChainSpec) -> String {
    let hash = Sha256::digest(spec.to_json().as_bytes());
    format!("sha256:{hash:x}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDoc {
    pub timescale: Monomial,
    pub valleys: Vec<Vec<String>>,
    pub delta: Vec<String>,
    /// Every ordered pair of distinct valleys, zero rates included.
    pub rates: Vec<RateEntry>,
    /// Valley index to state label to limit weight.
    pub weights: BTreeMap<String, BTreeMap<String, f64>>,
    pub merged_from: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyDoc {
    pub alpha: Monomial,
    pub levels: Vec<LevelDoc>,
    pub terminal_class: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn labels(spec: &ChainSpec, states: &[usize]) -> Vec<String> {
    states.iter().map(|&s| spec.label(s).to_string()).collect()
}

fn level_doc(spec: &ChainSpec, level: &Level) -> LevelDoc {
    let p = level.partition.len();
    let rates = (0..p)
        .flat_map(|x| (0..p).filter(move |&y| y != x).map(move |y| (x, y)))
        .map(|(from, to)| RateEntry {
            from,
            to,
            rate: level.reduced_rates.get(from, to),
        })
        .collect();
    let weights = level
        .partition
        .valleys
        .iter()
        .enumerate()
        .map(|(x, valley)| {
            let inner = valley
                .iter()
                .enumerate()
                .map(|(k, &s)| (spec.label(s).to_string(), level.weight(x, k)))
                .collect();
            (x.to_string(), inner)
        })
        .collect();
    LevelDoc {
        timescale: level.timescale,
        valleys: level.partition.valleys.iter().map(|v| labels(spec, v)).collect(),
        delta: labels(spec, &level.partition.delta),
        rates,
        weights,
        merged_from: level.merged_from.clone(),
    }
}

pub fn hierarchy_doc(spec: &ChainSpec, hierarchy: &Hierarchy) -> HierarchyDoc {
    HierarchyDoc {
        alpha: hierarchy.alpha,
        levels: hierarchy.levels.iter().map(|l| level_doc(spec, l)).collect(),
        terminal_class: labels(spec, &hierarchy.terminal_class),
        diagnostic: hierarchy.diagnostic.clone(),
    }
}

/// Outcome of the exponent fits run alongside an analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub grid: Vec<f64>,
    pub quantities: usize,
    pub failed: Vec<String>,
    pub worst_slope_gap: f64,
    pub worst_coeff_gap: f64,
    pub fits: Vec<ExponentFit>,
}

impl OracleSummary {
    pub fn new(grid: &[f64], fits: Vec<ExponentFit>) -> Self {
        OracleSummary {
            grid: grid.to_vec(),
            quantities: fits.len(),
            failed: fits.iter().filter(|f| !f.passed).map(|f| f.quantity.clone()).collect(),
            worst_slope_gap: fits.iter().map(|f| (f.slope - f.exponent).abs()).fold(0.0, f64::max),
            worst_coeff_gap: fits.iter().map(|f| (f.coeff_ratio - 1.0).abs()).fold(0.0, f64::max),
            fits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub spec_digest: String,
    pub spec: ChainDoc,
    pub hierarchy: HierarchyDoc,
    pub conditions: Vec<ConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
}

impl AnalysisReport {
    pub fn new(
        tool_version: &str,
        spec: &ChainSpec,
        hierarchy: &Hierarchy,
        conditions: Vec<ConditionReport>,
        oracle: Option<OracleSummary>,
    ) -> Self {
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            tool_version: tool_version.to_string(),
            spec_digest: spec_digest(spec),
            spec: spec.to_doc(),
            hierarchy: hierarchy_doc(spec, hierarchy),
            conditions,
            oracle,
        }
    }

    pub fn passed(&self) -> bool {
        self.conditions.iter().all(ConditionReport::passed) && self.oracle.as_ref().is_none_or(|o| o.failed.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::fixtures;
    use crate::hierarchy::{check_all, full_hierarchy};

    #[test]
    fn chain_e_document() {
        let spec = fixtures::chain_e();
        let h = full_hierarchy(&spec).unwrap();
        let value = serde_json::to_value(hierarchy_doc(&spec, &h)).unwrap();
        assert_eq!(value["levels"][0]["valleys"], serde_json::json!([["1"], ["3"], ["5"]]));
        assert_eq!(value["levels"][0]["delta"], serde_json::json!(["2", "4"]));
        assert_eq!(
            value["levels"][1]["timescale"],
            serde_json::json!({"coeff": 2.0, "exponent": "-2"})
        );
        assert_eq!(value["levels"][0]["rates"].as_array().unwrap().len(), 6);
        assert_eq!(
            value["levels"][0]["rates"][0],
            serde_json::json!({"from": 0, "to": 1, "rate": 0.5})
        );
        assert_eq!(
            value["levels"][1]["weights"]["0"],
            serde_json::json!({"1": 0.5, "3": 0.5})
        );
        assert_eq!(value["terminal_class"], serde_json::json!(["1", "3"]));
        assert!(value.get("diagnostic").is_none());
    }

    #[test]
    fn report_is_self_contained() {
        let spec = fixtures::chain_b();
        let h = full_hierarchy(&spec).unwrap();
        let report = AnalysisReport::new("0.0.0", &spec, &h, check_all(&spec, &h).unwrap(), None);
        assert!(report.passed());
        assert_eq!(report.hierarchy.diagnostic.as_deref(), Some("no valleys"));
        let rebuilt = ChainSpec::from_doc(&report.spec).unwrap();
        assert_eq!(spec_digest(&rebuilt), report.spec_digest);
        assert!(report.spec_digest.starts_with("sha256:") && report.spec_digest.len() == 71);
        assert_ne!(spec_digest(&fixtures::chain_c()), report.spec_digest);
    }
}
