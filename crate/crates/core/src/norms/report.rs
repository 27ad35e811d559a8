use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One row of a norm breakdown: a shell `k`, a modulation index `j`, a
/// low-frequency sub-index, or a named component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<i32>,
    pub value: f64,
}

impl BreakdownRow {
    pub fn named(label: impl Into<String>, value: f64) -> Self {
        Self {
            label: label.into(),
            k: None,
            j: None,
            value,
        }
    }

    pub fn shell(k: i32, value: f64) -> Self {
        Self {
            label: format!("k={k}"),
            k: Some(k),
            j: None,
            value,
        }
    }

    pub fn band(j: i32, value: f64) -> Self {
        Self {
            label: format!("j={j}"),
            k: None,
            j: Some(j),
            value,
        }
    }
}

/// Outcome of the splitting optimizer behind an infimum norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerStatus {
    pub iterations: usize,
    pub converged: bool,
    /// Relative decrease of the objective over the last iteration.
    pub last_rel_decrease: f64,
    /// Objective at the splitting that puts everything in the first part.
    pub baseline_a: f64,
    /// Objective at the splitting that puts everything in the second part.
    pub baseline_b: f64,
}

/// Value of a (possibly infimum-defined) norm with its decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub name: String,
    pub value: f64,
    pub breakdown: Vec<BreakdownRow>,
    /// Contribution discarded by truncating an infinite sum, as an upper bound.
    pub tail: f64,
    /// Present when `value` is an upper bound on an infimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerStatus>,
}

impl NormReport {
    pub fn new(name: impl Into<String>, value: f64, breakdown: Vec<BreakdownRow>) -> Self {
        Self {
            name: name.into(),
            value,
            breakdown,
            tail: 0.0,
            optimizer: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Breakdown as CSV with header `label,k,j,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,k,j,value\n");
        let opt = |v: Option<i32>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.breakdown {
            let _ = writeln!(
                out,
                "{},{},{},{:.17e}",
                row.label,
                opt(row.k),
                opt(row.j),
                row.value
            );
        }
        out
    }
}

/// A splitting `f = part_a + part_b` and the objective it achieves.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDecomposition<T> {
    pub part_a: T,
    pub part_b: T,
    pub objective: f64,
}
