//! Task-difficulty calibration against the random-agent baseline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rank::{bonferroni_reject, mann_whitney_u, TestResult};
use super::{AnalysisError, ResponseTable};
use crate::stats::{quantile_sorted, sorted_copy};
use crate::task::{Subset, Visualisation};

/// Median reward at or above which a task is flagged too easy.
pub const TOO_EASY_MEDIAN: f64 = 9.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let s = sorted_copy(values);
        Self {
            n: s.len(),
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q3: quantile_sorted(&s, 0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub query_id: String,
    pub subset: Subset,
    pub overall: Quartiles,
    pub by_visualisation: BTreeMap<Visualisation, Quartiles>,
    pub random: Quartiles,
    /// Responses against the random agent, Bonferroni-corrected over all tasks.
    pub test: TestResult,
    pub too_easy: bool,
    pub indistinguishable: bool,
}

/// One row per query id, in first-appearance order. `random` must cover exactly
/// the query ids of `table`.
pub fn calibration_report(
    table: &ResponseTable,
    random: &BTreeMap<String, Vec<f64>>,
    alpha: f64,
) -> Result<Vec<CalibrationRow>, AnalysisError> {
    let ids = table.query_ids();
    let in_table: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let in_random: BTreeSet<&str> = random.keys().map(String::as_str).collect();
    if in_table != in_random {
        let missing: Vec<_> = in_table.symmetric_difference(&in_random).collect();
        return Err(AnalysisError::SchemaMismatch(format!(
            "responses and random baseline differ on tasks {missing:?}"
        )));
    }
    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let responses: Vec<_> = table.rows.iter().filter(|r| &r.query_id == id).collect();
        let rewards: Vec<f64> = responses.iter().map(|r| r.reward).collect();
        let mut by_vis: BTreeMap<Visualisation, Vec<f64>> = BTreeMap::new();
        for r in &responses {
            by_vis.entry(r.visualisation).or_default().push(r.reward);
        }
        let baseline = &random[id];
        if baseline.is_empty() {
            return Err(AnalysisError::InsufficientData(format!("no random-agent rewards for `{id}`")));
        }
        let overall = Quartiles::of(&rewards);
        rows.push(CalibrationRow {
            query_id: id.clone(),
            subset: responses[0].subset,
            too_easy: overall.median >= TOO_EASY_MEDIAN,
            overall,
            by_visualisation: by_vis.iter().map(|(v, x)| (*v, Quartiles::of(x))).collect(),
            random: Quartiles::of(baseline),
            test: mann_whitney_u(&rewards, baseline)?,
            indistinguishable: false,
        });
    }
    let p: Vec<f64> = rows.iter().map(|r| r.test.p_value).collect();
    for (row, rejected) in rows.iter_mut().zip(bonferroni_reject(&p, alpha)?) {
        row.test.rejected = rejected;
        row.indistinguishable = !rejected;
    }
    Ok(rows)
}
