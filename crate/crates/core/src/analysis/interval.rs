//! Within-subject paired differences and their central intervals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, ResponseRow, ResponseTable};
use crate::stats::{mean, quantile_sorted, sorted_copy};
use crate::task::{Subset, Visualisation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    /// HOP and BHOP against static and interactive boxplots.
    Animation,
    /// Interactive boxplot and BHOP against boxplot and HOP.
    Interactivity,
}

impl Factor {
    /// Whether `v` is on the treatment side of the factor.
    pub fn treated(self, v: Visualisation) -> bool {
        match self {
            Factor::Animation => v.is_animated(),
            Factor::Interactivity => v.is_interactive(),
        }
    }
}

impl std::str::FromStr for Factor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "animation" => Ok(Factor::Animation),
            "interactivity" => Ok(Factor::Interactivity),
            _ => Err(format!("unknown factor `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Reward,
    ResponseTime,
}

impl Measure {
    pub fn of(self, row: &ResponseRow) -> f64 {
        match self {
            Measure::Reward => row.reward,
            Measure::ResponseTime => row.response_time_s,
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reward" => Ok(Measure::Reward),
            "time" | "response-time" | "response_time" => Ok(Measure::ResponseTime),
            _ => Err(format!("unknown measure `{s}`")),
        }
    }
}

/// How paired differences are combined before taking quantiles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Pair within each (user, task), then pool all differences.
    #[default]
    StratifiedByTask,
    /// Average each user's differences first.
    PerUserMean,
}

/// Treated and control measurements of one participant and query.
type Cell = (Vec<f64>, Vec<f64>);

/// Treated minus control differences, one per (user, query) with both levels
/// present. Multiple responses on one side are averaged. `swap` reverses the sides.
pub fn paired_differences(
    table: &ResponseTable,
    factor: Factor,
    measure: Measure,
    subset: Subset,
    pooling: Pooling,
    swap: bool,
) -> Vec<f64> {
    let mut cells: BTreeMap<(&str, &str), Cell> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.subset == subset) {
        let cell = cells.entry((row.user_id.as_str(), row.query_id.as_str())).or_default();
        if factor.treated(row.visualisation) != swap {
            cell.0.push(measure.of(row));
        } else {
            cell.1.push(measure.of(row));
        }
    }
    let pairs = cells
        .into_iter()
        .filter(|(_, (a, b))| !a.is_empty() && !b.is_empty())
        .map(|((user, _), (a, b))| (user, mean(&a) - mean(&b)));
    match pooling {
        Pooling::StratifiedByTask => pairs.map(|(_, d)| d).collect(),
        Pooling::PerUserMean => {
            let mut by_user: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (user, d) in pairs {
                by_user.entry(user).or_default().push(d);
            }
            by_user.values().map(|d| mean(d)).collect()
        }
    }
}

/// Type-7 quantiles at `(1 - level) / 2` and `(1 + level) / 2`.
pub fn central_interval(values: &[f64], level: f64) -> Result<(f64, f64), AnalysisError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    if values.is_empty() {
        return Err(AnalysisError::InsufficientData("no values".into()));
    }
    let sorted = sorted_copy(values);
    Ok((
        quantile_sorted(&sorted, (1.0 - level) / 2.0),
        quantile_sorted(&sorted, (1.0 + level) / 2.0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedInterval {
    pub lo: f64,
    pub hi: f64,
    pub n_pairs: usize,
}

pub fn paired_central_interval(
    table: &ResponseTable,
    factor: Factor,
    measure: Measure,
    subset: Subset,
    level: f64,
    pooling: Pooling,
) -> Result<PairedInterval, AnalysisError> {
    let diffs = paired_differences(table, factor, measure, subset, pooling, false);
    if diffs.is_empty() {
        return Err(AnalysisError::InsufficientData(format!(
            "no paired {factor:?} observations in the {subset:?} subset"
        )));
    }
    let (lo, hi) = central_interval(&diffs, level)?;
    Ok(PairedInterval {
        lo,
        hi,
        n_pairs: diffs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::Observability;
    use crate::task::{Conditioning, Quantity};

    fn row(user: &str, query: &str, v: Visualisation, reward: f64) -> ResponseRow {
        ResponseRow {
            user_id: user.into(),
            task_id: format!("{query}-{}", v.as_str()),
            query_id: query.into(),
            visualisation: v,
            observability: Observability::Observable,
            quantity: Quantity::Value,
            conditioning: Conditioning::Posterior,
            subset: Subset::Comprehension,
            reward,
            response_time_s: reward / 2.0,
        }
    }

    #[test]
    fn uniform_grid_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(central_interval(&v, 0.5).unwrap(), (25.75, 75.25));
    }

    #[test]
    fn pairs_form_per_user_and_query() {
        let t = ResponseTable::new(vec![
            row("u1", "q1", Visualisation::Hop, 8.0),
            row("u1", "q1", Visualisation::Boxplot, 5.0),
            row("u1", "q2", Visualisation::Hop, 1.0),
            row("u2", "q1", Visualisation::Bhop, 4.0),
            row("u2", "q1", Visualisation::InteractiveBoxplot, 6.0),
        ])
        .unwrap();
        let mut d = paired_differences(
            &t,
            Factor::Animation,
            Measure::Reward,
            Subset::Comprehension,
            Pooling::StratifiedByTask,
            false,
        );
        d.sort_by(f64::total_cmp);
        assert_eq!(d, vec![-2.0, 3.0]);
        let i = paired_central_interval(&t, Factor::Animation, Measure::ResponseTime, Subset::Comprehension, 0.5, Pooling::default()).unwrap();
        assert_eq!(i.n_pairs, 2);
        assert!(paired_central_interval(&t, Factor::Animation, Measure::Reward, Subset::Rationality, 0.5, Pooling::default()).is_err());
    }

    #[test]
    fn per_user_mean_pooling() {
        let t = ResponseTable::new(vec![
            row("u1", "q1", Visualisation::Hop, 8.0),
            row("u1", "q1", Visualisation::Boxplot, 4.0),
            row("u1", "q2", Visualisation::Hop, 2.0),
            row("u1", "q2", Visualisation::Boxplot, 2.0),
        ])
        .unwrap();
        let d = paired_differences(&t, Factor::Animation, Measure::Reward, Subset::Comprehension, Pooling::PerUserMean, false);
        assert_eq!(d, vec![2.0]);
    }
}
