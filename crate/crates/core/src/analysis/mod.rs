//! Analysis of exported study responses: simulated agents, rank tests, paired
//! central intervals, bootstrap effect sizes and task-difficulty calibration.

pub mod agents;
pub mod calibration;
pub mod effect;
pub mod interval;
pub mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::samples::Observability;
use crate::scoring::ScoreError;
use crate::task::{Conditioning, Quantity, QueryMeta, Subset, TaskSpec, Visualisation};

pub use agents::{optimal_response, simulate_random_agent, Agent};
pub use calibration::{calibration_report, CalibrationRow};
pub use effect::{bootstrap_effect_size, EffectScale, EffectSize};
pub use interval::{paired_central_interval, Factor, Measure, Pooling};
pub use rank::{bonferroni_reject, mann_whitney_u, mann_whitney_u_normal, TestResult};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("effect size undefined: zero scale")]
    UndefinedEffect,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One scored response, flat so it maps onto a delimiter-separated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub user_id: String,
    pub task_id: String,
    pub query_id: String,
    pub visualisation: Visualisation,
    pub observability: Observability,
    pub quantity: Quantity,
    pub conditioning: Conditioning,
    pub subset: Subset,
    pub reward: f64,
    pub response_time_s: f64,
}

impl ResponseRow {
    pub fn new(user_id: &str, task: &TaskSpec, reward: f64, response_time_s: f64) -> Self {
        Self {
            user_id: user_id.to_owned(),
            task_id: task.id.clone(),
            query_id: task.query_key().to_owned(),
            visualisation: task.visualisation,
            observability: task.query_meta.observability,
            quantity: task.query_meta.quantity,
            conditioning: task.query_meta.conditioning,
            subset: task.subset(),
            reward,
            response_time_s,
        }
    }

    pub fn query_meta(&self) -> QueryMeta {
        QueryMeta {
            observability: self.observability,
            quantity: self.quantity,
            conditioning: self.conditioning,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub rows: Vec<ResponseRow>,
}

impl ResponseTable {
    pub fn new(rows: Vec<ResponseRow>) -> Result<Self, AnalysisError> {
        for r in &rows {
            if !(0.0..=10.0).contains(&r.reward) {
                return Err(AnalysisError::InvalidArgument(format!(
                    "reward {} of {}/{} outside [0, 10]",
                    r.reward, r.user_id, r.task_id
                )));
            }
            if !(r.response_time_s >= 0.0) {
                return Err(AnalysisError::InvalidArgument(format!(
                    "negative response time for {}/{}",
                    r.user_id, r.task_id
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Query ids in first-appearance order.
    pub fn query_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.query_id.as_str()))
            .map(|r| r.query_id.clone())
            .collect()
    }
}
