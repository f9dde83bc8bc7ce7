//! Dispatch from a task and a raw response to a scored record.

use serde::{Deserialize, Serialize};

use super::divergence::{absolute_bias, binary_criterion, kl_divergence, symmetric_kl};
use super::multibet::{entailed_distribution, MultiBetState};
use super::reward::reward;
use super::utility::expected_utility;
use super::{ScoreError, BERNOULLI_FLOOR, SMOOTHING};
use crate::distribution::CategoricalDistribution;
use crate::samples::{Direction, JointSamples};
use crate::task::{AnswerInput, ObjectiveKind, TaskSpec, Target};

/// Final widget state submitted by a participant or agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResponsePayload {
    Slider { value: f64 },
    Multibet { chips: Vec<u32> },
}

/// What the model considers the best answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptimalResponse {
    Distribution(CategoricalDistribution),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub objective: ObjectiveKind,
    pub objective_value: f64,
    pub reward: f64,
    pub entailed: CategoricalDistribution,
    pub optimal: OptimalResponse,
}

fn clamp_bernoulli(p: f64) -> f64 {
    p.clamp(BERNOULLI_FLOOR, 1.0 - BERNOULLI_FLOOR)
}

fn compare(
    kind: ObjectiveKind,
    tolerance: Option<f64>,
    p_star: &CategoricalDistribution,
    p_hat: &CategoricalDistribution,
) -> Result<f64, ScoreError> {
    match kind {
        ObjectiveKind::Kl => kl_divergence(p_star, p_hat),
        ObjectiveKind::SymmetricKl => symmetric_kl(p_star, p_hat),
        ObjectiveKind::AbsoluteBias => absolute_bias(p_star, p_hat),
        ObjectiveKind::Binary => {
            let tol = tolerance.ok_or_else(|| ScoreError::InvalidResponse("binary criterion without tolerance".into()))?;
            Ok(f64::from(binary_criterion(p_star, p_hat, tol)?))
        }
        ObjectiveKind::ExpectedUtility => Err(ScoreError::InvalidResponse(
            "expected utility is only defined for decision targets".into(),
        )),
    }
}

fn uses_divergence(kind: ObjectiveKind) -> bool {
    matches!(kind, ObjectiveKind::Kl | ObjectiveKind::SymmetricKl)
}

/// Scores a pair of confidences `p*` and `p^`.
fn score_bernoulli(task: &TaskSpec, p_star: f64, p_hat: f64) -> Result<ScoreRecord, ScoreError> {
    let kind = task.objective.kind;
    let (a, b) = if uses_divergence(kind) {
        (clamp_bernoulli(p_star), clamp_bernoulli(p_hat))
    } else {
        (p_star, p_hat)
    };
    let optimal = CategoricalDistribution::bernoulli(a)?;
    let entailed = CategoricalDistribution::bernoulli(b)?;
    let value = compare(kind, task.objective.tolerance, &optimal, &entailed)?;
    Ok(ScoreRecord {
        objective: kind,
        objective_value: value,
        reward: reward(kind, value, &[]),
        entailed,
        optimal: OptimalResponse::Distribution(optimal),
    })
}

fn slider_value(task: &TaskSpec, payload: &ResponsePayload) -> Result<f64, ScoreError> {
    let (min, max) = match task.answer_input {
        AnswerInput::Slider { min, max, .. } => (min, max),
        AnswerInput::Multibet { .. } => {
            return Err(ScoreError::InvalidResponse(format!("task `{}` expects a multibet answer", task.id)))
        }
    };
    match *payload {
        ResponsePayload::Slider { value } if value.is_finite() && value >= min - 1e-9 && value <= max + 1e-9 => {
            Ok(value.clamp(min, max))
        }
        ResponsePayload::Slider { value } => Err(ScoreError::InvalidResponse(format!(
            "slider value {value} outside [{min}, {max}]"
        ))),
        ResponsePayload::Multibet { .. } => Err(ScoreError::InvalidResponse(format!(
            "task `{}` expects a slider answer",
            task.id
        ))),
    }
}

fn multibet_state(task: &TaskSpec, payload: &ResponsePayload) -> Result<MultiBetState, ScoreError> {
    let (options, budget) = match task.answer_input {
        AnswerInput::Multibet { options, chips } => (options, chips),
        AnswerInput::Slider { .. } => {
            return Err(ScoreError::InvalidResponse(format!("task `{}` expects a slider answer", task.id)))
        }
    };
    match payload {
        ResponsePayload::Multibet { chips } if chips.len() == options => {
            let state = MultiBetState::from_chips(chips.clone(), budget)?;
            if state.placed() == 0 {
                return Err(ScoreError::EmptyResponse);
            }
            Ok(state)
        }
        ResponsePayload::Multibet { chips } => Err(ScoreError::InvalidResponse(format!(
            "{} chip columns for {options} options",
            chips.len()
        ))),
        ResponsePayload::Slider { .. } => Err(ScoreError::InvalidResponse(format!(
            "task `{}` expects a multibet answer",
            task.id
        ))),
    }
}

fn identity_window(js: &JointSamples, candidates: &[String], window: Option<f64>) -> Result<f64, ScoreError> {
    match window {
        Some(w) => Ok(w),
        None => Ok(js.default_identity_window(candidates)?),
    }
}

/// Posterior mass of `focus` given `x = observed`, zero when no draw lies in the window.
fn focus_mass(js: &JointSamples, candidates: &[String], focus: usize, observed: f64, window: f64) -> Result<f64, ScoreError> {
    match js.identity_posterior(candidates, observed, window) {
        Ok(d) => Ok(d.probs()[focus]),
        Err(crate::samples::SampleError::EmptyConditionalSupport) => Ok(0.0),
        Err(e) => Err(e.into()),
    }
}

/// Scores `payload` for `task` against the model samples `js`. Task conditions are
/// applied to `js` first.
pub fn evaluate_response(task: &TaskSpec, payload: &ResponsePayload, js: &JointSamples) -> Result<ScoreRecord, ScoreError> {
    let conditioned;
    let js = if task.objective.conditions.is_empty() {
        js
    } else {
        conditioned = js.filter(&task.objective.conditions)?;
        &conditioned
    };
    let kind = task.objective.kind;
    match &task.objective.target {
        Target::ValueAtConfidence { variable, confidence } => {
            let tau = slider_value(task, payload)?;
            let p_hat = js.prob_event(variable, tau, Direction::AtLeast)?;
            score_bernoulli(task, *confidence, p_hat)
        }
        Target::Confidence {
            variable,
            threshold,
            direction,
        } => {
            let p_hat = slider_value(task, payload)?;
            let p_star = js.prob_event(variable, *threshold, *direction)?;
            score_bernoulli(task, p_star, p_hat)
        }
        Target::IdentityPosterior {
            candidates,
            observed,
            window,
            focus,
        } => {
            let w = identity_window(js, candidates, *window)?;
            let p_star = js.identity_posterior(candidates, *observed, w)?;
            if let (AnswerInput::Slider { .. }, Some(f)) = (&task.answer_input, focus) {
                let p_hat = slider_value(task, payload)?;
                let p = *p_star
                    .probs()
                    .get(*f)
                    .ok_or_else(|| ScoreError::InvalidResponse(format!("focus {f} outside the candidates")))?;
                return score_bernoulli(task, p, p_hat);
            }
            let state = multibet_state(task, payload)?;
            let (optimal, entailed) = if uses_divergence(kind) {
                let n = candidates.len() as f64;
                let m = f64::from(state.budget());
                let smoothed = p_star
                    .probs()
                    .iter()
                    .map(|p| (m * p + SMOOTHING) / (m + n * SMOOTHING))
                    .collect();
                (
                    CategoricalDistribution::new(candidates.clone(), smoothed)?,
                    entailed_distribution(&state, candidates, SMOOTHING)?,
                )
            } else {
                (p_star, entailed_distribution(&state, candidates, 0.0)?)
            };
            let value = compare(kind, task.objective.tolerance, &optimal, &entailed)?;
            Ok(ScoreRecord {
                objective: kind,
                objective_value: value,
                reward: reward(kind, value, &[]),
                entailed,
                optimal: OptimalResponse::Distribution(optimal),
            })
        }
        Target::MostLikelyValue {
            candidates,
            focus,
            window,
        } => {
            let x_hat = slider_value(task, payload)?;
            let w = identity_window(js, candidates, *window)?;
            let AnswerInput::Slider { min, step, .. } = task.answer_input else {
                unreachable!("slider_value accepted the answer input")
            };
            let positions = task.answer_input.slider_positions().unwrap_or(1);
            let mut best = 0.0f64;
            for i in 0..positions {
                best = best.max(focus_mass(js, candidates, *focus, min + i as f64 * step, w)?);
            }
            let p_hat = focus_mass(js, candidates, *focus, x_hat, w)?;
            score_bernoulli(task, best, p_hat)
        }
        Target::Decision { options, utility } => {
            let state = multibet_state(task, payload)?;
            let choice = entailed_distribution(&state, options, 0.0)?;
            let values = utility.option_values(js)?;
            let value = expected_utility(js, utility, &choice)?;
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(ScoreRecord {
                objective: ObjectiveKind::ExpectedUtility,
                objective_value: value,
                reward: reward(ObjectiveKind::ExpectedUtility, value, &values),
                entailed: choice,
                optimal: OptimalResponse::Value(best),
            })
        }
    }
}
