//! Simulated respondents: the random baseline and model-based agents.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, ResponseRow, ResponseTable};
use crate::samples::{JointSamples, SampleError};
use crate::scoring::evaluate::{evaluate_response, OptimalResponse, ResponsePayload};
use crate::scoring::ScoreError;
use crate::task::{AnswerInput, ObjectiveKind, TaskSpec, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    /// Uniform over the permissible responses.
    Random,
    /// Best response under the model.
    Optimal,
    /// Best response under a model collapsed to its means.
    MeanOnly,
    /// Best response with small slider offsets and occasional misplaced chips.
    NearOptimal,
}

impl std::str::FromStr for Agent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Agent::Random),
            "optimal" => Ok(Agent::Optimal),
            "mean-only" | "mean_only" => Ok(Agent::MeanOnly),
            "near-optimal" | "near_optimal" => Ok(Agent::NearOptimal),
            _ => Err(format!("unknown agent `{s}`")),
        }
    }
}

/// Chip counts summing to `m` over `n` options, uniform over all compositions.
pub fn random_composition(n: usize, m: u32, rng: &mut impl Rng) -> Vec<u32> {
    if n == 1 {
        return vec![m];
    }
    let slots = m as usize + n - 1;
    let mut bars = sample(rng, slots, n - 1).into_vec();
    bars.sort_unstable();
    let mut chips = Vec::with_capacity(n);
    let mut prev = 0usize;
    for (k, &bar) in bars.iter().enumerate() {
        chips.push((bar - prev - usize::from(k > 0)) as u32);
        prev = bar;
    }
    chips.push((slots - 1 - prev) as u32);
    chips
}

fn slider_grid(min: f64, max: f64, step: f64, positions: usize) -> impl Iterator<Item = f64> {
    (0..positions).map(move |i| (min + i as f64 * step).min(max))
}

/// A response drawn uniformly from the task's response space: a slider grid
/// point, or a composition placing every chip.
pub fn random_response(task: &TaskSpec, rng: &mut impl Rng) -> ResponsePayload {
    match task.answer_input {
        AnswerInput::Slider { min, max, step } => {
            let positions = task.answer_input.slider_positions().unwrap_or(1);
            let i = rng.random_range(0..positions);
            ResponsePayload::Slider {
                value: (min + i as f64 * step).min(max),
            }
        }
        AnswerInput::Multibet { options, chips } => ResponsePayload::Multibet {
            chips: random_composition(options, chips, rng),
        },
    }
}

/// Rewards of `n` random responses; deterministic per seed.
pub fn simulate_random_agent(task: &TaskSpec, js: &JointSamples, n: usize, seed: u64) -> Result<Vec<f64>, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let payload = random_response(task, &mut rng);
            Ok(evaluate_response(task, &payload, js)?.reward)
        })
        .collect()
}

/// Largest-remainder apportionment of `m` chips to `probs`.
pub fn apportion(probs: &[f64], m: u32) -> Vec<u32> {
    let raw: Vec<f64> = probs.iter().map(|p| p * f64::from(m)).collect();
    let mut chips: Vec<u32> = raw.iter().map(|r| r.floor() as u32).collect();
    let mut left = m.saturating_sub(chips.iter().sum());
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        chips[i] += 1;
        left -= 1;
    }
    chips
}

fn one_hot_chips(n: usize, best: usize, m: u32) -> Vec<u32> {
    let mut chips = vec![0; n];
    chips[best] = m;
    chips
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn conditioned<'a>(task: &TaskSpec, js: &'a JointSamples, buf: &'a mut Option<JointSamples>) -> Result<&'a JointSamples, AnalysisError> {
    if task.objective.conditions.is_empty() {
        return Ok(js);
    }
    *buf = Some(js.filter(&task.objective.conditions).map_err(ScoreError::from)?);
    Ok(buf.as_ref().expect("just set"))
}

/// The response maximizing the reward under `js`. Sliders are searched over their
/// grid; MultiBet chips go to the best option, or are apportioned to the identity
/// posterior.
pub fn optimal_response(task: &TaskSpec, js: &JointSamples) -> Result<ResponsePayload, AnalysisError> {
    let mut buf = None;
    let cjs = conditioned(task, js, &mut buf)?;
    match (&task.answer_input, &task.objective.target) {
        (AnswerInput::Multibet { options, chips }, Target::Decision { utility, .. }) => {
            let values = utility.option_values(cjs).map_err(AnalysisError::Score)?;
            Ok(ResponsePayload::Multibet {
                chips: one_hot_chips(*options, argmax(&values), *chips),
            })
        }
        (
            AnswerInput::Multibet { options, chips },
            Target::IdentityPosterior {
                candidates,
                observed,
                window,
                ..
            },
        ) => {
            let w = match window {
                Some(w) => *w,
                None => cjs.default_identity_window(candidates).map_err(ScoreError::from)?,
            };
            match cjs.identity_posterior(candidates, *observed, w) {
                Ok(p) => Ok(ResponsePayload::Multibet {
                    chips: apportion(p.probs(), *chips),
                }),
                Err(SampleError::EmptyConditionalSupport) => {
                    let distance: Vec<f64> = candidates
                        .iter()
                        .map(|c| Ok(-(crate::stats::mean(&cjs.column(c)?) - observed).abs()))
                        .collect::<Result<_, SampleError>>()
                        .map_err(ScoreError::from)?;
                    Ok(ResponsePayload::Multibet {
                        chips: one_hot_chips(*options, argmax(&distance), *chips),
                    })
                }
                Err(e) => Err(ScoreError::from(e).into()),
            }
        }
        (AnswerInput::Multibet { .. }, _) => Err(AnalysisError::InvalidArgument(format!(
            "task `{}` pairs a multibet with a slider objective",
            task.id
        ))),
        (AnswerInput::Slider { min, max, step }, target) => {
            let positions = task.answer_input.slider_positions().unwrap_or(1);
            if let Target::MostLikelyValue {
                candidates,
                focus,
                window,
            } = target
            {
                let w = match window {
                    Some(w) => *w,
                    None => cjs.default_identity_window(candidates).map_err(ScoreError::from)?,
                };
                let mut best = (*min, -1.0);
                for x in slider_grid(*min, *max, *step, positions) {
                    if let Ok(p) = cjs.identity_posterior(candidates, x, w) {
                        if p.probs()[*focus] > best.1 {
                            best = (x, p.probs()[*focus]);
                        }
                    }
                }
                return Ok(ResponsePayload::Slider { value: best.0 });
            }
            let mut best: Option<(f64, f64, f64)> = None;
            for x in slider_grid(*min, *max, *step, positions) {
                let payload = ResponsePayload::Slider { value: x };
                let r = match evaluate_response(task, &payload, js) {
                    Ok(r) => r,
                    Err(ScoreError::EmptyConditionalSupport) => continue,
                    Err(e) => return Err(e.into()),
                };
                let badness = match (&r.optimal, task.objective.kind) {
                    (OptimalResponse::Distribution(d), ObjectiveKind::Binary) => (d.probs()[0] - r.entailed.probs()[0]).abs(),
                    _ => r.objective_value,
                };
                if best.is_none_or(|(_, reward, bad)| r.reward > reward || (r.reward == reward && badness < bad)) {
                    best = Some((x, r.reward, badness));
                }
            }
            Ok(ResponsePayload::Slider {
                value: best.map_or((min + max) / 2.0, |b| b.0),
            })
        }
    }
}

/// Best response when every variable is replaced by its (conditional) mean.
pub fn mean_only_response(task: &TaskSpec, js: &JointSamples) -> Result<ResponsePayload, AnalysisError> {
    let mut buf = None;
    let collapsed = conditioned(task, js, &mut buf)?.collapse_to_means();
    let mut blind = task.clone();
    blind.objective.conditions.clear();
    optimal_response(&blind, &collapsed)
}

/// Optimal response jittered by up to two slider steps, or with one chip moved
/// to a random option a quarter of the time.
pub fn near_optimal_response(task: &TaskSpec, js: &JointSamples, rng: &mut impl Rng) -> Result<ResponsePayload, AnalysisError> {
    Ok(match optimal_response(task, js)? {
        ResponsePayload::Slider { value } => {
            let AnswerInput::Slider { min, max, step } = task.answer_input else {
                unreachable!("slider payload for a slider task")
            };
            let offset = rng.random_range(-2i32..=2);
            ResponsePayload::Slider {
                value: (value + f64::from(offset) * step).clamp(min, max),
            }
        }
        ResponsePayload::Multibet { mut chips } => {
            if chips.len() > 1 && rng.random_bool(0.25) {
                let from = argmax(&chips.iter().map(|&c| f64::from(c)).collect::<Vec<_>>());
                let to = (from + rng.random_range(1..chips.len())) % chips.len();
                chips[from] -= 1;
                chips[to] += 1;
            }
            ResponsePayload::Multibet { chips }
        }
    })
}

impl Agent {
    pub fn respond(self, task: &TaskSpec, js: &JointSamples, rng: &mut impl Rng) -> Result<ResponsePayload, AnalysisError> {
        match self {
            Agent::Random => Ok(random_response(task, rng)),
            Agent::Optimal => optimal_response(task, js),
            Agent::MeanOnly => mean_only_response(task, js),
            Agent::NearOptimal => near_optimal_response(task, js, rng),
        }
    }
}

/// Plays every participant's task sequence with `agent`, scoring each response
/// against the model named by the task. Participant `i` uses stream `i` of the
/// seeded generator. Response times are drawn uniformly from 5 to 60 seconds.
pub fn simulate_participants(
    agent: Agent,
    participants: &[(String, Vec<TaskSpec>)],
    models: &HashMap<String, JointSamples>,
    seed: u64,
) -> Result<ResponseTable, AnalysisError> {
    let mut rows = Vec::new();
    for (i, (user, tasks)) in participants.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        for task in tasks {
            let js = models
                .get(&task.model_ref)
                .ok_or_else(|| AnalysisError::SchemaMismatch(format!("unknown model `{}`", task.model_ref)))?;
            let payload = agent.respond(task, js, &mut rng)?;
            let score = evaluate_response(task, &payload, js)?;
            let time = rng.random_range(5.0..60.0);
            rows.push(ResponseRow::new(user, task, score.reward, time));
        }
    }
    ResponseTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_sum_to_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            for m in 0..12 {
                let c = random_composition(n, m, &mut rng);
                assert_eq!(c.len(), n);
                assert_eq!(c.iter().sum::<u32>(), m);
            }
        }
    }

    #[test]
    fn apportion_preserves_budget() {
        assert_eq!(apportion(&[0.25, 0.25, 0.5], 10), vec![3, 2, 5]);
        assert_eq!(apportion(&[1.0, 0.0], 10), vec![10, 0]);
        let c = apportion(&[0.333, 0.333, 0.334], 10);
        assert_eq!(c.iter().sum::<u32>(), 10);
    }
}
