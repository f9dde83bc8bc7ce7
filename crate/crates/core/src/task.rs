//! Description of a single study task, shared by scoring, the study protocol and analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::samples::{Direction, IntervalCondition, Observability};
use crate::scoring::utility::UtilitySpec;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("inconsistent task `{task}`: {reason}")]
pub struct TaskError {
    pub task: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visualisation {
    Boxplot,
    Hop,
    InteractiveBoxplot,
    Bhop,
}

impl Visualisation {
    pub const ALL: [Visualisation; 4] = [
        Visualisation::Boxplot,
        Visualisation::Hop,
        Visualisation::InteractiveBoxplot,
        Visualisation::Bhop,
    ];

    pub fn is_animated(self) -> bool {
        matches!(self, Visualisation::Hop | Visualisation::Bhop)
    }

    pub fn is_interactive(self) -> bool {
        matches!(self, Visualisation::InteractiveBoxplot | Visualisation::Bhop)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Visualisation::Boxplot => "boxplot",
            Visualisation::Hop => "hop",
            Visualisation::InteractiveBoxplot => "interactive_boxplot",
            Visualisation::Bhop => "bhop",
        }
    }
}

impl std::str::FromStr for Visualisation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Visualisation::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown visualisation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnswerInput {
    Slider { min: f64, max: f64, step: f64 },
    Multibet { options: usize, chips: u32 },
}

impl AnswerInput {
    /// Number of grid points of a slider, `None` for other inputs.
    pub fn slider_positions(&self) -> Option<usize> {
        match *self {
            AnswerInput::Slider { min, max, step } => Some(((max - min) / step + 1e-9).floor() as usize + 1),
            AnswerInput::Multibet { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Value,
    Confidence,
    Id,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    Posterior,
    PosteriorSideInfo,
}

/// One cell of the query space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryMeta {
    pub observability: Observability,
    pub quantity: Quantity,
    pub conditioning: Conditioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Kl,
    SymmetricKl,
    AbsoluteBias,
    Binary,
    ExpectedUtility,
}

/// Whether a task measures decisions or understanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Rationality,
    Comprehension,
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rationality" => Ok(Subset::Rationality),
            "comprehension" => Ok(Subset::Comprehension),
            _ => Err(format!("unknown subset `{s}`")),
        }
    }
}

/// What the model says the answer should be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// "What wait do you expect at least with `confidence`?" The slider picks `tau`.
    ValueAtConfidence { variable: String, confidence: f64 },
    /// "How confident are you that `variable` is at least `threshold`?"
    Confidence {
        variable: String,
        threshold: f64,
        #[serde(default = "default_direction")]
        direction: Direction,
    },
    /// "Which of `candidates` generated the observed value?" Answered with chips over
    /// the candidates, or with a slider for the single candidate `focus`.
    IdentityPosterior {
        candidates: Vec<String>,
        observed: f64,
        #[serde(default)]
        window: Option<f64>,
        #[serde(default)]
        focus: Option<usize>,
    },
    /// "Which observed value makes candidate `focus` the most likely source?"
    MostLikelyValue {
        candidates: Vec<String>,
        focus: usize,
        #[serde(default)]
        window: Option<f64>,
    },
    /// Choose among options with a known utility.
    Decision { options: Vec<String>, utility: UtilitySpec },
}

fn default_direction() -> Direction {
    Direction::AtLeast
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub target: Target,
    /// Side information the model is conditioned on before scoring.
    #[serde(default)]
    pub conditions: Vec<IntervalCondition>,
    /// Bias tolerance of the binary criterion.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    /// Identifier of the underlying query; tasks that differ only in visualisation
    /// share it. Defaults to `id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub context: String,
    pub query: String,
    pub visualisation: Visualisation,
    pub answer_input: AnswerInput,
    #[serde(default = "default_true")]
    pub feedback_enabled: bool,
    pub model_ref: String,
    pub query_meta: QueryMeta,
    pub objective: Objective,
    pub interactive: bool,
    /// Interstitial message shown before this task; set when it opens a block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

impl TaskSpec {
    pub fn query_key(&self) -> &str {
        self.query_id.as_deref().unwrap_or(&self.id)
    }

    pub fn subset(&self) -> Subset {
        match self.objective.kind {
            ObjectiveKind::ExpectedUtility => Subset::Rationality,
            _ => Subset::Comprehension,
        }
    }

    /// Labels of the options a MultiBet answer spreads chips over.
    pub fn option_labels(&self) -> Option<&[String]> {
        match &self.objective.target {
            Target::IdentityPosterior { candidates, .. } => Some(candidates),
            Target::Decision { options, .. } => Some(options),
            _ => None,
        }
    }

    /// Checks that objective, answer input and query metadata agree.
    pub fn validate(&self) -> Result<(), TaskError> {
        let fail = |reason: String| Err(TaskError { task: self.id.clone(), reason });
        if self.interactive != self.visualisation.is_interactive() {
            return fail(format!(
                "interactive = {} contradicts visualisation {}",
                self.interactive,
                self.visualisation.as_str()
            ));
        }
        match self.answer_input {
            AnswerInput::Slider { min, max, step } => {
                if !(min < max && step > 0.0 && min.is_finite() && max.is_finite()) {
                    return fail(format!("slider [{min}, {max}] step {step} is invalid"));
                }
            }
            AnswerInput::Multibet { options, chips } => {
                if options == 0 || chips == 0 {
                    return fail("multibet needs at least one option and one chip".into());
                }
            }
        }
        let is_slider = matches!(self.answer_input, AnswerInput::Slider { .. });
        let expected_quantity = match &self.objective.target {
            Target::ValueAtConfidence { confidence, .. } => {
                if !(*confidence > 0.0 && *confidence < 1.0) {
                    return fail(format!("confidence {confidence} outside (0, 1)"));
                }
                if !is_slider {
                    return fail("value queries take a slider".into());
                }
                Quantity::Value
            }
            Target::MostLikelyValue { candidates, focus, .. } => {
                if !is_slider || *focus >= candidates.len() {
                    return fail("most-likely-value queries take a slider and a valid focus".into());
                }
                Quantity::Value
            }
            Target::Confidence { .. } => {
                self.require_unit_slider()?;
                Quantity::Confidence
            }
            Target::IdentityPosterior { candidates, focus, .. } => {
                if candidates.is_empty() {
                    return fail("identity query without candidates".into());
                }
                match (&self.answer_input, focus) {
                    (AnswerInput::Slider { .. }, Some(f)) if *f < candidates.len() => {
                        self.require_unit_slider()?;
                        Quantity::Confidence
                    }
                    (AnswerInput::Multibet { options, .. }, _) if *options == candidates.len() => Quantity::Id,
                    _ => return fail("identity answer input does not match the candidates".into()),
                }
            }
            Target::Decision { options, utility } => {
                match self.answer_input {
                    AnswerInput::Multibet { options: n, .. } if n == options.len() => {}
                    _ => return fail("decisions take a multibet over every option".into()),
                }
                if utility.option_count() != options.len() {
                    return fail(format!(
                        "utility defines {} options, task lists {}",
                        utility.option_count(),
                        options.len()
                    ));
                }
                Quantity::Id
            }
        };
        if expected_quantity != self.query_meta.quantity {
            return fail(format!(
                "objective answers a {expected_quantity:?} query, metadata says {:?}",
                self.query_meta.quantity
            ));
        }
        let decision = matches!(self.objective.target, Target::Decision { .. });
        if decision != (self.objective.kind == ObjectiveKind::ExpectedUtility) {
            return fail("expected utility is the objective of decision targets only".into());
        }
        if self.objective.kind == ObjectiveKind::Binary && self.objective.tolerance.is_none() {
            return fail("binary criterion needs a tolerance".into());
        }
        let side_info = !self.objective.conditions.is_empty();
        if side_info != (self.query_meta.conditioning == Conditioning::PosteriorSideInfo) {
            return fail("side-information conditioning must come with conditions".into());
        }
        Ok(())
    }

    fn require_unit_slider(&self) -> Result<(), TaskError> {
        match self.answer_input {
            AnswerInput::Slider { min, max, .. } if min >= 0.0 && max <= 1.0 => Ok(()),
            _ => Err(TaskError {
                task: self.id.clone(),
                reason: "confidence answers take a slider within [0, 1]".into(),
            }),
        }
    }
}
