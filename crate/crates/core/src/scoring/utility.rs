//! Extrinsic utilities and Monte Carlo expected utility.

use serde::{Deserialize, Serialize};

use super::ScoreError;
use crate::distribution::CategoricalDistribution;
use crate::samples::{Direction, JointSamples};

/// Payoff of one option as a function of a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payoff {
    /// `scale * x + offset`
    Linear { scale: f64, offset: f64 },
    /// `hit` when `x <direction> threshold`, else `miss`.
    Threshold {
        threshold: f64,
        direction: Direction,
        #[serde(default = "one")]
        hit: f64,
        #[serde(default)]
        miss: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Payoff {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Payoff::Linear { scale, offset } => scale * x + offset,
            Payoff::Threshold {
                threshold,
                direction,
                hit,
                miss,
            } => {
                if direction.holds(x, threshold) {
                    hit
                } else {
                    miss
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Payoff::Linear { scale, offset } => scale.is_finite() && offset.is_finite(),
            Payoff::Threshold { threshold, hit, miss, .. } => {
                !threshold.is_nan() && hit.is_finite() && miss.is_finite()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionUtility {
    pub variable: String,
    pub payoff: Payoff,
}

/// Which variable of a draw counts as the realized outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeRule {
    ArgMin,
    ArgMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// Option `i` pays `options[i].payoff(x)` on its own variable.
    PerOption { options: Vec<OptionUtility> },
    /// Each draw realizes one discrete outcome, the extreme of `outcome_variables`;
    /// option `i` then pays `payoffs[i][outcome]`.
    Table {
        outcome_variables: Vec<String>,
        rule: OutcomeRule,
        payoffs: Vec<Vec<f64>>,
    },
}

impl UtilitySpec {
    pub fn option_count(&self) -> usize {
        match self {
            UtilitySpec::PerOption { options } => options.len(),
            UtilitySpec::Table { payoffs, .. } => payoffs.len(),
        }
    }

    /// Expected utility of each pure option under the samples.
    pub fn option_values(&self, js: &JointSamples) -> Result<Vec<f64>, ScoreError> {
        match self {
            UtilitySpec::PerOption { options } => options
                .iter()
                .map(|o| {
                    if !o.payoff.is_finite() {
                        return Err(ScoreError::InvalidUtility(format!("non-finite payoff on `{}`", o.variable)));
                    }
                    let col = js.column(&o.variable)?;
                    Ok(col.iter().map(|&x| o.payoff.eval(x)).sum::<f64>() / col.len() as f64)
                })
                .collect(),
            UtilitySpec::Table {
                outcome_variables,
                rule,
                payoffs,
            } => {
                let k = outcome_variables.len();
                if k == 0 || payoffs.iter().any(|row| row.len() != k || row.iter().any(|p| !p.is_finite())) {
                    return Err(ScoreError::InvalidUtility(format!(
                        "payoff table must be finite with {k} outcomes per option"
                    )));
                }
                let cols = outcome_variables
                    .iter()
                    .map(|v| js.schema().column(v))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut counts = vec![0usize; k];
                for row in js.iter_rows() {
                    let mut best = 0;
                    for j in 1..k {
                        let better = match rule {
                            OutcomeRule::ArgMin => row[cols[j]] < row[cols[best]],
                            OutcomeRule::ArgMax => row[cols[j]] > row[cols[best]],
                        };
                        if better {
                            best = j;
                        }
                    }
                    counts[best] += 1;
                }
                let n = js.rows() as f64;
                Ok(payoffs
                    .iter()
                    .map(|row| row.iter().zip(&counts).map(|(p, &c)| p * c as f64 / n).sum())
                    .collect())
            }
        }
    }
}

/// `sum_i choice_i * E[u_i]`.
pub fn expected_utility(
    js: &JointSamples,
    utility: &UtilitySpec,
    choice: &CategoricalDistribution,
) -> Result<f64, ScoreError> {
    let values = utility.option_values(js)?;
    if values.len() != choice.len() {
        return Err(ScoreError::InvalidUtility(format!(
            "utility covers {} options, choice spreads over {}",
            values.len(),
            choice.len()
        )));
    }
    Ok(values.iter().zip(choice.probs()).map(|(v, p)| v * p).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{Observability, Provenance, Schema, VariableSpec};

    fn store(cols: &[Vec<f64>]) -> JointSamples {
        let vars = (0..cols.len())
            .map(|i| VariableSpec::new(format!("v{i}"), Observability::Observable, i, ""))
            .collect();
        let n = cols[0].len();
        let values = (0..n).flat_map(|r| cols.iter().map(move |c| c[r])).collect();
        JointSamples::new(Schema::new(vars).unwrap(), n, values, Provenance::Posterior, 0).unwrap()
    }

    fn linear(var: &str) -> OptionUtility {
        OptionUtility {
            variable: var.into(),
            payoff: Payoff::Linear { scale: 1.0, offset: 0.0 },
        }
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn deterministic_samples_give_outcome_value() {
        let js = store(&[vec![4.0; 5]]);
        let u = UtilitySpec::PerOption { options: vec![linear("v0")] };
        let c = CategoricalDistribution::one_hot(labels(1), 0).unwrap();
        assert_eq!(expected_utility(&js, &u, &c).unwrap(), 4.0);
    }

    #[test]
    fn equal_utilities_make_spread_irrelevant() {
        let js = store(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]);
        let u = UtilitySpec::PerOption { options: vec![linear("v0"), linear("v1")] };
        let spread = CategoricalDistribution::new(labels(2), vec![0.5, 0.5]).unwrap();
        let pure = CategoricalDistribution::one_hot(labels(2), 1).unwrap();
        assert_eq!(
            expected_utility(&js, &u, &spread).unwrap(),
            expected_utility(&js, &u, &pure).unwrap()
        );
    }

    #[test]
    fn threshold_payoff_reduces_to_event_probability() {
        let js = store(&[vec![0.5, 1.0, 2.0, 2.5, 3.0, -1.0, 2.0, 1.9]]);
        let u = UtilitySpec::PerOption {
            options: vec![OptionUtility {
                variable: "v0".into(),
                payoff: Payoff::Threshold {
                    threshold: 2.0,
                    direction: Direction::AtLeast,
                    hit: 1.0,
                    miss: 0.0,
                },
            }],
        };
        let c = CategoricalDistribution::one_hot(labels(1), 0).unwrap();
        assert_eq!(
            expected_utility(&js, &u, &c).unwrap(),
            js.prob_event("v0", 2.0, Direction::AtLeast).unwrap()
        );
    }

    #[test]
    fn table_payoffs_by_fastest_outcome() {
        // Rows where v0 is smallest: 2 of 4.
        let js = store(&[vec![1.0, 5.0, 1.0, 5.0], vec![2.0, 2.0, 3.0, 0.0]]);
        let u = UtilitySpec::Table {
            outcome_variables: vec!["v0".into(), "v1".into()],
            rule: OutcomeRule::ArgMin,
            payoffs: vec![vec![1.0, 0.0], vec![0.0, 3.0]],
        };
        assert_eq!(u.option_values(&js).unwrap(), vec![0.5, 1.5]);
    }

    #[test]
    fn invalid_utilities() {
        let js = store(&[vec![1.0]]);
        let nan = UtilitySpec::PerOption {
            options: vec![OptionUtility {
                variable: "v0".into(),
                payoff: Payoff::Linear { scale: f64::NAN, offset: 0.0 },
            }],
        };
        assert!(matches!(nan.option_values(&js), Err(ScoreError::InvalidUtility(_))));
        let ragged = UtilitySpec::Table {
            outcome_variables: vec!["v0".into()],
            rule: OutcomeRule::ArgMax,
            payoffs: vec![vec![1.0, 2.0]],
        };
        assert!(ragged.option_values(&js).is_err());
        let u = UtilitySpec::PerOption { options: vec![linear("v0")] };
        let c = CategoricalDistribution::new(labels(2), vec![0.5, 0.5]).unwrap();
        assert!(expected_utility(&js, &u, &c).is_err());
    }
}
