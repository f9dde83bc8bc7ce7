//! Rescaling of objective values to the `[0, 10]` feedback reward.

use crate::task::ObjectiveKind;

pub const MAX_REWARD: f64 = 10.0;

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// `10 exp(-d)` for a divergence `d >= 0`.
pub fn divergence_reward(d: f64) -> f64 {
    round1(MAX_REWARD * (-d.max(0.0)).exp())
}

/// `10 (v - v_min) / (v_max - v_min)` over the option values; 10 when they are all equal.
pub fn utility_reward(value: f64, option_values: &[f64]) -> f64 {
    let lo = option_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = option_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return MAX_REWARD;
    }
    round1((MAX_REWARD * (value - lo) / (hi - lo)).clamp(0.0, MAX_REWARD))
}

/// Reward for an objective value. `option_values` is only consulted for
/// expected-utility objectives.
pub fn reward(kind: ObjectiveKind, objective_value: f64, option_values: &[f64]) -> f64 {
    match kind {
        ObjectiveKind::Kl | ObjectiveKind::SymmetricKl => divergence_reward(objective_value),
        ObjectiveKind::AbsoluteBias => round1(MAX_REWARD * (1.0 - objective_value).clamp(0.0, 1.0)),
        ObjectiveKind::Binary => MAX_REWARD * objective_value.clamp(0.0, 1.0),
        ObjectiveKind::ExpectedUtility => utility_reward(objective_value, option_values),
    }
}
