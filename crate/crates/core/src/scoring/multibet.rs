//! MultiBet input: `N` columns of `M` stacked buttons holding up to `M` chips.
//!
//! In column `i` the bottom `s_i` buttons are selected, the next `M - sum(s)` are
//! deselected (free budget) and the rest are disabled. Clicking a deselected button
//! at level `r` sets `s_i = r`; clicking a selected one removes it and every chip
//! above it, leaving `s_i = r - 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::CategoricalDistribution;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiBetError {
    #[error("column {column} is outside the {options} options")]
    ColumnOutOfRange { column: usize, options: usize },
    #[error("row {row} is outside 1..={budget}")]
    RowOutOfRange { row: u32, budget: u32 },
    #[error("button at column {column}, row {row} is disabled")]
    Disabled { column: usize, row: u32 },
    #[error("click reported a {reported:?} button but it is {actual:?}")]
    StaleClick { reported: ButtonState, actual: ButtonState },
    #[error("{placed} chips exceed the budget of {budget}")]
    OverBudget { placed: u32, budget: u32 },
    #[error("no chips placed")]
    EmptyResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButtonState {
    Selected,
    Deselected,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiBetState {
    chips: Vec<u32>,
    budget: u32,
}

impl MultiBetState {
    pub fn new(options: usize, budget: u32) -> Self {
        Self {
            chips: vec![0; options],
            budget,
        }
    }

    pub fn from_chips(chips: Vec<u32>, budget: u32) -> Result<Self, MultiBetError> {
        let placed: u32 = chips.iter().sum();
        if placed > budget {
            return Err(MultiBetError::OverBudget { placed, budget });
        }
        Ok(Self { chips, budget })
    }

    pub fn chips(&self) -> &[u32] {
        &self.chips
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn options(&self) -> usize {
        self.chips.len()
    }

    pub fn placed(&self) -> u32 {
        self.chips.iter().sum()
    }

    pub fn remaining(&self) -> u32 {
        self.budget - self.placed()
    }

    /// Display state of the button at `column`, `row` (1-based from the bottom).
    pub fn button(&self, column: usize, row: u32) -> ButtonState {
        let s = self.chips[column];
        if row <= s {
            ButtonState::Selected
        } else if row <= s + self.remaining() {
            ButtonState::Deselected
        } else {
            ButtonState::Disabled
        }
    }

    /// Applies a click, leaving `self` untouched on rejection.
    pub fn click(&self, column: usize, row: u32) -> Result<MultiBetState, MultiBetError> {
        if column >= self.chips.len() {
            return Err(MultiBetError::ColumnOutOfRange {
                column,
                options: self.chips.len(),
            });
        }
        if row == 0 || row > self.budget {
            return Err(MultiBetError::RowOutOfRange { row, budget: self.budget });
        }
        let mut next = self.clone();
        next.chips[column] = match self.button(column, row) {
            ButtonState::Selected => row - 1,
            ButtonState::Deselected => row,
            ButtonState::Disabled => return Err(MultiBetError::Disabled { column, row }),
        };
        Ok(next)
    }

    /// Raw chip proportions; `None` when no chips are placed.
    pub fn proportions(&self) -> Option<Vec<f64>> {
        let placed = self.placed();
        (placed > 0).then(|| self.chips.iter().map(|&c| f64::from(c) / f64::from(placed)).collect())
    }
}

/// Click as reported by a client that also says whether it saw the button selected.
pub fn multibet_click(
    state: &MultiBetState,
    column: usize,
    row: u32,
    was_selected: bool,
) -> Result<MultiBetState, MultiBetError> {
    if column < state.options() && (1..=state.budget()).contains(&row) {
        let actual = state.button(column, row);
        let reported = if was_selected {
            ButtonState::Selected
        } else {
            ButtonState::Deselected
        };
        if actual != ButtonState::Disabled && actual != reported {
            return Err(MultiBetError::StaleClick { reported, actual });
        }
    }
    state.click(column, row)
}

/// `p_i = (s_i + eps) / (sum(s) + N eps)`.
pub fn entailed_distribution(
    state: &MultiBetState,
    labels: &[String],
    smoothing: f64,
) -> Result<CategoricalDistribution, MultiBetError> {
    let placed = state.placed();
    if placed == 0 {
        return Err(MultiBetError::EmptyResponse);
    }
    let n = state.options() as f64;
    let denom = f64::from(placed) + n * smoothing;
    let probs = state.chips().iter().map(|&c| (f64::from(c) + smoothing) / denom).collect();
    Ok(CategoricalDistribution::new(labels.to_vec(), probs).expect("smoothed chip shares are normalized"))
}
