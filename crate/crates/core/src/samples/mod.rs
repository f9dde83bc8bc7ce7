//! Joint Monte Carlo samples of a Bayesian model and the queries answered on them.
//!
//! A [`JointSamples`] store is an immutable `N x D` matrix of draws of observable
//! and latent variables. Every query in the evaluation framework (probabilities of
//! events, value thresholds, identity posteriors, boxplot statistics) is an
//! empirical computation over its rows. Conditioning keeps the rows inside a set of
//! intervals and bootstraps a fixed number of them, so no re-inference is needed.

pub mod blob;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::CategoricalDistribution;
use crate::stats::{quantile_sorted, sorted_copy};

/// Default bootstrap size for conditioning.
pub const DEFAULT_RESAMPLE_SIZE: usize = 1000;

/// Default identity-posterior window as a fraction of the pooled sample range.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("malformed blob: {0}")]
    MalformedBlob(String),
    #[error("invalid sample {value} at row {row}, column {column}")]
    InvalidSample { row: usize, column: usize, value: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("no samples satisfy the conditions")]
    EmptyConditionalSupport,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observability {
    Observable,
    Latent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub observability: Observability,
    /// Column of this variable in the sample matrix.
    pub index: usize,
    #[serde(default)]
    pub unit: String,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, observability: Observability, index: usize, unit: &str) -> Self {
        Self {
            name: name.into(),
            observability,
            index,
            unit: unit.to_owned(),
        }
    }
}

/// Validated variable list: unique names, indices a bijection onto `0..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    variables: Vec<VariableSpec>,
    by_name: HashMap<String, usize>,
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self, SampleError> {
        let d = variables.len();
        if d == 0 {
            return Err(SampleError::InvalidSchema("schema has no variables".into()));
        }
        let mut by_name = HashMap::with_capacity(d);
        let mut seen = vec![false; d];
        for v in &variables {
            if v.index >= d || seen[v.index] {
                return Err(SampleError::InvalidSchema(format!(
                    "column index {} of `{}` is out of range or repeated",
                    v.index, v.name
                )));
            }
            seen[v.index] = true;
            if by_name.insert(v.name.clone(), v.index).is_some() {
                return Err(SampleError::InvalidSchema(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(Self { variables, by_name })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<usize, SampleError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| SampleError::UnknownVariable(name.to_owned()))
    }

    pub fn get(&self, name: &str) -> Option<&VariableSpec> {
        self.by_name.get(name).and_then(|&i| self.variables.iter().find(|v| v.index == i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Prior,
    Posterior,
}

/// Structured-text sidecar travelling with a blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub provenance: Provenance,
    #[serde(default)]
    pub seed: u64,
    pub variables: Vec<VariableSpec>,
}

/// Closed interval `[lower, upper]` on one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCondition {
    pub variable: String,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalCondition {
    pub fn new(variable: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            variable: variable.into(),
            lower,
            upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `x >= threshold`
    AtLeast,
    /// `x <= threshold`
    AtMost,
    /// `x < threshold`
    Below,
    /// `x > threshold`
    Above,
}

impl Direction {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::AtLeast => value >= threshold,
            Direction::AtMost => value <= threshold,
            Direction::Below => value < threshold,
            Direction::Above => value > threshold,
        }
    }
}

/// Tukey boxplot statistics of one marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Immutable store of joint Monte Carlo draws.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples {
    schema: Schema,
    values: Vec<f64>,
    rows: usize,
    provenance: Provenance,
    seed: u64,
}

impl JointSamples {
    /// Builds a store from a row-major matrix.
    pub fn new(
        schema: Schema,
        rows: usize,
        values: Vec<f64>,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self, SampleError> {
        let d = schema.len();
        if rows == 0 {
            return Err(SampleError::InvalidArgument("a sample store needs at least one row".into()));
        }
        if values.len() != rows * d {
            return Err(SampleError::InvalidArgument(format!(
                "{} values do not fill a {rows}x{d} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SampleError::InvalidSample {
                row: pos / d,
                column: pos % d,
                value: values[pos],
            });
        }
        Ok(Self {
            schema,
            values,
            rows,
            provenance,
            seed,
        })
    }

    /// Decodes a blob against its sidecar schema.
    pub fn load(blob: &[u8], sidecar: &SampleSidecar) -> Result<Self, SampleError> {
        let schema = Schema::new(sidecar.variables.clone())?;
        let (header, values) = blob::decode(blob)?;
        if header.columns as usize != schema.len() {
            return Err(SampleError::MalformedBlob(format!(
                "blob has {} columns, schema has {}",
                header.columns,
                schema.len()
            )));
        }
        Self::new(schema, header.rows as usize, values, sidecar.provenance, sidecar.seed)
    }

    pub fn to_blob(&self) -> Vec<u8> {
        blob::encode(self.rows, self.schema.len(), &self.values)
            .expect("store dimensions validated at construction")
    }

    pub fn sidecar(&self) -> SampleSidecar {
        SampleSidecar {
            provenance: self.provenance,
            seed: self.seed,
            variables: self.schema.variables().to_vec(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn columns(&self) -> usize {
        self.schema.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.columns();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.columns())
    }

    pub fn column(&self, variable: &str) -> Result<Vec<f64>, SampleError> {
        let c = self.schema.column(variable)?;
        Ok(self.column_at(c))
    }

    fn column_at(&self, c: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[c]).collect()
    }

    /// New store holding the given rows (in order) with the same schema.
    fn select_rows(&self, indices: &[usize], seed: u64) -> JointSamples {
        let d = self.columns();
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        JointSamples {
            schema: self.schema.clone(),
            values,
            rows: indices.len(),
            provenance: self.provenance,
            seed,
        }
    }

    /// Tukey statistics of a marginal: type-7 quartiles, whiskers at the most extreme
    /// points within 1.5 IQR of the quartiles, outliers beyond the whiskers.
    pub fn marginal_stats(&self, variable: &str) -> Result<BoxStats, SampleError> {
        let sorted = sorted_copy(&self.column(variable)?);
        Ok(box_stats_sorted(&sorted))
    }

    /// Fraction of rows with `value <direction> threshold`.
    pub fn prob_event(&self, variable: &str, threshold: f64, direction: Direction) -> Result<f64, SampleError> {
        let c = self.schema.column(variable)?;
        let hits = self.iter_rows().filter(|r| direction.holds(r[c], threshold)).count();
        Ok(hits as f64 / self.rows as f64)
    }

    /// The sample value `tau` minimizing `|P(x >= tau) - confidence|`, ties to the
    /// smaller `tau`.
    pub fn quantile_threshold(&self, variable: &str, confidence: f64) -> Result<f64, SampleError> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(SampleError::InvalidArgument(format!(
                "confidence {confidence} must lie strictly between 0 and 1"
            )));
        }
        let sorted = sorted_copy(&self.column(variable)?);
        Ok(threshold_for_confidence(&sorted, confidence))
    }

    /// Row indices satisfying every condition.
    pub fn support(&self, conditions: &[IntervalCondition]) -> Result<Vec<usize>, SampleError> {
        let mut resolved = Vec::with_capacity(conditions.len());
        for cond in conditions {
            if !(cond.lower <= cond.upper) {
                return Err(SampleError::InvalidArgument(format!(
                    "condition on `{}` has lower {} > upper {}",
                    cond.variable, cond.lower, cond.upper
                )));
            }
            resolved.push((self.schema.column(&cond.variable)?, cond.lower, cond.upper));
        }
        Ok(self
            .iter_rows()
            .enumerate()
            .filter(|(_, r)| resolved.iter().all(|&(c, lo, hi)| r[c] >= lo && r[c] <= hi))
            .map(|(i, _)| i)
            .collect())
    }

    /// Fraction of rows satisfying every condition.
    pub fn condition_probability(&self, conditions: &[IntervalCondition]) -> Result<f64, SampleError> {
        Ok(self.support(conditions)?.len() as f64 / self.rows as f64)
    }

    /// The satisfying rows themselves, without resampling.
    pub fn filter(&self, conditions: &[IntervalCondition]) -> Result<JointSamples, SampleError> {
        let support = self.support(conditions)?;
        if support.is_empty() {
            return Err(SampleError::EmptyConditionalSupport);
        }
        Ok(self.select_rows(&support, self.seed))
    }

    /// Bootstrap approximation of the conditional: `resample_size` rows drawn with
    /// replacement from the rows satisfying every condition.
    pub fn condition(
        &self,
        conditions: &[IntervalCondition],
        resample_size: usize,
        seed: u64,
    ) -> Result<JointSamples, SampleError> {
        if resample_size == 0 {
            return Err(SampleError::InvalidArgument("resample size must be positive".into()));
        }
        let support = self.support(conditions)?;
        if support.is_empty() {
            return Err(SampleError::EmptyConditionalSupport);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<usize> = (0..resample_size)
            .map(|_| support[rng.random_range(0..support.len())])
            .collect();
        Ok(self.select_rows(&picks, seed))
    }

    /// Windowed estimate of `p(candidate | x = observed)`: each candidate's mass is the
    /// fraction of its draws within `window / 2` of `observed`.
    pub fn identity_posterior(
        &self,
        candidates: &[String],
        observed: f64,
        window: f64,
    ) -> Result<CategoricalDistribution, SampleError> {
        if !(window > 0.0) {
            return Err(SampleError::InvalidArgument(format!("window {window} must be positive")));
        }
        if candidates.is_empty() {
            return Err(SampleError::InvalidArgument("no identity candidates".into()));
        }
        let half = window / 2.0;
        let mut weights = Vec::with_capacity(candidates.len());
        for name in candidates {
            let c = self.schema.column(name)?;
            let hits = self.iter_rows().filter(|r| (r[c] - observed).abs() <= half).count();
            weights.push(hits as f64 / self.rows as f64);
        }
        CategoricalDistribution::from_weights(candidates.to_vec(), &weights)
            .map_err(|_| SampleError::EmptyConditionalSupport)
    }

    /// Default identity window: 1% of the pooled range of the candidate columns.
    pub fn default_identity_window(&self, candidates: &[String]) -> Result<f64, SampleError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for name in candidates {
            for v in self.column(name)? {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let range = hi - lo;
        Ok(if range > 0.0 {
            range * DEFAULT_WINDOW_FRACTION
        } else {
            f64::EPSILON
        })
    }

    /// `k` rows drawn uniformly with replacement.
    pub fn draw(&self, k: usize, seed: u64) -> Result<JointSamples, SampleError> {
        if k == 0 {
            return Err(SampleError::InvalidArgument("draw count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..self.rows)).collect();
        Ok(self.select_rows(&picks, seed))
    }

    /// All rows, stably sorted ascending by `variable`.
    pub fn sorted_by(&self, variable: &str) -> Result<JointSamples, SampleError> {
        let c = self.schema.column(variable)?;
        let mut order: Vec<usize> = (0..self.rows).collect();
        order.sort_by(|&a, &b| self.row(a)[c].total_cmp(&self.row(b)[c]));
        Ok(self.select_rows(&order, self.seed))
    }

    /// `k` random rows sorted ascending by `variable`, as played by a ballistic sweep.
    pub fn ordered_rows(&self, variable: &str, k: usize, seed: u64) -> Result<JointSamples, SampleError> {
        self.schema.column(variable)?;
        self.draw(k, seed)?.sorted_by(variable)
    }

    /// Single-row store of column means.
    pub fn collapse_to_means(&self) -> JointSamples {
        let d = self.columns();
        let mut means = vec![0.0; d];
        for r in self.iter_rows() {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= self.rows as f64;
        }
        JointSamples {
            schema: self.schema.clone(),
            values: means,
            rows: 1,
            provenance: self.provenance,
            seed: self.seed,
        }
    }
}

/// Boxplot statistics of an ascending, non-empty slice.
pub fn box_stats_sorted(sorted: &[f64]) -> BoxStats {
    let q1 = quantile_sorted(sorted, 0.25);
    let median = quantile_sorted(sorted, 0.5);
    let q3 = quantile_sorted(sorted, 0.75);
    let iqr = q3 - q1;
    let low_fence = q1 - 1.5 * iqr;
    let high_fence = q3 + 1.5 * iqr;
    // Whiskers never retreat inside the box, even when interpolated quartiles
    // leave no data point between the fence and the quartile.
    let whisker_low = sorted
        .iter()
        .copied()
        .find(|&v| v >= low_fence)
        .map_or(q1, |v| v.min(q1));
    let whisker_high = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= high_fence)
        .map_or(q3, |v| v.max(q3));
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < whisker_low || v > whisker_high)
        .collect();
    BoxStats {
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    }
}

/// Scan of the distinct values of an ascending slice for the best "at least" threshold.
pub fn threshold_for_confidence(sorted: &[f64], confidence: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut best = sorted[0];
    let mut best_gap = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        // P(x >= sorted[i]) counts every element from the first occurrence onward.
        let gap = ((sorted.len() - i) as f64 / n - confidence).abs();
        if gap < best_gap {
            best_gap = gap;
            best = sorted[i];
        }
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    best
}
