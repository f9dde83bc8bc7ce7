//! Bootstrap effect sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::stats::{mean, std_dev};

/// Scale term dividing the mean difference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectScale {
    /// `sqrt((sd_a + sd_b) / 2)`
    #[default]
    SqrtMeanSd,
    /// `sqrt((sd_a^2 + sd_b^2) / 2)`
    PooledVariance,
}

impl EffectScale {
    fn scale(self, sd_a: f64, sd_b: f64) -> f64 {
        match self {
            EffectScale::SqrtMeanSd => ((sd_a + sd_b) / 2.0).sqrt(),
            EffectScale::PooledVariance => ((sd_a * sd_a + sd_b * sd_b) / 2.0).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub effect: f64,
    pub se: f64,
}

fn resample(rng: &mut ChaCha8Rng, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..x.len()).map(|_| x[rng.random_range(0..x.len())]));
}

/// The effect combines bootstrap-averaged means and standard deviations; `se` is
/// the standard deviation of the per-replicate effects. In replicate `r` the two
/// samples draw from streams `2r` and `2r + 1` of the seeded generator, assigned by
/// comparing the samples rather than by argument position, so swapping the
/// arguments exactly negates the effect and the result does not depend on the
/// number of threads.
pub fn bootstrap_effect_size(
    a: &[f64],
    b: &[f64],
    n_boot: usize,
    seed: u64,
    scale: EffectScale,
) -> Result<EffectSize, AnalysisError> {
    if n_boot == 0 {
        return Err(AnalysisError::InvalidArgument("n_boot must be positive".into()));
    }
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::InsufficientData("each sample needs at least two values".into()));
    }
    let a_first = canonical_cmp(a, b).is_le();
    let stats: Vec<[f64; 4]> = (0..n_boot)
        .into_par_iter()
        .map(|r| {
            let boot = |sample: &[f64], first: bool| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 * r as u64 + u64::from(!first));
                let mut buf = Vec::with_capacity(sample.len());
                resample(&mut rng, sample, &mut buf);
                (mean(&buf), std_dev(&buf))
            };
            let (ma, sa) = boot(a, a_first);
            let (mb, sb) = boot(b, !a_first);
            [ma, sa, mb, sb]
        })
        .collect();
    let avg = |k: usize| stats.iter().map(|s| s[k]).sum::<f64>() / n_boot as f64;
    let denom = scale.scale(avg(1), avg(3));
    if !(denom > 0.0) {
        return Err(AnalysisError::UndefinedEffect);
    }
    let effect = (avg(0) - avg(2)) / denom;
    let replicates: Vec<f64> = stats
        .iter()
        .map(|s| {
            let d = scale.scale(s[1], s[3]);
            if d > 0.0 {
                (s[0] - s[2]) / d
            } else {
                0.0
            }
        })
        .collect();
    let se = if n_boot > 1 { std_dev(&replicates) } else { 0.0 };
    Ok(EffectSize { effect, se })
}

fn canonical_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}
