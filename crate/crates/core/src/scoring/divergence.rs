//! Comprehension objectives between an optimal and an entailed distribution.

use super::ScoreError;
use crate::distribution::CategoricalDistribution;

fn check_labels(a: &CategoricalDistribution, b: &CategoricalDistribution) -> Result<(), ScoreError> {
    if a.labels() == b.labels() {
        Ok(())
    } else {
        Err(ScoreError::SchemaMismatch(format!(
            "labels {:?} vs {:?}",
            a.labels(),
            b.labels()
        )))
    }
}

/// `D(p* || p^)` in nats. Terms with `p*_i = 0` vanish; a zero in `p^` where
/// `p*` has mass yields infinity.
pub fn kl_divergence(p_star: &CategoricalDistribution, p_hat: &CategoricalDistribution) -> Result<f64, ScoreError> {
    check_labels(p_star, p_hat)?;
    Ok(p_star
        .probs()
        .iter()
        .zip(p_hat.probs())
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &q)| p * (p / q).ln())
        .sum::<f64>()
        .max(0.0))
}

/// `D(p* || p^) + D(p^ || p*)`.
pub fn symmetric_kl(p_star: &CategoricalDistribution, p_hat: &CategoricalDistribution) -> Result<f64, ScoreError> {
    Ok(kl_divergence(p_star, p_hat)? + kl_divergence(p_hat, p_star)?)
}

/// Half the L1 distance; equals `|p^ - p*|` for two-outcome distributions.
pub fn absolute_bias(p_star: &CategoricalDistribution, p_hat: &CategoricalDistribution) -> Result<f64, ScoreError> {
    check_labels(p_star, p_hat)?;
    Ok(0.5 * p_star.probs().iter().zip(p_hat.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// 1 when the absolute bias is within `tolerance`, else 0.
pub fn binary_criterion(
    p_star: &CategoricalDistribution,
    p_hat: &CategoricalDistribution,
    tolerance: f64,
) -> Result<u8, ScoreError> {
    Ok(u8::from(absolute_bias(p_star, p_hat)? <= tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::new((0..p.len()).map(|i| i.to_string()).collect(), p.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert_eq!(symmetric_kl(&p, &p).unwrap(), 0.0);
        assert_eq!(absolute_bias(&p, &p).unwrap(), 0.0);
        assert_eq!(binary_criterion(&p, &p, 0.0).unwrap(), 1);
    }

    #[test]
    fn hand_computed_values() {
        let a = d(&[0.5, 0.5]);
        let b = d(&[0.9, 0.1]);
        let kl = 0.5 * (5.0f64 / 9.0).ln() + 0.5 * 5.0f64.ln();
        assert!((kl_divergence(&a, &b).unwrap() - kl).abs() < 1e-12);
        assert!((kl - 0.5108).abs() < 1e-4);
        let sym = kl + 0.9 * 1.8f64.ln() + 0.1 * 0.2f64.ln();
        assert!((symmetric_kl(&a, &b).unwrap() - sym).abs() < 1e-12);
        assert!((sym - 0.8789).abs() < 1e-4);
        assert_eq!(symmetric_kl(&a, &b).unwrap(), symmetric_kl(&b, &a).unwrap());
    }

    #[test]
    fn bernoulli_bias_and_threshold() {
        let star = CategoricalDistribution::bernoulli(0.95).unwrap();
        let hat = CategoricalDistribution::bernoulli(0.80).unwrap();
        assert!((absolute_bias(&star, &hat).unwrap() - 0.15).abs() < 1e-12);
        assert_eq!(binary_criterion(&star, &hat, 0.1).unwrap(), 0);
    }

    #[test]
    fn zero_mass_terms_vanish_and_reverse_is_infinite() {
        let a = d(&[1.0, 0.0]);
        let b = d(&[0.5, 0.5]);
        assert!((kl_divergence(&a, &b).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        assert!(kl_divergence(&b, &a).unwrap().is_infinite());
    }

    #[test]
    fn label_mismatch() {
        let a = d(&[0.5, 0.5]);
        let b = CategoricalDistribution::new(vec!["x".into(), "y".into()], vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_divergence(&a, &b), Err(ScoreError::SchemaMismatch(_))));
        assert!(matches!(absolute_bias(&a, &b), Err(ScoreError::SchemaMismatch(_))));
    }
}
