use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ModelError, PosteriorChain};
use crate::samples::{JointSamples, Observability, Provenance, Schema, VariableSpec};

const SHOP_NAMES: [&str; 16] = [
    "Wichys", "Tommys", "Sandys", "Mesys", "Bobbys", "Jennys", "Rickys", "Lucys", "Mollys", "Dannys", "Pattys",
    "Kellys", "Harrys", "Sallys", "Teddys", "Nellys",
];

/// Shop names used in the cafe study; falls back to `cafe_<i>` past the list.
pub fn default_cafe_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| SHOP_NAMES.get(i).map_or_else(|| format!("cafe_{i}"), |s| (*s).to_owned()))
        .collect()
}

/// Column layout of predictive stores: per cafe `<name>_peak` and `<name>_offpeak`
/// (observable), then per cafe `<name>_mu` and `<name>_b`, then the globals (latent).
pub fn predictive_schema(names: &[String]) -> Schema {
    let mut vars = Vec::with_capacity(4 * names.len() + 6);
    for name in names {
        for suffix in ["peak", "offpeak"] {
            let idx = vars.len();
            vars.push(VariableSpec::new(format!("{name}_{suffix}"), Observability::Observable, idx, "minutes"));
        }
    }
    for name in names {
        for suffix in ["mu", "b"] {
            let idx = vars.len();
            vars.push(VariableSpec::new(format!("{name}_{suffix}"), Observability::Latent, idx, "minutes"));
        }
    }
    for (name, unit) in [
        ("sigma_g_peak", "minutes"),
        ("sigma_g_diff", "minutes"),
        ("rho", ""),
        ("mu_g_peak", "minutes"),
        ("mu_g_diff", "minutes"),
        ("sigma_x", "minutes"),
    ] {
        let idx = vars.len();
        vars.push(VariableSpec::new(name, Observability::Latent, idx, unit));
    }
    Schema::new(vars).expect("generated names are unique")
}

/// One predictive draw of every cafe's peak and off-peak wait per posterior draw,
/// stored alongside the latent values that generated it.
pub fn posterior_predictive(chain: &PosteriorChain, names: &[String], seed: u64) -> Result<JointSamples, ModelError> {
    let first = chain
        .draws
        .first()
        .ok_or_else(|| ModelError::InvalidParameters("posterior chain is empty".into()))?;
    let n = first.n_cafes();
    let names = if names.is_empty() {
        default_cafe_names(n)
    } else if names.len() == n {
        names.to_vec()
    } else {
        return Err(ModelError::InvalidParameters(format!(
            "{} names given for {n} cafes",
            names.len()
        )));
    };
    let schema = predictive_schema(&names);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(chain.len() * schema.len());
    for draw in &chain.draws {
        let p = draw.to_constrained();
        let sx = p.global.sigma_x;
        for c in &p.cafes {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            values.push(c.peak_mean + sx * z1);
            values.push(c.peak_mean + c.difference + sx * z2);
        }
        for c in &p.cafes {
            values.push(c.peak_mean);
            values.push(c.difference);
        }
        let g = p.global;
        values.extend_from_slice(&[g.sigma_g_peak, g.sigma_g_diff, g.rho, g.mu_g[0], g.mu_g[1], g.sigma_x]);
    }
    JointSamples::new(schema, chain.len(), values, Provenance::Posterior, seed)
        .map_err(|e| ModelError::InvalidParameters(e.to_string()))
}
