//! Hierarchical model of peak and off-peak queuing delays across cafes.
//!
//! ```text
//! log sigma_g_peak ~ Normal(0, 0.1)
//! log sigma_g_diff ~ Normal(0, 0.1)
//! eta              ~ Normal(0, 1),     rho = tanh(eta)
//! mu_g             ~ Normal((0, 0), I)
//! (mu_i, b_i)      ~ Normal(mu_g, Sigma_g)
//! log sigma_x      ~ Normal(0, 1)
//! x_peak_i         ~ Normal(mu_i, sigma_x)
//! x_offpeak_i      ~ Normal(mu_i + b_i, sigma_x)
//! ```
//!
//! Every Normal is parameterized by its standard deviation. Priors sit on the
//! transformed coordinates and sampling happens on those coordinates, so no
//! Jacobian terms appear in [`log_joint`].

pub mod hmc;
mod predictive;

pub use predictive::{default_cafe_names, posterior_predictive, predictive_schema};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use self::hmc::{Chain, HmcConfig, HmcError, LogDensity};

pub const LOG_SIGMA_G_PRIOR_SD: f64 = 0.1;
pub const ETA_PRIOR_SD: f64 = 1.0;
pub const MU_G_PRIOR_SD: f64 = 1.0;
pub const LOG_SIGMA_X_PRIOR_SD: f64 = 1.0;

/// Number of global coordinates preceding the per-cafe block.
pub const N_GLOBAL: usize = 6;

const LAMBDA_PEAK: usize = 0;
const LAMBDA_DIFF: usize = 1;
const ETA: usize = 2;
const MU_G_PEAK: usize = 3;
const MU_G_DIFF: usize = 4;
const LAMBDA_X: usize = 5;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Sampler(#[from] HmcError),
}

/// Population-level parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub sigma_g_peak: f64,
    pub sigma_g_diff: f64,
    pub rho: f64,
    /// (mean peak wait, mean off-peak minus peak difference), minutes.
    pub mu_g: [f64; 2],
    pub sigma_x: f64,
}

impl GlobalParams {
    /// The generating parameters of the synthetic cafe study.
    pub fn synthetic_ground_truth() -> Self {
        Self {
            sigma_g_peak: 1.5,
            sigma_g_diff: 0.75,
            rho: -0.7,
            mu_g: [6.5, -1.75],
            sigma_x: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidParameters(format!("{name} = {v} must be positive")))
            }
        };
        positive("sigma_g_peak", self.sigma_g_peak)?;
        positive("sigma_g_diff", self.sigma_g_diff)?;
        positive("sigma_x", self.sigma_x)?;
        if !(self.rho.abs() < 1.0) {
            return Err(ModelError::InvalidParameters(format!(
                "rho = {} leaves the covariance non positive definite",
                self.rho
            )));
        }
        if !self.mu_g.iter().all(|m| m.is_finite()) {
            return Err(ModelError::InvalidParameters("mu_g must be finite".into()));
        }
        Ok(())
    }

    /// `Sigma_g` as `[[a, c], [c, b]]`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let c = self.sigma_g_peak * self.rho * self.sigma_g_diff;
        [[self.sigma_g_peak.powi(2), c], [c, self.sigma_g_diff.powi(2)]]
    }
}

/// One cafe's latent peak mean and off-peak difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CafeEffect {
    pub peak_mean: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CafeModelParams {
    pub global: GlobalParams,
    pub cafes: Vec<CafeEffect>,
}

impl CafeModelParams {
    pub fn to_unconstrained(&self) -> Result<UnconstrainedParams, ModelError> {
        self.global.validate()?;
        let g = &self.global;
        let mut v = vec![0.0; N_GLOBAL + 2 * self.cafes.len()];
        v[LAMBDA_PEAK] = g.sigma_g_peak.ln();
        v[LAMBDA_DIFF] = g.sigma_g_diff.ln();
        v[ETA] = g.rho.atanh();
        v[MU_G_PEAK] = g.mu_g[0];
        v[MU_G_DIFF] = g.mu_g[1];
        v[LAMBDA_X] = g.sigma_x.ln();
        for (i, c) in self.cafes.iter().enumerate() {
            v[N_GLOBAL + 2 * i] = c.peak_mean;
            v[N_GLOBAL + 2 * i + 1] = c.difference;
        }
        UnconstrainedParams::new(v)
    }
}

/// Flat coordinate vector on which the sampler operates:
/// `[log sigma_g_peak, log sigma_g_diff, atanh rho, mu_g_peak, mu_g_diff, log sigma_x,
///   mu_1, b_1, ..., mu_n, b_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedParams(Vec<f64>);

impl UnconstrainedParams {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() < N_GLOBAL || !(values.len() - N_GLOBAL).is_multiple_of(2) {
            return Err(ModelError::InvalidParameters(format!(
                "{} coordinates do not form 6 + 2n",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(ModelError::InvalidParameters("non-finite coordinate".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn n_cafes(&self) -> usize {
        (self.0.len() - N_GLOBAL) / 2
    }

    pub fn to_constrained(&self) -> CafeModelParams {
        constrain(&self.0)
    }

    /// Starting point built from per-cell sample means of the data.
    pub fn initial_guess(data: &Dataset) -> Self {
        let n = data.n_cafes();
        let mut v = vec![0.0; N_GLOBAL + 2 * n];
        let mut peak = Vec::with_capacity(n);
        let mut diff = Vec::with_capacity(n);
        let mut resid_ss = 0.0;
        for i in 0..n {
            let p = crate::stats::mean(data.cell(i, Period::Peak));
            let o = crate::stats::mean(data.cell(i, Period::OffPeak));
            v[N_GLOBAL + 2 * i] = p;
            v[N_GLOBAL + 2 * i + 1] = o - p;
            peak.push(p);
            diff.push(o - p);
            resid_ss += data.cell(i, Period::Peak).iter().map(|x| (x - p).powi(2)).sum::<f64>();
            resid_ss += data.cell(i, Period::OffPeak).iter().map(|x| (x - o).powi(2)).sum::<f64>();
        }
        v[MU_G_PEAK] = crate::stats::mean(&peak);
        v[MU_G_DIFF] = crate::stats::mean(&diff);
        v[LAMBDA_PEAK] = crate::stats::std_dev(&peak).max(0.1).ln();
        v[LAMBDA_DIFF] = crate::stats::std_dev(&diff).max(0.1).ln();
        let obs = (2 * n * data.n_visits()) as f64;
        v[LAMBDA_X] = (resid_ss / obs).sqrt().max(0.05).ln();
        Self(v)
    }
}

fn constrain(v: &[f64]) -> CafeModelParams {
    CafeModelParams {
        global: GlobalParams {
            sigma_g_peak: v[LAMBDA_PEAK].exp(),
            sigma_g_diff: v[LAMBDA_DIFF].exp(),
            rho: v[ETA].tanh(),
            mu_g: [v[MU_G_PEAK], v[MU_G_DIFF]],
            sigma_x: v[LAMBDA_X].exp(),
        },
        cafes: v[N_GLOBAL..]
            .chunks_exact(2)
            .map(|c| CafeEffect {
                peak_mean: c[0],
                difference: c[1],
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Peak,
    OffPeak,
}

impl Period {
    fn slot(self) -> usize {
        match self {
            Period::Peak => 0,
            Period::OffPeak => 1,
        }
    }
}

/// Rectangular design `n_cafes x 2 periods x n_visits` of wait times in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_cafes: usize,
    n_visits: usize,
    /// Laid out `[cafe][period][visit]`.
    waits: Vec<f64>,
}

impl Dataset {
    pub fn new(n_cafes: usize, n_visits: usize, waits: Vec<f64>) -> Result<Self, ModelError> {
        if waits.len() != n_cafes * 2 * n_visits {
            return Err(ModelError::InvalidDataset(format!(
                "{} observations do not fill {n_cafes} cafes x 2 periods x {n_visits} visits",
                waits.len()
            )));
        }
        if !waits.iter().all(|w| w.is_finite()) {
            return Err(ModelError::InvalidDataset("non-finite wait time".into()));
        }
        Ok(Self {
            n_cafes,
            n_visits,
            waits,
        })
    }

    /// A design with no observations; the log joint reduces to the prior.
    pub fn empty(n_cafes: usize) -> Self {
        Self {
            n_cafes,
            n_visits: 0,
            waits: Vec::new(),
        }
    }

    pub fn n_cafes(&self) -> usize {
        self.n_cafes
    }

    pub fn n_visits(&self) -> usize {
        self.n_visits
    }

    pub fn len(&self) -> usize {
        self.waits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waits.is_empty()
    }

    pub fn cell(&self, cafe: usize, period: Period) -> &[f64] {
        let start = (cafe * 2 + period.slot()) * self.n_visits;
        &self.waits[start..start + self.n_visits]
    }

    pub fn cell_mut(&mut self, cafe: usize, period: Period) -> &mut [f64] {
        let start = (cafe * 2 + period.slot()) * self.n_visits;
        &mut self.waits[start..start + self.n_visits]
    }
}

/// Draws per-cafe effects from the population and observations from the likelihood.
pub fn simulate_dataset(
    global: &GlobalParams,
    n_cafes: usize,
    n_visits: usize,
    seed: u64,
) -> Result<(Dataset, Vec<CafeEffect>), ModelError> {
    global.validate()?;
    if n_cafes == 0 || n_visits == 0 {
        return Err(ModelError::InvalidDataset("need at least one cafe and one visit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effects = sample_effects(global, n_cafes, &mut rng);
    let noise = Normal::new(0.0, global.sigma_x).expect("validated sigma_x");
    let mut waits = Vec::with_capacity(n_cafes * 2 * n_visits);
    for e in &effects {
        for _ in 0..n_visits {
            waits.push(e.peak_mean + noise.sample(&mut rng));
        }
        for _ in 0..n_visits {
            waits.push(e.peak_mean + e.difference + noise.sample(&mut rng));
        }
    }
    Ok((Dataset::new(n_cafes, n_visits, waits)?, effects))
}

/// Correlated bivariate Normal draws via the 2x2 Cholesky factor of `Sigma_g`.
pub fn sample_effects(global: &GlobalParams, n_cafes: usize, rng: &mut ChaCha8Rng) -> Vec<CafeEffect> {
    let (sp, sd, rho) = (global.sigma_g_peak, global.sigma_g_diff, global.rho);
    let tail = (1.0 - rho * rho).sqrt();
    (0..n_cafes)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            CafeEffect {
                peak_mean: global.mu_g[0] + sp * z1,
                difference: global.mu_g[1] + sd * (rho * z1 + tail * z2),
            }
        })
        .collect()
}

fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `log p(X | theta) + log p(theta)` with all normalizing constants included.
pub fn log_joint(u: &UnconstrainedParams, data: &Dataset) -> f64 {
    let mut grad = vec![0.0; u.as_slice().len()];
    log_joint_and_grad(u.as_slice(), data, &mut grad)
}

/// Analytic gradient of [`log_joint`] with respect to every coordinate.
pub fn grad_log_joint(u: &UnconstrainedParams, data: &Dataset) -> Vec<f64> {
    let mut grad = vec![0.0; u.as_slice().len()];
    log_joint_and_grad(u.as_slice(), data, &mut grad);
    grad
}

fn log_joint_and_grad(v: &[f64], data: &Dataset, grad: &mut [f64]) -> f64 {
    let n = (v.len() - N_GLOBAL) / 2;
    debug_assert_eq!(grad.len(), v.len());
    debug_assert_eq!(n, data.n_cafes());
    grad.iter_mut().for_each(|g| *g = 0.0);

    let (lp, ld, eta) = (v[LAMBDA_PEAK], v[LAMBDA_DIFF], v[ETA]);
    let (mgp, mgd, lx) = (v[MU_G_PEAK], v[MU_G_DIFF], v[LAMBDA_X]);

    let mut total = normal_logpdf(lp, 0.0, LOG_SIGMA_G_PRIOR_SD)
        + normal_logpdf(ld, 0.0, LOG_SIGMA_G_PRIOR_SD)
        + normal_logpdf(eta, 0.0, ETA_PRIOR_SD)
        + normal_logpdf(mgp, 0.0, MU_G_PRIOR_SD)
        + normal_logpdf(mgd, 0.0, MU_G_PRIOR_SD)
        + normal_logpdf(lx, 0.0, LOG_SIGMA_X_PRIOR_SD);
    grad[LAMBDA_PEAK] = -lp / LOG_SIGMA_G_PRIOR_SD.powi(2);
    grad[LAMBDA_DIFF] = -ld / LOG_SIGMA_G_PRIOR_SD.powi(2);
    grad[ETA] = -eta / ETA_PRIOR_SD.powi(2);
    grad[MU_G_PEAK] = -mgp / MU_G_PRIOR_SD.powi(2);
    grad[MU_G_DIFF] = -mgd / MU_G_PRIOR_SD.powi(2);
    grad[LAMBDA_X] = -lx / LOG_SIGMA_X_PRIOR_SD.powi(2);

    let (sp, sd) = (lp.exp(), ld.exp());
    let rho = eta.tanh();
    let r = 1.0 - rho * rho;
    let log_norm = -2.0 * LN_SQRT_2PI - lp - ld - 0.5 * r.ln();

    let sx = lx.exp();
    let inv_var_x = 1.0 / (sx * sx);
    let mut obs_ss = 0.0;

    for i in 0..n {
        let (mu_i, b_i) = (v[N_GLOBAL + 2 * i], v[N_GLOBAL + 2 * i + 1]);
        let zp = (mu_i - mgp) / sp;
        let zd = (b_i - mgd) / sd;
        let q = zp * zp - 2.0 * rho * zp * zd + zd * zd;
        total += log_norm - q / (2.0 * r);

        let dzp = (zp - rho * zd) / r;
        let dzd = (zd - rho * zp) / r;
        grad[N_GLOBAL + 2 * i] -= dzp / sp;
        grad[N_GLOBAL + 2 * i + 1] -= dzd / sd;
        grad[MU_G_PEAK] += dzp / sp;
        grad[MU_G_DIFF] += dzd / sd;
        grad[LAMBDA_PEAK] += -1.0 + zp * dzp;
        grad[LAMBDA_DIFF] += -1.0 + zd * dzd;
        // d/d eta through rho = tanh(eta), d rho / d eta = r.
        grad[ETA] += rho + zp * zd - q * rho / r;

        if data.n_visits() > 0 {
            for &x in data.cell(i, Period::Peak) {
                let e = x - mu_i;
                obs_ss += e * e;
                grad[N_GLOBAL + 2 * i] += e * inv_var_x;
            }
            for &x in data.cell(i, Period::OffPeak) {
                let e = x - mu_i - b_i;
                obs_ss += e * e;
                grad[N_GLOBAL + 2 * i] += e * inv_var_x;
                grad[N_GLOBAL + 2 * i + 1] += e * inv_var_x;
            }
        }
    }
    let n_obs = data.len() as f64;
    total += -0.5 * obs_ss * inv_var_x - n_obs * (lx + LN_SQRT_2PI);
    grad[LAMBDA_X] += -n_obs + obs_ss * inv_var_x;
    total
}

/// Posterior of the cafe model as an HMC target.
pub struct CafePosterior<'a> {
    data: &'a Dataset,
}

impl<'a> CafePosterior<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self { data }
    }
}

impl LogDensity for CafePosterior<'_> {
    fn dim(&self) -> usize {
        N_GLOBAL + 2 * self.data.n_cafes()
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        log_joint_and_grad(q, self.data, grad)
    }
}

/// Posterior draws of the cafe model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub draws: Vec<UnconstrainedParams>,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub step_size: f64,
}

impl PosteriorChain {
    pub fn from_chain(chain: Chain) -> Self {
        let acceptance_rate = chain.acceptance_rate();
        Self {
            draws: chain.draws.into_iter().map(UnconstrainedParams).collect(),
            acceptance_rate,
            divergences: chain.divergences,
            step_size: chain.step_size,
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Posterior mean of each global quantity on the constrained scale.
    pub fn global_means(&self) -> GlobalParams {
        let mut acc = [0.0; 6];
        for d in &self.draws {
            let g = d.to_constrained().global;
            for (a, v) in acc
                .iter_mut()
                .zip([g.sigma_g_peak, g.sigma_g_diff, g.rho, g.mu_g[0], g.mu_g[1], g.sigma_x])
            {
                *a += v;
            }
        }
        let n = self.draws.len().max(1) as f64;
        GlobalParams {
            sigma_g_peak: acc[0] / n,
            sigma_g_diff: acc[1] / n,
            rho: acc[2] / n,
            mu_g: [acc[3] / n, acc[4] / n],
            sigma_x: acc[5] / n,
        }
    }
}

/// Runs HMC on the cafe posterior starting from [`UnconstrainedParams::initial_guess`].
pub fn hmc_sample(data: &Dataset, config: &HmcConfig) -> Result<PosteriorChain, ModelError> {
    if data.is_empty() {
        return Err(ModelError::InvalidDataset("cannot fit an empty dataset".into()));
    }
    let target = CafePosterior::new(data);
    let init = UnconstrainedParams::initial_guess(data).into_inner();
    let chain = hmc::sample(&target, init, config)?;
    Ok(PosteriorChain::from_chain(chain))
}

/// Structured record of how a posterior blob was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub ground_truth: GlobalParams,
    pub cafe_effects: Vec<CafeEffect>,
    pub cafe_names: Vec<String>,
    pub n_cafes: usize,
    pub n_visits: usize,
    pub data_seed: u64,
    pub hmc: HmcConfig,
    pub predictive_seed: u64,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub tuned_step_size: f64,
    pub posterior_means: GlobalParams,
}
