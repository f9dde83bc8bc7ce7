//! Static-trajectory Hamiltonian Monte Carlo with an identity mass matrix.
//!
//! Warmup tunes a single step size by dual averaging towards a target acceptance
//! probability; sampling then runs with that step size frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Energy error beyond which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmcError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("at least one leapfrog step is required")]
    NoLeapfrogSteps,
    #[error("initial point has dimension {got}, target expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("log density is not finite at the initial point")]
    NonFiniteStart,
}

/// A differentiable log density over `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, q: &[f64]) -> f64 {
        let mut g = vec![0.0; q.len()];
        self.log_density_and_grad(q, &mut g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub n_samples: usize,
    pub warmup: usize,
    /// Initial step size; fixed for the whole run when `adapt_step_size` is false.
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub adapt_step_size: bool,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            warmup: 1000,
            step_size: 0.05,
            n_leapfrog: 32,
            seed: 0,
            target_accept: 0.8,
            adapt_step_size: true,
        }
    }
}

/// Post-warmup draws and sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub draws: Vec<Vec<f64>>,
    pub accepted: usize,
    pub divergences: usize,
    pub step_size: f64,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.draws.is_empty() {
            0.0
        } else {
            self.accepted as f64 / self.draws.len() as f64
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.draws.first().map_or(0, Vec::len);
        let mut m = vec![0.0; d];
        for q in &self.draws {
            for (a, b) in m.iter_mut().zip(q) {
                *a += b;
            }
        }
        let n = self.draws.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Phase-space point with its cached log density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl State {
    pub fn new<T: LogDensity>(target: &T, position: Vec<f64>, momentum: Vec<f64>) -> Self {
        let mut grad = vec![0.0; position.len()];
        let log_density = target.log_density_and_grad(&position, &mut grad);
        Self {
            position,
            momentum,
            log_density,
            grad,
        }
    }

    /// `H = -log p(q) + |p|^2 / 2`.
    pub fn hamiltonian(&self) -> f64 {
        -self.log_density + 0.5 * self.momentum.iter().map(|p| p * p).sum::<f64>()
    }
}

/// Velocity-Verlet integration: half momentum step, alternating full steps, half step.
pub fn leapfrog<T: LogDensity>(target: &T, state: &State, step_size: f64, n_steps: usize) -> State {
    let mut q = state.position.clone();
    let mut p = state.momentum.clone();
    let mut grad = state.grad.clone();
    let mut logp = state.log_density;
    for _ in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * gi;
        }
        for (qi, pi) in q.iter_mut().zip(&p) {
            *qi += step_size * pi;
        }
        logp = target.log_density_and_grad(&q, &mut grad);
        if !logp.is_finite() {
            break;
        }
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi += 0.5 * step_size * gi;
        }
    }
    State {
        position: q,
        momentum: p,
        log_density: logp,
        grad,
    }
}

/// Nesterov dual averaging of `log(step_size)`.
struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(initial: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * initial).ln(),
            target,
            h_bar: 0.0,
            log_eps: initial.ln(),
            log_eps_bar: 0.0,
            t: 0.0,
        }
    }

    fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - self.t.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.t.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        self.log_eps.exp()
    }

    fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Runs warmup (with optional step-size tuning) then `n_samples` recorded transitions.
pub fn sample<T: LogDensity>(target: &T, init: Vec<f64>, config: &HmcConfig) -> Result<Chain, HmcError> {
    if !(config.step_size > 0.0 && config.step_size.is_finite()) {
        return Err(HmcError::InvalidStepSize(config.step_size));
    }
    if config.n_leapfrog == 0 {
        return Err(HmcError::NoLeapfrogSteps);
    }
    if init.len() != target.dim() {
        return Err(HmcError::DimensionMismatch {
            expected: target.dim(),
            got: init.len(),
        });
    }
    let dim = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = State::new(target, init, vec![0.0; dim]);
    if !current.log_density.is_finite() {
        return Err(HmcError::NonFiniteStart);
    }

    let mut step = config.step_size;
    let mut adapter = DualAveraging::new(step, config.target_accept);
    for _ in 0..config.warmup {
        let (next, accept_prob, _, _) = transition(target, &current, step, config.n_leapfrog, &mut rng);
        current = next;
        if config.adapt_step_size {
            step = adapter.update(accept_prob);
        }
    }
    if config.adapt_step_size && config.warmup > 0 {
        step = adapter.final_step();
    }

    let mut chain = Chain {
        draws: Vec::with_capacity(config.n_samples),
        accepted: 0,
        divergences: 0,
        step_size: step,
    };
    for _ in 0..config.n_samples {
        let (next, _, accepted, divergent) = transition(target, &current, step, config.n_leapfrog, &mut rng);
        current = next;
        chain.accepted += usize::from(accepted);
        chain.divergences += usize::from(divergent);
        chain.draws.push(current.position.clone());
    }
    Ok(chain)
}

/// One HMC transition: returns the next state, the Metropolis acceptance
/// probability, whether the proposal was accepted, and whether it diverged.
fn transition<T: LogDensity>(
    target: &T,
    current: &State,
    step: f64,
    n_leapfrog: usize,
    rng: &mut ChaCha8Rng,
) -> (State, f64, bool, bool) {
    let momentum: Vec<f64> = (0..current.position.len())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let start = State {
        momentum,
        ..current.clone()
    };
    let h0 = start.hamiltonian();
    let proposal = leapfrog(target, &start, step, n_leapfrog);
    let h1 = proposal.hamiltonian();
    let u: f64 = rng.random();
    if !h1.is_finite() || h1 - h0 > DIVERGENCE_THRESHOLD {
        return (start, 0.0, false, true);
    }
    let accept_prob = (h0 - h1).exp().min(1.0);
    if u < accept_prob {
        (proposal, accept_prob, true, false)
    } else {
        (start, accept_prob, false, false)
    }
}
