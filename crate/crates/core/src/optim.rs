//! Derivative-free optimisation of circuit parameters.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SPSA settings. Gains decay as `a_k = a / (k + 1 + A)^alpha` and
/// `c_k = c / (k + 1)^gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsaConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub perturbation: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub stability: f64,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            learning_rate: 0.05,
            perturbation: 0.1,
            alpha: 0.602,
            gamma: 0.101,
            stability: 20.0,
            seed: 0,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("SPSA needs at least one iteration"));
        }
        if !(self.learning_rate > 0.0 && self.perturbation > 0.0) {
            return Err(Error::invalid(
                "SPSA learning rate and perturbation must be positive",
            ));
        }
        if !(self.alpha.is_finite() && self.gamma.is_finite() && self.stability >= 0.0) {
            return Err(Error::invalid("SPSA decay constants must be finite"));
        }
        Ok(())
    }

    pub fn learning_gain(&self, k: usize) -> f64 {
        self.learning_rate / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn perturbation_gain(&self, k: usize) -> f64 {
        self.perturbation / (k as f64 + 1.0).powf(self.gamma)
    }
}

/// Uniform initial-parameter distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            low: -0.1,
            high: 0.1,
            seed: 0,
        }
    }
}

pub fn init_params(dim: usize, cfg: &InitConfig) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::invalid("parameter dimension must be at least 1"));
    }
    if cfg.low.partial_cmp(&cfg.high) != Some(std::cmp::Ordering::Less) {
        return Err(Error::invalid(format!(
            "empty init interval [{}, {}]",
            cfg.low, cfg.high
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist = Uniform::new_inclusive(cfg.low, cfg.high);
    Ok((0..dim).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct OptimizationTrace {
    /// Better of the two probe values at each iteration.
    pub values: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_value: f64,
    /// Last iterate (not itself evaluated).
    pub final_params: Vec<f64>,
    pub evaluations: usize,
}

/// A minimiser of a scalar objective over real parameter vectors.
pub trait Optimizer {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> f64,
        init: &[f64],
    ) -> Result<OptimizationTrace>;
}

#[derive(Debug, Clone, Default)]
pub struct Spsa {
    pub config: SpsaConfig,
}

impl Spsa {
    pub fn new(config: SpsaConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

fn evaluate(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    count: &mut usize,
) -> Result<f64> {
    *count += 1;
    let v = objective(theta);
    if !v.is_finite() {
        return Err(Error::NonFiniteObjective {
            value: v,
            params: theta.to_vec(),
        });
    }
    Ok(v)
}

impl Optimizer for Spsa {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> f64,
        init: &[f64],
    ) -> Result<OptimizationTrace> {
        let cfg = &self.config;
        cfg.validate()?;
        if init.is_empty() {
            return Err(Error::invalid("empty parameter vector"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dim = init.len();
        let mut theta = init.to_vec();
        let mut evaluations = 0;
        let mut best_value = evaluate(objective, &theta, &mut evaluations)?;
        let mut best_params = theta.clone();
        let mut values = Vec::with_capacity(cfg.max_iterations);

        let mut delta = vec![0.0; dim];
        let mut plus = vec![0.0; dim];
        let mut minus = vec![0.0; dim];
        for k in 0..cfg.max_iterations {
            let ak = cfg.learning_gain(k);
            let ck = cfg.perturbation_gain(k);
            for d in delta.iter_mut() {
                *d = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
            for i in 0..dim {
                plus[i] = theta[i] + ck * delta[i];
                minus[i] = theta[i] - ck * delta[i];
            }
            let f_plus = evaluate(objective, &plus, &mut evaluations)?;
            let f_minus = evaluate(objective, &minus, &mut evaluations)?;

            let (probe_best, probe_params) = if f_plus <= f_minus {
                (f_plus, &plus)
            } else {
                (f_minus, &minus)
            };
            values.push(probe_best);
            if probe_best < best_value {
                best_value = probe_best;
                best_params.clone_from(probe_params);
            }

            // delta_i = +-1, so 1 / delta_i = delta_i
            let scale = ak * (f_plus - f_minus) / (2.0 * ck);
            for (t, d) in theta.iter_mut().zip(&delta) {
                *t -= scale * d;
            }
        }

        Ok(OptimizationTrace {
            values,
            best_params,
            best_value,
            final_params: theta,
            evaluations,
        })
    }
}

/// Gradient estimate SPSA forms at iteration `k` for a given perturbation.
pub fn spsa_gradient_estimate(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    delta: &[f64],
    ck: f64,
) -> Vec<f64> {
    let plus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t + ck * d).collect();
    let minus: Vec<f64> = theta.iter().zip(delta).map(|(t, d)| t - ck * d).collect();
    let diff = (objective(&plus) - objective(&minus)) / (2.0 * ck);
    delta.iter().map(|d| diff * d).collect()
}

pub fn spsa_minimize(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    init: &[f64],
    cfg: &SpsaConfig,
) -> Result<OptimizationTrace> {
    Spsa::new(cfg.clone())?.minimize(objective, init)
}
