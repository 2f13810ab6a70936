//! Localized tempered-posterior samplers: SGLD (optionally preconditioned)
//! and full-batch MALA, plus the MALA acceptance probe used as a step-size
//! diagnostic.
//!
//! The target density is pi(w) proportional to
//! exp(-n beta L_n(w) - (gamma/2) ||w - w*||^2), and the SGLD update is
//!
//!   dw = (eps/2) [ gamma (w* - w) - n beta grad L_m(w) ] + N(0, eps)
//!
//! where L_m is the minibatch NLL and the injected noise has variance eps
//! (standard deviation sqrt(eps)). A diagonal preconditioner, when present,
//! multiplies the drift term only; a config flag extends it to the noise
//! covariance for study.

use rayon::prelude::*;

use crate::datagen::{Dataset, MinibatchSchedule};
use crate::error::{Error, Result};
use crate::models::{self, ModelSpec};
use crate::numerics::linalg::squared_distance;
use crate::numerics::rng::Rng;
use crate::theory::Potential;

/// Hyperparameters for one sampling run.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    /// Step size; also the variance of the injected Gaussian noise.
    pub epsilon: f64,
    /// Localization strength of the Gaussian restraint toward w*.
    pub gamma: f64,
    /// Inverse temperature; `None` resolves to 1/log n at run time.
    pub beta: Option<f64>,
    /// Chain length.
    pub steps: usize,
    /// Fraction of the chain discarded before averaging.
    pub burnin_frac: f64,
    /// Minibatch size.
    pub batch_size: usize,
    /// Number of independent chains.
    pub chains: usize,
    /// Base seed; chain i uses seed + i.
    pub seed: u64,
    /// Optional diagonal preconditioner applied to the drift.
    pub preconditioner: Option<Vec<f64>>,
    /// Also scale the noise covariance by the preconditioner (off by
    /// default; the drift-only form is the reference behavior).
    pub precondition_noise: bool,
    /// Apply the preconditioner to the localization drift as well (the
    /// default). When off, A multiplies the likelihood gradient only, which
    /// keeps the restraint's strength invariant under layer reparameterization
    /// (a localizer in the metric induced by A).
    pub precondition_localizer: bool,
    /// Evaluate a full-batch MALA acceptance probe every this many SGLD
    /// steps; 0 disables probing.
    pub mala_probe_stride: usize,
    /// Record the full-batch loss at every step instead of the recycled
    /// minibatch loss (the dynamics stay minibatch). Used when the estimate
    /// should be tallied against L_n exactly.
    pub record_full_batch_loss: bool,
    /// Keep a copy of the parameter vector every this many steps (0 = off);
    /// feeds histogram diagnostics and plots.
    pub state_record_stride: usize,
}

impl SamplerConfig {
    pub fn new(epsilon: f64, gamma: f64, steps: usize, batch_size: usize, seed: u64) -> Self {
        SamplerConfig {
            epsilon,
            gamma,
            beta: None,
            steps,
            burnin_frac: 0.9,
            batch_size,
            chains: 1,
            seed,
            preconditioner: None,
            precondition_noise: false,
            precondition_localizer: true,
            mala_probe_stride: 20,
            record_full_batch_loss: false,
            state_record_stride: 0,
        }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_probe_stride(mut self, stride: usize) -> Self {
        self.mala_probe_stride = stride;
        self
    }

    pub fn validate(&self, dim: usize, n: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "beta must be positive, got {b}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.burnin_frac) {
            return Err(Error::InvalidArgument(format!(
                "burnin_frac must lie in [0,1), got {}",
                self.burnin_frac
            )));
        }
        if self.steps == 0 || self.chains == 0 {
            return Err(Error::InvalidArgument(
                "steps and chains must be positive".into(),
            ));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidArgument(format!(
                "batch size {} for dataset of size {n}",
                self.batch_size
            )));
        }
        if let Some(a) = &self.preconditioner {
            if a.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "preconditioner length {} for {dim} parameters",
                    a.len()
                )));
            }
            if a.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "preconditioner entries must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolved inverse temperature: the configured value or 1/log n.
    pub fn beta_for(&self, n: usize) -> f64 {
        self.beta.unwrap_or_else(|| 1.0 / (n as f64).ln())
    }

    /// First retained step index.
    pub fn burnin_len(&self) -> usize {
        (self.steps as f64 * self.burnin_frac).floor() as usize
    }
}

/// Per-step record of one chain.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    /// Loss recorded at each step before the update; the recycled minibatch
    /// loss for SGLD, the full-batch loss for MALA.
    pub losses: Vec<f64>,
    /// (step, acceptance probability) pairs: probe values for SGLD, the
    /// actual Metropolis probabilities for MALA.
    pub probes: Vec<(usize, f64)>,
    /// Parameters at the end of the run (or at divergence).
    pub final_params: Vec<f64>,
    pub steps_taken: usize,
    pub diverged: bool,
    /// Accepted moves (MALA only).
    pub accepted: Option<usize>,
    /// Time-averaged squared distance to w* over recorded steps.
    pub mean_dist2: f64,
    /// Maximum squared distance to w* over recorded steps.
    pub max_dist2: f64,
    /// Parameter snapshots on the configured stride (pre-update states).
    pub states: Vec<Vec<f64>>,
}

impl ChainTrace {
    pub fn mean_probe_acceptance(&self) -> Option<f64> {
        if self.probes.is_empty() {
            return None;
        }
        Some(self.probes.iter().map(|p| p.1).sum::<f64>() / self.probes.len() as f64)
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        self.accepted
            .map(|a| a as f64 / self.steps_taken.max(1) as f64)
    }
}

/// What the samplers need from a loss: minibatch loss/gradient for the
/// dynamics and full-batch loss/gradient for probes and reference values.
/// Analytic potentials ignore the batch argument.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Dataset size n (nominal sample size for analytic potentials).
    fn data_size(&self) -> usize;
    fn batch_loss_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64;
    fn full_loss(&self, w: &[f64]) -> f64;
    fn full_loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;
    /// Whether minibatch scheduling applies.
    fn uses_batches(&self) -> bool {
        true
    }
}

/// Negative log likelihood of a model on a dataset.
pub struct ModelObjective<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a Dataset,
    all_indices: Vec<usize>,
}

impl<'a> ModelObjective<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a Dataset) -> Result<Self> {
        // Validate shapes once so the per-step path can skip checks.
        let probe = crate::models::ParamVector::zeros(spec);
        models::nll_loss(spec, &probe, data, &[0])?;
        Ok(ModelObjective {
            spec,
            data,
            all_indices: (0..data.n).collect(),
        })
    }
}

impl Objective for ModelObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn data_size(&self) -> usize {
        self.data.n
    }

    fn batch_loss_grad(&self, w: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        models::nll_loss_grad_raw(self.spec, w, self.data, batch, grad)
    }

    fn full_loss(&self, w: &[f64]) -> f64 {
        models::nll_loss_raw(self.spec, w, self.data, &self.all_indices)
    }

    fn full_loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        models::nll_loss_grad_raw(self.spec, w, self.data, &self.all_indices, grad)
    }
}

/// Analytic population loss standing in for L_n at a nominal sample size.
pub struct PotentialObjective<'a> {
    pub potential: &'a Potential,
    pub nominal_n: usize,
}

impl Objective for PotentialObjective<'_> {
    fn dim(&self) -> usize {
        self.potential.dim
    }

    fn data_size(&self) -> usize {
        self.nominal_n
    }

    fn batch_loss_grad(&self, w: &[f64], _batch: &[usize], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.potential.grad(w));
        self.potential.eval(w)
    }

    fn full_loss(&self, w: &[f64]) -> f64 {
        self.potential.eval(w)
    }

    fn full_loss_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.potential.grad(w));
        self.potential.eval(w)
    }

    fn uses_batches(&self) -> bool {
        false
    }
}

/// Metropolis-Hastings acceptance probability for a Langevin proposal with
/// step size eps, from precomputed log-target values and gradients at the
/// current state and the proposal. The proposal density is
/// q(b|a) prop exp(-||b - a - (eps/2) grad log pi(a)||^2 / (2 eps)).
pub fn mala_acceptance_from_parts(
    w: &[f64],
    w_prime: &[f64],
    epsilon: f64,
    log_pi_w: f64,
    grad_log_pi_w: &[f64],
    log_pi_wp: f64,
    grad_log_pi_wp: &[f64],
) -> f64 {
    let mut fwd = 0.0; // ||w' - w - (eps/2) g(w)||^2
    let mut bwd = 0.0; // ||w - w' - (eps/2) g(w')||^2
    for i in 0..w.len() {
        let df = w_prime[i] - w[i] - 0.5 * epsilon * grad_log_pi_w[i];
        let db = w[i] - w_prime[i] - 0.5 * epsilon * grad_log_pi_wp[i];
        fwd += df * df;
        bwd += db * db;
    }
    let log_alpha = (log_pi_wp - log_pi_w) + (fwd - bwd) / (2.0 * epsilon);
    if log_alpha.is_nan() {
        return 0.0;
    }
    log_alpha.min(0.0).exp().clamp(0.0, 1.0)
}

/// Acceptance probe against an arbitrary log target (value and gradient).
/// Used on a stride of SGLD steps purely as a diagnostic; no rejection is
/// ever applied to the SGLD chain itself.
pub fn mala_acceptance_probe(
    w: &[f64],
    w_prime: &[f64],
    epsilon: f64,
    log_target: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
) -> f64 {
    let (lp_w, g_w) = log_target(w);
    let (lp_wp, g_wp) = log_target(w_prime);
    mala_acceptance_from_parts(w, w_prime, epsilon, lp_w, &g_w, lp_wp, &g_wp)
}

/// log pi and grad log pi of the localized tempered posterior.
fn log_target(
    obj: &dyn Objective,
    w: &[f64],
    w_star: &[f64],
    n_beta: f64,
    gamma: f64,
    grad_buf: &mut [f64],
    grad_out: &mut [f64],
) -> f64 {
    let loss = obj.full_loss_grad(w, grad_buf);
    let mut lp = -n_beta * loss;
    for i in 0..w.len() {
        let d = w[i] - w_star[i];
        lp -= 0.5 * gamma * d * d;
        grad_out[i] = -n_beta * grad_buf[i] - gamma * d;
    }
    lp
}

fn divergence_threshold(first_loss: f64) -> f64 {
    // A chain is flagged once the loss exceeds a million times its initial
    // scale; the +1 keeps the threshold meaningful when the initial loss is
    // zero (analytic potentials at their minimum).
    1e6 * (1.0 + first_loss.abs())
}

/// One SGLD chain initialized at w*. Records the recycled forward-pass
/// minibatch loss before every update; flags and truncates on divergence.
pub fn sgld_chain(
    obj: &dyn Objective,
    w_star: &[f64],
    cfg: &SamplerConfig,
    chain_index: usize,
) -> Result<ChainTrace> {
    let dim = obj.dim();
    let n = obj.data_size();
    if w_star.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "w* of length {} for {dim} parameters",
            w_star.len()
        )));
    }
    cfg.validate(dim, n)?;
    let mut rng = Rng::seed_from_u64(cfg.seed.wrapping_add(chain_index as u64));
    let mut schedule = if obj.uses_batches() {
        Some(MinibatchSchedule::new(n, cfg.batch_size, &mut rng)?)
    } else {
        None
    };
    let beta = cfg.beta_for(n);
    let n_beta = n as f64 * beta;
    let sqrt_eps = cfg.epsilon.sqrt();

    let mut w = w_star.to_vec();
    let mut grad = vec![0.0; dim];
    let mut probe_grad = vec![0.0; dim];
    let mut probe_dir = vec![0.0; dim];
    let mut prev_w = vec![0.0; dim];

    let mut losses = Vec::with_capacity(cfg.steps);
    let mut probes = Vec::new();
    let mut states = Vec::new();
    let mut diverged = false;
    let mut threshold = f64::INFINITY;
    let mut sum_dist2 = 0.0;
    let mut max_dist2 = 0.0f64;

    for t in 0..cfg.steps {
        let empty: [usize; 0] = [];
        let loss = match &mut schedule {
            Some(s) => obj.batch_loss_grad(&w, s.next_batch(), &mut grad),
            None => obj.batch_loss_grad(&w, &empty, &mut grad),
        };
        let recorded = if cfg.record_full_batch_loss && obj.uses_batches() {
            obj.full_loss(&w)
        } else {
            loss
        };
        if t == 0 {
            threshold = divergence_threshold(recorded);
        }
        if !recorded.is_finite() || recorded > threshold {
            diverged = true;
            break;
        }
        losses.push(recorded);
        if cfg.state_record_stride > 0 && t % cfg.state_record_stride == 0 {
            states.push(w.clone());
        }
        let d2 = squared_distance(&w, w_star);
        sum_dist2 += d2;
        max_dist2 = max_dist2.max(d2);

        let probing = cfg.mala_probe_stride > 0 && t % cfg.mala_probe_stride == 0;
        if probing {
            prev_w.copy_from_slice(&w);
        }

        let mut bad_param = false;
        for i in 0..dim {
            let restore = 0.5 * cfg.epsilon * cfg.gamma * (w_star[i] - w[i]);
            let mut pull = -0.5 * cfg.epsilon * n_beta * grad[i];
            let mut noise_sd = sqrt_eps;
            if let Some(a) = &cfg.preconditioner {
                pull *= a[i];
                let drift = if cfg.precondition_localizer {
                    a[i] * restore + pull
                } else {
                    restore + pull
                };
                if cfg.precondition_noise {
                    noise_sd = (cfg.epsilon * a[i]).sqrt();
                }
                w[i] += drift + noise_sd * rng.standard_normal();
            } else {
                w[i] += restore + pull + noise_sd * rng.standard_normal();
            }
            if !w[i].is_finite() {
                bad_param = true;
            }
        }
        if bad_param {
            diverged = true;
            break;
        }

        if probing {
            // Rate the realized transition under the full-batch kernel.
            let lp_prev = log_target(
                obj, &prev_w, w_star, n_beta, cfg.gamma, &mut grad, &mut probe_grad,
            );
            let g_prev = probe_grad.clone();
            let lp_new = log_target(
                obj, &w, w_star, n_beta, cfg.gamma, &mut grad, &mut probe_dir,
            );
            let alpha = mala_acceptance_from_parts(
                &prev_w, &w, cfg.epsilon, lp_prev, &g_prev, lp_new, &probe_dir,
            );
            probes.push((t, alpha));
        }
    }

    let steps_taken = losses.len();
    Ok(ChainTrace {
        losses,
        probes,
        final_params: w,
        steps_taken,
        diverged,
        accepted: None,
        mean_dist2: if steps_taken > 0 {
            sum_dist2 / steps_taken as f64
        } else {
            0.0
        },
        max_dist2,
        states,
    })
}

/// One full-batch MALA chain targeting the same localized tempered
/// posterior. Rejected proposals repeat the current state; the acceptance
/// probability of every step is recorded.
pub fn mala_chain(
    obj: &dyn Objective,
    w_star: &[f64],
    cfg: &SamplerConfig,
    chain_index: usize,
) -> Result<ChainTrace> {
    let dim = obj.dim();
    let n = obj.data_size();
    if w_star.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "w* of length {} for {dim} parameters",
            w_star.len()
        )));
    }
    cfg.validate(dim, n)?;
    let mut rng = Rng::seed_from_u64(cfg.seed.wrapping_add(chain_index as u64));
    let beta = cfg.beta_for(n);
    let n_beta = n as f64 * beta;
    let sqrt_eps = cfg.epsilon.sqrt();

    let mut w = w_star.to_vec();
    let mut grad_buf = vec![0.0; dim];
    let mut g_cur = vec![0.0; dim];
    let mut g_prop = vec![0.0; dim];
    let mut proposal = vec![0.0; dim];

    let mut loss_cur = obj.full_loss(&w);
    let threshold = divergence_threshold(loss_cur);
    let mut lp_cur = {
        let lp = log_target(obj, &w, w_star, n_beta, cfg.gamma, &mut grad_buf, &mut g_cur);
        lp
    };

    let mut losses = Vec::with_capacity(cfg.steps);
    let mut probes = Vec::with_capacity(cfg.steps);
    let mut states = Vec::new();
    let mut accepted = 0usize;
    let mut diverged = false;
    let mut sum_dist2 = 0.0;
    let mut max_dist2 = 0.0f64;

    for t in 0..cfg.steps {
        if !loss_cur.is_finite() || loss_cur > threshold {
            diverged = true;
            break;
        }
        losses.push(loss_cur);
        if cfg.state_record_stride > 0 && t % cfg.state_record_stride == 0 {
            states.push(w.clone());
        }
        let d2 = squared_distance(&w, w_star);
        sum_dist2 += d2;
        max_dist2 = max_dist2.max(d2);

        for i in 0..dim {
            proposal[i] = w[i] + 0.5 * cfg.epsilon * g_cur[i] + sqrt_eps * rng.standard_normal();
        }
        let lp_prop = log_target(
            obj, &proposal, w_star, n_beta, cfg.gamma, &mut grad_buf, &mut g_prop,
        );
        let loss_prop = grad_free_loss(lp_prop, &proposal, w_star, n_beta, cfg.gamma);
        let alpha =
            mala_acceptance_from_parts(&w, &proposal, cfg.epsilon, lp_cur, &g_cur, lp_prop, &g_prop);
        probes.push((t, alpha));
        if rng.uniform() < alpha {
            accepted += 1;
            w.copy_from_slice(&proposal);
            std::mem::swap(&mut g_cur, &mut g_prop);
            lp_cur = lp_prop;
            loss_cur = loss_prop;
        }
    }

    let steps_taken = losses.len();
    Ok(ChainTrace {
        losses,
        probes,
        final_params: w,
        steps_taken,
        diverged,
        accepted: Some(accepted),
        mean_dist2: if steps_taken > 0 {
            sum_dist2 / steps_taken as f64
        } else {
            0.0
        },
        max_dist2,
        states,
    })
}

/// Recover L_n(w) from log pi(w) = -n beta L_n(w) - (gamma/2)||w - w*||^2.
fn grad_free_loss(log_pi: f64, w: &[f64], w_star: &[f64], n_beta: f64, gamma: f64) -> f64 {
    let penalty = 0.5 * gamma * squared_distance(w, w_star);
    (-log_pi - penalty) / n_beta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Sgld,
    Mala,
}

/// Run the configured number of independent chains in parallel. Chain i is
/// seeded with seed + i, so results do not depend on scheduling.
pub fn run_chains(
    obj: &dyn Objective,
    w_star: &[f64],
    cfg: &SamplerConfig,
    kind: SamplerKind,
) -> Result<Vec<ChainTrace>> {
    (0..cfg.chains)
        .into_par_iter()
        .map(|i| match kind {
            SamplerKind::Sgld => sgld_chain(obj, w_star, cfg, i),
            SamplerKind::Mala => mala_chain(obj, w_star, cfg, i),
        })
        .collect()
}
