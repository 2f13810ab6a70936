//! Minibatch SGD with classical momentum, used to produce trained parameters
//! at which the learning coefficient is then estimated.

use crate::datagen::{Dataset, MinibatchSchedule};
use crate::error::{Error, Result};
use crate::models::{self, ModelSpec, ParamVector};
use crate::numerics::rng::Rng;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must lie in [0,1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidArgument(format!(
                "batch size {} for dataset of size {n}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Classical momentum SGD on the minibatch NLL:
/// v <- mu v - lr grad, w <- w + v. Returns the final parameters and the
/// per-step minibatch losses; a non-finite loss aborts with the partial
/// curve preserved in the error.
pub fn sgd_train(
    spec: &ModelSpec,
    w_init: &ParamVector,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, Vec<f64>)> {
    cfg.validate(data.n)?;
    if w_init.len() != spec.param_count() {
        return Err(Error::DimensionMismatch(
            "initial parameters do not match the model".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut schedule = MinibatchSchedule::new(data.n, cfg.batch_size, &mut rng)?;
    let dim = spec.param_count();
    let mut w = w_init.clone();
    let mut velocity = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut curve = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let batch = schedule.next_batch();
        let loss = models::nll_loss_grad(spec, &w, data, batch, &mut grad)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                step,
                partial_curve: curve,
            });
        }
        curve.push(loss);
        let ws = w.as_mut_slice();
        let mut finite = true;
        for i in 0..dim {
            velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
            ws[i] += velocity[i];
            finite &= ws[i].is_finite();
        }
        if !finite {
            return Err(Error::TrainingDiverged {
                step,
                partial_curve: curve,
            });
        }
    }
    Ok((w, curve))
}
