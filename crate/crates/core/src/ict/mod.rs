//! Interpolation consistency training.
//!
//! Each step combines a supervised cross-entropy term on a labeled minibatch
//! with a consistency term on two unlabeled minibatches `u_j`, `u_k`:
//!
//! ```text
//! u_m = mix(u_j, u_k, lambda)                       lambda ~ Beta(a, a)
//! y_m = mix(teacher(u_j), teacher(u_k), lambda)     treated as constant
//! L   = L_S + w(t) * mse(student(u_m), y_m)
//! ```
//!
//! The teacher is an exponential moving average of the student. Only the
//! student receives gradients.

mod config;
mod trainer;

pub use config::{EvalNetwork, IctConfig, Method, SupervisedMode, TeacherMode, UnlabeledPairing};
pub use trainer::{
    steps_per_epoch, train, train_step, train_with_observer, BestCheckpoint, IctModel, StepBatch,
    StepLosses, TraceRecord, TrainData, TrainOutcome, TrainState,
};

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{mse, GradientSet, LossSpec, Network};

/// `lambda * a + (1 - lambda) * b`, element-wise.
///
/// Evaluated as `b + lambda * (a - b)` so that `mix(a, a, l) == a` and
/// `mix(a, b, 0) == b` hold exactly; `lambda == 1` returns `a` as is.
pub fn mix(a: &Matrix, b: &Matrix, lambda: f64) -> Result<Matrix> {
    a.ensure_same_shape(b, "mix")?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "mix coefficient {lambda} not in [0, 1]"
        )));
    }
    if lambda == 1.0 {
        return Ok(a.clone());
    }
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| y + lambda * (x - y))
        .collect();
    Matrix::new(a.rows(), a.cols(), data)
}

/// Draws from `Beta(beta_alpha, beta_alpha)` as `x / (x + y)` with
/// `x, y ~ Gamma(beta_alpha, 1)`.
pub fn sample_lambda<R: Rng + ?Sized>(beta_alpha: f64, rng: &mut R) -> Result<f64> {
    if !(beta_alpha > 0.0 && beta_alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta_alpha {beta_alpha} must be > 0"
        )));
    }
    let gamma = Gamma::new(beta_alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("gamma shape {beta_alpha}: {e}")))?;
    loop {
        let x = gamma.sample(rng);
        let y = gamma.sample(rng);
        let s = x + y;
        // both draws can underflow to zero for tiny shapes
        if s > 0.0 {
            return Ok(x / s);
        }
    }
}

/// Sigmoid-shaped ramp `w_max * exp(-5 * (1 - min(t / ramp_steps, 1))^2)`.
///
/// `ramp_steps == 0` means no ramp.
pub fn ramp_w(step: usize, ramp_steps: usize, w_max: f64) -> f64 {
    if ramp_steps == 0 || step >= ramp_steps {
        return w_max;
    }
    let phase = 1.0 - step as f64 / ramp_steps as f64;
    w_max * (-5.0 * phase * phase).exp()
}

/// Predictions of `net` on `u`, used as constant regression targets.
pub fn fake_labels(net: &Network, u: &Matrix) -> Result<Matrix> {
    if u.rows() == 0 {
        return Err(Error::InvalidArgument(
            "fake labels need a non-empty batch".into(),
        ));
    }
    net.forward(u)
}

/// Interpolated inputs and targets for one consistency term.
#[derive(Debug, Clone, PartialEq)]
pub struct MixPair {
    pub lambda: f64,
    pub mixed_input: Matrix,
    pub mixed_target: Matrix,
}

impl MixPair {
    /// Mixes `u_j`/`u_k` and the target network's predictions on them.
    pub fn new(target_net: &Network, u_j: &Matrix, u_k: &Matrix, lambda: f64) -> Result<Self> {
        u_j.ensure_same_shape(u_k, "unlabeled batches")?;
        let y_j = fake_labels(target_net, u_j)?;
        let y_k = fake_labels(target_net, u_k)?;
        Ok(Self {
            lambda,
            mixed_input: mix(u_j, u_k, lambda)?,
            mixed_target: mix(&y_j, &y_k, lambda)?,
        })
    }
}

/// Consistency loss `mse(student(mix(u_j, u_k)), mix(teacher(u_j), teacher(u_k)))`.
pub fn ict_consistency_loss(
    student: &Network,
    teacher: &Network,
    u_j: &Matrix,
    u_k: &Matrix,
    lambda: f64,
) -> Result<f64> {
    let pair = MixPair::new(teacher, u_j, u_k, lambda)?;
    mse(&student.forward(&pair.mixed_input)?, &pair.mixed_target)
}

/// Consistency loss and its gradient with respect to the student only.
pub fn ict_consistency_backward(
    student: &Network,
    teacher: &Network,
    u_j: &Matrix,
    u_k: &Matrix,
    lambda: f64,
) -> Result<(f64, GradientSet)> {
    let pair = MixPair::new(teacher, u_j, u_k, lambda)?;
    student.backward(&pair.mixed_input, &LossSpec::Mse(&pair.mixed_target))
}

/// The consistency residual measured on logits instead of probabilities.
///
/// Training never uses this; it exists so affine networks can be checked
/// against the exact interpolation identity.
pub fn consistency_residual_logits(
    student: &Network,
    teacher: &Network,
    u_j: &Matrix,
    u_k: &Matrix,
    lambda: f64,
) -> Result<f64> {
    u_j.ensure_same_shape(u_k, "unlabeled batches")?;
    let pred = student.forward_logits(&mix(u_j, u_k, lambda)?)?;
    let target = mix(
        &teacher.forward_logits(u_j)?,
        &teacher.forward_logits(u_k)?,
        lambda,
    )?;
    mse(&pred, &target)
}
