//! SGD with Nesterov momentum and a cosine-annealed learning rate, plus the
//! exponential-moving-average teacher.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nn::{GradientSet, Network};

/// `base_lr * 0.5 * (1 + cos(pi * step / total_steps))`.
pub fn cosine_lr(step: usize, total_steps: usize, base_lr: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidArgument(
            "cosine schedule needs total_steps > 0".into(),
        ));
    }
    if step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} beyond schedule length {total_steps}"
        )));
    }
    if step == total_steps {
        // cos(pi) rounds to a value slightly above -1
        return Ok(0.0);
    }
    Ok(base_lr * 0.5 * (1.0 + (PI * step as f64 / total_steps as f64).cos()))
}

/// Optimizer state for Nesterov SGD with coupled L2 regularization.
///
/// Each step uses `g' = g + l2 * theta` and the learning rate
/// `lr = cosine_lr(step, total_steps, base_lr)`, then
///
/// ```text
/// v     <- momentum * v - lr * g'
/// theta <- theta + momentum * v - lr * g'
/// ```
#[derive(Debug, Clone)]
pub struct Sgd {
    velocity: GradientSet,
    momentum: f64,
    base_lr: f64,
    l2: f64,
    step: usize,
    total_steps: usize,
}

impl Sgd {
    pub fn new(
        net: &Network,
        momentum: f64,
        base_lr: f64,
        l2: f64,
        total_steps: usize,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {momentum} not in [0, 1)"
            )));
        }
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "base_lr {base_lr} must be > 0"
            )));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidArgument(format!("l2 {l2} must be >= 0")));
        }
        if total_steps == 0 {
            return Err(Error::InvalidArgument("total_steps must be > 0".into()));
        }
        Ok(Self {
            velocity: GradientSet::zeros_like(net),
            momentum,
            base_lr,
            l2,
            step: 0,
            total_steps,
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn velocity(&self) -> &GradientSet {
        &self.velocity
    }

    /// Learning rate the next call to [`Sgd::step`] will use.
    pub fn current_lr(&self) -> Result<f64> {
        cosine_lr(self.step, self.total_steps, self.base_lr)
    }

    /// Applies one update in place and returns the learning rate used.
    ///
    /// Nothing is modified when the gradients are non-finite or misshapen.
    pub fn step(&mut self, net: &mut Network, grads: &GradientSet) -> Result<f64> {
        if !grads.congruent_with(net) || !self.velocity.congruent_with(net) {
            return Err(Error::Dimension(
                "gradient shapes do not match the network".into(),
            ));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFinite(format!("gradient of layer {layer}")));
        }
        if self.step >= self.total_steps {
            return Err(Error::InvalidArgument(format!(
                "schedule exhausted after {} steps",
                self.total_steps
            )));
        }
        let lr = self.current_lr()?;
        let mu = self.momentum;
        let l2 = self.l2;
        for ((layer, g), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.velocity.layers)
        {
            let update = |theta: &mut f64, g: f64, v: &mut f64| {
                let eff = g + l2 * *theta;
                *v = mu * *v - lr * eff;
                *theta += mu * *v - lr * eff;
            };
            for ((theta, &gw), vw) in layer
                .weights_mut()
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
                .zip(v.weights.as_mut_slice())
            {
                update(theta, gw, vw);
            }
            for ((theta, &gb), vb) in layer.bias_mut().iter_mut().zip(&g.bias).zip(&mut v.bias) {
                update(theta, gb, vb);
            }
        }
        self.step += 1;
        Ok(lr)
    }
}

/// Teacher parameters tracked as an exponential moving average of a student.
#[derive(Debug, Clone)]
pub struct EmaTeacher {
    params: Network,
    decay: f64,
}

impl EmaTeacher {
    /// Starts the teacher as a copy of `student`. `decay` may be 1 (frozen).
    pub fn new(student: &Network, decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidArgument(format!(
                "ema decay {decay} not in [0, 1]"
            )));
        }
        Ok(Self {
            params: student.clone(),
            decay,
        })
    }

    pub fn from_parts(params: Network, decay: f64) -> Result<Self> {
        let mut t = Self::new(&params, decay)?;
        t.params = params;
        Ok(t)
    }

    pub fn network(&self) -> &Network {
        &self.params
    }

    pub fn into_network(self) -> Network {
        self.params
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `theta' <- decay * theta' + (1 - decay) * theta`, element-wise.
    pub fn update(&mut self, student: &Network) -> Result<()> {
        let decay = self.decay;
        self.update_with_decay(student, decay)
    }

    pub fn update_with_decay(&mut self, student: &Network, decay: f64) -> Result<()> {
        self.params.ensure_same_shape(student)?;
        let keep = decay;
        let take = 1.0 - decay;
        for (t, s) in self.params.layers_mut().iter_mut().zip(student.layers()) {
            for (a, &b) in t
                .weights_mut()
                .as_mut_slice()
                .iter_mut()
                .zip(s.weights().as_slice())
            {
                *a = keep * *a + take * b;
            }
            for (a, &b) in t.bias_mut().iter_mut().zip(s.bias()) {
                *a = keep * *a + take * b;
            }
        }
        Ok(())
    }
}
