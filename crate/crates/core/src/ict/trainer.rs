use rand::seq::SliceRandom;
use serde::Serialize;

use super::config::{EvalNetwork, IctConfig, SupervisedMode, TeacherMode, UnlabeledPairing};
use super::{mix, ramp_w, sample_lambda, MixPair};
use crate::data::{batch_indices, CyclicBatches, Dataset};
use crate::error::{Error, Result};
use crate::eval::error_rate;
use crate::matrix::Matrix;
use crate::nn::{mse, LossSpec, Network};
use crate::optim::{EmaTeacher, Sgd};
use crate::seed::{self, derive_seed, tags};

/// One logged optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// 1-based index of the step.
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub w: f64,
    #[serde(rename = "L_S")]
    pub supervised_loss: f64,
    #[serde(rename = "L_US")]
    pub consistency_loss: f64,
    #[serde(rename = "L")]
    pub total_loss: f64,
    /// Set on the last step of each epoch when a validation set is present.
    pub val_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub supervised: f64,
    pub consistency: f64,
    pub total: f64,
}

/// Mutable bookkeeping of a run.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Completed optimizer steps.
    pub step: usize,
    /// Completed epochs.
    pub epoch: usize,
    pub current_w: f64,
    pub current_lr: f64,
    pub total_steps: usize,
    pub ramp_steps: usize,
    /// Draws mixing coefficients and labeled pairings.
    pub rng: seed::Rng,
    pub loss_trace: Vec<TraceRecord>,
}

impl TrainState {
    pub fn new(config: &IctConfig, total_steps: usize) -> Self {
        let ramp_steps = (config.ramp_fraction * total_steps as f64).round() as usize;
        Self {
            step: 0,
            epoch: 0,
            current_w: 0.0,
            current_lr: config.base_lr,
            total_steps,
            ramp_steps: ramp_steps.max(1),
            rng: seed::rng_for(config.seed, tags::STEP),
            loss_trace: Vec::new(),
        }
    }
}

/// Student, teacher and optimizer state.
#[derive(Debug, Clone)]
pub struct IctModel {
    pub student: Network,
    pub teacher: EmaTeacher,
    pub optimizer: Sgd,
}

impl IctModel {
    pub fn new(student: Network, config: &IctConfig, total_steps: usize) -> Result<Self> {
        let teacher = EmaTeacher::new(&student, config.ema_decay)?;
        let optimizer = Sgd::new(
            &student,
            config.momentum,
            config.base_lr,
            config.l2,
            total_steps,
        )?;
        Ok(Self {
            student,
            teacher,
            optimizer,
        })
    }

    pub fn eval_network(&self, which: EvalNetwork) -> &Network {
        match which {
            EvalNetwork::Teacher => self.teacher.network(),
            EvalNetwork::Student => &self.student,
        }
    }
}

/// Inputs of a single step.
#[derive(Debug, Clone, Copy)]
pub struct StepBatch<'a> {
    pub labeled_inputs: &'a Matrix,
    /// One-hot (or soft) targets for `labeled_inputs`.
    pub labeled_targets: &'a Matrix,
    pub unlabeled_j: &'a Matrix,
    pub unlabeled_k: &'a Matrix,
}

/// One iteration of the training loop.
///
/// Random draws happen in a fixed order regardless of mode: the supervised
/// mixing coefficient, the labeled pairing permutation, then the unlabeled
/// mixing coefficient. With `w(t) == 0` the consistency loss is still
/// evaluated and logged but contributes no gradient.
///
/// The teacher is updated from the pre-step student unless
/// `config.ema_after_step` is set. On error nothing is modified except the
/// random generator.
pub fn train_step(
    model: &mut IctModel,
    batch: &StepBatch<'_>,
    config: &IctConfig,
    state: &mut TrainState,
) -> Result<StepLosses> {
    let step_no = state.step + 1;
    let w = ramp_w(state.step, state.ramp_steps, config.w_max);
    let lr = model.optimizer.current_lr()?;

    let lambda_sup = sample_lambda(config.beta_alpha, &mut state.rng)?;
    let mut partner: Vec<usize> = (0..batch.labeled_inputs.rows()).collect();
    partner.shuffle(&mut state.rng);
    let lambda = sample_lambda(config.beta_alpha, &mut state.rng)?;

    let (sup_x, sup_y) = match config.supervised_mode {
        SupervisedMode::Vanilla => (batch.labeled_inputs.clone(), batch.labeled_targets.clone()),
        SupervisedMode::Mixup => (
            mix(
                batch.labeled_inputs,
                &batch.labeled_inputs.select_rows(&partner),
                lambda_sup,
            )?,
            mix(
                batch.labeled_targets,
                &batch.labeled_targets.select_rows(&partner),
                lambda_sup,
            )?,
        ),
    };
    let (supervised, mut grads) = model
        .student
        .backward(&sup_x, &LossSpec::CrossEntropy(&sup_y))?;
    if !supervised.is_finite() {
        return Err(Error::NonFinite(format!(
            "supervised loss L_S = {supervised} at step {step_no}"
        )));
    }

    let target_net = match config.teacher_mode {
        TeacherMode::MeanTeacher => model.teacher.network(),
        TeacherMode::Student => &model.student,
    };
    let pair = MixPair::new(target_net, batch.unlabeled_j, batch.unlabeled_k, lambda)?;
    let consistency = if w > 0.0 {
        let (l, g) = model
            .student
            .backward(&pair.mixed_input, &LossSpec::Mse(&pair.mixed_target))?;
        grads.add_scaled(&g, w)?;
        l
    } else {
        mse(
            &model.student.forward(&pair.mixed_input)?,
            &pair.mixed_target,
        )?
    };
    if !consistency.is_finite() {
        return Err(Error::NonFinite(format!(
            "consistency loss L_US = {consistency} at step {step_no}"
        )));
    }
    let total = supervised + w * consistency;
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(Error::NonFinite(format!(
            "gradient of layer {layer} at step {step_no}"
        )));
    }

    let decay = if config.ema_warmup {
        config.ema_decay.min(1.0 - 1.0 / (step_no as f64 + 1.0))
    } else {
        config.ema_decay
    };
    if config.ema_after_step {
        model.optimizer.step(&mut model.student, &grads)?;
        model.teacher.update_with_decay(&model.student, decay)?;
    } else {
        let pre_step = model.student.clone();
        model.optimizer.step(&mut model.student, &grads)?;
        model.teacher.update_with_decay(&pre_step, decay)?;
    }

    state.step = step_no;
    state.current_w = w;
    state.current_lr = lr;
    state.loss_trace.push(TraceRecord {
        step: step_no,
        epoch: state.epoch,
        lr,
        w,
        supervised_loss: supervised,
        consistency_loss: consistency,
        total_loss: total,
        val_error: None,
    });
    Ok(StepLosses {
        supervised,
        consistency,
        total,
    })
}

/// Datasets consumed by [`train`].
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub labeled: &'a Dataset,
    pub unlabeled: &'a Dataset,
    pub validation: Option<&'a Dataset>,
}

/// Evaluation network at the epoch with the lowest validation error.
#[derive(Debug, Clone)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub step: usize,
    pub val_error: f64,
    pub network: Network,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub student: Network,
    pub teacher: Network,
    pub state: TrainState,
    pub best: Option<BestCheckpoint>,
    pub steps_per_epoch: usize,
    eval_network: EvalNetwork,
}

impl TrainOutcome {
    /// Final evaluation network (teacher or student per the config).
    pub fn final_network(&self) -> &Network {
        match self.eval_network {
            EvalNetwork::Teacher => &self.teacher,
            EvalNetwork::Student => &self.student,
        }
    }

    /// Best-validation checkpoint, or the final evaluation network without validation data.
    pub fn selected_network(&self) -> &Network {
        self.best
            .as_ref()
            .map_or_else(|| self.final_network(), |b| &b.network)
    }
}

/// Unlabeled batches per epoch: `ceil(|unlabeled| / unlabeled_batch)`.
pub fn steps_per_epoch(unlabeled_len: usize, unlabeled_batch: usize) -> usize {
    unlabeled_len.div_ceil(unlabeled_batch.max(1))
}

pub fn train(config: &IctConfig, data: TrainData<'_>) -> Result<TrainOutcome> {
    train_with_observer(config, data, |_, _| Ok(()))
}

/// [`train`] with a callback after every step (used for snapshots).
pub fn train_with_observer<F>(
    config: &IctConfig,
    data: TrainData<'_>,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&TrainState, &IctModel) -> Result<()>,
{
    config.validate()?;
    let labeled = data.labeled;
    let unlabeled = data.unlabeled;
    let labels = labeled
        .labels()
        .ok_or_else(|| Error::InvalidArgument("labeled set has no labels".into()))?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("labeled set is empty".into()));
    }
    let dim = labeled.dim();
    let classes = labeled.class_count();
    for (name, ds) in [
        ("unlabeled", Some(unlabeled)),
        ("validation", data.validation),
    ] {
        if let Some(ds) = ds {
            if ds.dim() != dim {
                return Err(Error::Dimension(format!(
                    "{name} set has {} features, labeled set has {dim}",
                    ds.dim()
                )));
            }
        }
    }
    if let Some(val) = data.validation {
        val.require_labels()?;
    }

    let mut init_rng = seed::rng_for(config.seed, tags::INIT);
    let student = Network::mlp(dim, &config.hidden, classes, &mut init_rng)?;
    let per_epoch = steps_per_epoch(unlabeled.len(), config.unlabeled_batch);
    let total_steps = config.total_epochs * per_epoch;
    let mut state = TrainState::new(config, total_steps);

    if total_steps == 0 {
        return Ok(TrainOutcome {
            teacher: student.clone(),
            student,
            state,
            best: None,
            steps_per_epoch: per_epoch,
            eval_network: config.eval_network,
        });
    }

    let mut model = IctModel::new(student, config, total_steps)?;
    let mut labeled_stream = CyclicBatches::new(
        labeled,
        config.labeled_batch,
        derive_seed(config.seed, tags::LABELED),
    )?;
    let seed_j = derive_seed(config.seed, tags::UNLABELED_J);
    let seed_k = derive_seed(config.seed, tags::UNLABELED_K);
    let u = unlabeled.inputs();
    let mut best: Option<BestCheckpoint> = None;

    for epoch in 0..config.total_epochs {
        let e = epoch as u64;
        let j_batches = batch_indices(u.rows(), config.unlabeled_batch, seed_j, e)?;
        let k_batches = match config.pairing {
            UnlabeledPairing::Independent => {
                batch_indices(u.rows(), config.unlabeled_batch, seed_k, e)?
            }
            UnlabeledPairing::ShuffledSelf => j_batches
                .iter()
                .enumerate()
                .map(|(s, jb)| {
                    let mut kb = jb.clone();
                    kb.shuffle(&mut seed::epoch_rng(
                        seed_k,
                        e * per_epoch as u64 + s as u64,
                    ));
                    kb
                })
                .collect(),
        };
        for (jb, kb) in j_batches.iter().zip(&k_batches) {
            let lb = labeled_stream.next_batch();
            let targets = Matrix::one_hot(lb.labels.as_deref().expect("labeled"), classes)?;
            let uj = u.select_rows(jb);
            let uk = u.select_rows(kb);
            let batch = StepBatch {
                labeled_inputs: &lb.inputs,
                labeled_targets: &targets,
                unlabeled_j: &uj,
                unlabeled_k: &uk,
            };
            train_step(&mut model, &batch, config, &mut state)?;
            observer(&state, &model)?;
        }
        state.epoch = epoch + 1;

        if let Some(val) = data.validation {
            let net = model.eval_network(config.eval_network);
            let err = error_rate(net, val)?;
            if let Some(last) = state.loss_trace.last_mut() {
                last.val_error = Some(err);
            }
            if best.as_ref().is_none_or(|b| err < b.val_error) {
                best = Some(BestCheckpoint {
                    epoch: epoch + 1,
                    step: state.step,
                    val_error: err,
                    network: net.clone(),
                });
            }
        }
    }

    Ok(TrainOutcome {
        student: model.student,
        teacher: model.teacher.into_network(),
        state,
        best,
        steps_per_epoch: per_epoch,
        eval_network: config.eval_network,
    })
}
