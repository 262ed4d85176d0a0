use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::Fnv64;

/// How the supervised loss is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisedMode {
    /// Cross-entropy on the labeled batch as is.
    Vanilla,
    /// Cross-entropy on mixed labeled pairs against equally mixed one-hot targets.
    Mixup,
}

/// Which network produces the fake labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherMode {
    MeanTeacher,
    Student,
}

/// How the second unlabeled batch is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlabeledPairing {
    /// Two independently shuffled unlabeled streams.
    Independent,
    /// The first batch against a permutation of itself.
    ShuffledSelf,
}

/// Network used for validation and reported errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalNetwork {
    Teacher,
    Student,
}

/// Named training recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ict,
    Supervised,
    SupervisedMixup,
    IctNoTeacher,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Ict,
        Method::Supervised,
        Method::SupervisedMixup,
        Method::IctNoTeacher,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ict => "ict",
            Method::Supervised => "supervised",
            Method::SupervisedMixup => "supervised_mixup",
            Method::IctNoTeacher => "ict_no_teacher",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method `{s}` (expected ict, supervised, supervised_mixup or ict_no_teacher)"
                ))
            })
    }
}

/// All hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IctConfig {
    /// Shape of the symmetric Beta distribution for mixing coefficients.
    pub beta_alpha: f64,
    /// Final weight of the consistency loss; 0 disables it.
    pub w_max: f64,
    /// Fraction of all steps over which the consistency weight ramps up.
    pub ramp_fraction: f64,
    pub ema_decay: f64,
    /// Cap the decay at `1 - 1 / (t + 1)` on step `t` so the teacher starts as
    /// a running mean of the student iterates instead of the random init.
    pub ema_warmup: bool,
    /// Update the teacher after the optimizer step instead of before it.
    pub ema_after_step: bool,
    pub labeled_batch: usize,
    pub unlabeled_batch: usize,
    pub total_epochs: usize,
    pub supervised_mode: SupervisedMode,
    pub teacher_mode: TeacherMode,
    pub pairing: UnlabeledPairing,
    pub eval_network: EvalNetwork,
    pub base_lr: f64,
    pub momentum: f64,
    pub l2: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for IctConfig {
    fn default() -> Self {
        Self {
            beta_alpha: 1.0,
            w_max: 1.0,
            ramp_fraction: 0.25,
            ema_decay: 0.999,
            ema_warmup: false,
            ema_after_step: false,
            labeled_batch: 100,
            unlabeled_batch: 100,
            total_epochs: 100,
            supervised_mode: SupervisedMode::Mixup,
            teacher_mode: TeacherMode::MeanTeacher,
            pairing: UnlabeledPairing::Independent,
            eval_network: EvalNetwork::Teacher,
            base_lr: 0.1,
            momentum: 0.9,
            l2: 1e-4,
            hidden: vec![20, 20, 20],
            seed: 0,
        }
    }
}

impl IctConfig {
    pub fn for_method(method: Method) -> Self {
        let mut c = Self::default();
        c.apply_method(method);
        c
    }

    /// Sets the fields a method fixes. Supervised methods zero `w_max`, which
    /// keeps every other part of the step (and its random draws) unchanged.
    pub fn apply_method(&mut self, method: Method) {
        match method {
            Method::Ict => {
                self.supervised_mode = SupervisedMode::Mixup;
                self.teacher_mode = TeacherMode::MeanTeacher;
            }
            Method::IctNoTeacher => {
                self.supervised_mode = SupervisedMode::Mixup;
                self.teacher_mode = TeacherMode::Student;
            }
            Method::Supervised => {
                self.supervised_mode = SupervisedMode::Vanilla;
                self.w_max = 0.0;
            }
            Method::SupervisedMixup => {
                self.supervised_mode = SupervisedMode::Mixup;
                self.w_max = 0.0;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.beta_alpha > 0.0 && self.beta_alpha.is_finite()) {
            return bad(format!("beta_alpha must be > 0, got {}", self.beta_alpha));
        }
        if !(self.w_max >= 0.0 && self.w_max.is_finite()) {
            return bad(format!("w_max must be >= 0, got {}", self.w_max));
        }
        if !(self.ramp_fraction > 0.0 && self.ramp_fraction <= 1.0) {
            return bad(format!(
                "ramp_fraction must be in (0, 1], got {}",
                self.ramp_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad(format!(
                "ema_decay must be in [0, 1), got {}",
                self.ema_decay
            ));
        }
        if self.labeled_batch == 0 || self.unlabeled_batch == 0 {
            return bad("batch sizes must be >= 1".into());
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("base_lr must be > 0, got {}", self.base_lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }

    /// Hash of every field, for reports.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h = Fnv64::new();
        h.write(text.as_bytes());
        h.finish()
    }
}
