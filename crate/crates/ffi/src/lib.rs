//! C ABI for `ict-core`.
//!
//! Every fallible function returns an [`IctStatus`]; on failure the message
//! is available from [`ict_last_error_message`] on the same thread. Networks
//! are opaque [`IctNetwork`] handles released with [`ict_network_free`].
//! Panics never cross the boundary; they surface as `ICT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ict_core::cli::{prepare_data, run_training, RunOptions};
use ict_core::ict::{ramp_w, IctConfig, Method};
use ict_core::{Error, Matrix, Network};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IctStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    Parse = 5,
    Schema = 6,
    InfeasibleSplit = 7,
    Io = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IctMethod {
    Ict = 0,
    Supervised = 1,
    SupervisedMixup = 2,
    IctNoTeacher = 3,
}

impl From<IctMethod> for Method {
    fn from(m: IctMethod) -> Self {
        match m {
            IctMethod::Ict => Method::Ict,
            IctMethod::Supervised => Method::Supervised,
            IctMethod::SupervisedMixup => Method::SupervisedMixup,
            IctMethod::IctNoTeacher => Method::IctNoTeacher,
        }
    }
}

/// Two-moons training run. Fill with `ict_train_config_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IctTrainConfig {
    pub method: IctMethod,
    pub seed: u64,
    pub n: usize,
    pub noise: f64,
    pub labels_per_class: usize,
    pub unlabeled_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    pub epochs: usize,
    pub beta_alpha: f64,
    pub w_max: f64,
    pub ema_decay: f64,
    pub base_lr: f64,
}

impl Default for IctTrainConfig {
    fn default() -> Self {
        let c = IctConfig::default();
        let o = RunOptions::default();
        Self {
            method: IctMethod::Ict,
            seed: c.seed,
            n: o.n,
            noise: o.noise,
            labels_per_class: o.labels_per_class,
            unlabeled_count: o.unlabeled_count,
            validation_count: o.validation_count,
            test_count: o.test_count,
            epochs: c.total_epochs,
            beta_alpha: c.beta_alpha,
            w_max: c.w_max,
            ema_decay: c.ema_decay,
            base_lr: c.base_lr,
        }
    }
}

/// Opaque trained or loaded network.
pub struct IctNetwork {
    net: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IctStatus {
    match e {
        Error::Dimension(_) => IctStatus::Dimension,
        Error::InvalidArgument(_) => IctStatus::InvalidArgument,
        Error::NonFinite(_) => IctStatus::NonFinite,
        Error::Schema(_) => IctStatus::Schema,
        Error::Parse { .. } => IctStatus::Parse,
        Error::InfeasibleSplit(_) => IctStatus::InfeasibleSplit,
        Error::Io { .. } => IctStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), IctStatus>>(f: F) -> IctStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IctStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IctStatus::Panic
        }
    }
}

fn core<T>(r: ict_core::Result<T>) -> Result<T, IctStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> IctStatus {
    set_error(format!("{what} is null"));
    IctStatus::NullPointer
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, IctStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        IctStatus::InvalidArgument
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ict_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ict_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ict_network_load(
    path: *const c_char,
    out: *mut *mut IctNetwork,
) -> IctStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let net = core(ict_core::nn::load_checkpoint(path))?;
        *out = Box::into_raw(Box::new(IctNetwork { net }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ict_network_free(net: *mut IctNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ict_network_save(
    net: *const IctNetwork,
    path: *const c_char,
) -> IctStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        let path = path_arg(path)?;
        core(ict_core::nn::save_checkpoint(&net.net, path))
    })
}

/// Number of input features, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ict_network_input_dim(net: *const IctNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.input_dim())
}

/// Number of classes, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ict_network_num_classes(net: *const IctNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.num_classes())
}

/// Class probabilities for `rows` row-major inputs of width `cols`.
/// `out` must hold `rows * num_classes` values; `out_len` is its capacity.
///
/// # Safety
/// `x` must point to `rows * cols` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ict_network_predict(
    net: *const IctNetwork,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> IctStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let need = rows * net.net.num_classes();
        if out_len < need {
            set_error(format!("output holds {out_len} values, {need} needed"));
            return Err(IctStatus::Dimension);
        }
        let input = core(Matrix::new(
            rows,
            cols,
            std::slice::from_raw_parts(x, rows * cols).to_vec(),
        ))?;
        let probs = core(net.net.forward(&input))?;
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(probs.as_slice());
        Ok(())
    })
}

/// Writes `n` two-moons points: `x` receives `2 n` row-major coordinates and
/// `labels` receives `n` class indices.
///
/// # Safety
/// `x` must hold `2 n` doubles and `labels` `n` values.
#[no_mangle]
pub unsafe extern "C" fn ict_two_moons(
    n: usize,
    noise: f64,
    seed: u64,
    x: *mut f64,
    labels: *mut usize,
) -> IctStatus {
    guard(|| {
        if x.is_null() {
            return Err(null("x"));
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let ds = core(ict_core::data::two_moons(n, noise, seed))?;
        std::slice::from_raw_parts_mut(x, 2 * n).copy_from_slice(ds.inputs().as_slice());
        std::slice::from_raw_parts_mut(labels, n).copy_from_slice(ds.labels().expect("generated"));
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ict_train_config_default(out: *mut IctTrainConfig) -> IctStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = IctTrainConfig::default();
        Ok(())
    })
}

/// Generates two moons, trains, and returns the final evaluation network.
/// `test_error` (optional) receives the held-out error in percent.
///
/// # Safety
/// `config` and `out` must be valid; `test_error` may be null.
#[no_mangle]
pub unsafe extern "C" fn ict_train_two_moons(
    config: *const IctTrainConfig,
    out: *mut *mut IctNetwork,
    test_error: *mut f64,
) -> IctStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = RunOptions {
            method: c.method.into(),
            n: c.n,
            noise: c.noise,
            labels_per_class: c.labels_per_class,
            unlabeled_count: c.unlabeled_count,
            validation_count: c.validation_count,
            test_count: c.test_count,
            ..RunOptions::default()
        };
        let mut cfg = IctConfig {
            seed: c.seed,
            total_epochs: c.epochs,
            beta_alpha: c.beta_alpha,
            w_max: c.w_max,
            ema_decay: c.ema_decay,
            base_lr: c.base_lr,
            ..IctConfig::default()
        };
        cfg.apply_method(opts.method);
        let data = core(prepare_data(&opts, c.seed))?;
        let result = core(run_training(&cfg, &data, |_, _| Ok(())))?;
        if let Some(t) = test_error.as_mut() {
            *t = result.final_test_error.unwrap_or(f64::NAN);
        }
        let net = result.outcome.final_network().clone();
        *out = Box::into_raw(Box::new(IctNetwork { net }));
        Ok(())
    })
}

/// Cosine-annealed learning rate at `step` of `total_steps`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ict_cosine_lr(
    step: usize,
    total_steps: usize,
    base_lr: f64,
    out: *mut f64,
) -> IctStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = core(ict_core::optim::cosine_lr(step, total_steps, base_lr))?;
        Ok(())
    })
}

/// Consistency weight at `step` for a ramp of `ramp_steps`.
#[no_mangle]
pub extern "C" fn ict_ramp_w(step: usize, ramp_steps: usize, w_max: f64) -> f64 {
    ramp_w(step, ramp_steps, w_max)
}
