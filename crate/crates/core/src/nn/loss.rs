use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax with max subtraction.
///
/// Entries are floored at the smallest positive normal `f64`, so every
/// probability is strictly positive even for extreme logits.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = (*v / sum).max(f64::MIN_POSITIVE);
        }
    }
    out
}

/// Mean over rows of `-sum_c target * ln(max(pred, 1e-12))`.
pub fn cross_entropy(pred: &Matrix, target: &Matrix) -> Result<f64> {
    pred.ensure_same_shape(target, "cross_entropy")?;
    if pred.rows() == 0 {
        return Err(Error::Dimension("cross_entropy on an empty batch".into()));
    }
    let total: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.max(LOG_CLAMP).ln())
        .sum();
    // -0.0 when every term vanishes
    Ok((total / pred.rows() as f64).max(0.0))
}

/// Mean over rows of the squared distance, divided by the number of classes.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    pred.ensure_same_shape(target, "mse")?;
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(Error::Dimension("mse on an empty batch".into()));
    }
    let total: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(total / (pred.rows() * pred.cols()) as f64)
}

/// Loss applied to the softmax output, with its constant target.
#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    CrossEntropy(&'a Matrix),
    Mse(&'a Matrix),
}

impl<'a> LossSpec<'a> {
    pub fn target(&self) -> &'a Matrix {
        match *self {
            LossSpec::CrossEntropy(t) | LossSpec::Mse(t) => t,
        }
    }

    pub(crate) fn evaluate(&self, probs: &Matrix) -> Result<f64> {
        match *self {
            LossSpec::CrossEntropy(t) => cross_entropy(probs, t),
            LossSpec::Mse(t) => mse(probs, t),
        }
    }

    /// Gradient of the loss with respect to the logits.
    ///
    /// For cross-entropy this is the gradient of the unclamped loss, which
    /// differs from the clamped one only where a probability is below 1e-12.
    pub(crate) fn logit_gradient(&self, probs: &Matrix) -> Matrix {
        let n = probs.rows() as f64;
        let classes = probs.cols();
        let mut out = Matrix::zeros(probs.rows(), classes);
        match *self {
            LossSpec::CrossEntropy(t) => {
                for r in 0..probs.rows() {
                    let p = probs.row(r);
                    let tr = t.row(r);
                    let mass: f64 = tr.iter().sum();
                    for (o, (&pi, &ti)) in out.row_mut(r).iter_mut().zip(p.iter().zip(tr)) {
                        *o = (pi * mass - ti) / n;
                    }
                }
            }
            LossSpec::Mse(t) => {
                let scale = 2.0 / (n * classes as f64);
                for r in 0..probs.rows() {
                    let p = probs.row(r);
                    let tr = t.row(r);
                    // dL/dp, then through the softmax Jacobian.
                    let g: Vec<f64> = p.iter().zip(tr).map(|(a, b)| scale * (a - b)).collect();
                    let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    for (o, (&pi, &gi)) in out.row_mut(r).iter_mut().zip(p.iter().zip(&g)) {
                        *o = pi * (gi - dot);
                    }
                }
            }
        }
        out
    }
}
