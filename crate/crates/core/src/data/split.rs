use rand::seq::SliceRandom;
use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{rng_for, tags};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSpec {
    pub labels_per_class: usize,
    /// Total size of the unlabeled set, including labeled inputs when
    /// `include_labeled_in_unlabeled` is set.
    pub unlabeled_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    pub include_labeled_in_unlabeled: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            labels_per_class: 3,
            unlabeled_count: 1000,
            validation_count: 500,
            test_count: 1000,
            include_labeled_in_unlabeled: true,
            seed: 0,
        }
    }
}

/// Source row indices of each part of a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub labeled: Dataset,
    /// Inputs only; labels are stripped.
    pub unlabeled: Dataset,
    pub validation: Option<Dataset>,
    pub test: Option<Dataset>,
    pub indices: SplitIndices,
}

/// Stratified labeled/unlabeled/validation/test split.
///
/// Rows are visited in a seeded random order. The labeled set takes the first
/// `labels_per_class` rows of each class; validation, test and then the
/// unlabeled pool are carved from the remaining rows in that order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    let labels = ds.require_labels()?;
    if spec.labels_per_class == 0 {
        return Err(Error::InvalidArgument(
            "labels_per_class must be >= 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng_for(spec.seed, tags::SPLIT));

    let classes = ds.class_count();
    let mut taken = vec![0usize; classes];
    let mut labeled = Vec::with_capacity(classes * spec.labels_per_class);
    let mut rest = Vec::with_capacity(ds.len());
    for &i in &order {
        let y = labels[i];
        if taken[y] < spec.labels_per_class {
            taken[y] += 1;
            labeled.push(i);
        } else {
            rest.push(i);
        }
    }

    let mut shortfalls = Vec::new();
    for (c, &t) in taken.iter().enumerate() {
        if t < spec.labels_per_class {
            shortfalls.push(format!(
                "class {c}: {} labeled rows short",
                spec.labels_per_class - t
            ));
        }
    }
    let pool_unlabeled = if spec.include_labeled_in_unlabeled {
        if spec.unlabeled_count < labeled.len() {
            return Err(Error::InfeasibleSplit(format!(
                "unlabeled_count {} is smaller than the {} labeled rows it must include",
                spec.unlabeled_count,
                labeled.len()
            )));
        }
        spec.unlabeled_count - labeled.len()
    } else {
        spec.unlabeled_count
    };
    let needed = pool_unlabeled + spec.validation_count + spec.test_count;
    if rest.len() < needed && shortfalls.is_empty() {
        shortfalls.push(format!(
            "{} rows short for unlabeled/validation/test ({} needed, {} left)",
            needed - rest.len(),
            needed,
            rest.len()
        ));
    }
    if !shortfalls.is_empty() {
        return Err(Error::InfeasibleSplit(shortfalls.join("; ")));
    }
    if spec.unlabeled_count == 0 {
        return Err(Error::InfeasibleSplit(
            "unlabeled_count must be >= 1".into(),
        ));
    }

    let validation = rest[..spec.validation_count].to_vec();
    let test = rest[spec.validation_count..spec.validation_count + spec.test_count].to_vec();
    let start = spec.validation_count + spec.test_count;
    let mut unlabeled = Vec::with_capacity(spec.unlabeled_count);
    if spec.include_labeled_in_unlabeled {
        unlabeled.extend_from_slice(&labeled);
    }
    unlabeled.extend_from_slice(&rest[start..start + pool_unlabeled]);

    let part = |idx: &[usize], name: &str| -> Result<Option<Dataset>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            ds.subset(idx, name).map(Some)
        }
    };
    Ok(Splits {
        labeled: ds.subset(&labeled, "labeled")?,
        unlabeled: ds.subset(&unlabeled, "unlabeled")?.without_labels(),
        validation: part(&validation, "validation")?,
        test: part(&test, "test")?,
        indices: SplitIndices {
            labeled,
            unlabeled,
            validation,
            test,
        },
    })
}

/// Smallest standard deviation used when scaling.
pub const SD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(source: &Dataset) -> Self {
        let x = source.inputs();
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var.iter().map(|s| (s / n).sqrt().max(SD_FLOOR)).collect();
        Self { mean, sd }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let x = ds.inputs();
        if x.cols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on {} dimensions, dataset has {}",
                self.mean.len(),
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            for (c, (o, v)) in out.row_mut(r).iter_mut().zip(x.row(r)).enumerate() {
                *o = (v - self.mean[c]) / self.sd[c];
            }
        }
        let mut prov = ds.provenance().clone();
        prov.params.insert("standardized".into(), "true".into());
        Dataset::new(
            out,
            ds.labels().map(<[usize]>::to_vec),
            ds.class_count(),
            prov,
        )
    }
}

/// Scales `apply_to` with statistics computed from `train_stats_from` only.
pub fn standardize(train_stats_from: &Dataset, apply_to: &Dataset) -> Result<Dataset> {
    Standardizer::fit(train_stats_from).apply(apply_to)
}
