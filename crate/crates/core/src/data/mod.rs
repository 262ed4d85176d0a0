//! Datasets, synthetic generators, splitting, standardization, CSV ingestion
//! and minibatch iteration.

mod batch;
mod csv_io;
mod split;
mod synthetic;

pub use batch::{batch_indices, batches, Batch, CyclicBatches};
pub use csv_io::{ingest_csv, write_csv, CsvSchema};
pub use split::{split, standardize, SplitIndices, SplitSpec, Splits, Standardizer, SD_FLOOR};
pub use synthetic::{gaussian_clusters, moon_point, two_moons};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hash::{self, Fnv64};
use crate::matrix::Matrix;

/// Where a dataset came from: generator or file name plus its parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_owned(), value.to_string());
        self
    }
}

/// Inputs with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    labels: Option<Vec<usize>>,
    class_count: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        inputs: Matrix,
        labels: Option<Vec<usize>>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if inputs.rows() == 0 || inputs.cols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset `{}` must have at least one row and one column",
                provenance.name
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::NonFinite(format!(
                "inputs of dataset `{}`",
                provenance.name
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != inputs.rows() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    inputs.rows()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&y| y >= class_count) {
                return Err(Error::InvalidArgument(format!(
                    "label {bad} out of range for {class_count} classes"
                )));
            }
        }
        Ok(Self {
            inputs,
            labels,
            class_count,
            provenance,
        })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Labels or a schema error naming the dataset.
    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or_else(|| {
            Error::Schema(format!("dataset `{}` has no labels", self.provenance.name))
        })
    }

    /// One-hot targets for the labeled rows.
    pub fn one_hot(&self) -> Result<Matrix> {
        Matrix::one_hot(self.require_labels()?, self.class_count)
    }

    /// Rows `indices`, in order, as a new dataset with the same provenance.
    pub fn subset(&self, indices: &[usize], name: &str) -> Result<Dataset> {
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        let mut prov = self.provenance.clone();
        prov.params.insert("subset".into(), name.into());
        Dataset::new(
            self.inputs.select_rows(indices),
            labels,
            self.class_count,
            prov,
        )
    }

    pub fn without_labels(&self) -> Dataset {
        Dataset {
            labels: None,
            ..self.clone()
        }
    }

    /// 64-bit content hash over shape, input bits, labels and class count.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_u64(self.inputs.rows() as u64);
        h.write_u64(self.inputs.cols() as u64);
        h.write_u64(self.class_count as u64);
        for &v in self.inputs.as_slice() {
            h.write_f64(v);
        }
        match &self.labels {
            Some(labels) => {
                h.write(&[1]);
                for &y in labels {
                    h.write_u64(y as u64);
                }
            }
            None => h.write(&[0]),
        }
        h.finish()
    }

    pub fn fingerprint_hex(&self) -> String {
        hash::hex(self.fingerprint())
    }

    /// Per-class row counts; empty when unlabeled.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.class_count];
        for &y in self.labels().unwrap_or(&[]) {
            hist[y] += 1;
        }
        hist
    }
}
