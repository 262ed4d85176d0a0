//! Error rates, multi-trial aggregation and decision-boundary grids.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Network;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Percentage of rows whose argmax differs from the label.
pub fn error_rate_of(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    let wrong = probs
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) != y)
        .count();
    Ok(100.0 * wrong as f64 / labels.len() as f64)
}

pub fn error_rate(net: &Network, ds: &Dataset) -> Result<f64> {
    let labels = ds.require_labels()?;
    if ds.class_count() != net.num_classes() {
        return Err(Error::Dimension(format!(
            "dataset has {} classes, network predicts {}",
            ds.class_count(),
            net.num_classes()
        )));
    }
    error_rate_of(&net.forward(ds.inputs())?, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single trial.
    pub sd: f64,
}

pub fn aggregate_trials(errors: &[f64]) -> Result<Aggregate> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no trials to aggregate".into()));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let sd = if errors.len() == 1 {
        0.0
    } else {
        (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Aggregate { mean, sd })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub test_error_percent: Option<f64>,
    /// Set when the trial failed.
    pub failure: Option<String>,
}

/// Per-trial results with mean and sample sd over the successful ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub trials: Vec<TrialRecord>,
    pub config_fingerprint: String,
}

impl TrialReport {
    pub fn new(trials: Vec<TrialRecord>, config_fingerprint: String) -> Self {
        let ok: Vec<f64> = trials.iter().filter_map(|t| t.test_error_percent).collect();
        let agg = aggregate_trials(&ok).ok();
        Self {
            mean: agg.map(|a| a.mean),
            sd: agg.map(|a| a.sd),
            trials,
            config_fingerprint,
        }
    }

    pub fn failed(&self) -> usize {
        self.trials.iter().filter(|t| t.failure.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluation lattice over a 2-D input range. Both ends are included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: -1.5,
            x_max: 2.5,
            y_min: -1.0,
            y_max: 1.5,
            nx: 100,
            ny: 100,
        }
    }
}

impl GridSpec {
    fn coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Lattice points, `y` outer and `x` inner.
    pub fn points(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.nx * self.ny * 2);
        for iy in 0..self.ny {
            let y = Self::coord(self.y_min, self.y_max, iy, self.ny);
            for ix in 0..self.nx {
                data.push(Self::coord(self.x_min, self.x_max, ix, self.nx));
                data.push(y);
            }
        }
        Matrix::new(self.nx * self.ny, 2, data).expect("sized above")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub spec: GridSpec,
    pub points: Matrix,
    /// One probability row per lattice point.
    pub probs: Matrix,
}

impl BoundaryGrid {
    pub fn cell_count(&self) -> usize {
        self.points.rows()
    }

    /// CSV with header `x,y,p0,...,p{C-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("x,y");
        for c in 0..self.probs.cols() {
            header.push_str(&format!(",p{c}"));
        }
        writeln!(w, "{header}")?;
        for (p, q) in self.points.iter_rows().zip(self.probs.iter_rows()) {
            let mut line = format!("{},{}", p[0], p[1]);
            for v in q {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Class probabilities of `net` on every lattice point. The network is only read.
pub fn export_boundary(net: &Network, spec: &GridSpec) -> Result<BoundaryGrid> {
    if net.input_dim() != 2 {
        return Err(Error::Dimension(format!(
            "boundary export needs a 2-D input model, got {} inputs",
            net.input_dim()
        )));
    }
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidArgument(
            "grid resolution must be >= 1 per axis".into(),
        ));
    }
    if !(spec.x_min.is_finite()
        && spec.x_max.is_finite()
        && spec.y_min.is_finite()
        && spec.y_max.is_finite())
    {
        return Err(Error::InvalidArgument("grid range must be finite".into()));
    }
    let points = spec.points();
    let probs = net.forward(&points)?;
    Ok(BoundaryGrid {
        spec: *spec,
        points,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::nn::Activation;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.1, 0.9]), 1);
    }

    #[test]
    fn error_rate_fixtures() {
        let probs = Matrix::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]]).unwrap();
        assert_eq!(error_rate_of(&probs, &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(error_rate_of(&probs, &[0, 1, 1, 1]).unwrap(), 25.0);
        let constant = Matrix::from_rows(&[[0.5, 0.5]; 4]).unwrap();
        assert_eq!(error_rate_of(&constant, &[0, 1, 0, 1]).unwrap(), 50.0);
    }

    #[test]
    fn error_rate_needs_labels() {
        let net = Network::zeros(&[2, 2], Activation::Relu).unwrap();
        let ds = Dataset::new(Matrix::zeros(4, 2), None, 2, Provenance::new("u")).unwrap();
        assert!(matches!(error_rate(&net, &ds), Err(Error::Schema(_))));
        let lab = Dataset::new(
            Matrix::zeros(4, 2),
            Some(vec![0, 1, 0, 1]),
            2,
            Provenance::new("l"),
        )
        .unwrap();
        assert_eq!(error_rate(&net, &lab).unwrap(), 50.0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(
            aggregate_trials(&[10.0, 10.0, 10.0]).unwrap(),
            Aggregate {
                mean: 10.0,
                sd: 0.0
            }
        );
        assert_eq!(
            aggregate_trials(&[8.0, 10.0, 12.0]).unwrap(),
            Aggregate {
                mean: 10.0,
                sd: 2.0
            }
        );
        assert_eq!(
            aggregate_trials(&[7.3]).unwrap(),
            Aggregate { mean: 7.3, sd: 0.0 }
        );
        assert!(aggregate_trials(&[]).is_err());
    }

    #[test]
    fn report_skips_failed_trials() {
        let r = TrialReport::new(
            vec![
                TrialRecord {
                    seed: 0,
                    test_error_percent: Some(4.0),
                    failure: None,
                },
                TrialRecord {
                    seed: 1,
                    test_error_percent: None,
                    failure: Some("boom".into()),
                },
                TrialRecord {
                    seed: 2,
                    test_error_percent: Some(6.0),
                    failure: None,
                },
            ],
            "abc".into(),
        );
        assert_eq!(r.mean, Some(5.0));
        assert_eq!(r.failed(), 1);
        assert!(r.to_json().contains("\"config_fingerprint\": \"abc\""));
    }

    #[test]
    fn zero_model_grid() {
        let net = Network::zeros(&[2, 2], Activation::Relu).unwrap();
        let g = export_boundary(&net, &GridSpec::default()).unwrap();
        assert_eq!(g.cell_count(), 10_000);
        assert!(g.probs.as_slice().iter().all(|&p| p == 0.5));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10_001);
        assert_eq!(text.lines().next().unwrap(), "x,y,p0,p1");
        assert_eq!(text.lines().nth(1).unwrap(), "-1.5,-1,0.5,0.5");
    }

    #[test]
    fn non_planar_model_is_rejected() {
        let net = Network::zeros(&[3, 2], Activation::Relu).unwrap();
        assert!(matches!(
            export_boundary(&net, &GridSpec::default()),
            Err(Error::Dimension(_))
        ));
    }
}
