use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{rng_for, tags};

/// Noise-free point on moon `0` (upper) or `1` (lower) at angle `phi`.
pub fn moon_point(moon: usize, phi: f64) -> [f64; 2] {
    if moon == 0 {
        [phi.cos(), phi.sin()]
    } else {
        [1.0 - phi.cos(), 0.5 - phi.sin()]
    }
}

/// Two interleaved half circles with isotropic Gaussian noise.
///
/// The upper moon gets `ceil(n / 2)` points, the lower `floor(n / 2)`; angles
/// are evenly spaced over `[0, pi]`. Rows are shuffled.
pub fn two_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "two_moons needs n >= 2, got {n}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_sd {noise_sd} must be >= 0"
        )));
    }
    let mut rng = rng_for(seed, tags::DATA);
    let counts = [n.div_ceil(2), n / 2];
    let mut rows = Vec::with_capacity(n);
    for (moon, &m) in counts.iter().enumerate() {
        for i in 0..m {
            let phi = if m > 1 {
                PI * i as f64 / (m - 1) as f64
            } else {
                0.0
            };
            rows.push((moon_point(moon, phi), moon));
        }
    }
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).expect("validated sd");
        for (p, _) in &mut rows {
            p[0] += normal.sample(&mut rng);
            p[1] += normal.sample(&mut rng);
        }
    }
    rows.shuffle(&mut rng);
    let data = rows.iter().flat_map(|(p, _)| *p).collect();
    let labels = rows.iter().map(|&(_, y)| y).collect();
    let prov = Provenance::new("two_moons")
        .with("n", n)
        .with("noise_sd", noise_sd)
        .with("seed", seed);
    Dataset::new(Matrix::new(n, 2, data)?, Some(labels), 2, prov)
}

/// Isotropic Gaussian blobs, one per center, labeled by `class_of_cluster`.
///
/// Classes must be numbered `0..k` with every class used at least once.
pub fn gaussian_clusters(
    centers: &[Vec<f64>],
    per_cluster: usize,
    sd: f64,
    class_of_cluster: &[usize],
    seed: u64,
) -> Result<Dataset> {
    if centers.len() < 2 {
        return Err(Error::InvalidArgument("need at least two clusters".into()));
    }
    if class_of_cluster.len() != centers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} clusters but {} class assignments",
            centers.len(),
            class_of_cluster.len()
        )));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidArgument(
            "cluster centers must share a positive dimension".into(),
        ));
    }
    if per_cluster == 0 {
        return Err(Error::InvalidArgument("per_cluster must be >= 1".into()));
    }
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidArgument(format!("sd {sd} must be >= 0")));
    }
    let class_count = class_of_cluster.iter().max().map_or(0, |m| m + 1);
    if class_count < 2 {
        return Err(Error::InvalidArgument(
            "cluster mapping must use at least two classes".into(),
        ));
    }
    if let Some(missing) = (0..class_count).find(|c| !class_of_cluster.contains(c)) {
        return Err(Error::InvalidArgument(format!(
            "class {missing} has no cluster; classes must be numbered contiguously"
        )));
    }

    let mut rng = rng_for(seed, tags::DATA);
    let normal = (sd > 0.0).then(|| Normal::new(0.0, sd).expect("validated sd"));
    let n = centers.len() * per_cluster;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (center, &class) in centers.iter().zip(class_of_cluster) {
        for _ in 0..per_cluster {
            for &c in center {
                let noise = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                data.push(c + noise);
            }
            labels.push(class);
        }
    }
    let prov = Provenance::new("gaussian_clusters")
        .with("centers", format!("{centers:?}"))
        .with("per_cluster", per_cluster)
        .with("sd", sd)
        .with("classes", format!("{class_of_cluster:?}"))
        .with("seed", seed);
    Dataset::new(Matrix::new(n, dim, data)?, Some(labels), class_count, prov)
}
