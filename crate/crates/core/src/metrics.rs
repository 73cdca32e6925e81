//! Shared evaluation metrics: global NMSE, per-sample errors, threshold
//! dimensions, relative reduction, error histograms, representative-sample
//! selection, per-point error fields.
//!
//! Everything operates on RAW (destandardized) geometry so all methods are
//! scored on a common basis.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// One reconstruction-error curve over latent dimensions.
#[derive(Debug, Clone)]
pub struct SweepCurve {
    pub method: String,
    /// `(N, epsilon(N))` pairs with strictly increasing N.
    pub points: Vec<(usize, f64)>,
    pub dataset_hash: String,
}

impl SweepCurve {
    pub fn new(method: &str, points: Vec<(usize, f64)>, dataset_hash: &str) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(
                    "sweep curve N values must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|&(_, e)| e < 0.0 || !e.is_finite()) {
            return Err(Error::InvalidParameter(
                "sweep curve errors must be finite and nonnegative".into(),
            ));
        }
        Ok(SweepCurve {
            method: method.to_string(),
            points,
            dataset_hash: dataset_hash.to_string(),
        })
    }
}

fn check_pair(d: &Array2<f64>, d_hat: &Array2<f64>) -> Result<()> {
    if d.shape() != d_hat.shape() {
        return Err(Error::Shape(format!(
            "reconstruction shape {:?} differs from data shape {:?}",
            d_hat.shape(),
            d.shape()
        )));
    }
    if d.nrows() < 2 {
        return Err(Error::UndefinedMetric("need at least 2 samples".into()));
    }
    Ok(())
}

fn total_deviation(d: &Array2<f64>) -> f64 {
    let mean = d.mean_axis(Axis(0)).expect("non-empty");
    d.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(mean.iter())
                .map(|(&x, &mu)| (x - mu) * (x - mu))
                .sum::<f64>()
        })
        .sum()
}

/// Normalized mean squared error: total squared reconstruction error over
/// total squared deviation from the mean sample.
pub fn nmse(d: &Array2<f64>, d_hat: &Array2<f64>) -> Result<f64> {
    check_pair(d, d_hat)?;
    let denom = total_deviation(d);
    if denom <= 0.0 {
        return Err(Error::UndefinedMetric(
            "all samples identical: zero total deviation".into(),
        ));
    }
    let num: f64 = d
        .iter()
        .zip(d_hat.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(num / denom)
}

/// Per-sample normalized squared errors; their mean equals [`nmse`] exactly.
pub fn per_sample_nse(d: &Array2<f64>, d_hat: &Array2<f64>) -> Result<Array1<f64>> {
    check_pair(d, d_hat)?;
    let denom = total_deviation(d) / d.nrows() as f64;
    if denom <= 0.0 {
        return Err(Error::UndefinedMetric(
            "all samples identical: zero total deviation".into(),
        ));
    }
    let mut out = Array1::zeros(d.nrows());
    for (i, (row, row_hat)) in d.rows().into_iter().zip(d_hat.rows()).enumerate() {
        let err: f64 = row
            .iter()
            .zip(row_hat.iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        out[i] = err / denom;
    }
    Ok(out)
}

/// Smallest listed N whose error meets the threshold, if any.
pub fn threshold_dimension(curve: &SweepCurve, tau: f64) -> Result<Option<usize>> {
    if tau <= 0.0 {
        return Err(Error::InvalidParameter("threshold must be positive".into()));
    }
    if curve.points.is_empty() {
        return Err(Error::InvalidParameter("empty sweep curve".into()));
    }
    Ok(curve
        .points
        .iter()
        .find(|&&(_, e)| e <= tau)
        .map(|&(n, _)| n))
}

/// Percentage reduction of a method's error relative to a reference curve at
/// equal latent dimension. Points where the reference error is zero are
/// skipped and reported separately.
pub struct ReductionCurve {
    pub points: Vec<(usize, f64)>,
    pub skipped: Vec<usize>,
}

pub fn relative_reduction(method: &SweepCurve, reference: &SweepCurve) -> Result<ReductionCurve> {
    if method.points.len() != reference.points.len()
        || method
            .points
            .iter()
            .zip(&reference.points)
            .any(|(a, b)| a.0 != b.0)
    {
        return Err(Error::Shape("curves do not share an N grid".into()));
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (&(n, e_m), &(_, e_r)) in method.points.iter().zip(&reference.points) {
        if e_r == 0.0 {
            skipped.push(n);
        } else {
            points.push((n, 100.0 * (1.0 - e_m / e_r)));
        }
    }
    Ok(ReductionCurve { points, skipped })
}

/// Histogram density over a fixed range; integrates to one.
#[derive(Debug, Clone)]
pub struct ErrorPdf {
    pub lo: f64,
    pub hi: f64,
    pub density: Vec<f64>,
}

impl ErrorPdf {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }
}

pub fn error_pdf(values: &[f64], n_bins: usize, range: (f64, f64)) -> Result<ErrorPdf> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty input".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter("need at least one bin".into()));
    }
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("bad histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let cell = (((v - lo) / width).floor() as isize).clamp(0, n_bins as isize - 1) as usize;
        counts[cell] += 1;
    }
    let norm = values.len() as f64 * width;
    Ok(ErrorPdf {
        lo,
        hi,
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
    })
}

/// Median with the even-length convention: mean of the two central order
/// statistics.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Index of the sample whose combined score (arithmetic mean of the two
/// per-sample errors) is closest to the median combined score. Ties break
/// toward the lowest index.
pub fn representative_sample(eps_a: &[f64], eps_b: &[f64]) -> Result<usize> {
    if eps_a.is_empty() || eps_a.len() != eps_b.len() {
        return Err(Error::Shape("per-sample error vectors must match and be non-empty".into()));
    }
    let combined: Vec<f64> = eps_a
        .iter()
        .zip(eps_b)
        .map(|(&a, &b)| 0.5 * (a + b))
        .collect();
    let med = median(&combined);
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &c) in combined.iter().enumerate() {
        let dist = (c - med).abs();
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Euclidean reconstruction error per surface point (xyz triplets).
pub fn per_point_error(d: &Array1<f64>, d_hat: &Array1<f64>) -> Result<Array1<f64>> {
    if d.len() != d_hat.len() {
        return Err(Error::Shape("vectors differ in length".into()));
    }
    if d.len() % 3 != 0 {
        return Err(Error::Shape(format!(
            "geometry length {} is not divisible by 3",
            d.len()
        )));
    }
    let n_pts = d.len() / 3;
    let mut out = Array1::zeros(n_pts);
    for p in 0..n_pts {
        let mut acc = 0.0;
        for k in 0..3 {
            let delta = d[3 * p + k] - d_hat[3 * p + k];
            acc += delta * delta;
        }
        out[p] = acc.sqrt();
    }
    Ok(out)
}
