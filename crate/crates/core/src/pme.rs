//! Linear parametric model embedding.
//!
//! A weighted generalized PCA over geometry augmented with the design
//! variables, under the zero-weighting paradigm: the parameter block carries
//! zero weight in the inner product, so the latent coordinates are driven by
//! geometric variance alone while the parametric modes still carry the
//! information needed to backmap reduced coordinates to design variables.
//!
//! Instead of the full nonsymmetric `(n_g + M)`-dimensional problem, the fit
//! solves the equivalent geometry-block symmetric problem
//! `(1/S) M^{1/2} Dc^T Dc M^{1/2} e = lambda e` with the diagonal metric
//! `M = w_g * G`, maps geometric modes back as `q = M^{-1/2} e`, and recovers
//! the parametric modes through the block identity
//! `v_k = (1/(S lambda_k)) Uc^T alpha_k`. When S < n_g the S x S Gram form
//! of the same problem is solved and mapped back.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::bundle::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv, Manifest};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_desc;

/// Relative eigenvalue cutoff: modes below `RANK_CUTOFF * lambda_1` are noise.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Metric and weighting specification. `w_u` is kept explicit to document the
/// zero-weighting paradigm; only `w_u = 0` is supported.
#[derive(Debug, Clone)]
pub struct PmeWeights {
    pub g_diag: Array1<f64>,
    pub w_g: f64,
    pub w_u: f64,
}

impl PmeWeights {
    /// Uniform point weights.
    pub fn identity(n_g: usize) -> Self {
        PmeWeights {
            g_diag: Array1::ones(n_g),
            w_g: 1.0,
            w_u: 0.0,
        }
    }

    pub fn with_diag(g_diag: Array1<f64>, w_g: f64) -> Self {
        PmeWeights {
            g_diag,
            w_g,
            w_u: 0.0,
        }
    }

    fn validate(&self, n_g: usize) -> Result<()> {
        if self.g_diag.len() != n_g {
            return Err(Error::Shape(format!(
                "metric diagonal has {} entries, geometry has {n_g}",
                self.g_diag.len()
            )));
        }
        if self.g_diag.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Config("metric diagonal entries must be positive".into()));
        }
        if !(self.w_g > 0.0) || !self.w_g.is_finite() {
            return Err(Error::Config("geometry weight must be positive".into()));
        }
        if self.w_u != 0.0 {
            return Err(Error::Config(
                "nonzero parameter weighting is not supported (zero-weighting mode)".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted linear embedding.
#[derive(Debug, Clone)]
pub struct PmeModel {
    /// Eigenvalues, descending, after the rank cutoff.
    pub eigenvalues: Array1<f64>,
    /// Geometric modes, columns metric-normalized: `q_k^T M q_k = 1`.
    pub q: Array2<f64>,
    /// Parametric modes, columns aligned with `q`.
    pub v: Array2<f64>,
    pub d_mean: Array1<f64>,
    pub u_mean: Array1<f64>,
    pub weights: PmeWeights,
    /// Reduced coordinates of the training samples, rows = samples.
    pub a_train: Array2<f64>,
    /// Trace of the weighted covariance; denominator of retained variance.
    pub total_variance: f64,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EigenRoute {
    Covariance,
    Gram,
}

pub fn fit_pme(dataset: &Dataset, weights: PmeWeights) -> Result<PmeModel> {
    let route = if dataset.s() < dataset.n_g() {
        EigenRoute::Gram
    } else {
        EigenRoute::Covariance
    };
    fit_pme_route(dataset, weights, route)
}

fn fit_pme_route(dataset: &Dataset, weights: PmeWeights, route: EigenRoute) -> Result<PmeModel> {
    let s = dataset.s();
    let n_g = dataset.n_g();
    weights.validate(n_g)?;
    if s < 2 {
        return Err(Error::Dataset("PME needs at least 2 samples".into()));
    }

    let d_mean = dataset.stats.d_mean.clone();
    let u_mean = dataset.stats.u_mean.clone();

    // Y = Dc * M^{1/2}, rows are centered weighted samples.
    let sqrt_m: Array1<f64> = weights.g_diag.mapv(|g| (g * weights.w_g).sqrt());
    let mut y = dataset.d.clone();
    for mut row in y.rows_mut() {
        for j in 0..n_g {
            row[j] = (row[j] - d_mean[j]) * sqrt_m[j];
        }
    }
    let total_variance = y.iter().map(|&x| x * x).sum::<f64>() / s as f64;

    // Eigenpairs (lambda, e) of (1/S) Y^T Y.
    let (lambdas, e) = match route {
        EigenRoute::Covariance => {
            let b = y.t().dot(&y) / s as f64;
            symmetric_eigen_desc(&b)?
        }
        EigenRoute::Gram => {
            let k = y.dot(&y.t()) / s as f64;
            let (lam, f) = symmetric_eigen_desc(&k)?;
            // map S-space eigenvectors to feature space and renormalize
            let mut e = y.t().dot(&f);
            for (k_idx, mut col) in e.axis_iter_mut(Axis(1)).enumerate() {
                let norm = col.iter().map(|&x| x * x).sum::<f64>().sqrt();
                if lam[k_idx] > 0.0 && norm > 0.0 {
                    col.mapv_inplace(|x| x / norm);
                }
            }
            (lam, e)
        }
    };

    // rank cutoff: clamp numerically negative eigenvalues, drop noise modes
    let lambda_1 = lambdas.first().copied().unwrap_or(0.0).max(0.0);
    let mut r = 0;
    for &l in lambdas.iter() {
        if l > 0.0 && l > RANK_CUTOFF * lambda_1 {
            r += 1;
        } else {
            break;
        }
    }

    let mut eigenvalues = Array1::zeros(r);
    let mut q = Array2::zeros((n_g, r));
    for k in 0..r {
        eigenvalues[k] = lambdas[k];
        for i in 0..n_g {
            q[[i, k]] = e[[i, k]] / sqrt_m[i];
        }
    }

    // training coordinates: alpha^{(i)}_k = q_k^T M dc^{(i)} = (Y e_k)_i
    let a_train = y.dot(&e.slice(ndarray::s![.., ..r]));

    // parametric modes from the zero-weight block identity
    let mut u_c = dataset.u.clone();
    for mut row in u_c.rows_mut() {
        for j in 0..row.len() {
            row[j] -= u_mean[j];
        }
    }
    let mut v = u_c.t().dot(&a_train);
    for (k, mut col) in v.axis_iter_mut(Axis(1)).enumerate() {
        let scale = 1.0 / (s as f64 * eigenvalues[k]);
        col.mapv_inplace(|x| x * scale);
    }

    Ok(PmeModel {
        eigenvalues,
        q,
        v,
        d_mean,
        u_mean,
        weights,
        a_train,
        total_variance,
        dataset_hash: dataset.manifest.config_hash.clone(),
    })
}

impl PmeModel {
    /// Number of retained modes.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_g(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n > self.rank() {
            return Err(Error::Rank {
                requested: n,
                available: self.rank(),
            });
        }
        Ok(())
    }

    /// Reduced coordinates of a single shape modification.
    pub fn encode(&self, d: &Array1<f64>, n: usize) -> Result<Array1<f64>> {
        self.check_n(n)?;
        if d.len() != self.n_g() {
            return Err(Error::Shape(format!(
                "geometry has {} entries, model expects {}",
                d.len(),
                self.n_g()
            )));
        }
        let weighted: Array1<f64> = (0..d.len())
            .map(|j| (d[j] - self.d_mean[j]) * self.weights.g_diag[j] * self.weights.w_g)
            .collect();
        Ok(self.q.slice(ndarray::s![.., ..n]).t().dot(&weighted))
    }

    /// Batch encode, rows = samples.
    pub fn encode_batch(&self, d: &Array2<f64>, n: usize) -> Result<Array2<f64>> {
        self.check_n(n)?;
        if d.ncols() != self.n_g() {
            return Err(Error::Shape("geometry width mismatch".into()));
        }
        let mut weighted = d.to_owned();
        for mut row in weighted.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.d_mean[j]) * self.weights.g_diag[j] * self.weights.w_g;
            }
        }
        Ok(weighted.dot(&self.q.slice(ndarray::s![.., ..n])))
    }

    /// Affine geometric reconstruction `d_mean + Q_N alpha`.
    pub fn reconstruct_geometry(&self, alpha: &Array1<f64>) -> Result<Array1<f64>> {
        let n = alpha.len();
        self.check_n(n)?;
        Ok(&self.d_mean + &self.q.slice(ndarray::s![.., ..n]).dot(alpha))
    }

    /// Batch reconstruction from rows of reduced coordinates.
    pub fn reconstruct_batch(&self, alpha: &Array2<f64>) -> Result<Array2<f64>> {
        let n = alpha.ncols();
        self.check_n(n)?;
        let mut out = alpha.dot(&self.q.slice(ndarray::s![.., ..n]).t());
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] += self.d_mean[j];
            }
        }
        Ok(out)
    }

    /// Parametric backmapping `u_mean + V_N alpha`.
    pub fn backmap(&self, alpha: &Array1<f64>) -> Result<Array1<f64>> {
        let n = alpha.len();
        self.check_n(n)?;
        Ok(&self.u_mean + &self.v.slice(ndarray::s![.., ..n]).dot(alpha))
    }

    /// Backmapping clipped to the unit box; the flag reports whether any
    /// component was clipped.
    pub fn backmap_clipped(&self, alpha: &Array1<f64>) -> Result<(Array1<f64>, bool)> {
        let mut u = self.backmap(alpha)?;
        let mut clipped = false;
        for x in u.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
                clipped = true;
            } else if *x > 1.0 {
                *x = 1.0;
                clipped = true;
            }
        }
        Ok((u, clipped))
    }

    /// Fraction of weighted geometric variance captured by the first N modes.
    pub fn retained_variance(&self, n: usize) -> Result<f64> {
        if self.rank() == 0 {
            return Err(Error::UndefinedMetric("model has rank zero".into()));
        }
        self.check_n(n)?;
        let kept: f64 = self.eigenvalues.iter().take(n).sum();
        Ok(kept / self.total_variance)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut m = Manifest::new();
        m.push("kind", "pme");
        m.push("r", self.rank());
        m.push("n_g", self.n_g());
        m.push("m", self.m());
        m.push("s", self.a_train.nrows());
        m.push("w_g", self.weights.w_g);
        m.push("w_u", self.weights.w_u);
        m.push("total_variance", self.total_variance);
        m.push("config_hash", &self.dataset_hash);
        m.save(&dir.join("manifest.txt"))?;
        write_vector_csv(&dir.join("eigenvalues.csv"), &self.eigenvalues)?;
        write_matrix_csv(&dir.join("q.csv"), &self.q)?;
        write_matrix_csv(&dir.join("v.csv"), &self.v)?;
        write_vector_csv(&dir.join("d_mean.csv"), &self.d_mean)?;
        write_vector_csv(&dir.join("u_mean.csv"), &self.u_mean)?;
        write_vector_csv(&dir.join("g_diag.csv"), &self.weights.g_diag)?;
        write_matrix_csv(&dir.join("a_train.csv"), &self.a_train)
    }

    pub fn load(dir: &Path) -> Result<PmeModel> {
        let manifest = Manifest::load(&dir.join("manifest.txt"))?;
        if manifest.require("kind")? != "pme" {
            return Err(Error::Integrity("bundle is not a PME model".into()));
        }
        let model = PmeModel {
            eigenvalues: read_vector_csv(&dir.join("eigenvalues.csv"))?,
            q: read_matrix_csv(&dir.join("q.csv"))?,
            v: read_matrix_csv(&dir.join("v.csv"))?,
            d_mean: read_vector_csv(&dir.join("d_mean.csv"))?,
            u_mean: read_vector_csv(&dir.join("u_mean.csv"))?,
            weights: PmeWeights {
                g_diag: read_vector_csv(&dir.join("g_diag.csv"))?,
                w_g: manifest.require_parsed("w_g")?,
                w_u: manifest.require_parsed("w_u")?,
            },
            a_train: read_matrix_csv(&dir.join("a_train.csv"))?,
            total_variance: manifest.require_parsed("total_variance")?,
            dataset_hash: manifest.require("config_hash")?.to_string(),
        };
        let r: usize = manifest.require_parsed("r")?;
        if model.rank() != r || model.q.ncols() != r || model.v.ncols() != r {
            return Err(Error::Integrity("mode count disagrees with manifest".into()));
        }
        Ok(model)
    }
}
