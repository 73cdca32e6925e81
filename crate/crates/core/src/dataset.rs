//! Sampled design-space discretization: build, standardize, persist, reload.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::bundle::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv, Manifest};
use crate::error::{Error, Result};
use crate::shapegen::{DesignVector, Generator, GeneratorConfig};
use crate::sobol::sobol_points;

/// Features with standard deviation below this are treated as constant and
/// their sigma is clamped to one.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

/// Per-feature statistics of the shape modifications plus the parameter mean.
/// Sigma uses the population convention (divide by S).
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub d_mean: Array1<f64>,
    pub d_std: Array1<f64>,
    pub u_mean: Array1<f64>,
    /// Feature indices whose sigma was clamped.
    pub degenerate: Vec<usize>,
}

impl Stats {
    pub fn from_data(d: &Array2<f64>, u: &Array2<f64>) -> Self {
        let s = d.nrows() as f64;
        let d_mean = d.mean_axis(Axis(0)).expect("non-empty dataset");
        let u_mean = u.mean_axis(Axis(0)).expect("non-empty dataset");
        let mut d_std = Array1::zeros(d.ncols());
        let mut degenerate = Vec::new();
        for j in 0..d.ncols() {
            let mu = d_mean[j];
            let var = d.column(j).iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / s;
            let sigma = var.sqrt();
            if sigma < DEGENERATE_SIGMA {
                d_std[j] = 1.0;
                degenerate.push(j);
            } else {
                d_std[j] = sigma;
            }
        }
        Stats {
            d_mean,
            d_std,
            u_mean,
            degenerate,
        }
    }

    /// Z-scores rows of shape modifications.
    pub fn standardize(&self, d: &Array2<f64>) -> Array2<f64> {
        let mut out = d.to_owned();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.d_mean[j]) / self.d_std[j];
            }
        }
        out
    }

    /// Inverse of [`Stats::standardize`].
    pub fn destandardize(&self, d_std: &Array2<f64>) -> Array2<f64> {
        let mut out = d_std.to_owned();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = row[j] * self.d_std[j] + self.d_mean[j];
            }
        }
        out
    }
}

/// Provenance of a built dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub skip: u64,
    pub s_requested: usize,
    pub s: usize,
    pub m: usize,
    pub n_g: usize,
    pub dropped: usize,
}

/// The sampled design-space discretization. Rows are samples: `u` is S x M
/// (normalized design variables), `d` is S x n_g (raw shape modifications).
/// Immutable after build.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub u: Array2<f64>,
    pub d: Array2<f64>,
    pub g0: Array1<f64>,
    pub stats: Stats,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn s(&self) -> usize {
        self.d.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_g(&self) -> usize {
        self.d.ncols()
    }

    /// Standardized view of the shape modifications.
    pub fn d_standardized(&self) -> Array2<f64> {
        self.stats.standardize(&self.d)
    }

    /// Assembles a dataset from raw matrices. Used by tests and synthetic
    /// fixtures; `build_dataset` is the production path.
    pub fn from_parts(
        u: Array2<f64>,
        d: Array2<f64>,
        g0: Array1<f64>,
        config_hash: String,
        skip: u64,
    ) -> Result<Dataset> {
        if u.nrows() != d.nrows() {
            return Err(Error::Shape(format!(
                "U has {} rows, D has {}",
                u.nrows(),
                d.nrows()
            )));
        }
        if d.nrows() < 2 {
            return Err(Error::Dataset("need at least 2 samples".into()));
        }
        if g0.len() != d.ncols() {
            return Err(Error::Shape("g0 length differs from D columns".into()));
        }
        let stats = Stats::from_data(&d, &u);
        let manifest = DatasetManifest {
            config_hash,
            skip,
            s_requested: d.nrows(),
            s: d.nrows(),
            m: u.ncols(),
            n_g: d.ncols(),
            dropped: 0,
        };
        Ok(Dataset {
            u,
            d,
            g0,
            stats,
            manifest,
        })
    }
}

/// Sobol-samples the design box, evaluates the generator, keeps the valid
/// samples. Deterministic for a given configuration and skip.
pub fn build_dataset(generator: &Generator, s_requested: usize, skip: u64) -> Result<Dataset> {
    if s_requested < 2 {
        return Err(Error::Dataset(format!(
            "requested {s_requested} samples, need at least 2"
        )));
    }
    let m = generator.config().m();
    let n_g = generator.config().n_g();
    let points = sobol_points(m, s_requested, skip)?;

    let mut u_rows = Vec::with_capacity(s_requested);
    let mut d_rows: Vec<f64> = Vec::with_capacity(s_requested * n_g);
    let mut dropped = 0usize;
    for i in 0..s_requested {
        let u = DesignVector::new(points.row(i).to_owned())?;
        let sample = generator.generate(&u)?;
        if sample.valid {
            u_rows.push(points.row(i).to_owned());
            d_rows.extend_from_slice(sample.d.as_slice().expect("contiguous"));
        } else {
            dropped += 1;
        }
    }
    let s = u_rows.len();
    if s < 2 {
        return Err(Error::Dataset(format!(
            "only {s} valid samples out of {s_requested}"
        )));
    }
    let mut u = Array2::zeros((s, m));
    for (i, row) in u_rows.iter().enumerate() {
        u.row_mut(i).assign(row);
    }
    let d = Array2::from_shape_vec((s, n_g), d_rows).expect("row count matches");
    let stats = Stats::from_data(&d, &u);
    let manifest = DatasetManifest {
        config_hash: generator.config().hash(),
        skip,
        s_requested,
        s,
        m,
        n_g,
        dropped,
    };
    Ok(Dataset {
        u,
        d,
        g0: generator.baseline().clone(),
        stats,
        manifest,
    })
}

/// Writes `U.csv`, `D.csv`, `g0.csv`, `stats.csv`, `manifest.txt` into `dir`.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_matrix_csv(&dir.join("U.csv"), &dataset.u)?;
    write_matrix_csv(&dir.join("D.csv"), &dataset.d)?;
    write_vector_csv(&dir.join("g0.csv"), &dataset.g0)?;

    // stats as long format: kind,index,value
    let stats_path = dir.join("stats.csv");
    let mut text = String::from("kind,index,value\n");
    for (name, vec) in [
        ("d_mean", &dataset.stats.d_mean),
        ("d_std", &dataset.stats.d_std),
        ("u_mean", &dataset.stats.u_mean),
    ] {
        for (i, v) in vec.iter().enumerate() {
            text.push_str(&format!("{name},{i},{v}\n"));
        }
    }
    fs::write(&stats_path, text).map_err(|e| Error::io(stats_path.display().to_string(), e))?;

    let mut m = Manifest::new();
    m.push("kind", "dataset");
    m.push("config_hash", &dataset.manifest.config_hash);
    m.push("skip", dataset.manifest.skip);
    m.push("s_requested", dataset.manifest.s_requested);
    m.push("s", dataset.manifest.s);
    m.push("m", dataset.manifest.m);
    m.push("n_g", dataset.manifest.n_g);
    m.push("dropped", dataset.manifest.dropped);
    let degen = dataset
        .stats
        .degenerate
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";");
    m.push("degenerate_features", degen);
    m.save(&dir.join("manifest.txt"))
}

/// Reloads a dataset directory. When `expected` is given, the stored config
/// hash must match it.
pub fn load(dir: &Path, expected: Option<&GeneratorConfig>) -> Result<Dataset> {
    let manifest = Manifest::load(&dir.join("manifest.txt"))?;
    let config_hash = manifest.require("config_hash")?.to_string();
    if let Some(cfg) = expected {
        if cfg.hash() != config_hash {
            return Err(Error::Integrity(format!(
                "dataset config hash {} does not match requested configuration {}",
                config_hash,
                cfg.hash()
            )));
        }
    }
    let u = read_matrix_csv(&dir.join("U.csv"))?;
    let d = read_matrix_csv(&dir.join("D.csv"))?;
    let g0 = read_vector_csv(&dir.join("g0.csv"))?;

    let s: usize = manifest.require_parsed("s")?;
    let m: usize = manifest.require_parsed("m")?;
    let n_g: usize = manifest.require_parsed("n_g")?;
    if u.nrows() != s || d.nrows() != s || u.ncols() != m || d.ncols() != n_g || g0.len() != n_g {
        return Err(Error::Integrity(format!(
            "stored shapes (U {}x{}, D {}x{}, g0 {}) disagree with manifest (s={s}, m={m}, n_g={n_g})",
            u.nrows(),
            u.ncols(),
            d.nrows(),
            d.ncols(),
            g0.len()
        )));
    }

    let stats_text = fs::read_to_string(dir.join("stats.csv"))
        .map_err(|e| Error::io(dir.join("stats.csv").display().to_string(), e))?;
    let mut d_mean = vec![0.0; n_g];
    let mut d_std = vec![1.0; n_g];
    let mut u_mean = vec![0.0; m];
    for line in stats_text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (kind, idx, val) = (
            parts.next().unwrap_or(""),
            parts.next().unwrap_or(""),
            parts.next().unwrap_or(""),
        );
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::Integrity(format!("stats.csv: bad index '{idx}'")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| Error::Integrity(format!("stats.csv: bad value '{val}'")))?;
        match kind {
            "d_mean" => d_mean[idx] = val,
            "d_std" => d_std[idx] = val,
            "u_mean" => u_mean[idx] = val,
            other => return Err(Error::Integrity(format!("stats.csv: unknown kind '{other}'"))),
        }
    }
    let degenerate = manifest
        .require("degenerate_features")?
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Integrity("bad degenerate feature index".into()))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        u,
        d,
        g0,
        stats: Stats {
            d_mean: Array1::from_vec(d_mean),
            d_std: Array1::from_vec(d_std),
            u_mean: Array1::from_vec(u_mean),
            degenerate,
        },
        manifest: DatasetManifest {
            config_hash,
            skip: manifest.require_parsed("skip")?,
            s_requested: manifest.require_parsed("s_requested")?,
            s,
            m,
            n_g,
            dropped: manifest.require_parsed("dropped")?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_generator() -> Generator {
        let mut cfg = GeneratorConfig::desk_default();
        cfg.pts_per_section = 12;
        cfg.n_span = 8;
        Generator::new(cfg).unwrap()
    }

    #[test]
    fn all_valid_bounds_keep_every_sample() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 32, 1).unwrap();
        assert_eq!(ds.s(), 32);
        assert_eq!(ds.manifest.dropped, 0);
        assert_eq!(ds.n_g(), gen.config().n_g());
    }

    #[test]
    fn build_is_deterministic() {
        let gen = small_generator();
        let a = build_dataset(&gen, 16, 1).unwrap();
        let b = build_dataset(&gen, 16, 1).unwrap();
        assert_eq!(a.d.as_slice().unwrap(), b.d.as_slice().unwrap());
        assert_eq!(a.u.as_slice().unwrap(), b.u.as_slice().unwrap());
    }

    // Naive two-pass mean oracle.
    #[test]
    fn stored_mean_matches_two_pass_accumulation() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 24, 1).unwrap();
        for j in (0..ds.n_g()).step_by(97) {
            let mut acc = 0.0;
            for i in 0..ds.s() {
                acc += ds.d[[i, j]];
            }
            let mean = acc / ds.s() as f64;
            assert!((mean - ds.stats.d_mean[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn standardization_hand_case() {
        // feature row [1,3]: population mean 2, sigma 1, z-scores [-1,1]
        let d = array![[1.0], [3.0]];
        let u = array![[0.0], [1.0]];
        let stats = Stats::from_data(&d, &u);
        assert_eq!(stats.d_mean[0], 2.0);
        assert_eq!(stats.d_std[0], 1.0);
        let z = stats.standardize(&d);
        assert_eq!(z[[0, 0]], -1.0);
        assert_eq!(z[[1, 0]], 1.0);
    }

    #[test]
    fn constant_feature_standardizes_to_zero() {
        let d = array![[5.0, 1.0], [5.0, 3.0]];
        let u = array![[0.0], [1.0]];
        let stats = Stats::from_data(&d, &u);
        assert_eq!(stats.degenerate, vec![0]);
        assert_eq!(stats.d_std[0], 1.0);
        let z = stats.standardize(&d);
        assert_eq!(z[[0, 0]], 0.0);
        assert_eq!(z[[1, 0]], 0.0);
    }

    #[test]
    fn standardized_columns_are_centered_unit_variance() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 20, 1).unwrap();
        let z = ds.d_standardized();
        let s = ds.s() as f64;
        for j in (0..ds.n_g()).step_by(53) {
            let mean = z.column(j).sum() / s;
            assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
            if !ds.stats.degenerate.contains(&j) {
                let var = z.column(j).iter().map(|&x| x * x).sum::<f64>() / s;
                assert!((var - 1.0).abs() < 1e-8, "column {j} var {var}");
            }
        }
        let back = ds.stats.destandardize(&z);
        for (a, b) in ds.d.iter().zip(back.iter()) {
            let denom = a.abs().max(1.0);
            assert!((a - b).abs() / denom < 1e-10);
        }
    }

    #[test]
    fn save_load_roundtrip_is_bitwise() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 12, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let back = load(dir.path(), Some(gen.config())).unwrap();
        assert_eq!(ds.d.as_slice().unwrap(), back.d.as_slice().unwrap());
        assert_eq!(ds.u.as_slice().unwrap(), back.u.as_slice().unwrap());
        assert_eq!(ds.g0.as_slice().unwrap(), back.g0.as_slice().unwrap());
        assert_eq!(ds.stats, back.stats);
        assert_eq!(ds.manifest, back.manifest);
    }

    #[test]
    fn config_hash_mismatch_is_an_integrity_error() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 8, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let mut other = gen.config().clone();
        other.n_span = 9;
        let err = load(dir.path(), Some(&other)).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn truncated_store_is_an_integrity_error() {
        let gen = small_generator();
        let ds = build_dataset(&gen, 8, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        // chop the last line of D.csv
        let d_path = dir.path().join("D.csv");
        let text = std::fs::read_to_string(&d_path).unwrap();
        let cut = text.trim_end().rfind('\n').unwrap();
        std::fs::write(&d_path, &text[..cut + 1]).unwrap();
        assert!(matches!(
            load(dir.path(), None),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn too_few_samples_is_a_dataset_error() {
        let gen = small_generator();
        assert!(matches!(
            build_dataset(&gen, 1, 1),
            Err(Error::Dataset(_))
        ));
    }
}
