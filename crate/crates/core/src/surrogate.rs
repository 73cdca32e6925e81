//! Differentiable forward surrogate: normalized design variables to
//! standardized shape modifications, pre-trained and then frozen.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bundle::{read_vector_csv, write_vector_csv, Manifest};
use crate::dataset::{Dataset, Stats};
use crate::error::{Error, Result};
use crate::metrics;
use crate::neuralnet::{
    mlp_init, train_supervised, Activation, MlpNetwork, MlpSpec, TrainConfig, TrainHistory,
};
use crate::shapegen::{DesignVector, Generator};

/// Default hidden widths of the full-width surrogate.
pub const PAPER_HIDDEN: [usize; 3] = [128, 512, 1024];

/// Frozen forward surrogate. The network maps `u in [0,1]^M` to z-scored
/// shape modifications; predictions can be destandardized with the stored
/// statistics.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    net: MlpNetwork,
    pub stats: Stats,
    pub frozen: bool,
    pub val_loss: f64,
    pub dataset_hash: String,
    pub history: TrainHistory,
}

impl SurrogateModel {
    pub fn net(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn m(&self) -> usize {
        self.net.input_width()
    }

    pub fn n_g(&self) -> usize {
        self.net.output_width()
    }

    pub fn checksum(&self) -> String {
        self.net.checksum()
    }

    /// Pure batched forward pass in standardized units.
    pub fn predict_std(&self, u: &Array2<f64>) -> Result<Array2<f64>> {
        self.net.predict(u)
    }

    /// Forward pass destandardized to raw shape-modification units.
    pub fn predict_raw(&self, u: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.stats.destandardize(&self.predict_std(u)?))
    }

    /// True when every component of every input lies in the unit box; inputs
    /// outside are still accepted, callers may warn.
    pub fn inputs_within_box(u: &Array2<f64>) -> bool {
        u.iter().all(|&x| (0.0..=1.0).contains(&x))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut manifest = Manifest::new();
        manifest.push("kind", "surrogate");
        manifest.push("frozen", self.frozen);
        manifest.push("m", self.m());
        manifest.push("n_g", self.n_g());
        manifest.push("val_loss", self.val_loss);
        manifest.push("config_hash", &self.dataset_hash);
        manifest.push("checksum", self.checksum());
        self.net.save_layers(dir, "net", &mut manifest)?;
        manifest.save(&dir.join("manifest.txt"))?;
        write_vector_csv(&dir.join("d_mean.csv"), &self.stats.d_mean)?;
        write_vector_csv(&dir.join("d_std.csv"), &self.stats.d_std)?;
        write_vector_csv(&dir.join("u_mean.csv"), &self.stats.u_mean)?;
        let hist = dir.join("history.csv");
        fs::write(&hist, self.history.to_csv()).map_err(|e| Error::io(hist.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<SurrogateModel> {
        let manifest = Manifest::load(&dir.join("manifest.txt"))?;
        if manifest.require("kind")? != "surrogate" {
            return Err(Error::Integrity("bundle is not a surrogate model".into()));
        }
        let net = MlpNetwork::load_layers(dir, "net", &manifest)?;
        let stored: String = manifest.require("checksum")?.to_string();
        if net.checksum() != stored {
            return Err(Error::Integrity("surrogate checksum mismatch".into()));
        }
        Ok(SurrogateModel {
            net,
            stats: Stats {
                d_mean: read_vector_csv(&dir.join("d_mean.csv"))?,
                d_std: read_vector_csv(&dir.join("d_std.csv"))?,
                u_mean: read_vector_csv(&dir.join("u_mean.csv"))?,
                degenerate: Vec::new(),
            },
            frozen: manifest.require_parsed("frozen")?,
            val_loss: manifest.require_parsed("val_loss")?,
            dataset_hash: manifest.require("config_hash")?.to_string(),
            history: TrainHistory::default(),
        })
    }
}

/// Supervised pre-training with a deterministic 90/10 split; the validation
/// subset is used only to select the surrogate weights, never downstream.
pub fn train_surrogate(
    dataset: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<SurrogateModel> {
    let s = dataset.s();
    if s < 10 {
        return Err(Error::Dataset(format!(
            "surrogate training needs at least 10 samples, got {s}"
        )));
    }
    let d_std = dataset.d_standardized();

    // seeded permutation; first tenth is the validation subset
    let mut order: Vec<usize> = (0..s).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x5351_4d53_504c_4954);
    for i in (1..s).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let n_val = (s / 10).max(1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let take = |src: &Array2<f64>, idx: &[usize]| {
        let mut out = Array2::zeros((idx.len(), src.ncols()));
        for (row, &i) in idx.iter().enumerate() {
            out.row_mut(row).assign(&src.row(i));
        }
        out
    };
    let (x_train, y_train) = (take(&dataset.u, train_idx), take(&d_std, train_idx));
    let (x_val, y_val) = (take(&dataset.u, val_idx), take(&d_std, val_idx));

    let spec = MlpSpec::with_hidden(dataset.m(), hidden, dataset.n_g(), Activation::Linear)?;
    let mut net = mlp_init(&spec, cfg.seed);
    let history = train_supervised(
        &mut net,
        &x_train,
        &y_train,
        cfg,
        None,
        Some((&x_val, &y_val)),
    )?;
    let val_loss = history
        .final_monitored_loss()
        .ok_or_else(|| Error::Numeric("no epochs recorded".into()))?;

    Ok(SurrogateModel {
        net,
        stats: dataset.stats.clone(),
        frozen: true,
        val_loss,
        dataset_hash: dataset.manifest.config_hash.clone(),
        history,
    })
}

/// Per-sample discrepancy between the surrogate and the exact generator on
/// the given design vectors, in raw units, normalized like the shared
/// reconstruction metric.
#[derive(Debug, Clone)]
pub struct FidelityReport {
    pub per_sample: Array1<f64>,
    pub mean: f64,
}

pub fn surrogate_fidelity_report(
    model: &SurrogateModel,
    generator: &Generator,
    u: &Array2<f64>,
) -> Result<FidelityReport> {
    if u.ncols() != model.m() {
        return Err(Error::Shape("design width mismatch".into()));
    }
    let mut d_exact = Array2::zeros((u.nrows(), model.n_g()));
    for i in 0..u.nrows() {
        let sample = generator.generate(&DesignVector::new(u.row(i).to_owned())?)?;
        d_exact.row_mut(i).assign(&sample.d);
    }
    let d_pred = model.predict_raw(u)?;
    Ok(FidelityReport {
        per_sample: metrics::per_sample_nse(&d_exact, &d_pred)?,
        mean: metrics::nmse(&d_exact, &d_pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;
    use crate::shapegen::GeneratorConfig;

    fn tiny_dataset() -> (Generator, Dataset) {
        let mut cfg = GeneratorConfig::desk_default();
        cfg.pts_per_section = 8;
        cfg.n_span = 4;
        let generator = Generator::new(cfg).unwrap();
        let ds = build_dataset(&generator, 64, 1).unwrap();
        (generator, ds)
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 60,
            batch_size: 16,
            early_stop_patience: 30,
            plateau_patience: 10,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_freezes_and_is_deterministic() {
        let (_, ds) = tiny_dataset();
        let a = train_surrogate(&ds, &[16, 32], &quick_cfg()).unwrap();
        let b = train_surrogate(&ds, &[16, 32], &quick_cfg()).unwrap();
        assert!(a.frozen);
        assert_eq!(a.checksum(), b.checksum());
        assert!(a.val_loss.is_finite());
    }

    #[test]
    fn prediction_is_pure_and_batched() {
        let (_, ds) = tiny_dataset();
        let model = train_surrogate(&ds, &[8], &quick_cfg()).unwrap();
        let u = ds.u.slice(ndarray::s![..5, ..]).to_owned();
        let batch = model.predict_std(&u).unwrap();
        for i in 0..5 {
            let single = model
                .predict_std(&u.slice(ndarray::s![i..i + 1, ..]).to_owned())
                .unwrap();
            for j in 0..model.n_g() {
                assert_eq!(batch[[i, j]], single[[0, j]]);
            }
        }
        // identical inputs -> identical outputs
        let twice = model.predict_std(&u).unwrap();
        assert_eq!(batch, twice);
        assert!(SurrogateModel::inputs_within_box(&u));
    }

    // Least-squares oracle: on an affine family a linear surrogate must fit
    // essentially exactly.
    #[test]
    fn affine_family_linear_surrogate_is_exact() {
        use ndarray::Array2;
        let (s, m, n_g) = (200, 4, 12);
        let b = Array2::from_shape_fn((m, n_g), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let u = crate::sobol::sobol_points(m, s, 1).unwrap();
        let d = u.dot(&b);
        let ds = Dataset::from_parts(u, d, ndarray::Array1::zeros(n_g), "affine".into(), 1).unwrap();
        let cfg = TrainConfig {
            max_epochs: 3000,
            batch_size: 32,
            early_stop_patience: 300,
            plateau_patience: 60,
            seed: 3,
            ..TrainConfig::default()
        };
        let model = train_surrogate(&ds, &[], &cfg).unwrap();
        let pred = model.predict_raw(&ds.u).unwrap();
        let eps = metrics::nmse(&ds.d, &pred).unwrap();
        assert!(eps <= 1e-6, "validation NMSE {eps}");
    }

    #[test]
    fn fidelity_report_against_self_is_zero_mean_definition() {
        let (generator, ds) = tiny_dataset();
        let model = train_surrogate(&ds, &[16], &quick_cfg()).unwrap();
        let u = ds.u.slice(ndarray::s![..8, ..]).to_owned();
        let report = surrogate_fidelity_report(&model, &generator, &u).unwrap();
        // the mean is the shared metric applied to (exact, predicted)
        let mut d_exact = Array2::zeros((8, model.n_g()));
        for i in 0..8 {
            let s = generator
                .generate(&DesignVector::new(u.row(i).to_owned()).unwrap())
                .unwrap();
            d_exact.row_mut(i).assign(&s.d);
        }
        let pred = model.predict_raw(&u).unwrap();
        let eps = metrics::nmse(&d_exact, &pred).unwrap();
        assert!((report.mean - eps).abs() < 1e-14);
        assert!((report.per_sample.mean().unwrap() - report.mean).abs() < 1e-12);
    }

    // Sanity direction: discrepancy on held-out Sobol points exceeds the
    // training discrepancy.
    #[test]
    fn held_out_discrepancy_exceeds_training() {
        let mut cfg = GeneratorConfig::desk_default();
        cfg.pts_per_section = 8;
        cfg.n_span = 4;
        let generator = Generator::new(cfg).unwrap();
        let ds = build_dataset(&generator, 48, 1).unwrap();
        let t_cfg = TrainConfig {
            max_epochs: 400,
            batch_size: 16,
            early_stop_patience: 100,
            plateau_patience: 25,
            seed: 77,
            ..TrainConfig::default()
        };
        let model = train_surrogate(&ds, &[24, 48], &t_cfg).unwrap();
        let train_report = surrogate_fidelity_report(&model, &generator, &ds.u).unwrap();
        let fresh_u = crate::sobol::sobol_points(ds.m(), 48, 1 + ds.s() as u64).unwrap();
        let fresh_report = surrogate_fidelity_report(&model, &generator, &fresh_u).unwrap();
        assert!(
            fresh_report.mean > train_report.mean,
            "held-out {:.3e} vs training {:.3e}",
            fresh_report.mean,
            train_report.mean
        );
    }

    #[test]
    fn bundle_roundtrip_preserves_checksum() {
        let (_, ds) = tiny_dataset();
        let model = train_surrogate(&ds, &[8], &quick_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let back = SurrogateModel::load(dir.path()).unwrap();
        assert!(back.frozen);
        assert_eq!(back.checksum(), model.checksum());
        let u = ds.u.slice(ndarray::s![..3, ..]).to_owned();
        assert_eq!(
            model.predict_std(&u).unwrap(),
            back.predict_std(&u).unwrap()
        );
    }
}
