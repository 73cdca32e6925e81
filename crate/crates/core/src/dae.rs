//! Deep-autoencoder baseline: direct geometric reconstruction from the
//! latent variable, trained with decoupled L2 weight decay. Shares the
//! encoder architecture and training protocol with the nonlinear embedding;
//! only the decoder target and the decay differ. Design variables are never
//! consulted.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::bundle::{read_vector_csv, write_vector_csv, Manifest};
use crate::dataset::{Dataset, Stats};
use crate::error::{Error, Result};
use crate::neuralnet::{
    mlp_init, train_supervised, Activation, MlpNetwork, MlpSpec, TrainConfig, TrainHistory,
};

/// Table-scale decoder widths (mirror of the encoder).
pub const DECODER_PAPER: [usize; 3] = [512, 1024, 1024];
/// Desk-scale decoder, mirroring the desk encoder.
pub const DECODER_DESK: [usize; 3] = [128, 256, 256];

/// Default decay strength.
pub const WEIGHT_DECAY: f64 = 2.5e-4;

#[derive(Debug, Clone)]
pub struct DaeModel {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    pub stats: Stats,
    pub n: usize,
    pub weight_decay: f64,
    pub history: TrainHistory,
    pub dataset_hash: String,
}

/// Trains the autoencoder on the full dataset (no validation split),
/// minimizing MSE in standardized units with decoupled weight decay.
pub fn train_dae(
    dataset: &Dataset,
    n: usize,
    encoder_hidden: &[usize],
    decoder_hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<DaeModel> {
    let n_g = dataset.n_g();
    if n == 0 || n >= n_g {
        return Err(Error::Config(format!(
            "latent dimension must satisfy 1 <= N < n_g, got N={n}, n_g={n_g}"
        )));
    }
    let mut widths = vec![n_g];
    widths.extend_from_slice(encoder_hidden);
    widths.push(n);
    widths.extend_from_slice(decoder_hidden);
    widths.push(n_g);
    let mut acts = vec![Activation::Gelu; encoder_hidden.len()];
    acts.push(Activation::Linear);
    acts.extend(std::iter::repeat_n(Activation::Gelu, decoder_hidden.len()));
    acts.push(Activation::Linear);
    let spec = MlpSpec::new(widths, acts)?;
    let mut composite = mlp_init(&spec, cfg.seed);

    let d_std = dataset.d_standardized();
    let history = train_supervised(&mut composite, &d_std, &d_std, cfg, None, None)?;
    let (encoder, decoder) = composite.split_at(encoder_hidden.len() + 1)?;
    Ok(DaeModel {
        encoder,
        decoder,
        stats: dataset.stats.clone(),
        n,
        weight_decay: cfg.weight_decay,
        history,
        dataset_hash: dataset.manifest.config_hash.clone(),
    })
}

impl DaeModel {
    pub fn n_g(&self) -> usize {
        self.encoder.input_width()
    }

    /// Direct reconstruction in raw units.
    pub fn reconstruct(&self, d_raw: &Array2<f64>) -> Result<Array2<f64>> {
        if d_raw.ncols() != self.n_g() {
            return Err(Error::Shape("geometry width mismatch".into()));
        }
        let d_std = self.stats.standardize(d_raw);
        let z = self.encoder.predict(&d_std)?;
        let out_std = self.decoder.predict(&z)?;
        Ok(self.stats.destandardize(&out_std))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut manifest = Manifest::new();
        manifest.push("kind", "dae");
        manifest.push("n", self.n);
        manifest.push("n_g", self.n_g());
        manifest.push("weight_decay", self.weight_decay);
        manifest.push("config_hash", &self.dataset_hash);
        self.encoder.save_layers(dir, "enc", &mut manifest)?;
        self.decoder.save_layers(dir, "dec", &mut manifest)?;
        manifest.save(&dir.join("manifest.txt"))?;
        write_vector_csv(&dir.join("d_mean.csv"), &self.stats.d_mean)?;
        write_vector_csv(&dir.join("d_std.csv"), &self.stats.d_std)?;
        write_vector_csv(&dir.join("u_mean.csv"), &self.stats.u_mean)?;
        let hist = dir.join("history.csv");
        fs::write(&hist, self.history.to_csv()).map_err(|e| Error::io(hist.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<DaeModel> {
        let manifest = Manifest::load(&dir.join("manifest.txt"))?;
        if manifest.require("kind")? != "dae" {
            return Err(Error::Integrity("bundle is not a DAE model".into()));
        }
        Ok(DaeModel {
            encoder: MlpNetwork::load_layers(dir, "enc", &manifest)?,
            decoder: MlpNetwork::load_layers(dir, "dec", &manifest)?,
            stats: Stats {
                d_mean: read_vector_csv(&dir.join("d_mean.csv"))?,
                d_std: read_vector_csv(&dir.join("d_std.csv"))?,
                u_mean: read_vector_csv(&dir.join("u_mean.csv"))?,
                degenerate: Vec::new(),
            },
            n: manifest.require_parsed("n")?,
            weight_decay: manifest.require_parsed("weight_decay")?,
            history: TrainHistory::default(),
            dataset_hash: manifest.require("config_hash")?.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;
    use crate::metrics;
    use crate::pme::{fit_pme, PmeWeights};
    use crate::shapegen::{Generator, GeneratorConfig};

    fn tiny_dataset() -> Dataset {
        let mut cfg = GeneratorConfig::desk_default();
        cfg.pts_per_section = 8;
        cfg.n_span = 4;
        let generator = Generator::new(cfg).unwrap();
        build_dataset(&generator, 96, 1).unwrap()
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 80,
            batch_size: 24,
            early_stop_patience: 40,
            plateau_patience: 15,
            weight_decay: WEIGHT_DECAY,
            seed: 23,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_decay_matters() {
        let ds = tiny_dataset();
        let a = train_dae(&ds, 3, &[32, 16], &[16, 32], &quick_cfg()).unwrap();
        let b = train_dae(&ds, 3, &[32, 16], &[16, 32], &quick_cfg()).unwrap();
        assert_eq!(a.encoder.checksum(), b.encoder.checksum());
        assert_eq!(a.decoder.checksum(), b.decoder.checksum());

        let no_decay = TrainConfig {
            weight_decay: 0.0,
            ..quick_cfg()
        };
        let c = train_dae(&ds, 3, &[32, 16], &[16, 32], &no_decay).unwrap();
        assert_ne!(a.decoder.checksum(), c.decoder.checksum());
    }

    #[test]
    fn reconstruction_is_deterministic_and_batched() {
        let ds = tiny_dataset();
        let model = train_dae(&ds, 2, &[24], &[24], &quick_cfg()).unwrap();
        let d = ds.d.slice(ndarray::s![..6, ..]).to_owned();
        let batch = model.reconstruct(&d).unwrap();
        let again = model.reconstruct(&d).unwrap();
        assert_eq!(batch, again);
        for i in 0..6 {
            let single = model
                .reconstruct(&d.slice(ndarray::s![i..i + 1, ..]).to_owned())
                .unwrap();
            for j in 0..ds.n_g() {
                assert_eq!(batch[[i, j]], single[[0, j]]);
            }
        }
    }

    // PCA residual oracle: with the latent dimension at the intrinsic rank
    // of an affine family, the linear optimum is ~0, so a trained DAE must
    // land under 1% NMSE.
    #[test]
    fn affine_family_reaches_pca_floor() {
        use ndarray::{Array1, Array2};
        let (s, m, n_g) = (160, 3, 8);
        let b = Array2::from_shape_fn((m, n_g), |(i, j)| ((i * 3 + j * 5) % 7) as f64 / 7.0 - 0.3);
        let u = crate::sobol::sobol_points(m, s, 1).unwrap();
        let d = u.dot(&b);
        let ds = Dataset::from_parts(u, d, Array1::zeros(n_g), "affine".into(), 1).unwrap();

        let pme = fit_pme(&ds, PmeWeights::identity(n_g)).unwrap();
        let resid = 1.0 - pme.retained_variance(m.min(pme.rank())).unwrap();
        assert!(resid < 1e-10, "affine family must be rank {m}: residual {resid}");

        let cfg = TrainConfig {
            max_epochs: 2500,
            batch_size: 32,
            early_stop_patience: 300,
            plateau_patience: 50,
            weight_decay: WEIGHT_DECAY,
            seed: 31,
            ..TrainConfig::default()
        };
        let model = train_dae(&ds, m, &[24], &[24], &cfg).unwrap();
        let eps = metrics::nmse(&ds.d, &model.reconstruct(&ds.d).unwrap()).unwrap();
        assert!(eps <= 0.01, "training NMSE {eps}");
    }

    #[test]
    fn bundle_roundtrip() {
        let ds = tiny_dataset();
        let model = train_dae(&ds, 2, &[16], &[16], &quick_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let back = DaeModel::load(dir.path()).unwrap();
        let d = ds.d.slice(ndarray::s![..3, ..]).to_owned();
        assert_eq!(
            model.reconstruct(&d).unwrap(),
            back.reconstruct(&d).unwrap()
        );
    }
}
