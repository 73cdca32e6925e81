//! Nonlinear parametric model embedding.
//!
//! The encoder maps standardized shape modifications to a latent vector z,
//! the decoder maps z to normalized design parameters in the open unit box
//! (sigmoid output), and geometry is recovered only by pushing those
//! parameters through the frozen forward surrogate (during training and by
//! default) or the exact generator (for evaluation). Training minimizes the
//! geometry-consistency loss alone: MSE between the standardized shape
//! modification and its parameter-mediated reconstruction, with gradients
//! routed through the frozen surrogate's input gradient.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::bundle::Manifest;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neuralnet::{
    mlp_init, train_supervised, Activation, MlpNetwork, MlpSpec, TrainConfig, TrainHistory,
};
use crate::shapegen::{DesignVector, Generator};
use crate::surrogate::SurrogateModel;

/// Table-scale widths.
pub const ENCODER_PAPER: [usize; 3] = [1024, 1024, 512];
pub const DECODER_PAPER: [usize; 2] = [256, 128];
/// Desk-scale widths for minutes-scale training.
pub const ENCODER_DESK: [usize; 3] = [256, 256, 128];
pub const DECODER_DESK: [usize; 2] = [64, 32];

/// Trained nonlinear embedding bundled with its frozen surrogate.
#[derive(Debug, Clone)]
pub struct NlpmeModel {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    pub surrogate: SurrogateModel,
    pub n: usize,
    pub history: TrainHistory,
    pub dataset_hash: String,
}

/// Which forward map recovers geometry from decoded parameters.
pub enum ReconstructionPath<'a> {
    Surrogate,
    Generator(&'a Generator),
}

/// Trains encoder and decoder through the frozen surrogate. The surrogate
/// weights are never touched; this is re-checked via checksum.
pub fn train_nlpme(
    dataset: &Dataset,
    surrogate: &SurrogateModel,
    n: usize,
    encoder_hidden: &[usize],
    decoder_hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<NlpmeModel> {
    if !surrogate.frozen {
        return Err(Error::Contract("surrogate must be frozen before NLPME training".into()));
    }
    let m = dataset.m();
    if n == 0 || n >= m {
        return Err(Error::Config(format!(
            "latent dimension must satisfy 1 <= N < M, got N={n}, M={m}"
        )));
    }
    if surrogate.m() != m || surrogate.n_g() != dataset.n_g() {
        return Err(Error::Shape("surrogate dimensions do not match dataset".into()));
    }

    // encoder: gelu hidden stack + linear latent head
    // decoder: gelu hidden stack + sigmoid parameter head
    let mut widths = vec![dataset.n_g()];
    widths.extend_from_slice(encoder_hidden);
    widths.push(n);
    widths.extend_from_slice(decoder_hidden);
    widths.push(m);
    let mut acts = vec![Activation::Gelu; encoder_hidden.len()];
    acts.push(Activation::Linear);
    acts.extend(std::iter::repeat_n(Activation::Gelu, decoder_hidden.len()));
    acts.push(Activation::Sigmoid);
    let spec = MlpSpec::new(widths, acts)?;
    let mut composite = mlp_init(&spec, cfg.seed);

    let checksum_before = surrogate.checksum();
    let d_std = dataset.d_standardized();
    let history = train_supervised(
        &mut composite,
        &d_std,
        &d_std,
        cfg,
        Some(surrogate.net()),
        None,
    )?;
    if surrogate.checksum() != checksum_before {
        return Err(Error::Contract("frozen surrogate was mutated during training".into()));
    }

    let (encoder, decoder) = composite.split_at(encoder_hidden.len() + 1)?;
    Ok(NlpmeModel {
        encoder,
        decoder,
        surrogate: surrogate.clone(),
        n,
        history,
        dataset_hash: dataset.manifest.config_hash.clone(),
    })
}

impl NlpmeModel {
    pub fn n_g(&self) -> usize {
        self.encoder.input_width()
    }

    pub fn m(&self) -> usize {
        self.decoder.output_width()
    }

    /// Latent coordinates of raw shape modifications (rows). Standardization
    /// is applied internally with the surrogate's statistics.
    pub fn encode(&self, d_raw: &Array2<f64>) -> Result<Array2<f64>> {
        if d_raw.ncols() != self.n_g() {
            return Err(Error::Shape("geometry width mismatch".into()));
        }
        let d_std = self.surrogate.stats.standardize(d_raw);
        self.encoder.predict(&d_std)
    }

    /// Decoded normalized parameters, strictly inside the unit box.
    pub fn decode(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.n {
            return Err(Error::Shape(format!(
                "latent width {} does not match N={}",
                z.ncols(),
                self.n
            )));
        }
        self.decoder.predict(z)
    }

    /// Full parameter-mediated reconstruction in raw units. Geometry always
    /// factors through the decoded parameters.
    pub fn reconstruct(&self, d_raw: &Array2<f64>, path: ReconstructionPath) -> Result<Array2<f64>> {
        let u_hat = self.decode(&self.encode(d_raw)?)?;
        self.reconstruct_from_parameters(&u_hat, path)
    }

    /// Maps already-decoded parameters to raw shape modifications.
    pub fn reconstruct_from_parameters(
        &self,
        u_hat: &Array2<f64>,
        path: ReconstructionPath,
    ) -> Result<Array2<f64>> {
        match path {
            ReconstructionPath::Surrogate => self.surrogate.predict_raw(u_hat),
            ReconstructionPath::Generator(generator) => {
                if generator.config().m() != self.m() {
                    return Err(Error::Config(
                        "generator free-variable count does not match the decoder".into(),
                    ));
                }
                let mut out = Array2::zeros((u_hat.nrows(), self.n_g()));
                for i in 0..u_hat.nrows() {
                    let u = DesignVector::new(u_hat.row(i).to_owned())?;
                    let sample = generator.generate(&u)?;
                    out.row_mut(i).assign(&sample.d);
                }
                Ok(out)
            }
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut manifest = Manifest::new();
        manifest.push("kind", "nlpme");
        manifest.push("n", self.n);
        manifest.push("m", self.m());
        manifest.push("n_g", self.n_g());
        manifest.push("config_hash", &self.dataset_hash);
        manifest.push("surrogate_checksum", self.surrogate.checksum());
        self.encoder.save_layers(dir, "enc", &mut manifest)?;
        self.decoder.save_layers(dir, "dec", &mut manifest)?;
        manifest.save(&dir.join("manifest.txt"))?;
        self.surrogate.save(&dir.join("surrogate"))?;
        let hist = dir.join("history.csv");
        fs::write(&hist, self.history.to_csv()).map_err(|e| Error::io(hist.display().to_string(), e))
    }

    pub fn load(dir: &Path) -> Result<NlpmeModel> {
        let manifest = Manifest::load(&dir.join("manifest.txt"))?;
        if manifest.require("kind")? != "nlpme" {
            return Err(Error::Integrity("bundle is not an NLPME model".into()));
        }
        let surrogate = SurrogateModel::load(&dir.join("surrogate"))?;
        let stored: String = manifest.require("surrogate_checksum")?.to_string();
        if surrogate.checksum() != stored {
            return Err(Error::Integrity(
                "bundled surrogate does not match the recorded checksum".into(),
            ));
        }
        Ok(NlpmeModel {
            encoder: MlpNetwork::load_layers(dir, "enc", &manifest)?,
            decoder: MlpNetwork::load_layers(dir, "dec", &manifest)?,
            surrogate,
            n: manifest.require_parsed("n")?,
            history: TrainHistory::default(),
            dataset_hash: manifest.require("config_hash")?.to_string(),
        })
    }
}
