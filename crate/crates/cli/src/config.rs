//! Line-based experiment configuration: `section.key = value` pairs layered
//! over profile defaults.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pme_lab_core::dae;
use pme_lab_core::error::{Error, Result};
use pme_lab_core::neuralnet::TrainConfig;
use pme_lab_core::nlpme;
use pme_lab_core::shapegen::{GeneratorConfig, PARAMS_PER_SECTION};
use sha2::digest::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Profile> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

/// Per-model training settings plus widths.
#[derive(Debug, Clone)]
pub struct ModelSettings {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub generator: GeneratorConfig,
    pub sample_count: usize,
    pub sobol_skip: u64,
    pub surrogate: ModelSettings,
    /// Encoder hidden widths shared by both nonlinear models.
    pub encoder_hidden: Vec<usize>,
    pub nlpme_decoder_hidden: Vec<usize>,
    pub dae_decoder_hidden: Vec<usize>,
    pub nlpme_train: TrainConfig,
    pub dae_train: TrainConfig,
    pub sweep_n: Vec<usize>,
}

fn desk_train() -> TrainConfig {
    TrainConfig {
        max_epochs: 160,
        batch_size: 128,
        early_stop_patience: 40,
        plateau_patience: 15,
        ..TrainConfig::default()
    }
}

fn paper_train() -> TrainConfig {
    TrainConfig::default() // 10^4 epochs, patience 500, plateau 50
}

impl ExperimentConfig {
    pub fn defaults(profile: Profile) -> ExperimentConfig {
        let generator = GeneratorConfig::desk_default();
        let m = generator.m();
        match profile {
            Profile::Desk => ExperimentConfig {
                profile,
                seed: 7,
                out_dir: PathBuf::from("runs/desk"),
                generator,
                sample_count: 2048,
                sobol_skip: 1,
                surrogate: ModelSettings {
                    hidden: vec![64, 256, 512],
                    train: TrainConfig {
                        max_epochs: 320,
                        early_stop_patience: 60,
                        plateau_patience: 20,
                        ..desk_train()
                    },
                },
                encoder_hidden: nlpme::ENCODER_DESK.to_vec(),
                nlpme_decoder_hidden: nlpme::DECODER_DESK.to_vec(),
                dae_decoder_hidden: dae::DECODER_DESK.to_vec(),
                nlpme_train: desk_train(),
                dae_train: TrainConfig {
                    weight_decay: dae::WEIGHT_DECAY,
                    ..desk_train()
                },
                sweep_n: (1..m).collect(),
            },
            Profile::Paper => ExperimentConfig {
                profile,
                seed: 7,
                out_dir: PathBuf::from("runs/paper"),
                generator,
                sample_count: 16385,
                sobol_skip: 1,
                surrogate: ModelSettings {
                    hidden: vec![128, 512, 1024],
                    train: paper_train(),
                },
                encoder_hidden: nlpme::ENCODER_PAPER.to_vec(),
                nlpme_decoder_hidden: nlpme::DECODER_PAPER.to_vec(),
                dae_decoder_hidden: dae::DECODER_PAPER.to_vec(),
                nlpme_train: paper_train(),
                dae_train: TrainConfig {
                    weight_decay: dae::WEIGHT_DECAY,
                    ..paper_train()
                },
                sweep_n: (1..m.min(33)).collect(),
            },
        }
    }

    /// Parses a config file over profile defaults. `profile_override` wins
    /// over the file's `profile` key; `out_override` wins over `output`.
    pub fn load(
        path: Option<&Path>,
        profile_override: Option<Profile>,
        out_override: Option<&Path>,
    ) -> Result<ExperimentConfig> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }

        // profile first, then the rest layered on its defaults
        let mut profile = Profile::Desk;
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "profile") {
            profile = Profile::parse(v)?;
        }
        if let Some(p) = profile_override {
            profile = p;
        }
        let mut cfg = ExperimentConfig::defaults(profile);
        cfg.profile = profile;

        let mut seen = BTreeSet::new();
        for (key, value) in &pairs {
            if !seen.insert(key.clone()) {
                return Err(Error::Config(format!("duplicate key '{key}'")));
            }
            cfg.apply(key, value)?;
        }
        if let Some(out) = out_override {
            cfg.out_dir = out.to_path_buf();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad integer '{v}' for '{key}'")))
        };
        let parse_u64 = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Config(format!("bad integer '{v}' for '{key}'")))
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{v}' for '{key}'")))
        };
        let parse_list = |v: &str| -> Result<Vec<usize>> {
            v.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad list entry '{t}' for '{key}'")))
                })
                .collect()
        };
        match key {
            "profile" => {} // handled in the first pass
            "seed" => self.seed = parse_u64(value)?,
            "output" => self.out_dir = PathBuf::from(value),
            "sampling.count" => self.sample_count = parse_usize(value)?,
            "sampling.skip" => self.sobol_skip = parse_u64(value)?,
            "generator.n_sections" => {
                return Err(Error::Config(
                    "generator.n_sections is fixed by the built-in family; \
                     adjust the active mask instead"
                        .into(),
                ))
            }
            "generator.pts_per_section" => self.generator.pts_per_section = parse_usize(value)?,
            "generator.n_span" => self.generator.n_span = parse_usize(value)?,
            "generator.active" => self.generator.active = parse_list(value)?,
            "surrogate.hidden" => self.surrogate.hidden = parse_list(value)?,
            "surrogate.max_epochs" => self.surrogate.train.max_epochs = parse_usize(value)?,
            "nlpme.encoder_hidden" => self.encoder_hidden = parse_list(value)?,
            "nlpme.decoder_hidden" => self.nlpme_decoder_hidden = parse_list(value)?,
            "nlpme.max_epochs" => self.nlpme_train.max_epochs = parse_usize(value)?,
            "dae.decoder_hidden" => self.dae_decoder_hidden = parse_list(value)?,
            "dae.max_epochs" => self.dae_train.max_epochs = parse_usize(value)?,
            "dae.weight_decay" => self.dae_train.weight_decay = parse_f64(value)?,
            "train.batch_size" => {
                let b = parse_usize(value)?;
                self.surrogate.train.batch_size = b;
                self.nlpme_train.batch_size = b;
                self.dae_train.batch_size = b;
            }
            "train.early_stop_patience" => {
                let p = parse_usize(value)?;
                self.surrogate.train.early_stop_patience = p;
                self.nlpme_train.early_stop_patience = p;
                self.dae_train.early_stop_patience = p;
            }
            "train.plateau_patience" => {
                let p = parse_usize(value)?;
                self.surrogate.train.plateau_patience = p;
                self.nlpme_train.plateau_patience = p;
                self.dae_train.plateau_patience = p;
            }
            "train.min_improvement" => {
                let x = parse_f64(value)?;
                self.surrogate.train.min_improvement = x;
                self.nlpme_train.min_improvement = x;
                self.dae_train.min_improvement = x;
            }
            "sweep.n" => self.sweep_n = parse_list(value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.sample_count < 2 {
            return Err(Error::Config("sampling.count must be >= 2".into()));
        }
        if self.sweep_n.is_empty() {
            return Err(Error::Config("sweep.n must list at least one dimension".into()));
        }
        let mut last = 0;
        for &n in &self.sweep_n {
            if n == 0 || n <= last {
                return Err(Error::Config(
                    "sweep.n must be strictly increasing positive integers".into(),
                ));
            }
            last = n;
        }
        let m = self.generator.m();
        if *self.sweep_n.last().unwrap() >= m {
            return Err(Error::Config(format!(
                "sweep dimensions must stay below M={m}"
            )));
        }
        if self.generator.active.len() > PARAMS_PER_SECTION * self.generator.n_sections {
            return Err(Error::Config("active mask too large".into()));
        }
        Ok(())
    }

    /// Canonical resolved form; the hash of this string stamps every output.
    pub fn canonical_string(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let train = |t: &TrainConfig| {
            format!(
                "epochs={};batch={};lr={};lr_min={};factor={};plateau={};early={};improve={};decay={}",
                t.max_epochs,
                t.batch_size,
                t.lr_initial,
                t.lr_min,
                t.plateau_factor,
                t.plateau_patience,
                t.early_stop_patience,
                t.min_improvement,
                t.weight_decay
            )
        };
        let mut s = String::new();
        writeln!(s, "profile={}", self.profile.name()).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "sampling.count={}", self.sample_count).unwrap();
        writeln!(s, "sampling.skip={}", self.sobol_skip).unwrap();
        s.push_str(&self.generator.canonical_string());
        writeln!(s, "surrogate.hidden={}", list(&self.surrogate.hidden)).unwrap();
        writeln!(s, "surrogate.train={}", train(&self.surrogate.train)).unwrap();
        writeln!(s, "encoder_hidden={}", list(&self.encoder_hidden)).unwrap();
        writeln!(s, "nlpme.decoder_hidden={}", list(&self.nlpme_decoder_hidden)).unwrap();
        writeln!(s, "nlpme.train={}", train(&self.nlpme_train)).unwrap();
        writeln!(s, "dae.decoder_hidden={}", list(&self.dae_decoder_hidden)).unwrap();
        writeln!(s, "dae.train={}", train(&self.dae_train)).unwrap();
        writeln!(s, "sweep.n={}", list(&self.sweep_n)).unwrap();
        s
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = sha2::Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Deterministic per-cell training seed.
    pub fn cell_seed(&self, method: &str, n: usize) -> u64 {
        let tag: u64 = match method {
            "surrogate" => 1,
            "pme" => 2,
            "nlpme" => 3,
            "dae" => 4,
            _ => 99,
        };
        // splitmix64 over (seed, tag, n)
        let mut z = self
            .seed
            .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add((n as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }

    pub fn sweep_dir(&self) -> PathBuf {
        self.out_dir.join("sweep")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("report")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_valid_generators() {
        for profile in [Profile::Desk, Profile::Paper] {
            let cfg = ExperimentConfig::defaults(profile);
            assert!(cfg.validate().is_ok());
        }
    }

    #[test]
    fn parse_overrides_and_hash_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(
            &path,
            "# comment\nprofile = desk\nseed = 11\nsampling.count = 64\nsweep.n = 2,3,4\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(Some(&path), None, None).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.sample_count, 64);
        assert_eq!(cfg.sweep_n, vec![2, 3, 4]);
        let again = ExperimentConfig::load(Some(&path), None, None).unwrap();
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::defaults(Profile::Desk).hash());
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "bogus.key = 1\n").unwrap();
        assert!(matches!(
            ExperimentConfig::load(Some(&path), None, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_bounds_are_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.cfg");
        std::fs::write(&path, "sweep.n = 5,10\n").unwrap();
        assert!(ExperimentConfig::load(Some(&path), None, None).is_err());
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let cfg = ExperimentConfig::defaults(Profile::Desk);
        let mut seen = std::collections::BTreeSet::new();
        for method in ["surrogate", "pme", "nlpme", "dae"] {
            for n in 1..10 {
                assert!(seen.insert(cfg.cell_seed(method, n)));
            }
        }
    }
}
