//! Minibatch training: Adam with optional decoupled weight decay,
//! reduce-on-plateau learning rate, early stopping with weight restore.

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::{mse_loss, Gradients, MlpNetwork};

/// Training hyperparameters. The defaults mirror the shared protocol of the
/// embedding models: Adam at 1e-3, plateau factor 0.5 down to 1e-6, early
/// stopping after 500 stale epochs with a 1e-6 improvement threshold.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_min: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub min_improvement: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 10_000,
            batch_size: 128,
            lr_initial: 1e-3,
            lr_min: 1e-6,
            plateau_factor: 0.5,
            plateau_patience: 50,
            early_stop_patience: 500,
            min_improvement: 1e-6,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_min > self.lr_initial {
            return Err(Error::Config("lr_min exceeds lr_initial".into()));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(Error::Config("patiences must be >= 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adam moment accumulators, shaped like the network parameters.
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &MlpNetwork) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_b: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    /// One bias-corrected update. Decoupled decay shrinks weight matrices
    /// (not biases) before the Adam step.
    pub fn apply(&mut self, net: &mut MlpNetwork, grads: &Gradients, lr: f64, weight_decay: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let beta1 = self.beta1;
        let beta2 = self.beta2;
        let epsilon = self.epsilon;
        let step = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };
        for l in 0..net.weights.len() {
            if weight_decay > 0.0 {
                let shrink = 1.0 - lr * weight_decay;
                net.weights[l].mapv_inplace(|w| w * shrink);
            }
            ndarray::Zip::from(&mut net.weights[l])
                .and(&grads.dw[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .for_each(step);
            ndarray::Zip::from(&mut net.biases[l])
                .and(&grads.db[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .for_each(step);
        }
    }
}

/// Reduce-on-plateau schedule: halve the rate after `patience` epochs without
/// a `min_improvement` drop, floored at `lr_min`.
pub struct PlateauScheduler {
    lr: f64,
    lr_min: f64,
    factor: f64,
    patience: usize,
    min_improvement: f64,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(cfg: &TrainConfig) -> Self {
        PlateauScheduler {
            lr: cfg.lr_initial,
            lr_min: cfg.lr_min,
            factor: cfg.plateau_factor,
            patience: cfg.plateau_patience,
            min_improvement: cfg.min_improvement,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch loss, returns the rate for the next epoch.
    pub fn update(&mut self, epoch_loss: f64) -> f64 {
        if epoch_loss < self.best - self.min_improvement {
            self.best = epoch_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr = (self.lr * self.factor).max(self.lr_min);
                self.stale = 0;
            }
        }
        self.lr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Loss the early stopper monitored at the end of training.
    pub fn final_monitored_loss(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.val_loss.unwrap_or(r.train_loss))
            .fold(None, |best: Option<f64>, l| {
                Some(best.map_or(l, |b| b.min(l)))
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_loss,lr\n");
        for r in &self.records {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, val, r.lr));
        }
        out
    }
}

fn gather_rows(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), src.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&src.row(i));
    }
    out
}

fn composed_loss(
    net: &MlpNetwork,
    through: Option<&MlpNetwork>,
    x: &Array2<f64>,
    y: &Array2<f64>,
) -> Result<f64> {
    let out = net.predict(x)?;
    let out = match through {
        Some(f) => f.predict(&out)?,
        None => out,
    };
    Ok(mse_loss(&out, y)?.0)
}

/// Supervised minibatch training of `net` toward `targets`.
///
/// When `through` is given, every forward pass is composed with that frozen
/// network and the loss gradient is routed back through its input gradient;
/// the frozen parameters are untouched (enforced by the shared reference).
/// Early stopping monitors the validation loss when `val` is provided and
/// the training loss otherwise, and always restores the best weights seen.
pub fn train_supervised(
    net: &mut MlpNetwork,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &TrainConfig,
    through: Option<&MlpNetwork>,
    val: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    let s = inputs.nrows();
    if s == 0 {
        return Err(Error::Dataset("empty training set".into()));
    }
    if targets.nrows() != s {
        return Err(Error::Shape("inputs and targets row counts differ".into()));
    }
    if let Some(f) = through {
        if f.input_width() != net.output_width() {
            return Err(Error::Shape(
                "frozen network input does not match trained network output".into(),
            ));
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(net);
    let mut scheduler = PlateauScheduler::new(cfg);
    let mut history = TrainHistory::default();

    // strict minimum controls the weight snapshot; the stale counter uses
    // the min_improvement threshold
    let mut best_loss = f64::INFINITY;
    let mut best_weights: Option<(Vec<Array2<f64>>, Vec<Array1<f64>>)> = None;
    let mut es_reference = f64::INFINITY;
    let mut stale = 0usize;

    let mut order: Vec<usize> = (0..s).collect();
    for epoch in 0..cfg.max_epochs {
        // seeded Fisher-Yates shuffle
        for i in (1..s).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }

        let lr = scheduler.lr();
        let mut loss_acc = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = gather_rows(inputs, chunk);
            let yb = gather_rows(targets, chunk);
            let (out, cache) = net.forward(&xb)?;
            let (loss, upstream) = match through {
                Some(f) => {
                    let (out2, cache2) = f.forward(&out)?;
                    let (loss, grad2) = mse_loss(&out2, &yb)?;
                    (loss, f.backward_input(&cache2, &grad2)?)
                }
                None => mse_loss(&out, &yb)?,
            };
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch} (lr {lr})"
                )));
            }
            let grads = net.backward_params(&cache, &upstream)?;
            adam.apply(net, &grads, lr, cfg.weight_decay);
            loss_acc += loss * chunk.len() as f64;
        }
        let train_loss = loss_acc / s as f64;

        let val_loss = match val {
            Some((vx, vy)) => Some(composed_loss(net, through, vx, vy)?),
            None => None,
        };
        let monitored = val_loss.unwrap_or(train_loss);
        if !monitored.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite monitored loss at epoch {epoch}"
            )));
        }

        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        if monitored < best_loss {
            best_loss = monitored;
            best_weights = Some((net.weights.clone(), net.biases.clone()));
        }
        if monitored < es_reference - cfg.min_improvement {
            es_reference = monitored;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                break;
            }
        }
        scheduler.update(monitored);
    }

    if let Some((w, b)) = best_weights {
        net.weights = w;
        net.biases = b;
    }
    Ok(history)
}
