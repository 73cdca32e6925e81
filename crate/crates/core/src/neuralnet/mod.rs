//! Dense multilayer perceptron with exact reverse-mode gradients.
//!
//! The fixed affine+activation chain is all the embedding models need, so
//! there is no general autodiff graph here. Backward passes return parameter
//! gradients and, crucially, the gradient with respect to the *input*: the
//! embedding training loop routes gradients through a frozen downstream
//! network into the upstream one.
//!
//! Rows are samples throughout; weight matrices are `(fan_in, fan_out)`.

mod train;

pub use train::{
    train_supervised, AdamState, EpochRecord, PlateauScheduler, TrainConfig, TrainHistory,
};

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::bundle::{read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv, Manifest};
use crate::error::{Error, Result};

/// Per-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Gelu => "gelu",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Activation::Gelu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative given the pre-activation and the activation value.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Gelu => gelu_derivative(z),
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Exact GELU: `x * Phi(x)` with the standard normal CDF via erf.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[inline]
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Numerically stable logistic function, clamped to the open interval so
/// saturated outputs stay strictly inside (0,1) even where f64 would round
/// to the endpoints.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Layer widths plus the activation applied after each affine map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::Config(format!(
                "{} widths require {} activations, got {}",
                widths.len(),
                widths.len() - 1,
                activations.len()
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        Ok(MlpSpec { widths, activations })
    }

    /// Hidden GELU stack with a chosen final activation.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize, last: Activation) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        let mut acts = vec![Activation::Gelu; hidden.len()];
        acts.push(last);
        MlpSpec::new(widths, acts)
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Dense network with owned parameters.
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    pub spec: MlpSpec,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Intermediate state of one forward pass, consumed by the backward pass.
pub struct ForwardCache {
    /// Layer inputs: `activations[0]` is the network input, `activations[l+1]`
    /// the output of layer `l`.
    activations: Vec<Array2<f64>>,
    /// Pre-activation values per layer.
    preacts: Vec<Array2<f64>>,
}

/// Parameter gradients aligned with `MlpNetwork::weights` / `biases`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dw: Vec<Array2<f64>>,
    pub db: Vec<Array1<f64>>,
}

/// Initializes weights uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` and
/// biases at zero. Deterministic per seed.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> MlpNetwork {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut weights = Vec::with_capacity(spec.n_layers());
    let mut biases = Vec::with_capacity(spec.n_layers());
    for l in 0..spec.n_layers() {
        let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| bound * (2.0 * uniform() - 1.0));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    MlpNetwork {
        spec: spec.clone(),
        weights,
        biases,
    }
}

impl MlpNetwork {
    pub fn input_width(&self) -> usize {
        self.spec.input_width()
    }

    pub fn output_width(&self) -> usize {
        self.spec.output_width()
    }

    /// Total parameter count.
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Forward pass retaining the cache needed for gradients.
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.spec.n_layers() + 1);
        let mut preacts = Vec::with_capacity(self.spec.n_layers());
        activations.push(x.to_owned());
        for l in 0..self.spec.n_layers() {
            let z = {
                let mut z = activations[l].dot(&self.weights[l]);
                for mut row in z.rows_mut() {
                    row += &self.biases[l];
                }
                z
            };
            let act = self.spec.activations[l];
            let a = z.mapv(|v| act.apply(v));
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation in layer {l}"
                )));
            }
            preacts.push(z);
            activations.push(a);
        }
        let y = activations.last().unwrap().clone();
        Ok((y, ForwardCache { activations, preacts }))
    }

    /// Forward pass without cache.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut a = x.to_owned();
        for l in 0..self.spec.n_layers() {
            let mut z = a.dot(&self.weights[l]);
            for mut row in z.rows_mut() {
                row += &self.biases[l];
            }
            let act = self.spec.activations[l];
            z.mapv_inplace(|v| act.apply(v));
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite activation in layer {l}"
                )));
            }
            a = z;
        }
        Ok(a)
    }

    fn check_cache(&self, cache: &ForwardCache, dl_dy: &Array2<f64>) -> Result<()> {
        if cache.preacts.len() != self.spec.n_layers()
            || cache.activations.len() != self.spec.n_layers() + 1
            || cache
                .activations
                .iter()
                .zip(self.spec.widths.iter())
                .any(|(a, &w)| a.ncols() != w)
        {
            return Err(Error::Contract("cache does not belong to this network".into()));
        }
        let last = cache.activations.last().unwrap();
        if dl_dy.shape() != last.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient shape {:?} does not match output {:?}",
                dl_dy.shape(),
                last.shape()
            )));
        }
        Ok(())
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        dl_dy: &Array2<f64>,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Array2<f64>>)> {
        self.check_cache(cache, dl_dy)?;
        let n_layers = self.spec.n_layers();
        let mut grads = want_params.then(|| Gradients {
            dw: Vec::with_capacity(n_layers),
            db: Vec::with_capacity(n_layers),
        });
        let mut upstream = dl_dy.to_owned();
        for l in (0..n_layers).rev() {
            let act = self.spec.activations[l];
            // dz = upstream .* act'(z)
            let mut dz = upstream;
            if act != Activation::Linear {
                let z = &cache.preacts[l];
                let a = &cache.activations[l + 1];
                dz.indexed_iter_mut()
                    .for_each(|((i, j), g)| *g *= act.derivative(z[[i, j]], a[[i, j]]));
            }
            if let Some(g) = grads.as_mut() {
                g.dw.push(cache.activations[l].t().dot(&dz));
                g.db.push(dz.sum_axis(Axis(0)));
            }
            if l > 0 || want_input {
                upstream = dz.dot(&self.weights[l].t());
            } else {
                upstream = dz; // placeholder, not used
            }
        }
        if let Some(g) = grads.as_mut() {
            g.dw.reverse();
            g.db.reverse();
        }
        let input_grad = want_input.then_some(upstream);
        Ok((grads, input_grad))
    }

    /// Exact gradients of every weight, bias, and the input.
    pub fn backward(&self, cache: &ForwardCache, dl_dy: &Array2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let (g, x) = self.backward_impl(cache, dl_dy, true, true)?;
        Ok((g.unwrap(), x.unwrap()))
    }

    /// Parameter gradients only; skips the input-gradient product.
    pub fn backward_params(&self, cache: &ForwardCache, dl_dy: &Array2<f64>) -> Result<Gradients> {
        let (g, _) = self.backward_impl(cache, dl_dy, true, false)?;
        Ok(g.unwrap())
    }

    /// Input gradient only; used to route gradients through frozen networks.
    pub fn backward_input(&self, cache: &ForwardCache, dl_dy: &Array2<f64>) -> Result<Array2<f64>> {
        let (_, x) = self.backward_impl(cache, dl_dy, false, true)?;
        Ok(x.unwrap())
    }

    /// SHA-256 over layer shapes and parameter bits; stable across runs.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            hasher.update((w.nrows() as u64).to_le_bytes());
            hasher.update((w.ncols() as u64).to_le_bytes());
            for v in w.iter() {
                hasher.update(v.to_le_bytes());
            }
            for v in b.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|x| format!("{x:02x}"))
            .collect()
    }

    /// Splits into two networks at layer boundary `at` (first network keeps
    /// layers `0..at`).
    pub fn split_at(&self, at: usize) -> Result<(MlpNetwork, MlpNetwork)> {
        if at == 0 || at >= self.spec.n_layers() {
            return Err(Error::Config(format!(
                "cannot split {} layers at {at}",
                self.spec.n_layers()
            )));
        }
        let head = MlpNetwork {
            spec: MlpSpec::new(
                self.spec.widths[..=at].to_vec(),
                self.spec.activations[..at].to_vec(),
            )?,
            weights: self.weights[..at].to_vec(),
            biases: self.biases[..at].to_vec(),
        };
        let tail = MlpNetwork {
            spec: MlpSpec::new(
                self.spec.widths[at..].to_vec(),
                self.spec.activations[at..].to_vec(),
            )?,
            weights: self.weights[at..].to_vec(),
            biases: self.biases[at..].to_vec(),
        };
        Ok((head, tail))
    }

    /// Stacks `self` then `other` into one network.
    pub fn concat(&self, other: &MlpNetwork) -> Result<MlpNetwork> {
        if self.output_width() != other.input_width() {
            return Err(Error::Shape("cannot concatenate: widths disagree".into()));
        }
        let mut widths = self.spec.widths.clone();
        widths.extend_from_slice(&other.spec.widths[1..]);
        let mut acts = self.spec.activations.clone();
        acts.extend_from_slice(&other.spec.activations);
        let mut weights = self.weights.clone();
        weights.extend_from_slice(&other.weights);
        let mut biases = self.biases.clone();
        biases.extend_from_slice(&other.biases);
        Ok(MlpNetwork {
            spec: MlpSpec::new(widths, acts)?,
            weights,
            biases,
        })
    }

    /// Writes the layer files `<prefix>_w<l>.csv` / `<prefix>_b<l>.csv` and
    /// records the spec under `<prefix>.*` keys in the manifest.
    pub fn save_layers(&self, dir: &Path, prefix: &str, manifest: &mut Manifest) -> Result<()> {
        manifest.push(
            &format!("{prefix}.widths"),
            self.spec
                .widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        manifest.push(
            &format!("{prefix}.activations"),
            self.spec
                .activations
                .iter()
                .map(|a| a.name().to_string())
                .collect::<Vec<_>>()
                .join(";"),
        );
        for l in 0..self.spec.n_layers() {
            write_matrix_csv(&dir.join(format!("{prefix}_w{l}.csv")), &self.weights[l])?;
            write_vector_csv(&dir.join(format!("{prefix}_b{l}.csv")), &self.biases[l])?;
        }
        Ok(())
    }

    pub fn load_layers(dir: &Path, prefix: &str, manifest: &Manifest) -> Result<MlpNetwork> {
        let widths: Vec<usize> = manifest
            .require(&format!("{prefix}.widths"))?
            .split(';')
            .map(|s| s.parse().map_err(|_| Error::Integrity("bad width".into())))
            .collect::<Result<_>>()?;
        let activations: Vec<Activation> = manifest
            .require(&format!("{prefix}.activations"))?
            .split(';')
            .map(Activation::parse)
            .collect::<Result<_>>()?;
        let spec = MlpSpec::new(widths, activations)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..spec.n_layers() {
            let w = read_matrix_csv(&dir.join(format!("{prefix}_w{l}.csv")))?;
            let b = read_vector_csv(&dir.join(format!("{prefix}_b{l}.csv")))?;
            if w.nrows() != spec.widths[l] || w.ncols() != spec.widths[l + 1] || b.len() != spec.widths[l + 1]
            {
                return Err(Error::Integrity(format!("layer {l} shape disagrees with spec")));
            }
            weights.push(w);
            biases.push(b);
        }
        Ok(MlpNetwork { spec, weights, biases })
    }
}

/// Mean squared error over all entries plus its gradient.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction shape {:?} does not match target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.len() as f64;
    let mut grad = pred - target;
    let loss = grad.iter().map(|&x| x * x).sum::<f64>() / count;
    grad.mapv_inplace(|x| 2.0 * x / count);
    Ok((loss, grad))
}

/// Central-difference verification of every parameter and input gradient.
/// Returns the maximum relative error, with the relative scale floored at
/// 1e-3 so near-zero gradients are compared absolutely.
pub fn gradient_check(net: &MlpNetwork, x: &Array2<f64>, target: &Array2<f64>, h: f64) -> Result<f64> {
    let loss_at = |net: &MlpNetwork, x: &Array2<f64>| -> Result<f64> {
        let y = net.predict(x)?;
        Ok(mse_loss(&y, target)?.0)
    };
    let (y, cache) = net.forward(x)?;
    let (_, dl_dy) = mse_loss(&y, target)?;
    let (grads, dl_dx) = net.backward(&cache, &dl_dy)?;

    let rel = |analytic: f64, numeric: f64| {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
    };
    let mut max_err: f64 = 0.0;

    let mut probe = net.clone();
    for l in 0..net.spec.n_layers() {
        for idx in 0..net.weights[l].len() {
            let (r, c) = (idx / net.weights[l].ncols(), idx % net.weights[l].ncols());
            let orig = probe.weights[l][[r, c]];
            probe.weights[l][[r, c]] = orig + h;
            let up = loss_at(&probe, x)?;
            probe.weights[l][[r, c]] = orig - h;
            let down = loss_at(&probe, x)?;
            probe.weights[l][[r, c]] = orig;
            max_err = max_err.max(rel(grads.dw[l][[r, c]], (up - down) / (2.0 * h)));
        }
        for j in 0..net.biases[l].len() {
            let orig = probe.biases[l][j];
            probe.biases[l][j] = orig + h;
            let up = loss_at(&probe, x)?;
            probe.biases[l][j] = orig - h;
            let down = loss_at(&probe, x)?;
            probe.biases[l][j] = orig;
            max_err = max_err.max(rel(grads.db[l][j], (up - down) / (2.0 * h)));
        }
    }

    let mut xp = x.to_owned();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + h;
        let up = loss_at(net, &xp)?;
        xp[[r, c]] = orig - h;
        let down = loss_at(net, &xp)?;
        xp[[r, c]] = orig;
        max_err = max_err.max(rel(dl_dx[[r, c]], (up - down) / (2.0 * h)));
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn activation_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        // Independent erf evaluation: GELU(1) = Phi(1)
        assert!((gelu(1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((gelu(-0.5) - -0.15426876936299347).abs() < 1e-12);
        assert!((gelu(2.3) - 2.2753345469501456).abs() < 1e-12);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = MlpSpec::with_hidden(4, &[8], 3, Activation::Linear).unwrap();
        let a = mlp_init(&spec, 9);
        let b = mlp_init(&spec, 9);
        let c = mlp_init(&spec, 10);
        assert_eq!(a.weights[0], b.weights[0]);
        assert_ne!(a.weights[0], c.weights[0]);
        for (l, w) in a.weights.iter().enumerate() {
            let bound = 1.0 / (spec.widths[l] as f64).sqrt();
            assert!(w.iter().all(|&x| x.abs() <= bound));
        }
        assert!(a.biases.iter().all(|b| b.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn zero_width_layer_is_a_spec_error() {
        assert!(MlpSpec::new(vec![3, 0, 2], vec![Activation::Gelu, Activation::Linear]).is_err());
    }

    #[test]
    fn identity_linear_layer_is_identity() {
        let spec = MlpSpec::new(vec![3, 3], vec![Activation::Linear]).unwrap();
        let mut net = mlp_init(&spec, 0);
        net.weights[0] = Array2::eye(3);
        let x = array![[1.0, -2.0, 0.5], [0.0, 3.0, -1.0]];
        let y = net.predict(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn single_linear_layer_input_gradient_is_w_transpose() {
        let spec = MlpSpec::new(vec![2, 2], vec![Activation::Linear]).unwrap();
        let mut net = mlp_init(&spec, 1);
        net.weights[0] = array![[1.0, 2.0], [3.0, 4.0]];
        let x = array![[1.0, 1.0]];
        let (_, cache) = net.forward(&x).unwrap();
        let dl_dy = array![[1.0, 0.0]];
        let (_, dl_dx) = net.backward(&cache, &dl_dy).unwrap();
        // dL/dx = dl_dy . W^T = first column of W
        assert_eq!(dl_dx, array![[1.0, 3.0]]);
    }

    #[test]
    fn zero_upstream_gradient_zeroes_everything() {
        let spec = MlpSpec::with_hidden(3, &[5], 2, Activation::Sigmoid).unwrap();
        let net = mlp_init(&spec, 3);
        let x = array![[0.1, -0.2, 0.4]];
        let (_, cache) = net.forward(&x).unwrap();
        let (g, dx) = net.backward(&cache, &Array2::zeros((1, 2))).unwrap();
        assert!(g.dw.iter().all(|w| w.iter().all(|&v| v == 0.0)));
        assert!(g.db.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_hand_case() {
        let pred = array![[1.0, 2.0]];
        let target = array![[0.0, 0.0]];
        let (loss, grad) = mse_loss(&pred, &target).unwrap();
        assert!((loss - 2.5).abs() < 1e-15);
        assert_eq!(grad, array![[1.0, 2.0]]);
        assert_eq!(mse_loss(&pred, &pred).unwrap().0, 0.0);
    }

    #[test]
    fn gradient_check_linear_net_is_exact() {
        let spec = MlpSpec::with_hidden(3, &[4], 2, Activation::Linear).unwrap();
        let mut net = mlp_init(&spec, 5);
        net.spec.activations[0] = Activation::Linear;
        let x = array![[0.3, -0.1, 0.8], [-0.4, 0.2, 0.1]];
        let t = array![[0.1, 0.2], [-0.3, 0.5]];
        let err = gradient_check(&net, &x, &t, 1e-5).unwrap();
        assert!(err <= 1e-9, "max rel error {err}");
    }

    #[test]
    fn gradient_check_gelu_and_sigmoid_nets() {
        for (seed, acts) in [
            (11, vec![Activation::Gelu, Activation::Gelu, Activation::Linear]),
            (12, vec![Activation::Sigmoid, Activation::Sigmoid, Activation::Sigmoid]),
            (13, vec![Activation::Gelu, Activation::Sigmoid, Activation::Linear]),
        ] {
            let spec = MlpSpec::new(vec![4, 7, 6, 3], acts).unwrap();
            let net = mlp_init(&spec, seed);
            let x = Array2::from_shape_fn((3, 4), |(i, j)| ((i * 5 + j * 3) as f64 / 7.0) - 0.8);
            let t = Array2::from_shape_fn((3, 3), |(i, j)| ((i + j) as f64 / 3.0) - 0.5);
            let err = gradient_check(&net, &x, &t, 1e-5).unwrap();
            assert!(err <= 1e-5, "seed {seed}: max rel error {err}");
        }
    }

    #[test]
    fn split_and_concat_roundtrip() {
        let spec = MlpSpec::new(
            vec![5, 8, 3, 6, 2],
            vec![Activation::Gelu, Activation::Linear, Activation::Gelu, Activation::Sigmoid],
        )
        .unwrap();
        let net = mlp_init(&spec, 77);
        let x = Array2::from_shape_fn((2, 5), |(i, j)| (i as f64 - j as f64) / 5.0);
        let direct = net.predict(&x).unwrap();
        let (head, tail) = net.split_at(2).unwrap();
        let staged = tail.predict(&head.predict(&x).unwrap()).unwrap();
        for (a, b) in direct.iter().zip(staged.iter()) {
            assert_eq!(a, b);
        }
        let glued = head.concat(&tail).unwrap();
        assert_eq!(glued.checksum(), net.checksum());
    }

    #[test]
    fn layer_persistence_roundtrip() {
        let spec = MlpSpec::with_hidden(3, &[5, 4], 2, Activation::Sigmoid).unwrap();
        let net = mlp_init(&spec, 123);
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = Manifest::new();
        net.save_layers(dir.path(), "net", &mut manifest).unwrap();
        manifest.save(&dir.path().join("manifest.txt")).unwrap();
        let back_manifest = Manifest::load(&dir.path().join("manifest.txt")).unwrap();
        let back = MlpNetwork::load_layers(dir.path(), "net", &back_manifest).unwrap();
        assert_eq!(back.checksum(), net.checksum());
    }

    #[test]
    fn width_mismatch_is_a_shape_error() {
        let spec = MlpSpec::with_hidden(3, &[4], 2, Activation::Linear).unwrap();
        let net = mlp_init(&spec, 1);
        assert!(net.predict(&Array2::zeros((1, 5))).is_err());
    }
}
