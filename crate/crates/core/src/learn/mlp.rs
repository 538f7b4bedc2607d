//! Dense feed-forward network trained with Adam on mean absolute error.
//!
//! Hidden layers are rectified-linear, the output layer is identity, and
//! every feature passes through a stored per-feature affine normalization
//! fitted on the training split. Training is single-threaded and fully
//! deterministic for a given seed.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Schema tag of the persisted model format.
pub const MODEL_SCHEMA: &str = "clothoid-arm-mlp/1";

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Affine per-feature map: `normalized = (x - offset) / scale`. Min-max
/// fitting sends the training range to [0, 1]; a zero-width range falls
/// back to unit scale so the map stays invertible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub offset: f64,
    pub scale: f64,
}

impl FeatureScale {
    pub fn identity() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            Self {
                offset: if lo.is_finite() { lo } else { 0.0 },
                scale: 1.0,
            }
        } else {
            Self {
                offset: lo,
                scale: hi - lo,
            }
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * self.scale + self.offset
    }
}

/// What a trained model maps between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    /// (pressure, payload) -> shape representation
    Forward,
    /// (shape representation, pressure) -> payload
    Inverse,
}

/// Multilayer perceptron with stored normalization and role metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    /// Per layer, `out x in`.
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    input_norm: Vec<FeatureScale>,
    output_norm: Vec<FeatureScale>,
    role: Option<ModelRole>,
    order: usize,
    seed: u64,
    /// Arc length (m) used to assemble predicted shapes; forward role only.
    shape_length: Option<f64>,
}

impl MlpModel {
    /// He-uniform initialization: weights uniform in +-sqrt(6/fan_in),
    /// biases zero. Deterministic for a given seed.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid_config(
                "a network needs at least input and output layers",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid_config("layer widths must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut w = DMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    w[(r, c)] = (2.0 * rng.random::<f64>() - 1.0) * bound;
                }
            }
            weights.push(w);
            biases.push(DVector::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            input_norm: vec![FeatureScale::identity(); layer_sizes[0]],
            output_norm: vec![FeatureScale::identity(); *layer_sizes.last().unwrap()],
            role: None,
            order: 0,
            seed,
            shape_length: None,
        })
    }

    /// Attach role metadata; done by the training pipelines.
    pub fn set_role(&mut self, role: ModelRole, order: usize, shape_length: Option<f64>) {
        self.role = Some(role);
        self.order = order;
        self.shape_length = shape_length;
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn role(&self) -> Option<ModelRole> {
        self.role
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shape_length(&self) -> Option<f64> {
        self.shape_length
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn input_norm(&self) -> &[FeatureScale] {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &[FeatureScale] {
        &self.output_norm
    }

    /// Total number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flatten all parameters: per layer, weights row-major then the bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter().copied());
        }
        out
    }

    /// Overwrite all parameters from the `parameters()` layout.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Data(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    w[(r, c)] = *it.next().expect("length checked");
                }
            }
            for v in b.iter_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Fit min-max normalization for inputs and targets; call with the
    /// training split only, before `train`.
    pub fn fit_normalization(&mut self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) {
        for (j, norm) in self.input_norm.iter_mut().enumerate() {
            *norm = FeatureScale::fit(inputs.iter().map(|row| row[j]));
        }
        for (j, norm) in self.output_norm.iter_mut().enumerate() {
            *norm = FeatureScale::fit(targets.iter().map(|row| row[j]));
        }
    }

    /// Whether every input coordinate lies inside the normalization fit
    /// range (the training envelope).
    pub fn within_envelope(&self, input: &[f64]) -> bool {
        input
            .iter()
            .zip(&self.input_norm)
            .all(|(&x, n)| (0.0..=1.0).contains(&n.normalize(x)))
    }

    fn forward_normalized(&self, x: &DVector<f64>) -> DVector<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = w * a + b;
            if l != last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        a
    }

    /// Normalize the input, run the network, de-normalize the output.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(Error::Data(format!(
                "expected {} input features, got {}",
                self.input_width(),
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("input features must be finite".into()));
        }
        let x = DVector::from_iterator(
            input.len(),
            input
                .iter()
                .zip(&self.input_norm)
                .map(|(&v, n)| n.normalize(v)),
        );
        let y = self.forward_normalized(&x);
        Ok(y.iter()
            .zip(&self.output_norm)
            .map(|(&v, n)| n.denormalize(v))
            .collect())
    }

    /// Forward pass keeping pre-activations and activations for backprop.
    fn forward_trace(&self, x: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let last = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut act = Vec::with_capacity(self.weights.len() + 1);
        act.push(x.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * act.last().unwrap() + b;
            let a = if l == last {
                z.clone()
            } else {
                z.map(|v| v.max(0.0))
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }
}

/// Training controls; defaults follow the reference recipe (200 epochs,
/// Adam at 1e-3 with inverse-time decay 5e-6 per step, MAE loss).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Inverse-time decay: `lr_t = lr / (1 + decay * t)` per optimizer step.
    pub decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            decay: 5e-6,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid_config(
                "epochs and batch size must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid_config("learning rate must be positive"));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid_config("decay must be nonnegative"));
        }
        Ok(())
    }
}

struct AdamState {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
    step: u64,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        Self {
            m_w: model
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            v_w: model
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            m_b: model
                .biases
                .iter()
                .map(|b| DVector::zeros(b.nrows()))
                .collect(),
            v_b: model
                .biases
                .iter()
                .map(|b| DVector::zeros(b.nrows()))
                .collect(),
            step: 0,
        }
    }

    fn apply(
        &mut self,
        model: &mut MlpModel,
        grad_w: &[DMatrix<f64>],
        grad_b: &[DVector<f64>],
        base_lr: f64,
        decay: f64,
    ) {
        self.step += 1;
        let t = self.step as f64;
        let lr = base_lr / (1.0 + decay * t);
        let bias1 = 1.0 - ADAM_BETA1.powf(t);
        let bias2 = 1.0 - ADAM_BETA2.powf(t);
        for l in 0..model.weights.len() {
            adam_update(
                model.weights[l].as_mut_slice(),
                self.m_w[l].as_mut_slice(),
                self.v_w[l].as_mut_slice(),
                grad_w[l].as_slice(),
                lr,
                bias1,
                bias2,
            );
            adam_update(
                model.biases[l].as_mut_slice(),
                self.m_b[l].as_mut_slice(),
                self.v_b[l].as_mut_slice(),
                grad_b[l].as_slice(),
                lr,
                bias1,
                bias2,
            );
        }
    }
}

fn adam_update(
    params: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad: &[f64],
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grad[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

fn subgradient_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients of the batch-mean MAE loss with respect to all weights and
/// biases, plus the batch loss itself. Exposed within the crate for the
/// finite-difference checks.
pub(crate) fn mae_batch_gradients(
    model: &MlpModel,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
) -> (Vec<DMatrix<f64>>, Vec<DVector<f64>>, f64) {
    let layers = model.weights.len();
    let mut grad_w: Vec<DMatrix<f64>> = model
        .weights
        .iter()
        .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
        .collect();
    let mut grad_b: Vec<DVector<f64>> = model
        .biases
        .iter()
        .map(|b| DVector::zeros(b.nrows()))
        .collect();
    let out_dim = model.output_width();
    let denom = (inputs.len() * out_dim) as f64;
    let mut loss = 0.0;

    for (x, y) in inputs.iter().zip(targets) {
        let (pre, act) = model.forward_trace(x);
        let prediction = act.last().unwrap();
        let mut delta = DVector::zeros(out_dim);
        for j in 0..out_dim {
            let err = prediction[j] - y[j];
            loss += err.abs() / denom;
            delta[j] = subgradient_sign(err) / denom;
        }
        for l in (0..layers).rev() {
            grad_b[l] += &delta;
            grad_w[l] += &delta * act[l].transpose();
            if l > 0 {
                let mut upstream = model.weights[l].transpose() * delta;
                for (u, z) in upstream.iter_mut().zip(pre[l - 1].iter()) {
                    if *z <= 0.0 {
                        *u = 0.0;
                    }
                }
                delta = upstream;
            }
        }
    }
    (grad_w, grad_b, loss)
}

/// Mean-absolute-error loss of the network (normalization not applied) and
/// its gradient in the `parameters()` layout; the verification hook for
/// finite-difference checks.
pub fn mae_loss_and_gradient(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Data("need matching non-empty inputs/targets".into()));
    }
    let xs: Vec<DVector<f64>> = inputs
        .iter()
        .map(|r| DVector::from_column_slice(r))
        .collect();
    let ys: Vec<DVector<f64>> = targets
        .iter()
        .map(|r| DVector::from_column_slice(r))
        .collect();
    let (grad_w, grad_b, loss) = mae_batch_gradients(model, &xs, &ys);
    let mut flat = Vec::with_capacity(model.parameter_count());
    for (w, b) in grad_w.iter().zip(&grad_b) {
        for r in 0..w.nrows() {
            for c in 0..w.ncols() {
                flat.push(w[(r, c)]);
            }
        }
        flat.extend(b.iter().copied());
    }
    Ok((loss, flat))
}

/// Train in place on raw (un-normalized) rows: fits the normalization from
/// this data, then runs seeded mini-batch Adam on the MAE loss. Returns the
/// per-epoch mean training loss (in normalized units).
pub fn train(
    model: &mut MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    hyper: &Hyperparams,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Data(format!(
            "need matching non-empty inputs/targets, got {}/{}",
            inputs.len(),
            targets.len()
        )));
    }
    for (row, width, what) in [
        (inputs, model.input_width(), "input"),
        (targets, model.output_width(), "target"),
    ] {
        for r in row {
            if r.len() != width {
                return Err(Error::Data(format!(
                    "{what} rows must have width {width}, got {}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("{what} rows must be finite")));
            }
        }
    }

    model.fit_normalization(inputs, targets);
    let xs: Vec<DVector<f64>> = inputs
        .iter()
        .map(|row| {
            DVector::from_iterator(
                row.len(),
                row.iter()
                    .zip(&model.input_norm)
                    .map(|(&v, n)| n.normalize(v)),
            )
        })
        .collect();
    let ys: Vec<DVector<f64>> = targets
        .iter()
        .map(|row| {
            DVector::from_iterator(
                row.len(),
                row.iter()
                    .zip(&model.output_norm)
                    .map(|(&v, n)| n.normalize(v)),
            )
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut adam = AdamState::new(model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        // Seeded Fisher-Yates, one pass per epoch.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let bx: Vec<DVector<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<DVector<f64>> = batch.iter().map(|&i| ys[i].clone()).collect();
            let (grad_w, grad_b, loss) = mae_batch_gradients(model, &bx, &by);
            epoch_loss += loss * batch.len() as f64;
            adam.apply(model, &grad_w, &grad_b, hyper.learning_rate, hyper.decay);
        }
        epoch_loss /= xs.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence(format!(
                "loss became non-finite at epoch {epoch}"
            )));
        }
        history.push(epoch_loss);
    }
    Ok(history)
}

#[derive(Serialize, Deserialize)]
struct NormFile {
    offset: Vec<f64>,
    scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    role: Option<ModelRole>,
    order: usize,
    seed: u64,
    shape_length_m: Option<f64>,
    layer_sizes: Vec<usize>,
    /// Row-major, one flat array per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    input_norm: NormFile,
    output_norm: NormFile,
}

/// Persist as versioned JSON (row-major weight arrays).
pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        schema: MODEL_SCHEMA.to_string(),
        role: model.role,
        order: model.order,
        seed: model.seed,
        shape_length_m: model.shape_length,
        layer_sizes: model.layer_sizes.clone(),
        weights: model
            .weights
            .iter()
            .map(|w| {
                let mut flat = Vec::with_capacity(w.len());
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        flat.push(w[(r, c)]);
                    }
                }
                flat
            })
            .collect(),
        biases: model.biases.iter().map(|b| b.as_slice().to_vec()).collect(),
        input_norm: NormFile {
            offset: model.input_norm.iter().map(|n| n.offset).collect(),
            scale: model.input_norm.iter().map(|n| n.scale).collect(),
        },
        output_norm: NormFile {
            offset: model.output_norm.iter().map(|n| n.offset).collect(),
            scale: model.output_norm.iter().map(|n| n.scale).collect(),
        },
    };
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, &file)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.schema != MODEL_SCHEMA {
        return Err(Error::SchemaVersionMismatch {
            expected: MODEL_SCHEMA.to_string(),
            found: file.schema,
        });
    }
    if file.layer_sizes.len() < 2
        || file.weights.len() != file.layer_sizes.len() - 1
        || file.biases.len() != file.weights.len()
    {
        return Err(Error::Data("model file has inconsistent layers".into()));
    }
    let mut weights = Vec::with_capacity(file.weights.len());
    let mut biases = Vec::with_capacity(file.biases.len());
    for (l, pair) in file.layer_sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        if file.weights[l].len() != fan_in * fan_out || file.biases[l].len() != fan_out {
            return Err(Error::Data(format!("layer {l} has wrong parameter counts")));
        }
        let mut w = DMatrix::zeros(fan_out, fan_in);
        for r in 0..fan_out {
            for c in 0..fan_in {
                w[(r, c)] = file.weights[l][r * fan_in + c];
            }
        }
        weights.push(w);
        biases.push(DVector::from_column_slice(&file.biases[l]));
    }
    let unpack_norm = |n: &NormFile, width: usize| -> Result<Vec<FeatureScale>> {
        if n.offset.len() != width || n.scale.len() != width {
            return Err(Error::Data("normalization width mismatch".into()));
        }
        if n.scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::Data("normalization scales must be nonzero".into()));
        }
        Ok(n.offset
            .iter()
            .zip(&n.scale)
            .map(|(&offset, &scale)| FeatureScale { offset, scale })
            .collect())
    };
    let input_norm = unpack_norm(&file.input_norm, file.layer_sizes[0])?;
    let output_norm = unpack_norm(&file.output_norm, *file.layer_sizes.last().unwrap())?;
    Ok(MlpModel {
        layer_sizes: file.layer_sizes,
        weights,
        biases,
        input_norm,
        output_norm,
        role: file.role,
        order: file.order,
        seed: file.seed,
        shape_length: file.shape_length_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn init_is_deterministic_for_a_seed() {
        let a = MlpModel::init(&[2, 64, 32, 16, 4], 7).unwrap();
        let b = MlpModel::init(&[2, 64, 32, 16, 4], 7).unwrap();
        assert_eq!(a, b);
        let c = MlpModel::init(&[2, 64, 32, 16, 4], 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn he_uniform_respects_fan_in_bound() {
        let model = MlpModel::init(&[2, 64, 1], 11).unwrap();
        let bound = (6.0_f64 / 2.0).sqrt(); // sqrt(3)
        for v in model.weights()[0].iter() {
            assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn he_uniform_empirical_variance() {
        let model = MlpModel::init(&[2, 64, 1], 3).unwrap();
        let w = &model.weights()[0];
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expected = 2.0 / 2.0; // 2 / fan_in
        assert!(
            (var - expected).abs() / expected < 0.3,
            "variance {var} vs {expected}"
        );
    }

    #[test]
    fn rejects_degenerate_layer_lists() {
        assert!(MlpModel::init(&[], 0).is_err());
        assert!(MlpModel::init(&[3], 0).is_err());
        assert!(MlpModel::init(&[3, 0, 1], 0).is_err());
    }

    #[test]
    fn backprop_matches_central_differences_on_toy_network() {
        // 5 parameters: [2,1,1] has a 1x2 weight, 1 bias, 1x1 weight, 1 bias.
        let mut model = MlpModel::init(&[2, 1, 1], 5).unwrap();
        // Nudge the hidden pre-activation away from the ReLU kink.
        model.biases[0][0] = 0.3;
        let inputs = vec![
            DVector::from_column_slice(&[0.8, -0.4]),
            DVector::from_column_slice(&[0.1, 0.9]),
            DVector::from_column_slice(&[-0.7, 0.2]),
        ];
        let targets = vec![
            DVector::from_column_slice(&[0.5]),
            DVector::from_column_slice(&[-0.3]),
            DVector::from_column_slice(&[0.9]),
        ];
        let (grad_w, grad_b, _) = mae_batch_gradients(&model, &inputs, &targets);

        let loss_of = |m: &MlpModel| {
            let (_, _, loss) = mae_batch_gradients(m, &inputs, &targets);
            loss
        };
        let h = 1e-6;
        for l in 0..2 {
            for idx in 0..model.weights[l].len() {
                let mut plus = model.clone();
                plus.weights[l].as_mut_slice()[idx] += h;
                let mut minus = model.clone();
                minus.weights[l].as_mut_slice()[idx] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let an = grad_w[l].as_slice()[idx];
                assert!(
                    (an - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                    "weight layer {l} idx {idx}: {an} vs {fd}"
                );
            }
            for (idx, &an) in grad_b[l].iter().enumerate() {
                let mut plus = model.clone();
                plus.biases[l][idx] += h;
                let mut minus = model.clone();
                minus.biases[l][idx] -= h;
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                assert!(
                    (an - fd).abs() / fd.abs().max(1e-8) < 1e-5,
                    "bias layer {l} idx {idx}: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn constant_dataset_trains_to_zero_loss() {
        let mut model = MlpModel::init(&[2, 8, 1], 1).unwrap();
        let inputs = vec![vec![3.0, 4.0]; 64];
        let targets = vec![vec![2.5]; 64];
        let history = train(&mut model, &inputs, &targets, &Hyperparams::default()).unwrap();
        assert_eq!(history.len(), 200);
        assert!(history.last().unwrap() < &1e-6);
        let out = model.predict(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(out[0], 2.5, epsilon = 1e-6);
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..64)
            .map(|i| {
                let x = i as f64 / 63.0;
                (vec![x, 1.0 - x], vec![(3.0 * x).sin()])
            })
            .collect();
        let inputs: Vec<_> = data.iter().map(|d| d.0.clone()).collect();
        let targets: Vec<_> = data.iter().map(|d| d.1.clone()).collect();
        let hyper = Hyperparams {
            epochs: 20,
            ..Hyperparams::default()
        };
        let mut a = MlpModel::init(&[2, 8, 4, 1], 9).unwrap();
        let ha = train(&mut a, &inputs, &targets, &hyper).unwrap();
        let mut b = MlpModel::init(&[2, 8, 4, 1], 9).unwrap();
        let hb = train(&mut b, &inputs, &targets, &hyper).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn training_rejects_nan_features() {
        let mut model = MlpModel::init(&[1, 2, 1], 0).unwrap();
        let err = train(
            &mut model,
            &[vec![f64::NAN]],
            &[vec![0.0]],
            &Hyperparams::default(),
        );
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn normalization_round_trips() {
        let scale = FeatureScale::fit([3.0, 9.0, 5.0].into_iter());
        for x in [3.0, 5.5, 9.0, 7.25] {
            assert_abs_diff_eq!(scale.denormalize(scale.normalize(x)), x, epsilon = 1e-12);
        }
        // Degenerate range keeps an invertible unit scale.
        let flat = FeatureScale::fit([4.0, 4.0].into_iter());
        assert_eq!(flat.scale, 1.0);
        assert_abs_diff_eq!(flat.denormalize(flat.normalize(4.0)), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn persistence_round_trips_bitwise() {
        let mut model = MlpModel::init(&[3, 8, 2], 21).unwrap();
        let inputs: Vec<Vec<f64>> = (0..32)
            .map(|i| vec![i as f64, (i * 2) as f64, 1.0 - i as f64 / 31.0])
            .collect();
        let targets: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64 * 0.1, 1.0]).collect();
        let hyper = Hyperparams {
            epochs: 5,
            ..Hyperparams::default()
        };
        train(&mut model, &inputs, &targets, &hyper).unwrap();
        model.set_role(ModelRole::Inverse, 2, None);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
        let query = [4.0, 8.0, 0.5];
        assert_eq!(
            model.predict(&query).unwrap(),
            loaded.predict(&query).unwrap()
        );
    }

    #[test]
    fn loading_rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"schema\":\"clothoid-arm-mlp/9\"}").unwrap();
        assert!(load_model(&path).is_err());
    }
}
