//! Direct feedback alignment training.
//!
//! Inference is digital. The output error `e` is sent straight to every
//! hidden layer through a fixed random matrix `B⁽ᵏ⁾`, giving
//! `δ⁽ᵏ⁾ = (B⁽ᵏ⁾ e) ⊙ g'(a⁽ᵏ⁾)`. That gated product is the only
//! matrix-vector work in the backward pass and is delegated to an
//! [`MvmExecutor`], which is where the photonic weight bank plugs in.
//! Hidden layers do not depend on each other, so each δ⁽ᵏ⁾ is computed
//! from `(B⁽ᵏ⁾, e, a⁽ᵏ⁾)` alone.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ConfusionMatrix, Dataset};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, argmax, gemm_nt, gemm_tn_acc, Matrix, Reduction};
use crate::rng::{derive_seed, seeded_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Logistic,
}

impl Activation {
    pub fn apply_in_place(self, a: &mut [f64]) {
        match self {
            Activation::Relu => a.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Logistic => a.iter_mut().for_each(|v| *v = linalg::sigmoid(*v)),
        }
    }

    pub fn apply(self, a: &[f64]) -> Vec<f64> {
        let mut out = a.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn derivative(self, a: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => linalg::relu_prime(a),
            Activation::Logistic => a
                .iter()
                .map(|&v| {
                    let s = linalg::sigmoid(v);
                    s * (1.0 - s)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    /// ReLU hidden layers followed by a logistic output layer.
    pub fn chain(sizes: &[usize]) -> Result<Vec<LayerSpec>> {
        if sizes.len() < 2 {
            return Err(Error::Invalid(format!("need at least input and output sizes, got {sizes:?}")));
        }
        if sizes.contains(&0) {
            return Err(Error::Invalid(format!("layer sizes must be >= 1, got {sizes:?}")));
        }
        let last = sizes.len() - 2;
        Ok(sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| LayerSpec {
                input_dim: w[0],
                output_dim: w[1],
                activation: if k == last { Activation::Logistic } else { Activation::Relu },
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            input_dim: self.weights.cols(),
            output_dim: self.weights.rows(),
            activation: self.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("network needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            check_len("layer biases", layer.weights.rows(), layer.biases.len())?;
            if k > 0 {
                check_len("layer chaining", layers[k - 1].weights.rows(), layer.weights.cols())?;
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let layers = specs
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut rng = seeded_rng(derive_seed(seed, &[streams::INIT, k as u64]));
                let limit = (6.0 / (s.input_dim + s.output_dim) as f64).sqrt();
                Layer {
                    weights: Matrix::from_fn(s.output_dim, s.input_dim, |_, _| rng.random_range(-limit..=limit)),
                    biases: vec![0.0; s.output_dim],
                    activation: s.activation,
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.rows()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }
}

/// Everything inference produced for one example: `h⁽⁰⁾ = x`, and per layer
/// the pre-activation `a⁽ᵏ⁾` and activation `h⁽ᵏ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// `h⁽ᵏ⁾`, with `k = 0` the input.
    pub fn h(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.input
        } else {
            &self.post[k - 1]
        }
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().expect("trace has at least one layer")
    }
}

pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
    check_len("forward input", params.input_dim(), x.len())?;
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let h = post.last().map_or(x, Vec::as_slice);
        let mut a = linalg::matvec(&layer.weights, h)?;
        a.iter_mut().zip(&layer.biases).for_each(|(v, b)| *v += b);
        post.push(layer.activation.apply(&a));
        pre.push(a);
    }
    let yhat = post.last().cloned().unwrap_or_default();
    Ok((yhat, ForwardTrace { input: x.to_vec(), pre, post }))
}

/// Forward pass over `m` examples stored row-major; each layer is one
/// matrix product.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace {
    m: usize,
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    dims: Vec<usize>,
}

impl BatchTrace {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// `h⁽ᵏ⁾` for the whole batch as an `m × dim` block.
    pub fn h(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.input
        } else {
            &self.post[k - 1]
        }
    }

    pub fn pre_row(&self, layer: usize, i: usize) -> &[f64] {
        let d = self.dims[layer + 1];
        &self.pre[layer][i * d..(i + 1) * d]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        let d = *self.dims.last().expect("dims");
        let last = self.post.last().expect("layers");
        &last[i * d..(i + 1) * d]
    }

    pub fn example(&self, i: usize) -> ForwardTrace {
        let slice = |buf: &[f64], d: usize| buf[i * d..(i + 1) * d].to_vec();
        ForwardTrace {
            input: slice(&self.input, self.dims[0]),
            pre: self.pre.iter().zip(&self.dims[1..]).map(|(b, &d)| slice(b, d)).collect(),
            post: self.post.iter().zip(&self.dims[1..]).map(|(b, &d)| slice(b, d)).collect(),
        }
    }

    pub fn from_examples(traces: &[ForwardTrace]) -> Result<Self> {
        let first = traces.first().ok_or(Error::EmptyDataset)?;
        let mut dims = vec![first.input.len()];
        dims.extend(first.pre.iter().map(Vec::len));
        let cat = |f: &dyn Fn(&ForwardTrace) -> &[f64], d: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(traces.len() * d);
            for t in traces {
                let row = f(t);
                check_len("batch trace row", d, row.len())?;
                out.extend_from_slice(row);
            }
            Ok(out)
        };
        let input = cat(&|t| &t.input, dims[0])?;
        let mut pre = Vec::new();
        let mut post = Vec::new();
        for k in 0..first.pre.len() {
            pre.push(cat(&|t| &t.pre[k], dims[k + 1])?);
            post.push(cat(&|t| &t.post[k], dims[k + 1])?);
        }
        Ok(Self { m: traces.len(), input, pre, post, dims })
    }
}

pub fn forward_batch(params: &NetworkParams, xs: &[f64], m: usize) -> Result<BatchTrace> {
    check_len("forward_batch input", m * params.input_dim(), xs.len())?;
    let mut dims = vec![params.input_dim()];
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (out_dim, in_dim) = layer.weights.shape();
        let h = post.last().map_or(xs, Vec::as_slice);
        let mut a = vec![0.0; m * out_dim];
        gemm_nt(m, in_dim, out_dim, h, layer.weights.as_slice(), 0.0, &mut a);
        for row in a.chunks_exact_mut(out_dim) {
            row.iter_mut().zip(&layer.biases).for_each(|(v, b)| *v += b);
        }
        let mut h_next = a.clone();
        layer.activation.apply_in_place(&mut h_next);
        pre.push(a);
        post.push(h_next);
        dims.push(out_dim);
    }
    Ok(BatchTrace { m, input: xs.to_vec(), pre, post, dims })
}

/// `e = ∇_{a⁽ˡ⁾} J` for the binary cross-entropy cost. Logistic outputs use
/// the collapsed `ŷ − y` form; any other output activation evaluates
/// `∇_ŷ J ⊙ g'(a⁽ˡ⁾)` explicitly.
pub fn output_error(
    yhat: &[f64],
    y: &[f64],
    a_out: &[f64],
    activation: Activation,
    reduction: Reduction,
) -> Result<Vec<f64>> {
    check_len("output_error", yhat.len(), a_out.len())?;
    match activation {
        Activation::Logistic => linalg::bce_output_error(yhat, y, reduction),
        Activation::Relu => {
            let grad = linalg::bce_prediction_gradient(yhat, y, reduction)?;
            linalg::hadamard(&grad, &activation.derivative(a_out))
        }
    }
}

/// Result of one gated matrix-vector product `(B·e) ⊙ gains`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GatedProduct {
    pub values: Vec<f64>,
    /// Operational cycles the executor needed.
    pub cycles: u64,
    /// Readout elements that clipped at the converter range.
    pub saturated: u64,
}

/// Executes the backward-pass product `(B·e) ⊙ gains`.
///
/// `stream` identifies the call (epoch, example, layer) so that stochastic
/// executors can draw independent, reproducible noise regardless of the
/// order in which calls are scheduled.
pub trait MvmExecutor: Sync {
    fn gated_mvm(&self, matrix: &Matrix, input: &[f64], gains: &[f64], stream: u64) -> Result<GatedProduct>;

    fn name(&self) -> &str;
}

/// Exact double-precision reference executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigitalExecutor;

impl MvmExecutor for DigitalExecutor {
    fn gated_mvm(&self, matrix: &Matrix, input: &[f64], gains: &[f64], _stream: u64) -> Result<GatedProduct> {
        let values = linalg::hadamard(&linalg::matvec(matrix, input)?, gains)?;
        Ok(GatedProduct { values, cycles: 1, saturated: 0 })
    }

    fn name(&self) -> &str {
        "digital"
    }
}

/// `δ⁽ᵏ⁾ = (B⁽ᵏ⁾ e) ⊙ g'(a⁽ᵏ⁾)` through the given executor.
pub fn hidden_gradient(
    feedback: &Matrix,
    e: &[f64],
    a_k: &[f64],
    activation: Activation,
    mvm: &dyn MvmExecutor,
    stream: u64,
) -> Result<GatedProduct> {
    check_len("feedback columns", feedback.cols(), e.len())?;
    check_len("feedback rows", feedback.rows(), a_k.len())?;
    mvm.gated_mvm(feedback, e, &activation.derivative(a_k), stream)
}

/// The fixed random matrices `B⁽ᵏ⁾`, one per hidden layer, each
/// `hidden_dim × output_dim`. Never modified by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMatrices {
    pub matrices: Vec<Matrix>,
    pub seed: u64,
    /// Entries are drawn uniformly from `[−scale, scale]`.
    pub scale: f64,
}

impl FeedbackMatrices {
    pub fn generate(specs: &[LayerSpec], seed: u64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Invalid(format!("feedback scale must be positive, got {scale}")));
        }
        let out_dim = specs.last().ok_or(Error::Invalid("no layers".into()))?.output_dim;
        let matrices = specs[..specs.len() - 1]
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut rng = seeded_rng(derive_seed(seed, &[streams::FEEDBACK, k as u64]));
                Matrix::from_fn(s.output_dim, out_dim, |_, _| scale * rng.random_range(-1.0..=1.0))
            })
            .collect();
        Ok(Self { matrices, seed, scale })
    }

    pub fn check_against(&self, params: &NetworkParams) -> Result<()> {
        let layers = params.layers();
        check_len("feedback matrix count", layers.len() - 1, self.matrices.len())?;
        for (b, layer) in self.matrices.iter().zip(layers) {
            check_len("feedback rows", layer.weights.rows(), b.rows())?;
            check_len("feedback columns", params.output_dim(), b.cols())?;
        }
        Ok(())
    }
}

/// Averaged SGD step: `b ← b − (α/m)·Σδ`, `W ← W − (α/m)·Σ δ h⁽ᵏ⁻¹⁾ᵀ`.
///
/// `deltas[k]` holds `δ⁽ᵏ⁾` for every example as an `m × dim` block; the
/// last entry is the output error `e`.
pub fn apply_updates(params: &mut NetworkParams, trace: &BatchTrace, deltas: &[Vec<f64>], lr: f64) -> Result<()> {
    let m = trace.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    check_len("delta layers", params.layers.len(), deltas.len())?;
    for (k, (layer, delta)) in params.layers.iter().zip(deltas).enumerate() {
        let (out_dim, in_dim) = layer.weights.shape();
        check_len("delta block", m * out_dim, delta.len())?;
        check_len("trace block", m * in_dim, trace.h(k).len())?;
    }
    let step = lr / m as f64;
    for (k, (layer, delta)) in params.layers.iter_mut().zip(deltas).enumerate() {
        let (out_dim, in_dim) = layer.weights.shape();
        gemm_tn_acc(out_dim, m, in_dim, -step, delta, trace.h(k), layer.weights.as_mut_slice());
        let mut sum = vec![0.0; out_dim];
        for row in delta.chunks_exact(out_dim) {
            sum.iter_mut().zip(row).for_each(|(s, d)| *s += d);
        }
        layer.biases.iter_mut().zip(&sum).for_each(|(b, s)| *b -= step * s);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub reduction: Reduction,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.003,
            batch_size: 64,
            epochs: 10,
            seed: 0,
            reduction: Reduction::Sum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("minibatch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HardwareCounters {
    pub mvm_calls: u64,
    pub cycles: u64,
    pub saturated: u64,
}

impl HardwareCounters {
    fn add(&mut self, p: &GatedProduct) {
        self.mvm_calls += 1;
        self.cycles += p.cycles;
        self.saturated += p.saturated;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-example cost over the epoch, measured before each update.
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// Noise stream key for one backward product.
pub fn stream_key(epoch: usize, position: usize, layer: usize) -> u64 {
    derive_seed(epoch as u64, &[position as u64, layer as u64])
}

/// Owns the parameters for the duration of a run and applies minibatch
/// updates one at a time.
#[derive(Debug, Clone)]
pub struct Trainer {
    params: NetworkParams,
    feedback: FeedbackMatrices,
    config: TrainConfig,
    epochs_completed: usize,
    counters: HardwareCounters,
}

impl Trainer {
    pub fn new(params: NetworkParams, feedback: FeedbackMatrices, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        feedback.check_against(&params)?;
        Ok(Self {
            params,
            feedback,
            config,
            epochs_completed: 0,
            counters: HardwareCounters::default(),
        })
    }

    /// Resumes from saved state.
    pub fn resume(
        params: NetworkParams,
        feedback: FeedbackMatrices,
        config: TrainConfig,
        epochs_completed: usize,
    ) -> Result<Self> {
        let mut t = Self::new(params, feedback, config)?;
        t.epochs_completed = epochs_completed;
        Ok(t)
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn feedback(&self) -> &FeedbackMatrices {
        &self.feedback
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    pub fn counters(&self) -> HardwareCounters {
        self.counters
    }

    pub fn into_params(self) -> NetworkParams {
        self.params
    }

    /// Visiting order for `epoch`, reshuffled from the run seed.
    pub fn epoch_order(&self, epoch: usize, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = seeded_rng(derive_seed(self.config.seed, &[streams::SHUFFLE, epoch as u64]));
        order.shuffle(&mut rng);
        order
    }

    /// One pass over `data` in shuffled minibatches.
    pub fn run_epoch(&mut self, data: &Dataset, mvm: &dyn MvmExecutor) -> Result<EpochMetrics> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len("dataset dim", self.params.input_dim(), data.dim())?;
        check_len("dataset classes", self.params.output_dim(), data.num_classes())?;
        let epoch = self.epochs_completed;
        let order = self.epoch_order(epoch, data.len());
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let first = b * self.config.batch_size;
            let (l, c) = self.step(data, batch, epoch, first, mvm)?;
            loss += l;
            correct += c;
        }
        self.epochs_completed += 1;
        Ok(EpochMetrics {
            epoch: self.epochs_completed,
            loss: loss / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
            test_accuracy: None,
        })
    }

    /// Forward, output error, per-layer feedback gradients and update for
    /// one minibatch. Returns the summed loss and the number of correct
    /// predictions made before the update.
    pub fn step(
        &mut self,
        data: &Dataset,
        batch: &[usize],
        epoch: usize,
        first_position: usize,
        mvm: &dyn MvmExecutor,
    ) -> Result<(f64, usize)> {
        let m = batch.len();
        let dim = data.dim();
        let mut xs = Vec::with_capacity(m * dim);
        for &i in batch {
            xs.extend_from_slice(data.image(i));
        }
        let trace = forward_batch(&self.params, &xs, m)?;
        let out_act = self.params.output_activation();
        let reduction = self.config.reduction;
        let layers = self.params.layers();
        let hidden = layers.len() - 1;

        let per_example: Vec<(f64, bool, Vec<f64>, Vec<GatedProduct>)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, &idx)| {
                let y = data.one_hot(idx);
                let yhat = trace.output_row(i);
                let loss = linalg::bce_loss(yhat, &y, reduction)?;
                let hit = argmax(yhat) == data.label(idx);
                let e = output_error(yhat, &y, trace.pre_row(hidden, i), out_act, reduction)?;
                let deltas = (0..hidden)
                    .map(|k| {
                        hidden_gradient(
                            &self.feedback.matrices[k],
                            &e,
                            trace.pre_row(k, i),
                            layers[k].activation,
                            mvm,
                            stream_key(epoch, first_position + i, k),
                        )
                        .map_err(|source| Error::Backend { layer: k, source: Box::new(source) })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((loss, hit, e, deltas))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut deltas: Vec<Vec<f64>> = layers.iter().map(|l| Vec::with_capacity(m * l.weights.rows())).collect();
        let mut loss = 0.0;
        let mut correct = 0;
        for (l, hit, e, hidden_deltas) in &per_example {
            loss += l;
            correct += usize::from(*hit);
            for (k, d) in hidden_deltas.iter().enumerate() {
                self.counters.add(d);
                deltas[k].extend_from_slice(&d.values);
            }
            deltas[hidden].extend_from_slice(e);
        }
        apply_updates(&mut self.params, &trace, &deltas, self.config.learning_rate)?;
        Ok((loss, correct))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub loss: f64,
}

/// Classifies every example by the argmax of the network output.
pub fn evaluate(params: &NetworkParams, data: &Dataset, reduction: Reduction) -> Result<Evaluation> {
    check_len("dataset dim", params.input_dim(), data.dim())?;
    check_len("dataset classes", params.output_dim(), data.num_classes())?;
    const CHUNK: usize = 500;
    let mut confusion = ConfusionMatrix::new(data.num_classes());
    let mut loss = 0.0;
    let mut start = 0;
    while start < data.len() {
        let m = CHUNK.min(data.len() - start);
        let xs = &data.features()[start * data.dim()..(start + m) * data.dim()];
        let trace = forward_batch(params, xs, m)?;
        for i in 0..m {
            let yhat = trace.output_row(i);
            loss += linalg::bce_loss(yhat, &data.one_hot(start + i), reduction)?;
            confusion.record(data.label(start + i), argmax(yhat));
        }
        start += m;
    }
    Ok(Evaluation {
        confusion,
        loss: if data.is_empty() { 0.0 } else { loss / data.len() as f64 },
    })
}

pub fn confusion(params: &NetworkParams, data: &Dataset) -> Result<ConfusionMatrix> {
    Ok(evaluate(params, data, Reduction::Sum)?.confusion)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub metrics: Vec<EpochMetrics>,
    pub counters: HardwareCounters,
}

/// Runs `config.epochs` epochs, scoring `test` after each one when given.
pub fn train(
    params: NetworkParams,
    feedback: &FeedbackMatrices,
    data: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    mvm: &dyn MvmExecutor,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut trainer = Trainer::new(params, feedback.clone(), *config)?;
    let mut metrics = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut m = trainer.run_epoch(data, mvm)?;
        if let Some(t) = test {
            m.test_accuracy = Some(evaluate(trainer.params(), t, config.reduction)?.confusion.accuracy());
        }
        metrics.push(m);
    }
    let counters = trainer.counters();
    Ok(TrainOutcome { params: trainer.into_params(), metrics, counters })
}
