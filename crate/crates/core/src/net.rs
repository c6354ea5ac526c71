//! Fully-connected networks with hand-written backpropagation.
//!
//! All weights and biases live in one flat [`WeightVector`]. Layer `l` stores
//! its `out × in` weight matrix row-major, followed by `out` biases when the
//! spec has biases.
//!
//! Output units and losses:
//! * `BinaryCrossEntropy` / `CrossEntropy`: sigmoid outputs with element-wise
//!   cross entropy summed over outputs. With one output this is ordinary
//!   logistic loss; with one-hot targets it is the multi-label form.
//! * `SoftmaxCrossEntropy`: softmax outputs with categorical cross entropy.
//! * `Squared`: outputs pass through the hidden activation and the per-sample
//!   loss is `Σ_k (out_k − y_k)²` with no ½ factor.
//!
//! Cross-entropy losses are evaluated from the logits (softplus /
//! log-sum-exp), so saturated units give large but finite losses.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Deref, DerefMut};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};

/// Samples per work unit when a batch is split across threads. Fixed so the
/// reduction order, and therefore the result, does not depend on the pool.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    BinaryCrossEntropy,
    CrossEntropy,
    SoftmaxCrossEntropy,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Init {
    StandardNormal,
    Xavier,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal = $code:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
            pub(crate) fn code(self) -> u8 {
                match self { $($ty::$variant => $code),* }
            }
            pub(crate) fn from_code(c: u8) -> Option<Self> {
                match c { $($code => Some($ty::$variant),)* _ => None }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    other => Err(Error::Config(format!(concat!("unknown ", stringify!($ty), " {:?}"), other))),
                }
            }
        }
    };
}

str_enum!(Activation { Sigmoid => "sigmoid" = 0, Tanh => "tanh" = 1 });
str_enum!(Loss {
    BinaryCrossEntropy => "binary-cross-entropy" = 0,
    CrossEntropy => "cross-entropy" = 1,
    SoftmaxCrossEntropy => "softmax-cross-entropy" = 2,
    Squared => "squared" = 3,
});
str_enum!(Init { StandardNormal => "standard-normal" = 0, Xavier => "xavier" = 1 });

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eᶻ) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    layers: Vec<usize>,
    activation: Activation,
    loss: Loss,
    init: Init,
    bias: bool,
}

impl NetworkSpec {
    pub fn new(layers: Vec<usize>, activation: Activation, loss: Loss, init: Init, bias: bool) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {layers:?}")));
        }
        let out = *layers.last().unwrap();
        if loss == Loss::SoftmaxCrossEntropy && out < 2 {
            return Err(Error::Config("softmax needs at least two outputs".into()));
        }
        Ok(Self { layers, activation, loss, init, bias })
    }

    /// Zero hidden layers, one sigmoid output, logistic loss.
    pub fn logistic(inputs: usize) -> Self {
        Self::new(vec![inputs, 1], Activation::Sigmoid, Loss::BinaryCrossEntropy, Init::StandardNormal, true).unwrap()
    }

    /// Single sigmoid hidden layer with cross entropy; `hidden` is 800 at full width.
    pub fn shallow(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self::new(
            vec![inputs, hidden, outputs],
            Activation::Sigmoid,
            Loss::CrossEntropy,
            Init::StandardNormal,
            true,
        )
        .unwrap()
    }

    /// Three tanh hidden layers, squared loss, Xavier initialization;
    /// 1000-500-250 at full width.
    pub fn deep(inputs: usize, hidden: [usize; 3], outputs: usize) -> Self {
        Self::new(
            vec![inputs, hidden[0], hidden[1], hidden[2], outputs],
            Activation::Tanh,
            Loss::Squared,
            Init::Xavier,
            true,
        )
        .unwrap()
    }

    pub fn with_loss(mut self, loss: Loss) -> Result<Self> {
        self.loss = loss;
        Self::new(self.layers, self.activation, self.loss, self.init, self.bias)
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn init(&self) -> Init {
        self.init
    }

    pub fn bias(&self) -> bool {
        self.bias
    }

    pub fn inputs(&self) -> usize {
        self.layers[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layers.last().unwrap()
    }

    fn block(&self, l: usize) -> usize {
        let (i, o) = (self.layers[l], self.layers[l + 1]);
        o * i + if self.bias { o } else { 0 }
    }

    pub fn n_params(&self) -> usize {
        (0..self.layers.len() - 1).map(|l| self.block(l)).sum()
    }

    /// Offsets of each layer's block within the flat vector.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.layers.len() - 1);
        let mut at = 0;
        for l in 0..self.layers.len() - 1 {
            offs.push(at);
            at += self.block(l);
        }
        offs
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.n_features() != self.inputs() || ds.n_targets() != self.outputs() {
            return Err(Error::DimensionMismatch(format!(
                "network {:?} vs dataset with {} features and {} targets",
                self.layers,
                ds.n_features(),
                ds.n_targets()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for WeightVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn init_weights(spec: &NetworkSpec, seed: u64) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(spec.n_params());
    for l in 0..spec.layers.len() - 1 {
        let (fan_in, fan_out) = (spec.layers[l], spec.layers[l + 1]);
        let scale = match spec.init {
            Init::StandardNormal => 1.0,
            Init::Xavier => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        for _ in 0..fan_in * fan_out {
            let z: f64 = StandardNormal.sample(&mut rng);
            x.push(scale * z);
        }
        if spec.bias {
            for _ in 0..fan_out {
                let z: f64 = StandardNormal.sample(&mut rng);
                x.push(match spec.init {
                    Init::StandardNormal => z,
                    Init::Xavier => 0.0,
                });
            }
        }
    }
    WeightVector(x)
}

/// Per-sample activations kept for the backward pass.
struct Trace {
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn forward(spec: &NetworkSpec, x: &[f64], input: &[f64]) -> Trace {
    let offs = spec.layer_offsets();
    let n = spec.layers.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut logits = Vec::new();
    for l in 0..n {
        let (fi, fo) = (spec.layers[l], spec.layers[l + 1]);
        let w = &x[offs[l]..offs[l] + fi * fo];
        let prev: &[f64] = if l == 0 { input } else { &acts[l - 1] };
        let mut z: Vec<f64> = w.chunks_exact(fi).map(|row| dot(row, prev)).collect();
        if spec.bias {
            let b = &x[offs[l] + fi * fo..offs[l] + fi * fo + fo];
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
        }
        if l + 1 == n {
            logits = z;
        } else {
            acts.push(z.into_iter().map(|v| spec.activation.apply(v)).collect());
        }
    }
    Trace { acts, logits }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Loss of one sample plus ∂loss/∂logits.
fn output_loss(spec: &NetworkSpec, logits: &[f64], target: &[f64], want_delta: bool) -> (f64, Vec<f64>) {
    match spec.loss {
        Loss::BinaryCrossEntropy | Loss::CrossEntropy => {
            let loss = logits.iter().zip(target).map(|(&z, &y)| softplus(z) - y * z).sum();
            let delta = if want_delta {
                logits.iter().zip(target).map(|(&z, &y)| sigmoid(z) - y).collect()
            } else {
                Vec::new()
            };
            (loss, delta)
        }
        Loss::SoftmaxCrossEntropy => {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            let loss = logits.iter().zip(target).map(|(&z, &y)| y * (lse - z)).sum();
            let delta = if want_delta {
                logits.iter().zip(target).map(|(&z, &y)| (z - lse).exp() - y).collect()
            } else {
                Vec::new()
            };
            (loss, delta)
        }
        Loss::Squared => {
            let out: Vec<f64> = logits.iter().map(|&z| spec.activation.apply(z)).collect();
            let loss = out.iter().zip(target).map(|(o, y)| (o - y).powi(2)).sum();
            let delta = if want_delta {
                out.iter()
                    .zip(target)
                    .map(|(&o, &y)| 2.0 * (o - y) * spec.activation.slope(o))
                    .collect()
            } else {
                Vec::new()
            };
            (loss, delta)
        }
    }
}

fn backward(spec: &NetworkSpec, x: &[f64], input: &[f64], trace: &Trace, mut delta: Vec<f64>, grad: &mut [f64]) {
    let offs = spec.layer_offsets();
    let n = spec.layers.len() - 1;
    for l in (0..n).rev() {
        let (fi, fo) = (spec.layers[l], spec.layers[l + 1]);
        let prev: &[f64] = if l == 0 { input } else { &trace.acts[l - 1] };
        let gw = &mut grad[offs[l]..offs[l] + fi * fo];
        for (row, &dr) in gw.chunks_exact_mut(fi).zip(&delta) {
            if dr != 0.0 {
                for (g, &p) in row.iter_mut().zip(prev) {
                    *g += dr * p;
                }
            }
        }
        if spec.bias {
            let gb = &mut grad[offs[l] + fi * fo..offs[l] + fi * fo + fo];
            for (g, &dr) in gb.iter_mut().zip(&delta) {
                *g += dr;
            }
        }
        if l > 0 {
            let w = &x[offs[l]..offs[l] + fi * fo];
            let mut back = vec![0.0; fi];
            for (row, &dr) in w.chunks_exact(fi).zip(&delta) {
                if dr != 0.0 {
                    for (b, &wv) in back.iter_mut().zip(row) {
                        *b += dr * wv;
                    }
                }
            }
            let act = &trace.acts[l - 1];
            for (b, &a) in back.iter_mut().zip(act) {
                *b *= spec.activation.slope(a);
            }
            delta = back;
        }
    }
}

fn check_inputs(spec: &NetworkSpec, x: &[f64], ds: &Dataset, batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != spec.n_params() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for a network with {}",
            x.len(),
            spec.n_params()
        )));
    }
    spec.check_dataset(ds)
}

/// Mean per-sample loss over `batch` (dataset row numbers).
pub fn batch_loss(spec: &NetworkSpec, x: &[f64], ds: &Dataset, batch: &[usize]) -> Result<f64> {
    check_inputs(spec, x, ds, batch)?;
    let partials: Vec<f64> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&row| {
                    let trace = forward(spec, x, ds.input(row));
                    output_loss(spec, &trace.logits, ds.target(row), false).0
                })
                .sum::<f64>()
        })
        .collect();
    let loss = partials.iter().sum::<f64>() / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    Ok(loss)
}

/// Loss and gradient from the same forward pass.
pub fn batch_grad(spec: &NetworkSpec, x: &[f64], ds: &Dataset, batch: &[usize]) -> Result<(f64, WeightVector)> {
    check_inputs(spec, x, ds, batch)?;
    let n = spec.n_params();
    let partials: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for &row in chunk {
                let input = ds.input(row);
                let trace = forward(spec, x, input);
                let (l, delta) = output_loss(spec, &trace.logits, ds.target(row), true);
                loss += l;
                backward(spec, x, input, &trace, delta, &mut grad);
            }
            (loss, grad)
        })
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v;
        }
    }
    loss /= batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((loss, WeightVector(grad)))
}

/// `gradᵀd`.
pub fn directional_derivative(grad: &[f64], d: &[f64]) -> f64 {
    assert_eq!(grad.len(), d.len(), "gradient and direction differ in length");
    dot(grad, d)
}

/// Output activations for one sample, used for prediction.
pub fn predict(spec: &NetworkSpec, x: &[f64], input: &[f64]) -> Vec<f64> {
    let trace = forward(spec, x, input);
    match spec.loss {
        Loss::BinaryCrossEntropy | Loss::CrossEntropy => trace.logits.iter().map(|&z| sigmoid(z)).collect(),
        Loss::SoftmaxCrossEntropy => {
            let max = trace.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = trace.logits.iter().map(|z| (z - max).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        }
        Loss::Squared => trace.logits.iter().map(|&z| spec.activation.apply(z)).collect(),
    }
}

/// Fraction of the split misclassified: argmax for several outputs, a 0.5
/// threshold for a single output. An empty split has error 0.
pub fn classification_error(spec: &NetworkSpec, x: &[f64], ds: &Dataset, which: Split) -> f64 {
    let rows = ds.split(which);
    if rows.is_empty() {
        return 0.0;
    }
    let wrong: usize = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .filter(|&&row| {
                    let out = predict(spec, x, ds.input(row));
                    let guess = if out.len() == 1 {
                        usize::from(out[0] >= 0.5)
                    } else {
                        (0..out.len()).max_by(|&a, &b| out[a].total_cmp(&out[b])).unwrap()
                    };
                    guess != ds.label(row)
                })
                .count()
        })
        .sum();
    wrong as f64 / rows.len() as f64
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"QLSW";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes `spec` and `x` as: magic `QLSW`, version (u32), layer count (u32),
/// layer sizes (u32 each), activation/loss/init/bias codes (u8 each),
/// parameter count (u64), then the parameters as f64. All little-endian.
pub fn save_weights(path: impl AsRef<Path>, spec: &NetworkSpec, x: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if x.len() != spec.n_params() {
        return Err(Error::DimensionMismatch("weights do not match spec".into()));
    }
    let mut buf = Vec::with_capacity(32 + 8 * x.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(spec.layers.len() as u32).to_le_bytes());
    for &l in &spec.layers {
        buf.extend_from_slice(&(l as u32).to_le_bytes());
    }
    buf.extend_from_slice(&[spec.activation.code(), spec.loss.code(), spec.init.code(), u8::from(spec.bias)]);
    buf.extend_from_slice(&(x.len() as u64).to_le_bytes());
    for v in x {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(NetworkSpec, WeightVector)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, at: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = cur.u32()? as usize;
    if n_layers > 64 {
        return Err(Error::Checkpoint(format!("{n_layers} layers")));
    }
    let layers = (0..n_layers).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let codes = cur.take(4)?;
    let bad = |what: &str| Error::Checkpoint(format!("unknown {what} code"));
    let activation = Activation::from_code(codes[0]).ok_or_else(|| bad("activation"))?;
    let loss = Loss::from_code(codes[1]).ok_or_else(|| bad("loss"))?;
    let init = Init::from_code(codes[2]).ok_or_else(|| bad("init"))?;
    let bias = codes[3] != 0;
    let spec = NetworkSpec::new(layers, activation, loss, init, bias)?;
    let n = cur.u64()? as usize;
    if n != spec.n_params() {
        return Err(Error::Checkpoint(format!("{n} parameters for a {} parameter network", spec.n_params())));
    }
    let body = cur.take(8 * n)?;
    if cur.at != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let x = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((spec, WeightVector(x)))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_wdbc;

    fn wdbc() -> Dataset {
        load_wdbc(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wdbc.data"), 0).unwrap()
    }

    /// Tiny dataset with `classes` one-hot targets and deterministic inputs.
    fn toy(n: usize, features: usize, classes: usize) -> Dataset {
        let inputs = (0..n * features).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.3).collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % classes) as u8).collect();
        let targets = crate::data::one_hot(&labels, classes);
        Dataset::from_parts("toy", features, inputs, classes, targets, (0..n).collect(), vec![]).unwrap()
    }

    #[test]
    fn logistic_layout() {
        let spec = NetworkSpec::logistic(30);
        assert_eq!(spec.n_params(), 31);
        let x = init_weights(&spec, 3);
        assert_eq!(x.len(), 31);
        assert_eq!(x, init_weights(&spec, 3));
        assert_ne!(x, init_weights(&spec, 4));
    }

    #[test]
    fn xavier_block_variance() {
        let spec = NetworkSpec::new(vec![1000, 500], Activation::Tanh, Loss::Squared, Init::Xavier, false).unwrap();
        let x = init_weights(&spec, 11);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let want = 2.0 / 1500.0;
        assert!((var / want - 1.0).abs() < 0.2, "var {var} want {want}");
    }

    #[test]
    fn zero_weights_give_ln2() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let x = WeightVector::zeros(31);
        let loss = batch_loss(&spec, &x, &ds, &ds.train()[..57]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn squared_loss_of_zero_output() {
        // Hand evaluation for one sample: outputs tanh(0) = 0 against a
        // one-hot target of width 10 gives Σ(0 − y)² = 1.
        let ds = toy(4, 5, 10);
        let spec = NetworkSpec::new(vec![5, 3, 10], Activation::Tanh, Loss::Squared, Init::Xavier, true).unwrap();
        let x = WeightVector::zeros(spec.n_params());
        assert_eq!(batch_loss(&spec, &x, &ds, &[0, 1, 2, 3]).unwrap(), 1.0);
    }

    #[test]
    fn full_batch_is_mean_of_halves() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let x = init_weights(&spec, 1);
        let all = &ds.train()[..200];
        let full = batch_loss(&spec, &x, &ds, all).unwrap();
        let a = batch_loss(&spec, &x, &ds, &all[..100]).unwrap();
        let b = batch_loss(&spec, &x, &ds, &all[100..]).unwrap();
        assert!((full - (a + b) / 2.0).abs() < 1e-12 * full.abs().max(1.0));
    }

    #[test]
    fn grad_is_mean_of_singletons() {
        let ds = toy(2, 4, 3);
        let spec = NetworkSpec::shallow(4, 5, 3);
        let x = init_weights(&spec, 2);
        let (_, g) = batch_grad(&spec, &x, &ds, &[0, 1]).unwrap();
        let (_, g0) = batch_grad(&spec, &x, &ds, &[0]).unwrap();
        let (_, g1) = batch_grad(&spec, &x, &ds, &[1]).unwrap();
        for i in 0..g.len() {
            assert!((g[i] - (g0[i] + g1[i]) / 2.0).abs() < 1e-14, "component {i}");
        }
    }

    #[test]
    fn mirrored_batch_has_zero_bias_gradient() {
        // At x = 0 every output is 0.5, so the bias gradient is mean(0.5 − y),
        // which vanishes on a batch with equal numbers of each class.
        let inputs = vec![1.0, -2.0, -1.0, 2.0];
        let ds = Dataset::from_parts("mirror", 2, inputs, 1, vec![1.0, 0.0], vec![0, 1], vec![]).unwrap();
        let spec = NetworkSpec::logistic(2);
        let (_, g) = batch_grad(&spec, &WeightVector::zeros(3), &ds, &[0, 1]).unwrap();
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn grad_loss_matches_batch_loss() {
        let ds = toy(9, 6, 4);
        for loss in [Loss::CrossEntropy, Loss::SoftmaxCrossEntropy, Loss::Squared] {
            let spec = NetworkSpec::new(vec![6, 5, 4], Activation::Tanh, loss, Init::Xavier, true).unwrap();
            let x = init_weights(&spec, 5);
            let rows: Vec<usize> = (0..9).collect();
            let (l, _) = batch_grad(&spec, &x, &ds, &rows).unwrap();
            assert_eq!(l.to_bits(), batch_loss(&spec, &x, &ds, &rows).unwrap().to_bits());
            assert!(l >= 0.0);
        }
    }

    #[test]
    fn directional_derivative_cases() {
        let g = [1.0, -2.0, 0.5];
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        assert_eq!(directional_derivative(&g, &d), -5.25);
        assert_eq!(directional_derivative(&[1.0, 0.0], &[0.0, 3.0]), 0.0);
    }

    #[test]
    fn directional_derivative_matches_central_difference() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let x = init_weights(&spec, 8);
        let batch = &ds.train()[..50];
        let (_, g) = batch_grad(&spec, &x, &ds, batch).unwrap();
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let at = |h: f64| {
            let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            batch_loss(&spec, &p, &ds, batch).unwrap()
        };
        let h = 1e-5 / g.norm();
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let an = directional_derivative(&g, &d);
        assert!((fd - an).abs() / an.abs() < 1e-5, "fd {fd} analytic {an}");
    }

    #[test]
    fn classification_error_edges() {
        // Perfect predictor: x = (w, b) = (10, 0) on inputs ±1.
        let ds = Dataset::from_parts("pm", 1, vec![1.0, -1.0], 1, vec![1.0, 0.0], vec![0, 1], vec![]).unwrap();
        let spec = NetworkSpec::logistic(1);
        assert_eq!(classification_error(&spec, &[10.0, 0.0], &ds, Split::Train), 0.0);
        // Constant predictor (w = 0) says class 1 for everything.
        assert_eq!(classification_error(&spec, &[0.0, 0.3], &ds, Split::Train), 0.5);
    }

    #[test]
    fn random_ten_class_weights_are_at_chance() {
        // 10 classes drawn uniformly, random weights: error ≈ 0.9.
        let n = 4000;
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        let inputs: Vec<f64> = (0..n * 20).map(|_| next()).collect();
        let labels: Vec<u8> = (0..n).map(|_| (next() * 10.0) as u8 % 10).collect();
        let ds = Dataset::from_parts(
            "chance",
            20,
            inputs,
            10,
            crate::data::one_hot(&labels, 10),
            (0..n / 2).collect(),
            (n / 2..n).collect(),
        )
        .unwrap();
        let spec = NetworkSpec::shallow(20, 16, 10);
        let err = classification_error(&spec, &init_weights(&spec, 77), &ds, Split::Test);
        assert!((err - 0.9).abs() < 0.03, "error {err}");
    }

    #[test]
    fn nonfinite_weights_are_reported() {
        let ds = wdbc();
        let spec = NetworkSpec::logistic(30);
        let mut x = WeightVector::zeros(31);
        x[0] = f64::NAN;
        assert!(matches!(batch_loss(&spec, &x, &ds, &[0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let spec = NetworkSpec::deep(7, [6, 5, 4], 3);
        let x = init_weights(&spec, 9);
        save_weights(&path, &spec, &x).unwrap();
        let (spec2, x2) = load_weights(&path).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(x, x2);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Checkpoint(_))));
    }
}
