//! From-scratch neural forecasting stack: dense, LSTM, GRU, and depthwise
//! temporal convolution layers, composed into four model families and
//! trained by backprop-through-time with minibatch gradient descent on the
//! mean squared error.
//!
//! Model layouts (`neurons` = hidden width, `h` = history steps):
//!
//! * `lstm` — stacked LSTM layers, readout from the last hidden state;
//! * `gru` — stacked GRU layers, same readout;
//! * `tcn` — temporal convolution (kernel `h/4`, valid, stride 1) followed
//!   by a dense layer re-adjusting the dimension, then the linear head;
//! * `tcnlstm` — convolution, per-step dense, LSTM, dense head.
//!
//! Everything is deterministic given `(seed, data, config)`.

mod cells;
mod conv;
mod dense;
mod linalg;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cells::{GruLayer, LstmLayer};
pub use conv::ConvLayer;
pub use dense::{Activation, DenseLayer};

use cells::{GruCache, LstmCache};
use conv::ConvCache;
use dense::DenseCache;

use crate::clamp_non_negative;
use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch for {name}: got {got}, want {want}")]
    ShapeMismatch {
        name: &'static str,
        got: usize,
        want: usize,
    },
    #[error("history must be >= 4 and divisible by 4 for convolutional models, got {0}")]
    BadHistory(usize),
    #[error("configuration invalid: {0}")]
    BadConfig(&'static str),
    #[error("training diverged at epoch {epoch} (loss is not finite); try a smaller learning rate")]
    Diverged { epoch: usize },
    #[error("look-ahead {0} is not among the trained heads")]
    UnknownHead(usize),
    #[error("empty training set")]
    EmptyDataset,
    #[error("parameter bundle does not match the configuration: got {got} values, want {want}")]
    ParamLengthMismatch { got: usize, want: usize },
}

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Gru,
    Tcn,
    TcnLstm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Gru => "gru",
            ModelKind::Tcn => "tcn",
            ModelKind::TcnLstm => "tcnlstm",
        }
    }
}

/// Network hyperparameters. `defaults` pins the evaluation setup per family:
/// hidden layers 2/1/2/4 for LSTM/GRU/TCN/TCNLSTM, 100 neurons, 100 epochs,
/// batch 5, history 12 steps (60 min) except GRU's 24 (120 min).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub kind: ModelKind,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// History window length in 5-minute steps.
    pub history: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Width of one timestep's input vector.
    pub input_dim: usize,
    /// Look-ahead steps, one output head per entry.
    pub heads: Vec<usize>,
    /// Whether the model consumes only the flow feature.
    pub flow_only: bool,
}

impl NetConfig {
    pub fn defaults(kind: ModelKind) -> Self {
        let (hidden_layers, history, flow_only) = match kind {
            ModelKind::Lstm => (2, 12, false),
            ModelKind::Gru => (1, 24, true),
            ModelKind::Tcn => (2, 12, false),
            ModelKind::TcnLstm => (4, 12, false),
        };
        NetConfig {
            kind,
            hidden_layers,
            neurons: 100,
            epochs: 100,
            batch_size: 5,
            history,
            learning_rate: 1e-3,
            seed: 0,
            input_dim: 1,
            heads: vec![1],
            flow_only,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.neurons == 0 || self.hidden_layers == 0 {
            return Err(NeuralError::BadConfig("neurons and hidden_layers must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::BadConfig("batch_size must be > 0"));
        }
        if self.input_dim == 0 {
            return Err(NeuralError::BadConfig("input_dim must be > 0"));
        }
        if self.heads.is_empty() {
            return Err(NeuralError::BadConfig("at least one look-ahead head required"));
        }
        if matches!(self.kind, ModelKind::Tcn | ModelKind::TcnLstm)
            && (self.history < 4 || self.history % 4 != 0)
        {
            return Err(NeuralError::BadHistory(self.history));
        }
        if self.history == 0 {
            return Err(NeuralError::BadConfig("history must be > 0"));
        }
        Ok(())
    }

    fn kernel_len(&self) -> usize {
        self.history / 4
    }
}

/// One training sample: a window of `history` input vectors (oldest first)
/// and one normalized target per head.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Recurrent {
    Lstm(LstmLayer),
    Gru(GruLayer),
}

enum RecCache {
    Lstm(LstmCache),
    Gru(GruCache),
}

struct Fwd {
    conv: Option<ConvCache>,
    time_dense: Option<Vec<DenseCache>>,
    flat_dense: Option<DenseCache>,
    rec: Vec<(RecCache, usize)>, // cache + sequence length at that stage
    head: DenseCache,
    output: Vec<f64>,
}

/// A trainable network plus the de-normalization range of its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetConfig,
    conv: Option<ConvLayer>,
    time_dense: Option<DenseLayer>,
    flat_dense: Option<DenseLayer>,
    recurrent: Vec<Recurrent>,
    head: DenseLayer,
    /// `(min, max)` of the raw target on the training split.
    pub target_scale: (f64, f64),
}

impl Network {
    /// Builds a freshly initialized network; weights are uniform in
    /// `[-0.05, 0.05)` from the seeded generator.
    pub fn new(config: NetConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let d = config.input_dim;
        let n = config.neurons;
        let heads = config.heads.len();
        let (conv, time_dense, flat_dense, recurrent, head_in) = match config.kind {
            ModelKind::Lstm => {
                let mut rec = Vec::new();
                let mut width = d;
                for _ in 0..config.hidden_layers {
                    rec.push(Recurrent::Lstm(LstmLayer::new(width, n, &mut rng)));
                    width = n;
                }
                (None, None, None, rec, n)
            }
            ModelKind::Gru => {
                let mut rec = Vec::new();
                let mut width = d;
                for _ in 0..config.hidden_layers {
                    rec.push(Recurrent::Gru(GruLayer::new(width, n, &mut rng)));
                    width = n;
                }
                (None, None, None, rec, n)
            }
            ModelKind::Tcn => {
                let conv = ConvLayer::new(d, config.kernel_len(), &mut rng);
                let conv_out = (config.history - config.kernel_len() + 1) * d;
                let dense = DenseLayer::new(conv_out, n, Activation::Tanh, &mut rng);
                (Some(conv), None, Some(dense), Vec::new(), n)
            }
            ModelKind::TcnLstm => {
                let conv = ConvLayer::new(d, config.kernel_len(), &mut rng);
                let td = DenseLayer::new(d, n, Activation::Tanh, &mut rng);
                let rec = vec![Recurrent::Lstm(LstmLayer::new(n, n, &mut rng))];
                (Some(conv), Some(td), None, rec, n)
            }
        };
        let head = DenseLayer::new(head_in, heads, Activation::Linear, &mut rng);
        Ok(Network {
            config,
            conv,
            time_dense,
            flat_dense,
            recurrent,
            head,
            target_scale: (0.0, 1.0),
        })
    }

    fn forward_cached(&self, inputs: &[Vec<f64>]) -> Result<Fwd, NeuralError> {
        if inputs.len() != self.config.history {
            return Err(NeuralError::ShapeMismatch {
                name: "window length",
                got: inputs.len(),
                want: self.config.history,
            });
        }
        for x in inputs {
            if x.len() != self.config.input_dim {
                return Err(NeuralError::ShapeMismatch {
                    name: "input width",
                    got: x.len(),
                    want: self.config.input_dim,
                });
            }
        }
        let mut seq: Vec<Vec<f64>> = inputs.to_vec();
        let mut conv_cache = None;
        if let Some(conv) = &self.conv {
            let (ys, cache) = conv.forward(&seq);
            seq = ys;
            conv_cache = Some(cache);
        }
        let mut td_caches = None;
        if let Some(td) = &self.time_dense {
            let mut caches = Vec::with_capacity(seq.len());
            let mut out = Vec::with_capacity(seq.len());
            for x in &seq {
                let (y, cache) = td.forward(x);
                out.push(y);
                caches.push(cache);
            }
            seq = out;
            td_caches = Some(caches);
        }
        let mut rec_caches = Vec::new();
        for layer in &self.recurrent {
            let len = seq.len();
            match layer {
                Recurrent::Lstm(l) => {
                    let (hs, cache) = l.forward_seq(&seq);
                    seq = hs;
                    rec_caches.push((RecCache::Lstm(cache), len));
                }
                Recurrent::Gru(l) => {
                    let (hs, cache) = l.forward_seq(&seq);
                    seq = hs;
                    rec_caches.push((RecCache::Gru(cache), len));
                }
            }
        }
        let mut flat_cache = None;
        let feature: Vec<f64> = if let Some(fd) = &self.flat_dense {
            let flat: Vec<f64> = seq.iter().flatten().copied().collect();
            let (y, cache) = fd.forward(&flat);
            flat_cache = Some(cache);
            y
        } else {
            seq.last().expect("non-empty sequence").clone()
        };
        let (output, head_cache) = self.head.forward(&feature);
        Ok(Fwd {
            conv: conv_cache,
            time_dense: td_caches,
            flat_dense: flat_cache,
            rec: rec_caches,
            head: head_cache,
            output,
        })
    }

    /// Raw normalized outputs, one per head.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
        Ok(self.forward_cached(inputs)?.output)
    }

    /// Forecast for the head trained at look-ahead `k`, de-normalized to
    /// vehicles/hour and clamped at zero.
    pub fn predict(&self, inputs: &[Vec<f64>], k: usize) -> Result<f64, NeuralError> {
        let idx = self
            .config
            .heads
            .iter()
            .position(|h| *h == k)
            .ok_or(NeuralError::UnknownHead(k))?;
        let raw = self.forward(inputs)?[idx];
        let (lo, hi) = self.target_scale;
        Ok(clamp_non_negative(lo + raw.max(0.0).min(1.0) * (hi - lo)))
    }

    /// Forward + backward for one sample; accumulates gradients and returns
    /// the sample loss (mean squared error over heads, normalized space).
    fn backward_sample(&mut self, sample: &Sample) -> Result<f64, NeuralError> {
        if sample.targets.len() != self.config.heads.len() {
            return Err(NeuralError::ShapeMismatch {
                name: "targets",
                got: sample.targets.len(),
                want: self.config.heads.len(),
            });
        }
        let fwd = self.forward_cached(&sample.inputs)?;
        let heads = sample.targets.len() as f64;
        let mut dout = vec![0.0; sample.targets.len()];
        let mut loss = 0.0;
        for (j, (&o, &y)) in fwd.output.iter().zip(&sample.targets).enumerate() {
            let e = o - y;
            loss += e * e / heads;
            dout[j] = 2.0 * e / heads;
        }
        let dfeature = self.head.backward(&fwd.head, &dout);
        // Route back through the encoder.
        let mut dseq: Vec<Vec<f64>>;
        if let (Some(fd), Some(cache)) = (&mut self.flat_dense, &fwd.flat_dense) {
            let dflat = fd.backward(cache, &dfeature);
            // Un-flatten to per-timestep gradients.
            let d = self.config.input_dim;
            dseq = dflat.chunks(d).map(|c| c.to_vec()).collect();
        } else {
            // Gradient lands on the last timestep of the top recurrent layer.
            let top_len = fwd.rec.last().map(|(_, l)| *l).unwrap_or(1);
            let width = dfeature.len();
            dseq = vec![vec![0.0; width]; top_len];
            *dseq.last_mut().expect("non-empty") = dfeature;
        }
        for (layer, (cache, _len)) in self.recurrent.iter_mut().zip(&fwd.rec).rev() {
            dseq = match (layer, cache) {
                (Recurrent::Lstm(l), RecCache::Lstm(c)) => l.backward_seq(c, &dseq),
                (Recurrent::Gru(l), RecCache::Gru(c)) => l.backward_seq(c, &dseq),
                _ => unreachable!("cache kind matches layer kind"),
            };
        }
        if let (Some(td), Some(caches)) = (&mut self.time_dense, &fwd.time_dense) {
            let mut out = Vec::with_capacity(dseq.len());
            for (dy, cache) in dseq.iter().zip(caches) {
                out.push(td.backward(cache, dy));
            }
            dseq = out;
        }
        if let (Some(conv), Some(cache)) = (&mut self.conv, &fwd.conv) {
            conv.backward(cache, &dseq);
        }
        Ok(loss)
    }

    fn zero_grads(&mut self) {
        if let Some(c) = &mut self.conv {
            c.zero_grads();
        }
        if let Some(d) = &mut self.time_dense {
            d.zero_grads();
        }
        if let Some(d) = &mut self.flat_dense {
            d.zero_grads();
        }
        for r in &mut self.recurrent {
            match r {
                Recurrent::Lstm(l) => l.zero_grads(),
                Recurrent::Gru(l) => l.zero_grads(),
            }
        }
        self.head.zero_grads();
    }

    fn sgd_step(&mut self, scale: f64) {
        if let Some(c) = &mut self.conv {
            c.sgd_step(scale);
        }
        if let Some(d) = &mut self.time_dense {
            d.sgd_step(scale);
        }
        if let Some(d) = &mut self.flat_dense {
            d.sgd_step(scale);
        }
        for r in &mut self.recurrent {
            match r {
                Recurrent::Lstm(l) => l.sgd_step(scale),
                Recurrent::Gru(l) => l.sgd_step(scale),
            }
        }
        self.head.sgd_step(scale);
    }

    /// One minibatch pass over `data` in order; returns the mean loss.
    pub fn train_pass(&mut self, data: &[Sample]) -> Result<f64, NeuralError> {
        if data.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        let mut total = 0.0;
        for batch in data.chunks(self.config.batch_size) {
            self.zero_grads();
            let mut batch_loss = 0.0;
            for sample in batch {
                batch_loss += self.backward_sample(sample)?;
            }
            self.sgd_step(self.config.learning_rate / batch.len() as f64);
            total += batch_loss;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(NeuralError::Diverged { epoch: 0 });
        }
        Ok(mean)
    }

    /// Offline training: `epochs` shuffled minibatch passes. Returns the
    /// per-epoch mean loss trace.
    pub fn train(&mut self, data: &[Sample]) -> Result<Vec<f64>, NeuralError> {
        if data.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut shuffler = Rng::new(self.config.seed ^ 0x5a5a_5a5a_5a5a_5a5a);
        let mut trace = Vec::with_capacity(self.config.epochs);
        for epoch in 0..self.config.epochs {
            shuffler.shuffle(&mut order);
            let mut total = 0.0;
            for batch in order.chunks(self.config.batch_size) {
                self.zero_grads();
                for &i in batch {
                    total += self.backward_sample(&data[i])?;
                }
                self.sgd_step(self.config.learning_rate / batch.len() as f64);
            }
            let mean = total / data.len() as f64;
            if !mean.is_finite() {
                return Err(NeuralError::Diverged { epoch });
            }
            trace.push(mean);
        }
        Ok(trace)
    }

    /// Loss of one sample without touching gradients; finite-difference
    /// oracles probe this.
    pub fn loss(&self, sample: &Sample) -> Result<f64, NeuralError> {
        let out = self.forward(&sample.inputs)?;
        let heads = sample.targets.len() as f64;
        Ok(out
            .iter()
            .zip(&sample.targets)
            .map(|(o, y)| (o - y) * (o - y) / heads)
            .sum())
    }

    // ---- flat parameter access (serialization + gradient checks) ----

    pub fn param_count(&self) -> usize {
        let mut n = self.head.param_count();
        if let Some(c) = &self.conv {
            n += c.param_count();
        }
        if let Some(d) = &self.time_dense {
            n += d.param_count();
        }
        if let Some(d) = &self.flat_dense {
            n += d.param_count();
        }
        for r in &self.recurrent {
            n += match r {
                Recurrent::Lstm(l) => l.param_count(),
                Recurrent::Gru(l) => l.param_count(),
            };
        }
        n
    }

    /// All parameters in a fixed order: conv, time dense, recurrent stack,
    /// flat dense, head.
    pub fn param_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        if let Some(c) = &self.conv {
            c.params_into(&mut out);
        }
        if let Some(d) = &self.time_dense {
            d.params_into(&mut out);
        }
        for r in &self.recurrent {
            match r {
                Recurrent::Lstm(l) => l.params_into(&mut out),
                Recurrent::Gru(l) => l.params_into(&mut out),
            }
        }
        if let Some(d) = &self.flat_dense {
            d.params_into(&mut out);
        }
        self.head.params_into(&mut out);
        out
    }

    /// Accumulated gradients in the same order as [`Self::param_vec`].
    pub fn grad_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        if let Some(c) = &self.conv {
            c.grads_into(&mut out);
        }
        if let Some(d) = &self.time_dense {
            d.grads_into(&mut out);
        }
        for r in &self.recurrent {
            match r {
                Recurrent::Lstm(l) => l.grads_into(&mut out),
                Recurrent::Gru(l) => l.grads_into(&mut out),
            }
        }
        if let Some(d) = &self.flat_dense {
            d.grads_into(&mut out);
        }
        self.head.grads_into(&mut out);
        out
    }

    pub fn set_param_vec(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.param_count() {
            return Err(NeuralError::ParamLengthMismatch {
                got: params.len(),
                want: self.param_count(),
            });
        }
        let mut it = params.iter();
        if let Some(c) = &mut self.conv {
            c.set_params(&mut it);
        }
        if let Some(d) = &mut self.time_dense {
            d.set_params(&mut it);
        }
        for r in &mut self.recurrent {
            match r {
                Recurrent::Lstm(l) => l.set_params(&mut it),
                Recurrent::Gru(l) => l.set_params(&mut it),
            }
        }
        if let Some(d) = &mut self.flat_dense {
            d.set_params(&mut it);
        }
        self.head.set_params(&mut it);
        Ok(())
    }

    /// Accumulates gradients for one sample (used by gradient-check tests).
    pub fn accumulate_gradients(&mut self, sample: &Sample) -> Result<f64, NeuralError> {
        self.backward_sample(sample)
    }

    /// Clears accumulated gradients.
    pub fn reset_gradients(&mut self) {
        self.zero_grads();
    }

    /// Flat parameter bundle with a shape manifest.
    pub fn to_params(&self) -> NetParams {
        NetParams {
            config: self.config.clone(),
            target_scale: self.target_scale,
            shapes: self.tensor_manifest(),
            data: self.param_vec(),
        }
    }

    pub fn from_params(params: &NetParams) -> Result<Self, NeuralError> {
        let mut net = Network::new(params.config.clone())?;
        net.set_param_vec(&params.data)?;
        net.target_scale = params.target_scale;
        Ok(net)
    }

    fn tensor_manifest(&self) -> Vec<TensorShape> {
        use alloc::format;
        let mut out = Vec::new();
        let mut push = |name: String, dims: Vec<usize>| out.push(TensorShape { name, dims });
        if let Some(c) = &self.conv {
            push(String::from("conv.kernel"), vec![c.channels(), c.kernel_len()]);
            push(String::from("conv.bias"), vec![c.channels()]);
        }
        if let Some(d) = &self.time_dense {
            push(String::from("time_dense.w"), vec![d.output_dim(), d.input_dim()]);
            push(String::from("time_dense.b"), vec![d.output_dim()]);
        }
        for (i, r) in self.recurrent.iter().enumerate() {
            match r {
                Recurrent::Lstm(l) => {
                    let (d, h) = (l.input_dim(), l.hidden_dim());
                    push(format!("lstm{i}.wx"), vec![4 * h, d]);
                    push(format!("lstm{i}.wh"), vec![4 * h, h]);
                    push(format!("lstm{i}.b"), vec![4 * h]);
                }
                Recurrent::Gru(l) => {
                    let (d, h) = (l.input_dim(), l.hidden_dim());
                    for g in ["wxz", "wxr", "wxn"] {
                        push(format!("gru{i}.{g}"), vec![h, d]);
                    }
                    for g in ["whz", "whr", "whn"] {
                        push(format!("gru{i}.{g}"), vec![h, h]);
                    }
                    for g in ["bz", "br", "bn"] {
                        push(format!("gru{i}.{g}"), vec![h]);
                    }
                }
            }
        }
        if let Some(d) = &self.flat_dense {
            push(String::from("flat_dense.w"), vec![d.output_dim(), d.input_dim()]);
            push(String::from("flat_dense.b"), vec![d.output_dim()]);
        }
        push(String::from("head.w"), vec![self.head.output_dim(), self.head.input_dim()]);
        push(String::from("head.b"), vec![self.head.output_dim()]);
        out
    }
}

/// Flat tensor bundle with a shape manifest; the std crate persists this as
/// JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub config: NetConfig,
    pub target_scale: (f64, f64),
    pub shapes: Vec<TensorShape>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub dims: Vec<usize>,
}

/// Standard LSTM cell step with the given parameters.
pub fn lstm_cell_step(
    params: &LstmLayer,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    params.step(x, h_prev, c_prev)
}

/// GRU cell step: `h = (1 - z) h_prev + z h~`.
pub fn gru_cell_step(
    params: &GruLayer,
    x: &[f64],
    h_prev: &[f64],
) -> Result<Vec<f64>, NeuralError> {
    params.step(x, h_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(kind: ModelKind) -> NetConfig {
        let mut cfg = NetConfig::defaults(kind);
        cfg.neurons = 4;
        cfg.history = 8;
        cfg.input_dim = 2;
        cfg.epochs = 50;
        cfg.batch_size = 4;
        cfg.learning_rate = 0.05;
        cfg.seed = 3;
        cfg
    }

    fn constant_dataset(cfg: &NetConfig, value: f64) -> Vec<Sample> {
        (0..20)
            .map(|i| Sample {
                inputs: (0..cfg.history)
                    .map(|t| vec![((i + t) % 5) as f64 / 5.0, 0.3])
                    .collect(),
                targets: vec![value],
            })
            .collect()
    }

    #[test]
    fn constant_target_convergence_all_kinds() {
        for kind in [ModelKind::Lstm, ModelKind::Gru, ModelKind::Tcn, ModelKind::TcnLstm] {
            let mut cfg = tiny_config(kind);
            cfg.epochs = 100;
            let data = constant_dataset(&cfg, 0.6);
            let mut net = Network::new(cfg).unwrap();
            net.train(&data).unwrap();
            for s in &data {
                let out = net.forward(&s.inputs).unwrap()[0];
                assert!((out - 0.6).abs() < 0.01, "{kind:?}: {out}");
            }
        }
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let mut cfg = tiny_config(ModelKind::Lstm);
        cfg.epochs = 0;
        let data = constant_dataset(&cfg, 0.5);
        let mut net = Network::new(cfg.clone()).unwrap();
        let before = net.param_vec();
        net.train(&data).unwrap();
        assert_eq!(before, net.param_vec());
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = tiny_config(ModelKind::Gru);
        let data = constant_dataset(&cfg, 0.4);
        let mut a = Network::new(cfg.clone()).unwrap();
        let mut b = Network::new(cfg).unwrap();
        a.train(&data).unwrap();
        b.train(&data).unwrap();
        let (pa, pb) = (a.param_vec(), b.param_vec());
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn training_reduces_loss() {
        for kind in [ModelKind::Lstm, ModelKind::Gru, ModelKind::Tcn, ModelKind::TcnLstm] {
            let cfg = tiny_config(kind);
            let data = constant_dataset(&cfg, 0.8);
            let mut net = Network::new(cfg).unwrap();
            let trace = net.train(&data).unwrap();
            assert!(
                trace.last().unwrap() < trace.first().unwrap(),
                "{kind:?}: {trace:?}"
            );
        }
    }

    #[test]
    fn predict_denormalizes_and_clamps() {
        let cfg = tiny_config(ModelKind::Tcn);
        let mut net = Network::new(cfg.clone()).unwrap();
        net.target_scale = (0.0, 2000.0);
        let window: Vec<Vec<f64>> = (0..cfg.history).map(|_| vec![0.1, 0.2]).collect();
        let v = net.predict(&window, 1).unwrap();
        assert!(v >= 0.0);
        assert!(net.predict(&window, 7).is_err(), "untrained head accepted");
    }

    #[test]
    fn params_roundtrip() {
        let cfg = tiny_config(ModelKind::TcnLstm);
        let net = Network::new(cfg).unwrap();
        let bundle = net.to_params();
        assert_eq!(
            bundle.shapes.iter().map(|s| s.dims.iter().product::<usize>()).sum::<usize>(),
            bundle.data.len()
        );
        let back = Network::from_params(&bundle).unwrap();
        assert_eq!(net.param_vec(), back.param_vec());
    }

    #[test]
    fn forward_is_pure() {
        let cfg = tiny_config(ModelKind::Lstm);
        let net = Network::new(cfg.clone()).unwrap();
        let window: Vec<Vec<f64>> = (0..cfg.history).map(|t| vec![t as f64 / 8.0, 0.5]).collect();
        assert_eq!(net.forward(&window).unwrap(), net.forward(&window).unwrap());
    }

    #[test]
    fn bad_history_for_conv() {
        let mut cfg = tiny_config(ModelKind::Tcn);
        cfg.history = 6;
        assert!(matches!(Network::new(cfg), Err(NeuralError::BadHistory(6))));
    }
}
