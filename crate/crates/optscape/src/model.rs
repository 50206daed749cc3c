//! Fully connected networks with optional per-hidden-layer batch
//! normalization, plus the flat parameter view all landscape arithmetic
//! operates on.
//!
//! Batch-norm running statistics are model state, not parameters: weight
//! interpolation touches gamma/beta only, and running statistics are always
//! recomputed from data at whatever point of weight space is being evaluated.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{draw_gaussian, draw_uniform, Stream, StreamKey};
use crate::tensor::{
    affine_backward, affine_forward, argmax, batchnorm_backward, batchnorm_forward, dropout_backward,
    dropout_forward, relu_backward, relu_forward, softmax, softmax_xent, AffineCache, BatchNormCache,
    BatchNormState, BnMode, ReluCache, Tensor,
};

/// Batch-norm constants. The epsilon guard is small enough that rescaling a
/// normalized layer's incoming weights by a factor c changes predictions by
/// less than 1e-6 per entry after a statistics refresh (the guard term
/// shifts normalized activations by about ε·(1 - 1/c²)/(2·var), so it must
/// sit well below var·1e-6). The running update is
/// `new = (1 - momentum)·old + momentum·batch`.
pub const BN_EPSILON: f64 = 1e-8;
pub const BN_MOMENTUM: f64 = 0.1;

const EVAL_CHUNK: usize = 512;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// ── Specification ────────────────────────────────────────────────────

/// Architecture description. `batch_norm[i]` toggles normalization after the
/// i-th hidden layer's affine; the output layer feeds softmax directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layer_sizes: Vec<usize>,
    pub batch_norm: Vec<bool>,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl ModelSpec {
    /// The default two-layer network: 784-50-10 with batch norm on the
    /// hidden layer and no dropout.
    pub fn fc2() -> Self {
        ModelSpec { layer_sizes: vec![784, 50, 10], batch_norm: vec![true], dropout_rate: 0.0 }
    }

    /// Same shape with a different input width (synthetic datasets).
    pub fn fc2_with_input(input_dim: usize) -> Self {
        ModelSpec { layer_sizes: vec![input_dim, 50, 10], batch_norm: vec![true], dropout_rate: 0.0 }
    }

    pub fn without_batch_norm(mut self) -> Self {
        for flag in &mut self.batch_norm {
            *flag = false;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument("need at least input and output sizes".into()));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        let hidden = self.layer_sizes.len() - 2;
        if self.batch_norm.len() != hidden {
            return Err(Error::InvalidArgument(format!(
                "{} batch-norm flags for {hidden} hidden layers",
                self.batch_norm.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_affine_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn bn_on(&self, layer: usize) -> bool {
        layer < self.batch_norm.len() && self.batch_norm[layer]
    }

    /// Digest of the canonical serialized form; two parameter vectors are
    /// interpolation-compatible iff their hashes match.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("model spec serializes");
        sha256_hex(canonical.as_bytes())
    }
}

// ── Parameter layout and flat vector ─────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

/// Ordered tensor table over one contiguous buffer. Offsets partition the
/// buffer exactly: no gaps, no overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterLayout {
    entries: Vec<LayoutEntry>,
    total: usize,
}

impl ParameterLayout {
    /// Deterministic order per layer: w, b, then gamma, beta when present.
    fn for_spec(spec: &ModelSpec) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        for l in 0..spec.num_affine_layers() {
            let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
            let mut push = |name: String, shape: Vec<usize>| {
                let len: usize = shape.iter().product();
                entries.push(LayoutEntry { name, shape, offset });
                offset += len;
            };
            push(format!("layer{l}.w"), vec![n_in, n_out]);
            push(format!("layer{l}.b"), vec![n_out]);
            if spec.bn_on(l) {
                push(format!("layer{l}.gamma"), vec![n_out]);
                push(format!("layer{l}.beta"), vec![n_out]);
            }
        }
        ParameterLayout { entries, total: offset }
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn total_len(&self) -> usize {
        self.total
    }
}

/// Flat view of all trainable weights with a map back to layers. All
/// interpolation arithmetic operates on this object.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    data: Vec<f64>,
    layout: Arc<ParameterLayout>,
    config_hash: String,
}

impl ParameterVector {
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    /// Same-layout vector with the given contents.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        if data.len() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for layout of {}",
                data.len(),
                self.data.len()
            )));
        }
        Ok(ParameterVector { data, layout: Arc::clone(&self.layout), config_hash: self.config_hash.clone() })
    }

    pub fn zeros_like(&self) -> Self {
        ParameterVector {
            data: vec![0.0; self.data.len()],
            layout: Arc::clone(&self.layout),
            config_hash: self.config_hash.clone(),
        }
    }

    pub fn compatible(&self, other: &ParameterVector) -> Result<()> {
        if self.config_hash != other.config_hash {
            return Err(Error::Incompatible(format!(
                "config hash {} vs {}",
                &self.config_hash[..12.min(self.config_hash.len())],
                &other.config_hash[..12.min(other.config_hash.len())]
            )));
        }
        Ok(())
    }

    /// Euclidean norm over the full flat vector.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖₂`; errors on layout mismatch.
    pub fn distance(&self, other: &ParameterVector) -> Result<f64> {
        self.compatible(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Named slice of the flat buffer.
    pub fn tensor_slice(&self, name: &str) -> Option<(&[usize], &[f64])> {
        let e = self.layout.entries.iter().find(|e| e.name == name)?;
        let len: usize = e.shape.iter().product();
        Some((&e.shape, &self.data[e.offset..e.offset + len]))
    }
}

/// How weights are drawn. Biases start at zero; gamma at one, beta at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    /// `U(-a, a)` with `a = sqrt(6 / (n_in + n_out))`.
    XavierUniform,
    /// `U(-a, a)` with the narrower bound `a = sqrt(6) / (n_in + n_out)`,
    /// which keeps initial logits near zero so the starting loss sits at
    /// `ln(classes)`.
    XavierNarrow,
    /// Every weight from `N(mean, std²)`.
    Gaussian { mean: f64, std: f64 },
}

impl InitScheme {
    pub fn validate(&self) -> Result<()> {
        if let InitScheme::Gaussian { std, .. } = self {
            if *std <= 0.0 {
                return Err(Error::InvalidArgument("gaussian std must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            InitScheme::XavierUniform => "xavier_uniform".into(),
            InitScheme::XavierNarrow => "xavier_narrow".into(),
            InitScheme::Gaussian { mean, std } => format!("gaussian({mean},{std})"),
        }
    }
}

// ── Batch-norm running state ─────────────────────────────────────────

/// Running statistics for every batch-norm layer, in hidden-layer order.
/// Lives outside [`ParameterVector`] on purpose.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub layers: Vec<BnLayerStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnLayerStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

// ── Gradient record ──────────────────────────────────────────────────

/// Gradients aligned one-to-one with the parameter layout, plus the loss
/// they were taken at.
#[derive(Debug, Clone)]
pub struct GradientRecord {
    pub grad: ParameterVector,
    pub loss: f64,
}

/// Result of one train-mode forward/backward over a minibatch.
pub struct LossGrad {
    pub loss: f64,
    pub accuracy: f64,
    pub grad: GradientRecord,
    /// Per batch-norm layer: biased batch mean and unbiased batch variance,
    /// for the caller's running-statistics update.
    pub bn_batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

// ── Forward trace ────────────────────────────────────────────────────

enum BnTraceCache {
    Train(BatchNormCache),
    Eval { x_hat: Vec<f64>, inv_std: Vec<f64>, shape: Vec<usize> },
}

struct LayerTrace {
    affine: AffineCache,
    bn: Option<BnTraceCache>,
    relu: Option<ReluCache>,
    dropout_mask: Option<Tensor>,
}

struct ForwardTrace {
    layers: Vec<LayerTrace>,
    logits: Tensor,
}

// ── Model ────────────────────────────────────────────────────────────

struct LayerOffsets {
    w: usize,
    b: usize,
    gamma: Option<usize>,
    beta: Option<usize>,
    n_in: usize,
    n_out: usize,
}

/// An immutable architecture bound to its parameter layout. Batch-norm
/// running statistics are passed explicitly so read-only evaluation of
/// distinct parameter vectors can proceed in parallel against cloned state.
pub struct Model {
    spec: ModelSpec,
    layout: Arc<ParameterLayout>,
    hash: String,
    offsets: Vec<LayerOffsets>,
}

impl Model {
    pub fn build(spec: ModelSpec) -> Result<Model> {
        spec.validate()?;
        let layout = Arc::new(ParameterLayout::for_spec(&spec));
        let hash = spec.config_hash();
        let mut offsets = Vec::new();
        let mut cursor = 0usize;
        for l in 0..spec.num_affine_layers() {
            let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
            let w = cursor;
            cursor += n_in * n_out;
            let b = cursor;
            cursor += n_out;
            let (gamma, beta) = if spec.bn_on(l) {
                let g = cursor;
                cursor += n_out;
                let be = cursor;
                cursor += n_out;
                (Some(g), Some(be))
            } else {
                (None, None)
            };
            offsets.push(LayerOffsets { w, b, gamma, beta, n_in, n_out });
        }
        debug_assert_eq!(cursor, layout.total_len());
        Ok(Model { spec, layout, hash, offsets })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.total_len()
    }

    /// Zeroed parameter vector with this model's layout.
    pub fn zero_params(&self) -> ParameterVector {
        ParameterVector {
            data: vec![0.0; self.layout.total_len()],
            layout: Arc::clone(&self.layout),
            config_hash: self.hash.clone(),
        }
    }

    /// Parameter vector from raw data (checkpoint loading).
    pub fn params_from_data(&self, data: Vec<f64>) -> Result<ParameterVector> {
        self.zero_params().with_data(data)
    }

    /// Fresh running statistics: mean 0, variance 1 per batch-norm layer.
    pub fn fresh_bn_stats(&self) -> BnStats {
        let layers = (0..self.spec.num_affine_layers())
            .filter(|&l| self.spec.bn_on(l))
            .map(|l| {
                let f = self.spec.layer_sizes[l + 1];
                BnLayerStats { mean: vec![0.0; f], var: vec![1.0; f] }
            })
            .collect();
        BnStats { layers }
    }

    pub fn has_batch_norm(&self) -> bool {
        self.spec.batch_norm.iter().any(|&b| b)
    }

    /// Draw weights on the init stream. Counters index weight entries in
    /// layout order, so the result depends only on `(master_seed, scheme)`.
    pub fn initialize(&self, scheme: InitScheme, master_seed: u64) -> Result<ParameterVector> {
        scheme.validate()?;
        let mut params = self.zero_params();
        let mut counter = 0u64;
        for (l, off) in self.offsets.iter().enumerate() {
            let (n_in, n_out) = (off.n_in, off.n_out);
            let w = &mut params.data[off.w..off.w + n_in * n_out];
            match scheme {
                InitScheme::XavierUniform | InitScheme::XavierNarrow => {
                    let a = match scheme {
                        InitScheme::XavierUniform => (6.0 / (n_in + n_out) as f64).sqrt(),
                        _ => 6f64.sqrt() / (n_in + n_out) as f64,
                    };
                    for v in w.iter_mut() {
                        let u = draw_uniform(StreamKey::new(master_seed, Stream::Init, counter));
                        *v = (2.0 * u - 1.0) * a;
                        counter += 1;
                    }
                }
                InitScheme::Gaussian { mean, std } => {
                    for v in w.iter_mut() {
                        let g = draw_gaussian(StreamKey::new(master_seed, Stream::Init, counter));
                        *v = mean + std * g;
                        counter += 1;
                    }
                }
            }
            if self.spec.bn_on(l) {
                let gamma_off = off.gamma.unwrap();
                for v in &mut params.data[gamma_off..gamma_off + n_out] {
                    *v = 1.0;
                }
            }
        }
        Ok(params)
    }

    fn bn_state_for(&self, l: usize, bn_index: usize, params: &ParameterVector, bn: &BnStats) -> BatchNormState {
        let off = &self.offsets[l];
        let n_out = off.n_out;
        let gamma_off = off.gamma.unwrap();
        let beta_off = off.beta.unwrap();
        BatchNormState {
            gamma: params.data[gamma_off..gamma_off + n_out].to_vec(),
            beta: params.data[beta_off..beta_off + n_out].to_vec(),
            running_mean: bn.layers[bn_index].mean.clone(),
            running_var: bn.layers[bn_index].var.clone(),
            epsilon: BN_EPSILON,
        }
    }

    /// Shared forward pass. `masks` supplies dropout masks per hidden layer,
    /// consumed only in train mode when dropout_rate > 0.
    fn forward(
        &self,
        params: &ParameterVector,
        x: &Tensor,
        mode: Mode,
        masks: Option<&[Tensor]>,
        bn: &BnStats,
    ) -> Result<ForwardTrace> {
        if params.config_hash != self.hash {
            return Err(Error::Incompatible("parameters built for a different model spec".into()));
        }
        let (_, input_dim) = x.dims2()?;
        if input_dim != self.spec.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {input_dim} vs model input {}",
                self.spec.input_dim()
            )));
        }
        let n_layers = self.spec.num_affine_layers();
        let mut layers = Vec::with_capacity(n_layers);
        let mut h = x.clone();
        let mut bn_index = 0usize;
        for l in 0..n_layers {
            let off = &self.offsets[l];
            let w = &params.data[off.w..off.w + off.n_in * off.n_out];
            let b = &params.data[off.b..off.b + off.n_out];
            let (mut z, affine) = affine_forward(&h, w, b, off.n_in, off.n_out)?;

            let bn_cache = if self.spec.bn_on(l) {
                let state = self.bn_state_for(l, bn_index, params, bn);
                bn_index += 1;
                match mode {
                    Mode::Train => {
                        let (out, cache) = batchnorm_forward(&z, &state, BnMode::Train)?;
                        z = out;
                        Some(BnTraceCache::Train(cache.expect("train cache")))
                    }
                    Mode::Eval => {
                        let (out, _) = batchnorm_forward(&z, &state, BnMode::Eval)?;
                        let inv_std: Vec<f64> = state
                            .running_var
                            .iter()
                            .map(|v| 1.0 / (v + BN_EPSILON).sqrt())
                            .collect();
                        let (batch, f) = z.dims2()?;
                        let mut x_hat = vec![0.0; batch * f];
                        for i in 0..batch {
                            for j in 0..f {
                                x_hat[i * f + j] =
                                    (z.data()[i * f + j] - state.running_mean[j]) * inv_std[j];
                            }
                        }
                        z = out;
                        Some(BnTraceCache::Eval { x_hat, inv_std, shape: vec![batch, f] })
                    }
                }
            } else {
                None
            };

            let is_hidden = l + 1 < n_layers;
            let (relu, dropout_mask) = if is_hidden {
                let (out, cache) = relu_forward(&z);
                z = out;
                let mask = match (mode, masks) {
                    (Mode::Train, Some(m)) if self.spec.dropout_rate > 0.0 => {
                        let mask = m.get(l).ok_or_else(|| {
                            Error::InvalidArgument(format!("missing dropout mask for layer {l}"))
                        })?;
                        z = dropout_forward(&z, self.spec.dropout_rate, mask)?;
                        Some(mask.clone())
                    }
                    _ => None,
                };
                (Some(cache), mask)
            } else {
                (None, None)
            };

            layers.push(LayerTrace { affine, bn: bn_cache, relu, dropout_mask });
            h = z;
        }
        Ok(ForwardTrace { layers, logits: h })
    }

    /// Loss, accuracy, and exact reverse-mode gradients over a minibatch.
    pub fn loss_and_grad(
        &self,
        params: &ParameterVector,
        inputs: &Tensor,
        labels: &[usize],
        masks: Option<&[Tensor]>,
        mode: Mode,
        bn: &BnStats,
    ) -> Result<LossGrad> {
        let trace = self.forward(params, inputs, mode, masks, bn)?;
        let (loss, dlogits, probs) = softmax_xent(&trace.logits, labels)?;
        let accuracy = accuracy_of(&probs, labels);

        let mut grad = params.zeros_like();
        let mut d = dlogits;
        for l in (0..self.spec.num_affine_layers()).rev() {
            let off = &self.offsets[l];
            let tr = &trace.layers[l];
            if let Some(mask) = &tr.dropout_mask {
                d = dropout_backward(&d, self.spec.dropout_rate, mask);
            }
            if let Some(relu) = &tr.relu {
                d = relu_backward(relu, &d);
            }
            if let Some(bn_cache) = &tr.bn {
                let gamma_off = off.gamma.unwrap();
                let beta_off = off.beta.unwrap();
                let gamma = &params.data[gamma_off..gamma_off + off.n_out];
                let (dx, d_gamma, d_beta) = match bn_cache {
                    BnTraceCache::Train(cache) => batchnorm_backward(cache, gamma, &d)?,
                    BnTraceCache::Eval { x_hat, inv_std, shape } => {
                        let (batch, f) = (shape[0], shape[1]);
                        let mut d_gamma = vec![0.0; f];
                        let mut d_beta = vec![0.0; f];
                        let mut dx = vec![0.0; batch * f];
                        for i in 0..batch {
                            for j in 0..f {
                                let go = d.data()[i * f + j];
                                d_gamma[j] += go * x_hat[i * f + j];
                                d_beta[j] += go;
                                dx[i * f + j] = go * gamma[j] * inv_std[j];
                            }
                        }
                        (Tensor::new(vec![batch, f], dx)?, d_gamma, d_beta)
                    }
                };
                grad.data[gamma_off..gamma_off + off.n_out].copy_from_slice(&d_gamma);
                grad.data[beta_off..beta_off + off.n_out].copy_from_slice(&d_beta);
                d = dx;
            }
            let w = &params.data[off.w..off.w + off.n_in * off.n_out];
            let (dx, dw, db) = affine_backward(&tr.affine, w, off.n_in, off.n_out, &d)?;
            grad.data[off.w..off.w + off.n_in * off.n_out].copy_from_slice(&dw);
            grad.data[off.b..off.b + off.n_out].copy_from_slice(&db);
            d = dx;
        }

        let bn_batch_stats = trace
            .layers
            .iter()
            .filter_map(|tr| match &tr.bn {
                Some(BnTraceCache::Train(cache)) => {
                    Some((cache.batch_mean.clone(), cache.unbiased_var()))
                }
                _ => None,
            })
            .collect();

        Ok(LossGrad { loss, accuracy, grad: GradientRecord { grad, loss }, bn_batch_stats })
    }

    /// Pure loss (no gradient) through the same forward path; the basis for
    /// finite-difference checks.
    pub fn loss_only(
        &self,
        params: &ParameterVector,
        inputs: &Tensor,
        labels: &[usize],
        masks: Option<&[Tensor]>,
        mode: Mode,
        bn: &BnStats,
    ) -> Result<f64> {
        let trace = self.forward(params, inputs, mode, masks, bn)?;
        let (loss, _, _) = softmax_xent(&trace.logits, labels)?;
        Ok(loss)
    }

    /// Fold a batch's statistics into the running averages:
    /// `new = (1 - momentum)·old + momentum·batch`.
    pub fn update_running_stats(&self, bn: &mut BnStats, batch_stats: &[(Vec<f64>, Vec<f64>)]) {
        debug_assert_eq!(bn.layers.len(), batch_stats.len());
        for (layer, (mean, var)) in bn.layers.iter_mut().zip(batch_stats) {
            for (r, m) in layer.mean.iter_mut().zip(mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            for (r, v) in layer.var.iter_mut().zip(var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
            }
        }
    }

    /// Recompute running statistics at `params` as the simple average of the
    /// supplied batches' statistics (train-mode normalization, dropout off).
    pub fn collect_bn_stats<'a, I>(&self, params: &ParameterVector, batches: I) -> Result<BnStats>
    where
        I: IntoIterator<Item = &'a Tensor>,
    {
        let mut acc: Option<BnStats> = None;
        let mut count = 0usize;
        for batch in batches {
            let trace = self.forward(params, batch, Mode::Train, None, &self.fresh_bn_stats())?;
            let stats: Vec<(Vec<f64>, Vec<f64>)> = trace
                .layers
                .iter()
                .filter_map(|tr| match &tr.bn {
                    Some(BnTraceCache::Train(c)) => Some((c.batch_mean.clone(), c.unbiased_var())),
                    _ => None,
                })
                .collect();
            match &mut acc {
                None => {
                    acc = Some(BnStats {
                        layers: stats
                            .into_iter()
                            .map(|(mean, var)| BnLayerStats { mean, var })
                            .collect(),
                    });
                }
                Some(acc) => {
                    for (layer, (mean, var)) in acc.layers.iter_mut().zip(&stats) {
                        for (a, m) in layer.mean.iter_mut().zip(mean) {
                            *a += m;
                        }
                        for (a, v) in layer.var.iter_mut().zip(var) {
                            *a += v;
                        }
                    }
                }
            }
            count += 1;
        }
        let mut acc = acc.ok_or_else(|| Error::Data("no batches supplied for statistics".into()))?;
        let inv = 1.0 / count as f64;
        for layer in &mut acc.layers {
            for m in &mut layer.mean {
                *m *= inv;
            }
            for v in &mut layer.var {
                *v *= inv;
            }
        }
        Ok(acc)
    }

    /// Per-example softmax probabilities in eval mode (running statistics,
    /// dropout identity).
    pub fn predict(&self, params: &ParameterVector, inputs: &Tensor, bn: &BnStats) -> Result<Tensor> {
        let trace = self.forward(params, inputs, Mode::Eval, None, bn)?;
        softmax(&trace.logits)
    }

    /// Mean cross-entropy and accuracy over a full dataset split in eval
    /// mode, chunked deterministically.
    pub fn evaluate(
        &self,
        params: &ParameterVector,
        inputs: &Tensor,
        labels: &[usize],
        bn: &BnStats,
    ) -> Result<(f64, f64)> {
        let (n, dim) = inputs.dims2()?;
        if n == 0 {
            return Err(Error::Data("empty dataset".into()));
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut start = 0;
        while start < n {
            let end = (start + EVAL_CHUNK).min(n);
            let chunk = Tensor::new(
                vec![end - start, dim],
                inputs.data()[start * dim..end * dim].to_vec(),
            )?;
            let trace = self.forward(params, &chunk, Mode::Eval, None, bn)?;
            let (loss, _, probs) = softmax_xent(&trace.logits, &labels[start..end])?;
            loss_sum += loss * (end - start) as f64;
            for (i, &label) in labels[start..end].iter().enumerate() {
                if argmax(probs.row(i)) == label {
                    correct += 1;
                }
            }
            start = end;
        }
        Ok((loss_sum / n as f64, correct as f64 / n as f64))
    }
}

/// Fraction of rows whose argmax matches the label (ties to lowest index).
pub fn accuracy_of(probs: &Tensor, labels: &[usize]) -> f64 {
    let (batch, _) = probs.dims2().expect("rank-2 probs");
    let correct = labels
        .iter()
        .enumerate()
        .filter(|(i, &label)| argmax(probs.row(*i)) == label)
        .count();
    correct as f64 / batch as f64
}
