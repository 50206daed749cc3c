//! Dense 64-bit tensors and the layer primitives the networks here need:
//! affine, batch normalization, dropout, ReLU, and softmax cross-entropy.
//!
//! Each forward op returns its output together with a cache holding exactly
//! the intermediates its backward needs. Ops are pure functions of inputs
//! plus explicit state; NaN/Inf is always an error, never a silent state.

use crate::error::{Error, Result};

/// Row-major dense tensor of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor { shape: vec![r, c], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

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

    /// Rows/cols for rank-2 tensors.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::ShapeMismatch(format!("expected rank-2 tensor, got {s:?}"))),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let (_, c) = (self.shape[0], self.shape[1]);
        &self.data[i * c..(i + 1) * c]
    }

    /// Errors if any entry is NaN or infinite.
    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        ensure_finite(&self.data, context)
    }
}

pub fn ensure_finite(data: &[f64], context: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { context: context.to_string(), index }),
        None => Ok(()),
    }
}

// ── Affine ───────────────────────────────────────────────────────────

#[derive(Debug)]
pub struct AffineCache {
    /// Input activations, kept for the weight gradient.
    pub x: Tensor,
}

/// `out[i,j] = Σ_k x[i,k]·w[k,j] + b[j]` for `x: [batch, n_in]`,
/// `w: [n_in, n_out]`, `b: [n_out]`.
pub fn affine_forward(x: &Tensor, w: &[f64], b: &[f64], n_in: usize, n_out: usize) -> Result<(Tensor, AffineCache)> {
    let (batch, xc) = x.dims2()?;
    if xc != n_in || w.len() != n_in * n_out || b.len() != n_out {
        return Err(Error::ShapeMismatch(format!(
            "affine: x [{batch}, {xc}] vs w [{n_in}, {n_out}], b [{}]",
            b.len()
        )));
    }
    x.ensure_finite("affine input")?;
    ensure_finite(w, "affine weights")?;
    ensure_finite(b, "affine bias")?;

    let mut out = vec![0.0; batch * n_out];
    for i in 0..batch {
        let xi = &x.data[i * n_in..(i + 1) * n_in];
        let oi = &mut out[i * n_out..(i + 1) * n_out];
        oi.copy_from_slice(b);
        for (k, &xv) in xi.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &w[k * n_out..(k + 1) * n_out];
            for j in 0..n_out {
                oi[j] += xv * wr[j];
            }
        }
    }
    let out = Tensor { shape: vec![batch, n_out], data: out };
    Ok((out, AffineCache { x: x.clone() }))
}

/// Gradients of an affine layer. Returns `(d_x, d_w, d_b)`.
pub fn affine_backward(
    cache: &AffineCache,
    w: &[f64],
    n_in: usize,
    n_out: usize,
    d_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let (batch, _) = cache.x.dims2()?;
    let mut d_x = vec![0.0; batch * n_in];
    let mut d_w = vec![0.0; n_in * n_out];
    let mut d_b = vec![0.0; n_out];
    for i in 0..batch {
        let gi = &d_out.data[i * n_out..(i + 1) * n_out];
        let xi = &cache.x.data[i * n_in..(i + 1) * n_in];
        for j in 0..n_out {
            d_b[j] += gi[j];
        }
        let dxi = &mut d_x[i * n_in..(i + 1) * n_in];
        for k in 0..n_in {
            let wr = &w[k * n_out..(k + 1) * n_out];
            let mut acc = 0.0;
            for j in 0..n_out {
                acc += gi[j] * wr[j];
            }
            dxi[k] = acc;
            let dwr = &mut d_w[k * n_out..(k + 1) * n_out];
            let xv = xi[k];
            if xv != 0.0 {
                for j in 0..n_out {
                    dwr[j] += xv * gi[j];
                }
            }
        }
    }
    Ok((Tensor { shape: vec![batch, n_in], data: d_x }, d_w, d_b))
}

// ── Batch normalization ──────────────────────────────────────────────

/// Per-feature scale/shift plus the running statistics used in eval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
}

impl BatchNormState {
    /// Fresh state: gamma 1, beta 0, running mean 0, running var 1.
    pub fn new(features: usize, epsilon: f64) -> Self {
        BatchNormState {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            epsilon,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.gamma.len();
        if self.beta.len() != f || self.running_mean.len() != f || self.running_var.len() != f {
            return Err(Error::ShapeMismatch(format!(
                "batch norm state lengths differ: gamma {f}, beta {}, mean {}, var {}",
                self.beta.len(),
                self.running_mean.len(),
                self.running_var.len()
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument("batch norm epsilon must be positive".into()));
        }
        if let Some(index) = self.running_var.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative running variance at feature {index}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by batch statistics; cache carries them for backward and
    /// for the caller's running-statistics update.
    Train,
    /// Normalize by running statistics.
    Eval,
}

pub struct BatchNormCache {
    /// Normalized activations (pre gamma/beta).
    pub x_hat: Vec<f64>,
    /// Per-feature `1 / sqrt(var + eps)`.
    pub inv_std: Vec<f64>,
    /// Biased (1/N) batch mean and variance, for the running update.
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    batch: usize,
}

impl BatchNormCache {
    /// Unbiased batch variance (`N/(N-1)` correction), the quantity stored
    /// into running statistics.
    pub fn unbiased_var(&self) -> Vec<f64> {
        let n = self.batch as f64;
        self.batch_var.iter().map(|v| v * n / (n - 1.0)).collect()
    }
}

/// Train mode normalizes by biased batch statistics; eval mode by the stored
/// running statistics. Train mode requires `batch >= 2`. The running update
/// itself is the caller's move (see [`BatchNormCache::unbiased_var`]), which
/// keeps this a pure function.
pub fn batchnorm_forward(x: &Tensor, bn: &BatchNormState, mode: BnMode) -> Result<(Tensor, Option<BatchNormCache>)> {
    let (batch, f) = x.dims2()?;
    bn.validate()?;
    if f != bn.features() {
        return Err(Error::ShapeMismatch(format!(
            "batch norm over {f} features, state has {}",
            bn.features()
        )));
    }
    x.ensure_finite("batch norm input")?;

    match mode {
        BnMode::Train => {
            if batch < 2 {
                return Err(Error::InvalidArgument(
                    "batch norm train mode needs batch >= 2 (variance undefined)".into(),
                ));
            }
            let inv_n = 1.0 / batch as f64;
            let mut mean = vec![0.0; f];
            for i in 0..batch {
                let xi = &x.data[i * f..(i + 1) * f];
                for j in 0..f {
                    mean[j] += xi[j];
                }
            }
            for m in &mut mean {
                *m *= inv_n;
            }
            let mut var = vec![0.0; f];
            for i in 0..batch {
                let xi = &x.data[i * f..(i + 1) * f];
                for j in 0..f {
                    let d = xi[j] - mean[j];
                    var[j] += d * d;
                }
            }
            for v in &mut var {
                *v *= inv_n;
            }
            ensure_finite(&mean, "batch norm batch mean")?;
            ensure_finite(&var, "batch norm batch variance")?;

            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
            let mut out = vec![0.0; batch * f];
            let mut x_hat = vec![0.0; batch * f];
            for i in 0..batch {
                let xi = &x.data[i * f..(i + 1) * f];
                for j in 0..f {
                    let h = (xi[j] - mean[j]) * inv_std[j];
                    x_hat[i * f + j] = h;
                    out[i * f + j] = bn.gamma[j] * h + bn.beta[j];
                }
            }
            let cache = BatchNormCache { x_hat, inv_std, batch_mean: mean, batch_var: var, batch };
            Ok((Tensor { shape: vec![batch, f], data: out }, Some(cache)))
        }
        BnMode::Eval => {
            let inv_std: Vec<f64> =
                bn.running_var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();
            ensure_finite(&inv_std, "batch norm running statistics")?;
            let mut out = vec![0.0; batch * f];
            for i in 0..batch {
                let xi = &x.data[i * f..(i + 1) * f];
                for j in 0..f {
                    out[i * f + j] =
                        bn.gamma[j] * (xi[j] - bn.running_mean[j]) * inv_std[j] + bn.beta[j];
                }
            }
            Ok((Tensor { shape: vec![batch, f], data: out }, None))
        }
    }
}

/// Train-mode backward through the batch statistics.
/// Returns `(d_x, d_gamma, d_beta)`.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    gamma: &[f64],
    d_out: &Tensor,
) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let (batch, f) = d_out.dims2()?;
    let n = batch as f64;
    let mut d_gamma = vec![0.0; f];
    let mut d_beta = vec![0.0; f];
    // Per-feature sums of d_xhat and d_xhat·xhat.
    let mut sum_dxh = vec![0.0; f];
    let mut sum_dxh_xh = vec![0.0; f];
    for i in 0..batch {
        for j in 0..f {
            let go = d_out.data[i * f + j];
            let xh = cache.x_hat[i * f + j];
            d_gamma[j] += go * xh;
            d_beta[j] += go;
            let dxh = go * gamma[j];
            sum_dxh[j] += dxh;
            sum_dxh_xh[j] += dxh * xh;
        }
    }
    let mut d_x = vec![0.0; batch * f];
    for i in 0..batch {
        for j in 0..f {
            let dxh = d_out.data[i * f + j] * gamma[j];
            let xh = cache.x_hat[i * f + j];
            d_x[i * f + j] =
                cache.inv_std[j] / n * (n * dxh - sum_dxh[j] - xh * sum_dxh_xh[j]);
        }
    }
    Ok((Tensor { shape: vec![batch, f], data: d_x }, d_gamma, d_beta))
}

// ── ReLU ─────────────────────────────────────────────────────────────

pub struct ReluCache {
    /// 1.0 where the input was strictly positive.
    pub active: Vec<f64>,
}

pub fn relu_forward(x: &Tensor) -> (Tensor, ReluCache) {
    let mut out = x.clone();
    let mut active = vec![0.0; x.len()];
    for (i, v) in out.data.iter_mut().enumerate() {
        if *v > 0.0 {
            active[i] = 1.0;
        } else {
            *v = 0.0;
        }
    }
    (out, ReluCache { active })
}

pub fn relu_backward(cache: &ReluCache, d_out: &Tensor) -> Tensor {
    let mut d_x = d_out.clone();
    for (g, a) in d_x.data.iter_mut().zip(&cache.active) {
        *g *= a;
    }
    d_x
}

// ── Dropout ──────────────────────────────────────────────────────────

/// Inverted dropout: `out = x ⊙ mask / (1 - rate)`. The mask comes from the
/// caller (generated on the dropout stream) so runs can share masks; eval is
/// the identity and never calls this.
pub fn dropout_forward(x: &Tensor, rate: f64, mask: &Tensor) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mask.shape() != x.shape() {
        return Err(Error::ShapeMismatch(format!(
            "dropout mask shape {:?} vs input {:?}",
            mask.shape(),
            x.shape()
        )));
    }
    let scale = 1.0 / (1.0 - rate);
    let data = x
        .data
        .iter()
        .zip(&mask.data)
        .map(|(v, m)| v * m * scale)
        .collect();
    Ok(Tensor { shape: x.shape.clone(), data })
}

pub fn dropout_backward(d_out: &Tensor, rate: f64, mask: &Tensor) -> Tensor {
    let scale = 1.0 / (1.0 - rate);
    let data = d_out
        .data
        .iter()
        .zip(&mask.data)
        .map(|(g, m)| g * m * scale)
        .collect();
    Tensor { shape: d_out.shape.clone(), data }
}

// ── Softmax cross-entropy ────────────────────────────────────────────

/// Mean negative log-likelihood over the batch plus the logit gradient
/// `(softmax - onehot) / batch`, and the per-row softmax probabilities.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let (batch, classes) = logits.dims2()?;
    if labels.len() != batch {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    logits.ensure_finite("logits")?;

    let mut probs = vec![0.0; batch * classes];
    let mut grad = vec![0.0; batch * classes];
    let inv_n = 1.0 / batch as f64;
    let mut loss = 0.0;
    for i in 0..batch {
        let zi = &logits.data[i * classes..(i + 1) * classes];
        let m = zi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &z in zi {
            denom += (z - m).exp();
        }
        let log_denom = denom.ln();
        loss += -(zi[labels[i]] - m - log_denom);
        for j in 0..classes {
            let p = (zi[j] - m).exp() / denom;
            probs[i * classes + j] = p;
            grad[i * classes + j] = (p - if j == labels[i] { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    loss *= inv_n;
    Ok((
        loss,
        Tensor { shape: vec![batch, classes], data: grad },
        Tensor { shape: vec![batch, classes], data: probs },
    ))
}

/// Softmax rows without a loss (prediction path).
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (batch, classes) = logits.dims2()?;
    logits.ensure_finite("logits")?;
    let mut probs = vec![0.0; batch * classes];
    for i in 0..batch {
        let zi = &logits.data[i * classes..(i + 1) * classes];
        let m = zi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &z in zi {
            denom += (z - m).exp();
        }
        for j in 0..classes {
            probs[i * classes + j] = (zi[j] - m).exp() / denom;
        }
    }
    Ok(Tensor { shape: vec![batch, classes], data: probs })
}

/// Index of the largest entry; ties break to the lowest index so accuracy is
/// deterministic at symmetric points.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}
