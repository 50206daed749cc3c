//! Stochastic gradient optimizers expressed as vector fields consumed by a
//! single fixed-step explicit Euler update `θ' = θ + η·X_t`, a two-stage
//! Runge-Kutta gradient augmentation usable with any of them, and
//! optimizer-switch schedules.
//!
//! Accumulators use the convex-average convention `E[F]_t = (1-β)F_t + β E[F]_{t-1}`.

use serde::{Deserialize, Serialize};

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::model::{BnStats, Model, ParameterVector};
use crate::rng::{draw_uniform, shuffle_indices, Stream, StreamKey};
use crate::tensor::{ensure_finite, Tensor};

// ── Specification ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Sgdm,
    Adagrad,
    Rmsprop,
    Adadelta,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Sgdm => "sgdm",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Rmsprop => "rmsprop",
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Adam => "adam",
        }
    }
}

/// Coefficients of a second-order explicit Runge-Kutta stage combination
/// `a₁k₁ + a₂k₂` with `k₂` evaluated at `θ + q₁·h·k₁`. Consistency requires
/// `a₁ + a₂ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rk2Coeffs {
    pub a1: f64,
    pub a2: f64,
    pub q1: f64,
}

impl Rk2Coeffs {
    pub fn midpoint() -> Self {
        Rk2Coeffs { a1: 0.0, a2: 1.0, q1: 0.5 }
    }

    pub fn heun() -> Self {
        Rk2Coeffs { a1: 0.5, a2: 0.5, q1: 1.0 }
    }

    pub fn ralston() -> Self {
        Rk2Coeffs { a1: 1.0 / 3.0, a2: 2.0 / 3.0, q1: 0.75 }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.a1 + self.a2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "rk2 coefficients must satisfy a1 + a2 = 1, got {} + {}",
                self.a1, self.a2
            )));
        }
        Ok(())
    }
}

/// One optimizer: kind, step size, decay rates, guard, and an optional
/// Runge-Kutta augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Step size for the Euler update. Ignored by adadelta, which always
    /// steps with η = 1.
    pub eta: f64,
    /// First-moment decay (sgdm, adam).
    pub beta1: f64,
    /// Squared-moment decay (rmsprop, adam) or adadelta's ρ.
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rk2: Option<Rk2Coeffs>,
}

impl OptimizerSpec {
    pub fn sgd(eta: f64) -> Self {
        OptimizerSpec { kind: OptimizerKind::Sgd, eta, beta1: 0.0, beta2: 0.0, epsilon: 1e-8, rk2: None }
    }

    pub fn sgdm(eta: f64) -> Self {
        OptimizerSpec { kind: OptimizerKind::Sgdm, eta, beta1: 0.9, beta2: 0.0, epsilon: 1e-8, rk2: None }
    }

    pub fn adagrad(eta: f64) -> Self {
        OptimizerSpec { kind: OptimizerKind::Adagrad, eta, beta1: 0.0, beta2: 0.0, epsilon: 1e-8, rk2: None }
    }

    pub fn rmsprop(eta: f64) -> Self {
        OptimizerSpec { kind: OptimizerKind::Rmsprop, eta, beta1: 0.0, beta2: 0.9, epsilon: 1e-8, rk2: None }
    }

    pub fn adadelta() -> Self {
        OptimizerSpec { kind: OptimizerKind::Adadelta, eta: 1.0, beta1: 0.0, beta2: 0.95, epsilon: 1e-6, rk2: None }
    }

    pub fn adam(eta: f64) -> Self {
        OptimizerSpec { kind: OptimizerKind::Adam, eta, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, rk2: None }
    }

    pub fn with_rk2(mut self, coeffs: Rk2Coeffs) -> Self {
        self.rk2 = Some(coeffs);
        self
    }

    /// The η actually applied: adadelta pins it to 1.
    pub fn effective_eta(&self) -> f64 {
        match self.kind {
            OptimizerKind::Adadelta => 1.0,
            _ => self.eta,
        }
    }

    pub fn label(&self) -> String {
        match self.rk2 {
            Some(_) => format!("{}+rk2", self.kind.name()),
            None => self.kind.name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != OptimizerKind::Adadelta && !(self.eta >= 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be non-negative, got {}", self.eta)));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if let Some(rk2) = &self.rk2 {
            rk2.validate()?;
        }
        Ok(())
    }
}

// ── State ────────────────────────────────────────────────────────────

/// Per-algorithm accumulators, all shaped like the flat parameter vector.
/// Only the buffers a kind needs are allocated.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    /// Step counter (adam bias correction).
    pub t: u64,
    /// Averaged gradient E[g].
    pub m: Vec<f64>,
    /// Averaged squared gradient E[g²].
    pub v: Vec<f64>,
    /// Summed squared gradient (adagrad).
    pub s: Vec<f64>,
    /// Averaged squared update E[X²] (adadelta).
    pub u: Vec<f64>,
}

impl OptimizerState {
    /// Zeroed state for `spec` over `len` parameters.
    pub fn new(spec: &OptimizerSpec, len: usize) -> Self {
        let needs_m = matches!(spec.kind, OptimizerKind::Sgdm | OptimizerKind::Adam);
        let needs_v = matches!(
            spec.kind,
            OptimizerKind::Rmsprop | OptimizerKind::Adadelta | OptimizerKind::Adam
        );
        let needs_s = spec.kind == OptimizerKind::Adagrad;
        let needs_u = spec.kind == OptimizerKind::Adadelta;
        OptimizerState {
            t: 0,
            m: if needs_m { vec![0.0; len] } else { Vec::new() },
            v: if needs_v { vec![0.0; len] } else { Vec::new() },
            s: if needs_s { vec![0.0; len] } else { Vec::new() },
            u: if needs_u { vec![0.0; len] } else { Vec::new() },
        }
    }
}

// ── Vector fields ────────────────────────────────────────────────────

/// Evaluate the optimizer's vector field on gradient `g`, mutating the
/// accumulators exactly once. The caller applies `θ' = θ + η·X`.
pub fn vector_field(spec: &OptimizerSpec, state: &mut OptimizerState, g: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(g, "gradient")?;
    let mut x = vec![0.0; g.len()];
    match spec.kind {
        OptimizerKind::Sgd => {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi = -gi;
            }
        }
        OptimizerKind::Sgdm => {
            let b = spec.beta1;
            for ((xi, mi), gi) in x.iter_mut().zip(&mut state.m).zip(g) {
                *mi = (1.0 - b) * gi + b * *mi;
                *xi = -*mi;
            }
        }
        OptimizerKind::Adagrad => {
            for ((xi, si), gi) in x.iter_mut().zip(&mut state.s).zip(g) {
                *si += gi * gi;
                *xi = -gi / (*si + spec.epsilon).sqrt();
            }
        }
        OptimizerKind::Rmsprop => {
            let b = spec.beta2;
            for ((xi, vi), gi) in x.iter_mut().zip(&mut state.v).zip(g) {
                *vi = (1.0 - b) * gi * gi + b * *vi;
                *xi = -gi / (*vi + spec.epsilon).sqrt();
            }
        }
        OptimizerKind::Adadelta => {
            let rho = spec.beta2;
            for (i, gi) in g.iter().enumerate() {
                state.v[i] = rho * state.v[i] + (1.0 - rho) * gi * gi;
                let step = -((state.u[i] + spec.epsilon).sqrt() / (state.v[i] + spec.epsilon).sqrt()) * gi;
                x[i] = step;
                state.u[i] = rho * state.u[i] + (1.0 - rho) * step * step;
            }
        }
        OptimizerKind::Adam => {
            let (b1, b2) = (spec.beta1, spec.beta2);
            state.t += 1;
            let t = state.t as i32;
            let c_t = (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
            for i in 0..g.len() {
                state.m[i] = (1.0 - b1) * g[i] + b1 * state.m[i];
                state.v[i] = (1.0 - b2) * g[i] * g[i] + b2 * state.v[i];
                x[i] = -c_t * state.m[i] / (state.v[i] + spec.epsilon).sqrt();
            }
        }
    }
    Ok(x)
}

/// Two-stage Runge-Kutta combination of the raw-gradient field `X = -g`:
/// `k₁ = -g(θ)`, `k₂ = -g(θ + q₁·h·k₁)`, and the blended gradient
/// `ḡ = -(a₁k₁ + a₂k₂)` replaces `g` in the base optimizer's field. For
/// plain sgd this reduces to `X = a₁k₁ + a₂k₂` exactly.
pub fn rk2_vector_field<F>(
    spec: &OptimizerSpec,
    state: &mut OptimizerState,
    theta: &ParameterVector,
    mut grad_fn: F,
    h: f64,
) -> Result<Vec<f64>>
where
    F: FnMut(&ParameterVector) -> Result<Vec<f64>>,
{
    let coeffs = spec
        .rk2
        .ok_or_else(|| Error::InvalidArgument("rk2_vector_field called without rk2 coefficients".into()))?;
    coeffs.validate()?;
    let g1 = grad_fn(theta)?;
    // Probe point θ + q₁·h·k₁ with k₁ = -g₁.
    let mut probe = theta.clone();
    for (p, g) in probe.data_mut().iter_mut().zip(&g1) {
        *p -= coeffs.q1 * h * g;
    }
    let g2 = grad_fn(&probe)?;
    let blended: Vec<f64> = g1
        .iter()
        .zip(&g2)
        .map(|(a, b)| coeffs.a1 * a + coeffs.a2 * b)
        .collect();
    let base = OptimizerSpec { rk2: None, ..*spec };
    vector_field(&base, state, &blended)
}

/// Explicit Euler update `θ' = θ + η·X`.
pub fn apply_step(theta: &mut ParameterVector, field: &[f64], eta: f64) -> Result<()> {
    if field.len() != theta.len() {
        return Err(Error::ShapeMismatch(format!(
            "field of {} entries for {} parameters",
            field.len(),
            theta.len()
        )));
    }
    for (p, x) in theta.data_mut().iter_mut().zip(field) {
        *p += eta * x;
    }
    Ok(())
}

// ── Switch schedules ─────────────────────────────────────────────────

/// Ordered optimizer segments; the first starts at epoch 0 and starts
/// strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_epoch: usize,
    pub spec: OptimizerSpec,
}

impl SwitchSchedule {
    pub fn single(spec: OptimizerSpec) -> Self {
        SwitchSchedule { segments: vec![Segment { start_epoch: 0, spec }] }
    }

    pub fn validate(&self, total_epochs: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one segment".into()));
        }
        if self.segments[0].start_epoch != 0 {
            return Err(Error::InvalidArgument("first segment must start at epoch 0".into()));
        }
        for pair in self.segments.windows(2) {
            if pair[1].start_epoch <= pair[0].start_epoch {
                return Err(Error::InvalidArgument("segment starts must strictly increase".into()));
            }
        }
        if let Some(last) = self.segments.last() {
            if last.start_epoch >= total_epochs {
                return Err(Error::InvalidArgument(format!(
                    "segment at epoch {} lies beyond the {total_epochs}-epoch run",
                    last.start_epoch
                )));
            }
        }
        for seg in &self.segments {
            seg.spec.validate()?;
        }
        Ok(())
    }

    fn spec_at(&self, epoch: usize) -> &OptimizerSpec {
        let mut current = &self.segments[0].spec;
        for seg in &self.segments {
            if seg.start_epoch <= epoch {
                current = &seg.spec;
            }
        }
        current
    }

    fn is_boundary(&self, epoch: usize) -> bool {
        self.segments.iter().any(|s| s.start_epoch == epoch && epoch != 0)
    }

    pub fn label(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{}@{}", s.spec.label(), s.start_epoch))
            .collect::<Vec<_>>()
            .join("-")
    }
}

// ── Training loops ───────────────────────────────────────────────────

/// Per-epoch training record.
#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub distance_from_init: f64,
    pub weight_norm: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub optimizer: String,
}

/// A parameter snapshot with provenance, produced at segment boundaries and
/// at the end of a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub optimizer: String,
    pub params: ParameterVector,
    pub bn: BnStats,
}

pub struct RunResult {
    pub init_params: ParameterVector,
    pub final_params: ParameterVector,
    pub final_bn: BnStats,
    pub series: Vec<EpochMetrics>,
    pub snapshots: Vec<Snapshot>,
}

/// Generate this batch's dropout masks on the dropout stream. Mask `(epoch,
/// batch)` occupies a fixed counter window derived from the run geometry, so
/// every run over the same data sees the same masks regardless of optimizer.
fn dropout_masks(
    model: &Model,
    master_seed: u64,
    epoch: usize,
    batch_index: usize,
    batches_per_epoch: usize,
    batch_size: usize,
    rows: usize,
) -> Vec<Tensor> {
    let rate = model.spec().dropout_rate;
    let hidden_sizes: Vec<usize> = model.spec().layer_sizes[1..model.spec().layer_sizes.len() - 1].to_vec();
    let capacity_per_batch: usize = hidden_sizes.iter().map(|w| w * batch_size).sum();
    let base = ((epoch * batches_per_epoch + batch_index) * capacity_per_batch) as u64;
    let mut masks = Vec::with_capacity(hidden_sizes.len());
    let mut offset = 0usize;
    for width in hidden_sizes {
        let mut data = Vec::with_capacity(rows * width);
        for k in 0..rows * width {
            let u = draw_uniform(StreamKey::new(master_seed, Stream::Dropout, base + (offset + k) as u64));
            data.push(if u < rate { 0.0 } else { 1.0 });
        }
        offset += width * batch_size;
        masks.push(Tensor::new(vec![rows, width], data).expect("mask tensor"));
    }
    masks
}

/// One pass over the training data in shuffled minibatches. The shuffle for
/// epoch `e` consumes counters `e·n ..` of the shuffle stream, shared across
/// optimizers.
#[allow(clippy::too_many_arguments)]
pub fn run_epoch(
    model: &Model,
    params: &mut ParameterVector,
    state: &mut OptimizerState,
    spec: &OptimizerSpec,
    bn: &mut BnStats,
    train: &DataSplit,
    init_params: &ParameterVector,
    epoch: usize,
    batch_size: usize,
    master_seed: u64,
) -> Result<EpochMetrics> {
    spec.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(Error::Data("empty dataset".into()));
    }
    let order = shuffle_indices(
        StreamKey::new(master_seed, Stream::Shuffle, (epoch as u64) * (n as u64)),
        n,
    );
    let batches_per_epoch = n.div_ceil(batch_size);
    let eta = spec.effective_eta();
    let use_dropout = model.spec().dropout_rate > 0.0;

    let mut loss_sum = 0.0;
    let mut correct_weighted = 0.0;
    for (batch_index, chunk) in order.chunks(batch_size).enumerate() {
        let (inputs, labels) = train.gather(chunk);
        let masks = if use_dropout {
            Some(dropout_masks(
                model,
                master_seed,
                epoch,
                batch_index,
                batches_per_epoch,
                batch_size,
                chunk.len(),
            ))
        } else {
            None
        };
        let eval = model.loss_and_grad(
            params,
            &inputs,
            &labels,
            masks.as_deref(),
            crate::model::Mode::Train,
            bn,
        )?;
        loss_sum += eval.loss * chunk.len() as f64;
        correct_weighted += eval.accuracy * chunk.len() as f64;
        model.update_running_stats(bn, &eval.bn_batch_stats);

        let field = match spec.rk2 {
            None => vector_field(spec, state, eval.grad.grad.data())?,
            Some(coeffs) => {
                coeffs.validate()?;
                // k₂'s gradient re-evaluates the same minibatch (and masks).
                let mut probe = params.clone();
                for (p, g) in probe.data_mut().iter_mut().zip(eval.grad.grad.data()) {
                    *p -= coeffs.q1 * eta * g;
                }
                let probe_eval = model.loss_and_grad(
                    &probe,
                    &inputs,
                    &labels,
                    masks.as_deref(),
                    crate::model::Mode::Train,
                    bn,
                )?;
                let blended: Vec<f64> = eval
                    .grad
                    .grad
                    .data()
                    .iter()
                    .zip(probe_eval.grad.grad.data())
                    .map(|(a, b)| coeffs.a1 * a + coeffs.a2 * b)
                    .collect();
                let base = OptimizerSpec { rk2: None, ..*spec };
                vector_field(&base, state, &blended)?
            }
        };
        apply_step(params, &field, eta)?;
    }

    Ok(EpochMetrics {
        epoch,
        train_loss: loss_sum / n as f64,
        train_accuracy: correct_weighted / n as f64,
        distance_from_init: params.distance(init_params)?,
        weight_norm: params.norm(),
        test_loss: None,
        test_accuracy: None,
        optimizer: spec.label(),
    })
}

/// Drive a full schedule: one `run_epoch` per epoch, accumulator reset and
/// snapshot at every segment boundary, snapshot at the end. Test metrics are
/// attached every `eval_cadence` epochs when test data exists (0 disables).
#[allow(clippy::too_many_arguments)]
pub fn run_schedule(
    model: &Model,
    init_params: ParameterVector,
    schedule: &SwitchSchedule,
    total_epochs: usize,
    train: &DataSplit,
    test: Option<&DataSplit>,
    batch_size: usize,
    master_seed: u64,
    eval_cadence: usize,
) -> Result<RunResult> {
    schedule.validate(total_epochs)?;
    let mut params = init_params.clone();
    let mut bn = model.fresh_bn_stats();
    let mut spec = *schedule.spec_at(0);
    let mut state = OptimizerState::new(&spec, params.len());
    let mut series = Vec::with_capacity(total_epochs);
    let mut snapshots = Vec::new();

    for epoch in 0..total_epochs {
        if schedule.is_boundary(epoch) {
            snapshots.push(Snapshot {
                epoch,
                optimizer: spec.label(),
                params: params.clone(),
                bn: bn.clone(),
            });
            spec = *schedule.spec_at(epoch);
            state = OptimizerState::new(&spec, params.len());
        }
        let mut metrics = run_epoch(
            model,
            &mut params,
            &mut state,
            &spec,
            &mut bn,
            train,
            &init_params,
            epoch,
            batch_size,
            master_seed,
        )?;
        if eval_cadence > 0 && (epoch + 1) % eval_cadence == 0 {
            if let Some(test) = test {
                let (loss, acc) = model.evaluate(&params, &test.inputs, &test.labels, &bn)?;
                metrics.test_loss = Some(loss);
                metrics.test_accuracy = Some(acc);
            }
        }
        series.push(metrics);
    }

    snapshots.push(Snapshot {
        epoch: total_epochs,
        optimizer: spec.label(),
        params: params.clone(),
        bn: bn.clone(),
    });
    Ok(RunResult { init_params, final_params: params, final_bn: bn, series, snapshots })
}
