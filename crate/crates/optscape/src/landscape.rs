//! The projection engine: interpolates between checkpoints, refreshes
//! batch-norm statistics at every interpolated point, and evaluates loss and
//! accuracy over 1-D lines and 2-D sheets of weight space.
//!
//! Coordinate convention for every interpolation here: the FIRST argument is
//! the point living at coordinate 1, so `interp_linear(a, b, 1.0)` returns
//! `a` bitwise. Profiles from an initialization to a solution therefore pass
//! `(final, init)` so the solution sits at α = 1.
//!
//! Interpolating stored running statistics would be meaningless, so each
//! evaluated point recomputes them from training data first. A point whose
//! evaluation produces NaN/Inf becomes a "diverged" sample with infinite
//! loss rather than an error; extrapolation sweeps routinely cross such
//! regions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataSplit, Dataset};
use crate::error::{Error, Result};
use crate::model::{BnStats, Model, ParameterVector};

pub const DEFAULT_RESOLUTION_1D: usize = 101;
pub const DEFAULT_RESOLUTION_2D: usize = 25;

/// How many training minibatches feed a batch-norm statistics refresh;
/// 0 means a full pass over the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnRefreshPolicy {
    pub num_batches: usize,
    pub batch_size: usize,
}

impl Default for BnRefreshPolicy {
    fn default() -> Self {
        BnRefreshPolicy { num_batches: 0, batch_size: 128 }
    }
}

impl BnRefreshPolicy {
    pub fn full_pass() -> Self {
        Self::default()
    }

    pub fn batches(num_batches: usize) -> Self {
        BnRefreshPolicy { num_batches, batch_size: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    Linear,
    Bilinear,
    Barycentric,
}

impl InterpolationMode {
    pub fn vertex_count(self) -> usize {
        match self {
            InterpolationMode::Linear => 2,
            InterpolationMode::Bilinear => 4,
            InterpolationMode::Barycentric => 3,
        }
    }

    pub fn is_two_dimensional(self) -> bool {
        !matches!(self, InterpolationMode::Linear)
    }
}

/// A full grid description: mode, vertices, ranges, and points per axis.
pub struct InterpolationSpec {
    pub mode: InterpolationMode,
    pub vertices: Vec<ParameterVector>,
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    pub resolution: usize,
}

impl InterpolationSpec {
    pub fn linear(a: ParameterVector, b: ParameterVector) -> Self {
        InterpolationSpec {
            mode: InterpolationMode::Linear,
            vertices: vec![a, b],
            alpha_range: (0.0, 1.0),
            beta_range: (0.0, 1.0),
            resolution: DEFAULT_RESOLUTION_1D,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.mode.vertex_count();
        if self.vertices.len() != want {
            return Err(Error::InvalidArgument(format!(
                "{:?} interpolation needs {want} vertices, got {}",
                self.mode,
                self.vertices.len()
            )));
        }
        for v in &self.vertices[1..] {
            self.vertices[0].compatible(v)?;
        }
        if self.resolution < 2 {
            return Err(Error::InvalidArgument("resolution must be at least 2".into()));
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl SurfaceSample {
    pub fn diverged(&self) -> bool {
        !self.train_loss.is_finite()
    }
}

// ── Interpolation arithmetic ─────────────────────────────────────────

/// `α·θ₁ + (1-α)·θ₂`; α = 1 returns `θ₁` bitwise. α may lie outside [0, 1]
/// for extrapolation sweeps.
pub fn interp_linear(theta1: &ParameterVector, theta2: &ParameterVector, alpha: f64) -> Result<ParameterVector> {
    theta1.compatible(theta2)?;
    let data = theta1
        .data()
        .iter()
        .zip(theta2.data())
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    theta1.with_data(data)
}

/// Sheet through four vertices: `φ = αθ₁+(1-α)θ₂`, `ϕ = αθ₃+(1-α)θ₄`,
/// result `βφ + (1-β)ϕ`.
pub fn interp_bilinear(
    theta1: &ParameterVector,
    theta2: &ParameterVector,
    theta3: &ParameterVector,
    theta4: &ParameterVector,
    alpha: f64,
    beta: f64,
) -> Result<ParameterVector> {
    theta1.compatible(theta2)?;
    theta1.compatible(theta3)?;
    theta1.compatible(theta4)?;
    let data = (0..theta1.len())
        .map(|i| {
            let phi = alpha * theta1.data()[i] + (1.0 - alpha) * theta2.data()[i];
            let vphi = alpha * theta3.data()[i] + (1.0 - alpha) * theta4.data()[i];
            beta * phi + (1.0 - beta) * vphi
        })
        .collect();
    theta1.with_data(data)
}

/// Triangle with apex `θ₀`: `d₁ = θ₁-θ₀`, `d₂ = θ₂-θ₀`, `φ = αd₁+θ₀`,
/// `ϕ = αd₂+θ₀`, result `βφ + (1-β)ϕ`. Evaluated in the algebraically equal
/// form `φ = αθ₁ + (1-α)θ₀` so vertex recovery (α = 1) is bitwise.
pub fn interp_barycentric(
    theta0: &ParameterVector,
    theta1: &ParameterVector,
    theta2: &ParameterVector,
    alpha: f64,
    beta: f64,
) -> Result<ParameterVector> {
    theta0.compatible(theta1)?;
    theta0.compatible(theta2)?;
    let data = (0..theta0.len())
        .map(|i| {
            let t0 = theta0.data()[i];
            let phi = alpha * theta1.data()[i] + (1.0 - alpha) * t0;
            let vphi = alpha * theta2.data()[i] + (1.0 - alpha) * t0;
            beta * phi + (1.0 - beta) * vphi
        })
        .collect();
    theta0.with_data(data)
}

// ── Point evaluation ─────────────────────────────────────────────────

/// Recompute running statistics at `theta` by streaming training batches in
/// statistics-collection mode (simple average of batch statistics, dropout
/// off). Batches of fewer than two rows are skipped; batch-norm-free models
/// return empty stats without touching the data.
pub fn refresh_bn_stats(
    model: &Model,
    theta: &ParameterVector,
    train: &DataSplit,
    policy: BnRefreshPolicy,
) -> Result<BnStats> {
    if !model.has_batch_norm() {
        return Ok(model.fresh_bn_stats());
    }
    if train.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    let mut batches = train.sequential_batches(policy.batch_size);
    batches.retain(|b| b.shape()[0] >= 2);
    if policy.num_batches > 0 {
        batches.truncate(policy.num_batches);
    }
    if batches.is_empty() {
        return Err(Error::Data("no usable batches for statistics refresh".into()));
    }
    model.collect_bn_stats(theta, batches.iter())
}

/// Refresh statistics per policy, then evaluate mean loss/accuracy over the
/// full train split (and test split when present) in eval mode. NaN/Inf
/// anywhere yields a diverged sample instead of an error.
pub fn evaluate_point(
    model: &Model,
    theta: &ParameterVector,
    data: &Dataset,
    policy: BnRefreshPolicy,
) -> Result<SurfaceSample> {
    let diverged = |sample: &mut SurfaceSample| {
        sample.train_loss = f64::INFINITY;
        sample.train_accuracy = 0.0;
        sample.test_loss = data.test.as_ref().map(|_| f64::INFINITY);
        sample.test_accuracy = data.test.as_ref().map(|_| 0.0);
    };
    let mut sample = SurfaceSample {
        alpha: 0.0,
        beta: None,
        train_loss: f64::INFINITY,
        train_accuracy: 0.0,
        test_loss: None,
        test_accuracy: None,
    };
    let bn = match refresh_bn_stats(model, theta, &data.train, policy) {
        Ok(bn) => bn,
        Err(e) if e.is_non_finite() => {
            diverged(&mut sample);
            return Ok(sample);
        }
        Err(e) => return Err(e),
    };
    match model.evaluate(theta, &data.train.inputs, &data.train.labels, &bn) {
        Ok((loss, acc)) => {
            sample.train_loss = loss;
            sample.train_accuracy = acc;
        }
        Err(e) if e.is_non_finite() => {
            diverged(&mut sample);
            return Ok(sample);
        }
        Err(e) => return Err(e),
    }
    if let Some(test) = &data.test {
        match model.evaluate(theta, &test.inputs, &test.labels, &bn) {
            Ok((loss, acc)) => {
                sample.test_loss = Some(loss);
                sample.test_accuracy = Some(acc);
            }
            Err(e) if e.is_non_finite() => {
                sample.test_loss = Some(f64::INFINITY);
                sample.test_accuracy = Some(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(sample)
}

fn grid(range: (f64, f64), resolution: usize) -> Vec<f64> {
    (0..resolution)
        .map(|i| {
            let t = i as f64 / (resolution - 1) as f64;
            range.0 + t * (range.1 - range.0)
        })
        .collect()
}

/// Evaluate the full α (×β) grid. Grid points are independent read-only
/// evaluations and run in parallel; results are ordered by grid index
/// (α-major) regardless of execution order.
pub fn sweep(
    spec: &InterpolationSpec,
    model: &Model,
    data: &Dataset,
    policy: BnRefreshPolicy,
) -> Result<Vec<SurfaceSample>> {
    spec.validate()?;
    let alphas = grid(spec.alpha_range, spec.resolution);
    let coords: Vec<(f64, Option<f64>)> = if spec.mode.is_two_dimensional() {
        let betas = grid(spec.beta_range, spec.resolution);
        alphas
            .iter()
            .flat_map(|&a| betas.iter().map(move |&b| (a, Some(b))))
            .collect()
    } else {
        alphas.iter().map(|&a| (a, None)).collect()
    };
    let v = &spec.vertices;
    coords
        .into_par_iter()
        .map(|(alpha, beta)| {
            let theta = match spec.mode {
                InterpolationMode::Linear => interp_linear(&v[0], &v[1], alpha)?,
                InterpolationMode::Bilinear => {
                    interp_bilinear(&v[0], &v[1], &v[2], &v[3], alpha, beta.unwrap())?
                }
                InterpolationMode::Barycentric => {
                    interp_barycentric(&v[0], &v[1], &v[2], alpha, beta.unwrap())?
                }
            };
            let mut sample = evaluate_point(model, &theta, data, policy)?;
            sample.alpha = alpha;
            sample.beta = beta;
            Ok(sample)
        })
        .collect()
}

// ── Basin profiles ───────────────────────────────────────────────────

/// 101 α values covering [-0.25, 2] that hit 0 and 1 exactly: `(k-10)/40`
/// for k = 0..=90, then ten extra points extending to 2 reuse the same
/// spacing. Kept simple: exactly `(k-10)/40`, k in 0..=90.
pub fn alpha_grid_default() -> Vec<f64> {
    (0..=90).map(|k| (k as f64 - 10.0) / 40.0).collect()
}

/// Loss along `init + α(final - init)`: α = 0 is the initialization, α = 1
/// the solution, α > 1 overshoots beyond it.
pub fn basin_profile_alpha(
    model: &Model,
    init: &ParameterVector,
    final_params: &ParameterVector,
    alphas: &[f64],
    data: &Dataset,
    policy: BnRefreshPolicy,
) -> Result<Vec<SurfaceSample>> {
    init.compatible(final_params)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let theta = interp_linear(final_params, init, alpha)?;
            let mut sample = evaluate_point(model, &theta, data, policy)?;
            sample.alpha = alpha;
            Ok(sample)
        })
        .collect()
}

/// Loss along the unit-speed ray from the solution toward the
/// initialization: `θ(λ) = final + λ·(init - final)/‖init - final‖`. λ is in
/// absolute weight-space units, so profiles of different runs share an axis.
/// λ = 0 is the solution exactly; λ = ‖init - final‖ is the initialization
/// exactly.
pub fn basin_profile_lambda(
    model: &Model,
    init: &ParameterVector,
    final_params: &ParameterVector,
    lambdas: &[f64],
    data: &Dataset,
    policy: BnRefreshPolicy,
) -> Result<Vec<SurfaceSample>> {
    let dist = final_params.distance(init)?;
    if dist == 0.0 {
        return Err(Error::InvalidArgument(
            "basin profile direction undefined: init equals final".into(),
        ));
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            // θ(λ) = (1 - λ/d)·final + (λ/d)·init, so λ = 0 and λ = d land on
            // the vertices bitwise.
            let theta = interp_linear(init, final_params, lambda / dist)?;
            let mut sample = evaluate_point(model, &theta, data, policy)?;
            sample.alpha = lambda;
            Ok(sample)
        })
        .collect()
}
