//! Post-hoc comparison of solutions: functional distance between the
//! networks two weight vectors define, prediction disagreement, loss-barrier
//! statistics along interpolation paths, and training-trajectory series.

use serde::{Deserialize, Serialize};

use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::landscape::{refresh_bn_stats, BnRefreshPolicy, SurfaceSample};
use crate::model::{BnStats, Model, ParameterVector};
use crate::optim::EpochMetrics;
use crate::tensor::{argmax, Tensor};

/// Everything a pairwise comparison produces, ready for the report file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Provenance of the pair, e.g. "sgd-vs-adam".
    pub path_id: String,
    /// Root-mean-square distance between per-example output probability
    /// vectors; at most sqrt(2).
    pub functional_distance: f64,
    /// Fraction of examples whose argmax predictions differ.
    pub disagreement_rate: f64,
    /// Interior-maximum loss minus the larger endpoint loss along the path.
    /// Positive values certify a separating barrier in the projected space.
    pub bump_height: f64,
    pub endpoint_losses: (f64, f64),
}

const PREDICT_CHUNK: usize = 512;

fn predictions_in_chunks(
    model: &Model,
    params: &ParameterVector,
    bn: &BnStats,
    eval: &DataSplit,
) -> Result<Vec<Tensor>> {
    let (n, dim) = (eval.len(), eval.dim());
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + PREDICT_CHUNK).min(n);
        let chunk = Tensor::new(vec![end - start, dim], eval.inputs.data()[start * dim..end * dim].to_vec())?;
        out.push(model.predict(params, &chunk, bn)?);
        start = end;
    }
    Ok(out)
}

fn paired_predictions(
    model: &Model,
    theta1: &ParameterVector,
    theta2: &ParameterVector,
    refresh_data: &DataSplit,
    eval_data: &DataSplit,
    policy: BnRefreshPolicy,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    if eval_data.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    theta1.compatible(theta2)?;
    let bn1 = refresh_bn_stats(model, theta1, refresh_data, policy)?;
    let bn2 = refresh_bn_stats(model, theta2, refresh_data, policy)?;
    Ok((
        predictions_in_chunks(model, theta1, &bn1, eval_data)?,
        predictions_in_chunks(model, theta2, &bn2, eval_data)?,
    ))
}

/// `sqrt(mean over examples of ‖F(x, θ₁) - F(x, θ₂)‖²)` where `F` returns
/// softmax probabilities. Probabilities rather than logits: they are
/// invariant to the batch-norm scale ambiguity and bounded, so the value
/// lives in [0, sqrt(2)]. Running statistics are refreshed for each θ from
/// `refresh_data` before predicting on `eval_data`.
pub fn functional_distance(
    model: &Model,
    theta1: &ParameterVector,
    theta2: &ParameterVector,
    refresh_data: &DataSplit,
    eval_data: &DataSplit,
    policy: BnRefreshPolicy,
) -> Result<f64> {
    let (p1, p2) = paired_predictions(model, theta1, theta2, refresh_data, eval_data, policy)?;
    let mut sum_sq = 0.0;
    for (a, b) in p1.iter().zip(&p2) {
        let rows = a.shape()[0];
        let classes = a.shape()[1];
        for i in 0..rows {
            let mut d2 = 0.0;
            for j in 0..classes {
                let d = a.data()[i * classes + j] - b.data()[i * classes + j];
                d2 += d * d;
            }
            sum_sq += d2;
        }
    }
    Ok((sum_sq / eval_data.len() as f64).sqrt())
}

/// Fraction of `eval_data` examples where the two networks' argmax labels
/// differ (ties broken to the lowest index on both sides).
pub fn disagreement_rate(
    model: &Model,
    theta1: &ParameterVector,
    theta2: &ParameterVector,
    refresh_data: &DataSplit,
    eval_data: &DataSplit,
    policy: BnRefreshPolicy,
) -> Result<f64> {
    let (p1, p2) = paired_predictions(model, theta1, theta2, refresh_data, eval_data, policy)?;
    let mut differ = 0usize;
    for (a, b) in p1.iter().zip(&p2) {
        for i in 0..a.shape()[0] {
            if argmax(a.row(i)) != argmax(b.row(i)) {
                differ += 1;
            }
        }
    }
    Ok(differ as f64 / eval_data.len() as f64)
}

/// Barrier statistics of a linear path whose first and last samples are the
/// endpoints. `bump_height` compares the interior maximum against the larger
/// endpoint loss, the conservative baseline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BumpStats {
    pub bump_height: f64,
    pub max_interior_loss: f64,
    pub endpoint_losses: (f64, f64),
    pub max_interior_alpha: f64,
}

pub fn bump_statistic(path: &[SurfaceSample]) -> Result<BumpStats> {
    if path.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "bump statistic needs at least 3 samples along the path, got {}",
            path.len()
        )));
    }
    let first = path.first().unwrap();
    let last = path.last().unwrap();
    let endpoint_max = first.train_loss.max(last.train_loss);
    let mut max_interior = f64::NEG_INFINITY;
    let mut max_alpha = first.alpha;
    for s in &path[1..path.len() - 1] {
        if s.train_loss > max_interior {
            max_interior = s.train_loss;
            max_alpha = s.alpha;
        }
    }
    Ok(BumpStats {
        bump_height: max_interior - endpoint_max,
        max_interior_loss: max_interior,
        endpoint_losses: (first.train_loss, last.train_loss),
        max_interior_alpha: max_alpha,
    })
}

/// Aligned per-epoch series plus the near-identity check between
/// distance-from-init and weight norm (they differ by at most the initial
/// norm, by the triangle inequality).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub points: Vec<TrajectoryPoint>,
    pub init_norm: f64,
    /// max over epochs of |distance_from_init - weight_norm|.
    pub max_identity_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub distance_from_init: f64,
    pub weight_norm: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub optimizer: String,
}

pub fn trajectory_series(series: &[EpochMetrics], init_norm: f64) -> TrajectorySeries {
    let points: Vec<TrajectoryPoint> = series
        .iter()
        .map(|m| TrajectoryPoint {
            epoch: m.epoch,
            distance_from_init: m.distance_from_init,
            weight_norm: m.weight_norm,
            train_loss: m.train_loss,
            train_accuracy: m.train_accuracy,
            test_accuracy: m.test_accuracy,
            optimizer: m.optimizer.clone(),
        })
        .collect();
    let max_identity_gap = points
        .iter()
        .map(|p| (p.distance_from_init - p.weight_norm).abs())
        .fold(0.0, f64::max);
    TrajectorySeries { points, init_norm, max_identity_gap }
}

impl TrajectorySeries {
    /// `|distance_from_init - weight_norm| <= ‖θ_init‖` at every epoch.
    pub fn identity_gap_within_init_norm(&self) -> bool {
        self.max_identity_gap <= self.init_norm + 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_dataset;
    use crate::model::{InitScheme, Mode, Model, ModelSpec};

    fn plain_model() -> Model {
        Model::build(ModelSpec { layer_sizes: vec![4, 6, 2], batch_norm: vec![false], dropout_rate: 0.0 })
            .unwrap()
    }

    fn sample(alpha: f64, loss: f64) -> SurfaceSample {
        SurfaceSample {
            alpha,
            beta: None,
            train_loss: loss,
            train_accuracy: 0.0,
            test_loss: None,
            test_accuracy: None,
        }
    }

    #[test]
    fn functional_distance_identity_and_symmetry() {
        let model = plain_model();
        let data = synth_dataset(2, 40, 4, 0.5, 3.0, 0, 3).unwrap();
        let p = model.initialize(InitScheme::XavierUniform, 1).unwrap();
        let q = model.initialize(InitScheme::XavierUniform, 2).unwrap();
        let policy = BnRefreshPolicy::full_pass();
        let same = functional_distance(&model, &p, &p, &data.train, &data.train, policy).unwrap();
        assert_eq!(same, 0.0);
        let pq = functional_distance(&model, &p, &q, &data.train, &data.train, policy).unwrap();
        let qp = functional_distance(&model, &q, &p, &data.train, &data.train, policy).unwrap();
        assert_eq!(pq.to_bits(), qp.to_bits());
        assert!(pq > 0.0);
        assert!(pq <= 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn fully_confident_disagreement_reaches_sqrt_two() {
        // Two networks with saturated, opposite biases: every example gets
        // probability ~1 on different classes, per-example gap ‖e₀-e₁‖ = √2.
        let model = plain_model();
        let data = synth_dataset(2, 30, 4, 0.5, 3.0, 0, 5).unwrap();
        let mut a = model.zero_params();
        let mut b = model.zero_params();
        let entry = model.layout().entries().iter().find(|e| e.name == "layer1.b").unwrap().clone();
        a.data_mut()[entry.offset] = 500.0; // class 0 everywhere
        b.data_mut()[entry.offset + 1] = 500.0; // class 1 everywhere
        let policy = BnRefreshPolicy::full_pass();
        let d = functional_distance(&model, &a, &b, &data.train, &data.train, policy).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-9, "d = {d}");
        let rate = disagreement_rate(&model, &a, &b, &data.train, &data.train, policy).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn disagreement_zero_for_identical_and_one_for_swapped_outputs() {
        let model = plain_model();
        let data = synth_dataset(2, 50, 4, 0.4, 3.0, 0, 7).unwrap();
        // Train a little so no example's top-2 are tied.
        let mut params = model.initialize(InitScheme::XavierUniform, 7).unwrap();
        let bn = model.fresh_bn_stats();
        for _ in 0..60 {
            let out = model
                .loss_and_grad(&params, &data.train.inputs, &data.train.labels, None, Mode::Train, &bn)
                .unwrap();
            for (p, g) in params.data_mut().iter_mut().zip(out.grad.grad.data()) {
                *p -= 0.5 * g;
            }
        }
        let policy = BnRefreshPolicy::full_pass();
        assert_eq!(
            disagreement_rate(&model, &params, &params, &data.train, &data.train, policy).unwrap(),
            0.0
        );
        // Class-permuted twin: swap the output layer's two columns.
        let mut twin = params.clone();
        let w = model.layout().entries().iter().find(|e| e.name == "layer1.w").unwrap().clone();
        let b = model.layout().entries().iter().find(|e| e.name == "layer1.b").unwrap().clone();
        for row in 0..6 {
            twin.data_mut().swap(w.offset + row * 2, w.offset + row * 2 + 1);
        }
        twin.data_mut().swap(b.offset, b.offset + 1);
        let rate = disagreement_rate(&model, &params, &twin, &data.train, &data.train, policy).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn functional_distance_triangle_inequality() {
        let model = plain_model();
        let data = synth_dataset(2, 30, 4, 0.5, 3.0, 0, 11).unwrap();
        let policy = BnRefreshPolicy::full_pass();
        for seed in 0..4u64 {
            let a = model.initialize(InitScheme::XavierUniform, seed * 10).unwrap();
            let b = model.initialize(InitScheme::XavierUniform, seed * 10 + 1).unwrap();
            let c = model.initialize(InitScheme::XavierUniform, seed * 10 + 2).unwrap();
            let ab = functional_distance(&model, &a, &b, &data.train, &data.train, policy).unwrap();
            let ac = functional_distance(&model, &a, &c, &data.train, &data.train, policy).unwrap();
            let cb = functional_distance(&model, &c, &b, &data.train, &data.train, policy).unwrap();
            assert!(ab <= ac + cb + 1e-12, "{ab} > {ac} + {cb}");
        }
    }

    #[test]
    fn bump_arithmetic() {
        let path = vec![sample(0.0, 0.1), sample(0.5, 2.0), sample(1.0, 0.2)];
        let stats = bump_statistic(&path).unwrap();
        assert!((stats.bump_height - 1.8).abs() < 1e-15);
        assert_eq!(stats.endpoint_losses, (0.1, 0.2));
        assert_eq!(stats.max_interior_alpha, 0.5);
    }

    #[test]
    fn bump_monotone_path_is_nonpositive() {
        let path = vec![sample(0.0, 3.0), sample(0.3, 2.0), sample(0.7, 1.0), sample(1.0, 0.5)];
        let stats = bump_statistic(&path).unwrap();
        assert!(stats.bump_height <= 0.0);
    }

    #[test]
    fn bump_constant_path_is_zero() {
        let path = vec![sample(0.0, 1.25), sample(0.5, 1.25), sample(1.0, 1.25)];
        assert_eq!(bump_statistic(&path).unwrap().bump_height, 0.0);
        assert!(bump_statistic(&path[..2]).is_err());
    }

    #[test]
    fn trajectory_identity_gap_bound() {
        use crate::optim::EpochMetrics;
        let series = vec![
            EpochMetrics {
                epoch: 0,
                train_loss: 2.3,
                train_accuracy: 0.1,
                distance_from_init: 0.0,
                weight_norm: 0.05,
                test_loss: None,
                test_accuracy: None,
                optimizer: "sgd".into(),
            },
            EpochMetrics {
                epoch: 1,
                train_loss: 1.0,
                train_accuracy: 0.8,
                distance_from_init: 1.0,
                weight_norm: 1.02,
                test_loss: None,
                test_accuracy: Some(0.75),
                optimizer: "sgd".into(),
            },
        ];
        let traj = trajectory_series(&series, 0.05);
        assert_eq!(traj.points.len(), 2);
        assert_eq!(traj.points[0].distance_from_init, 0.0);
        assert!(traj.identity_gap_within_init_norm());
        let too_small = trajectory_series(&series, 0.001);
        assert!(!too_small.identity_gap_within_init_norm());
    }
}
