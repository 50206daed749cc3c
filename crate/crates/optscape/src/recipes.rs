//! Canned end-to-end experiments at desk scale, each writing a deterministic
//! output tree. The same functions back the command-line driver, the
//! runnable examples, and the acceptance suite.
//!
//! Every recipe uses digit data when an IDX directory is supplied and falls
//! back to the built-in synthetic blobs otherwise. All four recipes share
//! one protocol: identical initialization, minibatch order, and dropout
//! masks across the optimizers being compared.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{bump_statistic, disagreement_rate, functional_distance, ComparisonReport};
use crate::checkpoint::save_checkpoint;
use crate::config::RunConfig;
use crate::data::{mnist_available, Dataset, DatasetSpec};
use crate::emit::{emit_report, emit_series, emit_surface};
use crate::error::{Error, Result};
use crate::landscape::{
    alpha_grid_default, basin_profile_alpha, basin_profile_lambda, evaluate_point, sweep,
    BnRefreshPolicy, InterpolationSpec, SurfaceSample,
};
use crate::model::{BnStats, InitScheme, Model, ModelSpec, ParameterVector};
use crate::optim::{run_schedule, EpochMetrics, OptimizerSpec, Segment, SwitchSchedule};

pub const RECIPE_NAMES: [&str; 4] = ["bump-fc2", "switch-fc2", "basin-fc2", "exotic-init"];

/// Desk-scale experiment geometry: 20 epochs over ~10k examples in batches
/// of 128.
pub const DESK_EPOCHS: usize = 20;
pub const DESK_MNIST_SUBSET: usize = 10_000;

/// Thresholds for the barrier experiment; the synthetic task is easier to
/// fit, so it demands higher accuracy but certifies smaller barriers.
pub const MNIST_ACC_THRESHOLD: f64 = 0.95;
pub const MNIST_BUMP_THRESHOLD: f64 = 0.5;
pub const SYNTH_ACC_THRESHOLD: f64 = 0.99;
pub const SYNTH_BUMP_THRESHOLD: f64 = 0.3;

/// Pick the dataset: a digit subset when IDX files are present, the given
/// synthetic fallback otherwise. Returns the spec (for run configs) and
/// whether digits were used.
pub fn resolve_dataset_spec(mnist_dir: Option<&Path>, fallback: DatasetSpec) -> (DatasetSpec, bool) {
    match mnist_dir {
        Some(dir) if mnist_available(dir) => (
            DatasetSpec::Mnist { dir: dir.to_path_buf(), subset: Some(DESK_MNIST_SUBSET) },
            true,
        ),
        _ => (fallback, false),
    }
}

/// The four optimizers compared throughout, at the fixed learning rates the
/// experiments use.
pub fn desk_optimizers() -> Vec<OptimizerSpec> {
    vec![
        OptimizerSpec::sgd(0.1),
        OptimizerSpec::sgdm(0.1),
        OptimizerSpec::rmsprop(0.001),
        OptimizerSpec::adam(0.001),
    ]
}

/// One completed training run, in memory.
pub struct TrainedRun {
    pub label: String,
    pub init: ParameterVector,
    pub final_params: ParameterVector,
    pub final_bn: BnStats,
    pub series: Vec<EpochMetrics>,
}

/// Artifacts `run_training` leaves on disk, plus the in-memory results.
pub struct TrainingArtifacts {
    pub model: Model,
    pub dataset: Dataset,
    pub run: TrainedRun,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Execute one run config and write its artifact directory: a canonical
/// config copy, the per-epoch series, and checkpoints (initialization,
/// every switch boundary, final). Each checkpoint records the eval loss at
/// save time, measured with freshly recomputed batch-norm statistics.
pub fn run_training(config: &RunConfig, out_dir: &Path) -> Result<TrainingArtifacts> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let dataset = config.dataset.load(config.master_seed)?;
    let model = Model::build(config.model.clone())?;
    let init = model.initialize(config.init, config.master_seed)?;

    let result = run_schedule(
        &model,
        init.clone(),
        &config.schedule,
        config.total_epochs,
        &dataset.train,
        dataset.test.as_ref(),
        config.batch_size,
        config.master_seed,
        config.eval_cadence,
    )?;

    config.save(&out_dir.join("config.json"))?;
    emit_series(&out_dir.join("series.csv"), &result.series)?;

    let policy = BnRefreshPolicy { num_batches: 0, batch_size: config.batch_size };
    let mut checkpoint_paths = Vec::new();

    let record = |params: &ParameterVector| -> Result<Option<f64>> {
        let sample = evaluate_point(&model, params, &dataset, policy)?;
        Ok(sample.train_loss.is_finite().then_some(sample.train_loss))
    };

    let init_path = out_dir.join("init.ckpt");
    let init_bn = crate::landscape::refresh_bn_stats(&model, &init, &dataset.train, policy)?;
    save_checkpoint(
        &init_path,
        &model,
        &init,
        &init_bn,
        "init",
        0,
        config.master_seed,
        record(&init)?,
    )?;
    checkpoint_paths.push(init_path);

    for snap in &result.snapshots {
        let path = out_dir.join(format!("epoch{:03}_{}.ckpt", snap.epoch, snap.optimizer));
        save_checkpoint(
            &path,
            &model,
            &snap.params,
            &snap.bn,
            &snap.optimizer,
            snap.epoch,
            config.master_seed,
            record(&snap.params)?,
        )?;
        checkpoint_paths.push(path);
    }

    let label = config.schedule.label();
    Ok(TrainingArtifacts {
        model,
        dataset,
        run: TrainedRun {
            label,
            init: result.init_params,
            final_params: result.final_params,
            final_bn: result.final_bn,
            series: result.series,
        },
        checkpoint_paths,
    })
}

fn desk_config(
    dataset: DatasetSpec,
    schedule: SwitchSchedule,
    init: InitScheme,
    master_seed: u64,
) -> Result<RunConfig> {
    let input_dim = dataset.input_dim()?;
    Ok(RunConfig {
        model: ModelSpec::fc2_with_input(input_dim),
        dataset,
        init,
        schedule,
        total_epochs: DESK_EPOCHS,
        batch_size: 128,
        master_seed,
        eval_cadence: 1,
    })
}

// ── bump-fc2 ─────────────────────────────────────────────────────────

pub struct BumpArtifacts {
    pub model: Model,
    pub dataset: Dataset,
    pub runs: Vec<TrainedRun>,
    pub pair_sweeps: Vec<(String, Vec<SurfaceSample>)>,
    pub reports: Vec<ComparisonReport>,
    pub used_mnist: bool,
    pub acc_threshold: f64,
    pub bump_threshold: f64,
}

/// Train the four shared-seed optimizer runs into `out_dir/runs/<label>`.
pub fn train_quartet(
    out_dir: &Path,
    dataset_spec: &DatasetSpec,
    master_seed: u64,
) -> Result<(Model, Dataset, Vec<TrainedRun>)> {
    fs::create_dir_all(out_dir.join("runs"))?;
    let mut runs = Vec::new();
    let mut model = None;
    let mut dataset = None;
    for spec in desk_optimizers() {
        let config = desk_config(
            dataset_spec.clone(),
            SwitchSchedule::single(spec),
            InitScheme::XavierNarrow,
            master_seed,
        )?;
        let label = spec.label();
        let artifacts = run_training(&config, &out_dir.join("runs").join(&label))?;
        let mut run = artifacts.run;
        run.label = label;
        runs.push(run);
        model = Some(artifacts.model);
        dataset = Some(artifacts.dataset);
    }
    Ok((model.expect("at least one run"), dataset.expect("at least one run"), runs))
}

/// Train the four optimizers from one shared initialization with shared
/// shuffles, then sweep the line between every pair of final points (with
/// per-point statistics refresh) and report barrier height, functional
/// distance, and label disagreement per pair.
pub fn bump_fc2(out_dir: &Path, mnist_dir: Option<&Path>, master_seed: u64) -> Result<BumpArtifacts> {
    let (dataset_spec, used_mnist) = resolve_dataset_spec(mnist_dir, DatasetSpec::synth_default());
    fs::create_dir_all(out_dir.join("sweeps"))?;
    let (model, dataset, runs) = train_quartet(out_dir, &dataset_spec, master_seed)?;

    let policy = BnRefreshPolicy::full_pass();
    let eval_split = dataset.test.as_ref().unwrap_or(&dataset.train);
    let mut pair_sweeps = Vec::new();
    let mut reports = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (a, b) = (&runs[i], &runs[j]);
            let pair_id = format!("{}-vs-{}", a.label, b.label);
            // b's final lives at alpha = 0, a's at alpha = 1.
            let spec = InterpolationSpec::linear(a.final_params.clone(), b.final_params.clone());
            let samples = sweep(&spec, &model, &dataset, policy)?;
            emit_surface(&out_dir.join("sweeps").join(format!("{pair_id}.csv")), &samples)?;
            let bump = bump_statistic(&samples)?;
            let fdist = functional_distance(
                &model,
                &a.final_params,
                &b.final_params,
                &dataset.train,
                eval_split,
                policy,
            )?;
            let rate = disagreement_rate(
                &model,
                &a.final_params,
                &b.final_params,
                &dataset.train,
                eval_split,
                policy,
            )?;
            reports.push(ComparisonReport {
                path_id: pair_id.clone(),
                functional_distance: fdist,
                disagreement_rate: rate,
                bump_height: bump.bump_height,
                endpoint_losses: bump.endpoint_losses,
            });
            pair_sweeps.push((pair_id, samples));
        }
    }
    emit_report(&out_dir.join("report.json"), &reports)?;

    let (acc_threshold, bump_threshold) = if used_mnist {
        (MNIST_ACC_THRESHOLD, MNIST_BUMP_THRESHOLD)
    } else {
        (SYNTH_ACC_THRESHOLD, SYNTH_BUMP_THRESHOLD)
    };
    Ok(BumpArtifacts {
        model,
        dataset,
        runs,
        pair_sweeps,
        reports,
        used_mnist,
        acc_threshold,
        bump_threshold,
    })
}

// ── switch-fc2 ───────────────────────────────────────────────────────

pub struct SwitchArtifacts {
    pub model: Model,
    pub dataset: Dataset,
    pub adam_run: TrainedRun,
    pub sgd_run: TrainedRun,
    pub switched_run: TrainedRun,
    pub switch_epoch: usize,
    pub sweep_samples: Vec<SurfaceSample>,
    pub report: ComparisonReport,
}

/// One optimizer switch halfway through training: adam for the first half,
/// sgd for the second, next to pure-adam and pure-sgd controls. Emits all
/// three series (distance-from-init included) and the post-hoc sweep
/// between the switched run's final point and pure adam's.
pub fn switch_fc2(out_dir: &Path, mnist_dir: Option<&Path>, master_seed: u64) -> Result<SwitchArtifacts> {
    let (dataset_spec, _) = resolve_dataset_spec(mnist_dir, DatasetSpec::synth_default());
    let switch_epoch = DESK_EPOCHS / 2;
    fs::create_dir_all(out_dir.join("runs"))?;
    fs::create_dir_all(out_dir.join("sweeps"))?;

    let adam = OptimizerSpec::adam(0.001);
    let sgd = OptimizerSpec::sgd(0.1);
    let schedules = [
        ("adam-pure", SwitchSchedule::single(adam)),
        ("sgd-pure", SwitchSchedule::single(sgd)),
        (
            "adam-to-sgd",
            SwitchSchedule {
                segments: vec![
                    Segment { start_epoch: 0, spec: adam },
                    Segment { start_epoch: switch_epoch, spec: sgd },
                ],
            },
        ),
    ];
    let mut done = Vec::new();
    let mut model = None;
    let mut dataset = None;
    for (label, schedule) in schedules {
        let config =
            desk_config(dataset_spec.clone(), schedule, InitScheme::XavierNarrow, master_seed)?;
        let artifacts = run_training(&config, &out_dir.join("runs").join(label))?;
        let mut run = artifacts.run;
        run.label = label.to_string();
        done.push(run);
        model = Some(artifacts.model);
        dataset = Some(artifacts.dataset);
    }
    let model = model.expect("runs completed");
    let dataset = dataset.expect("runs completed");
    let switched_run = done.pop().expect("three runs");
    let sgd_run = done.pop().expect("three runs");
    let adam_run = done.pop().expect("three runs");

    let policy = BnRefreshPolicy::full_pass();
    let spec = InterpolationSpec::linear(switched_run.final_params.clone(), adam_run.final_params.clone());
    let sweep_samples = sweep(&spec, &model, &dataset, policy)?;
    emit_surface(&out_dir.join("sweeps").join("adam-to-sgd-vs-adam-pure.csv"), &sweep_samples)?;
    let bump = bump_statistic(&sweep_samples)?;
    let eval_split = dataset.test.as_ref().unwrap_or(&dataset.train);
    let report = ComparisonReport {
        path_id: "adam-to-sgd-vs-adam-pure".into(),
        functional_distance: functional_distance(
            &model,
            &switched_run.final_params,
            &adam_run.final_params,
            &dataset.train,
            eval_split,
            policy,
        )?,
        disagreement_rate: disagreement_rate(
            &model,
            &switched_run.final_params,
            &adam_run.final_params,
            &dataset.train,
            eval_split,
            policy,
        )?,
        bump_height: bump.bump_height,
        endpoint_losses: bump.endpoint_losses,
    };
    emit_report(&out_dir.join("report.json"), std::slice::from_ref(&report))?;

    Ok(SwitchArtifacts {
        model,
        dataset,
        adam_run,
        sgd_run,
        switched_run,
        switch_epoch,
        sweep_samples,
        report,
    })
}

// ── basin-fc2 ────────────────────────────────────────────────────────

pub struct BasinProfile {
    pub label: String,
    pub alpha_samples: Vec<SurfaceSample>,
    pub lambda_samples: Vec<SurfaceSample>,
    pub init_final_distance: f64,
}

pub struct BasinArtifacts {
    pub profiles: Vec<BasinProfile>,
}

/// Profile each trained run's basin: loss along `init + α(final - init)` on
/// the default α grid (α ∈ [-0.25, 2], hitting 0 and 1 exactly), and along
/// the unit-speed ray from the final point toward the initialization on one
/// shared λ grid so widths are directly comparable across optimizers.
pub fn basin_profiles_for_runs(
    out_dir: &Path,
    model: &Model,
    dataset: &Dataset,
    runs: &[TrainedRun],
) -> Result<BasinArtifacts> {
    fs::create_dir_all(out_dir.join("profiles"))?;
    let policy = BnRefreshPolicy::full_pass();
    let alphas = alpha_grid_default();

    let max_dist = runs
        .iter()
        .map(|r| r.final_params.distance(&r.init).unwrap_or(0.0))
        .fold(0.0f64, f64::max);
    if max_dist == 0.0 {
        return Err(Error::InvalidArgument("runs never moved away from initialization".into()));
    }
    // Shared λ grid: 0 .. 1.2·(largest init-to-final distance), 61 points.
    let lambdas: Vec<f64> = (0..61).map(|k| k as f64 / 60.0 * 1.2 * max_dist).collect();

    let mut profiles = Vec::new();
    for run in runs {
        let alpha_samples =
            basin_profile_alpha(model, &run.init, &run.final_params, &alphas, dataset, policy)?;
        let lambda_samples =
            basin_profile_lambda(model, &run.init, &run.final_params, &lambdas, dataset, policy)?;
        emit_surface(
            &out_dir.join("profiles").join(format!("{}_alpha.csv", run.label)),
            &alpha_samples,
        )?;
        emit_surface(
            &out_dir.join("profiles").join(format!("{}_lambda.csv", run.label)),
            &lambda_samples,
        )?;
        profiles.push(BasinProfile {
            label: run.label.clone(),
            alpha_samples,
            lambda_samples,
            init_final_distance: run.final_params.distance(&run.init)?,
        });
    }
    Ok(BasinArtifacts { profiles })
}

/// Train the four-optimizer quartet, then emit basin profiles per run. The
/// synthetic fallback here carries a realistic mislabeled fraction so each
/// profile turns back up once the solution's logits are scaled past α = 1.
pub fn basin_fc2(out_dir: &Path, mnist_dir: Option<&Path>, master_seed: u64) -> Result<BasinArtifacts> {
    let (dataset_spec, _) = resolve_dataset_spec(mnist_dir, DatasetSpec::synth_basin_default());
    let (model, dataset, runs) = train_quartet(out_dir, &dataset_spec, master_seed)?;
    basin_profiles_for_runs(out_dir, &model, &dataset, &runs)
}

// ── exotic-init ──────────────────────────────────────────────────────

pub struct ExoticArtifacts {
    pub no_bn_series: Vec<EpochMetrics>,
    pub with_bn_series: Vec<EpochMetrics>,
    /// Accuracy of the best constant predictor (majority class frequency).
    pub chance_level: f64,
}

/// Start from weights drawn from a far-off gaussian (mean -10, std 0.01)
/// and train with plain sgd, once without batch normalization and once with
/// it. Without normalization every hidden unit is saturated, gradients
/// through the weights vanish, and the network never leaves chance level;
/// with normalization it trains.
pub fn exotic_init(out_dir: &Path, mnist_dir: Option<&Path>, master_seed: u64) -> Result<ExoticArtifacts> {
    let (dataset_spec, _) = resolve_dataset_spec(mnist_dir, DatasetSpec::synth_nonnegative_default());
    fs::create_dir_all(out_dir.join("runs"))?;
    let init = InitScheme::Gaussian { mean: -10.0, std: 0.01 };
    let schedule = SwitchSchedule::single(OptimizerSpec::sgd(0.01));

    let mut with_bn_cfg = desk_config(dataset_spec.clone(), schedule.clone(), init, master_seed)?;
    with_bn_cfg.model = ModelSpec::fc2_with_input(dataset_spec.input_dim()?);
    let mut no_bn_cfg = with_bn_cfg.clone();
    no_bn_cfg.model = no_bn_cfg.model.without_batch_norm();

    let no_bn = run_training(&no_bn_cfg, &out_dir.join("runs").join("no-bn"))?;
    let with_bn = run_training(&with_bn_cfg, &out_dir.join("runs").join("with-bn"))?;

    let labels = &no_bn.dataset.train.labels;
    let classes = no_bn.dataset.classes;
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let chance_level = counts.iter().copied().max().unwrap_or(0) as f64 / labels.len() as f64;

    let summary = serde_json::json!({
        "chance_level": chance_level,
        "no_bn_final_train_acc": no_bn.run.series.last().map(|m| m.train_accuracy),
        "with_bn_final_train_acc": with_bn.run.series.last().map(|m| m.train_accuracy),
    });
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary).unwrap() + "\n")?;

    Ok(ExoticArtifacts {
        no_bn_series: no_bn.run.series,
        with_bn_series: with_bn.run.series,
        chance_level,
    })
}

/// Dispatch by recipe name (the command-line entry point).
pub fn run_recipe(name: &str, out_dir: &Path, mnist_dir: Option<&Path>, master_seed: u64) -> Result<()> {
    match name {
        "bump-fc2" => {
            bump_fc2(out_dir, mnist_dir, master_seed)?;
        }
        "switch-fc2" => {
            switch_fc2(out_dir, mnist_dir, master_seed)?;
        }
        "basin-fc2" => {
            basin_fc2(out_dir, mnist_dir, master_seed)?;
        }
        "exotic-init" => {
            exotic_init(out_dir, mnist_dir, master_seed)?;
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown recipe {other:?}; available: {}",
                RECIPE_NAMES.join(", ")
            )))
        }
    }
    Ok(())
}
