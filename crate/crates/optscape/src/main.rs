//! Command-line driver. Argument parsing and dispatch only; all work lives
//! in the library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use optscape::analysis::{bump_statistic, disagreement_rate, functional_distance, ComparisonReport};
use optscape::checkpoint::{load_checkpoint, LoadedCheckpoint};
use optscape::config::RunConfig;
use optscape::data::{load_mnist, Dataset, DatasetSpec};
use optscape::emit::{emit_report, emit_surface};
use optscape::error::{Error, Result};
use optscape::landscape::{
    alpha_grid_default, basin_profile_alpha, basin_profile_lambda, sweep, BnRefreshPolicy,
    InterpolationMode, InterpolationSpec,
};
use optscape::recipes::{run_recipe, run_training, RECIPE_NAMES};

#[derive(Parser)]
#[command(
    name = "optscape",
    version,
    about = "Train small batch-normalized networks with a family of stochastic gradient optimizers and probe the loss landscape between their solutions."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Linear,
    Bilinear,
    Barycentric,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileKind {
    Alpha,
    Lambda,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training schedule from a config file; writes series,
    /// checkpoints, and a canonical config copy under --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the loss surface between checkpoints (2 for linear, 3 for
    /// barycentric, 4 for bilinear), refreshing batch-norm statistics at
    /// every grid point.
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Checkpoint paths; repeat the flag once per vertex.
        #[arg(long = "ckpt", required = true)]
        ckpts: Vec<PathBuf>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Data source: an IDX directory, a run-config JSON, or omitted for
        /// the built-in synthetic task.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Keep only the first N training examples (IDX directories).
        #[arg(long)]
        subset: Option<usize>,
        /// Seed for the synthetic fallback.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Basin profile between an initialization and a final checkpoint.
    Basin {
        #[arg(long)]
        init: PathBuf,
        #[arg(long = "final")]
        final_ckpt: PathBuf,
        #[arg(long, value_enum)]
        profile: ProfileKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Functional distance, label disagreement, and barrier height between
    /// two checkpoints.
    Fdist {
        /// Exactly two checkpoint paths.
        #[arg(long = "ckpt", num_args = 1, required = true)]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Optional report destination (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a canned end-to-end experiment.
    Recipe {
        #[arg(value_parser = RECIPE_NAMES)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// IDX directory; omitted means the synthetic fallback.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

/// Resolve the --data argument: IDX directory, run-config JSON (reuses that
/// run's dataset and seed), or the synthetic default.
fn resolve_data(data: Option<&Path>, subset: Option<usize>, seed: u64) -> Result<Dataset> {
    match data {
        None => DatasetSpec::synth_default().load(seed),
        Some(p) if p.is_dir() => load_mnist(p, subset),
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            cfg.dataset.load(cfg.master_seed)
        }
    }
}

fn load_compatible(paths: &[PathBuf]) -> Result<Vec<LoadedCheckpoint>> {
    let loaded: Vec<LoadedCheckpoint> =
        paths.iter().map(|p| load_checkpoint(p)).collect::<Result<_>>()?;
    for other in &loaded[1..] {
        loaded[0].params.compatible(&other.params)?;
    }
    Ok(loaded)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let artifacts = run_training(&cfg, &out)?;
            let last = artifacts.run.series.last().expect("at least one epoch");
            println!(
                "run {} finished: train loss {:.6}, train acc {:.4}, {} checkpoints under {}",
                artifacts.run.label,
                last.train_loss,
                last.train_accuracy,
                artifacts.checkpoint_paths.len(),
                out.display()
            );
        }
        Command::Sweep { mode, ckpts, grid, out, data, subset, seed } => {
            let mode = match mode {
                SweepMode::Linear => InterpolationMode::Linear,
                SweepMode::Bilinear => InterpolationMode::Bilinear,
                SweepMode::Barycentric => InterpolationMode::Barycentric,
            };
            if ckpts.len() != mode.vertex_count() {
                return Err(Error::InvalidArgument(format!(
                    "{mode:?} needs {} checkpoints, got {}",
                    mode.vertex_count(),
                    ckpts.len()
                )));
            }
            let loaded = load_compatible(&ckpts)?;
            let dataset = resolve_data(data.as_deref(), subset, seed)?;
            let spec = InterpolationSpec {
                mode,
                vertices: loaded.iter().map(|c| c.params.clone()).collect(),
                alpha_range: (0.0, 1.0),
                beta_range: (0.0, 1.0),
                resolution: grid,
            };
            let samples = sweep(&spec, &loaded[0].model, &dataset, BnRefreshPolicy::full_pass())?;
            emit_surface(&out, &samples)?;
            println!("{} samples written to {}", samples.len(), out.display());
        }
        Command::Basin { init, final_ckpt, profile, out, data, subset, seed } => {
            let loaded = load_compatible(&[init, final_ckpt])?;
            let dataset = resolve_data(data.as_deref(), subset, seed)?;
            let model = &loaded[0].model;
            let policy = BnRefreshPolicy::full_pass();
            let samples = match profile {
                ProfileKind::Alpha => basin_profile_alpha(
                    model,
                    &loaded[0].params,
                    &loaded[1].params,
                    &alpha_grid_default(),
                    &dataset,
                    policy,
                )?,
                ProfileKind::Lambda => {
                    let d = loaded[1].params.distance(&loaded[0].params)?;
                    let lambdas: Vec<f64> = (0..61).map(|k| k as f64 / 60.0 * 1.2 * d).collect();
                    basin_profile_lambda(
                        model,
                        &loaded[0].params,
                        &loaded[1].params,
                        &lambdas,
                        &dataset,
                        policy,
                    )?
                }
            };
            emit_surface(&out, &samples)?;
            println!("{} samples written to {}", samples.len(), out.display());
        }
        Command::Fdist { ckpts, data, subset, seed, grid, out } => {
            if ckpts.len() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "fdist compares exactly two checkpoints, got {}",
                    ckpts.len()
                )));
            }
            let loaded = load_compatible(&ckpts)?;
            let dataset = resolve_data(data.as_deref(), subset, seed)?;
            let model = &loaded[0].model;
            let policy = BnRefreshPolicy::full_pass();
            let eval_split = dataset.test.as_ref().unwrap_or(&dataset.train);
            let fdist = functional_distance(
                model,
                &loaded[0].params,
                &loaded[1].params,
                &dataset.train,
                eval_split,
                policy,
            )?;
            let rate = disagreement_rate(
                model,
                &loaded[0].params,
                &loaded[1].params,
                &dataset.train,
                eval_split,
                policy,
            )?;
            let mut spec =
                InterpolationSpec::linear(loaded[0].params.clone(), loaded[1].params.clone());
            spec.resolution = grid;
            let samples = sweep(&spec, model, &dataset, policy)?;
            let bump = bump_statistic(&samples)?;
            let report = ComparisonReport {
                path_id: format!("{}-vs-{}", loaded[0].optimizer, loaded[1].optimizer),
                functional_distance: fdist,
                disagreement_rate: rate,
                bump_height: bump.bump_height,
                endpoint_losses: bump.endpoint_losses,
            };
            println!(
                "functional distance {:.6}, disagreement {:.4}, bump height {:.4} nats",
                report.functional_distance, report.disagreement_rate, report.bump_height
            );
            if let Some(out) = out {
                emit_report(&out, std::slice::from_ref(&report))?;
                println!("report written to {}", out.display());
            }
        }
        Command::Recipe { name, out, data, seed } => {
            run_recipe(&name, &out, data.as_deref(), seed)?;
            println!("recipe {name} artifacts written under {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
