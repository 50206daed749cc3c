//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with its measurements (run with `-- --nocapture` to see them on success).
//!
//! Experiments use the digit data under `$OPTSCAPE_MNIST_DIR` when that
//! directory holds IDX files, and the built-in synthetic tasks otherwise.
//! Two checks — the pairwise barrier threshold and the switched-run barrier
//! sign — are known not to hold on the synthetic fallback, where runs
//! trained from a shared initialization with shared minibatch order stay
//! linearly connected; their tests report the measured values and fail
//! honestly rather than loosening the thresholds.

use std::path::PathBuf;
use std::sync::OnceLock;

use optscape::analysis::bump_statistic;
use optscape::data::DatasetSpec;
use optscape::landscape::{
    basin_profile_lambda, evaluate_point, interp_barycentric, interp_bilinear, interp_linear,
    refresh_bn_stats, sweep, BnRefreshPolicy, InterpolationSpec,
};
use optscape::model::{InitScheme, Mode, Model, ModelSpec};
use optscape::optim::{apply_step, rk2_vector_field, vector_field, OptimizerSpec, OptimizerState, Rk2Coeffs};
use optscape::recipes::{basin_fc2, bump_fc2, exotic_init, switch_fc2, BasinArtifacts, BumpArtifacts, SwitchArtifacts};
use optscape::rng::{draw_gaussian, draw_uniform, Stream, StreamKey};
use optscape::tensor::Tensor;

const MASTER_SEED: u64 = 42;

fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("OPTSCAPE_MNIST_DIR")?);
    optscape::data::mnist_available(&dir).then_some(dir)
}

fn bump_fixture() -> &'static (tempfile::TempDir, BumpArtifacts) {
    static FIXTURE: OnceLock<(tempfile::TempDir, BumpArtifacts)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let artifacts = bump_fc2(dir.path(), mnist_dir().as_deref(), MASTER_SEED).expect("bump recipe");
        (dir, artifacts)
    })
}

fn switch_fixture() -> &'static (tempfile::TempDir, SwitchArtifacts) {
    static FIXTURE: OnceLock<(tempfile::TempDir, SwitchArtifacts)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let artifacts =
            switch_fc2(dir.path(), mnist_dir().as_deref(), MASTER_SEED).expect("switch recipe");
        (dir, artifacts)
    })
}

fn basin_fixture() -> &'static (tempfile::TempDir, BasinArtifacts) {
    static FIXTURE: OnceLock<(tempfile::TempDir, BasinArtifacts)> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let artifacts =
            basin_fc2(dir.path(), mnist_dir().as_deref(), MASTER_SEED).expect("basin recipe");
        (dir, artifacts)
    })
}

fn report(name: &str, pass: bool, details: &str) {
    println!("[acceptance] {}: {name} ({details})", if pass { "PASS" } else { "FAIL" });
}

// ── 1. Gradient oracle ───────────────────────────────────────────────

#[test]
fn c01_gradient_oracle() {
    const H: f64 = 1e-5;
    const REL: f64 = 1e-4;
    const ABS: f64 = 1e-7;
    let spec = ModelSpec { layer_sizes: vec![20, 10, 5], batch_norm: vec![true], dropout_rate: 0.0 };
    let model = Model::build(spec).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let params = model.initialize(InitScheme::XavierUniform, seed).unwrap();
        let batch = 16;
        let x_data: Vec<f64> = (0..batch * 20)
            .map(|i| draw_gaussian(StreamKey::new(seed + 500, Stream::DataSynth, i as u64)))
            .collect();
        let x = Tensor::new(vec![batch, 20], x_data).unwrap();
        let labels: Vec<usize> = (0..batch)
            .map(|i| (draw_uniform(StreamKey::new(seed + 900, Stream::DataSynth, i as u64)) * 5.0) as usize)
            .collect();
        let bn = model.fresh_bn_stats();
        let analytic = model
            .loss_and_grad(&params, &x, &labels, None, Mode::Train, &bn)
            .unwrap();
        let mut probe = params.clone();
        for i in 0..params.len() {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + H;
            let up = model.loss_only(&probe, &x, &labels, None, Mode::Train, &bn).unwrap();
            probe.data_mut()[i] = orig - H;
            let down = model.loss_only(&probe, &x, &labels, None, Mode::Train, &bn).unwrap();
            probe.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.grad.grad.data()[i];
            let diff = (a - numeric).abs();
            let rel = diff / a.abs().max(numeric.abs()).max(1e-300);
            if diff > ABS {
                worst = worst.max(rel);
            }
            assert!(
                diff <= ABS || rel <= REL,
                "seed {seed}, component {i}: analytic {a}, numeric {numeric}"
            );
        }
    }
    report("gradient-oracle", true, &format!("20 seeds x 285 components, worst rel err {worst:.2e}"));
}

// ── 2. RK2 convergence order ─────────────────────────────────────────

#[test]
fn c02_rk2_convergence_order() {
    let integrate = |coeffs: Option<Rk2Coeffs>, h: f64| -> f64 {
        let steps = (1.0 / h).round() as usize;
        let model = Model::build(ModelSpec {
            layer_sizes: vec![1, 1],
            batch_norm: vec![],
            dropout_rate: 0.0,
        })
        .unwrap();
        let mut theta = model.params_from_data(vec![1.0, 0.0]).unwrap();
        let spec = match coeffs {
            Some(c) => OptimizerSpec::sgd(1.0).with_rk2(c),
            None => OptimizerSpec::sgd(1.0),
        };
        let mut state = OptimizerState::new(&spec, theta.len());
        for _ in 0..steps {
            // dθ/dt = -θ means the "gradient" is θ itself.
            let field = match coeffs {
                Some(_) => {
                    rk2_vector_field(&spec, &mut state, &theta, |p| Ok(p.data().to_vec()), h).unwrap()
                }
                None => vector_field(&spec, &mut state, &theta.data().to_vec()).unwrap(),
            };
            apply_step(&mut theta, &field, h).unwrap();
        }
        (theta.data()[0] - (-1.0f64).exp()).abs()
    };
    let mut all = true;
    let mut details = String::new();
    for (name, coeffs) in [
        ("midpoint", Rk2Coeffs::midpoint()),
        ("heun", Rk2Coeffs::heun()),
        ("ralston", Rk2Coeffs::ralston()),
    ] {
        let ratio = integrate(Some(coeffs), 0.1) / integrate(Some(coeffs), 0.05);
        details.push_str(&format!("{name} {ratio:.2}, "));
        all &= (3.5..=4.5).contains(&ratio);
        assert!((3.5..=4.5).contains(&ratio), "{name} error ratio {ratio}");
    }
    let euler = integrate(None, 0.1) / integrate(None, 0.05);
    details.push_str(&format!("euler {euler:.2}"));
    all &= (1.8..=2.2).contains(&euler);
    assert!((1.8..=2.2).contains(&euler), "euler error ratio {euler}");
    report("rk2-convergence-order", all, &details);
}

// ── 3. Optimizer closed forms ────────────────────────────────────────

#[test]
fn c03_optimizer_closed_forms() {
    // Adam's first step against the exact closed form
    // X₁ = -g/sqrt(g² + ε/(1-β₂)), for every |g| down to 1e-3.
    let spec = OptimizerSpec::adam(0.001);
    let gs: Vec<f64> = vec![1e-3, -2e-3, 0.01, -0.1, 0.32, -1.0, 4.0, 10.0];
    let mut state = OptimizerState::new(&spec, gs.len());
    let x = vector_field(&spec, &mut state, &gs).unwrap();
    for (xi, gi) in x.iter().zip(&gs) {
        let closed = -gi / (gi * gi + spec.epsilon / (1.0 - spec.beta2)).sqrt();
        let rel = ((xi - closed) / closed).abs();
        assert!(rel < 1e-12, "closed form mismatch at g = {gi}: {xi} vs {closed}");
    }
    // Sign property: X₁ = -sign(g) within 1e-6 relative wherever the guard
    // bound ε/sqrt(v) = ε/(sqrt(1-β₂)|g|) allows it, i.e. |g| >= 0.32. At
    // |g| = 1e-3 the guard dominates v = (1-β₂)g² entirely, so the measured
    // deviation there is reported rather than asserted.
    for (xi, gi) in x.iter().zip(&gs) {
        if gi.abs() >= 0.32 {
            let rel = (xi + gi.signum()).abs();
            assert!(rel < 1e-6, "sign property at g = {gi}: X = {xi}");
        }
    }
    let small = x[0];
    let small_dev = (small + 1.0f64.copysign(gs[0])).abs();

    // Adagrad: the per-coordinate step scale 1/sqrt(s+ε) never grows over
    // 100 random-gradient steps, and the step magnitude itself shrinks
    // strictly under a constant gradient.
    let aspec = OptimizerSpec::adagrad(0.01);
    let mut astate = OptimizerState::new(&aspec, 8);
    let mut prev_scale: Option<Vec<f64>> = None;
    for step in 0..100u64 {
        let g: Vec<f64> = (0..8)
            .map(|i| draw_gaussian(StreamKey::new(7, Stream::DataSynth, step * 8 + i)))
            .collect();
        vector_field(&aspec, &mut astate, &g).unwrap();
        let scale: Vec<f64> = astate.s.iter().map(|s| 1.0 / (s + aspec.epsilon).sqrt()).collect();
        if let Some(prev) = &prev_scale {
            for (now, before) in scale.iter().zip(prev) {
                assert!(now <= before, "adagrad step scale grew");
            }
        }
        prev_scale = Some(scale);
    }
    let mut cstate = OptimizerState::new(&aspec, 1);
    let mut prev_mag = f64::INFINITY;
    for _ in 0..100 {
        let x = vector_field(&aspec, &mut cstate, &[0.5]).unwrap();
        assert!(x[0].abs() < prev_mag, "constant-gradient adagrad step did not shrink");
        prev_mag = x[0].abs();
    }

    // Momentum closed form m_t = (1 - β^t)·g under a constant gradient.
    let mspec = OptimizerSpec::sgdm(0.1);
    let mut mstate = OptimizerState::new(&mspec, 2);
    let g = [1.75, -0.3];
    for t in 1..=100i32 {
        let x = vector_field(&mspec, &mut mstate, &g).unwrap();
        for (xi, gi) in x.iter().zip(&g) {
            let expected = -(1.0 - mspec.beta1.powi(t)) * gi;
            assert!((xi - expected).abs() <= 1e-12, "momentum closed form at t = {t}");
        }
    }

    // Adadelta ignores the configured η entirely.
    let d1 = OptimizerSpec { eta: 0.1, ..OptimizerSpec::adadelta() };
    let d2 = OptimizerSpec { eta: 9.0, ..OptimizerSpec::adadelta() };
    let model = Model::build(ModelSpec { layer_sizes: vec![3, 2], batch_norm: vec![], dropout_rate: 0.0 })
        .unwrap();
    let mut t1 = model.zero_params();
    let mut t2 = model.zero_params();
    let mut s1 = OptimizerState::new(&d1, t1.len());
    let mut s2 = OptimizerState::new(&d2, t2.len());
    for step in 0..40u64 {
        let g: Vec<f64> = (0..t1.len())
            .map(|i| draw_gaussian(StreamKey::new(11, Stream::DataSynth, step * 8 + i as u64)))
            .collect();
        let x1 = vector_field(&d1, &mut s1, &g).unwrap();
        let x2 = vector_field(&d2, &mut s2, &g).unwrap();
        apply_step(&mut t1, &x1, d1.effective_eta()).unwrap();
        apply_step(&mut t2, &x2, d2.effective_eta()).unwrap();
    }
    assert_eq!(t1.data(), t2.data(), "adadelta depended on configured eta");

    report(
        "optimizer-closed-forms",
        true,
        &format!(
            "adam closed form to 1e-12; sign dev at |g|=1e-3 with eps=1e-8 is {small_dev:.3} (guard-dominated regime)"
        ),
    );
}

// ── 4. Interpolation exactness ───────────────────────────────────────

#[test]
fn c04_interpolation_exactness() {
    let model = Model::build(ModelSpec {
        layer_sizes: vec![6, 8, 4],
        batch_norm: vec![true],
        dropout_rate: 0.0,
    })
    .unwrap();
    let v: Vec<_> = (0..4)
        .map(|i| model.initialize(InitScheme::XavierUniform, 300 + i).unwrap())
        .collect();

    // Endpoint identities, bitwise.
    assert_eq!(interp_linear(&v[0], &v[1], 1.0).unwrap().data(), v[0].data());
    assert_eq!(interp_linear(&v[0], &v[1], 0.0).unwrap().data(), v[1].data());
    for alpha in [0.0, 0.3, 0.85, 1.0] {
        let edge = interp_bilinear(&v[0], &v[1], &v[2], &v[3], alpha, 1.0).unwrap();
        assert_eq!(edge.data(), interp_linear(&v[0], &v[1], alpha).unwrap().data());
    }
    assert_eq!(interp_barycentric(&v[0], &v[1], &v[2], 1.0, 1.0).unwrap().data(), v[1].data());
    assert_eq!(interp_barycentric(&v[0], &v[1], &v[2], 1.0, 0.0).unwrap().data(), v[2].data());
    for beta in [0.15, 0.6] {
        let far = interp_barycentric(&v[0], &v[1], &v[2], 1.0, beta).unwrap();
        assert_eq!(far.data(), interp_linear(&v[1], &v[2], beta).unwrap().data());
    }
    // Linearity: interp(a,b,α) + interp(b,a,α) = a + b (to rounding).
    for alpha in [-0.5, 0.25, 1.5] {
        let ab = interp_linear(&v[0], &v[1], alpha).unwrap();
        let ba = interp_linear(&v[1], &v[0], alpha).unwrap();
        for i in 0..ab.len() {
            let direct = v[0].data()[i] + v[1].data()[i];
            assert!((ab.data()[i] + ba.data()[i] - direct).abs() <= 1e-15);
        }
    }

    // Sweep vertex-coincident samples equal direct evaluations, bitwise.
    let dataset = optscape::data::synth_dataset(3, 40, 6, 0.5, 3.0, 0, 77).unwrap();
    let mut spec = InterpolationSpec::linear(v[0].clone(), v[1].clone());
    spec.resolution = 3;
    let samples = sweep(&spec, &model, &dataset, BnRefreshPolicy::full_pass()).unwrap();
    let at_v1 = evaluate_point(&model, &v[1], &dataset, BnRefreshPolicy::full_pass()).unwrap();
    let at_v0 = evaluate_point(&model, &v[0], &dataset, BnRefreshPolicy::full_pass()).unwrap();
    assert_eq!(samples[0].train_loss.to_bits(), at_v1.train_loss.to_bits());
    assert_eq!(samples[2].train_loss.to_bits(), at_v0.train_loss.to_bits());

    report("interpolation-exactness", true, "endpoint/edge/vertex identities bitwise");
}

// ── 5. Loss-bump reproduction ────────────────────────────────────────

#[test]
fn c05_loss_bump_reproduction() {
    let (_, art) = bump_fixture();
    let mut details = String::new();

    // (a) every run reaches the accuracy threshold.
    let mut acc_ok = true;
    for run in &art.runs {
        let best = run.series.iter().map(|m| m.train_accuracy).fold(0.0f64, f64::max);
        details.push_str(&format!("{} acc {:.4}; ", run.label, best));
        acc_ok &= best >= art.acc_threshold;
    }

    // (b) barrier height per optimizer pair.
    let mut passing_pairs = 0;
    for report in &art.reports {
        details.push_str(&format!("{} bump {:.4}; ", report.path_id, report.bump_height));
        if report.bump_height >= art.bump_threshold {
            passing_pairs += 1;
        }
    }
    let bump_ok = passing_pairs >= 4;
    let pass = acc_ok && bump_ok;
    report(
        "loss-bump-reproduction",
        pass,
        &format!(
            "data: {}; thresholds acc>={:.2} bump>={:.2}; pairs passing: {passing_pairs}/6; {details}",
            if art.used_mnist { "mnist" } else { "synthetic" },
            art.acc_threshold,
            art.bump_threshold,
        ),
    );
    assert!(acc_ok, "a run missed the train-accuracy threshold: {details}");
    assert!(
        bump_ok,
        "fewer than 4 of 6 pairs reached bump >= {} nats. Measured: {details}. On the synthetic \
         fallback, runs from a shared initialization with shared shuffles remain linearly \
         connected and barrier heights plateau near 0.04 nats; see README (Known limitations).",
        art.bump_threshold
    );
}

// ── 6. Switch reproduction ───────────────────────────────────────────

#[test]
fn c06_switch_reproduction() {
    let (_, art) = switch_fixture();
    let switch_epoch = art.switch_epoch;

    // Within 3 post-switch epochs the switched run's train accuracy comes
    // within 2 percentage points of the pure-sgd run at the same epoch.
    let mut best_gap = f64::INFINITY;
    for e in switch_epoch..(switch_epoch + 3).min(art.switched_run.series.len()) {
        let gap = (art.switched_run.series[e].train_accuracy - art.sgd_run.series[e].train_accuracy)
            .abs();
        best_gap = best_gap.min(gap);
    }
    let acc_ok = best_gap <= 0.02;

    let bump = bump_statistic(&art.sweep_samples).unwrap();
    let bump_ok = bump.bump_height > 0.0;

    // Distance-from-init series around the switch, reported for comparison.
    let dists: Vec<String> = art
        .switched_run
        .series
        .iter()
        .skip(switch_epoch.saturating_sub(2))
        .take(5)
        .map(|m| format!("e{} {:.3}", m.epoch, m.distance_from_init))
        .collect();

    report(
        "switch-reproduction",
        acc_ok && bump_ok,
        &format!(
            "post-switch accuracy gap {best_gap:.4}; switched-vs-adam bump {:.6}; dist-from-init around switch: {}",
            bump.bump_height,
            dists.join(", ")
        ),
    );
    assert!(acc_ok, "switched run did not reach the pure-sgd accuracy band: gap {best_gap:.4}");
    assert!(
        bump.bump_height > 0.0,
        "no positive barrier between the switched run's final point and pure adam's \
         (measured {:.6} nats). On the synthetic fallback these desk-scale solutions are \
         linearly connected; see README (Known limitations).",
        bump.bump_height
    );
}

// ── 7. Basin profiles ────────────────────────────────────────────────

#[test]
fn c07_basin_profiles() {
    let (_, art) = basin_fixture();
    let ln10 = 10f64.ln();
    let mut details = String::new();
    for profile in &art.profiles {
        let (min_alpha, _) = profile
            .alpha_samples
            .iter()
            .map(|s| (s.alpha, s.train_loss))
            .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
        let at0 = profile
            .alpha_samples
            .iter()
            .find(|s| s.alpha == 0.0)
            .expect("grid hits 0")
            .train_loss;
        details.push_str(&format!("{}: min@{min_alpha:.3}, loss(0)={at0:.3}; ", profile.label));
        assert!(
            (0.9..=1.1).contains(&min_alpha),
            "{}: profile minimum at alpha = {min_alpha}",
            profile.label
        );
        assert!(
            (at0 - ln10).abs() <= 0.2,
            "{}: loss at alpha = 0 is {at0}, expected within 0.2 of ln 10",
            profile.label
        );
    }

    // Lambda-profile endpoint identities, exact. Recomputed on the bump
    // fixture's runs (any trained pair works; identities are structural).
    let (_, bump_art) = bump_fixture();
    let run = &bump_art.runs[0];
    let d = run.final_params.distance(&run.init).unwrap();
    let samples = basin_profile_lambda(
        &bump_art.model,
        &run.init,
        &run.final_params,
        &[0.0, d / 3.0, d],
        &bump_art.dataset,
        BnRefreshPolicy::full_pass(),
    )
    .unwrap();
    let at_final =
        evaluate_point(&bump_art.model, &run.final_params, &bump_art.dataset, BnRefreshPolicy::full_pass())
            .unwrap();
    let at_init =
        evaluate_point(&bump_art.model, &run.init, &bump_art.dataset, BnRefreshPolicy::full_pass())
            .unwrap();
    assert_eq!(samples[0].train_loss.to_bits(), at_final.train_loss.to_bits());
    assert_eq!(samples[2].train_loss.to_bits(), at_init.train_loss.to_bits());

    report("basin-profiles", true, &format!("{details}lambda endpoints exact"));
}

// ── 8. Batch-norm scale invariance ───────────────────────────────────

#[test]
fn c08_bn_scale_invariance() {
    let (_, art) = bump_fixture();
    let model = &art.model;
    let run = art.runs.iter().find(|r| r.label == "adam").expect("adam run");
    let mut scaled = run.final_params.clone();
    for e in model.layout().entries() {
        if e.name == "layer0.w" || e.name == "layer0.b" {
            let len: usize = e.shape.iter().product();
            for v in &mut scaled.data_mut()[e.offset..e.offset + len] {
                *v *= 10.0;
            }
        }
    }
    let policy = BnRefreshPolicy::full_pass();
    let bn_orig = refresh_bn_stats(model, &run.final_params, &art.dataset.train, policy).unwrap();
    let bn_scaled = refresh_bn_stats(model, &scaled, &art.dataset.train, policy).unwrap();
    let p_orig = model.predict(&run.final_params, &art.dataset.train.inputs, &bn_orig).unwrap();
    let p_scaled = model.predict(&scaled, &art.dataset.train.inputs, &bn_scaled).unwrap();
    let max_delta = p_orig
        .data()
        .iter()
        .zip(p_scaled.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let pass = max_delta < 1e-6;
    report("bn-scale-invariance", pass, &format!("max per-entry delta {max_delta:.3e}"));
    assert!(pass, "scaling the normalized layer by 10 moved predictions by {max_delta:.3e}");
}

// ── 9. Exotic initialization ─────────────────────────────────────────

#[test]
fn c09_exotic_init() {
    let dir = tempfile::tempdir().unwrap();
    let art = exotic_init(dir.path(), mnist_dir().as_deref(), MASTER_SEED).unwrap();
    let no_bn_final = art.no_bn_series.last().unwrap().train_accuracy;
    let no_bn_max = art.no_bn_series.iter().map(|m| m.train_accuracy).fold(0.0f64, f64::max);
    let with_bn_final = art.with_bn_series.last().unwrap().train_accuracy;
    let stuck = (no_bn_final - art.chance_level).abs() <= 0.01
        && (no_bn_max - art.chance_level).abs() <= 0.011;
    let improves = with_bn_final >= art.chance_level + 0.10;
    report(
        "exotic-init",
        stuck && improves,
        &format!(
            "chance {:.3}; no-bn final {:.4} (max {:.4}); with-bn final {:.4}",
            art.chance_level, no_bn_final, no_bn_max, with_bn_final
        ),
    );
    assert!(stuck, "the normalization-free network escaped chance level");
    assert!(improves, "the normalized network failed to improve by 10 points");
}

// ── 10. End-to-end determinism ───────────────────────────────────────

#[test]
fn c10_recipe_determinism() {
    let bin = env!("CARGO_BIN_EXE_optscape");
    let run = |out: &std::path::Path| {
        let status = std::process::Command::new(bin)
            .args(["recipe", "bump-fc2", "--out"])
            .arg(out)
            .args(["--seed", "42"])
            .status()
            .expect("spawn recipe");
        assert!(status.success(), "recipe invocation failed");
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());

    fn collect(root: &std::path::Path, base: &std::path::Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(root).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                collect(&path, base, out);
            } else {
                out.push(path.strip_prefix(base).unwrap().to_path_buf());
            }
        }
    }
    let mut files_a = Vec::new();
    let mut files_b = Vec::new();
    collect(a.path(), a.path(), &mut files_a);
    collect(b.path(), b.path(), &mut files_b);
    files_a.sort();
    files_b.sort();
    assert_eq!(files_a, files_b, "output trees list different files");
    assert!(!files_a.is_empty(), "recipe produced no files");
    for rel in &files_a {
        let bytes_a = std::fs::read(a.path().join(rel)).unwrap();
        let bytes_b = std::fs::read(b.path().join(rel)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{} differs between invocations", rel.display());
    }
    report(
        "recipe-determinism",
        true,
        &format!("{} files byte-identical across two invocations", files_a.len()),
    );
}
