// Scratch check; not part of the deliverable.
use optscape::checkpoint::load_checkpoint;
use optscape::data::DatasetSpec;
use optscape::landscape::{refresh_bn_stats, BnRefreshPolicy};

fn main() {
    let ckpt = load_checkpoint(std::path::Path::new(
        "/tmp/basin_test2/runs/adam/epoch020_adam.ckpt",
    ))
    .unwrap();
    let dataset = DatasetSpec::synth_default().load(42).unwrap();
    let model = ckpt.model;
    let params = ckpt.params;

    let mut scaled = params.clone();
    for e in model.layout().entries() {
        if e.name == "layer0.w" || e.name == "layer0.b" {
            let len: usize = e.shape.iter().product();
            for v in &mut scaled.data_mut()[e.offset..e.offset + len] {
                *v *= 10.0;
            }
        }
    }
    let policy = BnRefreshPolicy::full_pass();
    let bn_a = refresh_bn_stats(&model, &params, &dataset.train, policy).unwrap();
    let bn_b = refresh_bn_stats(&model, &scaled, &dataset.train, policy).unwrap();
    let pa = model.predict(&params, &dataset.train.inputs, &bn_a).unwrap();
    let pb = model.predict(&scaled, &dataset.train.inputs, &bn_b).unwrap();
    let max_delta = pa
        .data()
        .iter()
        .zip(pb.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    println!("max per-entry prediction delta after x10 + refresh: {max_delta:.3e}");

    // Also at a narrow random init (worst case for the epsilon correction).
    let fresh = model
        .initialize(optscape::model::InitScheme::XavierNarrow, 9)
        .unwrap();
    let mut fresh_scaled = fresh.clone();
    for e in model.layout().entries() {
        if e.name == "layer0.w" || e.name == "layer0.b" {
            let len: usize = e.shape.iter().product();
            for v in &mut fresh_scaled.data_mut()[e.offset..e.offset + len] {
                *v *= 10.0;
            }
        }
    }
    let bn_c = refresh_bn_stats(&model, &fresh, &dataset.train, policy).unwrap();
    let bn_d = refresh_bn_stats(&model, &fresh_scaled, &dataset.train, policy).unwrap();
    let pc = model.predict(&fresh, &dataset.train.inputs, &bn_c).unwrap();
    let pd = model.predict(&fresh_scaled, &dataset.train.inputs, &bn_d).unwrap();
    let max_delta_init = pc
        .data()
        .iter()
        .zip(pd.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    println!("same check at a fresh narrow init: {max_delta_init:.3e}");
}
