//! Overfit the desk model on a handful of synthetic scenes and report mAP.
//!
//! `cargo run --release -p hoiset-core --example overfit -- [steps] [lr]`

use std::time::Instant;

use hoiset_core::assignment::CostWeights;
use hoiset_core::eval::{eval_hico, EvalConfig};
use hoiset_core::inference::{decode, top_k_select};
use hoiset_core::io::synth::{generate_synthetic, SynthConfig};
use hoiset_core::losses::LossWeights;
use hoiset_core::model::{train, HoiModel, ModelConfig, TrainSample, TrainSettings};
use hoiset_core::ExecMode;

fn main() -> hoiset_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let lr = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let (ds, images) = generate_synthetic(&SynthConfig::default())?;
    let data: Vec<TrainSample> = images
        .into_iter()
        .zip(ds.ground_truths())
        .map(|(image, gts)| TrainSample { image, gts })
        .collect();
    let mut model = HoiModel::new(ModelConfig::desk())?;
    let settings = TrainSettings {
        steps,
        learning_rate: lr,
        grad_clip: Some(1.0),
        ..TrainSettings::default()
    };
    let start = Instant::now();
    let report = train(
        &mut model,
        &data,
        &CostWeights::default(),
        &LossWeights::default(),
        &settings,
        ExecMode::Sequential,
    )?;
    for s in report.log.iter().step_by((steps / 20).max(1)) {
        println!(
            "step {:5} final {:.4} aux {:.4}",
            s.step, s.final_layer.total, s.aux_total
        );
    }
    let last = report.log.last().unwrap();
    println!("last final {:.4} in {:.1?}", last.final_layer.total, start.elapsed());

    let cfg = EvalConfig::default();
    let dets = data
        .iter()
        .map(|s| {
            Ok(top_k_select(
                decode(&model.predict(&s.image)?, cfg.presence_threshold),
                cfg.top_k,
            ))
        })
        .collect::<hoiset_core::Result<Vec<_>>>()?;
    let r = eval_hico(
        &dets,
        &ds.ground_truths(),
        &ds.header.hoi_classes,
        &cfg,
        ExecMode::Sequential,
    )?;
    println!("default full mAP {:?}", r.default.full);
    Ok(())
}
