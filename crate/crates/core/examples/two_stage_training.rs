//! Trains the shared backbone, attaches MoE heads for every (codec, metric)
//! pair, saves the model and evaluates it on held-out timesteps.
//!
//! Takes well under a minute in release mode.
//!
//! `cargo run --release --example two_stage_training`

use cqsurrogate::codec::CodecId;
use cqsurrogate::field::{Dims, SyntheticSpec};
use cqsurrogate::pipeline::{
    build_labels, evaluate_blocks, generate_dataset, log_uniform_grid, split, train_backbone, train_heads, BlockSpec,
    Dataset, SplitSpec, TrainConfig,
};
use cqsurrogate::surrogate::{load_model, save_model, BackboneConfig, HeadKind, SurrogateModel};

const SEED: u64 = 2024;

fn main() -> cqsurrogate::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| cqsurrogate::Error::io("tempdir", e))?;
    let manifest = generate_dataset(&SyntheticSpec::reference(Dims::cube(64), SEED), 4, dir.path())?;
    let labels = build_labels(
        &manifest,
        &CodecId::ALL,
        &log_uniform_grid(1e-4, 1e-2, 10)?,
        BlockSpec {
            dims: Dims::cube(16),
            count: 16,
        },
        SEED,
    )?;
    let (train, test) = split(&labels, SplitSpec::OddEven)?;
    let (train, test) = (Dataset::from_labels(&train)?, Dataset::from_labels(&test)?);

    let bb = TrainConfig {
        epochs: 30,
        ..TrainConfig::backbone(SEED, true)
    };
    let run = train_backbone(&train, BackboneConfig::default(), bb)?;
    println!(
        "phase 1: loss {:.4} -> {:.4}, backbone {}",
        run.log.first().unwrap_or(f64::NAN),
        run.log.last().unwrap_or(f64::NAN),
        &run.backbone.params().hash()[..16]
    );

    let mut model = SurrogateModel::new(run.backbone, SEED);
    let logs = train_heads(
        &mut model,
        &train,
        &train.pairs(),
        HeadKind::Moe,
        TrainConfig::head(SEED, true),
    )?;
    for (name, log) in &logs {
        println!("phase 2 {name}: final RMSE {:.4}", log.last().unwrap_or(f64::NAN));
    }

    let path = dir.path().join("model.dcqm");
    save_model(&model, &path)?;
    let model = load_model(&path)?;
    let report = evaluate_blocks(&model, &test)?;
    for row in &report.rows {
        println!(
            "{:>8} {:>4}: MAPE {:6.2}% over {} blocks x bounds",
            row.codec, row.metric, row.mape, row.count
        );
    }
    Ok(())
}
