//! Compares the cumulative cost of measuring quality with the codec
//! against asking a (briefly trained) surrogate, across 20 error bounds.
//!
//! `cargo run --release --example timing_sweep`

use cqsurrogate::codec::CodecId;
use cqsurrogate::field::{generate_synthetic, Dims, SyntheticSpec};
use cqsurrogate::pipeline::{
    build_labels, generate_dataset, log_uniform_grid, timing_sweep, train_backbone, train_heads, BlockSpec, Dataset,
    TrainConfig,
};
use cqsurrogate::surrogate::{save_model, BackboneConfig, HeadKind, SurrogateModel};

fn main() -> cqsurrogate::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| cqsurrogate::Error::io("tempdir", e))?;
    let spec = SyntheticSpec::reference(Dims::cube(64), 9);
    let manifest = generate_dataset(&spec, 2, dir.path())?;
    let labels = build_labels(
        &manifest,
        &[CodecId::PredEb],
        &log_uniform_grid(1e-4, 1e-2, 4)?,
        BlockSpec {
            dims: Dims::cube(16),
            count: 8,
        },
        9,
    )?;
    let data = Dataset::from_labels(&labels)?;
    let short = |t: TrainConfig| TrainConfig { epochs: 2, ..t };
    let run = train_backbone(&data, BackboneConfig::default(), short(TrainConfig::backbone(9, true)))?;
    let mut model = SurrogateModel::new(run.backbone, 9);
    train_heads(
        &mut model,
        &data,
        &data.pairs(),
        HeadKind::Moe,
        short(TrainConfig::head(9, true)),
    )?;
    let path = dir.path().join("model.dcqm");
    save_model(&model, &path)?;

    let field = generate_synthetic(&spec, 0)?;
    let grid = log_uniform_grid(1e-4, 1e-2, 20)?;
    let rep = timing_sweep(&field, CodecId::PredEb, &grid, &path, 32, 3, 9)?;
    rep.write_csv(std::io::stdout().lock())?;
    println!(
        "per bound: ground truth {:.2} ms, surrogate {:.3} ms",
        rep.gt_incremental() * 1e3,
        rep.surrogate_incremental() * 1e3
    );
    Ok(())
}
