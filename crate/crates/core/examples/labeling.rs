//! Builds a small ground-truth label table from a synthetic dataset and
//! splits it by timestep.
//!
//! `cargo run --release --example labeling`

use cqsurrogate::codec::CodecId;
use cqsurrogate::field::{Dims, SyntheticSpec};
use cqsurrogate::pipeline::{build_labels, generate_dataset, preset_grid, split, BlockSpec, SplitSpec};

fn main() -> cqsurrogate::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| cqsurrogate::Error::io("tempdir", e))?;
    let manifest = generate_dataset(&SyntheticSpec::reference(Dims::cube(32), 5), 4, dir.path())?;
    let grid = preset_grid("nyx", 5)?;
    let spec = BlockSpec {
        dims: Dims::cube(16),
        count: 4,
    };
    let table = build_labels(&manifest, &CodecId::ALL, &grid, spec, 5)?;
    println!(
        "{} rows, manifest sha256 {}",
        table.rows.len(),
        table.provenance.manifest_hash
    );

    for r in table.rows.iter().filter(|r| r.block_id == 0 && r.timestep == 0) {
        println!(
            "{:>8} eb {:.1e}: CR {:7.2}  PSNR {:>7}  SSIM {:>8}",
            r.codec,
            r.eb_rel,
            r.cr,
            r.psnr_db.map_or("-".into(), |v| format!("{v:.2}")),
            r.ssim.map_or("-".into(), |v| format!("{v:.5}"))
        );
    }

    let (train, test) = split(&table, SplitSpec::OddEven)?;
    println!(
        "train timesteps {:?}, test timesteps {:?}",
        train.timesteps(),
        test.timesteps()
    );
    Ok(())
}
