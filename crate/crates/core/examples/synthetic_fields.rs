//! Generates a seeded synthetic volume, samples blocks and prints their
//! ranges before and after min-max scaling.
//!
//! `cargo run --release --example synthetic_fields`

use cqsurrogate::field::{generate_synthetic, minmax_normalize, sample_blocks, Dims, SyntheticSpec};

fn main() -> cqsurrogate::Result<()> {
    let spec = SyntheticSpec::reference(Dims::cube(64), 2024);
    for t in 0..3 {
        let field = generate_synthetic(&spec, t)?;
        println!(
            "t={t}: {} values in [{:.4}, {:.4}]",
            field.values().len(),
            field.vmin(),
            field.vmax()
        );
    }

    let field = generate_synthetic(&spec, 0)?;
    for block in sample_blocks(&field, Dims::cube(16), 4, 7)? {
        let (norm, stats) = minmax_normalize(&block);
        let (lo, hi) = norm
            .values
            .iter()
            .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "block {} at {:?}: raw [{:.4}, {:.4}] -> [{lo}, {hi}]",
            block.block_id, block.origin, stats.bmin, stats.bmax
        );
    }
    Ok(())
}
