//! End-to-end workflows: labeling, splits, two-stage training, evaluation
//! and the benchmark harnesses.

mod eval;
mod harness;
mod labels;
mod split;
mod train;

use std::path::{Path, PathBuf};

pub use eval::{
    block_records, evaluate, evaluate_blocks, evaluate_fields, CurvePoint, EvalRecord, EvalReport, Granularity,
    MapeRow, PeCurve,
};
pub use harness::{
    ablation_moe, efficiency, timing_sweep, write_ablation_csv, AblationRow, EfficiencyReport, TimingReport,
};
pub use labels::{
    block_seed, build_labels, hash_manifest, log_uniform_grid, measure, preset_grid, provenance_blocks,
    provenance_path, sample_manifest_blocks, validate_grid, BlockSpec, LabelTable, Measurement, Provenance,
    DEFAULT_EB_POINTS, EB_PRESETS,
};
pub use split::{split, SplitSpec};
pub use train::{
    head_seed, train_backbone, train_head, train_head_on_features, train_heads, train_joint, BackboneRun, Dataset,
    HeadRun, JointRun, Sample, TrainConfig, TrainLog,
};

use crate::error::{Error, Result};
use crate::field::{generate_synthetic, Manifest, ManifestField, ManifestTimestep, SyntheticSpec, DTYPE_F32LE};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `timesteps` synthetic volumes plus a manifest into `outdir` and
/// returns the manifest path.
pub fn generate_dataset(spec: &SyntheticSpec, timesteps: u32, outdir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    if timesteps == 0 {
        return Err(Error::Argument("timesteps must be >= 1".into()));
    }
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut steps = Vec::new();
    for t in 0..timesteps {
        let field = generate_synthetic(spec, t)?;
        let name = format!("{}_t{t:03}.f32", field.field_name());
        field.write_raw(&outdir.join(&name))?;
        steps.push(ManifestTimestep {
            index: t,
            path: PathBuf::from(name),
        });
    }
    let manifest = Manifest {
        name: "synthetic".into(),
        dims: spec.dims,
        dtype: DTYPE_F32LE.into(),
        fields: vec![ManifestField {
            name: "synthetic".into(),
            timesteps: steps,
        }],
    };
    let path = outdir.join(MANIFEST_FILE);
    manifest.write(&path)?;
    Ok(path)
}
