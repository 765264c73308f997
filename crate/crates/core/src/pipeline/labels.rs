//! Ground-truth label generation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{compress_roundtrip, CodecId};
use crate::error::{Error, Result};
use crate::field::{sample_blocks, Block, Dims, Manifest};
use crate::quality::{compression_ratio, psnr, read_labels, ssim3d, write_labels, QualityLabel, SsimParams};
use crate::rng::{derive_seed, tag};

/// How blocks are drawn from every (field, timestep).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub dims: Dims,
    pub count: usize,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec {
            dims: Dims::cube(16),
            count: 32,
        }
    }
}

/// Named relative error-bound ranges.
pub const EB_PRESETS: [(&str, f64, f64); 4] = [
    ("nyx", 1e-5, 1e-3),
    ("hurricane", 1e-5, 1e-2),
    ("miranda", 1e-4, 1e-2),
    ("rtm", 1e-4, 1e-3),
];

pub const DEFAULT_EB_POINTS: usize = 20;

/// `n` log-uniformly spaced bounds from `lo` to `hi` inclusive.
pub fn log_uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Argument(format!(
            "eb grid needs 0 < lo < hi and >= 2 points, got [{lo}, {hi}] x {n}"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64),
        })
        .collect())
}

pub fn preset_grid(name: &str, n: usize) -> Result<Vec<f64>> {
    let &(_, lo, hi) = EB_PRESETS
        .iter()
        .find(|(p, _, _)| *p == name)
        .ok_or_else(|| Error::Argument(format!("unknown eb preset {name:?} (nyx | hurricane | miranda | rtm)")))?;
    log_uniform_grid(lo, hi, n)
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument("eb grid is empty".into()));
    }
    if grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "eb grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Everything a label table is derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest: PathBuf,
    /// SHA-256 over the manifest and every volume it references.
    pub manifest_hash: String,
    pub codecs: Vec<CodecId>,
    pub eb_grid: Vec<f64>,
    pub block_spec: BlockSpec,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    pub rows: Vec<QualityLabel>,
    pub provenance: Provenance,
}

impl LabelTable {
    /// Distinct `(field, timestep)` pairs in row order.
    pub fn timesteps(&self) -> BTreeSet<(String, u32)> {
        self.rows.iter().map(|r| (r.field_name.clone(), r.timestep)).collect()
    }

    pub fn with_rows(&self, rows: Vec<QualityLabel>) -> Self {
        LabelTable {
            rows,
            provenance: self.provenance.clone(),
        }
    }

    /// Writes `path` (CSV) and `path` with extension `provenance.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_labels(&self.rows, std::io::BufWriter::new(file))?;
        let side = provenance_path(path);
        let text = serde_json::to_string_pretty(&self.provenance)? + "\n";
        std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let rows = read_labels(std::io::BufReader::new(file))?;
        let side = provenance_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Ok(LabelTable {
            rows,
            provenance: serde_json::from_str(&text)?,
        })
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        write_labels(&self.rows, &mut out)?;
        Ok(out)
    }
}

pub fn provenance_path(labels: &Path) -> PathBuf {
    labels.with_extension("provenance.json")
}

pub fn hash_manifest(path: &Path) -> Result<String> {
    let (manifest, base) = Manifest::read(path)?;
    let mut h = Sha256::new();
    h.update(std::fs::read(path).map_err(|e| Error::io(path, e))?);
    for f in &manifest.fields {
        for t in &f.timesteps {
            let p = base.join(&t.path);
            h.update(std::fs::read(&p).map_err(|e| Error::io(&p, e))?);
        }
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn block_seed(seed: u64, field: &str, timestep: u32) -> u64 {
    derive_seed(seed, &[tag("blocks"), tag(field), timestep as u64])
}

/// Re-samples the blocks of every (field, timestep) in the manifest.
pub fn sample_manifest_blocks(manifest_path: &Path, spec: BlockSpec, seed: u64) -> Result<Vec<Block>> {
    let (manifest, base) = Manifest::read(manifest_path)?;
    let mut blocks = Vec::new();
    for f in &manifest.fields {
        for t in &f.timesteps {
            let field = manifest.load(&base, &f.name, t.index)?;
            blocks.extend(sample_blocks(
                &field,
                spec.dims,
                spec.count,
                block_seed(seed, &f.name, t.index),
            )?);
        }
    }
    Ok(blocks)
}

/// Blocks behind a label table; fails if the data changed since labeling.
pub fn provenance_blocks(p: &Provenance) -> Result<Vec<Block>> {
    let hash = hash_manifest(&p.manifest)?;
    if hash != p.manifest_hash {
        return Err(Error::Integrity(format!(
            "dataset {} changed since labeling (hash {hash}, labels expect {})",
            p.manifest.display(),
            p.manifest_hash
        )));
    }
    sample_manifest_blocks(&p.manifest, p.block_spec, p.seed)
}

/// Ground-truth quality of one codec on one volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub eb_abs: f64,
    pub cr: f64,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
}

pub fn measure(codec: CodecId, dims: Dims, values: &[f32], eb_rel: f64) -> Result<Measurement> {
    let out = compress_roundtrip(codec, dims, values, eb_rel)?;
    let cr = compression_ratio(values.len() * 4, out.compressed_bytes)?;
    let ssim = ssim3d(values, &out.reconstruction, dims, SsimParams::default())?;
    let degenerate = out.eb.abs == 0.0;
    Ok(Measurement {
        eb_abs: out.eb.abs,
        cr,
        psnr_db: if degenerate {
            None
        } else {
            psnr(values, &out.reconstruction)?
        },
        ssim: if degenerate { None } else { ssim },
    })
}

pub fn build_labels(
    manifest_path: &Path,
    codecs: &[CodecId],
    eb_grid: &[f64],
    block_spec: BlockSpec,
    seed: u64,
) -> Result<LabelTable> {
    validate_grid(eb_grid)?;
    if codecs.is_empty() {
        return Err(Error::Argument("no codecs selected".into()));
    }
    let mut codecs = codecs.to_vec();
    codecs.sort();
    codecs.dedup();
    let manifest_path = &std::fs::canonicalize(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest_hash = hash_manifest(manifest_path)?;
    let blocks = sample_manifest_blocks(manifest_path, block_spec, seed)?;

    let items: Vec<(usize, CodecId, f64)> = (0..blocks.len())
        .flat_map(|b| {
            codecs
                .iter()
                .flat_map(move |&c| eb_grid.iter().map(move |&e| (b, c, e)))
        })
        .collect();
    let rows = items
        .par_iter()
        .map(|&(b, codec, eb_rel)| {
            let block = &blocks[b];
            let m = measure(codec, block.dims, &block.values, eb_rel)?;
            let (block_min, block_max) = block
                .values
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            Ok(QualityLabel {
                field_name: block.field_name.clone(),
                timestep: block.timestep,
                block_id: block.block_id,
                codec,
                eb_rel,
                eb_abs: m.eb_abs,
                cr: m.cr,
                psnr_db: m.psnr_db,
                ssim: m.ssim,
                block_min,
                block_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = rows;
    rows.sort_by(|a, b| {
        (&a.field_name, a.timestep, a.block_id, a.codec)
            .cmp(&(&b.field_name, b.timestep, b.block_id, b.codec))
            .then(a.eb_rel.total_cmp(&b.eb_rel))
    });
    Ok(LabelTable {
        rows,
        provenance: Provenance {
            manifest: manifest_path.to_path_buf(),
            manifest_hash,
            codecs,
            eb_grid: eb_grid.to_vec(),
            block_spec,
            seed,
        },
    })
}
