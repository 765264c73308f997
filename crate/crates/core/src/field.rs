//! Volumetric data: raw ingestion, seeded synthetic generation, block
//! sampling and min-max normalization.
//!
//! All volumes are stored x-fastest: the sample at `(i, j, k)` lives at flat
//! index `i + nx * (j + ny * k)`.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Extents of a 3D volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Dims::new(n, n, n)
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Parses `"64,64,64"` (also accepts `x` as separator).
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split([',', 'x']).map(str::trim).collect();
        let bad = || Error::Argument(format!("invalid dims {text:?}, expected nx,ny,nz"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut v = [0usize; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
            if *slot == 0 {
                return Err(Error::Dimension(format!("dims must be positive, got {text:?}")));
            }
        }
        Ok(Dims::new(v[0], v[1], v[2]))
    }
}

impl From<[usize; 3]> for Dims {
    fn from([nx, ny, nz]: [usize; 3]) -> Self {
        Dims::new(nx, ny, nz)
    }
}

impl From<Dims> for [usize; 3] {
    fn from(d: Dims) -> Self {
        d.as_array()
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.nx, self.ny, self.nz)
    }
}

fn value_range(values: &[f32]) -> (f32, f32) {
    values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// A validated 3D scalar field at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeField {
    dims: Dims,
    values: Vec<f32>,
    field_name: String,
    timestep: u32,
    vmin: f32,
    vmax: f32,
}

impl VolumeField {
    /// Validates the samples (length, finiteness) and caches the value range.
    pub fn new(dims: Dims, values: Vec<f32>, field_name: impl Into<String>, timestep: u32) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Dimension(format!("empty volume {dims}")));
        }
        if values.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "expected {} samples for dims {dims}, got {}",
                dims.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite sample {} at flat index {pos}",
                values[pos]
            )));
        }
        let (vmin, vmax) = value_range(&values);
        Ok(VolumeField {
            dims,
            values,
            field_name: field_name.into(),
            timestep,
            vmin,
            vmax,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn field_name(&self) -> &str {
        &self.field_name
    }
    pub fn timestep(&self) -> u32 {
        self.timestep
    }
    pub fn vmin(&self) -> f32 {
        self.vmin
    }
    pub fn vmax(&self) -> f32 {
        self.vmax
    }

    /// Writes the samples as headerless little-endian f32.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Copies the sub-volume starting at `origin` with extents `dims`.
    pub fn extract(&self, origin: [usize; 3], dims: Dims) -> Vec<f32> {
        let mut out = Vec::with_capacity(dims.len());
        for k in 0..dims.nz {
            for j in 0..dims.ny {
                let start = self.dims.index(origin[0], origin[1] + j, origin[2] + k);
                out.extend_from_slice(&self.values[start..start + dims.nx]);
            }
        }
        out
    }
}

/// Reads a headerless little-endian f32 volume of known extents.
pub fn load_raw(path: &Path, dims: Dims) -> Result<VolumeField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 4 * dims.len();
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "{}: {} bytes on disk, dims {dims} need {expected} bytes",
            path.display(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    VolumeField::new(dims, values, name, 0)
}

/// Parameters of the seeded sinusoid-superposition generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: Dims,
    pub seed: u64,
    pub n_modes: u32,
    /// Upper bound on |frequency| in cycles per axis.
    pub max_frequency: f64,
    /// Half-width of the uniform noise, as a fraction of the total mode amplitude.
    pub noise_amplitude: f64,
    /// Per-timestep perturbation scale applied to frequencies and phases.
    pub drift: f64,
}

impl SyntheticSpec {
    /// The generator used by the reference dataset: 6 modes up to 3
    /// cycles per axis, 1% noise, mild drift.
    pub fn reference(dims: Dims, seed: u64) -> Self {
        SyntheticSpec {
            dims,
            seed,
            n_modes: 6,
            max_frequency: 3.0,
            noise_amplitude: 0.01,
            drift: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Dimension(format!("empty synthetic dims {}", self.dims)));
        }
        if self.n_modes == 0 {
            return Err(Error::Argument("n_modes must be >= 1".into()));
        }
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.noise_amplitude) || !finite_nonneg(self.drift) || !finite_nonneg(self.max_frequency) {
            return Err(Error::Argument(
                "noise_amplitude, drift and max_frequency must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

struct Mode {
    amplitude: f64,
    freq: [f64; 3],
    phase: f64,
    dfreq: [f64; 3],
    dphase: f64,
}

/// Generates the synthetic field for `timestep`.
///
/// Mode parameters depend only on `spec.seed`; noise is drawn from a
/// stream derived from `(seed, timestep)`. With `drift = 0` and no noise the
/// volume is identical for every timestep.
pub fn generate_synthetic(spec: &SyntheticSpec, timestep: u32) -> Result<VolumeField> {
    spec.validate()?;
    let mut r = rng::rng(rng::derive_seed(spec.seed, &[rng::tag("modes")]));
    let fmax = spec.max_frequency;
    let modes: Vec<Mode> = (0..spec.n_modes)
        .map(|_| Mode {
            amplitude: r.random_range(0.25..1.0),
            freq: [0; 3].map(|_| r.random_range(-1.0..=1.0) * fmax),
            phase: r.random_range(0.0..TAU),
            dfreq: [0; 3].map(|_| r.random_range(-1.0..=1.0)),
            dphase: r.random_range(-1.0..=1.0) * TAU,
        })
        .collect();

    let t = spec.drift * timestep as f64;
    let total_amp: f64 = modes.iter().map(|m| m.amplitude).sum();
    let noise_scale = spec.noise_amplitude * total_amp;
    let mut noise = rng::rng(rng::derive_seed(spec.seed, &[rng::tag("noise"), timestep as u64]));

    let d = spec.dims;
    let inv = [1.0 / d.nx as f64, 1.0 / d.ny as f64, 1.0 / d.nz as f64];
    // precompute per-mode per-axis phase contributions
    let axis_terms = |m: &Mode, axis: usize, n: usize| -> Vec<f64> {
        let f = m.freq[axis] + t * m.dfreq[axis];
        (0..n).map(|c| TAU * f * c as f64 * inv[axis]).collect()
    };
    let tables: Vec<[Vec<f64>; 3]> = modes
        .iter()
        .map(|m| [axis_terms(m, 0, d.nx), axis_terms(m, 1, d.ny), axis_terms(m, 2, d.nz)])
        .collect();

    let mut values = Vec::with_capacity(d.len());
    for k in 0..d.nz {
        for j in 0..d.ny {
            for i in 0..d.nx {
                let mut v = 0.0;
                for (m, tab) in modes.iter().zip(&tables) {
                    let arg = tab[0][i] + tab[1][j] + tab[2][k] + m.phase + t * m.dphase;
                    v += m.amplitude * arg.sin();
                }
                if noise_scale > 0.0 {
                    v += noise_scale * noise.random_range(-1.0..=1.0);
                }
                values.push(v as f32);
            }
        }
    }
    VolumeField::new(d, values, "synthetic", timestep)
}

/// A sub-volume sampled from a field.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub dims: Dims,
    pub values: Vec<f32>,
    pub origin: [usize; 3],
    pub field_name: String,
    pub timestep: u32,
    pub block_id: u32,
}

/// Draws `count` blocks with uniformly random origins (with replacement).
pub fn sample_blocks(field: &VolumeField, block_dims: Dims, count: usize, seed: u64) -> Result<Vec<Block>> {
    let fd = field.dims();
    if block_dims.is_empty() {
        return Err(Error::Dimension("block dims must be positive".into()));
    }
    if block_dims.nx > fd.nx || block_dims.ny > fd.ny || block_dims.nz > fd.nz {
        return Err(Error::Dimension(format!("block {block_dims} larger than field {fd}")));
    }
    if count == 0 {
        return Err(Error::Argument("block count must be >= 1".into()));
    }
    let mut r = rng::rng(seed);
    let limits = [fd.nx - block_dims.nx, fd.ny - block_dims.ny, fd.nz - block_dims.nz];
    Ok((0..count)
        .map(|id| {
            let origin = limits.map(|l| r.random_range(0..=l));
            Block {
                dims: block_dims,
                values: field.extract(origin, block_dims),
                origin,
                field_name: field.field_name().to_owned(),
                timestep: field.timestep(),
                block_id: id as u32,
            }
        })
        .collect())
}

/// Range of a block before min-max scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub bmin: f32,
    pub bmax: f32,
    pub degenerate: bool,
}

/// Maps block values onto `[0, 1]`; constant blocks map to zeros.
pub fn minmax_normalize(block: &Block) -> (Block, NormStats) {
    let (values, stats) = minmax_normalize_values(&block.values);
    (
        Block {
            values,
            ..block.clone()
        },
        stats,
    )
}

pub fn minmax_normalize_values(values: &[f32]) -> (Vec<f32>, NormStats) {
    let (bmin, bmax) = value_range(values);
    let degenerate = !(bmax > bmin);
    let out = if degenerate {
        vec![0.0; values.len()]
    } else {
        let lo = bmin as f64;
        let span = bmax as f64 - lo;
        values.iter().map(|&v| ((v as f64 - lo) / span) as f32).collect()
    };
    (out, NormStats { bmin, bmax, degenerate })
}

/// Inverse of [`minmax_normalize_values`] for non-degenerate stats.
pub fn denormalize_values(values: &[f32], stats: NormStats) -> Vec<f32> {
    let lo = stats.bmin as f64;
    let span = stats.bmax as f64 - lo;
    values.iter().map(|&v| (v as f64 * span + lo) as f32).collect()
}

/// Dataset manifest: one or more fields, each with indexed timesteps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub dims: Dims,
    pub dtype: String,
    pub fields: Vec<ManifestField>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestField {
    pub name: String,
    pub timesteps: Vec<ManifestTimestep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestTimestep {
    pub index: u32,
    pub path: PathBuf,
}

pub const DTYPE_F32LE: &str = "f32le";

impl Manifest {
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.dtype != DTYPE_F32LE {
            return Err(Error::Format(format!(
                "unsupported dtype {:?}, only {DTYPE_F32LE:?}",
                manifest.dtype
            )));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Loads one timestep of one field, resolving its path against `base`.
    pub fn load(&self, base: &Path, field: &str, timestep: u32) -> Result<VolumeField> {
        let f = self
            .fields
            .iter()
            .find(|f| f.name == field)
            .ok_or_else(|| Error::Argument(format!("field {field:?} not in manifest")))?;
        let ts = f
            .timesteps
            .iter()
            .find(|t| t.index == timestep)
            .ok_or_else(|| Error::Argument(format!("timestep {timestep} not in field {field:?}")))?;
        let path = base.join(&ts.path);
        let v = load_raw(&path, self.dims)?;
        VolumeField::new(self.dims, v.values, field, timestep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_file(bytes: &[u8]) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f
    }

    fn le(values: &[f32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn load_raw_reads_range() {
        let f = tmp_file(&le(&[0.0, 1.0]));
        let v = load_raw(f.path(), Dims::new(1, 1, 2)).unwrap();
        assert_eq!(v.vmin(), 0.0);
        assert_eq!(v.vmax(), 1.0);
        assert_eq!(v.values(), &[0.0, 1.0]);
    }

    #[test]
    fn load_raw_size_mismatch() {
        let f = tmp_file(&[0u8; 12]);
        let err = load_raw(f.path(), Dims::cube(2)).unwrap_err();
        assert!(
            matches!(err, Error::Dimension(ref m) if m.contains("32 bytes")),
            "{err}"
        );
    }

    #[test]
    fn load_raw_rejects_nan_with_index() {
        let f = tmp_file(&le(&[0.0, 1.0, f32::NAN, 2.0]));
        let err = load_raw(f.path(), Dims::new(2, 2, 1)).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("index 2")), "{err}");
    }

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            dims: Dims::cube(12),
            seed: 42,
            n_modes: 1,
            max_frequency: 2.0,
            noise_amplitude: 0.0,
            drift: 0.0,
        }
    }

    #[test]
    fn synthetic_without_drift_is_time_invariant() {
        let a = generate_synthetic(&spec(), 0).unwrap();
        let b = generate_synthetic(&spec(), 5).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let s = SyntheticSpec {
            noise_amplitude: 0.1,
            drift: 0.3,
            n_modes: 4,
            ..spec()
        };
        let a = generate_synthetic(&s, 3).unwrap();
        let b = generate_synthetic(&s, 3).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn synthetic_drift_changes_volume() {
        let s = SyntheticSpec {
            drift: 0.05,
            n_modes: 3,
            ..spec()
        };
        let a = generate_synthetic(&s, 0).unwrap();
        let b = generate_synthetic(&s, 9).unwrap();
        assert!(a.values().iter().zip(b.values()).any(|(x, y)| x != y));
    }

    #[test]
    fn synthetic_rejects_bad_spec() {
        assert!(generate_synthetic(&SyntheticSpec { n_modes: 0, ..spec() }, 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { drift: -1.0, ..spec() }, 0).is_err());
    }

    fn ramp(dims: Dims) -> VolumeField {
        let values = (0..dims.len()).map(|i| i as f32).collect();
        VolumeField::new(dims, values, "ramp", 0).unwrap()
    }

    #[test]
    fn full_size_block_has_single_origin() {
        let f = ramp(Dims::cube(32));
        let blocks = sample_blocks(&f, Dims::cube(32), 3, 1).unwrap();
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|b| b.origin == [0, 0, 0]));
        assert_eq!(blocks[2].values, f.values());
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let f = ramp(Dims::cube(64));
        let a = sample_blocks(&f, Dims::cube(16), 32, 11).unwrap();
        let b = sample_blocks(&f, Dims::cube(16), 32, 11).unwrap();
        let oa: Vec<_> = a.iter().map(|b| b.origin).collect();
        let ob: Vec<_> = b.iter().map(|b| b.origin).collect();
        assert_eq!(oa, ob);
        assert!(oa.iter().flatten().all(|&c| c <= 48));
        let ids: std::collections::BTreeSet<_> = a.iter().map(|b| b.block_id).collect();
        assert_eq!(ids.len(), 32);
    }

    #[test]
    fn sampled_values_match_source_region() {
        let d = Dims::new(20, 13, 9);
        let f = ramp(d);
        for b in sample_blocks(&f, Dims::new(5, 4, 3), 20, 3).unwrap() {
            let [ox, oy, oz] = b.origin;
            for k in 0..3 {
                for j in 0..4 {
                    for i in 0..5 {
                        let expect = f.values()[d.index(ox + i, oy + j, oz + k)];
                        assert_eq!(b.values[b.dims.index(i, j, k)], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_block_is_dimension_error() {
        let f = ramp(Dims::cube(8));
        assert!(matches!(
            sample_blocks(&f, Dims::new(9, 1, 1), 1, 0),
            Err(Error::Dimension(_))
        ));
    }

    fn block(values: Vec<f32>) -> Block {
        Block {
            dims: Dims::new(values.len(), 1, 1),
            values,
            origin: [0; 3],
            field_name: "t".into(),
            timestep: 0,
            block_id: 0,
        }
    }

    #[test]
    fn normalize_affine() {
        let (b, s) = minmax_normalize(&block(vec![2.0, 4.0, 6.0]));
        assert_eq!(b.values, vec![0.0, 0.5, 1.0]);
        assert_eq!((s.bmin, s.bmax, s.degenerate), (2.0, 6.0, false));
    }

    #[test]
    fn normalize_constant_is_degenerate() {
        let (b, s) = minmax_normalize(&block(vec![5.0; 3]));
        assert_eq!(b.values, vec![0.0; 3]);
        assert!(s.degenerate);
    }

    #[test]
    fn manifest_json_shape() {
        let m = Manifest {
            name: "demo".into(),
            dims: Dims::cube(4),
            dtype: DTYPE_F32LE.into(),
            fields: vec![ManifestField {
                name: "rho".into(),
                timesteps: vec![ManifestTimestep {
                    index: 0,
                    path: "rho_t0.f32".into(),
                }],
            }],
        };
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["dtype"], "f32le");
        assert_eq!(v["fields"][0]["timesteps"][0]["path"], "rho_t0.f32");
        assert_eq!(v["dims"], serde_json::json!([4, 4, 4]));
    }

    proptest::proptest! {
        #[test]
        fn normalize_round_trip(values in proptest::collection::vec(-1e4f32..1e4, 2..64)) {
            let (b, s) = minmax_normalize(&block(values.clone()));
            proptest::prop_assume!(!s.degenerate);
            let lo = b.values.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = b.values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            proptest::prop_assert_eq!((lo, hi), (0.0, 1.0));
            let back = denormalize_values(&b.values, s);
            let scale = (s.bmax - s.bmin).abs().max(s.bmin.abs()).max(s.bmax.abs());
            for (x, y) in values.iter().zip(&back) {
                proptest::prop_assert!(((x - y).abs() / scale) <= 1e-6);
            }
        }
    }
}
