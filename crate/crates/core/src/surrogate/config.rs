use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Dims;

/// Quality metric predicted by a head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cr,
    Psnr,
    Ssim,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Cr, Metric::Psnr, Metric::Ssim];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cr => "cr",
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
        }
    }

    /// Target transform applied before min-max scaling.
    pub fn default_transform(self) -> TargetTransform {
        match self {
            Metric::Cr => TargetTransform::Log2,
            Metric::Psnr | Metric::Ssim => TargetTransform::Identity,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cr" => Ok(Metric::Cr),
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            _ => Err(Error::Argument(format!("unknown metric {s:?} (cr | psnr | ssim)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub stem_channels: usize,
    /// `(residual blocks, channels)` per stage; each stage halves the extent.
    pub stages: Vec<(usize, usize)>,
    pub feature_dim: usize,
    pub block_dims: Dims,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            stem_channels: 16,
            stages: vec![(2, 16), (2, 32)],
            feature_dim: 64,
            block_dims: Dims::cube(16),
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.stem_channels == 0 {
            return Err(Error::Argument("feature_dim and stem_channels must be positive".into()));
        }
        if self.stages.is_empty() || self.stages.iter().any(|&(b, c)| b == 0 || c == 0) {
            return Err(Error::Argument(
                "backbone needs at least one stage of positive size".into(),
            ));
        }
        if self.block_dims.is_empty() {
            return Err(Error::Argument("block dims must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EbEmbedderConfig {
    pub hidden: [usize; 2],
    /// `(log10 eb_min, log10 eb_max)` used to scale the bound into `[0, 1]`.
    pub eb_log_range: (f64, f64),
    pub embedding_dim: usize,
}

impl Default for EbEmbedderConfig {
    fn default() -> Self {
        EbEmbedderConfig {
            hidden: [128, 256],
            eb_log_range: (-5.0, -1.0),
            embedding_dim: 256,
        }
    }
}

impl EbEmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.eb_log_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!("eb log range needs lo < hi, got ({lo}, {hi})")));
        }
        if self.hidden.contains(&0) || self.embedding_dim == 0 {
            return Err(Error::Argument("embedder sizes must be positive".into()));
        }
        Ok(())
    }

    /// Log-scaled, clamped position of `eb_rel` in the configured range.
    pub fn normalize(&self, eb_rel: f64) -> Result<f64> {
        if !(eb_rel > 0.0) {
            return Err(Error::Argument(format!("error bound must be > 0, got {eb_rel}")));
        }
        let (lo, hi) = self.eb_log_range;
        Ok(((eb_rel.log10() - lo) / (hi - lo)).clamp(0.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    PlainMlp,
    Moe,
}

impl FromStr for HeadKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_mlp" | "mlp" => Ok(HeadKind::PlainMlp),
            "moe" => Ok(HeadKind::Moe),
            _ => Err(Error::Argument(format!("unknown head kind {s:?} (plain_mlp | moe)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    Identity,
    Log2,
}

impl TargetTransform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            TargetTransform::Identity => v,
            TargetTransform::Log2 => v.log2(),
        }
    }

    pub fn invert(self, v: f64) -> f64 {
        match self {
            TargetTransform::Identity => v,
            TargetTransform::Log2 => v.exp2(),
        }
    }
}

/// Min-max range of transformed training targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetNorm {
    pub tmin: f64,
    pub tmax: f64,
}

impl TargetNorm {
    /// Fits on transformed targets; a constant target gets unit width.
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Data("no finite targets to fit normalization on".into()));
        }
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Ok(TargetNorm { tmin: lo, tmax: hi })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.tmin) / (self.tmax - self.tmin)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v * (self.tmax - self.tmin) + self.tmin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub n_experts: usize,
    pub expert_hidden: usize,
    /// Hidden width of the plain MLP head.
    pub mlp_hidden: usize,
    pub target_transform: TargetTransform,
    pub target_norm: Option<TargetNorm>,
    pub embedder: EbEmbedderConfig,
}

impl HeadConfig {
    pub fn new(kind: HeadKind, metric: Metric) -> Self {
        HeadConfig {
            kind,
            n_experts: 4,
            expert_hidden: 64,
            mlp_hidden: 64,
            target_transform: metric.default_transform(),
            target_norm: None,
            embedder: EbEmbedderConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.embedder.validate()?;
        if self.n_experts == 0 || self.expert_hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Argument("head sizes must be positive".into()));
        }
        if let Some(n) = self.target_norm {
            if !(n.tmin < n.tmax) {
                return Err(Error::Argument("target norm needs tmin < tmax".into()));
            }
        }
        Ok(())
    }
}
