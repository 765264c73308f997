//! Trained model container and its on-disk format.
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `DCQM` |
//! | 4     | format version, u32 LE |
//! | 8     | metadata length, u64 LE |
//! | n     | JSON metadata |
//! | ...   | parameter values, f32 LE, in metadata order |

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backbone::Backbone;
use super::config::{BackboneConfig, HeadConfig, Metric};
use super::head::PredictionHead;
use crate::autodiff::{ParamStore, Tensor};
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::rng;

pub const MAGIC: &[u8; 4] = b"DCQM";
pub const FORMAT_VERSION: u32 = 1;

pub type HeadKey = (CodecId, Metric);

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    pub backbone: Backbone,
    pub heads: BTreeMap<HeadKey, PredictionHead>,
    /// Seed of the training run that produced the model.
    pub seed: u64,
    /// Free-form training record (epochs, losses, label provenance).
    pub training: serde_json::Value,
}

impl SurrogateModel {
    pub fn new(backbone: Backbone, seed: u64) -> Self {
        SurrogateModel {
            backbone,
            heads: BTreeMap::new(),
            seed,
            training: serde_json::Value::Null,
        }
    }

    pub fn insert_head(&mut self, codec: CodecId, metric: Metric, head: PredictionHead) -> Result<()> {
        let expected = self.backbone.feature_dim();
        if head.feature_dim() != expected || head.outputs() != 1 {
            return Err(Error::Shape(format!(
                "head for ({codec}, {metric}) takes {} features and {} outputs, expected {expected} and 1",
                head.feature_dim(),
                head.outputs()
            )));
        }
        self.heads.insert((codec, metric), head);
        Ok(())
    }

    pub fn head(&self, codec: CodecId, metric: Metric) -> Result<&PredictionHead> {
        self.heads.get(&(codec, metric)).ok_or_else(|| Error::MissingHead {
            codec: codec.to_string(),
            metric: metric.to_string(),
        })
    }

    /// Metric predictions `[block][eb]` for min-max normalized blocks.
    pub fn predict_blocks(
        &self,
        codec: CodecId,
        metric: Metric,
        blocks: &[&[f32]],
        ebs: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let head = self.head(codec, metric)?;
        let features = self.backbone.extract_features(blocks)?;
        head.predict(metric, &features, ebs)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Metadata {
            backbone: self.backbone.config().clone(),
            heads: self
                .heads
                .iter()
                .map(|(&(codec, metric), h)| HeadMeta {
                    codec,
                    metric,
                    config: h.config().clone(),
                    params: describe(h.params()),
                })
                .collect(),
            backbone_params: describe(self.backbone.params()),
            seed: self.seed,
            training: self.training.clone(),
        };
        let json = serde_json::to_vec(&meta)?;
        let mut out = Vec::with_capacity(16 + json.len() + 4 * self.num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for store in std::iter::once(self.backbone.params()).chain(self.heads.values().map(|h| h.params())) {
            for p in store.iter() {
                for v in p.tensor.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Integrity(format!("model file truncated: {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let meta_end = usize::try_from(meta_len)
            .ok()
            .and_then(|n| n.checked_add(16))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::Integrity("model file truncated inside metadata".into()))?;
        let meta: Metadata = serde_json::from_slice(&bytes[16..meta_end])?;
        let mut blobs = Blobs { bytes, pos: meta_end };

        let mut backbone = Backbone::new(meta.backbone, &mut rng::rng(0))?;
        let stored = blobs.read_store(&meta.backbone_params)?;
        backbone.params_mut().load_from(&stored)?;
        backbone.freeze();
        let mut model = SurrogateModel {
            backbone,
            heads: BTreeMap::new(),
            seed: meta.seed,
            training: meta.training,
        };
        for h in meta.heads {
            let stored = blobs.read_store(&h.params)?;
            let mut head = PredictionHead::new(h.config, model.backbone.feature_dim(), &mut rng::rng(0))?;
            head.params_mut().load_from(&stored)?;
            if model.heads.contains_key(&(h.codec, h.metric)) {
                return Err(Error::Integrity(format!("duplicate head ({}, {})", h.codec, h.metric)));
            }
            model.insert_head(h.codec, h.metric, head)?;
        }
        if blobs.pos != bytes.len() {
            return Err(Error::Integrity(format!(
                "{} trailing bytes after parameter data",
                bytes.len() - blobs.pos
            )));
        }
        Ok(model)
    }

    pub fn num_values(&self) -> usize {
        self.backbone.params().num_values() + self.heads.values().map(|h| h.params().num_values()).sum::<usize>()
    }
}

pub fn save_model(model: &SurrogateModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SurrogateModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    SurrogateModel::from_bytes(&bytes)
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    backbone: BackboneConfig,
    backbone_params: Vec<ParamMeta>,
    heads: Vec<HeadMeta>,
    seed: u64,
    #[serde(default)]
    training: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct HeadMeta {
    codec: CodecId,
    metric: Metric,
    config: HeadConfig,
    params: Vec<ParamMeta>,
}

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}

fn describe(store: &ParamStore) -> Vec<ParamMeta> {
    store
        .iter()
        .map(|p| ParamMeta {
            name: p.name.clone(),
            shape: p.tensor.shape().to_vec(),
        })
        .collect()
}

struct Blobs<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Blobs<'_> {
    fn read_store(&mut self, params: &[ParamMeta]) -> Result<ParamStore> {
        let mut store = ParamStore::new();
        for p in params {
            let n: usize = p.shape.iter().product();
            let end = n
                .checked_mul(4)
                .and_then(|b| b.checked_add(self.pos))
                .filter(|&end| end <= self.bytes.len())
                .ok_or_else(|| Error::Integrity(format!("model file truncated in parameter {}", p.name)))?;
            let data = self.bytes[self.pos..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            self.pos = end;
            store.add(p.name.clone(), Tensor::new(p.shape.clone(), data)?);
        }
        Ok(store)
    }
}
