//! Two-stage training: a shared backbone under multi-task supervision, then
//! independent heads on frozen features. Also the from-scratch joint
//! baseline used by the efficiency harness.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::labels::{provenance_blocks, LabelTable};
use crate::autodiff::{step_decay, AdamConfig, AdamState, Graph, Tensor};
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::field::{minmax_normalize_values, Block};
use crate::quality::QualityLabel;
use crate::rng::{derive_seed, rng, tag};
use crate::surrogate::{
    Backbone, BackboneConfig, HeadConfig, HeadKey, HeadKind, HeadRows, Metric, PredictionHead, TargetNorm,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Blocks per step when the backbone trains, label rows per step for
    /// heads on frozen features.
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub const BACKBONE_EPOCHS: usize = 250;
    pub const HEAD_EPOCHS: usize = 150;
    pub const DESK_BACKBONE_EPOCHS: usize = 100;
    pub const DESK_HEAD_EPOCHS: usize = 60;

    pub fn backbone(seed: u64, desk: bool) -> Self {
        TrainConfig {
            epochs: if desk {
                Self::DESK_BACKBONE_EPOCHS
            } else {
                Self::BACKBONE_EPOCHS
            },
            lr0: 0.01,
            batch_size: 8,
            seed,
        }
    }

    pub fn head(seed: u64, desk: bool) -> Self {
        TrainConfig {
            epochs: if desk {
                Self::DESK_HEAD_EPOCHS
            } else {
                Self::HEAD_EPOCHS
            },
            lr0: 0.01,
            batch_size: 128,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr0 > 0.0) {
            return Err(Error::Argument("epochs, batch size and lr0 must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: Option<TrainConfig>,
    pub losses: Vec<f64>,
}

impl TrainLog {
    pub fn first(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// One labeled (block, bound) sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub block: usize,
    pub eb: usize,
    pub codec: CodecId,
    pub cr: f64,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    /// Index into the source label rows.
    pub row: usize,
}

impl Sample {
    pub fn target(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Cr => Some(self.cr),
            Metric::Psnr => self.psnr_db,
            Metric::Ssim => self.ssim,
        }
    }
}

/// Normalized blocks and the label rows that refer to them.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub blocks: Vec<Vec<f32>>,
    /// `(field, timestep, block_id)` per block.
    pub keys: Vec<(String, u32, u32)>,
    /// Distinct error bounds, ascending.
    pub ebs: Vec<f64>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// Joins label rows with blocks re-sampled from their provenance.
    pub fn from_labels(labels: &LabelTable) -> Result<Self> {
        let blocks = provenance_blocks(&labels.provenance)?;
        Self::new(&labels.rows, &blocks)
    }

    pub fn new(rows: &[QualityLabel], blocks: &[Block]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("no label rows".into()));
        }
        let by_key: HashMap<(&str, u32, u32), &Block> = blocks
            .iter()
            .map(|b| ((b.field_name.as_str(), b.timestep, b.block_id), b))
            .collect();
        let mut index: BTreeMap<(String, u32, u32), usize> = BTreeMap::new();
        let mut ds = Dataset {
            blocks: Vec::new(),
            keys: Vec::new(),
            ebs: rows.iter().map(|r| r.eb_rel).collect::<Vec<_>>(),
            samples: Vec::with_capacity(rows.len()),
        };
        ds.ebs.sort_by(f64::total_cmp);
        ds.ebs.dedup();
        for (i, r) in rows.iter().enumerate() {
            let key = (r.field_name.clone(), r.timestep, r.block_id);
            let block = match index.get(&key) {
                Some(&b) => b,
                None => {
                    let src = by_key
                        .get(&(r.field_name.as_str(), r.timestep, r.block_id))
                        .ok_or_else(|| {
                            Error::Integrity(format!(
                                "no block for label ({}, {}, {})",
                                r.field_name, r.timestep, r.block_id
                            ))
                        })?;
                    ds.blocks.push(minmax_normalize_values(&src.values).0);
                    ds.keys.push(key.clone());
                    index.insert(key, ds.blocks.len() - 1);
                    ds.blocks.len() - 1
                }
            };
            ds.samples.push(Sample {
                block,
                eb: ds
                    .ebs
                    .binary_search_by(|e| e.total_cmp(&r.eb_rel))
                    .expect("eb collected above"),
                codec: r.codec,
                cr: r.cr,
                psnr_db: r.psnr_db,
                ssim: r.ssim,
                row: i,
            });
        }
        Ok(ds)
    }

    /// (codec, metric) pairs with at least one defined target.
    pub fn pairs(&self) -> Vec<HeadKey> {
        let set: BTreeSet<HeadKey> = self
            .samples
            .iter()
            .flat_map(|s| {
                Metric::ALL
                    .into_iter()
                    .filter(|&m| s.target(m).is_some())
                    .map(move |m| (s.codec, m))
            })
            .collect();
        set.into_iter().collect()
    }

    /// `(sample index, target)` for one pair, undefined targets dropped.
    pub fn targets(&self, codec: CodecId, metric: Metric) -> Vec<(usize, f64)> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.codec == codec)
            .filter_map(|(i, s)| s.target(metric).map(|t| (i, t)))
            .collect()
    }

    pub fn block_refs(&self) -> Vec<&[f32]> {
        self.blocks.iter().map(Vec::as_slice).collect()
    }
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite loss at epoch {}", epoch + 1)));
    }
    Ok(())
}

fn fit_norm(cfg: &HeadConfig, targets: &[(usize, f64)]) -> Result<TargetNorm> {
    TargetNorm::fit(targets.iter().map(|&(_, t)| cfg.target_transform.apply(t)))
}

#[derive(Clone, Debug)]
pub struct BackboneRun {
    pub backbone: Backbone,
    pub log: TrainLog,
    /// Supervised pairs, in provisional-head output order.
    pub pairs: Vec<HeadKey>,
}

/// Phase 1: trains a fresh backbone jointly with a provisional multi-output
/// head, then freezes the backbone and drops the head.
pub fn train_backbone(data: &Dataset, config: BackboneConfig, train: TrainConfig) -> Result<BackboneRun> {
    train.validate()?;
    let pairs = data.pairs();
    if pairs.is_empty() {
        return Err(Error::Data("training labels have no defined targets".into()));
    }
    let mut backbone = Backbone::new(config, &mut rng(derive_seed(train.seed, &[tag("backbone")])))?;
    let head_cfg = HeadConfig::new(HeadKind::PlainMlp, Metric::Cr);
    let mut head = PredictionHead::with_outputs(
        head_cfg,
        backbone.feature_dim(),
        pairs.len(),
        &mut rng(derive_seed(train.seed, &[tag("provisional")])),
    )?;

    // Dense per-(block, eb) targets on the normalized scale, with a mask.
    let (nb, ne, np) = (data.blocks.len(), data.ebs.len(), pairs.len());
    let mut target = vec![0f32; nb * ne * np];
    let mut mask = vec![0f32; nb * ne * np];
    for (p, &(codec, metric)) in pairs.iter().enumerate() {
        let transform = metric.default_transform();
        let ts = data.targets(codec, metric);
        let norm = TargetNorm::fit(ts.iter().map(|&(_, t)| transform.apply(t)))?;
        for (i, t) in ts {
            let s = &data.samples[i];
            let at = (s.block * ne + s.eb) * np + p;
            target[at] = norm.normalize(transform.apply(t)) as f32;
            mask[at] = 1.0;
        }
    }

    let mut bb_opt = AdamState::new(backbone.params(), AdamConfig::default());
    let mut head_opt = AdamState::new(head.params(), AdamConfig::default());
    let mut order: Vec<usize> = (0..nb).collect();
    let mut log = TrainLog {
        config: Some(train),
        losses: Vec::with_capacity(train.epochs),
    };
    let eb_u = head.eb_tensor::<f32>(&data.ebs)?;
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng(derive_seed(train.seed, &[tag("shuffle"), epoch as u64])));
        let lr = step_decay(train.lr0, epoch, train.epochs);
        let (mut sum, mut weight) = (0.0, 0.0);
        for batch in order.chunks(train.batch_size) {
            let rows: Vec<usize> = batch.iter().flat_map(|&b| (b * ne * np)..((b + 1) * ne * np)).collect();
            let batch_mask: Vec<f32> = rows.iter().map(|&i| mask[i]).collect();
            let count: f32 = batch_mask.iter().sum();
            if count == 0.0 {
                continue;
            }
            let mut g = Graph::<f32>::new();
            let bp = backbone.params().bind(&mut g);
            let hp = head.params().bind(&mut g);
            let blocks: Vec<&[f32]> = batch.iter().map(|&b| data.blocks[b].as_slice()).collect();
            let x = g.input(backbone.batch_tensor(&blocks)?);
            let feats = backbone.forward(&mut g, &bp, x)?;
            let u = g.input(eb_u.clone());
            let out = head.forward(&mut g, &hp, feats, u, &HeadRows::grid(batch.len(), ne))?;
            let t = g.input(Tensor::new(
                vec![batch.len() * ne, np],
                rows.iter().map(|&i| target[i]).collect(),
            )?);
            let loss = g.masked_mse(out.prediction, t, batch_mask)?;
            let value = g.value(loss).item() as f64;
            check_loss(value, epoch)?;
            let mut grads = g.backward(loss);
            let bg = backbone.params().collect_grads(&bp, &mut grads);
            let hg = head.params().collect_grads(&hp, &mut grads);
            bb_opt.step(backbone.params_mut(), &bg, lr)?;
            head_opt.step(head.params_mut(), &hg, lr)?;
            sum += value * count as f64;
            weight += count as f64;
        }
        log.losses.push(sum / weight.max(1.0));
    }
    backbone.freeze();
    Ok(BackboneRun { backbone, log, pairs })
}

#[derive(Clone, Debug)]
pub struct HeadRun {
    pub head: PredictionHead,
    pub log: TrainLog,
}

pub fn head_seed(seed: u64, codec: CodecId, metric: Metric) -> u64 {
    derive_seed(seed, &[tag("head"), tag(codec.name()), tag(metric.name())])
}

/// Phase 2: trains one head on features of the frozen backbone.
pub fn train_head(
    backbone: &Backbone,
    data: &Dataset,
    codec: CodecId,
    metric: Metric,
    config: HeadConfig,
    train: TrainConfig,
) -> Result<HeadRun> {
    if !backbone.is_frozen() {
        return Err(Error::State("head training needs a frozen backbone".into()));
    }
    let before = backbone.params().hash();
    let features = backbone.extract_features(&data.block_refs())?;
    let run = train_head_on_features(&features, backbone.feature_dim(), data, codec, metric, config, train)?;
    if backbone.params().hash() != before {
        return Err(Error::State("backbone parameters changed during head training".into()));
    }
    Ok(run)
}

/// Phase 2 with precomputed features (one row per dataset block).
pub fn train_head_on_features(
    features: &[Vec<f32>],
    feature_dim: usize,
    data: &Dataset,
    codec: CodecId,
    metric: Metric,
    mut config: HeadConfig,
    train: TrainConfig,
) -> Result<HeadRun> {
    train.validate()?;
    let targets = data.targets(codec, metric);
    if targets.is_empty() {
        return Err(Error::Data(format!("no defined {metric} targets for {codec}")));
    }
    if features.len() != data.blocks.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} blocks",
            features.len(),
            data.blocks.len()
        )));
    }
    let norm = fit_norm(&config, &targets)?;
    config.target_norm = Some(norm);
    let mut head = PredictionHead::new(config, feature_dim, &mut rng(head_seed(train.seed, codec, metric)))?;
    let transform = head.config().target_transform;
    let scaled: Vec<f32> = targets
        .iter()
        .map(|&(_, t)| norm.normalize(transform.apply(t)) as f32)
        .collect();

    let flat: Vec<f32> = features.iter().flatten().copied().collect();
    let feats = Tensor::new(vec![features.len(), feature_dim], flat)?;
    let eb_u = head.eb_tensor::<f32>(&data.ebs)?;
    let mut opt = AdamState::new(head.params(), AdamConfig::default());
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut log = TrainLog {
        config: Some(train),
        losses: Vec::with_capacity(train.epochs),
    };
    let shuffle_seed = derive_seed(head_seed(train.seed, codec, metric), &[tag("shuffle")]);
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng(derive_seed(shuffle_seed, &[epoch as u64])));
        let lr = step_decay(train.lr0, epoch, train.epochs);
        let (mut sum, mut n) = (0.0, 0usize);
        for batch in order.chunks(train.batch_size) {
            let rows = HeadRows {
                feature_rows: batch.iter().map(|&i| data.samples[targets[i].0].block).collect(),
                eb_rows: batch.iter().map(|&i| data.samples[targets[i].0].eb).collect(),
            };
            let mut g = Graph::<f32>::new();
            let p = head.params().bind(&mut g);
            let f = g.input(feats.clone());
            let u = g.input(eb_u.clone());
            let out = head.forward(&mut g, &p, f, u, &rows)?;
            let t = g.input(Tensor::new(
                vec![batch.len(), 1],
                batch.iter().map(|&i| scaled[i]).collect(),
            )?);
            let loss = g.rmse(out.prediction, t)?;
            let value = g.value(loss).item() as f64;
            check_loss(value, epoch)?;
            let mut grads = g.backward(loss);
            let hg = head.params().collect_grads(&p, &mut grads);
            opt.step(head.params_mut(), &hg, lr)?;
            sum += value * batch.len() as f64;
            n += batch.len();
        }
        log.losses.push(sum / n as f64);
    }
    Ok(HeadRun { head, log })
}

#[derive(Clone, Debug)]
pub struct JointRun {
    pub backbone: Backbone,
    pub head: PredictionHead,
    pub log: TrainLog,
}

/// Baseline: a fresh backbone and head trained end to end on one task.
pub fn train_joint(
    data: &Dataset,
    codec: CodecId,
    metric: Metric,
    backbone_config: BackboneConfig,
    mut head_config: HeadConfig,
    train: TrainConfig,
) -> Result<JointRun> {
    train.validate()?;
    let targets = data.targets(codec, metric);
    if targets.is_empty() {
        return Err(Error::Data(format!("no defined {metric} targets for {codec}")));
    }
    let norm = fit_norm(&head_config, &targets)?;
    head_config.target_norm = Some(norm);
    let seed = derive_seed(train.seed, &[tag("joint"), tag(codec.name()), tag(metric.name())]);
    let mut backbone = Backbone::new(backbone_config, &mut rng(derive_seed(seed, &[tag("backbone")])))?;
    let mut head = PredictionHead::new(
        head_config,
        backbone.feature_dim(),
        &mut rng(derive_seed(seed, &[tag("head")])),
    )?;
    let transform = head.config().target_transform;

    let mut per_block: Vec<Vec<(usize, f32)>> = vec![Vec::new(); data.blocks.len()];
    for &(i, t) in &targets {
        let s = &data.samples[i];
        per_block[s.block].push((s.eb, norm.normalize(transform.apply(t)) as f32));
    }
    let mut order: Vec<usize> = (0..data.blocks.len()).filter(|&b| !per_block[b].is_empty()).collect();
    let eb_u = head.eb_tensor::<f32>(&data.ebs)?;
    let mut bb_opt = AdamState::new(backbone.params(), AdamConfig::default());
    let mut head_opt = AdamState::new(head.params(), AdamConfig::default());
    let mut log = TrainLog {
        config: Some(train),
        losses: Vec::with_capacity(train.epochs),
    };
    for epoch in 0..train.epochs {
        order.shuffle(&mut rng(derive_seed(seed, &[tag("shuffle"), epoch as u64])));
        let lr = step_decay(train.lr0, epoch, train.epochs);
        let (mut sum, mut n) = (0.0, 0usize);
        for batch in order.chunks(train.batch_size) {
            let mut rows = HeadRows {
                feature_rows: Vec::new(),
                eb_rows: Vec::new(),
            };
            let mut tv = Vec::new();
            for (bi, &b) in batch.iter().enumerate() {
                for &(e, t) in &per_block[b] {
                    rows.feature_rows.push(bi);
                    rows.eb_rows.push(e);
                    tv.push(t);
                }
            }
            let mut g = Graph::<f32>::new();
            let bp = backbone.params().bind(&mut g);
            let hp = head.params().bind(&mut g);
            let blocks: Vec<&[f32]> = batch.iter().map(|&b| data.blocks[b].as_slice()).collect();
            let x = g.input(backbone.batch_tensor(&blocks)?);
            let feats = backbone.forward(&mut g, &bp, x)?;
            let u = g.input(eb_u.clone());
            let out = head.forward(&mut g, &hp, feats, u, &rows)?;
            let count = tv.len();
            let t = g.input(Tensor::new(vec![count, 1], tv)?);
            let loss = g.rmse(out.prediction, t)?;
            let value = g.value(loss).item() as f64;
            check_loss(value, epoch)?;
            let mut grads = g.backward(loss);
            let bg = backbone.params().collect_grads(&bp, &mut grads);
            let hg = head.params().collect_grads(&hp, &mut grads);
            bb_opt.step(backbone.params_mut(), &bg, lr)?;
            head_opt.step(head.params_mut(), &hg, lr)?;
            sum += value * count as f64;
            n += count;
        }
        log.losses.push(sum / n.max(1) as f64);
    }
    backbone.freeze();
    Ok(JointRun { backbone, head, log })
}

/// Attaches heads for `pairs` to a frozen backbone, sharing one feature
/// pass.
pub fn train_heads(
    model: &mut crate::surrogate::SurrogateModel,
    data: &Dataset,
    pairs: &[HeadKey],
    kind: HeadKind,
    train: TrainConfig,
) -> Result<BTreeMap<String, TrainLog>> {
    if !model.backbone.is_frozen() {
        return Err(Error::State("head training needs a frozen backbone".into()));
    }
    let before = model.backbone.params().hash();
    let features = model.backbone.extract_features(&data.block_refs())?;
    let mut logs = BTreeMap::new();
    for &(codec, metric) in pairs {
        let run = train_head_on_features(
            &features,
            model.backbone.feature_dim(),
            data,
            codec,
            metric,
            HeadConfig::new(kind, metric),
            train,
        )?;
        model.insert_head(codec, metric, run.head)?;
        logs.insert(format!("{codec}/{metric}"), run.log);
    }
    if model.backbone.params().hash() != before {
        return Err(Error::State("backbone parameters changed during head training".into()));
    }
    Ok(logs)
}
