//! Benchmark harnesses: MoE ablation, timing sweep and two-stage training
//! cost.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{block_records, EvalReport, Granularity};
use super::labels::measure;
use super::train::{train_backbone, train_head_on_features, train_joint, Dataset, TrainConfig};
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::field::{minmax_normalize_values, sample_blocks, VolumeField};
use crate::surrogate::{load_model, Backbone, BackboneConfig, HeadConfig, HeadKey, HeadKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub field: String,
    pub seed: u64,
    /// `(codec, metric, plain MLP MAPE, MoE MAPE)`.
    pub entries: Vec<(CodecId, crate::surrogate::Metric, f64, f64)>,
}

/// Trains plain and MoE heads with matched seeds on the same frozen
/// features and compares their held-out MAPE per field. A backbone is
/// trained per seed unless one is supplied.
pub fn ablation_moe(
    backbone: Option<&Backbone>,
    train: &Dataset,
    test: &Dataset,
    backbone_config: &BackboneConfig,
    backbone_train: TrainConfig,
    head_train: TrainConfig,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    if seeds.is_empty() {
        return Err(Error::Argument("ablation needs at least one seed".into()));
    }
    let pairs = train.pairs();
    let mut rows = Vec::new();
    for &seed in seeds {
        let owned;
        let bb = match backbone {
            Some(b) => b,
            None => {
                owned =
                    train_backbone(train, backbone_config.clone(), TrainConfig { seed, ..backbone_train })?.backbone;
                &owned
            }
        };
        let ftr = bb.extract_features(&train.block_refs())?;
        let fte = bb.extract_features(&test.block_refs())?;
        let mut reports = Vec::new();
        for kind in [HeadKind::PlainMlp, HeadKind::Moe] {
            let mut records = Vec::new();
            for &(codec, metric) in &pairs {
                let run = train_head_on_features(
                    &ftr,
                    bb.feature_dim(),
                    train,
                    codec,
                    metric,
                    HeadConfig::new(kind, metric),
                    TrainConfig { seed, ..head_train },
                )?;
                records.extend(block_records(&run.head, &fte, test, codec, metric)?);
            }
            reports.push(EvalReport::from_records(Granularity::Block, &records)?);
        }
        let fields: std::collections::BTreeSet<&str> = reports[0].rows.iter().map(|r| r.field.as_str()).collect();
        for field in fields {
            let entries = pairs
                .iter()
                .filter_map(|&(c, m)| Some((c, m, reports[0].mape_of(c, m, field)?, reports[1].mape_of(c, m, field)?)))
                .collect();
            rows.push(AblationRow {
                field: field.to_owned(),
                seed,
                entries,
            });
        }
    }
    Ok(rows)
}

/// Wide CSV: one row per (field, seed), a B (plain) and M (MoE) column per
/// (codec, metric).
pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = rows.first() else {
        return Err(Error::Argument("empty ablation table".into()));
    };
    let mut header = vec!["field".to_owned(), "seed".to_owned()];
    for (c, m, _, _) in &first.entries {
        header.push(format!("{c}_{m}_B"));
        header.push(format!("{c}_{m}_M"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.field.clone(), r.seed.to_string()];
        for (_, _, b, m) in &r.entries {
            rec.push(b.to_string());
            rec.push(m.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<ablation csv>", e))?;
    Ok(())
}

/// Wall-clock medians of the two quality-estimation paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub codec: CodecId,
    pub eb_grid: Vec<f64>,
    pub repetitions: usize,
    pub blocks: usize,
    /// Ground truth (compress, decompress, CR/PSNR/SSIM) per bound.
    pub gt_per_eb_s: Vec<f64>,
    /// Model load plus feature extraction, paid once.
    pub surrogate_setup_s: f64,
    /// Head inference per bound.
    pub surrogate_per_eb_s: Vec<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl TimingReport {
    pub fn gt_cumulative(&self) -> Vec<f64> {
        cumsum(0.0, &self.gt_per_eb_s)
    }

    pub fn surrogate_cumulative(&self) -> Vec<f64> {
        cumsum(self.surrogate_setup_s, &self.surrogate_per_eb_s)
    }

    pub fn gt_incremental(&self) -> f64 {
        median(&mut self.gt_per_eb_s.clone())
    }

    pub fn surrogate_incremental(&self) -> f64 {
        median(&mut self.surrogate_per_eb_s.clone())
    }

    /// CSV with cumulative seconds; the leading comment line marks the
    /// wall-clock columns as nondeterministic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<timing csv>", e);
        writeln!(out, "# nondeterministic: gt_cumulative_s,surrogate_cumulative_s").map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eb_index", "eb_rel", "gt_cumulative_s", "surrogate_cumulative_s"])?;
        for (i, (g, s)) in self.gt_cumulative().iter().zip(self.surrogate_cumulative()).enumerate() {
            w.write_record(&[i.to_string(), self.eb_grid[i].to_string(), g.to_string(), s.to_string()])?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }
}

fn cumsum(start: f64, v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(start, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Times ground truth against surrogate inference for every bound in
/// `eb_grid`. The surrogate predicts every metric the model has a head for.
pub fn timing_sweep(
    field: &VolumeField,
    codec: CodecId,
    eb_grid: &[f64],
    model_path: &Path,
    blocks: usize,
    repetitions: usize,
    seed: u64,
) -> Result<TimingReport> {
    super::labels::validate_grid(eb_grid)?;
    if repetitions == 0 {
        return Err(Error::Argument("repetitions must be >= 1".into()));
    }
    let n = eb_grid.len();
    let mut gt = vec![Vec::with_capacity(repetitions); n];
    let mut sur = vec![Vec::with_capacity(repetitions); n];
    let mut setup = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        for (i, &eb) in eb_grid.iter().enumerate() {
            let t = Instant::now();
            std::hint::black_box(measure(codec, field.dims(), field.values(), eb)?);
            gt[i].push(t.elapsed().as_secs_f64());
        }

        let t = Instant::now();
        let model = load_model(model_path)?;
        let dims = model.backbone.config().block_dims;
        let sampled = sample_blocks(field, dims, blocks, seed)?;
        let normalized: Vec<Vec<f32>> = sampled.iter().map(|b| minmax_normalize_values(&b.values).0).collect();
        let features = model
            .backbone
            .extract_features(&normalized.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        setup.push(t.elapsed().as_secs_f64());
        let heads: Vec<_> = model.heads.iter().filter(|((c, _), _)| *c == codec).collect();
        if heads.is_empty() {
            return Err(Error::MissingHead {
                codec: codec.to_string(),
                metric: "any".into(),
            });
        }
        for (i, &eb) in eb_grid.iter().enumerate() {
            let t = Instant::now();
            for ((_, metric), head) in &heads {
                let pred = head.predict(*metric, &features, &[eb])?;
                std::hint::black_box(pred.iter().map(|r| r[0]).sum::<f64>() / pred.len() as f64);
            }
            sur[i].push(t.elapsed().as_secs_f64());
        }
    }
    Ok(TimingReport {
        codec,
        eb_grid: eb_grid.to_vec(),
        repetitions,
        blocks,
        gt_per_eb_s: gt.iter_mut().map(|v| median(v)).collect(),
        surrogate_setup_s: median(&mut setup),
        surrogate_per_eb_s: sur.iter_mut().map(|v| median(v)).collect(),
    })
}

/// Training wall-clock of the two-stage scheme against one from-scratch
/// backbone + head per task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub pairs: Vec<HeadKey>,
    pub backbone_epochs: usize,
    pub head_epochs: usize,
    pub two_stage_s: Vec<f64>,
    pub joint_s: Vec<f64>,
}

impl EfficiencyReport {
    /// Median two-stage time over median joint time.
    pub fn ratio(&self) -> f64 {
        median(&mut self.two_stage_s.clone()) / median(&mut self.joint_s.clone())
    }
}

/// Arm A: one backbone training, then one head per pair on frozen features.
/// Arm B: per pair, a fresh backbone and head trained together for the
/// backbone epoch budget.
pub fn efficiency(
    data: &Dataset,
    backbone_config: &BackboneConfig,
    backbone_train: TrainConfig,
    head_train: TrainConfig,
    kind: HeadKind,
    repetitions: usize,
) -> Result<EfficiencyReport> {
    let pairs = data.pairs();
    let mut report = EfficiencyReport {
        pairs: pairs.clone(),
        backbone_epochs: backbone_train.epochs,
        head_epochs: head_train.epochs,
        two_stage_s: Vec::new(),
        joint_s: Vec::new(),
    };
    for _ in 0..repetitions.max(1) {
        let t = Instant::now();
        let run = train_backbone(data, backbone_config.clone(), backbone_train)?;
        let features = run.backbone.extract_features(&data.block_refs())?;
        for &(codec, metric) in &pairs {
            std::hint::black_box(train_head_on_features(
                &features,
                run.backbone.feature_dim(),
                data,
                codec,
                metric,
                HeadConfig::new(kind, metric),
                head_train,
            )?);
        }
        report.two_stage_s.push(t.elapsed().as_secs_f64());

        let t = Instant::now();
        for &(codec, metric) in &pairs {
            std::hint::black_box(train_joint(
                data,
                codec,
                metric,
                backbone_config.clone(),
                HeadConfig::new(kind, metric),
                backbone_train,
            )?);
        }
        report.joint_s.push(t.elapsed().as_secs_f64());
    }
    Ok(report)
}
