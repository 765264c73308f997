//! Prediction error of a trained model against held-out labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::{measure, LabelTable, Measurement};
use super::train::Dataset;
use crate::codec::CodecId;
use crate::error::{Error, Result};
use crate::field::{minmax_normalize_values, sample_blocks, Manifest};
use crate::quality::{mape, percentage_error};
use crate::rng::{derive_seed, tag};
use crate::surrogate::{HeadKey, Metric, PredictionHead, SurrogateModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One prediction per labeled block.
    Block,
    /// Full-field ground truth against the mean of block predictions.
    Field,
}

impl FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Granularity::Block),
            "field" => Ok(Granularity::Field),
            _ => Err(Error::Argument(format!("unknown granularity {s:?} (block | field)"))),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Block => "block",
            Granularity::Field => "field",
        })
    }
}

/// One compared value.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub codec: CodecId,
    pub metric: Metric,
    pub field: String,
    pub eb_rel: f64,
    pub ground_truth: f64,
    pub prediction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapeRow {
    pub codec: CodecId,
    pub metric: Metric,
    pub field: String,
    /// Percent.
    pub mape: f64,
    pub count: usize,
}

/// Per-bound means over the records of one (codec, metric, field).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eb_rel: f64,
    pub ground_truth: f64,
    pub prediction: f64,
    /// Mean signed percentage error.
    pub pe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeCurve {
    pub codec: CodecId,
    pub metric: Metric,
    pub field: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub granularity: Granularity,
    pub rows: Vec<MapeRow>,
    pub curves: Vec<PeCurve>,
    /// Records left out because the ground truth is exactly zero.
    pub skipped_zero: usize,
}

impl EvalReport {
    pub fn from_records(granularity: Granularity, records: &[EvalRecord]) -> Result<Self> {
        let mut groups: BTreeMap<(CodecId, Metric, &str), Vec<&EvalRecord>> = BTreeMap::new();
        let mut skipped_zero = 0;
        for r in records {
            if r.ground_truth == 0.0 {
                skipped_zero += 1;
                continue;
            }
            groups.entry((r.codec, r.metric, r.field.as_str())).or_default().push(r);
        }
        let mut report = EvalReport {
            granularity,
            rows: Vec::new(),
            curves: Vec::new(),
            skipped_zero,
        };
        for ((codec, metric, field), recs) in groups {
            let pairs: Vec<(f64, f64)> = recs.iter().map(|r| (r.ground_truth, r.prediction)).collect();
            report.rows.push(MapeRow {
                codec,
                metric,
                field: field.to_owned(),
                mape: mape(&pairs)?,
                count: pairs.len(),
            });
            let mut by_eb: BTreeMap<u64, (f64, Vec<&EvalRecord>)> = BTreeMap::new();
            for r in recs {
                by_eb
                    .entry(r.eb_rel.to_bits())
                    .or_insert((r.eb_rel, Vec::new()))
                    .1
                    .push(r);
            }
            let mut points = Vec::with_capacity(by_eb.len());
            for (_, (eb_rel, rs)) in by_eb {
                let n = rs.len() as f64;
                let mut pe = 0.0;
                for r in &rs {
                    pe += percentage_error(r.ground_truth, r.prediction)?;
                }
                points.push(CurvePoint {
                    eb_rel,
                    ground_truth: rs.iter().map(|r| r.ground_truth).sum::<f64>() / n,
                    prediction: rs.iter().map(|r| r.prediction).sum::<f64>() / n,
                    pe: pe / n,
                });
            }
            points.sort_by(|a, b| a.eb_rel.total_cmp(&b.eb_rel));
            report.curves.push(PeCurve {
                codec,
                metric,
                field: field.to_owned(),
                points,
            });
        }
        Ok(report)
    }

    pub fn mape_of(&self, codec: CodecId, metric: Metric, field: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.codec == codec && r.metric == metric && r.field == field)
            .map(|r| r.mape)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn check_heads(model: &SurrogateModel, pairs: &[HeadKey]) -> Result<()> {
    for &(codec, metric) in pairs {
        model.head(codec, metric)?;
    }
    Ok(())
}

/// Block-level records of one head, given features for every dataset block.
pub fn block_records(
    head: &PredictionHead,
    features: &[Vec<f32>],
    data: &Dataset,
    codec: CodecId,
    metric: Metric,
) -> Result<Vec<EvalRecord>> {
    let pred = head.predict(metric, features, &data.ebs)?;
    Ok(data
        .targets(codec, metric)
        .into_iter()
        .map(|(i, t)| {
            let s = &data.samples[i];
            EvalRecord {
                codec,
                metric,
                field: data.keys[s.block].0.clone(),
                eb_rel: data.ebs[s.eb],
                ground_truth: t,
                prediction: pred[s.block][s.eb],
            }
        })
        .collect())
}

pub fn evaluate_blocks(model: &SurrogateModel, data: &Dataset) -> Result<EvalReport> {
    let pairs = data.pairs();
    check_heads(model, &pairs)?;
    let features = model.backbone.extract_features(&data.block_refs())?;
    let mut records = Vec::new();
    for (codec, metric) in pairs {
        records.extend(block_records(
            model.head(codec, metric)?,
            &features,
            data,
            codec,
            metric,
        )?);
    }
    EvalReport::from_records(Granularity::Block, &records)
}

/// Field-level evaluation: ground truth on each full test volume, predicted
/// as the mean over `blocks` freshly sampled blocks.
pub fn evaluate_fields(model: &SurrogateModel, test: &LabelTable, seed: u64) -> Result<EvalReport> {
    let p = &test.provenance;
    let pairs: BTreeSet<HeadKey> = test
        .rows
        .iter()
        .flat_map(|r| {
            [
                Some((r.codec, Metric::Cr)),
                r.psnr_db.map(|_| (r.codec, Metric::Psnr)),
                r.ssim.map(|_| (r.codec, Metric::Ssim)),
            ]
        })
        .flatten()
        .collect();
    let pairs: Vec<HeadKey> = pairs.into_iter().collect();
    check_heads(model, &pairs)?;
    let mut ebs: Vec<f64> = test.rows.iter().map(|r| r.eb_rel).collect();
    ebs.sort_by(f64::total_cmp);
    ebs.dedup();
    let codecs: BTreeSet<CodecId> = pairs.iter().map(|&(c, _)| c).collect();
    let (manifest, base) = Manifest::read(&p.manifest)?;

    let mut records = Vec::new();
    for (field_name, timestep) in test.timesteps() {
        let field = manifest.load(&base, &field_name, timestep)?;
        let blocks = sample_blocks(
            &field,
            p.block_spec.dims,
            p.block_spec.count,
            derive_seed(seed, &[tag("eval"), tag(&field_name), timestep as u64]),
        )?;
        let normalized: Vec<Vec<f32>> = blocks.iter().map(|b| minmax_normalize_values(&b.values).0).collect();
        let features = model
            .backbone
            .extract_features(&normalized.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
        for &codec in &codecs {
            let truth: Vec<Measurement> = ebs
                .par_iter()
                .map(|&eb| measure(codec, field.dims(), field.values(), eb))
                .collect::<Result<_>>()?;
            for &(c, metric) in pairs.iter().filter(|(c, _)| *c == codec) {
                let pred = model.head(c, metric)?.predict(metric, &features, &ebs)?;
                for (e, m) in truth.iter().enumerate() {
                    let gt = match metric {
                        Metric::Cr => Some(m.cr),
                        Metric::Psnr => m.psnr_db,
                        Metric::Ssim => m.ssim,
                    };
                    let Some(gt) = gt else { continue };
                    let mean = pred.iter().map(|row| row[e]).sum::<f64>() / pred.len() as f64;
                    records.push(EvalRecord {
                        codec,
                        metric,
                        field: field_name.clone(),
                        eb_rel: ebs[e],
                        ground_truth: gt,
                        prediction: mean,
                    });
                }
            }
        }
    }
    EvalReport::from_records(Granularity::Field, &records)
}

pub fn evaluate(model: &SurrogateModel, test: &LabelTable, granularity: Granularity, seed: u64) -> Result<EvalReport> {
    match granularity {
        Granularity::Block => evaluate_blocks(model, &Dataset::from_labels(test)?),
        Granularity::Field => evaluate_fields(model, test, seed),
    }
}
