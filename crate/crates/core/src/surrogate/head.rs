//! Per-(codec, metric) prediction head: an error-bound embedder (EFE) and a
//! predictor (plain MLP or soft-gated mixture of experts) over the
//! concatenation of block features and the bound embedding.

use super::config::{HeadConfig, HeadKind, Metric};
use crate::autodiff::{Binding, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    fn he(store: &mut ParamStore, name: &str, fin: usize, fout: usize, rng: &mut Rng) -> Self {
        Linear {
            weight: store.add_he(format!("{name}.weight"), vec![fout, fin], fin, rng),
            bias: store.add_zeros(format!("{name}.bias"), vec![fout]),
        }
    }

    /// Output layer: unit-variance-preserving init (std `1/sqrt(fan_in)`).
    fn out(store: &mut ParamStore, name: &str, fin: usize, fout: usize, rng: &mut Rng) -> Self {
        Linear {
            weight: store.add_normal(
                format!("{name}.weight"),
                vec![fout, fin],
                (1.0 / fin as f64).sqrt(),
                rng,
            ),
            bias: store.add_zeros(format!("{name}.bias"), vec![fout]),
        }
    }

    fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        g.linear(x, p[self.weight], p[self.bias])
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Mlp {
    hidden: Linear,
    out: Linear,
}

impl Mlp {
    fn new(store: &mut ParamStore, name: &str, fin: usize, hidden: usize, fout: usize, rng: &mut Rng) -> Self {
        Mlp {
            hidden: Linear::he(store, &format!("{name}.fc1"), fin, hidden, rng),
            out: Linear::out(store, &format!("{name}.fc2"), hidden, fout, rng),
        }
    }

    fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        let h = self.hidden.forward(g, p, x)?;
        let h = g.relu(h);
        self.out.forward(g, p, h)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Predictor {
    Plain(Mlp),
    Moe { router: Linear, experts: Vec<Mlp> },
}

/// Graph nodes produced by [`PredictionHead::forward`].
#[derive(Clone, Copy, Debug)]
pub struct HeadOutput {
    /// `[N, outputs]` normalized predictions.
    pub prediction: Var,
    /// `[N, n_experts]` router weights (MoE heads only).
    pub weights: Option<Var>,
}

/// Rows of a head evaluation: which feature row and which bound each
/// prediction uses.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadRows {
    pub feature_rows: Vec<usize>,
    pub eb_rows: Vec<usize>,
}

impl HeadRows {
    /// Every (block, bound) pair, block-major.
    pub fn grid(n_blocks: usize, n_ebs: usize) -> Self {
        HeadRows {
            feature_rows: (0..n_blocks).flat_map(|b| std::iter::repeat_n(b, n_ebs)).collect(),
            eb_rows: (0..n_blocks).flat_map(|_| 0..n_ebs).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.feature_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature_rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHead {
    config: HeadConfig,
    feature_dim: usize,
    outputs: usize,
    store: ParamStore,
    efe: [Linear; 3],
    predictor: Predictor,
}

impl PredictionHead {
    pub fn new(config: HeadConfig, feature_dim: usize, rng: &mut Rng) -> Result<Self> {
        Self::with_outputs(config, feature_dim, 1, rng)
    }

    /// A head with several outputs (plain MLP only); used for multi-task
    /// backbone training.
    pub fn with_outputs(config: HeadConfig, feature_dim: usize, outputs: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        if outputs == 0 || feature_dim == 0 {
            return Err(Error::Argument("head needs positive feature and output sizes".into()));
        }
        if outputs > 1 && config.kind == HeadKind::Moe {
            return Err(Error::Argument("mixture-of-experts heads have a single output".into()));
        }
        let mut store = ParamStore::new();
        let [h1, h2] = config.embedder.hidden;
        let e = config.embedder.embedding_dim;
        let efe = [
            Linear::he(&mut store, "efe.fc1", 1, h1, rng),
            Linear::he(&mut store, "efe.fc2", h1, h2, rng),
            Linear::out(&mut store, "efe.fc3", h2, e, rng),
        ];
        let fused = feature_dim + e;
        let predictor = match config.kind {
            HeadKind::PlainMlp => {
                Predictor::Plain(Mlp::new(&mut store, "pred", fused, config.mlp_hidden, outputs, rng))
            }
            HeadKind::Moe => Predictor::Moe {
                router: Linear::out(&mut store, "moe.router", fused, config.n_experts, rng),
                experts: (0..config.n_experts)
                    .map(|i| {
                        Mlp::new(
                            &mut store,
                            &format!("moe.expert{i}"),
                            fused,
                            config.expert_hidden,
                            1,
                            rng,
                        )
                    })
                    .collect(),
            },
        };
        Ok(PredictionHead {
            config,
            feature_dim,
            outputs,
            store,
            efe,
            predictor,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    #[cfg(test)]
    pub(crate) fn config_mut(&mut self) -> &mut HeadConfig {
        &mut self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Scaled bound positions as a `[M, 1]` tensor.
    pub fn eb_tensor<T: Real>(&self, ebs: &[f64]) -> Result<Tensor<T>> {
        let u = ebs
            .iter()
            .map(|&e| self.config.embedder.normalize(e).map(T::of))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(vec![ebs.len(), 1], u)
    }

    /// Embedding of scaled bounds `u [M, 1] -> [M, E]`.
    pub fn embed<T: Real>(&self, g: &mut Graph<T>, p: &Binding, u: Var) -> Result<Var> {
        let h = self.efe[0].forward(g, p, u)?;
        let h = g.relu(h);
        let h = self.efe[1].forward(g, p, h)?;
        let h = g.relu(h);
        self.efe[2].forward(g, p, h)
    }

    /// Evaluates the head on `rows` of `features [B, F]` and `u [M, 1]`.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        p: &Binding,
        features: Var,
        u: Var,
        rows: &HeadRows,
    ) -> Result<HeadOutput> {
        if g.shape(features).get(1) != Some(&self.feature_dim) {
            return Err(Error::Shape(format!(
                "head expects {} features, got {:?}",
                self.feature_dim,
                g.shape(features)
            )));
        }
        let emb = self.embed(g, p, u)?;
        let f = g.gather(features, &rows.feature_rows)?;
        let e = g.gather(emb, &rows.eb_rows)?;
        let fused = g.concat(&[f, e])?;
        self.predict_fused(g, p, fused)
    }

    /// Predictor stage on already fused `[N, F + E]` rows.
    pub fn predict_fused<T: Real>(&self, g: &mut Graph<T>, p: &Binding, fused: Var) -> Result<HeadOutput> {
        match &self.predictor {
            Predictor::Plain(mlp) => Ok(HeadOutput {
                prediction: mlp.forward(g, p, fused)?,
                weights: None,
            }),
            Predictor::Moe { router, experts } => {
                let logits = router.forward(g, p, fused)?;
                let weights = g.softmax(logits)?;
                let outs = experts
                    .iter()
                    .map(|e| e.forward(g, p, fused))
                    .collect::<Result<Vec<_>>>()?;
                let stacked = g.concat(&outs)?;
                Ok(HeadOutput {
                    prediction: g.row_dot(weights, stacked)?,
                    weights: Some(weights),
                })
            }
        }
    }

    /// Normalized predictions and router weights for every (feature row,
    /// bound) pair, block-major. Weights are empty for plain heads.
    pub fn predict_normalized(&self, features: &[Vec<f32>], ebs: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut g = Graph::<f32>::new();
        let p = self.store.bind(&mut g);
        let flat: Vec<f32> = features.iter().flatten().copied().collect();
        let feats = g.input(Tensor::new(vec![features.len(), self.feature_dim], flat)?);
        let u = g.input(self.eb_tensor(ebs)?);
        let out = self.forward(&mut g, &p, feats, u, &HeadRows::grid(features.len(), ebs.len()))?;
        let pred = g.value(out.prediction).data().iter().map(|&v| v as f64).collect();
        let weights = match out.weights {
            Some(w) => {
                let k = self.config.n_experts;
                g.value(w)
                    .data()
                    .chunks_exact(k)
                    .map(|r| r.iter().map(|&v| v as f64).collect())
                    .collect()
            }
            None => Vec::new(),
        };
        Ok((pred, weights))
    }

    /// Maps a normalized output back to the metric's units.
    pub fn denormalize(&self, metric: Metric, normalized: f64) -> Result<f64> {
        let norm = self
            .config
            .target_norm
            .ok_or_else(|| Error::State("head has no fitted target normalization".into()))?;
        let v = self.config.target_transform.invert(norm.denormalize(normalized));
        Ok(match metric {
            Metric::Ssim => v.clamp(0.0, 1.0),
            Metric::Cr | Metric::Psnr => v,
        })
    }

    /// Metric predictions `[block][eb]` for the given features.
    pub fn predict(&self, metric: Metric, features: &[Vec<f32>], ebs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (pred, _) = self.predict_normalized(features, ebs)?;
        pred.chunks(ebs.len().max(1))
            .map(|row| row.iter().map(|&v| self.denormalize(metric, v)).collect())
            .collect()
    }

    /// Copies one expert's parameters into every other expert.
    pub fn tie_experts(&mut self) {
        let Predictor::Moe { experts, .. } = &self.predictor else {
            return;
        };
        let first = experts[0].clone();
        let ids: Vec<(ParamId, ParamId)> = experts[1..]
            .iter()
            .flat_map(|e| {
                [
                    (first.hidden.weight, e.hidden.weight),
                    (first.hidden.bias, e.hidden.bias),
                    (first.out.weight, e.out.weight),
                    (first.out.bias, e.out.bias),
                ]
            })
            .collect();
        for (src, dst) in ids {
            let t = self.store.get(src).tensor.clone();
            self.store.get_mut(dst).tensor = t;
        }
    }

    /// Router parameter ids (MoE heads only).
    pub fn router_params(&self) -> Option<(ParamId, ParamId)> {
        match &self.predictor {
            Predictor::Moe { router, .. } => Some((router.weight, router.bias)),
            Predictor::Plain(_) => None,
        }
    }
}
