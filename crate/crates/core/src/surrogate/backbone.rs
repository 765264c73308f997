//! Residual 3D CNN that maps a normalized block to a feature vector.

use super::config::BackboneConfig;
use crate::autodiff::{Binding, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
struct ConvLayer {
    weight: ParamId,
    bias: ParamId,
    stride: usize,
    pad: usize,
}

impl ConvLayer {
    fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        rng: &mut Rng,
    ) -> Self {
        ConvLayer {
            weight: store.add_he(format!("{name}.weight"), vec![cout, cin, k, k, k], cin * k * k * k, rng),
            bias: store.add_zeros(format!("{name}.bias"), vec![cout]),
            stride,
            pad: k / 2,
        }
    }

    fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        g.conv3d(x, p[self.weight], p[self.bias], self.stride, self.pad)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ResidualBlock {
    conv1: ConvLayer,
    conv2: ConvLayer,
    projection: Option<ConvLayer>,
}

impl ResidualBlock {
    fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        let y = self.conv1.forward(g, p, x)?;
        let y = g.relu(y);
        let y = self.conv2.forward(g, p, y)?;
        let skip = match &self.projection {
            Some(proj) => proj.forward(g, p, x)?,
            None => x,
        };
        let sum = g.add(y, skip)?;
        Ok(g.relu(sum))
    }
}

/// Shared feature extractor.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    config: BackboneConfig,
    store: ParamStore,
    stem: ConvLayer,
    blocks: Vec<ResidualBlock>,
    fc_weight: ParamId,
    fc_bias: ParamId,
}

impl Backbone {
    pub fn new(config: BackboneConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let stem = ConvLayer::new(&mut store, "backbone.stem", 1, config.stem_channels, 3, 1, rng);
        let mut blocks = Vec::new();
        let mut cin = config.stem_channels;
        for (si, &(nblocks, ch)) in config.stages.iter().enumerate() {
            for bi in 0..nblocks {
                let stride = if bi == 0 { 2 } else { 1 };
                let name = format!("backbone.stage{}.block{bi}", si + 1);
                let conv1 = ConvLayer::new(&mut store, &format!("{name}.conv1"), cin, ch, 3, stride, rng);
                let conv2 = ConvLayer::new(&mut store, &format!("{name}.conv2"), ch, ch, 3, 1, rng);
                let projection = (stride != 1 || cin != ch)
                    .then(|| ConvLayer::new(&mut store, &format!("{name}.proj"), cin, ch, 1, stride, rng));
                blocks.push(ResidualBlock {
                    conv1,
                    conv2,
                    projection,
                });
                cin = ch;
            }
        }
        let fc_weight = store.add_he("backbone.fc.weight", vec![config.feature_dim, cin], cin, rng);
        let fc_bias = store.add_zeros("backbone.fc.bias", vec![config.feature_dim]);
        Ok(Backbone {
            config,
            store,
            stem,
            blocks,
            fc_weight,
            fc_bias,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn freeze(&mut self) {
        self.store.freeze();
    }

    pub fn is_frozen(&self) -> bool {
        self.store.iter().all(|p| !p.trainable)
    }

    /// `x [N, 1, D, H, W] -> [N, F]`
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Binding, x: Var) -> Result<Var> {
        let y = self.stem.forward(g, p, x)?;
        let mut y = g.relu(y);
        for b in &self.blocks {
            y = b.forward(g, p, y)?;
        }
        let pooled = g.global_avg_pool(y)?;
        g.linear(pooled, p[self.fc_weight], p[self.fc_bias])
    }

    /// Stacks normalized blocks into a `[N, 1, D, H, W]` tensor.
    pub fn batch_tensor<T: Real>(&self, blocks: &[&[f32]]) -> Result<Tensor<T>> {
        let d = self.config.block_dims;
        let mut data = Vec::with_capacity(blocks.len() * d.len());
        for b in blocks {
            if b.len() != d.len() {
                return Err(Error::Shape(format!(
                    "block of {} samples does not match backbone block dims {d}",
                    b.len()
                )));
            }
            data.extend(b.iter().map(|&v| T::of(v as f64)));
        }
        Tensor::new(vec![blocks.len(), 1, d.nz, d.ny, d.nx], data)
    }

    /// Features of min-max normalized blocks, computed in batches.
    pub fn extract_features(&self, blocks: &[&[f32]]) -> Result<Vec<Vec<f32>>> {
        const BATCH: usize = 16;
        let f = self.config.feature_dim;
        let mut out = Vec::with_capacity(blocks.len());
        for chunk in blocks.chunks(BATCH) {
            let mut g = Graph::<f32>::new();
            let p = self.store.bind(&mut g);
            let x = g.input(self.batch_tensor(chunk)?);
            let y = self.forward(&mut g, &p, x)?;
            out.extend(g.value(y).data().chunks_exact(f).map(<[f32]>::to_vec));
        }
        Ok(out)
    }
}
