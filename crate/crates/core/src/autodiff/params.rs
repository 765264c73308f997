use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::graph::{Grads, Graph, Var};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A named model weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor<f32>,
    pub trainable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered parameter collection owned by one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<f32>) -> ParamId {
        let name = name.into();
        debug_assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Parameter {
            name,
            tensor,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    /// He-normal weights (std `sqrt(2 / fan_in)`).
    pub fn add_he(&mut self, name: impl Into<String>, shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> ParamId {
        self.add_normal(name, shape, (2.0 / fan_in as f64).sqrt(), rng)
    }

    pub fn add_normal(&mut self, name: impl Into<String>, shape: Vec<usize>, std: f64, rng: &mut Rng) -> ParamId {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std).expect("finite std");
        let data = (0..n).map(|_| dist.sample(rng) as f32).collect();
        self.add(name, Tensor::new(shape, data).expect("matching length"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn freeze(&mut self) {
        for p in &mut self.params {
            p.trainable = false;
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Creates graph leaves for every parameter, cast to `T`. Frozen
    /// parameters become constants.
    pub fn bind<T: Real>(&self, g: &mut Graph<T>) -> Binding {
        Binding(
            self.params
                .iter()
                .map(|p| {
                    let t = p.tensor.cast::<T>();
                    if p.trainable {
                        g.param(t)
                    } else {
                        g.input(t)
                    }
                })
                .collect(),
        )
    }

    /// Copies values from `other` by name; every parameter must be present
    /// with the same shape.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for p in &mut self.params {
            let src = other
                .by_name(&p.name)
                .ok_or_else(|| Error::Integrity(format!("missing parameter {}", p.name)))?;
            if src.tensor.shape() != p.tensor.shape() {
                return Err(Error::Integrity(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    p.name,
                    src.tensor.shape(),
                    p.tensor.shape()
                )));
            }
            p.tensor = src.tensor.clone();
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and the little-endian bytes of every value.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            h.update(p.name.as_bytes());
            h.update([0u8]);
            for &d in p.tensor.shape() {
                h.update((d as u64).to_le_bytes());
            }
            for v in p.tensor.data() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Per-parameter f32 gradients from a backward pass over `binding`.
    pub fn collect_grads<T: Real>(&self, binding: &Binding, grads: &mut Grads<T>) -> Vec<Option<Vec<f32>>> {
        binding
            .0
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| {
                if !p.trainable {
                    return None;
                }
                grads.take(v).map(|g| g.into_iter().map(|x| x.f64() as f32).collect())
            })
            .collect()
    }
}

/// Graph variables for a [`ParamStore`], indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Binding(pub Vec<Var>);

impl std::ops::Index<ParamId> for Binding {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}
