use std::collections::BTreeMap;

use muse_autodiff::{Graph, Real, Tensor, Var};
use ndarray::IxDyn;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
    index: BTreeMap<String, usize>,
}

impl<F: Real> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    /// Registers a tensor; names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<F>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Overwrites a parameter, checking the shape.
    pub fn set(&mut self, id: ParamId, value: Tensor<F>) -> Result<()> {
        if value.shape() != self.tensors[id.0].shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}: expected {:?}, got {:?}",
                self.names[id.0],
                self.tensors[id.0].shape(),
                value.shape()
            )));
        }
        self.tensors[id.0] = value;
        Ok(())
    }

    /// Same names and values in another float type.
    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.mapv(|v| G::from_f64_lossy(v.to_f64_lossy())))
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// One forward (and possibly backward) pass over a [`ParamStore`].
///
/// Parameters are bound to graph leaves on first use; only trainable ones
/// are recorded as requiring gradients.
pub struct Session<'s, F> {
    pub g: Graph<F>,
    store: &'s ParamStore<F>,
    bound: Vec<Option<Var>>,
    trainable: Vec<bool>,
}

impl<'s, F: Real> Session<'s, F> {
    /// A no-grad session for inference.
    pub fn inference(store: &'s ParamStore<F>) -> Self {
        Self {
            g: Graph::no_grad(),
            store,
            bound: vec![None; store.len()],
            trainable: vec![false; store.len()],
        }
    }

    /// A training session; `trainable` selects parameters by name.
    pub fn train(store: &'s ParamStore<F>, trainable: impl Fn(&str) -> bool) -> Self {
        Self {
            g: Graph::new(),
            store,
            bound: vec![None; store.len()],
            trainable: store.names.iter().map(|n| trainable(n)).collect(),
        }
    }

    pub fn store(&self) -> &'s ParamStore<F> {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let value = self.store.get(id).clone();
        let v = self.g.leaf(value, self.trainable[id.0]);
        self.bound[id.0] = Some(v);
        v
    }

    /// Binds a parameter to an existing variable instead of the stored value.
    pub fn bind(&mut self, id: ParamId, v: Var) {
        self.bound[id.0] = Some(v);
    }

    pub fn input(&mut self, value: Tensor<F>) -> Var {
        self.g.constant(value)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        self.g.constant(Tensor::zeros(IxDyn(shape)))
    }

    /// Gradients of a scalar with respect to every bound trainable parameter.
    pub fn gradients(&self, loss: Var) -> Vec<(ParamId, Tensor<F>)> {
        let mut grads = self.g.backward(loss);
        self.bound
            .iter()
            .enumerate()
            .filter(|(i, _)| self.trainable[*i])
            .filter_map(|(i, v)| v.and_then(|v| grads.take(v)).map(|t| (ParamId(i), t)))
            .collect()
    }
}
