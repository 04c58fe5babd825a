use std::collections::BTreeMap;

use super::{Tape, Tensor, Var};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors with their accumulated gradients.
///
/// Insertion order is the canonical order for optimizer state and checkpoint
/// serialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Vec<f32>>,
    lookup: BTreeMap<String, ParamId>,
}

/// Tape leaves for every parameter of a store, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.lookup.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.values.len());
        self.grads.push(vec![0.0; value.len()]);
        self.values.push(value);
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn grad(&self, id: ParamId) -> &[f32] {
        &self.grads[id.0]
    }

    pub fn grads(&self) -> &[Vec<f32>] {
        &self.grads
    }

    /// Mutable views of every (value, grad) pair, in insertion order.
    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&mut [f32], &[f32])> {
        self.values
            .iter_mut()
            .zip(&self.grads)
            .map(|(v, g)| (v.data_mut(), g.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Places every parameter on the tape as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.values.iter().map(|v| tape.leaf(v.clone())).collect(),
        }
    }

    /// Adds the tape's leaf gradients into the store.
    pub fn accumulate_grads(&mut self, tape: &Tape, bound: &Bound) {
        for (acc, &v) in self.grads.iter_mut().zip(&bound.vars) {
            if let Some(g) = tape.grad(v) {
                for (a, x) in acc.iter_mut().zip(g) {
                    *a += x;
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Replaces a value with one of the same shape.
    pub fn set(&mut self, id: ParamId, value: Tensor) {
        assert_eq!(self.values[id.0].shape(), value.shape(), "set: shape change");
        self.values[id.0] = value;
    }
}
