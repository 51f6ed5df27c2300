use std::collections::HashMap;

use super::{NumericsError, Real};

/// A named, row-major parameter with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> ParameterTensor<T> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        ParameterTensor { name: name.into(), shape: shape.to_vec(), values: vec![T::zero(); n], grad: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Gradient buffers laid out like a [`ParamStore`]; backward passes add into
/// these so parameter values can be borrowed at the same time.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    bufs: Vec<Vec<T>>,
}

impl<T: Real> Grads<T> {
    pub fn get(&self, id: ParamId) -> &[T] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.bufs[id.0]
    }

    pub fn add(&mut self, other: &Grads<T>) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for x in self.bufs.iter_mut().flatten() {
            *x *= factor;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.bufs.iter().map(Vec::as_slice)
    }
}

/// Ordered collection of parameters addressed by [`ParamId`] or name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    tensors: Vec<ParameterTensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { tensors: Vec::new(), index: HashMap::new() }
    }

    /// Registers a zero-initialised tensor. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.push(ParameterTensor::zeros(name, shape))
    }

    pub fn push(&mut self, tensor: ParameterTensor<T>) -> ParamId {
        assert!(!self.index.contains_key(&tensor.name), "duplicate parameter {}", tensor.name);
        let id = self.tensors.len();
        self.index.insert(tensor.name.clone(), id);
        self.tensors.push(tensor);
        ParamId(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &ParameterTensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParameterTensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        &self.tensors[id.0].values
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(ParameterTensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParameterTensor<T>> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParameterTensor<T>> {
        self.tensors.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Fresh zeroed gradient buffers shaped like this store.
    pub fn grads_like(&self) -> Grads<T> {
        Grads { bufs: self.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect() }
    }

    /// Adds `grads` into the tensors' own gradient buffers.
    pub fn accumulate(&mut self, grads: &Grads<T>) {
        for (t, g) in self.tensors.iter_mut().zip(&grads.bufs) {
            for (x, y) in t.grad.iter_mut().zip(g) {
                *x += *y;
            }
        }
    }

    /// Copies of the gradient buffers.
    pub fn grads(&self) -> Grads<T> {
        Grads { bufs: self.tensors.iter().map(|t| t.grad.clone()).collect() }
    }

    /// Global L2 norm over every gradient entry.
    pub fn grad_norm(&self) -> T {
        let sq: f64 = self.tensors.iter().flat_map(|t| &t.grad).map(|g| g.f64() * g.f64()).sum();
        T::of(sq.sqrt())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.values.iter().all(|v| v.is_finite()))
    }

    /// Converts every tensor to another precision; gradients are reset.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for t in &self.tensors {
            out.push(ParameterTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                values: t.values.iter().map(|v| U::of(v.f64())).collect(),
                grad: vec![U::zero(); t.len()],
            });
        }
        out
    }

    /// Overwrites values from `(name, shape, values)` triples; every
    /// registered tensor must be supplied with a matching shape.
    pub fn load_values(&mut self, tensors: Vec<(String, Vec<usize>, Vec<T>)>) -> Result<(), NumericsError> {
        let mut seen = vec![false; self.tensors.len()];
        for (name, shape, values) in tensors {
            let id = self.id(&name).ok_or_else(|| NumericsError::UnknownParameter(name.clone()))?;
            let t = &mut self.tensors[id.0];
            if t.shape != shape || values.len() != t.len() {
                return Err(NumericsError::DimensionMismatch { what: name, expected: t.shape.clone(), found: shape });
            }
            t.values = values;
            seen[id.0] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(NumericsError::MissingParameter(self.tensors[i].name.clone())),
            None => Ok(()),
        }
    }
}
