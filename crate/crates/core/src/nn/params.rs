use rand::Rng as _;

use crate::autodiff::{Matrix, Tape, Tensor};
use crate::error::{validation, Result};
use crate::rng::Rng;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named trainable matrices in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<(String, Matrix)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.entries.push((name.into(), value));
        ParamId(self.entries.len() - 1)
    }

    /// Glorot-uniform matrix in `±sqrt(6 / (rows + cols))`.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut Rng) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, Matrix::from_vec(rows, cols, data).expect("sized buffer"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn entries(&self) -> &[(String, Matrix)] {
        &self.entries
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.entries.iter_mut().map(|(_, m)| m)
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    /// Overwrites values from `(name, matrix)` pairs, which must match this
    /// store's names and shapes one to one.
    pub fn load_from(&mut self, loaded: Vec<(String, Matrix)>) -> Result<()> {
        if loaded.len() != self.entries.len() {
            return Err(validation(format!(
                "checkpoint has {} parameters, model has {}",
                loaded.len(),
                self.entries.len()
            )));
        }
        for ((name, value), (want_name, want)) in loaded.iter().zip(&self.entries) {
            if name != want_name || value.shape() != want.shape() {
                return Err(validation(format!(
                    "checkpoint parameter `{name}` {:?} does not match `{want_name}` {:?}",
                    value.shape(),
                    want.shape()
                )));
            }
        }
        self.entries = loaded;
        Ok(())
    }

    /// Records every parameter as a trainable leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound {
            tensors: self.entries.iter().map(|(_, m)| tape.param(m.clone())).collect(),
        }
    }
}

/// Parameters recorded on one tape.
pub struct Bound<'t> {
    tensors: Vec<Tensor<'t>>,
}

impl<'t> Bound<'t> {
    pub fn get(&self, id: ParamId) -> Tensor<'t> {
        self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor<'t>] {
        &self.tensors
    }
}
