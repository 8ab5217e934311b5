use crate::error::{invalid, Result};

/// `n` observations in `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("dataset dimension must be at least 1");
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return invalid(format!(
                "dataset needs a positive multiple of {dim} values, got {}",
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return invalid(format!("non-finite value in observation {}", pos / dim));
        }
        Ok(Dataset { dim, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) => r.len(),
            None => return invalid("dataset must contain at least one observation"),
        };
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return invalid(format!("observation {i} does not have dimension {dim}"));
        }
        Dataset::new(dim, rows.concat())
    }

    /// Stacks `first` on top of `second`.
    pub fn pooled(first: &Dataset, second: &Dataset) -> Result<Self> {
        if first.dim != second.dim {
            return invalid(format!(
                "samples have different dimensions ({} and {})",
                first.dim, second.dim
            ));
        }
        let mut values = Vec::with_capacity(first.values.len() + second.values.len());
        values.extend_from_slice(&first.values);
        values.extend_from_slice(&second.values);
        Ok(Dataset { dim: first.dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Dataset::new(self.dim, self.values.iter().map(|&x| f(x)).collect())
    }

    /// Adds `shift` to every coordinate.
    pub fn shifted(mut self, shift: f64) -> Self {
        self.values.iter_mut().for_each(|x| *x += shift);
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}
