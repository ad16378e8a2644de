//! Vector-valued fields on the cells of a [`Grid`], with frozen (Dirichlet) cells.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    dim: usize,
    values: Vec<f64>,
    frozen: Vec<bool>,
}

impl FieldMap {
    /// All-zero field with nothing frozen.
    pub fn zeros(cells: usize, dim: usize) -> Self {
        FieldMap {
            dim,
            values: vec![0.0; cells * dim],
            frozen: vec![false; cells],
        }
    }

    pub fn from_values(dim: usize, values: Vec<f64>, frozen: Vec<bool>) -> Result<Self> {
        if dim == 0 || values.len() != frozen.len() * dim {
            return Err(invalid(format!(
                "field has {} values for {} cells of dimension {dim}",
                values.len(),
                frozen.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(FieldMap { dim, values, frozen })
    }

    /// Sample `f` at every cell center; collar cells are frozen.
    pub fn from_fn<F: FnMut(&[f64]) -> Vec<f64>>(grid: &Grid, dim: usize, mut f: F) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for i in 0..grid.len() {
            let v = f(grid.center(i));
            assert_eq!(v.len(), dim, "sampled value has the wrong dimension");
            values.extend_from_slice(&v);
        }
        let frozen = (0..grid.len()).map(|i| !grid.is_interior(i)).collect();
        FieldMap { dim, values, frozen }
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Self {
        FieldMap::from_fn(grid, value.len(), |_| value.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frozen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frozen.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn set_frozen(&mut self, i: usize, frozen: bool) {
        self.frozen[i] = frozen;
    }

    pub fn free_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.frozen[i]).collect()
    }

    /// The common value of all collar cells, if they agree bit for bit.
    pub fn constant_exterior(&self, grid: &Grid) -> Option<Vec<f64>> {
        let collar = grid.collar_indices();
        let first = self.value(*collar.first()?);
        collar
            .iter()
            .all(|&i| self.value(i).iter().zip(first).all(|(a, b)| a.to_bits() == b.to_bits()))
            .then(|| first.to_vec())
    }

    /// Largest deviation of `|u_i|` from 1 over all cells.
    pub fn sphere_violation(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.value(i).iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_compatible(&self, cells: usize) -> Result<()> {
        if self.len() != cells {
            return Err(crate::error::Error::Mismatch(format!(
                "field has {} cells, grid has {cells}",
                self.len()
            )));
        }
        Ok(())
    }
}
