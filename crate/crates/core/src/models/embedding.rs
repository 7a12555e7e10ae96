use crate::autograd::update::check_lr;
use crate::autograd::RowGrads;
use crate::error::{Error, Result};

/// Dense table of learnable vectors indexed by an integer (byte token or
/// positional offset). Rows are added, never multiplied.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Embedding {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Embedding {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_data(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                got: data.len(),
            });
        }
        Ok(Embedding { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Gradients are keyed `(0, row)`.
    pub fn apply(&mut self, grads: &RowGrads, lr: f32) -> Result<()> {
        check_lr(lr)?;
        for (_, r, g) in grads.iter() {
            let r = r as usize;
            if r >= self.rows {
                return Err(Error::CacheMismatch(format!("embedding row {r} of {}", self.rows)));
            }
            for (e, g) in self.row_mut(r).iter_mut().zip(g) {
                *e -= lr * g;
            }
        }
        Ok(())
    }
}
