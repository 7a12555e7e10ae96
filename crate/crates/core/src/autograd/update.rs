use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lut::{LutTransform, RowIndex};

/// Pending row gradients, keyed by `(table, row)`.
///
/// Keys iterate in sorted order and vectors are summed in insertion order,
/// so merging per-example gradients slot by slot is reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowGrads {
    rows: BTreeMap<(usize, RowIndex), Vec<f32>>,
}

impl RowGrads {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, table: usize, row: RowIndex, grad: &[f32]) {
        match self.rows.get_mut(&(table, row)) {
            Some(acc) => acc.iter_mut().zip(grad).for_each(|(a, g)| *a += g),
            None => {
                self.rows.insert((table, row), grad.to_vec());
            }
        }
    }

    pub fn add_sparse(&mut self, table: usize, row: RowIndex, width: usize, terms: &[(usize, f32)]) {
        let acc = self.rows.entry((table, row)).or_insert_with(|| vec![0.0; width]);
        for &(k, v) in terms {
            acc[k] += v;
        }
    }

    pub fn merge(&mut self, other: &RowGrads) {
        for (&(t, r), g) in &other.rows {
            self.add(t, r, g);
        }
    }

    pub fn get(&self, table: usize, row: RowIndex) -> Option<&[f32]> {
        self.rows.get(&(table, row)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, RowIndex, &[f32])> {
        self.rows.iter().map(|(&(t, r), g)| (t, r, g.as_slice()))
    }

    /// True when every accumulated value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.rows.values().all(|g| g.iter().all(|&v| v == 0.0))
    }
}

pub(crate) fn check_lr(lr: f32) -> Result<()> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    Ok(())
}

/// `S_ij <- S_ij - lr * grad_ij` for every touched row; other rows are not
/// written.
pub fn apply_update(transform: &mut LutTransform, grads: &RowGrads, lr: f32) -> Result<()> {
    check_lr(lr)?;
    let n_t = transform.n_tables();
    for (t, r, g) in grads.iter() {
        if t >= n_t {
            return Err(Error::CacheMismatch(format!("gradient for table {t} of {n_t}")));
        }
        let table = &mut transform.tables_mut()[t];
        if r >= table.row_count() {
            return Err(Error::CacheMismatch(format!("gradient for row {r} of {}", table.row_count())));
        }
        for (s, g) in table.row_mut(r).iter_mut().zip(g) {
            *s -= lr * g;
        }
    }
    Ok(())
}
