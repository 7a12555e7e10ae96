use rand::Rng;

use crate::error::{Error, Result};
use crate::lut::anchors::{AnchorSet, HashMode};
use crate::lut::counters::OpCounts;
use crate::lut::table::LookupTable;

/// A bank of `n_t` look-up tables whose selected rows are summed:
/// `y = (residual ? x : 0) + sum_i rows_i[H_i(x)]`.
///
/// The forward pass only compares, concatenates and adds. It is immutable
/// and can be shared between threads; learning needs `&mut`.
#[derive(Clone, Debug, PartialEq)]
pub struct LutTransform {
    tables: Vec<LookupTable>,
    n_in: usize,
    n_out: usize,
    residual: bool,
    train_only: Option<usize>,
}

impl LutTransform {
    /// Zero-initialised transform with freshly sampled anchors.
    pub fn new<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        n_t: usize,
        n_c: usize,
        mode: HashMode,
        residual: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let tables = (0..n_t)
            .map(|_| LookupTable::zeros(AnchorSet::sample(n_in, n_c, mode, rng)?, n_in, n_out))
            .collect::<Result<Vec<_>>>()?;
        Self::from_tables(tables, n_in, n_out, residual)
    }

    pub fn from_tables(tables: Vec<LookupTable>, n_in: usize, n_out: usize, residual: bool) -> Result<Self> {
        if residual && n_in != n_out {
            return Err(Error::InvalidDimension(format!(
                "residual transform needs n_in == n_out, got {n_in} -> {n_out}"
            )));
        }
        for t in &tables {
            if t.n_in() != n_in || t.n_out() != n_out {
                return Err(Error::DimensionMismatch {
                    expected: n_in,
                    got: t.n_in(),
                });
            }
        }
        Ok(LutTransform {
            tables,
            n_in,
            n_out,
            residual,
            train_only: None,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn tables(&self) -> &[LookupTable] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [LookupTable] {
        &mut self.tables
    }

    pub(crate) fn push_table(&mut self, table: LookupTable) {
        self.tables.push(table);
    }

    /// Restrict learning to a single table (fine-tuning). `None` trains all.
    pub fn set_train_only(&mut self, table: Option<usize>) {
        self.train_only = table;
    }

    pub fn train_only(&self) -> Option<usize> {
        self.train_only
    }

    pub fn is_trainable(&self, table: usize) -> bool {
        self.train_only.is_none_or(|t| t == table)
    }

    /// Total number of stored synaptic values.
    pub fn footprint(&self) -> u64 {
        self.tables.iter().map(|t| t.rows().len() as u64).sum()
    }

    pub(crate) fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Inference forward pass.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        self.forward_counted(x, &mut OpCounts::default())
    }

    pub fn forward_counted(&self, x: &[f32], counts: &mut OpCounts) -> Result<Vec<f32>> {
        self.check_input(x)?;
        let mut y = if self.residual { x.to_vec() } else { vec![0.0; self.n_out] };
        self.accumulate(x, &mut y, counts);
        Ok(y)
    }

    /// `y += sum_i rows_i[H_i(x)]` without the residual term.
    pub(crate) fn accumulate(&self, x: &[f32], y: &mut [f32], counts: &mut OpCounts) {
        for t in &self.tables {
            let j = t.index_counted(x, counts);
            t.add_row_into(j, y, counts);
        }
    }
}
