use crate::error::{Error, Result};
use crate::lut::anchors::{AnchorSet, MinPair, RowIndex};
use crate::lut::counters::OpCounts;

/// One look-up table: anchors plus `row_count x n_out` synaptic values.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable {
    anchors: AnchorSet,
    n_in: usize,
    n_out: usize,
    rows: Vec<f32>,
}

impl LookupTable {
    /// A table with every synaptic value zero.
    pub fn zeros(anchors: AnchorSet, n_in: usize, n_out: usize) -> Result<Self> {
        anchors.validate(n_in)?;
        let count = anchors.row_count()?;
        let len = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(n_out))
            .ok_or_else(|| Error::InvalidDimension(format!("{count} rows of width {n_out} do not fit in memory")))?;
        Ok(LookupTable {
            anchors,
            n_in,
            n_out,
            rows: vec![0.0; len],
        })
    }

    /// Build from explicit row data (row-major).
    pub fn from_rows(anchors: AnchorSet, n_in: usize, n_out: usize, rows: Vec<f32>) -> Result<Self> {
        anchors.validate(n_in)?;
        let count = anchors.row_count()? as usize;
        if rows.len() != count * n_out {
            return Err(Error::DimensionMismatch {
                expected: count * n_out,
                got: rows.len(),
            });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("synaptic values must be finite".into()));
        }
        Ok(LookupTable {
            anchors,
            n_in,
            n_out,
            rows,
        })
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub(crate) fn anchors_mut(&mut self) -> &mut AnchorSet {
        &mut self.anchors
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_comparisons(&self) -> usize {
        self.anchors.n_comparisons()
    }

    pub fn row_count(&self) -> u64 {
        (self.rows.len() / self.n_out.max(1)) as u64
    }

    pub fn row(&self, j: RowIndex) -> &[f32] {
        let j = j as usize;
        &self.rows[j * self.n_out..(j + 1) * self.n_out]
    }

    pub fn row_mut(&mut self, j: RowIndex) -> &mut [f32] {
        let j = j as usize;
        &mut self.rows[j * self.n_out..(j + 1) * self.n_out]
    }

    pub fn rows(&self) -> &[f32] {
        &self.rows
    }

    pub fn rows_mut(&mut self) -> &mut [f32] {
        &mut self.rows
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::DimensionMismatch {
                expected: self.n_in,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Row selected by `x`.
    pub fn compute_index(&self, x: &[f32]) -> Result<RowIndex> {
        self.check_input(x)?;
        Ok(self.anchors.index(x, &mut OpCounts::default()))
    }

    /// Row selected by `x` together with the comparison closest to flipping.
    pub fn compute_index_cached(&self, x: &[f32]) -> Result<(RowIndex, MinPair)> {
        self.check_input(x)?;
        Ok(self.anchors.index_with_min(x, &mut OpCounts::default()))
    }

    pub(crate) fn index_counted(&self, x: &[f32], counts: &mut OpCounts) -> RowIndex {
        self.anchors.index(x, counts)
    }

    pub(crate) fn index_with_min_counted(&self, x: &[f32], counts: &mut OpCounts) -> (RowIndex, MinPair) {
        self.anchors.index_with_min(x, counts)
    }

    /// `y += rows[j]`, counting one row load.
    #[inline]
    pub(crate) fn add_row_into(&self, j: RowIndex, y: &mut [f32], counts: &mut OpCounts) {
        let row = self.row(j);
        counts.rows_loaded += 1;
        counts.values_loaded += row.len() as u64;
        counts.additions += row.len() as u64;
        for (y, s) in y.iter_mut().zip(row) {
            *y += s;
        }
    }

    /// Append a comparison as the new least significant digit. Both halves
    /// start as copies of the old rows, so every input keeps its output.
    pub fn split(&self, new_pair: (usize, usize)) -> Result<Self> {
        let (a, b) = new_pair;
        if a >= self.n_in || b >= self.n_in || a == b {
            return Err(Error::InvalidAnchor(format!(
                "pair ({a}, {b}) invalid for input of width {}",
                self.n_in
            )));
        }
        let anchors = match &self.anchors {
            AnchorSet::PairwiseSign { pairs } => {
                let mut pairs = pairs.clone();
                pairs.push(new_pair);
                AnchorSet::PairwiseSign { pairs }
            }
            AnchorSet::Mixed { .. } => {
                return Err(Error::WrongMode {
                    expected: "pairwise-sign",
                    found: "mixed",
                })
            }
            other => {
                return Err(Error::WrongMode {
                    expected: "pairwise-sign",
                    found: other.mode_name(),
                })
            }
        };
        anchors.row_count()?;
        let mut rows = Vec::with_capacity(self.rows.len() * 2);
        for row in self.rows.chunks(self.n_out) {
            rows.extend_from_slice(row);
            rows.extend_from_slice(row);
        }
        LookupTable::from_rows(anchors, self.n_in, self.n_out, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: Vec<(usize, usize)>, n_in: usize) -> LookupTable {
        LookupTable::zeros(AnchorSet::PairwiseSign { pairs }, n_in, 2).unwrap()
    }

    #[test]
    fn concatenation_reads_msb_first() {
        // outcomes (0, 1, 1) -> 0b011
        let t = table(vec![(0, 1), (1, 2), (2, 4)], 5);
        let x = [1.0, 2.0, 0.5, 9.0, 0.0];
        assert_eq!(t.compute_index(&x).unwrap(), 3);
    }

    #[test]
    fn ties_read_as_zero() {
        let t = table(vec![(0, 1), (1, 2), (2, 0)], 3);
        assert_eq!(t.compute_index(&[4.0; 3]).unwrap(), 0);
    }

    #[test]
    fn min_pair_example() {
        let t = table(vec![(0, 1), (1, 2)], 4);
        let (_, mp) = t.compute_index_cached(&[1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(mp, MinPair { r: 0, u: -1.0 });
    }

    #[test]
    fn min_pair_tie_goes_to_first() {
        let t = table(vec![(0, 1), (2, 3)], 4);
        let (_, mp) = t.compute_index_cached(&[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(mp, MinPair { r: 0, u: 0.5 });
    }

    #[test]
    fn wrong_width_rejected() {
        let t = table(vec![(0, 1)], 3);
        assert!(matches!(t.compute_index(&[0.0; 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn out_of_range_anchor_rejected() {
        let r = LookupTable::zeros(AnchorSet::PairwiseSign { pairs: vec![(0, 5)] }, 3, 1);
        assert!(matches!(r, Err(Error::InvalidAnchor(_))));
    }

    #[test]
    fn split_doubles_rows_and_appends_lsb() {
        let mut t = table(vec![(0, 1)], 3);
        t.row_mut(1).copy_from_slice(&[3.0, 4.0]);
        let s = t.split((1, 2)).unwrap();
        assert_eq!(s.row_count(), 4);
        assert_eq!(s.row(2), &[3.0, 4.0]);
        assert_eq!(s.row(3), &[3.0, 4.0]);
        let x = [2.0, 1.0, 0.0];
        assert_eq!(s.compute_index(&x).unwrap(), 2 * t.compute_index(&x).unwrap() + 1);
    }
}
