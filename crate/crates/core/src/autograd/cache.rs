use crate::lut::RowIndex;

/// What the backward pass needs from one table's forward evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableCache {
    pub row: RowIndex,
    pub r_min: usize,
    pub u_min: f32,
}

/// Per-transform cache: one entry per table. Activations are not kept.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerCache {
    pub tables: Vec<TableCache>,
    /// Every margin of every table. Only filled for rules that look at all
    /// pairs.
    pub margins: Option<Vec<Vec<f32>>>,
}

impl LayerCache {
    /// Table with the smallest `|u_min|` among those accepted by `keep`
    /// (first on ties).
    pub fn layer_minimal(&self, keep: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, f32)> = None;
        for (i, c) in self.tables.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            if best.is_none_or(|(_, u)| c.u_min.abs() < u.abs()) {
                best = Some((i, c.u_min));
            }
        }
        best.map(|(i, _)| i)
    }
}
