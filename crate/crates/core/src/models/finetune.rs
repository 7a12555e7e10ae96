//! Parameter-efficient fine-tuning: grow a trained transform without
//! changing what it currently computes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::lut::{AnchorSet, HashMode, LookupTable, LutTransform};

/// Append a zero table with fresh anchors. With `train_only` set, gradients
/// flow only into the new table.
pub fn fine_tune_add_table<R: Rng + ?Sized>(
    transform: &LutTransform,
    n_c: usize,
    mode: HashMode,
    train_only: bool,
    rng: &mut R,
) -> Result<LutTransform> {
    let anchors = AnchorSet::sample(transform.n_in(), n_c, mode, rng)?;
    let table = LookupTable::zeros(anchors, transform.n_in(), transform.n_out())?;
    let mut out = transform.clone();
    out.push_table(table);
    out.set_train_only(train_only.then(|| out.n_tables() - 1));
    Ok(out)
}

/// Add comparison `new_pair` to table `table_idx` as its least significant
/// bit, copying every row into both halves.
pub fn fine_tune_split_table(
    transform: &LutTransform,
    table_idx: usize,
    new_pair: (usize, usize),
    train_only: bool,
) -> Result<LutTransform> {
    let Some(old) = transform.tables().get(table_idx) else {
        return Err(Error::InvalidArgument(format!(
            "table {table_idx} out of range (transform has {})",
            transform.n_tables()
        )));
    };
    let split = old.split(new_pair)?;
    let mut out = transform.clone();
    out.tables_mut()[table_idx] = split;
    out.set_train_only(train_only.then_some(table_idx));
    Ok(out)
}
