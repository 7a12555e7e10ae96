//! Latency-pattern hashing and the look-up transform.

pub mod anchors;
pub mod counters;
pub mod table;
pub mod transform;

pub use anchors::{flip_bit, init_anchor_set, AnchorSet, Bins, HashMode, MinPair, RowIndex};
pub use counters::OpCounts;
pub use table::LookupTable;
pub use transform::LutTransform;
