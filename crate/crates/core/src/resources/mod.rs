//! Analytic memory, bandwidth and compute costs, plus exact expected
//! counter values for instrumented forward passes.

pub mod capacity;
pub mod counts;
pub mod formulas;
pub mod report;

pub use capacity::{binned_capacity, capacity, factorial_capacity};
pub use counts::{rnn_forward_counts, runtime_counters, transformer_forward_counts, ExpectedCounts};
pub use formulas::{
    ann_transformer_report, lut_component, snn_rnn_report, snn_transformer_report, snn_transformer_table,
    AnnTransformerConfig, SnnTransformerShape,
};
pub use report::{Bandwidth, Component, Compute, ResourceReport};
