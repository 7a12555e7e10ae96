use std::ops::AddAssign;

/// Per-invocation operation tally.
///
/// Every forward and backward routine takes `&mut OpCounts` and bumps the
/// relevant fields as it runs. Nothing is global: callers that do not care
/// pass a scratch value and drop it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Anchor comparisons evaluated on data (pairwise, component-sign,
    /// hyperplane-sign and bin-edge tests on activations).
    pub comparisons: u64,
    /// Sign tests on learned parameters (positional encoders). These are
    /// input independent and are reported apart from data comparisons.
    pub parameter_tests: u64,
    /// Scalar additions of synaptic values into an accumulator.
    pub additions: u64,
    /// Multiplications involving data values.
    pub multiplications: u64,
    /// Rows read to build an output.
    pub rows_loaded: u64,
    /// Flipped (neighbouring) rows read during a backward pass.
    pub flipped_rows_loaded: u64,
    /// Individual values read from memory: anchor latencies and row entries.
    pub values_loaded: u64,
    /// Index concatenations performed from cached index fragments.
    pub concatenations: u64,
    /// Dense vector dot products (gradient alignment `g`).
    pub dot_products: u64,
    /// Scalar multiplications done in a backward pass outside dot products.
    pub scalar_mults: u64,
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: Self) {
        self.comparisons += o.comparisons;
        self.parameter_tests += o.parameter_tests;
        self.additions += o.additions;
        self.multiplications += o.multiplications;
        self.rows_loaded += o.rows_loaded;
        self.flipped_rows_loaded += o.flipped_rows_loaded;
        self.values_loaded += o.values_loaded;
        self.concatenations += o.concatenations;
        self.dot_products += o.dot_products;
        self.scalar_mults += o.scalar_mults;
    }
}
