//! Exact per-forward operation counts for pairwise-hashed models, to set
//! against the instrumented counters in [`OpCounts`].

use crate::error::{Error, Result};
use crate::lut::{HashMode, OpCounts};
use crate::models::{Combine, RnnConfig, TransformerConfig, VOCAB};
use crate::train::Model;

/// Expected counter values for one forward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpectedCounts {
    pub comparisons: u128,
    pub parameter_tests: u128,
    pub additions: u128,
    pub multiplications: u128,
    pub rows_loaded: u128,
    pub values_loaded: u128,
    pub concatenations: u128,
}

impl ExpectedCounts {
    /// Fields that disagree with `measured`, as `(name, expected, measured)`.
    pub fn mismatches(&self, measured: &OpCounts) -> Vec<(&'static str, u128, u128)> {
        [
            ("comparisons", self.comparisons, measured.comparisons),
            ("parameter_tests", self.parameter_tests, measured.parameter_tests),
            ("additions", self.additions, measured.additions),
            ("multiplications", self.multiplications, measured.multiplications),
            ("rows_loaded", self.rows_loaded, measured.rows_loaded),
            ("values_loaded", self.values_loaded, measured.values_loaded),
            ("concatenations", self.concatenations, measured.concatenations),
        ]
        .into_iter()
        .filter(|&(_, e, m)| e != m as u128)
        .map(|(k, e, m)| (k, e, m as u128))
        .collect()
    }
}

/// One pairwise transform applied once.
fn lut(n_t: usize, n_c: usize, n_out: usize) -> ExpectedCounts {
    let (n_t, n_c, n_out) = (n_t as u128, n_c as u128, n_out as u128);
    ExpectedCounts {
        comparisons: n_t * n_c,
        additions: n_t * n_out,
        rows_loaded: n_t,
        values_loaded: 2 * n_t * n_c + n_t * n_out,
        ..Default::default()
    }
}

fn scaled(c: ExpectedCounts, k: u128) -> ExpectedCounts {
    ExpectedCounts {
        comparisons: c.comparisons * k,
        parameter_tests: c.parameter_tests * k,
        additions: c.additions * k,
        multiplications: c.multiplications * k,
        rows_loaded: c.rows_loaded * k,
        values_loaded: c.values_loaded * k,
        concatenations: c.concatenations * k,
    }
}

fn sum(a: ExpectedCounts, b: ExpectedCounts) -> ExpectedCounts {
    ExpectedCounts {
        comparisons: a.comparisons + b.comparisons,
        parameter_tests: a.parameter_tests + b.parameter_tests,
        additions: a.additions + b.additions,
        multiplications: a.multiplications + b.multiplications,
        rows_loaded: a.rows_loaded + b.rows_loaded,
        values_loaded: a.values_loaded + b.values_loaded,
        concatenations: a.concatenations + b.concatenations,
    }
}

fn require_pairwise(mode: HashMode) -> Result<()> {
    match mode {
        HashMode::PairwiseSign => Ok(()),
        _ => Err(Error::InvalidArgument("analytic counts are defined for pairwise hashing only".into())),
    }
}

/// Instrumented counters of one inference pass of `model` over `tokens`.
pub fn runtime_counters(model: &Model, tokens: &[u8]) -> Result<OpCounts> {
    let mut counts = OpCounts::default();
    model.forward_counted(tokens, &mut counts)?;
    Ok(counts)
}

/// RNN forward over `len` tokens, including the unembedder at every step.
pub fn rnn_forward_counts(cfg: &RnnConfig, len: usize) -> Result<ExpectedCounts> {
    require_pairwise(cfg.mode)?;
    let n = cfg.n as u128;
    let mut step = sum(lut(cfg.n_t, cfg.n_c, cfg.n), lut(cfg.n_t_u, cfg.n_c_u, VOCAB));
    step.values_loaded += n;
    if cfg.combine == Combine::Additive {
        step.additions += n;
    }
    Ok(scaled(step, len as u128))
}

/// Transformer forward over `len` tokens. Attention loads one row per table
/// for every causal pair `j < i`, i.e. `n_t * len * (len - 1) / 2` rows.
pub fn transformer_forward_counts(cfg: &TransformerConfig, len: usize) -> ExpectedCounts {
    let (n, l) = (cfg.n as u128, len as u128);
    let (n_t, n_c, p) = (cfg.n_t as u128, cfg.n_c as u128, cfg.p as u128);
    let pairs = l * l.saturating_sub(1) / 2;
    let head = ExpectedCounts {
        comparisons: 2 * n_t * n_c * l,
        parameter_tests: n_t * p * l.saturating_sub(1),
        // row sums plus folding the head into the residual stream
        additions: n_t * n * pairs + n * l,
        multiplications: 0,
        rows_loaded: n_t * pairs,
        values_loaded: 4 * n_t * n_c * l + n_t * p * l.saturating_sub(1) + (3 + n) * n_t * pairs,
        concatenations: n_t * pairs,
    };
    let mut block = scaled(head, cfg.heads as u128);
    if cfg.ffn {
        block = sum(block, scaled(lut(cfg.ffn_n_t, cfg.ffn_n_c, cfg.n), l));
    }
    let mut total = scaled(block, cfg.layers as u128);
    total = sum(total, scaled(lut(cfg.n_t_u, cfg.n_c_u, VOCAB), l));
    total.values_loaded += n * l;
    total
}
