//! Anchor sets: how a table turns a latency vector into a row index.
//!
//! Every strategy reduces to a list of comparisons. Comparison `r` yields a
//! signed margin `u_r` and a digit; digits are concatenated most significant
//! first, so comparison 0 owns the top digit of the index.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lut::counters::OpCounts;

/// Row index into a look-up table.
pub type RowIndex = u64;

/// Largest index width supported by [`RowIndex`].
pub const MAX_INDEX_BITS: u32 = 63;

/// Hashing strategy requested when sampling an [`AnchorSet`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HashMode {
    /// `x[a] - x[b] > 0` for random pairs `a != b`.
    PairwiseSign,
    /// Base-`bins` digit of the bin holding `x[a]`, uniform bins over `[lo, hi]`.
    BinQuantized { bins: u32, lo: f32, hi: f32 },
    /// `c . x > 0` for random planes `c`.
    HyperplaneSign,
    /// `x[a] > 0`.
    ComponentSign,
}

impl HashMode {
    /// Bin quantisation with the default range `(-1, 1)`.
    pub fn bins(m: u32) -> Self {
        HashMode::BinQuantized {
            bins: m,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

/// Uniform bins over `[lo, hi]` with clamping outside the range.
///
/// Bin `d` (zero based) covers `(e_d, e_{d+1}]` where `e_k = lo + k (hi - lo) / m`,
/// `e_0 = -inf` and `e_m = +inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bins {
    pub m: u32,
    pub lo: f32,
    pub hi: f32,
}

impl Bins {
    fn edge(&self, k: u32) -> f32 {
        self.lo + (self.hi - self.lo) * k as f32 / self.m as f32
    }

    /// Zero-based bin number of `x`.
    pub fn digit(&self, x: f32) -> u32 {
        let w = (self.hi - self.lo) / self.m as f32;
        let guess = ((x - self.lo) / w).ceil() - 1.0;
        let mut d = if guess.is_nan() || guess < 0.0 {
            0
        } else {
            (guess as u32).min(self.m - 1)
        };
        // Settle against the exact edge values so digit and margin agree.
        while d > 0 && x <= self.edge(d) {
            d -= 1;
        }
        while d + 1 < self.m && x > self.edge(d + 1) {
            d += 1;
        }
        d
    }

    /// Digit of `x` and its signed distance to the nearest interior bin edge.
    /// A positive margin means crossing that edge moves one bin down.
    pub fn digit_and_margin(&self, x: f32) -> (u32, f32) {
        let d = self.digit(x);
        let below = (d > 0).then(|| x - self.edge(d));
        let above = (d + 1 < self.m).then(|| x - self.edge(d + 1));
        let u = match (below, above) {
            (Some(lo), Some(hi)) => {
                if hi.abs() <= lo.abs() {
                    hi
                } else {
                    lo
                }
            }
            (Some(lo), None) => lo,
            (None, Some(hi)) => hi,
            (None, None) => unreachable!("at least two bins"),
        };
        (d, u)
    }
}

/// The anchors of one look-up table.
#[derive(Clone, Debug, PartialEq)]
pub enum AnchorSet {
    PairwiseSign {
        pairs: Vec<(usize, usize)>,
    },
    ComponentSign {
        singles: Vec<usize>,
    },
    HyperplaneSign {
        planes: Vec<Vec<f32>>,
    },
    BinQuantized {
        singles: Vec<usize>,
        bins: Bins,
    },
    /// Pairwise comparisons followed by component-sign bits. Used by attention
    /// tables whose input is a concatenation of blocks.
    Mixed {
        pairs: Vec<(usize, usize)>,
        singles: Vec<usize>,
    },
}

/// Sample an anchor set. The seed fully determines the result.
pub fn init_anchor_set(n_in: usize, n_c: usize, mode: HashMode, seed: u64) -> Result<AnchorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AnchorSet::sample(n_in, n_c, mode, &mut rng)
}

fn sample_singles<R: Rng + ?Sized>(n_in: usize, n_c: usize, rng: &mut R) -> Vec<usize> {
    if n_c <= n_in {
        sample(rng, n_in, n_c).into_vec()
    } else {
        (0..n_c).map(|_| rng.random_range(0..n_in)).collect()
    }
}

/// Uniform over ordered pairs with `a != b`.
pub fn sample_pair<R: Rng + ?Sized>(n_in: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.random_range(0..n_in);
    let mut b = rng.random_range(0..n_in - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

impl AnchorSet {
    pub fn sample<R: Rng + ?Sized>(
        n_in: usize,
        n_c: usize,
        mode: HashMode,
        rng: &mut R,
    ) -> Result<Self> {
        if n_c == 0 {
            return Err(Error::InvalidDimension("a table needs at least one comparison".into()));
        }
        let set = match mode {
            HashMode::PairwiseSign => {
                if n_in < 2 {
                    return Err(Error::InvalidDimension(format!(
                        "pairwise anchors need n_in >= 2, got {n_in}"
                    )));
                }
                AnchorSet::PairwiseSign {
                    pairs: (0..n_c).map(|_| sample_pair(n_in, rng)).collect(),
                }
            }
            HashMode::ComponentSign => {
                if n_in == 0 {
                    return Err(Error::InvalidDimension("n_in must be positive".into()));
                }
                AnchorSet::ComponentSign {
                    singles: sample_singles(n_in, n_c, rng),
                }
            }
            HashMode::HyperplaneSign => {
                if n_in == 0 {
                    return Err(Error::InvalidDimension("n_in must be positive".into()));
                }
                AnchorSet::HyperplaneSign {
                    planes: (0..n_c)
                        .map(|_| (0..n_in).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                        .collect(),
                }
            }
            HashMode::BinQuantized { bins, lo, hi } => {
                if n_in == 0 {
                    return Err(Error::InvalidDimension("n_in must be positive".into()));
                }
                let bins = Bins { m: bins, lo, hi };
                check_bins(&bins)?;
                AnchorSet::BinQuantized {
                    singles: sample_singles(n_in, n_c, rng),
                    bins,
                }
            }
        };
        set.row_count()?;
        Ok(set)
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            AnchorSet::PairwiseSign { .. } => "pairwise-sign",
            AnchorSet::ComponentSign { .. } => "component-sign",
            AnchorSet::HyperplaneSign { .. } => "hyperplane-sign",
            AnchorSet::BinQuantized { .. } => "bin-quantized",
            AnchorSet::Mixed { .. } => "mixed",
        }
    }

    /// Number of comparisons `n_c` (digits in the index).
    pub fn n_comparisons(&self) -> usize {
        match self {
            AnchorSet::PairwiseSign { pairs } => pairs.len(),
            AnchorSet::ComponentSign { singles } => singles.len(),
            AnchorSet::HyperplaneSign { planes } => planes.len(),
            AnchorSet::BinQuantized { singles, .. } => singles.len(),
            AnchorSet::Mixed { pairs, singles } => pairs.len() + singles.len(),
        }
    }

    pub fn radix(&self) -> u64 {
        match self {
            AnchorSet::BinQuantized { bins, .. } => bins.m as u64,
            _ => 2,
        }
    }

    /// `radix ^ n_c`, rejecting widths beyond [`MAX_INDEX_BITS`].
    pub fn row_count(&self) -> Result<u64> {
        let n = self.n_comparisons() as u32;
        match self.radix() {
            2 if n <= MAX_INDEX_BITS => Ok(1u64 << n),
            2 => Err(Error::IndexTooWide(n)),
            m => m
                .checked_pow(n)
                .filter(|&rows| rows <= 1u64 << MAX_INDEX_BITS)
                .ok_or_else(|| {
                    let bits = (m as f64).log2() * n as f64;
                    Error::IndexTooWide(bits.ceil() as u32)
                }),
        }
    }

    /// Check that every index lies inside an input of width `n_in`.
    pub fn validate(&self, n_in: usize) -> Result<()> {
        let check = |i: usize| {
            if i >= n_in {
                Err(Error::InvalidAnchor(format!("index {i} outside input of width {n_in}")))
            } else {
                Ok(())
            }
        };
        let check_pairs = |pairs: &[(usize, usize)]| -> Result<()> {
            for &(a, b) in pairs {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(Error::InvalidAnchor(format!("degenerate pair ({a}, {a})")));
                }
            }
            Ok(())
        };
        match self {
            AnchorSet::PairwiseSign { pairs } => check_pairs(pairs)?,
            AnchorSet::ComponentSign { singles } => singles.iter().try_for_each(|&a| check(a))?,
            AnchorSet::HyperplaneSign { planes } => {
                for c in planes {
                    if c.len() != n_in {
                        return Err(Error::InvalidAnchor(format!(
                            "plane of width {} for input of width {n_in}",
                            c.len()
                        )));
                    }
                }
            }
            AnchorSet::BinQuantized { singles, bins } => {
                check_bins(bins)?;
                singles.iter().try_for_each(|&a| check(a))?
            }
            AnchorSet::Mixed { pairs, singles } => {
                check_pairs(pairs)?;
                singles.iter().try_for_each(|&a| check(a))?
            }
        }
        if self.n_comparisons() == 0 {
            return Err(Error::InvalidAnchor("empty anchor set".into()));
        }
        self.row_count().map(|_| ())
    }

    /// Signed margin `u_r` and digit of comparison `r`.
    #[inline]
    pub fn probe(&self, r: usize, x: &[f32], counts: &mut OpCounts) -> (f32, u64) {
        counts.comparisons += 1;
        match self {
            AnchorSet::PairwiseSign { pairs } => {
                let (a, b) = pairs[r];
                counts.values_loaded += 2;
                let u = x[a] - x[b];
                (u, (u > 0.0) as u64)
            }
            AnchorSet::ComponentSign { singles } => {
                counts.values_loaded += 1;
                let u = x[singles[r]];
                (u, (u > 0.0) as u64)
            }
            AnchorSet::HyperplaneSign { planes } => {
                let c = &planes[r];
                counts.values_loaded += 2 * c.len() as u64;
                counts.multiplications += c.len() as u64;
                let u: f32 = c.iter().zip(x).map(|(c, x)| c * x).sum();
                (u, (u > 0.0) as u64)
            }
            AnchorSet::BinQuantized { singles, bins } => {
                counts.values_loaded += 1;
                let (d, u) = bins.digit_and_margin(x[singles[r]]);
                (u, d as u64)
            }
            AnchorSet::Mixed { pairs, singles } => {
                if r < pairs.len() {
                    let (a, b) = pairs[r];
                    counts.values_loaded += 2;
                    let u = x[a] - x[b];
                    (u, (u > 0.0) as u64)
                } else {
                    counts.values_loaded += 1;
                    let u = x[singles[r - pairs.len()]];
                    (u, (u > 0.0) as u64)
                }
            }
        }
    }

    /// All margins of this table, in comparison order.
    pub fn margins(&self, x: &[f32]) -> Vec<f32> {
        let mut scratch = OpCounts::default();
        (0..self.n_comparisons())
            .map(|r| self.probe(r, x, &mut scratch).0)
            .collect()
    }

    /// Row index, digits concatenated most significant first.
    pub fn index(&self, x: &[f32], counts: &mut OpCounts) -> RowIndex {
        let radix = self.radix();
        (0..self.n_comparisons()).fold(0, |j, r| j * radix + self.probe(r, x, counts).1)
    }

    /// Row index plus the comparison with the smallest `|u|` (first one on ties).
    pub fn index_with_min(&self, x: &[f32], counts: &mut OpCounts) -> (RowIndex, MinPair) {
        let radix = self.radix();
        let mut j = 0;
        let mut best = MinPair { r: 0, u: f32::INFINITY };
        for r in 0..self.n_comparisons() {
            let (u, d) = self.probe(r, x, counts);
            j = j * radix + d;
            if u.abs() < best.u.abs() {
                best = MinPair { r, u };
            }
        }
        (j, best)
    }

    /// Row reached by pushing comparison `r` (current margin `u`) across its
    /// boundary.
    pub fn neighbor(&self, j: RowIndex, r: usize, u: f32) -> RowIndex {
        let n = self.n_comparisons();
        match self {
            AnchorSet::BinQuantized { bins, .. } => {
                let m = bins.m as u64;
                let place = m.pow((n - 1 - r) as u32);
                let d = (j / place) % m;
                if u > 0.0 {
                    j - place
                } else {
                    debug_assert!(d + 1 < m);
                    j + place
                }
            }
            _ => j ^ (1u64 << (n - 1 - r)),
        }
    }

    /// Add `coef * d u_r / d x` into `v`.
    pub fn route_grad(&self, r: usize, coef: f32, v: &mut [f32]) {
        match self {
            AnchorSet::PairwiseSign { pairs } => {
                let (a, b) = pairs[r];
                v[a] += coef;
                v[b] -= coef;
            }
            AnchorSet::ComponentSign { singles } | AnchorSet::BinQuantized { singles, .. } => {
                v[singles[r]] += coef;
            }
            AnchorSet::HyperplaneSign { planes } => {
                for (v, c) in v.iter_mut().zip(&planes[r]) {
                    *v += coef * c;
                }
            }
            AnchorSet::Mixed { pairs, singles } => {
                if r < pairs.len() {
                    let (a, b) = pairs[r];
                    v[a] += coef;
                    v[b] -= coef;
                } else {
                    v[singles[r - pairs.len()]] += coef;
                }
            }
        }
    }

    /// Same as [`route_grad`](Self::route_grad) but into a sparse list of
    /// `(component, value)` terms. Not defined for hyperplanes.
    pub fn route_grad_sparse(&self, r: usize, coef: f32, out: &mut Vec<(usize, f32)>) -> Result<()> {
        match self {
            AnchorSet::PairwiseSign { pairs } => {
                let (a, b) = pairs[r];
                out.push((a, coef));
                out.push((b, -coef));
            }
            AnchorSet::ComponentSign { singles } | AnchorSet::BinQuantized { singles, .. } => {
                out.push((singles[r], coef));
            }
            AnchorSet::HyperplaneSign { .. } => {
                return Err(Error::WrongMode {
                    expected: "neuron anchors",
                    found: "hyperplane-sign",
                })
            }
            AnchorSet::Mixed { pairs, singles } => {
                if r < pairs.len() {
                    let (a, b) = pairs[r];
                    out.push((a, coef));
                    out.push((b, -coef));
                } else {
                    out.push((singles[r - pairs.len()], coef));
                }
            }
        }
        Ok(())
    }
}

fn check_bins(bins: &Bins) -> Result<()> {
    if bins.m < 2 {
        return Err(Error::InvalidDimension(format!("need at least 2 bins, got {}", bins.m)));
    }
    if !(bins.lo.is_finite() && bins.hi.is_finite() && bins.lo < bins.hi) {
        return Err(Error::InvalidDimension(format!(
            "bin range ({}, {}) is not a finite interval",
            bins.lo, bins.hi
        )));
    }
    Ok(())
}

/// Flip comparison `r` of an `n_bits`-wide index (comparison 0 is the MSB).
pub fn flip_bit(j: RowIndex, r: usize, n_bits: usize) -> Result<RowIndex> {
    if r >= n_bits || n_bits > MAX_INDEX_BITS as usize {
        return Err(Error::BitOutOfRange {
            position: r,
            bits: n_bits,
        });
    }
    Ok(j ^ (1u64 << (n_bits - 1 - r)))
}

/// The comparison nearest to its decision boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinPair {
    pub r: usize,
    pub u: f32,
}
