//! Look-up attention with V-index caching.
//!
//! Each table of a head hashes the concatenation `[z_i, z_j, PE_{i-j}]`:
//! `n_c` pairwise comparisons inside the query block, `n_c` inside the key
//! block and `p` component signs over the positional block. Because no
//! comparison crosses blocks, the three index fragments can be computed once
//! per position (or offset) and concatenated for every pair, turning the
//! quadratic hashing cost into a linear one.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;

use crate::autograd::update::check_lr;
use crate::autograd::{apply_update, Backprop, ForwardMode, LearningRule, RowGrads};
use crate::error::{Error, Result};
use crate::lut::anchors::sample_pair;
use crate::lut::{AnchorSet, LookupTable, LutTransform, MinPair, OpCounts, RowIndex};
use crate::models::Embedding;

/// Row index of the concatenated fragments, laid out `[q | k | pe]` from
/// most to least significant bit.
#[inline]
pub fn concat_index(q: RowIndex, k: RowIndex, pe: RowIndex, n_c: usize, p: usize) -> RowIndex {
    (((q << n_c) | k) << p) | pe
}

/// Cached index fragments of one table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableIndices {
    pub q: Vec<RowIndex>,
    pub k: Vec<RowIndex>,
    pub pe: Vec<RowIndex>,
    pub q_min: Vec<MinPair>,
    pub k_min: Vec<MinPair>,
    pub pe_min: Vec<MinPair>,
}

/// Per-sequence index cache of one head. `pe[d - 1]` belongs to offset `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct VIndexCache {
    pub tables: Vec<TableIndices>,
    len: usize,
    n_c: usize,
    p: usize,
    fingerprint: u64,
}

impl VIndexCache {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Row of table `t` used by query `i` and key `j < i`.
    #[inline]
    pub fn row_index(&self, t: usize, i: usize, j: usize) -> RowIndex {
        let c = &self.tables[t];
        concat_index(c.q[i], c.k[j], c.pe[i - j - 1], self.n_c, self.p)
    }

    /// Same with a caller-supplied concatenation (used to test the layout).
    pub fn row_index_with(&self, t: usize, i: usize, j: usize, concat: fn(RowIndex, RowIndex, RowIndex, usize, usize) -> RowIndex) -> RowIndex {
        let c = &self.tables[t];
        concat(c.q[i], c.k[j], c.pe[i - j - 1], self.n_c, self.p)
    }

    /// Comparison with the smallest `|u|` over all bits of the pair's index
    /// (query block first on ties, then key, then positional).
    #[inline]
    pub fn selection(&self, t: usize, i: usize, j: usize) -> MinPair {
        let c = &self.tables[t];
        let mut best = c.q_min[i];
        for cand in [c.k_min[j], c.pe_min[i - j - 1]] {
            if cand.u.abs() < best.u.abs() {
                best = cand;
            }
        }
        best
    }
}

/// Gradients of one head: V rows keyed by table, PE rows keyed `(0, offset - 1)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadGrads {
    pub v: RowGrads,
    pub pe: RowGrads,
}

impl HeadGrads {
    pub fn merge(&mut self, other: &HeadGrads) {
        self.v.merge(&other.v);
        self.pe.merge(&other.pe);
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero() && self.pe.is_zero()
    }
}

/// One causal attention head.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead {
    v: LutTransform,
    pe: Embedding,
    n: usize,
    n_c: usize,
    p: usize,
}

const NO_MIN: MinPair = MinPair { r: 0, u: f32::INFINITY };

impl AttentionHead {
    /// Zero V rows, PE uniform in `[-1, 1]`. `max_len` bounds the sequence
    /// length (offsets `1..max_len`).
    pub fn new<R: Rng + ?Sized>(n: usize, n_t: usize, n_c: usize, p: usize, max_len: usize, rng: &mut R) -> Result<Self> {
        if n_c > 0 && n < 2 {
            return Err(Error::InvalidDimension(format!("pairwise blocks need n >= 2, got {n}")));
        }
        if max_len == 0 {
            return Err(Error::InvalidDimension("max_len must be positive".into()));
        }
        let n_in = 2 * n + p;
        let mut tables = Vec::with_capacity(n_t);
        for _ in 0..n_t {
            let mut pairs: Vec<(usize, usize)> = (0..n_c).map(|_| sample_pair(n, rng)).collect();
            pairs.extend((0..n_c).map(|_| {
                let (a, b) = sample_pair(n, rng);
                (a + n, b + n)
            }));
            let singles = (2 * n..n_in).collect();
            tables.push(LookupTable::zeros(AnchorSet::Mixed { pairs, singles }, n_in, n)?);
        }
        let v = LutTransform::from_tables(tables, n_in, n, false)?;
        let pe = (0..(max_len - 1) * p).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::from_parts(v, Embedding::from_data(max_len - 1, p, pe)?)
    }

    pub fn from_parts(v: LutTransform, pe: Embedding) -> Result<Self> {
        let n = v.n_out();
        let p = pe.dim();
        if v.residual() || v.n_in() != 2 * n + p {
            return Err(Error::InvalidDimension(format!(
                "V must be non-residual {} -> {n}, got {} -> {n}",
                2 * n + p,
                v.n_in()
            )));
        }
        let mut n_c = None;
        for t in v.tables() {
            let AnchorSet::Mixed { pairs, singles } = t.anchors() else {
                return Err(Error::WrongMode {
                    expected: "mixed",
                    found: t.anchors().mode_name(),
                });
            };
            if pairs.len() % 2 != 0 || singles.len() != p || *n_c.get_or_insert(pairs.len() / 2) != pairs.len() / 2 {
                return Err(Error::InvalidAnchor(format!(
                    "attention tables need 2 n_c pairs and {p} positional bits, found {} and {}",
                    pairs.len(),
                    singles.len()
                )));
            }
            let half = pairs.len() / 2;
            let in_block = |&(a, b): &(usize, usize), lo: usize| (lo..lo + n).contains(&a) && (lo..lo + n).contains(&b);
            if !pairs[..half].iter().all(|pr| in_block(pr, 0))
                || !pairs[half..].iter().all(|pr| in_block(pr, n))
                || !singles.iter().all(|s| (2 * n..2 * n + p).contains(s))
            {
                return Err(Error::InvalidAnchor("attention anchors cross blocks".into()));
            }
        }
        Ok(AttentionHead {
            v,
            pe,
            n,
            n_c: n_c.unwrap_or(0),
            p,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn max_len(&self) -> usize {
        self.pe.rows() + 1
    }

    pub fn v(&self) -> &LutTransform {
        &self.v
    }

    pub fn v_mut(&mut self) -> &mut LutTransform {
        &mut self.v
    }

    pub fn pe(&self) -> &Embedding {
        &self.pe
    }

    pub fn pe_mut(&mut self) -> &mut Embedding {
        &mut self.pe
    }

    fn check_sequence(&self, z: &[Vec<f32>]) -> Result<()> {
        if z.is_empty() {
            return Err(Error::EmptySequence);
        }
        if z.len() > self.max_len() {
            return Err(Error::InvalidArgument(format!(
                "sequence of {} exceeds the positional range {}",
                z.len(),
                self.max_len()
            )));
        }
        if let Some(bad) = z.iter().find(|v| v.len() != self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bad.len(),
            });
        }
        Ok(())
    }

    fn fingerprint(&self, z: &[Vec<f32>]) -> u64 {
        let mut h = DefaultHasher::new();
        z.len().hash(&mut h);
        for v in z {
            v.iter().for_each(|x| x.to_bits().hash(&mut h));
        }
        let used = (z.len() - 1) * self.p;
        self.pe.data()[..used].iter().for_each(|x| x.to_bits().hash(&mut h));
        h.finish()
    }

    fn pairs_of(&self, t: usize) -> (&[(usize, usize)], &[usize]) {
        match self.v.tables()[t].anchors() {
            AnchorSet::Mixed { pairs, singles } => (pairs, singles),
            _ => unreachable!("checked at construction"),
        }
    }

    fn hash_pairs(pairs: &[(usize, usize)], offset: usize, r0: usize, z: &[f32], counts: &mut OpCounts) -> (RowIndex, MinPair) {
        let mut j = 0;
        let mut best = NO_MIN;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            counts.comparisons += 1;
            counts.values_loaded += 2;
            let u = z[a - offset] - z[b - offset];
            j = (j << 1) | (u > 0.0) as RowIndex;
            if u.abs() < best.u.abs() {
                best = MinPair { r: r0 + k, u };
            }
        }
        (j, best)
    }

    fn hash_pe(singles: &[usize], offset: usize, r0: usize, pe: &[f32], counts: &mut OpCounts) -> (RowIndex, MinPair) {
        let mut j = 0;
        let mut best = NO_MIN;
        for (k, &s) in singles.iter().enumerate() {
            counts.parameter_tests += 1;
            counts.values_loaded += 1;
            let u = pe[s - offset];
            j = (j << 1) | (u > 0.0) as RowIndex;
            if u.abs() < best.u.abs() {
                best = MinPair { r: r0 + k, u };
            }
        }
        (j, best)
    }

    /// Hash every position with the query and key blocks and every offset
    /// with the positional block.
    pub fn build_v_index_cache(&self, z: &[Vec<f32>], counts: &mut OpCounts) -> Result<VIndexCache> {
        self.check_sequence(z)?;
        let (n, n_c) = (self.n, self.n_c);
        let len = z.len();
        let mut tables = Vec::with_capacity(self.v.n_tables());
        for t in 0..self.v.n_tables() {
            let (pairs, singles) = self.pairs_of(t);
            let mut c = TableIndices {
                q: Vec::with_capacity(len),
                k: Vec::with_capacity(len),
                pe: Vec::with_capacity(len.saturating_sub(1)),
                q_min: Vec::with_capacity(len),
                k_min: Vec::with_capacity(len),
                pe_min: Vec::with_capacity(len.saturating_sub(1)),
            };
            for zp in z {
                let (q, qm) = Self::hash_pairs(&pairs[..n_c], 0, 0, zp, counts);
                let (k, km) = Self::hash_pairs(&pairs[n_c..], n, n_c, zp, counts);
                c.q.push(q);
                c.q_min.push(qm);
                c.k.push(k);
                c.k_min.push(km);
            }
            for d in 1..len {
                let (pe, pm) = Self::hash_pe(singles, 2 * n, 2 * n_c, self.pe.row(d - 1), counts);
                c.pe.push(pe);
                c.pe_min.push(pm);
            }
            tables.push(c);
        }
        Ok(VIndexCache {
            tables,
            len,
            n_c,
            p: self.p,
            fingerprint: self.fingerprint(z),
        })
    }

    fn check_cache(&self, z: &[Vec<f32>], cache: &VIndexCache) -> Result<()> {
        self.check_sequence(z)?;
        if cache.tables.len() != self.v.n_tables() || cache.len != z.len() {
            return Err(Error::CacheMismatch("index cache built for a different head or length".into()));
        }
        if cache.fingerprint != self.fingerprint(z) {
            return Err(Error::StaleCache);
        }
        Ok(())
    }

    fn accumulate(&self, cache: &VIndexCache, counts: &mut OpCounts) -> Vec<Vec<f32>> {
        let len = cache.len;
        let mut out = vec![vec![0.0; self.n]; len];
        for (i, y) in out.iter_mut().enumerate() {
            for j in 0..i {
                for (t, table) in self.v.tables().iter().enumerate() {
                    counts.values_loaded += 3;
                    counts.concatenations += 1;
                    table.add_row_into(cache.row_index(t, i, j), y, counts);
                }
            }
        }
        out
    }

    /// `sum_{j<i} sum_t V_t[z_i, z_j, PE_{i-j}]` for every `i`, without the
    /// residual `z_i`. Fails with [`Error::StaleCache`] if `z` or PE changed
    /// since the cache was built.
    pub fn contribution(&self, z: &[Vec<f32>], cache: &VIndexCache, counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        self.check_cache(z, cache)?;
        Ok(self.accumulate(cache, counts))
    }

    /// `x_i = z_i + contribution_i`.
    pub fn forward(&self, z: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        let mut counts = OpCounts::default();
        let cache = self.build_v_index_cache(z, &mut counts)?;
        let mut x = self.accumulate(&cache, &mut counts);
        for (x, z) in x.iter_mut().zip(z) {
            x.iter_mut().zip(z).for_each(|(x, z)| *x += z);
        }
        Ok(x)
    }

    /// Explicit concatenated vector `[z_i, z_j, PE_{i-j}]`.
    pub fn concat_input(&self, z: &[Vec<f32>], i: usize, j: usize) -> Vec<f32> {
        let mut v = Vec::with_capacity(2 * self.n + self.p);
        v.extend_from_slice(&z[i]);
        v.extend_from_slice(&z[j]);
        v.extend_from_slice(self.pe.row(i - j - 1));
        v
    }

    /// Quadratic reference path: hash each concatenated vector directly.
    pub fn forward_direct(&self, z: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        self.check_sequence(z)?;
        let mut counts = OpCounts::default();
        let mut x = vec![vec![0.0; self.n]; z.len()];
        for (i, xi) in x.iter_mut().enumerate() {
            for j in 0..i {
                let c = self.concat_input(z, i, j);
                for table in self.v.tables() {
                    table.add_row_into(table.compute_index(&c)?, xi, &mut counts);
                }
            }
            // same summation order as the cached path
            xi.iter_mut().zip(&z[i]).for_each(|(x, z)| *x += z);
        }
        Ok(x)
    }

    fn check_rule(bp: &Backprop<'_>) -> Result<()> {
        match bp.rule {
            LearningRule::MinPairFlip | LearningRule::NoFlip => Ok(()),
            other => Err(Error::InvalidArgument(format!(
                "attention supports min-pair-flip and no-flip, not {other}"
            ))),
        }
    }

    /// Training pass: contribution (plus surrogate terms in surrogate mode)
    /// and the index cache that backward reads.
    pub fn forward_train(&self, z: &[Vec<f32>], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<Vec<f32>>, VIndexCache)> {
        Self::check_rule(bp)?;
        let cache = self.build_v_index_cache(z, counts)?;
        let mut out = self.accumulate(&cache, counts);
        if bp.mode == ForwardMode::Surrogate {
            let u_fn = bp.uncertainty;
            for (i, y) in out.iter_mut().enumerate() {
                for j in 0..i {
                    for (t, table) in self.v.tables().iter().enumerate() {
                        if !self.v.is_trainable(t) {
                            continue;
                        }
                        let row = cache.row_index(t, i, j);
                        let sel = cache.selection(t, i, j);
                        let here = table.row(row);
                        let w = u_fn.value(sel.u);
                        if bp.rule == LearningRule::MinPairFlip {
                            let there = table.row(table.anchors().neighbor(row, sel.r, sel.u));
                            for ((y, a), b) in y.iter_mut().zip(there).zip(here) {
                                *y += w * (a - b);
                            }
                        } else {
                            y.iter_mut().zip(here).for_each(|(y, s)| *y -= w * s);
                        }
                    }
                }
            }
        }
        Ok((out, cache))
    }

    /// Given `dL/dx_i` for the contribution, returns the attention part of
    /// `dL/dz` (no residual term) and the V / PE gradients.
    pub fn backward(
        &self,
        cache: &VIndexCache,
        dx: &[Vec<f32>],
        bp: &Backprop<'_>,
        counts: &mut OpCounts,
    ) -> Result<(Vec<Vec<f32>>, HeadGrads)> {
        Self::check_rule(bp)?;
        if dx.len() != cache.len || cache.tables.len() != self.v.n_tables() {
            return Err(Error::CacheMismatch(format!(
                "{} upstream positions for a cache of {}",
                dx.len(),
                cache.len
            )));
        }
        if let Some(bad) = dx.iter().find(|v| v.len() != self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: bad.len(),
            });
        }
        let (n, n_c) = (self.n, self.n_c);
        let u_fn = bp.uncertainty;
        let mut dz = vec![vec![0.0; n]; cache.len];
        let mut grads = HeadGrads::default();
        for (i, v) in dx.iter().enumerate() {
            for j in 0..i {
                for (t, table) in self.v.tables().iter().enumerate() {
                    if !self.v.is_trainable(t) {
                        continue;
                    }
                    let row = cache.row_index(t, i, j);
                    grads.v.add(t, row, v);
                    let sel = cache.selection(t, i, j);
                    let here = table.row(row);
                    counts.dot_products += 1;
                    let coef = if bp.rule == LearningRule::MinPairFlip {
                        counts.flipped_rows_loaded += 1;
                        let there = table.row(table.anchors().neighbor(row, sel.r, sel.u));
                        let g: f32 = v.iter().zip(there.iter().zip(here)).map(|(v, (a, b))| v * (a - b)).sum();
                        u_fn.deriv(sel.u) * g
                    } else {
                        let g: f32 = v.iter().zip(here).map(|(v, s)| v * s).sum();
                        -u_fn.deriv(sel.u) * g
                    };
                    let (pairs, singles) = self.pairs_of(t);
                    if sel.r < n_c {
                        let (a, b) = pairs[sel.r];
                        dz[i][a] += coef;
                        dz[i][b] -= coef;
                    } else if sel.r < 2 * n_c {
                        let (a, b) = pairs[sel.r];
                        dz[j][a - n] += coef;
                        dz[j][b - n] -= coef;
                    } else {
                        let s = singles[sel.r - 2 * n_c] - 2 * n;
                        grads.pe.add_sparse(0, (i - j - 1) as RowIndex, self.p, &[(s, coef)]);
                    }
                }
            }
        }
        Ok((dz, grads))
    }

    pub fn apply_update(&mut self, grads: &HeadGrads, lr: f32) -> Result<()> {
        check_lr(lr)?;
        apply_update(&mut self.v, &grads.v, lr)?;
        self.pe.apply(&grads.pe, lr)
    }
}
