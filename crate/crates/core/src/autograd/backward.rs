//! Training forward pass and surrogate-gradient backward pass of a
//! [`LutTransform`].
//!
//! For table `i` with cached row `j`, closest comparison `r` and margin `u`,
//! the neighbouring row `j'` is the one reached by pushing `u` across zero.
//! The alignment `g = v . (S_j' - S_j)` decides whether the two anchors of
//! comparison `r` should move apart or together; they receive `+U'(u) g` and
//! `-U'(u) g`. The selected row itself receives the upstream gradient `v`.

use crate::autograd::cache::{LayerCache, TableCache};
use crate::autograd::rule::{Backprop, ForwardMode, LearningRule};
use crate::autograd::uncertainty::UncertaintyFn;
use crate::autograd::update::RowGrads;
use crate::error::{Error, Result};
use crate::lut::{LutTransform, OpCounts};

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

#[inline]
fn dot_diff(v: &[f32], a: &[f32], b: &[f32]) -> f32 {
    v.iter().zip(a.iter().zip(b)).map(|(v, (a, b))| v * (a - b)).sum()
}

#[inline]
fn axpy(y: &mut [f32], alpha: f32, x: &[f32]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Gradient that is nonzero on a handful of components, kept as sorted
/// `(component, value)` terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGrad {
    pub terms: Vec<(usize, f32)>,
}

impl SparseGrad {
    /// `+h` at `a`, `-h` at `b`.
    pub fn pair(a: usize, b: usize, h: f32) -> Self {
        let mut g = SparseGrad {
            terms: vec![(a, h), (b, -h)],
        };
        g.normalize();
        g
    }

    pub fn from_dense(v: &[f32]) -> Self {
        SparseGrad {
            terms: v.iter().copied().enumerate().filter(|&(_, x)| x != 0.0).collect(),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f32> {
        let mut v = vec![0.0; n];
        for &(k, x) in &self.terms {
            v[k] += x;
        }
        v
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|&(k, _)| k);
        let mut merged: Vec<(usize, f32)> = Vec::with_capacity(self.terms.len());
        for &(k, x) in &self.terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == k => *acc += x,
                _ => merged.push((k, x)),
            }
        }
        self.terms = merged;
    }
}

impl LutTransform {
    /// Forward pass that also records what backward needs.
    pub fn forward_train(&self, x: &[f32], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<f32>, LayerCache)> {
        self.check_input(x)?;
        let mut y = if self.residual() { x.to_vec() } else { vec![0.0; self.n_out()] };
        let mut cache = LayerCache {
            tables: Vec::with_capacity(self.n_tables()),
            margins: bp.rule.needs_all_margins().then(Vec::new),
        };
        for t in self.tables() {
            let (row, mp) = t.index_with_min_counted(x, counts);
            t.add_row_into(row, &mut y, counts);
            cache.tables.push(TableCache {
                row,
                r_min: mp.r,
                u_min: mp.u,
            });
            if let Some(m) = cache.margins.as_mut() {
                m.push(t.anchors().margins(x));
            }
        }
        if bp.mode == ForwardMode::Surrogate {
            self.add_surrogate_terms(&cache, bp, &mut y, counts);
        }
        Ok((y, cache))
    }

    /// The smoothed per-table output `S_j + U(u)(S_j' - S_j)`, summed over
    /// tables (plus `x` for residual transforms).
    pub fn surrogate_forward(&self, x: &[f32], uncertainty: &dyn UncertaintyFn) -> Result<Vec<f32>> {
        let bp = Backprop {
            rule: LearningRule::MinPairFlip,
            mode: ForwardMode::Surrogate,
            uncertainty,
        };
        Ok(self.forward_train(x, &bp, &mut OpCounts::default())?.0)
    }

    fn add_surrogate_terms(&self, cache: &LayerCache, bp: &Backprop<'_>, y: &mut [f32], counts: &mut OpCounts) {
        let u_fn = bp.uncertainty;
        let minimal = bp
            .rule
            .layer_minimal_only()
            .then(|| cache.layer_minimal(|i| self.is_trainable(i)))
            .flatten();
        for (i, (t, c)) in self.tables().iter().zip(&cache.tables).enumerate() {
            if !self.is_trainable(i) || (bp.rule.layer_minimal_only() && minimal != Some(i)) {
                continue;
            }
            let here = t.row(c.row);
            match bp.rule {
                LearningRule::MinPairFlip | LearningRule::LayerMinimal => {
                    let w = u_fn.value(c.u_min);
                    let there = t.row(t.anchors().neighbor(c.row, c.r_min, c.u_min));
                    for ((y, a), b) in y.iter_mut().zip(there).zip(here) {
                        *y += w * (a - b);
                    }
                    counts.multiplications += here.len() as u64;
                }
                LearningRule::AllPairs => {
                    let margins = &cache.margins.as_ref().expect("all-pairs cache")[i];
                    let scale = 1.0 / margins.len() as f32;
                    for (r, &u) in margins.iter().enumerate() {
                        let w = scale * u_fn.value(u);
                        let there = t.row(t.anchors().neighbor(c.row, r, u));
                        for ((y, a), b) in y.iter_mut().zip(there).zip(here) {
                            *y += w * (a - b);
                        }
                        counts.multiplications += here.len() as u64;
                    }
                }
                LearningRule::NoFlip | LearningRule::SpikingScalar => {
                    axpy(y, -u_fn.value(c.u_min), here);
                    counts.multiplications += here.len() as u64;
                }
            }
        }
    }

    fn check_cache(&self, cache: &LayerCache) -> Result<()> {
        if cache.tables.len() != self.n_tables() {
            return Err(Error::CacheMismatch(format!(
                "{} cached tables for a transform with {}",
                cache.tables.len(),
                self.n_tables()
            )));
        }
        for (t, c) in self.tables().iter().zip(&cache.tables) {
            if c.row < t.row_count() && c.r_min < t.n_comparisons() && !c.u_min.is_finite() {
                return Err(Error::NonFinite(format!("margin {} at row {}", c.u_min, c.row)));
            }
            if c.row >= t.row_count() || c.r_min >= t.n_comparisons() {
                return Err(Error::CacheMismatch(format!(
                    "entry (row {}, r {}) invalid for a table with {} rows",
                    c.row,
                    c.r_min,
                    t.row_count()
                )));
            }
        }
        Ok(())
    }

    /// Backward pass: returns `dL/dx` and the pending row gradients.
    pub fn backward(
        &self,
        cache: &LayerCache,
        v_out: &[f32],
        bp: &Backprop<'_>,
        counts: &mut OpCounts,
    ) -> Result<(Vec<f32>, RowGrads)> {
        if v_out.len() != self.n_out() {
            return Err(Error::DimensionMismatch {
                expected: self.n_out(),
                got: v_out.len(),
            });
        }
        self.check_cache(cache)?;
        if bp.rule.needs_all_margins() && cache.margins.is_none() {
            return Err(Error::RuleCacheMismatch {
                rule: "all-pairs",
                needs: "a cache holding every margin",
            });
        }
        let mut v_in = if self.residual() { v_out.to_vec() } else { vec![0.0; self.n_in()] };
        let mut grads = RowGrads::new();
        self.backward_into(cache, v_out, bp, &mut v_in, &mut grads, counts);
        Ok((v_in, grads))
    }

    /// Adds the table contributions (no residual term) into `v_in`.
    pub(crate) fn backward_into(
        &self,
        cache: &LayerCache,
        v_out: &[f32],
        bp: &Backprop<'_>,
        v_in: &mut [f32],
        grads: &mut RowGrads,
        counts: &mut OpCounts,
    ) {
        let u_fn = bp.uncertainty;
        let minimal = bp
            .rule
            .layer_minimal_only()
            .then(|| cache.layer_minimal(|i| self.is_trainable(i)))
            .flatten();
        for (i, (t, c)) in self.tables().iter().zip(&cache.tables).enumerate() {
            if !self.is_trainable(i) {
                continue;
            }
            grads.add(i, c.row, v_out);
            if bp.rule.layer_minimal_only() && minimal != Some(i) {
                continue;
            }
            let here = t.row(c.row);
            match bp.rule {
                LearningRule::MinPairFlip | LearningRule::LayerMinimal => {
                    let there = t.row(t.anchors().neighbor(c.row, c.r_min, c.u_min));
                    counts.flipped_rows_loaded += 1;
                    counts.dot_products += 1;
                    let g = dot_diff(v_out, there, here);
                    t.anchors().route_grad(c.r_min, u_fn.deriv(c.u_min) * g, v_in);
                }
                LearningRule::AllPairs => {
                    let margins = &cache.margins.as_ref().expect("checked by caller")[i];
                    let scale = 1.0 / margins.len() as f32;
                    for (r, &u) in margins.iter().enumerate() {
                        let there = t.row(t.anchors().neighbor(c.row, r, u));
                        counts.flipped_rows_loaded += 1;
                        counts.dot_products += 1;
                        let g = dot_diff(v_out, there, here);
                        t.anchors().route_grad(r, scale * u_fn.deriv(u) * g, v_in);
                    }
                }
                LearningRule::NoFlip | LearningRule::SpikingScalar => {
                    counts.dot_products += 1;
                    let g = dot(v_out, here);
                    t.anchors().route_grad(c.r_min, -u_fn.deriv(c.u_min) * g, v_in);
                }
            }
        }
    }

    /// Scalar backward pass for [`LearningRule::SpikingScalar`]: the upstream
    /// gradient is a few `(component, value)` terms and no dense dot product
    /// is formed. For a non-residual pairwise layer the result is exactly
    /// `+h` / `-h` on the minimal pair, i.e. one number.
    pub fn backward_sparse(
        &self,
        cache: &LayerCache,
        upstream: &SparseGrad,
        bp: &Backprop<'_>,
        counts: &mut OpCounts,
    ) -> Result<(SparseGrad, RowGrads)> {
        if bp.rule != LearningRule::SpikingScalar {
            return Err(Error::InvalidArgument(format!(
                "sparse backward implements spiking-scalar, not {}",
                bp.rule
            )));
        }
        self.check_cache(cache)?;
        if let Some(&(k, _)) = upstream.terms.iter().find(|&&(k, _)| k >= self.n_out()) {
            return Err(Error::DimensionMismatch {
                expected: self.n_out(),
                got: k + 1,
            });
        }
        let mut out = SparseGrad {
            terms: if self.residual() { upstream.terms.clone() } else { Vec::new() },
        };
        let mut grads = RowGrads::new();
        for (i, c) in cache.tables.iter().enumerate() {
            if self.is_trainable(i) {
                grads.add_sparse(i, c.row, self.n_out(), &upstream.terms);
            }
        }
        if let Some(i) = cache.layer_minimal(|i| self.is_trainable(i)) {
            let t = &self.tables()[i];
            let c = cache.tables[i];
            let here = t.row(c.row);
            let s: f32 = upstream.terms.iter().map(|&(k, v)| v * here[k]).sum();
            counts.values_loaded += upstream.terms.len() as u64;
            counts.scalar_mults += upstream.terms.len() as u64 + 1;
            let h = -bp.uncertainty.deriv(c.u_min) * s;
            t.anchors().route_grad_sparse(c.r_min, h, &mut out.terms)?;
        }
        out.normalize();
        Ok((out, grads))
    }
}
