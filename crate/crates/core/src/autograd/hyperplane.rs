use crate::autograd::cache::LayerCache;
use crate::autograd::update::check_lr;
use crate::autograd::uncertainty::UncertaintyFn;
use crate::error::{Error, Result};
use crate::lut::{AnchorSet, LutTransform};

/// `dL/dc = U'(c . x) g x` for the plane with the smallest `|c . x|`.
pub fn hyperplane_anchor_grad(plane: &[f32], x: &[f32], g: f32, uncertainty: &dyn UncertaintyFn) -> Result<Vec<f32>> {
    if plane.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: plane.len(),
            got: x.len(),
        });
    }
    let u: f32 = plane.iter().zip(x).map(|(c, x)| c * x).sum();
    let k = uncertainty.deriv(u) * g;
    Ok(x.iter().map(|x| k * x).collect())
}

/// Gradient for one plane of one table.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneGrad {
    pub table: usize,
    pub plane: usize,
    pub grad: Vec<f32>,
}

impl LutTransform {
    /// Anchor-plane gradients for a hyperplane-hashed transform, one per
    /// trainable table. Needs the input `x`, which the cache does not keep.
    pub fn hyperplane_anchor_grads(
        &self,
        cache: &LayerCache,
        x: &[f32],
        v_out: &[f32],
        uncertainty: &dyn UncertaintyFn,
    ) -> Result<Vec<PlaneGrad>> {
        self.check_input(x)?;
        if cache.tables.len() != self.n_tables() {
            return Err(Error::CacheMismatch("table count differs".into()));
        }
        let mut out = Vec::new();
        for (i, (t, c)) in self.tables().iter().zip(&cache.tables).enumerate() {
            let AnchorSet::HyperplaneSign { planes } = t.anchors() else {
                return Err(Error::WrongMode {
                    expected: "hyperplane-sign",
                    found: t.anchors().mode_name(),
                });
            };
            if !self.is_trainable(i) {
                continue;
            }
            let here = t.row(c.row);
            let there = t.row(t.anchors().neighbor(c.row, c.r_min, c.u_min));
            let g: f32 = v_out.iter().zip(there.iter().zip(here)).map(|(v, (a, b))| v * (a - b)).sum();
            out.push(PlaneGrad {
                table: i,
                plane: c.r_min,
                grad: hyperplane_anchor_grad(&planes[c.r_min], x, g, uncertainty)?,
            });
        }
        Ok(out)
    }

    pub fn apply_plane_grads(&mut self, grads: &[PlaneGrad], lr: f32) -> Result<()> {
        check_lr(lr)?;
        for pg in grads {
            let table = self
                .tables_mut()
                .get_mut(pg.table)
                .ok_or_else(|| Error::CacheMismatch(format!("no table {}", pg.table)))?;
            let AnchorSet::HyperplaneSign { planes } = table.anchors_mut() else {
                return Err(Error::WrongMode {
                    expected: "hyperplane-sign",
                    found: "other",
                });
            };
            for (c, g) in planes[pg.plane].iter_mut().zip(&pg.grad) {
                *c -= lr * g;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::{Backprop, ReciprocalAbs};
    use crate::lut::{HashMode, OpCounts};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_alignment_or_input_gives_zero() {
        let g = hyperplane_anchor_grad(&[1.0, 2.0], &[0.3, 0.1], 0.0, &ReciprocalAbs).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = hyperplane_anchor_grad(&[1.0, 2.0], &[0.0, 0.0], 3.0, &ReciprocalAbs).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_pairwise_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lut = LutTransform::new(3, 2, 1, 2, HashMode::PairwiseSign, false, &mut rng).unwrap();
        let (_, cache) = lut
            .forward_train(&[0.1, 0.2, 0.3], &Backprop::default(), &mut OpCounts::default())
            .unwrap();
        let r = lut.hyperplane_anchor_grads(&cache, &[0.1, 0.2, 0.3], &[1.0, 1.0], &ReciprocalAbs);
        assert!(matches!(r, Err(Error::WrongMode { .. })));
    }
}
