use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{apply_update, Backprop, LayerCache, RowGrads, SparseGrad};
use crate::error::{Error, Result};
use crate::lut::{HashMode, LutTransform, OpCounts};

/// Residual stack `x^{l+1} = x^l + S^l(x^l)`, `l = 0..=L`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepSnn {
    layers: Vec<LutTransform>,
}

/// One [`LayerCache`] per layer from a training forward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeepCache {
    pub layers: Vec<LayerCache>,
}

impl DeepSnn {
    /// `n_layers` zero-initialised residual layers of width `n`.
    pub fn new(n: usize, n_layers: usize, n_t: usize, n_c: usize, mode: HashMode, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..n_layers)
            .map(|_| LutTransform::new(n, n, n_t, n_c, mode, true, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<LutTransform>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidDimension("a deep network needs at least one layer".into()));
        };
        let n = first.n_in();
        for l in &layers {
            if !l.residual() || l.n_in() != n || l.n_out() != n {
                return Err(Error::InvalidDimension(format!(
                    "every layer must be residual {n} -> {n}, found {} -> {} (residual: {})",
                    l.n_in(),
                    l.n_out(),
                    l.residual()
                )));
            }
        }
        Ok(DeepSnn { layers })
    }

    pub fn n(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn layers(&self) -> &[LutTransform] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LutTransform] {
        &mut self.layers
    }

    pub fn forward(&self, x0: &[f32]) -> Result<Vec<f32>> {
        self.forward_counted(x0, &mut OpCounts::default())
    }

    pub fn forward_counted(&self, x0: &[f32], counts: &mut OpCounts) -> Result<Vec<f32>> {
        let mut x = x0.to_vec();
        for l in &self.layers {
            x = l.forward_counted(&x, counts)?;
        }
        Ok(x)
    }

    pub fn forward_train(&self, x0: &[f32], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<f32>, DeepCache)> {
        let mut x = x0.to_vec();
        let mut cache = DeepCache::default();
        for l in &self.layers {
            let (y, c) = l.forward_train(&x, bp, counts)?;
            cache.layers.push(c);
            x = y;
        }
        Ok((x, cache))
    }

    fn check_cache(&self, cache: &DeepCache) -> Result<()> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::CacheMismatch(format!(
                "{} cached layers for {} layers",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Returns `dL/dx^0` and one [`RowGrads`] per layer.
    pub fn backward(
        &self,
        cache: &DeepCache,
        v_top: &[f32],
        bp: &Backprop<'_>,
        counts: &mut OpCounts,
    ) -> Result<(Vec<f32>, Vec<RowGrads>)> {
        self.check_cache(cache)?;
        let mut v = v_top.to_vec();
        let mut grads = vec![RowGrads::new(); self.layers.len()];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (v_in, g) = layer.backward(&cache.layers[l], &v, bp, counts)?;
            grads[l] = g;
            v = v_in;
        }
        Ok((v, grads))
    }

    /// Backward pass of the scalar rule: the gradient travels as a few
    /// `(neuron, value)` terms and no dense dot product is formed.
    pub fn backward_scalar(
        &self,
        cache: &DeepCache,
        top: SparseGrad,
        bp: &Backprop<'_>,
        counts: &mut OpCounts,
    ) -> Result<(SparseGrad, Vec<RowGrads>)> {
        self.check_cache(cache)?;
        let mut v = top;
        let mut grads = vec![RowGrads::new(); self.layers.len()];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (v_in, g) = layer.backward_sparse(&cache.layers[l], &v, bp, counts)?;
            grads[l] = g;
            v = v_in;
        }
        Ok((v, grads))
    }

    pub fn apply_update(&mut self, grads: &[RowGrads], lr: f32) -> Result<()> {
        if grads.len() != self.layers.len() {
            return Err(Error::CacheMismatch(format!(
                "{} gradient sets for {} layers",
                grads.len(),
                self.layers.len()
            )));
        }
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            apply_update(layer, g, lr)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tables_are_identity() {
        let net = DeepSnn::new(6, 3, 4, 3, HashMode::PairwiseSign, 1).unwrap();
        let x = [0.1, -0.4, 2.0, 0.0, 1.5, -3.0];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_top_gradient_is_zero_everywhere() {
        let net = DeepSnn::new(5, 2, 3, 2, HashMode::PairwiseSign, 2).unwrap();
        let bp = Backprop::default();
        let (_, cache) = net.forward_train(&[0.5, 0.1, -0.2, 0.3, 0.9], &bp, &mut OpCounts::default()).unwrap();
        let (v, g) = net.backward(&cache, &[0.0; 5], &bp, &mut OpCounts::default()).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(g.iter().all(RowGrads::is_zero));
    }

    #[test]
    fn skip_path_carries_gradient_when_rows_agree() {
        // zero tables: every g_i is 0, so dL/dx^0 == dL/dx^{L+1}
        let net = DeepSnn::new(4, 3, 2, 2, HashMode::PairwiseSign, 3).unwrap();
        let bp = Backprop::default();
        let (_, cache) = net.forward_train(&[0.5, 0.1, -0.2, 0.3], &bp, &mut OpCounts::default()).unwrap();
        let top = [1.0, -2.0, 0.25, 4.0];
        let (v, _) = net.backward(&cache, &top, &bp, &mut OpCounts::default()).unwrap();
        assert_eq!(v, top.to_vec());
    }

    #[test]
    fn cache_mismatch_detected() {
        let net = DeepSnn::new(4, 2, 2, 2, HashMode::PairwiseSign, 3).unwrap();
        let r = net.backward(&DeepCache::default(), &[0.0; 4], &Backprop::default(), &mut OpCounts::default());
        assert!(matches!(r, Err(Error::CacheMismatch(_))));
    }
}
