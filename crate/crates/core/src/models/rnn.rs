use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{apply_update, Backprop, LayerCache, RowGrads};
use crate::error::{Error, Result};
use crate::lut::{HashMode, LutTransform, OpCounts};
use crate::models::{Embedding, Gradients, SequenceModel, VOCAB};

/// How the embedded input meets the hidden state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Combine {
    /// `h_t = S(h_{t-1}) + E[tok_t]` (Elman).
    #[default]
    Additive,
    /// `h_t = S([h_{t-1}, E[tok_t]])` with a `2n`-input table bank.
    Concat,
}

impl Combine {
    pub fn name(self) -> &'static str {
        match self {
            Combine::Additive => "additive",
            Combine::Concat => "concat",
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Combine::Additive),
            "concat" => Ok(Combine::Concat),
            _ => Err(Error::Config(format!("unknown combine mode `{s}` (expected additive or concat)"))),
        }
    }
}

/// Shape of a [`SpikingRnn`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RnnConfig {
    pub n: usize,
    pub n_t: usize,
    pub n_c: usize,
    pub n_t_u: usize,
    pub n_c_u: usize,
    pub mode: HashMode,
    pub combine: Combine,
}

/// Byte-level spiking RNN: embedder `E`, recurrent bank `S`, unembedder `Uh`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikingRnn {
    embed: Embedding,
    recur: LutTransform,
    unembed: LutTransform,
    combine: Combine,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnStepCache {
    pub recur: LayerCache,
    pub unembed: LayerCache,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RnnCache {
    pub tokens: Vec<u8>,
    pub steps: Vec<RnnStepCache>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RnnGrads {
    pub embed: RowGrads,
    pub recur: RowGrads,
    pub unembed: RowGrads,
}

impl Gradients for RnnGrads {
    fn merge(&mut self, other: &RnnGrads) {
        self.embed.merge(&other.embed);
        self.recur.merge(&other.recur);
        self.unembed.merge(&other.unembed);
    }

    fn is_zero(&self) -> bool {
        self.embed.is_zero() && self.recur.is_zero() && self.unembed.is_zero()
    }
}

impl SpikingRnn {
    /// Zero synapses and embeddings; anchors drawn from `seed`.
    pub fn new(cfg: &RnnConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_in = match cfg.combine {
            Combine::Additive => cfg.n,
            Combine::Concat => 2 * cfg.n,
        };
        let recur = LutTransform::new(n_in, cfg.n, cfg.n_t, cfg.n_c, cfg.mode, false, &mut rng)?;
        let unembed = LutTransform::new(cfg.n, VOCAB, cfg.n_t_u, cfg.n_c_u, cfg.mode, false, &mut rng)?;
        Self::from_parts(Embedding::zeros(VOCAB, cfg.n), recur, unembed, cfg.combine)
    }

    pub fn from_parts(embed: Embedding, recur: LutTransform, unembed: LutTransform, combine: Combine) -> Result<Self> {
        let n = embed.dim();
        let n_in = match combine {
            Combine::Additive => n,
            Combine::Concat => 2 * n,
        };
        if embed.rows() != VOCAB {
            return Err(Error::InvalidDimension(format!("embedder needs {VOCAB} rows, got {}", embed.rows())));
        }
        if recur.residual() || recur.n_in() != n_in || recur.n_out() != n {
            return Err(Error::InvalidDimension(format!(
                "recurrent bank must be non-residual {n_in} -> {n}, got {} -> {}",
                recur.n_in(),
                recur.n_out()
            )));
        }
        if unembed.residual() || unembed.n_in() != n || unembed.n_out() != VOCAB {
            return Err(Error::InvalidDimension(format!(
                "unembedder must be non-residual {n} -> {VOCAB}, got {} -> {}",
                unembed.n_in(),
                unembed.n_out()
            )));
        }
        Ok(SpikingRnn {
            embed,
            recur,
            unembed,
            combine,
        })
    }

    pub fn n(&self) -> usize {
        self.embed.dim()
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn embed(&self) -> &Embedding {
        &self.embed
    }

    pub fn embed_mut(&mut self) -> &mut Embedding {
        &mut self.embed
    }

    pub fn recur(&self) -> &LutTransform {
        &self.recur
    }

    pub fn recur_mut(&mut self) -> &mut LutTransform {
        &mut self.recur
    }

    pub fn unembed(&self) -> &LutTransform {
        &self.unembed
    }

    pub fn unembed_mut(&mut self) -> &mut LutTransform {
        &mut self.unembed
    }

    fn recur_input(&self, h: &[f32], tok: u8) -> Vec<f32> {
        match self.combine {
            Combine::Additive => h.to_vec(),
            Combine::Concat => {
                let mut v = h.to_vec();
                v.extend_from_slice(self.embed.row(tok as usize));
                v
            }
        }
    }

    fn add_input(&self, h: &mut [f32], tok: u8, counts: &mut OpCounts) {
        if self.combine == Combine::Additive {
            for (h, e) in h.iter_mut().zip(self.embed.row(tok as usize)) {
                *h += e;
            }
            counts.additions += self.n() as u64;
        }
        // embedding rows are counted as values, not synaptic rows
        counts.values_loaded += self.n() as u64;
    }

    /// Hidden states `h_1..h_T`.
    pub fn hidden_states(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut h = vec![0.0; self.n()];
        let mut out = Vec::with_capacity(tokens.len());
        for &tok in tokens {
            let mut next = self.recur.forward_counted(&self.recur_input(&h, tok), counts)?;
            self.add_input(&mut next, tok, counts);
            h = next;
            out.push(h.clone());
        }
        Ok(out)
    }
}

impl SequenceModel for SpikingRnn {
    type Cache = RnnCache;
    type Grads = RnnGrads;

    fn forward_counted(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        self.hidden_states(tokens, counts)?
            .iter()
            .map(|h| self.unembed.forward_counted(h, counts))
            .collect()
    }

    fn forward_train(&self, tokens: &[u8], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<Vec<f32>>, RnnCache)> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut h = vec![0.0; self.n()];
        let mut logits = Vec::with_capacity(tokens.len());
        let mut cache = RnnCache {
            tokens: tokens.to_vec(),
            steps: Vec::with_capacity(tokens.len()),
        };
        for &tok in tokens {
            let (mut next, rc) = self.recur.forward_train(&self.recur_input(&h, tok), bp, counts)?;
            self.add_input(&mut next, tok, counts);
            h = next;
            let (y, uc) = self.unembed.forward_train(&h, bp, counts)?;
            logits.push(y);
            cache.steps.push(RnnStepCache { recur: rc, unembed: uc });
        }
        Ok((logits, cache))
    }

    /// Backpropagation through the whole window.
    fn backward(&self, cache: &RnnCache, dlogits: &[Vec<f32>], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<RnnGrads> {
        if dlogits.len() != cache.steps.len() {
            return Err(Error::CacheMismatch(format!(
                "{} logit gradients for {} cached steps",
                dlogits.len(),
                cache.steps.len()
            )));
        }
        let n = self.n();
        let mut grads = RnnGrads::default();
        let mut dh = vec![0.0; n];
        for t in (0..cache.steps.len()).rev() {
            let step = &cache.steps[t];
            let (dh_out, gu) = self.unembed.backward(&step.unembed, &dlogits[t], bp, counts)?;
            grads.unembed.merge(&gu);
            dh.iter_mut().zip(&dh_out).for_each(|(a, b)| *a += b);
            let (v_in, gs) = self.recur.backward(&step.recur, &dh, bp, counts)?;
            grads.recur.merge(&gs);
            let tok = cache.tokens[t] as usize;
            match self.combine {
                Combine::Additive => {
                    grads.embed.add(0, tok as u64, &dh);
                    dh = v_in;
                }
                Combine::Concat => {
                    grads.embed.add(0, tok as u64, &v_in[n..]);
                    dh = v_in[..n].to_vec();
                }
            }
        }
        Ok(grads)
    }

    fn apply_update(&mut self, grads: &RnnGrads, lr: f32) -> Result<()> {
        apply_update(&mut self.recur, &grads.recur, lr)?;
        apply_update(&mut self.unembed, &grads.unembed, lr)?;
        self.embed.apply(&grads.embed, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(combine: Combine) -> RnnConfig {
        RnnConfig {
            n: 6,
            n_t: 3,
            n_c: 3,
            n_t_u: 2,
            n_c_u: 2,
            mode: HashMode::PairwiseSign,
            combine,
        }
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        for c in [Combine::Additive, Combine::Concat] {
            let m = SpikingRnn::new(&cfg(c), 3).unwrap();
            let logits = m.forward(b"hello").unwrap();
            assert_eq!(logits.len(), 5);
            assert!(logits.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let m = SpikingRnn::new(&cfg(Combine::Additive), 3).unwrap();
        assert!(matches!(m.forward(b""), Err(Error::EmptySequence)));
    }

    #[test]
    fn zero_logit_grads_give_zero() {
        let m = SpikingRnn::new(&cfg(Combine::Additive), 3).unwrap();
        let bp = Backprop::default();
        let (l, c) = m.forward_train(b"abc", &bp, &mut OpCounts::default()).unwrap();
        let zeros = vec![vec![0.0; VOCAB]; l.len()];
        assert!(m.backward(&c, &zeros, &bp, &mut OpCounts::default()).unwrap().is_zero());
    }

    #[test]
    fn rows_loaded_per_step() {
        let m = SpikingRnn::new(&cfg(Combine::Additive), 3).unwrap();
        let mut counts = OpCounts::default();
        m.forward_counted(b"xy", &mut counts).unwrap();
        assert_eq!(counts.rows_loaded, 2 * (3 + 2));
        assert_eq!(counts.multiplications, 0);
    }
}
