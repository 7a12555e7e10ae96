use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{apply_update, Backprop, LayerCache, RowGrads};
use crate::error::{Error, Result};
use crate::lut::{HashMode, LutTransform, OpCounts};
use crate::models::{AttentionHead, Embedding, Gradients, HeadGrads, SequenceModel, VIndexCache, VOCAB};

/// Shape of an [`SnnTransformer`]. `ffn_n_t`/`ffn_n_c` are ignored when the
/// feed-forward transform is disabled (attention-only model).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformerConfig {
    pub n: usize,
    pub n_t: usize,
    pub n_c: usize,
    pub p: usize,
    pub n_inp: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: bool,
    pub ffn_n_t: usize,
    pub ffn_n_c: usize,
    pub n_t_u: usize,
    pub n_c_u: usize,
}

/// One block: attention heads `z -> x`, then the optional residual
/// feed-forward transform `x -> z`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub heads: Vec<AttentionHead>,
    pub ffn: Option<LutTransform>,
}

/// Decoder-only look-up transformer over bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct SnnTransformer {
    embed: Embedding,
    blocks: Vec<Block>,
    unembed: LutTransform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockCache {
    pub heads: Vec<VIndexCache>,
    pub ffn: Option<Vec<LayerCache>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransformerCache {
    pub tokens: Vec<u8>,
    pub blocks: Vec<BlockCache>,
    pub unembed: Vec<LayerCache>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockGrads {
    pub heads: Vec<HeadGrads>,
    pub ffn: RowGrads,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransformerGrads {
    pub embed: RowGrads,
    pub blocks: Vec<BlockGrads>,
    pub unembed: RowGrads,
}

impl Gradients for TransformerGrads {
    fn merge(&mut self, other: &Self) {
        self.embed.merge(&other.embed);
        self.unembed.merge(&other.unembed);
        if self.blocks.is_empty() {
            self.blocks = other.blocks.clone();
            return;
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.ffn.merge(&b.ffn);
            for (ha, hb) in a.heads.iter_mut().zip(&b.heads) {
                ha.merge(hb);
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.embed.is_zero()
            && self.unembed.is_zero()
            && self
                .blocks
                .iter()
                .all(|b| b.ffn.is_zero() && b.heads.iter().all(HeadGrads::is_zero))
    }
}

impl SnnTransformer {
    pub fn new(cfg: &TransformerConfig, seed: u64) -> Result<Self> {
        if cfg.heads == 0 {
            return Err(Error::InvalidDimension("need at least one head".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(cfg.layers);
        for _ in 0..cfg.layers {
            let heads = (0..cfg.heads)
                .map(|_| AttentionHead::new(cfg.n, cfg.n_t, cfg.n_c, cfg.p, cfg.n_inp, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let ffn = cfg
                .ffn
                .then(|| LutTransform::new(cfg.n, cfg.n, cfg.ffn_n_t, cfg.ffn_n_c, HashMode::PairwiseSign, true, &mut rng))
                .transpose()?;
            blocks.push(Block { heads, ffn });
        }
        let unembed = LutTransform::new(cfg.n, VOCAB, cfg.n_t_u, cfg.n_c_u, HashMode::PairwiseSign, false, &mut rng)?;
        Self::from_parts(Embedding::zeros(VOCAB, cfg.n), blocks, unembed)
    }

    pub fn from_parts(embed: Embedding, blocks: Vec<Block>, unembed: LutTransform) -> Result<Self> {
        let n = embed.dim();
        if embed.rows() != VOCAB {
            return Err(Error::InvalidDimension(format!("embedder needs {VOCAB} rows, got {}", embed.rows())));
        }
        for b in &blocks {
            if b.heads.is_empty() || b.heads.iter().any(|h| h.n() != n) {
                return Err(Error::InvalidDimension(format!("every block needs heads of width {n}")));
            }
            if let Some(f) = &b.ffn {
                if !f.residual() || f.n_in() != n || f.n_out() != n {
                    return Err(Error::InvalidDimension(format!("feed-forward must be residual {n} -> {n}")));
                }
            }
        }
        if unembed.residual() || unembed.n_in() != n || unembed.n_out() != VOCAB {
            return Err(Error::InvalidDimension(format!("unembedder must be non-residual {n} -> {VOCAB}")));
        }
        Ok(SnnTransformer { embed, blocks, unembed })
    }

    pub fn n(&self) -> usize {
        self.embed.dim()
    }

    /// Longest sequence the positional tables cover.
    pub fn max_len(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| &b.heads)
            .map(AttentionHead::max_len)
            .min()
            .unwrap_or(usize::MAX)
    }

    pub fn embed(&self) -> &Embedding {
        &self.embed
    }

    pub fn embed_mut(&mut self) -> &mut Embedding {
        &mut self.embed
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn unembed(&self) -> &LutTransform {
        &self.unembed
    }

    pub fn unembed_mut(&mut self) -> &mut LutTransform {
        &mut self.unembed
    }

    fn embed_tokens(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        counts.values_loaded += (tokens.len() * self.n()) as u64;
        Ok(tokens.iter().map(|&t| self.embed.row(t as usize).to_vec()).collect())
    }

    /// Final embeddings `z^N_1..z^N_T` before unembedding.
    pub fn hidden_states(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        let mut z = self.embed_tokens(tokens, counts)?;
        for b in &self.blocks {
            let mut x = z.clone();
            for h in &b.heads {
                let cache = h.build_v_index_cache(&z, counts)?;
                add_into(&mut x, &h.contribution(&z, &cache, counts)?, counts);
            }
            z = match &b.ffn {
                Some(f) => x.iter().map(|xi| f.forward_counted(xi, counts)).collect::<Result<_>>()?,
                None => x,
            };
        }
        Ok(z)
    }
}

fn add_into(acc: &mut [Vec<f32>], delta: &[Vec<f32>], counts: &mut OpCounts) {
    for (a, d) in acc.iter_mut().zip(delta) {
        counts.additions += a.len() as u64;
        a.iter_mut().zip(d).for_each(|(a, d)| *a += d);
    }
}

impl SequenceModel for SnnTransformer {
    type Cache = TransformerCache;
    type Grads = TransformerGrads;

    fn forward_counted(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        self.hidden_states(tokens, counts)?
            .iter()
            .map(|z| self.unembed.forward_counted(z, counts))
            .collect()
    }

    fn forward_train(&self, tokens: &[u8], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<Vec<f32>>, TransformerCache)> {
        let mut z = self.embed_tokens(tokens, counts)?;
        let mut cache = TransformerCache {
            tokens: tokens.to_vec(),
            ..Default::default()
        };
        for b in &self.blocks {
            let mut x = z.clone();
            let mut heads = Vec::with_capacity(b.heads.len());
            for h in &b.heads {
                let (c, hc) = h.forward_train(&z, bp, counts)?;
                add_into(&mut x, &c, counts);
                heads.push(hc);
            }
            let ffn = match &b.ffn {
                Some(f) => {
                    let mut caches = Vec::with_capacity(x.len());
                    z = x
                        .iter()
                        .map(|xi| {
                            let (y, c) = f.forward_train(xi, bp, counts)?;
                            caches.push(c);
                            Ok(y)
                        })
                        .collect::<Result<_>>()?;
                    Some(caches)
                }
                None => {
                    z = x;
                    None
                }
            };
            cache.blocks.push(BlockCache { heads, ffn });
        }
        let mut logits = Vec::with_capacity(z.len());
        for zi in &z {
            let (y, c) = self.unembed.forward_train(zi, bp, counts)?;
            logits.push(y);
            cache.unembed.push(c);
        }
        Ok((logits, cache))
    }

    fn backward(&self, cache: &TransformerCache, dlogits: &[Vec<f32>], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<TransformerGrads> {
        if dlogits.len() != cache.unembed.len() || cache.blocks.len() != self.blocks.len() {
            return Err(Error::CacheMismatch(format!(
                "{} logit gradients for {} cached positions",
                dlogits.len(),
                cache.unembed.len()
            )));
        }
        let mut grads = TransformerGrads {
            blocks: vec![BlockGrads::default(); self.blocks.len()],
            ..Default::default()
        };
        let mut dz = Vec::with_capacity(dlogits.len());
        for (c, d) in cache.unembed.iter().zip(dlogits) {
            let (v, g) = self.unembed.backward(c, d, bp, counts)?;
            grads.unembed.merge(&g);
            dz.push(v);
        }
        for (l, b) in self.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[l];
            let dx = match (&b.ffn, &bc.ffn) {
                (Some(f), Some(fc)) => {
                    let mut dx = Vec::with_capacity(dz.len());
                    for (c, d) in fc.iter().zip(&dz) {
                        let (v, g) = f.backward(c, d, bp, counts)?;
                        grads.blocks[l].ffn.merge(&g);
                        dx.push(v);
                    }
                    dx
                }
                (None, None) => dz,
                _ => return Err(Error::CacheMismatch(format!("block {l} feed-forward cache mismatch"))),
            };
            if bc.heads.len() != b.heads.len() {
                return Err(Error::CacheMismatch(format!("block {l} head count mismatch")));
            }
            let mut next = dx.clone();
            for (h, hc) in b.heads.iter().zip(&bc.heads) {
                let (d, g) = h.backward(hc, &dx, bp, counts)?;
                add_into(&mut next, &d, counts);
                grads.blocks[l].heads.push(g);
            }
            dz = next;
        }
        for (&tok, d) in cache.tokens.iter().zip(&dz) {
            grads.embed.add(0, tok as u64, d);
        }
        Ok(grads)
    }

    fn apply_update(&mut self, grads: &TransformerGrads, lr: f32) -> Result<()> {
        apply_update(&mut self.unembed, &grads.unembed, lr)?;
        self.embed.apply(&grads.embed, lr)?;
        for (b, g) in self.blocks.iter_mut().zip(&grads.blocks) {
            if let Some(f) = b.ffn.as_mut() {
                apply_update(f, &g.ffn, lr)?;
            }
            for (h, hg) in b.heads.iter_mut().zip(&g.heads) {
                h.apply_update(hg, lr)?;
            }
        }
        Ok(())
    }
}
