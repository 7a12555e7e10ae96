//! Binary checkpoint format (little-endian).
//!
//! ```text
//! "PLYC" | u32 version | u32 config length | config (UTF-8 key=value lines)
//! u64 step | u64 rng word position (low) | u64 (high) | u32 model tag
//! model payload
//! ```
//!
//! A transform is `u32 n_t, n_in, n_out | u8 residual | u32 train_only
//! (u32::MAX = none)`, then per table `u32 mode tag | u32 n_c | anchors |
//! f32 rows` (row-major, `row_count x n_out`). Mode tags: 0 pairwise
//! (`u32 a, b` per pair), 1 component (`u32` per index), 2 hyperplane
//! (`n_in` f32 per plane), 3 bins (`u32 m, f32 lo, f32 hi`, then indices),
//! 4 mixed (`u32` pair count, pairs, `u32` single count, singles). Attention
//! rows use the `[q | k | pe]` index layout. An embedding is `u32 rows, u32
//! dim, f32 data`.
//!
//! The RNN payload is `u32 combine | E | S | Uh`; the transformer payload is
//! `E | u32 blocks | per block (u32 heads | per head (V | PE) | u8 has ffn |
//! ffn?) | unembedder`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::lut::{AnchorSet, Bins, LookupTable, LutTransform};
use crate::models::rnn::Combine;
use crate::models::transformer::Block;
use crate::models::{AttentionHead, Embedding, SnnTransformer, SpikingRnn};
use crate::train::config::{ModelKind, TrainConfig};
use crate::train::model::Model;

pub const MAGIC: [u8; 4] = *b"PLYC";
pub const VERSION: u32 = 1;

/// Everything needed to resume a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub step: u64,
    /// Position of the run's random stream.
    pub rng_word_pos: u128,
    pub model: Model,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Malformed(format!("{v} does not fit in u32")))?;
        self.u32(v);
        Ok(())
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f32s(&mut self, v: &[f32]) {
        self.0.reserve(v.len() * 4);
        v.iter().for_each(|&x| self.f32(x));
    }

    fn indices(&mut self, v: &[usize]) -> Result<()> {
        v.iter().try_for_each(|&i| self.usize(i))
    }

    fn pairs(&mut self, v: &[(usize, usize)]) -> Result<()> {
        v.iter().try_for_each(|&(a, b)| {
            self.usize(a)?;
            self.usize(b)
        })
    }

    fn embedding(&mut self, e: &Embedding) -> Result<()> {
        self.usize(e.rows())?;
        self.usize(e.dim())?;
        self.f32s(e.data());
        Ok(())
    }

    fn transform(&mut self, t: &LutTransform) -> Result<()> {
        self.usize(t.n_tables())?;
        self.usize(t.n_in())?;
        self.usize(t.n_out())?;
        self.u8(t.residual() as u8);
        match t.train_only() {
            Some(i) => self.usize(i)?,
            None => self.u32(u32::MAX),
        }
        for table in t.tables() {
            let a = table.anchors();
            self.u32(mode_tag(a));
            self.usize(a.n_comparisons())?;
            match a {
                AnchorSet::PairwiseSign { pairs } => self.pairs(pairs)?,
                AnchorSet::ComponentSign { singles } => self.indices(singles)?,
                AnchorSet::HyperplaneSign { planes } => planes.iter().for_each(|p| self.f32s(p)),
                AnchorSet::BinQuantized { singles, bins } => {
                    self.u32(bins.m);
                    self.f32(bins.lo);
                    self.f32(bins.hi);
                    self.indices(singles)?;
                }
                AnchorSet::Mixed { pairs, singles } => {
                    self.usize(pairs.len())?;
                    self.pairs(pairs)?;
                    self.usize(singles.len())?;
                    self.indices(singles)?;
                }
            }
            self.f32s(table.rows());
        }
        Ok(())
    }
}

fn mode_tag(a: &AnchorSet) -> u32 {
    match a {
        AnchorSet::PairwiseSign { .. } => 0,
        AnchorSet::ComponentSign { .. } => 1,
        AnchorSet::HyperplaneSign { .. } => 2,
        AnchorSet::BinQuantized { .. } => 3,
        AnchorSet::Mixed { .. } => 4,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or(Error::Truncated)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn indices(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.usize()).collect()
    }

    fn pairs(&mut self, n: usize) -> Result<Vec<(usize, usize)>> {
        (0..n).map(|_| Ok((self.usize()?, self.usize()?))).collect()
    }

    fn embedding(&mut self) -> Result<Embedding> {
        let rows = self.usize()?;
        let dim = self.usize()?;
        let data = self.f32s(rows.checked_mul(dim).ok_or(Error::Truncated)?)?;
        Embedding::from_data(rows, dim, data)
    }

    fn transform(&mut self) -> Result<LutTransform> {
        let n_t = self.usize()?;
        let n_in = self.usize()?;
        let n_out = self.usize()?;
        let residual = match self.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Malformed(format!("residual flag {b}"))),
        };
        let train_only = match self.u32()? {
            u32::MAX => None,
            i => Some(i as usize),
        };
        let mut tables = Vec::with_capacity(n_t.min(1 << 16));
        for _ in 0..n_t {
            let tag = self.u32()?;
            let n_c = self.usize()?;
            let anchors = match tag {
                0 => AnchorSet::PairwiseSign { pairs: self.pairs(n_c)? },
                1 => AnchorSet::ComponentSign {
                    singles: self.indices(n_c)?,
                },
                2 => AnchorSet::HyperplaneSign {
                    planes: (0..n_c).map(|_| self.f32s(n_in)).collect::<Result<_>>()?,
                },
                3 => {
                    let bins = Bins {
                        m: self.u32()?,
                        lo: self.f32()?,
                        hi: self.f32()?,
                    };
                    AnchorSet::BinQuantized {
                        singles: self.indices(n_c)?,
                        bins,
                    }
                }
                4 => {
                    let np = self.usize()?;
                    let pairs = self.pairs(np)?;
                    let ns = self.usize()?;
                    let singles = self.indices(ns)?;
                    if np + ns != n_c {
                        return Err(Error::Malformed(format!("mixed table with {np} + {ns} != {n_c} comparisons")));
                    }
                    AnchorSet::Mixed { pairs, singles }
                }
                t => return Err(Error::Malformed(format!("unknown mode tag {t}"))),
            };
            anchors
                .validate(n_in)
                .map_err(|e| Error::Malformed(e.to_string()))?;
            let rows = anchors.row_count()? as usize;
            let data = self.f32s(rows.checked_mul(n_out).ok_or(Error::Truncated)?)?;
            tables.push(LookupTable::from_rows(anchors, n_in, n_out, data)?);
        }
        let mut t = LutTransform::from_tables(tables, n_in, n_out, residual)?;
        if let Some(i) = train_only {
            if i >= n_t {
                return Err(Error::Malformed(format!("train_only table {i} of {n_t}")));
            }
        }
        t.set_train_only(train_only);
        Ok(t)
    }
}

fn model_payload(w: &mut Writer, model: &Model) -> Result<()> {
    match model {
        Model::Rnn(m) => {
            w.u32(match m.combine() {
                Combine::Additive => 0,
                Combine::Concat => 1,
            });
            w.embedding(m.embed())?;
            w.transform(m.recur())?;
            w.transform(m.unembed())
        }
        Model::Transformer(m) => {
            w.embedding(m.embed())?;
            w.usize(m.blocks().len())?;
            for b in m.blocks() {
                w.usize(b.heads.len())?;
                for h in &b.heads {
                    w.transform(h.v())?;
                    w.embedding(h.pe())?;
                }
                match &b.ffn {
                    Some(f) => {
                        w.u8(1);
                        w.transform(f)?;
                    }
                    None => w.u8(0),
                }
            }
            w.transform(m.unembed())
        }
    }
}

fn read_model(r: &mut Reader<'_>, kind: ModelKind) -> Result<Model> {
    Ok(match kind {
        ModelKind::Rnn => {
            let combine = match r.u32()? {
                0 => Combine::Additive,
                1 => Combine::Concat,
                c => return Err(Error::Malformed(format!("combine tag {c}"))),
            };
            let e = r.embedding()?;
            let s = r.transform()?;
            let u = r.transform()?;
            Model::Rnn(SpikingRnn::from_parts(e, s, u, combine)?)
        }
        ModelKind::Transformer => {
            let e = r.embedding()?;
            let n_blocks = r.usize()?;
            let mut blocks = Vec::with_capacity(n_blocks.min(1 << 10));
            for _ in 0..n_blocks {
                let n_heads = r.usize()?;
                let mut heads = Vec::with_capacity(n_heads.min(1 << 10));
                for _ in 0..n_heads {
                    let v = r.transform()?;
                    let pe = r.embedding()?;
                    heads.push(AttentionHead::from_parts(v, pe)?);
                }
                let ffn = match r.u8()? {
                    0 => None,
                    1 => Some(r.transform()?),
                    b => return Err(Error::Malformed(format!("ffn flag {b}"))),
                };
                blocks.push(Block { heads, ffn });
            }
            let u = r.transform()?;
            Model::Transformer(SnnTransformer::from_parts(e, blocks, u)?)
        }
    })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(&MAGIC);
        w.u32(VERSION);
        let cfg = self.config.to_kv_lines();
        w.usize(cfg.len())?;
        w.0.extend_from_slice(cfg.as_bytes());
        w.u64(self.step);
        w.u64(self.rng_word_pos as u64);
        w.u64((self.rng_word_pos >> 64) as u64);
        w.u32(match self.model.kind() {
            ModelKind::Rnn => 0,
            ModelKind::Transformer => 1,
        });
        model_payload(&mut w, &self.model)?;
        Ok(w.0)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let len = r.usize()?;
        let text = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Malformed(format!("config block: {e}")))?;
        let config = TrainConfig::from_kv_lines(text)?;
        let step = r.u64()?;
        let lo = r.u64()? as u128;
        let hi = r.u64()? as u128;
        let kind = match r.u32()? {
            0 => ModelKind::Rnn,
            1 => ModelKind::Transformer,
            k => return Err(Error::Malformed(format!("model tag {k}"))),
        };
        if kind != config.model.kind {
            return Err(Error::Malformed(format!(
                "payload holds a {kind} but the config says {}",
                config.model.kind
            )));
        }
        let model = read_model(&mut r, kind)?;
        if !r.buf.is_empty() {
            return Err(Error::Malformed(format!("{} trailing bytes", r.buf.len())));
        }
        Ok(Checkpoint {
            config,
            step,
            rng_word_pos: lo | (hi << 64),
            model,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
