//! Closed-form costs. All arithmetic is in `u128`; widths beyond what a
//! `u128` shift allows are rejected.

use crate::error::{Error, Result};
use crate::resources::report::{Bandwidth, Component, Compute, ResourceReport};

const VOCAB: u128 = 256;

fn pow2(bits: u128) -> Result<u128> {
    if bits >= 100 {
        return Err(Error::InvalidArgument(format!("2^{bits} rows is out of range")));
    }
    Ok(1u128 << bits)
}

/// Footprint, bandwidth and compute of one look-up transform applied once:
/// `n_t` tables of `2^{n_c}` rows of width `n_out`.
pub fn lut_component(name: &str, n_t: u128, n_c: u128, n_out: u128) -> Result<Component> {
    Ok(Component {
        name: name.to_string(),
        footprint: n_t * pow2(n_c)? * n_out,
        bandwidth: Bandwidth::fixed(2 * n_t * n_c + n_t * n_out),
        compute: Compute {
            multiplications: 0,
            additions: n_t * n_out,
            comparisons: n_t * n_c,
        },
    })
}

/// Spiking RNN per token: embedder `E`, recurrent `S` and unembedder `Uh`.
pub fn snn_rnn_report(n: u128, n_t: u128, n_c: u128, n_t_u: u128, n_c_u: u128) -> Result<ResourceReport> {
    let mut components = Vec::new();
    components.push(Component {
        name: "E".into(),
        footprint: VOCAB * n,
        bandwidth: Bandwidth::default(),
        compute: Compute::default(),
    });
    if n_t > 0 {
        components.push(lut_component("S", n_t, n_c, n)?);
    }
    if n_t_u > 0 {
        components.push(lut_component("Uh", n_t_u, n_c_u, VOCAB)?);
    }
    if n_t == 0 && n_t_u == 0 {
        components[0].footprint = 0;
    }
    Ok(ResourceReport {
        title: "spiking RNN, per token".into(),
        n_inp: 0,
        components,
    })
}

/// Shape of an SNN transformer for costing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnnTransformerShape {
    pub n: u128,
    pub n_t: u128,
    pub n_c: u128,
    pub p: u128,
    pub n_inp: u128,
    pub heads: u128,
    pub layers: u128,
    pub ffn: bool,
    pub n_t_u: u128,
    pub n_c_u: u128,
}

impl SnnTransformerShape {
    /// Six single-head attention layers, no feed-forward transform.
    pub fn attention_only() -> Self {
        SnnTransformerShape {
            n: 16,
            n_t: 10,
            n_c: 6,
            p: 4,
            n_inp: 32,
            heads: 1,
            layers: 6,
            ffn: false,
            n_t_u: 16,
            n_c_u: 6,
        }
    }

    /// The larger configuration with four heads and a feed-forward transform.
    pub fn full() -> Self {
        SnnTransformerShape {
            n: 32,
            n_t: 16,
            n_c: 6,
            p: 4,
            n_inp: 32,
            heads: 4,
            layers: 6,
            ffn: true,
            n_t_u: 16,
            n_c_u: 6,
        }
    }
}

fn attention_component(s: &SnnTransformerShape) -> Result<Component> {
    Ok(Component {
        name: "V attention".into(),
        footprint: s.n_t * pow2(2 * s.n_c + s.p)? * s.n,
        bandwidth: Bandwidth {
            fixed: 2 * s.n_t * s.n_c,
            per_inp: 3 * s.n_t,
        },
        compute: Compute {
            multiplications: 0,
            additions: s.n_t * s.n * s.n_inp * s.n_inp,
            comparisons: 2 * s.n_t * s.n_c * s.n_inp,
        },
    })
}

fn ffn_component(s: &SnnTransformerShape) -> Result<Component> {
    Ok(Component {
        name: "S feed-forward".into(),
        footprint: s.n_t * pow2(s.n_c)? * s.n,
        bandwidth: Bandwidth::default(),
        compute: Compute {
            multiplications: 0,
            additions: s.n_t * s.n * s.n_inp,
            comparisons: 0,
        },
    })
}

/// Per layer and per head: the attention transform plus the feed-forward
/// summation and footprint rows, which this scope includes even for the
/// attention-only model.
pub fn snn_transformer_table(s: &SnnTransformerShape) -> Result<ResourceReport> {
    Ok(ResourceReport {
        title: "SNN transformer, per layer per head".into(),
        n_inp: s.n_inp,
        components: vec![attention_component(s)?, ffn_component(s)?],
    })
}

/// Whole model: `layers x heads` attention transforms, the feed-forward
/// transforms when enabled, embedder and unembedder.
pub fn snn_transformer_report(s: &SnnTransformerShape) -> Result<ResourceReport> {
    let mut attn = attention_component(s)?;
    attn.footprint *= s.layers * s.heads;
    attn.bandwidth.fixed *= s.layers * s.heads;
    attn.bandwidth.per_inp *= s.layers * s.heads;
    attn.compute.additions *= s.layers * s.heads;
    attn.compute.comparisons *= s.layers * s.heads;
    let mut components = vec![
        Component {
            name: "E".into(),
            footprint: VOCAB * s.n,
            bandwidth: Bandwidth::default(),
            compute: Compute::default(),
        },
        attn,
    ];
    if s.ffn {
        let mut f = lut_component("S feed-forward", s.n_t, s.n_c, s.n)?;
        f.footprint *= s.layers;
        f.bandwidth.fixed *= s.layers;
        f.compute.additions *= s.layers * s.n_inp;
        f.compute.comparisons *= s.layers * s.n_inp;
        components.push(f);
    }
    let mut u = lut_component("unembedder", s.n_t_u, s.n_c_u, VOCAB)?;
    u.compute.additions *= s.n_inp;
    u.compute.comparisons *= s.n_inp;
    components.push(u);
    Ok(ResourceReport {
        title: "SNN transformer, whole model".into(),
        n_inp: s.n_inp,
        components,
    })
}

/// Dense transformer baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnnTransformerConfig {
    pub d_model: u128,
    pub d_k: u128,
    pub d_ff: u128,
    pub n_inp: u128,
    pub layers: u128,
    pub heads: u128,
}

impl Default for AnnTransformerConfig {
    fn default() -> Self {
        AnnTransformerConfig {
            d_model: 512,
            d_k: 64,
            d_ff: 2048,
            n_inp: 32,
            layers: 6,
            heads: 8,
        }
    }
}

/// Per layer: projections, attention products and the two FFN matrices.
pub fn ann_transformer_report(c: &AnnTransformerConfig) -> ResourceReport {
    let (d, dk, n) = (c.d_model, c.d_k, c.n_inp);
    let qk = 2 * dk * n * n + 2 * d * d * n;
    let vo = 2 * dk * n * n + 4 * d * d * n;
    let ffn = 2 * d * c.d_ff * n;
    let both = |v| Compute {
        multiplications: v,
        additions: v,
        comparisons: 0,
    };
    ResourceReport {
        title: "transformer, per layer".into(),
        n_inp: n,
        components: vec![
            Component {
                name: "QK^T".into(),
                footprint: 0,
                bandwidth: Bandwidth::default(),
                compute: both(qk),
            },
            Component {
                name: "V and O".into(),
                footprint: 0,
                bandwidth: Bandwidth::default(),
                compute: both(vo),
            },
            Component {
                name: "W^Q W^K W^V W^O".into(),
                footprint: 4 * d * d,
                bandwidth: Bandwidth::fixed(4 * d * d),
                compute: Compute::default(),
            },
            Component {
                name: "KV-cache".into(),
                footprint: 0,
                bandwidth: Bandwidth {
                    fixed: 0,
                    per_inp: dk + d,
                },
                compute: Compute::default(),
            },
            Component {
                name: "FFN".into(),
                footprint: 2 * d * c.d_ff,
                bandwidth: Bandwidth::default(),
                compute: both(ffn),
            },
        ],
    }
}
