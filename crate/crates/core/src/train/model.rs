use crate::error::Result;
use crate::lut::OpCounts;
use crate::models::{generate, SequenceModel, SnnTransformer, SpikingRnn};
use crate::train::config::{ModelConfig, ModelKind};

/// Either trainable language model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Rnn(SpikingRnn),
    Transformer(SnnTransformer),
}

impl Model {
    /// Fresh model: zero synapses, anchors (and positional vectors) from `seed`.
    pub fn build(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match cfg.kind {
            ModelKind::Rnn => Model::Rnn(SpikingRnn::new(&cfg.rnn(), seed)?),
            ModelKind::Transformer => Model::Transformer(SnnTransformer::new(&cfg.transformer(), seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rnn(_) => ModelKind::Rnn,
            Model::Transformer(_) => ModelKind::Transformer,
        }
    }

    pub fn forward(&self, tokens: &[u8]) -> Result<Vec<Vec<f32>>> {
        match self {
            Model::Rnn(m) => m.forward(tokens),
            Model::Transformer(m) => m.forward(tokens),
        }
    }

    pub fn forward_counted(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>> {
        match self {
            Model::Rnn(m) => m.forward_counted(tokens, counts),
            Model::Transformer(m) => m.forward_counted(tokens, counts),
        }
    }

    /// Sample `len` bytes after `prompt` with a context of `window` bytes.
    pub fn generate(&self, prompt: &[u8], len: usize, temperature: f32, window: usize, seed: u64) -> Result<Vec<u8>> {
        match self {
            Model::Rnn(m) => generate(m, prompt, len, temperature, window, seed),
            Model::Transformer(m) => generate(m, prompt, len, temperature, window.min(m.max_len()), seed),
        }
    }
}
