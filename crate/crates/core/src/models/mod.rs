//! Architectures built from look-up transforms.

pub mod attention;
pub mod deep;
pub mod embedding;
pub mod finetune;
pub mod generate;
pub mod rnn;
pub mod transformer;

pub use attention::{concat_index, AttentionHead, HeadGrads, VIndexCache};
pub use deep::{DeepCache, DeepSnn};
pub use embedding::Embedding;
pub use finetune::{fine_tune_add_table, fine_tune_split_table};
pub use generate::{generate, sample_softmax};
pub use rnn::{Combine, RnnCache, RnnConfig, RnnGrads, SpikingRnn};
pub use transformer::{SnnTransformer, TransformerCache, TransformerConfig, TransformerGrads};

use crate::autograd::Backprop;
use crate::error::Result;
use crate::lut::OpCounts;

/// Byte vocabulary size.
pub const VOCAB: usize = 256;

/// Accumulated parameter gradients of one model.
pub trait Gradients: Clone + Default + Send {
    fn merge(&mut self, other: &Self);
    fn is_zero(&self) -> bool;
}

/// A next-byte model: one logit vector per input position.
pub trait SequenceModel {
    type Cache: Send;
    type Grads: Gradients;

    fn forward(&self, tokens: &[u8]) -> Result<Vec<Vec<f32>>> {
        self.forward_counted(tokens, &mut OpCounts::default())
    }

    /// Inference pass; `counts` accumulates operation counts.
    fn forward_counted(&self, tokens: &[u8], counts: &mut OpCounts) -> Result<Vec<Vec<f32>>>;

    fn forward_train(&self, tokens: &[u8], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<(Vec<Vec<f32>>, Self::Cache)>;

    fn backward(&self, cache: &Self::Cache, dlogits: &[Vec<f32>], bp: &Backprop<'_>, counts: &mut OpCounts) -> Result<Self::Grads>;

    fn apply_update(&mut self, grads: &Self::Grads, lr: f32) -> Result<()>;
}
