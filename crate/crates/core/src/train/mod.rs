//! Byte-level language-model training: corpus, loss, schedule, loop,
//! configuration and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod loss;
pub mod model;
pub mod schedule;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ModelConfig, ModelKind, TrainConfig, TrainSettings};
pub use corpus::{eval_windows, load_corpus, sample_window, Corpus};
pub use loss::{nats_to_bits, softmax_cross_entropy};
pub use model::Model;
pub use schedule::{LrSchedule, ScheduleKind};
pub use trainer::{batch_grads, evaluate, evaluate_model, train_loop, window_grads, CurvePoint, TrainOptions, TrainState};
