//! Small conditional denoising-diffusion model over polarization patches.
//!
//! The generative mechanism under study is representation-level: a
//! convolutional ε-predictor is trained to denoise a target tensor (one of
//! three interchangeable polarization encodings) conditioned on features of
//! the grayscale intensity patch. Everything runs in pixel space on small
//! patches with hand-rolled forward/backward passes in `f64`, so training is
//! deterministic and gradients are testable against finite differences.
//!
//! Submodules:
//! * [`schedule`] — forward-process variance schedule;
//! * [`tensor`] — NCHW tensors and the im2col/GEMM convolution plumbing;
//! * [`layers`] — conv / linear / SiLU / time-embedding layers with backprop;
//! * [`model`] — the condition encoder and denoiser wired together;
//! * [`adamw`] — decoupled-weight-decay Adam;
//! * [`repr`] — the three target representations and their codecs;
//! * [`train`] — forward diffusion, the ε-objective, and the training loop;
//! * [`sample`] — ancestral sampling;
//! * [`data`] — procedurally rendered training scenes;
//! * [`ablation`] — the equal-budget representation comparison;
//! * [`checkpoint`] — binary save/load of trained parameters.

pub mod ablation;
pub mod adamw;
pub mod checkpoint;
pub mod data;
pub mod layers;
pub mod model;
pub mod repr;
pub mod sample;
pub mod schedule;
pub mod tensor;
pub mod train;

pub use ablation::{ablation_harness, AblationConfig, AblationRun, AblationTable};
pub use adamw::AdamW;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{build_dataset, generate_scene, OracleScene};
pub use model::{DiffusionModel, ModelConfig};
pub use repr::{condition_tensor, decode_representation, encode_target, TargetRepresentation};
pub use sample::sample;
pub use schedule::{make_schedule, NoiseSchedule};
pub use tensor::Tensor;
pub use train::{forward_diffuse, loss_and_gradients, train, train_with_progress, training_loss, TrainOutcome, TrainingConfig};
