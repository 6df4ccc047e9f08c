//! Hierarchical multi-label video classification with bidirectional
//! inference in label space.
//!
//! The crate covers the full pipeline:
//!
//! - [`hierarchy`]: concept layers (verticals, entities) and their edges.
//! - [`features`]: frame pooling, audio concatenation, z-norm / PCA
//!   whitening and L2 normalization.
//! - [`binn`]: the bidirectional inference network with analytic gradients.
//! - [`baseline`]: per-entity logistic regression.
//! - [`optim`]: Adam with a step learning-rate schedule.
//! - [`metrics`]: Hit@1, PERR, mAP and gAP.
//! - [`data`]: shard and checkpoint files, batching, synthetic data.
//! - [`train`]: the training loop and evaluation glue.
//!
//! Scalars are `f64` in memory; shard payloads are `f32` on disk.

pub mod baseline;
pub mod binn;
pub mod config;
pub mod data;
pub mod error;
pub mod features;
pub mod hierarchy;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod train;

pub use baseline::LogRegParams;
pub use binn::{BinnActivations, BinnGradients, BinnParams};
pub use config::KeyValues;
pub use data::{Checkpoint, RecordFeature, SynthConfig, VideoRecord};
pub use error::{Error, Result};
pub use features::{NormKind, NormalizerStats};
pub use hierarchy::{ConceptLayer, LabelHierarchy};
pub use linalg::Matrix;
pub use metrics::{EvalReport, PredictionSet};
pub use model::{Batch, Parameters};
pub use optim::{AdamConfig, AdamState};
pub use train::{Dataset, FeatureSet, Model, ModelKind, TrainConfig, Trainer};
