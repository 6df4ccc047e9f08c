//! Records, shard and checkpoint files, batching, and synthetic data.

mod batch;
mod checkpoint;
mod codec;
mod shard;
mod synth;

pub use batch::{batch_indices, batch_iterator, epoch_permutation, BatchSchedule};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use shard::{
    decode_shard, encode_shard, read_shard, write_shard, RecordFeature, VideoRecord, SHARD_MAGIC,
    SHARD_VERSION,
};
pub use synth::{clamped_poisson_rate, mean_entity_labels, synth_generate, SynthConfig, SynthDataset};
