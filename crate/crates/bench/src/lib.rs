//! Fixtures shared by the benchmarks in `benches/`.

use binn_core::data::{synth_generate, SynthConfig, SynthDataset};
use binn_core::metrics::PredictionSet;
use binn_core::train::{fit_normalizer, Dataset, ModelKind, TrainConfig};

/// Default-sized synthetic data with `videos` training records.
pub fn synthetic(videos: usize) -> SynthDataset {
    synth_generate(&SynthConfig {
        train_videos: videos,
        val_videos: 1,
        ..SynthConfig::default()
    })
    .expect("synthetic data")
}

/// Normalized training set for `ds`.
pub fn dataset(ds: &SynthDataset) -> Dataset {
    let config = TrainConfig::defaults(ModelKind::Binn);
    let norm = fit_normalizer(&ds.train, &config).expect("normalizer");
    Dataset::from_records(&ds.train, &ds.hierarchy, config.features, &norm).expect("dataset")
}

/// Deterministic pseudo-random scores with the entity labels of `ds`.
pub fn prediction_set(ds: &SynthDataset) -> PredictionSet {
    let classes = ds.hierarchy.entity_count();
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let scores = ds
        .train
        .iter()
        .map(|_| {
            (0..classes)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64
                })
                .collect()
        })
        .collect();
    let positives = ds.train.iter().map(|r| r.entity_labels().to_vec()).collect();
    PredictionSet::new(classes, scores, positives).expect("prediction set")
}
