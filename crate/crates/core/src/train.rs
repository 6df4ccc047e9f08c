//! End-to-end pipeline: feature preparation, model selection, the training
//! loop, checkpoints, evaluation and top-k prediction.

use std::str::FromStr;

use crate::baseline::LogRegParams;
use crate::binn::BinnParams;
use crate::config::KeyValues;
use crate::data::{BatchSchedule, Checkpoint, NamedTensor, VideoRecord};
use crate::error::{Error, Result};
use crate::features::{self, NormKind, NormScale, NormalizerStats, DEFAULT_EPSILON};
use crate::hierarchy::LabelHierarchy;
use crate::linalg::Matrix;
use crate::metrics::{EvalReport, PredictionSet};
use crate::model::{Batch, Parameters, TensorView};
use crate::optim::{AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Binn,
    LogReg,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Binn => "binn",
            ModelKind::LogReg => "logreg",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binn" => Ok(ModelKind::Binn),
            "logreg" => Ok(ModelKind::LogReg),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    Rgb,
    RgbAudio,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Rgb => "rgb",
            FeatureSet::RgbAudio => "rgb+audio",
        }
    }

    pub fn with_audio(self) -> bool {
        self == FeatureSet::RgbAudio
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(FeatureSet::Rgb),
            "rgb+audio" | "rgb-audio" => Ok(FeatureSet::RgbAudio),
            other => Err(Error::Config(format!("unknown feature set {other:?}"))),
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub features: FeatureSet,
    pub norm: NormKind,
    pub l2: bool,
    pub optimizer: AdamConfig,
    pub iters: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub log_every: u64,
    /// L2 penalty of the logistic baseline (ignored by the BINN).
    pub lambda: f64,
    pub epsilon: f64,
}

impl TrainConfig {
    /// Defaults for `model`: BINN 90k iterations at 1e-3 decaying ×0.1 every
    /// 40k; baseline 35k iterations at 1e-2. Both use batches of 1024 and
    /// weight decay 1e-8.
    pub fn defaults(model: ModelKind) -> Self {
        let (optimizer, iters) = match model {
            ModelKind::Binn => (AdamConfig::binn(), 90_000),
            ModelKind::LogReg => (AdamConfig::logreg(), 35_000),
        };
        Self {
            model,
            features: FeatureSet::Rgb,
            norm: NormKind::ZNorm,
            l2: true,
            optimizer,
            iters,
            batch_size: 1024,
            seed: 0,
            log_every: 100,
            lambda: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Reads a configuration, starting from the defaults of its `model`
    /// key (BINN when absent).
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let model = kv.parse_or("model", ModelKind::Binn)?;
        let d = Self::defaults(model);
        let o = d.optimizer;
        let c = Self {
            model,
            features: kv.parse_or("features", d.features)?,
            norm: kv.parse_or("norm", d.norm)?,
            l2: kv.parse_or("l2", d.l2)?,
            optimizer: AdamConfig {
                base_lr: kv.parse_or("lr", o.base_lr)?,
                beta1: kv.parse_or("beta1", o.beta1)?,
                beta2: kv.parse_or("beta2", o.beta2)?,
                eps: kv.parse_or("adam_eps", o.eps)?,
                weight_decay: kv.parse_or("weight_decay", o.weight_decay)?,
                decay_factor: kv.parse_or("decay_factor", o.decay_factor)?,
                decay_every: kv.parse_or("decay_every", o.decay_every)?,
            },
            iters: kv.parse_or("iters", d.iters)?,
            batch_size: kv.parse_or("batch_size", d.batch_size)?,
            seed: kv.parse_or("seed", d.seed)?,
            log_every: kv.parse_or("log_every", d.log_every)?,
            lambda: kv.parse_or("lambda", d.lambda)?,
            epsilon: kv.parse_or("epsilon", d.epsilon)?,
        };
        c.validate()?;
        Ok(c)
    }

    /// Renders every field; floats use round-trip formatting.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let o = &self.optimizer;
        kv.set("model", self.model.as_str());
        kv.set("features", self.features.as_str());
        kv.set("norm", self.norm.as_str());
        kv.set("l2", self.l2);
        kv.set("lr", format!("{:?}", o.base_lr));
        kv.set("beta1", format!("{:?}", o.beta1));
        kv.set("beta2", format!("{:?}", o.beta2));
        kv.set("adam_eps", format!("{:?}", o.eps));
        kv.set("weight_decay", format!("{:?}", o.weight_decay));
        kv.set("decay_factor", format!("{:?}", o.decay_factor));
        kv.set("decay_every", o.decay_every);
        kv.set("iters", self.iters);
        kv.set("batch_size", self.batch_size);
        kv.set("seed", self.seed);
        kv.set("log_every", self.log_every);
        kv.set("lambda", format!("{:?}", self.lambda));
        kv.set("epsilon", format!("{:?}", self.epsilon));
        kv
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("lambda must be >= 0 and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Un-normalized model inputs for `records`.
pub fn raw_features(records: &[VideoRecord], features: FeatureSet) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| r.video_feature(features.with_audio()))
        .collect()
}

/// Fits the configured normalizer on `records`.
pub fn fit_normalizer(records: &[VideoRecord], config: &TrainConfig) -> Result<NormalizerStats> {
    let raw = raw_features(records, config.features)?;
    Ok(features::fit(config.norm, &raw, config.epsilon)?.with_l2(config.l2))
}

/// Normalized features and labels held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub x: Matrix,
    pub labels: Vec<Vec<Vec<usize>>>,
}

impl Dataset {
    /// Builds a dataset, validating labels against `hierarchy`.
    pub fn from_records(
        records: &[VideoRecord],
        hierarchy: &LabelHierarchy,
        features: FeatureSet,
        normalizer: &NormalizerStats,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("no records"));
        }
        let sizes = hierarchy.layer_sizes();
        let d = normalizer.dim();
        let mut x = Matrix::zeros(records.len(), d);
        let mut labels = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.labels.len() != sizes.len() {
                return Err(Error::Malformed(format!(
                    "record {:?} has {} label layers, hierarchy has {}",
                    r.id,
                    r.labels.len(),
                    sizes.len()
                )));
            }
            for (t, set) in r.labels.iter().enumerate() {
                if let Some(&bad) = set.iter().find(|&&l| l >= sizes[t]) {
                    return Err(Error::LabelOutOfRange {
                        layer: t,
                        index: bad,
                        len: sizes[t],
                    });
                }
            }
            let raw = r.video_feature(features.with_audio())?;
            x.row_mut(i).copy_from_slice(&normalizer.apply(&raw)?);
            labels.push(r.labels.clone());
        }
        Ok(Self {
            ids: records.iter().map(|r| r.id.clone()).collect(),
            x,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn batch(&self, indices: &[usize]) -> Batch<'_> {
        let d = self.x.cols();
        let mut x = Matrix::zeros(indices.len(), d);
        for (r, &i) in indices.iter().enumerate() {
            x.row_mut(r).copy_from_slice(self.x.row(i));
        }
        Batch {
            x,
            labels: indices.iter().map(|&i| self.labels[i].as_slice()).collect(),
        }
    }
}

/// A trainable model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Binn(BinnParams),
    LogReg(LogRegParams),
}

impl Model {
    pub fn init(kind: ModelKind, h: &LabelHierarchy, d: usize, seed: u64, lambda: f64) -> Self {
        match kind {
            ModelKind::Binn => Model::Binn(BinnParams::init(h, d, seed)),
            ModelKind::LogReg => {
                Model::LogReg(LogRegParams::zeros(h.entity_count(), d).with_lambda(lambda))
            }
        }
    }

    /// Zero-valued model of the given shape.
    pub fn zeros(kind: ModelKind, h: &LabelHierarchy, d: usize, lambda: f64) -> Self {
        match kind {
            ModelKind::Binn => Model::Binn(BinnParams::zeros(&h.layer_sizes(), d)),
            ModelKind::LogReg => {
                Model::LogReg(LogRegParams::zeros(h.entity_count(), d).with_lambda(lambda))
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Binn(_) => ModelKind::Binn,
            Model::LogReg(_) => ModelKind::LogReg,
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Model::Binn(p) => Model::Binn(p.zeros_like()),
            Model::LogReg(p) => Model::LogReg(LogRegParams::zeros(p.classes(), p.input_dim())),
        }
    }

    pub fn batch_loss_grad(&self, batch: &Batch<'_>, grads: &mut Model) -> Result<f64> {
        match (self, grads) {
            (Model::Binn(p), Model::Binn(g)) => p.batch_loss_grad(batch, g),
            (Model::LogReg(p), Model::LogReg(g)) => p.batch_loss_grad(batch, g),
            _ => Err(Error::Config("gradient buffer of a different model kind".into())),
        }
    }

    /// Per-layer probabilities. The baseline only models the finest layer;
    /// the layer above it is scored by the maximum over each vertical's
    /// children, and coarser layers are `None`.
    pub fn predict_layers(&self, h: &LabelHierarchy, xs: &Matrix) -> Result<Vec<Option<Matrix>>> {
        match self {
            Model::Binn(p) => Ok(p.predict_batch(xs)?.into_iter().map(Some).collect()),
            Model::LogReg(p) => {
                let entity = p.predict_batch(xs)?;
                let m = h.depth();
                let mut out: Vec<Option<Matrix>> = vec![None; m];
                if m >= 2 {
                    let nv = h.layer(m - 2).len();
                    let mut vert = Matrix::zeros(xs.rows(), nv);
                    for r in 0..xs.rows() {
                        vert.row_mut(r)
                            .copy_from_slice(&h.induce_vertical_scores(entity.row(r))?);
                    }
                    out[m - 2] = Some(vert);
                }
                out[m - 1] = Some(entity);
                Ok(out)
            }
        }
    }
}

impl Parameters for Model {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        match self {
            Model::Binn(p) => p.tensors(),
            Model::LogReg(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::Binn(p) => p.tensors_mut(),
            Model::LogReg(p) => p.tensors_mut(),
        }
    }
}

/// One logged training loss: mean per-video loss of the batch at `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub loss: f64,
}

/// Model, optimizer and normalizer state of a training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub hierarchy: LabelHierarchy,
    pub normalizer: NormalizerStats,
    pub model: Model,
    pub optimizer: AdamState,
    pub log: Vec<LossRecord>,
}

impl Trainer {
    pub fn new(config: TrainConfig, hierarchy: LabelHierarchy, normalizer: NormalizerStats) -> Result<Self> {
        config.validate()?;
        let model = Model::init(
            config.model,
            &hierarchy,
            normalizer.dim(),
            config.seed,
            config.lambda,
        );
        let optimizer = AdamState::new(config.optimizer, &model);
        Ok(Self {
            config,
            hierarchy,
            normalizer,
            model,
            optimizer,
            log: Vec::new(),
        })
    }

    pub fn step(&self) -> u64 {
        self.optimizer.step
    }

    /// Trains until `until` updates have been applied in total (capped at
    /// the configured iteration count). `on_log` sees each logged loss.
    pub fn train_until(
        &mut self,
        data: &Dataset,
        until: u64,
        mut on_log: impl FnMut(&LossRecord),
    ) -> Result<()> {
        let until = until.min(self.config.iters);
        let mut schedule = BatchSchedule::new(data.len(), self.config.batch_size, self.config.seed)?;
        let mut grads = self.model.zeros_like();
        while self.optimizer.step < until {
            let step = self.optimizer.step;
            let batch = data.batch(schedule.batch(step));
            grads.fill_zero();
            let loss = self.model.batch_loss_grad(&batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at step {step}")));
            }
            self.optimizer.step(&mut self.model, &grads)?;
            let done = self.optimizer.step;
            if done == 1 || done % self.config.log_every == 0 || done == self.config.iters {
                let rec = LossRecord {
                    step: done,
                    loss: loss / batch.len() as f64,
                };
                on_log(&rec);
                self.log.push(rec);
            }
        }
        Ok(())
    }

    /// Runs the configured number of iterations.
    pub fn train(&mut self, data: &Dataset, on_log: impl FnMut(&LossRecord)) -> Result<()> {
        self.train_until(data, self.config.iters, on_log)
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut config = self.config.to_key_values();
        config.set("input_dim", self.normalizer.dim());
        config.set("norm.epsilon", format!("{:?}", self.normalizer.epsilon));
        config.set("norm.l2", self.normalizer.l2_after);
        config.set("norm.kind", self.normalizer.kind().as_str());

        let mut tensors = normalizer_tensors(&self.normalizer)?;
        let views = self.model.tensors();
        for t in &views {
            tensors.push(NamedTensor::new(
                t.name.clone(),
                t.shape.to_vec(),
                t.data.to_vec(),
            )?);
        }
        for (t, (m, v)) in views
            .iter()
            .zip(self.optimizer.first_moment.iter().zip(&self.optimizer.second_moment))
        {
            tensors.push(NamedTensor::new(format!("adam.m.{}", t.name), t.shape.to_vec(), m.clone())?);
            tensors.push(NamedTensor::new(format!("adam.v.{}", t.name), t.shape.to_vec(), v.clone())?);
        }
        let log: Vec<f64> = self
            .log
            .iter()
            .flat_map(|r| [r.step as f64, r.loss])
            .collect();
        tensors.push(NamedTensor::new("train.loss_log", vec![self.log.len(), 2], log)?);

        Ok(Checkpoint {
            step: self.optimizer.step,
            config,
            vocabulary: self.hierarchy.to_vocabulary_string(),
            tensors,
        })
    }

    /// Restores a run. With `expected` set, the checkpoint's tensors must fit
    /// that hierarchy; otherwise the embedded vocabulary is used.
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<&LabelHierarchy>) -> Result<Self> {
        let config = TrainConfig::from_key_values(&ck.config)?;
        let hierarchy = match expected {
            Some(h) => h.clone(),
            None => LabelHierarchy::parse_vocabulary(&ck.vocabulary)?,
        };
        let d: usize = ck.config.require("input_dim")?;
        let normalizer = normalizer_from_checkpoint(ck, d)?;

        let mut model = Model::zeros(config.model, &hierarchy, d, config.lambda);
        let mut optimizer = AdamState::new(config.optimizer, &model);
        let shapes: Vec<(String, [usize; 2])> = model
            .tensors()
            .iter()
            .map(|t| (t.name.clone(), t.shape))
            .collect();
        for ((name, shape), dst) in shapes.iter().zip(model.tensors_mut()) {
            dst.copy_from_slice(ck.expect_tensor(name, &shape[..])?);
        }
        for (i, (name, shape)) in shapes.iter().enumerate() {
            optimizer.first_moment[i] = ck.expect_tensor(&format!("adam.m.{name}"), &shape[..])?.to_vec();
            optimizer.second_moment[i] = ck.expect_tensor(&format!("adam.v.{name}"), &shape[..])?.to_vec();
        }
        optimizer.step = ck.step;

        let log = match ck.tensor("train.loss_log") {
            Some(t) => t
                .data
                .chunks_exact(2)
                .map(|c| LossRecord {
                    step: c[0] as u64,
                    loss: c[1],
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(Self {
            config,
            hierarchy,
            normalizer,
            model,
            optimizer,
            log,
        })
    }
}

fn normalizer_tensors(n: &NormalizerStats) -> Result<Vec<NamedTensor>> {
    let d = n.dim();
    let mut out = vec![NamedTensor::new("norm.mean", vec![d], n.mean.clone())?];
    match &n.scale {
        NormScale::StdDev(sd) => out.push(NamedTensor::new("norm.scale", vec![d], sd.clone())?),
        NormScale::Whitening(w) => out.push(NamedTensor::new(
            "norm.whitening",
            vec![d, d],
            w.as_slice().to_vec(),
        )?),
    }
    Ok(out)
}

/// Writes a normalizer alone into a checkpoint container.
pub fn normalizer_checkpoint(n: &NormalizerStats, features: FeatureSet) -> Result<Checkpoint> {
    let mut config = KeyValues::new();
    config.set("input_dim", n.dim());
    config.set("features", features.as_str());
    config.set("norm.epsilon", format!("{:?}", n.epsilon));
    config.set("norm.l2", n.l2_after);
    config.set("norm.kind", n.kind().as_str());
    Ok(Checkpoint {
        step: 0,
        config,
        vocabulary: String::new(),
        tensors: normalizer_tensors(n)?,
    })
}

/// Reads normalizer statistics from a checkpoint container.
pub fn normalizer_from_checkpoint(ck: &Checkpoint, d: usize) -> Result<NormalizerStats> {
    let kind: NormKind = ck.config.require("norm.kind")?;
    let mean = ck.expect_tensor("norm.mean", &[d])?.to_vec();
    let scale = match kind {
        NormKind::ZNorm => NormScale::StdDev(ck.expect_tensor("norm.scale", &[d])?.to_vec()),
        NormKind::PcaWhitening => NormScale::Whitening(Matrix::from_vec(
            d,
            d,
            ck.expect_tensor("norm.whitening", &[d, d])?.to_vec(),
        )?),
    };
    Ok(NormalizerStats {
        mean,
        scale,
        epsilon: ck.config.require("norm.epsilon")?,
        l2_after: ck.config.require("norm.l2")?,
    })
}

/// Per-layer probability matrices for a dataset (rows follow `data`).
pub fn predict_dataset(model: &Model, h: &LabelHierarchy, data: &Dataset) -> Result<Vec<Option<Matrix>>> {
    model.predict_layers(h, &data.x)
}

/// Evaluates every layer the model scores.
pub fn evaluate(model: &Model, h: &LabelHierarchy, data: &Dataset, gap_k: usize) -> Result<Vec<EvalReport>> {
    let probs = predict_dataset(model, h, data)?;
    let mut reports = Vec::new();
    for (t, p) in probs.into_iter().enumerate() {
        let Some(p) = p else { continue };
        let scores: Vec<Vec<f64>> = (0..p.rows()).map(|r| p.row(r).to_vec()).collect();
        let truth: Vec<Vec<usize>> = data.labels.iter().map(|l| l[t].clone()).collect();
        let set = PredictionSet::new(p.cols(), scores, truth)?;
        reports.push(EvalReport::compute(h.layer(t).name(), &set, gap_k)?);
    }
    Ok(reports)
}

/// The `k` highest-scoring labels, descending, ties by lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| (i, scores[i])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};

    fn tiny() -> (crate::data::SynthDataset, TrainConfig) {
        let ds = synth_generate(&SynthConfig {
            verticals: 3,
            entities: 12,
            feature_dim: 6,
            train_videos: 120,
            val_videos: 30,
            seed: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        let config = TrainConfig {
            iters: 40,
            batch_size: 16,
            log_every: 10,
            ..TrainConfig::defaults(ModelKind::Binn)
        };
        (ds, config)
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let c = TrainConfig::defaults(ModelKind::LogReg);
        assert_eq!(c.optimizer.base_lr, 0.01);
        assert_eq!(c.iters, 35_000);
        assert_eq!(TrainConfig::from_key_values(&c.to_key_values()).unwrap(), c);
        let b = TrainConfig::defaults(ModelKind::Binn);
        assert_eq!((b.iters, b.batch_size, b.optimizer.weight_decay), (90_000, 1024, 1e-8));
    }

    #[test]
    fn top_k_is_descending_with_index_ties() {
        assert_eq!(
            top_k(&[0.2, 0.9, 0.2, 0.5], 3),
            vec![(1, 0.9), (3, 0.5), (0, 0.2)]
        );
    }

    #[test]
    fn checkpoint_round_trip_and_shape_check() {
        let (ds, config) = tiny();
        let norm = fit_normalizer(&ds.train, &config).unwrap();
        let data = Dataset::from_records(&ds.train, &ds.hierarchy, config.features, &norm).unwrap();
        let mut tr = Trainer::new(config, ds.hierarchy.clone(), norm).unwrap();
        tr.train(&data, |_| {}).unwrap();
        let ck = tr.to_checkpoint().unwrap();
        let back = Trainer::from_checkpoint(&Checkpoint::decode(&ck.encode().unwrap()).unwrap(), None).unwrap();
        assert_eq!(back.model, tr.model);
        assert_eq!(back.optimizer, tr.optimizer);
        assert_eq!(back.normalizer, tr.normalizer);
        assert_eq!(back.log, tr.log);

        let other = LabelHierarchy::two_layer(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec![vec![0], vec![0]],
        )
        .unwrap();
        assert!(matches!(
            Trainer::from_checkpoint(&ck, Some(&other)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn logreg_reports_both_layers() {
        let (ds, config) = tiny();
        let config = TrainConfig {
            model: ModelKind::LogReg,
            ..config
        };
        let norm = fit_normalizer(&ds.train, &config).unwrap();
        let data = Dataset::from_records(&ds.val, &ds.hierarchy, config.features, &norm).unwrap();
        let tr = Trainer::new(config, ds.hierarchy.clone(), norm).unwrap();
        let reports = evaluate(&tr.model, &tr.hierarchy, &data, 20).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].layer, "verticals");
    }

    #[test]
    fn dataset_rejects_bad_labels() {
        let (mut ds, config) = tiny();
        ds.train[0].labels[1].push(999);
        let norm = NormalizerStats::identity(6);
        assert!(matches!(
            Dataset::from_records(&ds.train, &ds.hierarchy, config.features, &norm),
            Err(Error::LabelOutOfRange { index: 999, .. })
        ));
    }
}
