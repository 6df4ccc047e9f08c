//! Synthetic two-layer hierarchical data.
//!
//! Every entity owns a Gaussian prototype, partly shared with its parent
//! verticals, and an independent audio prototype when audio is enabled. A
//! video draws a clamped-Poisson number of distinct entities; its pooled
//! feature is the mean of their prototypes plus isotropic noise,
//! and its vertical labels are the union of the entities' parents.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::hierarchy::{LabelHierarchy, MAX_PARENTS};

use super::shard::{RecordFeature, VideoRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub verticals: usize,
    pub entities: usize,
    /// Each entity gets between 1 and this many parents.
    pub max_parents: usize,
    pub feature_dim: usize,
    /// 0 disables audio.
    pub audio_dim: usize,
    /// Target mean number of entities per video (at least 1).
    pub mean_entities: f64,
    pub noise_std: f64,
    pub prototype_scale: f64,
    /// Fraction of each prototype's variance contributed by its parent
    /// verticals' shared vectors; 0 makes prototypes independent.
    pub vertical_share: f64,
    pub train_videos: usize,
    pub val_videos: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            verticals: 25,
            entities: 200,
            max_parents: 3,
            feature_dim: 64,
            audio_dim: 0,
            mean_entities: 1.8,
            noise_std: 0.1,
            prototype_scale: 1.0,
            vertical_share: 0.8,
            train_videos: 20_000,
            val_videos: 2_000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.verticals == 0 || self.entities == 0 || self.feature_dim == 0 {
            return fail("verticals, entities and feature_dim must be at least 1");
        }
        if self.train_videos == 0 || self.val_videos == 0 {
            return fail("video counts must be at least 1");
        }
        if !(1..=MAX_PARENTS).contains(&self.max_parents) {
            return fail("max_parents must be in 1..=3");
        }
        if !(self.mean_entities >= 1.0 && self.mean_entities <= self.entities as f64) {
            return fail("mean_entities must lie in [1, entities]");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail("noise_std must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.vertical_share) {
            return fail("vertical_share must lie in [0, 1]");
        }
        if !(self.prototype_scale > 0.0 && self.prototype_scale.is_finite()) {
            return fail("prototype_scale must be positive");
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            verticals: kv.parse_or("verticals", d.verticals)?,
            entities: kv.parse_or("entities", d.entities)?,
            max_parents: kv.parse_or("max_parents", d.max_parents)?,
            feature_dim: kv.parse_or("feature_dim", d.feature_dim)?,
            audio_dim: kv.parse_or("audio_dim", d.audio_dim)?,
            mean_entities: kv.parse_or("mean_entities", d.mean_entities)?,
            noise_std: kv.parse_or("noise_std", d.noise_std)?,
            prototype_scale: kv.parse_or("prototype_scale", d.prototype_scale)?,
            vertical_share: kv.parse_or("vertical_share", d.vertical_share)?,
            train_videos: kv.parse_or("train_videos", d.train_videos)?,
            val_videos: kv.parse_or("val_videos", d.val_videos)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Hierarchy plus train and validation records.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub hierarchy: LabelHierarchy,
    pub train: Vec<VideoRecord>,
    pub val: Vec<VideoRecord>,
    /// Entity prototypes, one row each.
    pub prototypes: Vec<Vec<f64>>,
}

/// Poisson rate whose count, clamped below at 1, has the requested mean.
///
/// `E[max(1, K)] = λ + e^{-λ}` for `K ~ Poisson(λ)`; solved by bisection.
pub fn clamped_poisson_rate(mean: f64) -> f64 {
    if mean <= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, mean);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + (-mid).exp() < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn synth_generate(c: &SynthConfig) -> Result<SynthDataset> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);

    // The first parent of entity e is e mod verticals.
    let mut parents = Vec::with_capacity(c.entities);
    for e in 0..c.entities {
        let first = e % c.verticals;
        let extra = rng.gen_range(0..c.max_parents.min(c.verticals));
        let mut ps = vec![first];
        while ps.len() < extra + 1 {
            let p = rng.gen_range(0..c.verticals);
            if !ps.contains(&p) {
                ps.push(p);
            }
        }
        parents.push(ps);
    }
    let hierarchy = LabelHierarchy::two_layer(
        (0..c.verticals).map(|i| format!("vertical_{i:03}")).collect(),
        (0..c.entities).map(|i| format!("entity_{i:04}")).collect(),
        parents,
    )?;

    let proto = Normal::new(0.0, c.prototype_scale).map_err(|e| Error::Config(e.to_string()))?;
    let gaussian = |dim: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| proto.sample(rng)).collect()
    };
    let shared: Vec<Vec<f64>> = (0..c.verticals).map(|_| gaussian(c.feature_dim, &mut rng)).collect();
    // proto_e = sqrt(s) · Σ_p v_p / sqrt(|P|) + sqrt(1 - s) · u_e, with
    // per-coordinate variance prototype_scale².
    let (ws, wu) = (c.vertical_share.sqrt(), (1.0 - c.vertical_share).sqrt());
    let mut prototypes = Vec::with_capacity(c.entities);
    for e in 0..c.entities {
        let ps = hierarchy.parents_of(e)?;
        let own = gaussian(c.feature_dim, &mut rng);
        let norm = ws / (ps.len() as f64).sqrt();
        prototypes.push(
            (0..c.feature_dim)
                .map(|d| wu * own[d] + norm * ps.iter().map(|&p| shared[p][d]).sum::<f64>())
                .collect::<Vec<f64>>(),
        );
    }
    let audio_prototypes: Vec<Vec<f64>> = (0..c.entities)
        .map(|_| gaussian(c.audio_dim, &mut rng))
        .collect();

    let rate = clamped_poisson_rate(c.mean_entities);
    let poisson = if rate > 0.0 {
        Some(Poisson::new(rate).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let make = |split: &str, count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<VideoRecord>> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let k = poisson
                .as_ref()
                .map_or(1, |p| p.sample(rng) as usize)
                .clamp(1, c.entities);
            let mut chosen = index::sample(rng, c.entities, k).into_vec();
            chosen.sort_unstable();
            let pooled = noisy_mean(&prototypes, &chosen, c.feature_dim, c.noise_std, rng);
            let audio = (c.audio_dim > 0).then(|| {
                noisy_mean(&audio_prototypes, &chosen, c.audio_dim, c.noise_std, rng)
            });
            let verticals: Vec<usize> = hierarchy.induce_vertical_labels(&chosen)?.into_iter().collect();
            out.push(VideoRecord {
                id: format!("{split}-{i:06}"),
                feature: RecordFeature::Pooled(pooled),
                audio,
                labels: vec![verticals, chosen],
            });
        }
        Ok(out)
    };
    let train = make("train", c.train_videos, &mut rng)?;
    let val = make("val", c.val_videos, &mut rng)?;
    Ok(SynthDataset {
        hierarchy,
        train,
        val,
        prototypes,
    })
}

fn noisy_mean(
    prototypes: &[Vec<f64>],
    chosen: &[usize],
    dim: usize,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f32> {
    let inv = 1.0 / chosen.len() as f64;
    (0..dim)
        .map(|d| {
            let mean: f64 = chosen.iter().map(|&e| prototypes[e][d]).sum::<f64>() * inv;
            let noise = if noise_std > 0.0 {
                noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                0.0
            };
            (mean + noise) as f32
        })
        .collect()
}

/// Mean number of entity labels per record.
pub fn mean_entity_labels(records: &[VideoRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.entity_labels().len()).sum::<usize>() as f64 / records.len() as f64
}
