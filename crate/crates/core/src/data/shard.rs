//! Binary shard files holding video records.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "HLVS" u16:version u64:record_count
//! per record:
//!   u16:id_len  id bytes (UTF-8)
//!   u8:layer_count, per layer: u16:label_count  u32 × label_count
//!   u8:feature_kind (0 = pooled, 1 = frames)
//!   u32:dims  [u32:frame_count if frames]  f32 × (dims or frames·dims)
//!   u32:audio_dims  f32 × audio_dims
//! u32:CRC32 of every byte after the header and record count
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{self, FrameFeatures};
use crate::linalg::Matrix;

use super::codec::{Reader, Writer};

pub const SHARD_MAGIC: [u8; 4] = *b"HLVS";
pub const SHARD_VERSION: u16 = 1;

/// The visual feature of a record: either already pooled or per frame.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordFeature {
    Pooled(Vec<f32>),
    Frames {
        frame_count: usize,
        dim: usize,
        data: Vec<f32>,
    },
}

impl RecordFeature {
    pub fn dim(&self) -> usize {
        match self {
            RecordFeature::Pooled(v) => v.len(),
            RecordFeature::Frames { dim, .. } => *dim,
        }
    }

    /// Video-level RGB vector, mean-pooling frames when needed.
    pub fn pooled(&self) -> Result<Vec<f64>> {
        match self {
            RecordFeature::Pooled(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            RecordFeature::Frames {
                frame_count,
                dim,
                data,
            } => {
                let m = Matrix::from_vec(
                    *frame_count,
                    *dim,
                    data.iter().map(|&x| x as f64).collect(),
                )?;
                Ok(features::mean_pool(&FrameFeatures::new(m)?))
            }
        }
    }
}

/// One video: identifier, features and per-layer positive label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub feature: RecordFeature,
    pub audio: Option<Vec<f32>>,
    /// Sorted positive label indices, coarse layer first.
    pub labels: Vec<Vec<usize>>,
}

impl VideoRecord {
    pub fn entity_labels(&self) -> &[usize] {
        self.labels.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// The model input before normalization: pooled RGB, followed by the
    /// audio vector when `with_audio` is set.
    pub fn video_feature(&self, with_audio: bool) -> Result<Vec<f64>> {
        let rgb = self.feature.pooled()?;
        if !with_audio {
            return Ok(rgb);
        }
        let audio = self.audio.as_ref().ok_or_else(|| {
            Error::Malformed(format!("record {:?} has no audio feature", self.id))
        })?;
        let audio: Vec<f64> = audio.iter().map(|&x| x as f64).collect();
        features::concat_audio(&rgb, &audio)
    }
}

pub fn encode_shard(records: &[VideoRecord]) -> Result<Vec<u8>> {
    let mut w = Writer::new(SHARD_MAGIC, SHARD_VERSION);
    w.u64(records.len() as u64);
    let payload_start = w.len();
    for r in records {
        w.short_str(&r.id, "record id")?;
        let layers = u8::try_from(r.labels.len())
            .map_err(|_| Error::Malformed(format!("record {:?}: too many layers", r.id)))?;
        w.u8(layers);
        for set in &r.labels {
            let n = u16::try_from(set.len())
                .map_err(|_| Error::Malformed(format!("record {:?}: too many labels", r.id)))?;
            w.u16(n);
            for &l in set {
                let l = u32::try_from(l)
                    .map_err(|_| Error::Malformed(format!("label index {l} exceeds u32")))?;
                w.u32(l);
            }
        }
        match &r.feature {
            RecordFeature::Pooled(v) => {
                w.u8(0);
                w.u32(to_u32(v.len())?);
                w.f32s(v);
            }
            RecordFeature::Frames {
                frame_count,
                dim,
                data,
            } => {
                if data.len() != frame_count * dim {
                    return Err(Error::Dimension {
                        expected: frame_count * dim,
                        actual: data.len(),
                        context: "frame payload",
                    });
                }
                w.u8(1);
                w.u32(to_u32(*dim)?);
                w.u32(to_u32(*frame_count)?);
                w.f32s(data);
            }
        }
        let audio = r.audio.as_deref().unwrap_or(&[]);
        w.u32(to_u32(audio.len())?);
        w.f32s(audio);
    }
    Ok(w.finish(payload_start))
}

pub fn decode_shard(bytes: &[u8]) -> Result<Vec<VideoRecord>> {
    let mut r = Reader::new(bytes);
    r.header(SHARD_MAGIC, SHARD_VERSION)?;
    let count = r.u64("record count")?;
    let payload_start = r.position();
    let mut records = Vec::new();
    for _ in 0..count {
        let id = r.short_str("record id")?;
        let layers = r.u8("layer count")? as usize;
        let mut labels = Vec::with_capacity(layers);
        for _ in 0..layers {
            let n = r.u16("label count")? as usize;
            let mut set = Vec::with_capacity(n);
            for _ in 0..n {
                set.push(r.u32("label index")? as usize);
            }
            labels.push(set);
        }
        let feature = match r.u8("feature kind")? {
            0 => {
                let dims = r.u32("feature dims")? as usize;
                RecordFeature::Pooled(r.f32s(dims, "pooled feature")?)
            }
            1 => {
                let dim = r.u32("feature dims")? as usize;
                let frame_count = r.u32("frame count")? as usize;
                let n = frame_count
                    .checked_mul(dim)
                    .ok_or(Error::Truncated("frame payload"))?;
                RecordFeature::Frames {
                    frame_count,
                    dim,
                    data: r.f32s(n, "frame payload")?,
                }
            }
            k => return Err(Error::Malformed(format!("record {id:?}: feature kind {k}"))),
        };
        let audio_dims = r.u32("audio dims")? as usize;
        let audio = r.f32s(audio_dims, "audio feature")?;
        records.push(VideoRecord {
            id,
            feature,
            audio: (audio_dims > 0).then_some(audio),
            labels,
        });
    }
    r.finish(payload_start)?;
    Ok(records)
}

pub fn write_shard(path: impl AsRef<Path>, records: &[VideoRecord]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_shard(records)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_shard(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_shard(&bytes)
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Malformed(format!("length {n} exceeds u32")))
}
