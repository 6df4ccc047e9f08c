//! Checkpoint container.
//!
//! Same framing as shards (magic, version, payload, CRC32):
//!
//! ```text
//! "HLCK" u16:version
//! u64:step
//! u32:len config text (`key = value` lines)
//! u32:len vocabulary text
//! u32:tensor_count, per tensor:
//!   u16:len name  u8:rank  u32 × rank dims  u8:dtype (0 = f32, 1 = f64)  payload
//! u32:CRC32 of everything after the header
//! ```
//!
//! Tensors are written as f64; parameters and optimizer moments round-trip
//! bit for bit.

use std::path::Path;

use crate::config::KeyValues;
use crate::error::{Error, Result};

use super::codec::{Reader, Writer, HEADER_LEN};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"HLCK";
pub const CHECKPOINT_VERSION: u16 = 1;

const DTYPE_F32: u8 = 0;
const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape {
                name,
                expected: shape,
                found: vec![data.len()],
            });
        }
        Ok(Self { name, shape, data })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub step: u64,
    pub config: KeyValues,
    pub vocabulary: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Looks up `name` and checks its shape.
    pub fn expect_tensor(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let t = self
            .tensor(name)
            .ok_or_else(|| Error::Malformed(format!("checkpoint lacks tensor {name:?}")))?;
        if t.shape != shape {
            return Err(Error::Shape {
                name: name.to_string(),
                expected: shape.to_vec(),
                found: t.shape.clone(),
            });
        }
        Ok(&t.data)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.u64(self.step);
        w.long_str(&self.config.render())?;
        w.long_str(&self.vocabulary)?;
        let count = u32::try_from(self.tensors.len())
            .map_err(|_| Error::Malformed("too many tensors".into()))?;
        w.u32(count);
        for t in &self.tensors {
            w.short_str(&t.name, "tensor name")?;
            let rank = u8::try_from(t.shape.len())
                .map_err(|_| Error::Malformed(format!("tensor {:?} rank too high", t.name)))?;
            w.u8(rank);
            for &d in &t.shape {
                w.u32(u32::try_from(d).map_err(|_| {
                    Error::Malformed(format!("tensor {:?} dimension {d} exceeds u32", t.name))
                })?);
            }
            w.u8(DTYPE_F64);
            w.f64s(&t.data);
        }
        Ok(w.finish(HEADER_LEN))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let step = r.u64("step")?;
        let config = KeyValues::parse(&r.long_str("config")?)?;
        let vocabulary = r.long_str("vocabulary")?;
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = r.short_str("tensor name")?;
            let rank = r.u8("tensor rank")? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32("tensor dims")? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or(Error::Truncated("tensor payload"))?;
            let data = match r.u8("tensor dtype")? {
                DTYPE_F32 => r
                    .f32s(n, "tensor payload")?
                    .into_iter()
                    .map(f64::from)
                    .collect(),
                DTYPE_F64 => r.f64s(n, "tensor payload")?,
                k => return Err(Error::Malformed(format!("tensor {name:?}: dtype {k}"))),
            };
            tensors.push(NamedTensor { name, shape, data });
        }
        r.finish(HEADER_LEN)?;
        Ok(Self {
            step,
            config,
            vocabulary,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
