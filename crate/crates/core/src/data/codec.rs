//! Little-endian framing shared by shards and checkpoints: a 4-byte magic,
//! a u16 version, a payload region, and a trailing CRC32 of the payload.

use crate::error::{Error, Result};

pub(crate) const HEADER_LEN: usize = 6;

#[derive(Debug, Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: [u8; 4], version: u16) -> Self {
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(&magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// Length-prefixed (u16) UTF-8 string.
    pub fn short_str(&mut self, s: &str, what: &str) -> Result<()> {
        let len = u16::try_from(s.len())
            .map_err(|_| Error::Malformed(format!("{what} longer than 65535 bytes")))?;
        self.u16(len);
        self.bytes(s.as_bytes());
        Ok(())
    }

    /// Length-prefixed (u32) UTF-8 string.
    pub fn long_str(&mut self, s: &str) -> Result<()> {
        let len = u32::try_from(s.len())
            .map_err(|_| Error::Malformed("string longer than 4 GiB".into()))?;
        self.u32(len);
        self.bytes(s.as_bytes());
        Ok(())
    }

    /// Appends the CRC32 of everything after `payload_start` and returns
    /// the finished buffer.
    pub fn finish(mut self, payload_start: usize) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf[payload_start..]);
        self.u32(crc);
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }
}

#[derive(Debug)]
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Checks magic and version, returning the version.
    pub fn header(&mut self, magic: [u8; 4], supported: u16) -> Result<u16> {
        if self.buf.len() < 4 {
            return Err(Error::Truncated("header"));
        }
        let found: [u8; 4] = self.buf[..4].try_into().unwrap();
        if found != magic {
            return Err(Error::BadMagic {
                expected: magic,
                found,
            });
        }
        self.pos = 4;
        let version = self.u16("header")?;
        if version != supported {
            return Err(Error::Version {
                found: version,
                supported,
            });
        }
        Ok(version)
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>> {
        let bytes = self.take(checked_bytes(n, 4, what)?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let bytes = self.take(checked_bytes(n, 8, what)?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn utf8(&mut self, n: usize, what: &'static str) -> Result<String> {
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Malformed(format!("{what} is not valid UTF-8")))
    }

    pub fn short_str(&mut self, what: &'static str) -> Result<String> {
        let n = self.u16(what)? as usize;
        self.utf8(n, what)
    }

    pub fn long_str(&mut self, what: &'static str) -> Result<String> {
        let n = self.u32(what)? as usize;
        self.utf8(n, what)
    }

    /// Verifies that exactly the 4-byte CRC remains and that it matches
    /// `buf[payload_start..pos]`.
    pub fn finish(mut self, payload_start: usize) -> Result<()> {
        let end = self.pos;
        let stored = self.u32("checksum")?;
        if self.remaining() != 0 {
            return Err(Error::Malformed(format!(
                "{} unexpected trailing bytes",
                self.remaining()
            )));
        }
        let computed = crc32fast::hash(&self.buf[payload_start..end]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        Ok(())
    }
}

fn checked_bytes(n: usize, width: usize, what: &'static str) -> Result<usize> {
    n.checked_mul(width).ok_or(Error::Truncated(what))
}
