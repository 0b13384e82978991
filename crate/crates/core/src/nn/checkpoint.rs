//! Binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! "WURLCKP1"  u32 entry count
//! per entry:  u32 name length, name bytes, u8 tag
//!   tag 0 (network): u8 head, u32 layer-size count, u64 sizes..., u64 n, f64 params...
//!   tag 1 (vector):  u64 n, f64 values...
//! trailer:    32-byte SHA-256 of everything before it
//! ```
//!
//! Floats are stored as raw bits, so a save/load cycle is bit-exact.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Mlp, OutputHead};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"WURLCKP1";

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Network(Mlp),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    entries: Vec<(String, Entry)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_network(&mut self, name: &str, net: &Mlp) {
        self.entries.push((name.to_string(), Entry::Network(net.clone())));
    }

    pub fn push_vector(&mut self, name: &str, values: &[f64]) {
        self.entries.push((name.to_string(), Entry::Vector(values.to_vec())));
    }

    pub fn entries(&self) -> &[(String, Entry)] {
        &self.entries
    }

    pub fn network(&self, name: &str) -> Result<&Mlp> {
        match self.entries.iter().find(|(n, _)| n == name) {
            Some((_, Entry::Network(net))) => Ok(net),
            _ => Err(Error::Checkpoint(format!("no network named {name:?}"))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        match self.entries.iter().find(|(n, _)| n == name) {
            Some((_, Entry::Vector(v))) => Ok(v),
            _ => Err(Error::Checkpoint(format!("no vector named {name:?}"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, entry) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match entry {
                Entry::Network(net) => {
                    out.push(0);
                    out.push(match net.head() {
                        OutputHead::Linear => 0,
                        OutputHead::Tanh => 1,
                    });
                    out.extend_from_slice(&(net.sizes().len() as u32).to_le_bytes());
                    for &s in net.sizes() {
                        out.extend_from_slice(&(s as u64).to_le_bytes());
                    }
                    write_floats(&mut out, net.params());
                }
                Entry::Vector(v) => {
                    out.push(1);
                    write_floats(&mut out, v);
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(corrupt("file too short"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let count = r.u32()?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| corrupt("bad name"))?;
            let entry = match r.u8()? {
                0 => {
                    let head = match r.u8()? {
                        0 => OutputHead::Linear,
                        1 => OutputHead::Tanh,
                        h => return Err(corrupt(&format!("unknown head {h}"))),
                    };
                    let n = r.u32()? as usize;
                    let sizes = (0..n).map(|_| r.u64().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
                    let params = r.floats()?;
                    Entry::Network(
                        Mlp::from_params(&sizes, head, params).map_err(|e| corrupt(&e.to_string()))?,
                    )
                }
                1 => Entry::Vector(r.floats()?),
                t => return Err(corrupt(&format!("unknown entry tag {t}"))),
            };
            entries.push((name, entry));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn corrupt(msg: &str) -> Error {
    Error::Checkpoint(format!("corrupt checkpoint: {msg}"))
}

fn write_floats(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(corrupt("truncated float array"));
        }
        (0..n).map(|_| self.u64().map(f64::from_bits)).collect()
    }
}
