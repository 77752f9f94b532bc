//! Binary dataset, model and codes files. All values little-endian.
//!
//! ```text
//! dataset: "OHDS" version:u16 n:u64 d:u32 labeled:u8 | n·d f32 | [n u32]
//! model:   "OHMD" version:u16 d:u32 r:u32 T:u16 kernel:u8 [m:u32 sigma:f64]
//!          | mean f64 | [m·d anchors f64] | T × (features·r f64, column-major) | crc32:u32
//! codes:   "OHCB" version:u16 n:u64 r:u32 T:u16 | n·T codes of ⌈r/8⌉ bytes, item-major
//! ```

use std::path::Path;

use crate::code::HashCode;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::KernelMapper;
use crate::model::HashModel;
use crate::snapshot::ModelSnapshot;

pub const DATASET_MAGIC: &[u8; 4] = b"OHDS";
pub const MODEL_MAGIC: &[u8; 4] = b"OHMD";
pub const CODES_MAGIC: &[u8; 4] = b"OHCB";
pub const VERSION: u16 = 1;

/// Dataset header length in bytes.
pub const DATASET_HEADER_LEN: usize = 4 + 2 + 8 + 4 + 1;
pub const CODES_HEADER_LEN: usize = 4 + 2 + 8 + 4 + 2;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::format(format!("{} truncated at byte {}", self.what, self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::format("length overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::format(format!("{}: bad magic", self.what)));
        }
        let version = self.u16()?;
        if version != VERSION {
            return Err(Error::format(format!("{}: unsupported version {version}", self.what)));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn count(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::format(format!("{what} {v} too large")))
}

fn flag(v: u8, what: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::format(format!("{what} flag must be 0 or 1, got {v}"))),
    }
}

/// Serialize a dataset. Values are stored as f32.
pub fn dataset_to_bytes(data: &Dataset) -> Vec<u8> {
    let n = data.len();
    let labels = data.labels();
    let mut out = Vec::with_capacity(DATASET_HEADER_LEN + n * data.dim() * 4 + labels.map_or(0, |_| n * 4));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(data.dim() as u32).to_le_bytes());
    out.push(labels.is_some() as u8);
    for v in data.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    if let Some(l) = labels {
        for v in l {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn dataset_from_bytes(buf: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(buf, "dataset");
    r.header(DATASET_MAGIC)?;
    let n = count(r.u64()?, "row count")?;
    let d = r.u32()? as usize;
    let labeled = flag(r.u8()?, "label")?;
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|b| b.checked_add(if labeled { n * 4 } else { 0 }))
        .and_then(|b| b.checked_add(DATASET_HEADER_LEN))
        .ok_or_else(|| Error::format("dataset size overflow"))?;
    if buf.len() != expected {
        return Err(Error::format(format!("dataset length {} does not match header ({expected})", buf.len())));
    }
    let values: Vec<f64> = r
        .take(n * d * 4)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let labels = if labeled {
        Some(r.take(n * 4)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    } else {
        None
    };
    r.finish()?;
    Dataset::new(d, values, labels).map_err(|e| Error::format(format!("dataset content: {e}")))
}

pub fn model_to_bytes(snapshot: &ModelSnapshot) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(snapshot.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(snapshot.bits() as u32).to_le_bytes());
    out.extend_from_slice(&(snapshot.model_count() as u16).to_le_bytes());
    let put = |out: &mut Vec<u8>, vals: &[f64]| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    match snapshot.kernel() {
        Some(k) => {
            out.push(1);
            out.extend_from_slice(&(k.output_dim() as u32).to_le_bytes());
            out.extend_from_slice(&k.sigma().to_le_bytes());
        }
        None => out.push(0),
    }
    put(&mut out, snapshot.mean());
    if let Some(k) = snapshot.kernel() {
        put(&mut out, k.anchors_flat());
    }
    for m in snapshot.models() {
        put(&mut out, m.weights());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn model_from_bytes(buf: &[u8]) -> Result<ModelSnapshot> {
    if buf.len() < 4 {
        return Err(Error::format("model truncated"));
    }
    let (payload, trailer) = buf.split_at(buf.len() - 4);
    let mut r = Reader::new(payload, "model");
    r.header(MODEL_MAGIC)?;
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(Error::format("model checksum mismatch"));
    }
    let d = r.u32()? as usize;
    let bits = r.u32()? as usize;
    let t = r.u16()? as usize;
    let kernelized = flag(r.u8()?, "kernel")?;
    let kernel_dims = if kernelized {
        let m = r.u32()? as usize;
        let sigma = f64::from_le_bytes(r.array()?);
        Some((m, sigma))
    } else {
        None
    };
    let feature_dim = kernel_dims.map_or(d, |(m, _)| m);
    let mean = r.f64s(feature_dim)?;
    let kernel = match kernel_dims {
        Some((m, sigma)) => {
            let anchors = r.f64s(m.checked_mul(d).ok_or_else(|| Error::format("anchor size overflow"))?)?;
            Some(KernelMapper::from_flat(d, sigma, anchors).map_err(|e| Error::format(format!("kernel: {e}")))?)
        }
        None => None,
    };
    let mut models = Vec::with_capacity(t);
    for _ in 0..t {
        let w = r.f64s(feature_dim.checked_mul(bits).ok_or_else(|| Error::format("matrix size overflow"))?)?;
        models.push(HashModel::from_columns(feature_dim, bits, w).map_err(|e| Error::format(format!("matrix: {e}")))?);
    }
    r.finish()?;
    ModelSnapshot::new(d, kernel, mean, models).map_err(|e| Error::format(format!("model content: {e}")))
}

/// Codes in item-major order: `codes[item][model]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeTable {
    pub bits: usize,
    pub models: usize,
    pub codes: Vec<Vec<HashCode>>,
}

impl CodeTable {
    pub fn new(bits: usize, models: usize, codes: Vec<Vec<HashCode>>) -> Result<Self> {
        for item in &codes {
            if item.len() != models || item.iter().any(|c| c.len() != bits) {
                return Err(Error::invalid("code table entries must have T codes of r bits"));
            }
        }
        Ok(CodeTable { bits, models, codes })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

pub fn codes_to_bytes(table: &CodeTable) -> Vec<u8> {
    let width = HashCode::byte_len(table.bits);
    let mut out = Vec::with_capacity(CODES_HEADER_LEN + table.len() * table.models * width);
    out.extend_from_slice(CODES_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(table.len() as u64).to_le_bytes());
    out.extend_from_slice(&(table.bits as u32).to_le_bytes());
    out.extend_from_slice(&(table.models as u16).to_le_bytes());
    for item in &table.codes {
        for c in item {
            out.extend_from_slice(&c.to_bytes());
        }
    }
    out
}

pub fn codes_from_bytes(buf: &[u8]) -> Result<CodeTable> {
    let mut r = Reader::new(buf, "codes");
    r.header(CODES_MAGIC)?;
    let n = count(r.u64()?, "code count")?;
    let bits = r.u32()? as usize;
    let t = r.u16()? as usize;
    if bits == 0 || t == 0 {
        return Err(Error::format("codes need r > 0 and T > 0"));
    }
    let width = HashCode::byte_len(bits);
    let expected = n
        .checked_mul(t)
        .and_then(|v| v.checked_mul(width))
        .and_then(|v| v.checked_add(CODES_HEADER_LEN))
        .ok_or_else(|| Error::format("codes size overflow"))?;
    if buf.len() != expected {
        return Err(Error::format(format!("codes length {} does not match header ({expected})", buf.len())));
    }
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut item = Vec::with_capacity(t);
        for _ in 0..t {
            item.push(HashCode::from_bytes(r.take(width)?, bits)?);
        }
        codes.push(item);
    }
    r.finish()?;
    Ok(CodeTable { bits, models: t, codes })
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_bytes(&std::fs::read(path)?)
}

pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    Ok(std::fs::write(path, dataset_to_bytes(data))?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelSnapshot> {
    model_from_bytes(&std::fs::read(path)?)
}

pub fn write_model(path: impl AsRef<Path>, snapshot: &ModelSnapshot) -> Result<()> {
    Ok(std::fs::write(path, model_to_bytes(snapshot))?)
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<CodeTable> {
    codes_from_bytes(&std::fs::read(path)?)
}

pub fn write_codes(path: impl AsRef<Path>, table: &CodeTable) -> Result<()> {
    Ok(std::fs::write(path, codes_to_bytes(table))?)
}
