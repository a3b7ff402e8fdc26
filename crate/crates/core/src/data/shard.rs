//! DSHD: a self-describing little-endian shard file.
//!
//! ```text
//! header (28 bytes)
//!   u32 magic      0x44534844 ("DSHD")
//!   u32 version    1
//!   u32 n_samples
//!   u32 n_features
//!   u32 n_classes
//!   u64 seed
//! body
//!   n_samples x (n_features x f32 features, u32 label)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const SHARD_MAGIC: u32 = 0x4453_4844;
pub const SHARD_VERSION: u32 = 1;
pub const SHARD_HEADER_LEN: usize = 28;

/// One worker's partition of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    pub dataset: Dataset,
    /// Seed of the partitioning that produced this shard.
    pub seed: u64,
}

/// Expected file length for a shard of the given shape, or `None` on overflow.
pub fn shard_file_len(n_samples: u64, n_features: u64) -> Option<u64> {
    let record = n_features.checked_mul(4)?.checked_add(4)?;
    n_samples
        .checked_mul(record)?
        .checked_add(SHARD_HEADER_LEN as u64)
}

fn narrow(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::Format(format!("{what} {value} does not fit in u32")))
}

pub fn encode_shard(shard: &DataShard) -> Result<Vec<u8>> {
    let ds = &shard.dataset;
    let len = shard_file_len(ds.len() as u64, ds.n_features() as u64)
        .ok_or_else(|| Error::Format("shard size overflows".into()))?;
    let mut out = Vec::with_capacity(len as usize);
    out.extend_from_slice(&SHARD_MAGIC.to_le_bytes());
    out.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    out.extend_from_slice(&narrow(ds.len(), "n_samples")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.n_features(), "n_features")?.to_le_bytes());
    out.extend_from_slice(&narrow(ds.n_classes(), "n_classes")?.to_le_bytes());
    out.extend_from_slice(&shard.seed.to_le_bytes());
    for (row, &label) in ds.rows().zip(ds.labels()) {
        for f in row {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.extend_from_slice(&label.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_shard(bytes: &[u8]) -> Result<DataShard> {
    if bytes.len() < SHARD_HEADER_LEN {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the {SHARD_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let magic = u32_at(0);
    if magic != SHARD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:#010x}")));
    }
    let version = u32_at(4);
    if version != SHARD_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_samples = u32_at(8) as usize;
    let n_features = u32_at(12) as usize;
    let n_classes = u32_at(16) as usize;
    let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    if n_samples == 0 || n_features == 0 || n_classes == 0 {
        return Err(Error::Format(format!(
            "degenerate shape: {n_samples} samples, {n_features} features, {n_classes} classes"
        )));
    }
    let expected = shard_file_len(n_samples as u64, n_features as u64)
        .ok_or_else(|| Error::Format("declared shape overflows".into()))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Format(format!(
            "length {} does not match the {expected} bytes declared by the header",
            bytes.len()
        )));
    }
    let mut features = Vec::with_capacity(n_samples * n_features);
    let mut labels = Vec::with_capacity(n_samples);
    for record in bytes[SHARD_HEADER_LEN..].chunks_exact(4 * n_features + 4) {
        let (feat, label) = record.split_at(4 * n_features);
        features.extend(
            feat.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
        );
        labels.push(u32::from_le_bytes(label.try_into().unwrap()));
    }
    let dataset = Dataset::new(features, labels, n_features, n_classes)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(DataShard { dataset, seed })
}

pub fn write_shard(shard: &DataShard, path: &Path) -> Result<()> {
    let bytes = encode_shard(shard)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn read_shard(path: &Path) -> Result<DataShard> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_shard(&bytes)
}
