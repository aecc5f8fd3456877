//! On-disk formats: the dataset container and low-level byte helpers shared
//! with the model checkpoint writer.
//!
//! Dataset container (little-endian throughout):
//!
//! ```text
//! magic "LNOP" | u32 version | u32 sample count | u32 rank
//! | u32 extent per axis | u32 in-channels | u32 out-channels
//! | per sample: input f64s then target f64s (row-major)
//! ```
//!
//! A JSON sidecar at `<path>.json` records the dataset name, grid domain,
//! and the full generator configuration. The sidecar is advisory: a
//! container without one reads fine with default metadata.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{GridSpec, PdeDataset, PdeSample};

pub const DATASET_MAGIC: &[u8; 4] = b"LNOP";
pub const DATASET_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Byte-level helpers (also used by the checkpoint format in `model`).
// ---------------------------------------------------------------------------

pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut w = ByteWriter { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn bytes(&mut self, bs: &[u8]) {
        self.u32(bs.len() as u32);
        self.buf.extend_from_slice(bs);
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.buf).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) struct ByteReader {
    buf: Vec<u8>,
    pos: usize,
}

impl ByteReader {
    pub fn open(path: &Path, magic: &[u8; 4]) -> Result<(Self, u32)> {
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader { buf, pos: 0 };
        let got = r.take(4, "magic")?;
        if got != magic {
            return Err(Error::Format(format!(
                "bad magic {:?} at byte 0 (expected {:?})",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        let got = got.to_owned();
        debug_assert_eq!(got.len(), 4);
        let version = r.u32("version")?;
        Ok((r, version))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "truncated while reading {what} at byte {} (need {n} more, have {})",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let b = self.take(n * 8, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn bytes(&mut self, what: &str) -> Result<Vec<u8>> {
        let n = self.u32(what)? as usize;
        Ok(self.take(n, what)?.to_vec())
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload at byte {}",
                self.buf.len() - self.pos,
                self.pos
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Dataset container.
// ---------------------------------------------------------------------------

/// Sidecar metadata written next to the container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub name: String,
    /// Physical length per axis.
    pub domain: Vec<f64>,
    /// Generator echo (family, parameters, seed, solver resolution).
    pub gen_config: serde_json::Value,
    /// Writing tool version.
    pub tool_version: String,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}

/// Writes the container and its JSON sidecar. The dataset is validated
/// first, so no malformed file is ever produced.
pub fn dataset_write(path: &Path, ds: &PdeDataset) -> Result<()> {
    ds.validate()?;
    let extents = ds.extents();
    let mut w = ByteWriter::new(DATASET_MAGIC, DATASET_VERSION);
    w.u32(ds.len() as u32);
    w.u32(extents.len() as u32);
    for &e in extents {
        w.u32(e as u32);
    }
    w.u32(ds.in_channels() as u32);
    w.u32(ds.out_channels() as u32);
    for s in &ds.samples {
        w.f64s(s.input.data());
        w.f64s(s.target.data());
    }
    w.finish(path)?;

    let sidecar = DatasetSidecar {
        name: ds.name.clone(),
        domain: ds.samples[0].grid.domain.clone(),
        gen_config: ds.gen_config.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Format(format!("sidecar serialization: {e}")))?;
    let sp = sidecar_path(path);
    fs::write(&sp, json).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

/// Reads a container (and its sidecar when present), validating structure,
/// shapes, and finiteness.
pub fn dataset_read(path: &Path) -> Result<PdeDataset> {
    let (mut r, version) = ByteReader::open(path, DATASET_MAGIC)?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version} (expected {DATASET_VERSION})"
        )));
    }
    let count = r.u32("sample count")? as usize;
    let rank = r.u32("rank")? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Format(format!("implausible rank {rank}")));
    }
    let mut extents = Vec::with_capacity(rank);
    for a in 0..rank {
        extents.push(r.u32(&format!("extent of axis {a}"))? as usize);
    }
    let c_in = r.u32("input channels")? as usize;
    let c_out = r.u32("output channels")? as usize;

    let sidecar: Option<DatasetSidecar> = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let domain = sidecar
        .as_ref()
        .filter(|s| s.domain.len() == rank)
        .map(|s| s.domain.clone())
        .unwrap_or_else(|| vec![1.0; rank]);
    let grid = GridSpec {
        extents: extents.clone(),
        domain,
    };

    let spatial: usize = extents.iter().product();
    let mut in_shape = vec![c_in];
    in_shape.extend_from_slice(&extents);
    let mut out_shape = vec![c_out];
    out_shape.extend_from_slice(&extents);

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let input = r.f64s(c_in * spatial, &format!("sample {i} input"))?;
        let target = r.f64s(c_out * spatial, &format!("sample {i} target"))?;
        if let Some(bad) = input
            .iter()
            .chain(target.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::Format(format!(
                "sample {i} contains a non-finite value (payload position {bad})"
            )));
        }
        samples.push(PdeSample {
            input: Tensor::new(in_shape.clone(), input)?,
            target: Tensor::new(out_shape.clone(), target)?,
            grid: grid.clone(),
        });
    }
    r.expect_end()?;

    let ds = PdeDataset {
        name: sidecar
            .as_ref()
            .map(|s| s.name.clone())
            .unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            }),
        samples,
        gen_config: sidecar
            .map(|s| s.gen_config)
            .unwrap_or(serde_json::Value::Null),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample_dataset() -> PdeDataset {
        let grid = GridSpec {
            extents: vec![3, 2],
            domain: vec![1.0, 2.0],
        };
        let samples = (0..2)
            .map(|i| PdeSample {
                input: Tensor::new(
                    vec![2, 3, 2],
                    (0..12).map(|v| (v + i) as f64 * 0.25).collect(),
                )
                .unwrap(),
                target: Tensor::new(vec![1, 3, 2], vec![i as f64; 6]).unwrap(),
                grid: grid.clone(),
            })
            .collect();
        PdeDataset {
            name: "roundtrip".into(),
            samples,
            gen_config: json!({"family": "test", "seed": 7}),
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.lnop");
        let ds = sample_dataset();
        dataset_write(&path, &ds).unwrap();
        let back = dataset_read(&path).unwrap();
        assert_eq!(back.name, ds.name);
        assert_eq!(back.len(), ds.len());
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            assert_eq!(a.input.data(), b.input.data());
            assert_eq!(a.target.data(), b.target.data());
            assert_eq!(a.grid, b.grid);
        }
        assert_eq!(back.gen_config, ds.gen_config);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.lnop");
        dataset_write(&path, &sample_dataset()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = dataset_read(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated"), "{msg}");
        assert!(msg.contains("byte"), "{msg}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.lnop");
        std::fs::write(&path, b"NOPE....").unwrap();
        let err = dataset_read(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn missing_sidecar_still_reads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.lnop");
        let ds = sample_dataset();
        dataset_write(&path, &ds).unwrap();
        std::fs::remove_file(sidecar_path(&path)).unwrap();
        let back = dataset_read(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.name, "ds");
    }

    #[test]
    fn nan_payload_is_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.lnop");
        dataset_write(&path, &sample_dataset()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let header = 4 + 4 + 4 + 4 + 2 * 4 + 2 * 4;
        bytes[header..header + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(dataset_read(&path).is_err());
    }
}
