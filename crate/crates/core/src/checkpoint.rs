//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"EVPCKPT0"
//! version u32      currently 1
//! count   u32      number of tensors
//! tensor  repeated count times:
//!   name_len u32, name (UTF-8), rank u32, dims rank x u64,
//!   payload prod(dims) x f32, row-major
//! ```
//!
//! Parameters are kept on the `f32` grid throughout training, so the `f32`
//! payload is lossless and a save/load cycle reproduces the model
//! bit-exactly. Tensor names are the contract (`gnn.NN.kernel`,
//! `gnn.NN.norm.running_var`, `head.offset.weight`, ...); order in the file
//! is not significant.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

pub const MAGIC: &[u8; 8] = b"EVPCKPT0";
pub const VERSION: u32 = 1;

/// Serialize a model's tensors (parameters and running statistics).
pub fn save_checkpoint(path: impl AsRef<Path>, model: &Model<f64>) -> Result<()> {
    let tensors = model.named_tensors();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, dims, data) in &tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for d in dims {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "unexpected end of file reading {what} (offset {})",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Load a checkpoint into a freshly constructed model of the given
/// architecture. Every tensor the architecture defines must be present with
/// matching dimensions.
pub fn load_checkpoint(path: impl AsRef<Path>, config: &ModelConfig) -> Result<Model<f64>> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };

    if c.take(8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let count = c.u32("tensor count")? as usize;

    let mut model = Model::init(config.clone(), 0)?;
    let expected: BTreeSet<String> = model.named_tensors().into_iter().map(|(n, _, _)| n).collect();
    let mut seen = BTreeSet::new();

    for _ in 0..count {
        let name_len = c.u32("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "tensor name")?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(c.u64("dimension")? as usize);
        }
        let len: usize = dims.iter().product();
        let raw = c.take(len * 4, "payload")?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        if !seen.insert(name.clone()) {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
        model.load_tensor(&name, &dims, &data)?;
    }
    if c.pos != buf.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after last tensor",
            buf.len() - c.pos
        )));
    }
    if seen != expected {
        let missing: Vec<_> = expected.difference(&seen).cloned().collect();
        return Err(Error::Checkpoint(format!(
            "missing tensors: {}",
            missing.join(", ")
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pooling::ConfidenceMode;

    fn config() -> ModelConfig {
        ModelConfig {
            input_dim: 2,
            dims: vec![6, 4],
            kernels: vec![3, 4],
            degree: 2,
            confidence_mode: ConfidenceMode::AxisSeparated,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut model = Model::init(config(), 42).unwrap();
        // Give running stats non-default values via a fake training step.
        let stats: Vec<_> = model
            .layers
            .iter()
            .map(|(_, n)| crate::gnn::BatchStats {
                mean: ndarray::Array1::from_elem(n.dim(), 0.25),
                var: ndarray::Array1::from_elem(n.dim(), 2.5),
            })
            .collect();
        model.update_running_stats(&stats);

        save_checkpoint(&path, &model).unwrap();
        let loaded = load_checkpoint(&path, &config()).unwrap();
        // Bit-exact equality of every tensor, parameters and state alike.
        let a = model.named_tensors();
        let b = loaded.named_tensors();
        assert_eq!(a.len(), b.len());
        for ((n1, d1, v1), (n2, d2, v2)) in a.iter().zip(b.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(d1, d2);
            assert_eq!(
                v1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                v2.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                "tensor {n1} not bit-identical"
            );
        }
        // Saving the loaded model reproduces the identical file.
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn header_layout_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Model::init(config(), 0).unwrap();
        save_checkpoint(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), VERSION);
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(count as usize, model.named_tensors().len());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTCKPT0\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = load_checkpoint(&path, &config()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(ref m) if m.contains("magic")));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let mut bytes = MAGIC.to_vec();
        bytes.extend(9u32.to_le_bytes());
        bytes.extend(0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path, &config()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(ref m) if m.contains("version")));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Model::init(config(), 0).unwrap();
        save_checkpoint(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        let err = load_checkpoint(&path, &config()).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(ref m) if m.contains("end of file")));
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Model::init(config(), 0).unwrap();
        save_checkpoint(&path, &model).unwrap();
        let mut other = config();
        other.dims = vec![6, 8];
        assert!(load_checkpoint(&path, &other).is_err());
    }
}
