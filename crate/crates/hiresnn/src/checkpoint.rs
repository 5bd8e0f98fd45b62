//! Checkpoint container: `HSNNCKPT`, a little-endian u32 version, a u64
//! header length, a JSON header describing the model with its weights
//! removed, then every weight tensor as little-endian f64 in layer order.

use std::collections::BTreeMap;
use std::path::Path;

use hiresnn_core::model::Model;
use hiresnn_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{format_err, AppError, AppResult};

pub const MAGIC: &[u8; 8] = b"HSNNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model: Model,
    weight_shapes: Vec<Option<Vec<usize>>>,
    meta: BTreeMap<String, String>,
}

/// A model plus free-form string metadata (training mode, seed, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self { model, meta: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bare = self.model.clone();
        let mut weights = Vec::new();
        let weight_shapes = bare
            .layers
            .iter_mut()
            .map(|l| {
                l.weight.take().map(|w| {
                    let shape = w.shape().to_vec();
                    weights.push(w);
                    shape
                })
            })
            .collect();
        let header = Header { model: bare, weight_shapes, meta: self.meta.clone() };
        let json = serde_json::to_vec(&header).expect("model serializes");
        let mut out = Vec::with_capacity(24 + json.len() + 8 * weights.iter().map(Tensor::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for w in &weights {
            for v in w.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> AppResult<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(format_err(0, "not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(format_err(8, format!("unsupported checkpoint version {}", version)));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..20 + len).ok_or_else(|| format_err(12, "header length past end of file"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| format_err(20, format!("header: {}", e)))?;
        let mut at = 20 + len;
        let mut model = header.model;
        if header.weight_shapes.len() != model.layers.len() {
            return Err(format_err(20, "weight table does not match the layer list"));
        }
        for (layer, shape) in model.layers.iter_mut().zip(header.weight_shapes) {
            if let Some(shape) = shape {
                let n: usize = shape.iter().product();
                let raw = bytes
                    .get(at..at + 8 * n)
                    .ok_or_else(|| format_err(at, format!("truncated weights: need {} values", n)))?;
                let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
                layer.weight = Some(Tensor::from_vec(&shape, data)?);
                at += 8 * n;
            }
        }
        if at != bytes.len() {
            return Err(format_err(at, "trailing bytes after the last weight"));
        }
        model.validate().map_err(|e| AppError::Format(format!("checkpoint model invalid: {}", e)))?;
        Ok(Self { model, meta: header.meta })
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => AppError::Dependency(format!("checkpoint {} not found", path.display())),
            _ => AppError::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hiresnn_core::model::{vgg_like, Mode};

    fn model() -> Model {
        let specs = vgg_like(&[8, 8, 1], 2, &[3], 5, 0.1).unwrap();
        let mut m = Model::new(&[8, 8, 1], 2, &specs, Mode::Snn, 3).unwrap();
        m.layers[1].threshold = 0.1 + 0.2;
        m.layers[1].leak = 1.0 / 3.0;
        m
    }

    #[test]
    fn bit_exact_round_trip() {
        let ck = Checkpoint::new(model()).with_meta("mode", "snn-hire");
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.model.layers[1].leak.to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn corruption_is_a_format_error() {
        let bytes = Checkpoint::new(model()).to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err().exit_code(), 4);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).unwrap_err().to_string().contains("byte offset 0"));
    }

    #[test]
    fn missing_file_is_a_dependency_error() {
        let e = Checkpoint::load(Path::new("/nonexistent/x.ckpt")).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }
}
