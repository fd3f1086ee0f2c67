//! Binary parameter checkpoints.
//!
//! Layout: 8-byte magic, u32 version, u64 header length, a JSON header
//! (config plus the name and shape of every tensor), then every tensor's
//! entries as little-endian f64 in header order.

use std::io::{Read, Write};

use gravview_core::Real;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::model::{Model, ModelParams};
use crate::SeqError;

pub const MAGIC: &[u8; 8] = b"GVMODEL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<T: Real, W: Write>(model: &Model<T>, mut w: W) -> Result<(), SeqError> {
    let tensors = model.params.tensors();
    let header = Header {
        config: model.config.clone(),
        dtype: "f64".into(),
        tensors: tensors.iter().map(|(name, m)| TensorEntry { name: name.clone(), rows: m.rows(), cols: m.cols() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, m) in &tensors {
        for &x in m.data() {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Real, R: Read>(mut r: R) -> Result<Model<T>, SeqError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SeqError::Checkpoint("not a model checkpoint (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(SeqError::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| SeqError::Checkpoint("header too large".into()))?;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.dtype != "f64" {
        return Err(SeqError::Checkpoint(format!("unsupported dtype {}", header.dtype)));
    }
    header.config.validate()?;
    let mut params = ModelParams::<T>::zeros(&header.config);
    {
        let mut slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(SeqError::Checkpoint(format!("expected {} tensors, header lists {}", slots.len(), header.tensors.len())));
        }
        for ((name, m), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || m.shape() != (entry.rows, entry.cols) {
                return Err(SeqError::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    entry.name,
                    (entry.rows, entry.cols),
                    name,
                    m.shape()
                )));
            }
            let mut buf = [0u8; 8];
            for x in m.data_mut() {
                r.read_exact(&mut buf).map_err(|e| SeqError::Checkpoint(format!("tensor {name} truncated: {e}")))?;
                *x = T::lit(f64::from_le_bytes(buf));
            }
        }
    }
    Model::new(header.config, params)
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: &std::path::Path) -> Result<(), SeqError> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(model, std::io::BufWriter::new(file))
}

pub fn load_checkpoint<T: Real>(path: &std::path::Path) -> Result<Model<T>, SeqError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
