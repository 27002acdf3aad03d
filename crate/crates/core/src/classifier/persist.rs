//! `MTXM` model files.
//!
//! Layout: magic `MTXM`, `u8` version (1), `u32` LE header length, UTF-8 JSON
//! header `{config, metadata, param_count, checksum}`, then the flat
//! parameters as little-endian `f32`. `checksum` is FNV-1a 64 over the
//! payload bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{MlpModel, ModelMetadata};
use super::{param_count, ClassifierError, MlpConfig};
use crate::rng::fnv1a64;

pub const MTXM_MAGIC: [u8; 4] = *b"MTXM";
pub const MTXM_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: MlpConfig,
    metadata: ModelMetadata,
    param_count: usize,
    checksum: u64,
}

fn payload_bytes(params: &[f32]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

pub(crate) fn payload_checksum(params: &[f32]) -> u64 {
    fnv1a64(&payload_bytes(params))
}

pub fn write_model<W: Write>(mut writer: W, model: &MlpModel<f32>) -> Result<(), ClassifierError> {
    let payload = payload_bytes(model.params());
    let header = Header {
        config: model.config().clone(),
        metadata: model.metadata.clone(),
        param_count: model.params().len(),
        checksum: fnv1a64(&payload),
    };
    let header = serde_json::to_vec(&header).map_err(|e| ClassifierError::Header(e.to_string()))?;
    let header_len = u32::try_from(header.len()).map_err(|_| ClassifierError::Header("header too large".into()))?;
    let io = |source| ClassifierError::Io {
        path: "<output>".into(),
        source,
    };
    writer.write_all(&MTXM_MAGIC).map_err(io)?;
    writer.write_all(&[MTXM_VERSION]).map_err(io)?;
    writer.write_all(&header_len.to_le_bytes()).map_err(io)?;
    writer.write_all(&header).map_err(io)?;
    writer.write_all(&payload).map_err(io)?;
    writer.flush().map_err(io)
}

pub fn read_model<R: Read>(mut reader: R) -> Result<MlpModel<f32>, ClassifierError> {
    let eof = |what: &str| {
        let what = what.to_string();
        move |e: std::io::Error| {
            if e.kind() == ErrorKind::UnexpectedEof {
                ClassifierError::Truncated(format!("file ends inside {what}"))
            } else {
                ClassifierError::Io {
                    path: "<input>".into(),
                    source: e,
                }
            }
        }
    };
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(eof("the magic bytes"))?;
    if magic != MTXM_MAGIC {
        return Err(ClassifierError::BadMagic(magic.to_vec()));
    }
    let mut version = [0u8; 1];
    reader.read_exact(&mut version).map_err(eof("the version byte"))?;
    if version[0] != MTXM_VERSION {
        return Err(ClassifierError::UnsupportedVersion {
            expected: MTXM_VERSION,
            found: version[0],
        });
    }
    let mut len = [0u8; 4];
    reader.read_exact(&mut len).map_err(eof("the header length"))?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    reader.read_exact(&mut header).map_err(eof("the JSON header"))?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| ClassifierError::Header(e.to_string()))?;

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(eof("the payload"))?;
    let expected = param_count(&header.config)?;
    if header.param_count != expected {
        return Err(ClassifierError::ParamCount {
            expected,
            found: header.param_count,
        });
    }
    if payload.len() % 4 != 0 || payload.len() / 4 != expected {
        return Err(ClassifierError::ParamCount {
            expected,
            found: payload.len() / 4,
        });
    }
    let found = fnv1a64(&payload);
    if found != header.checksum {
        return Err(ClassifierError::Checksum {
            expected: header.checksum,
            found,
        });
    }
    let params = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(MlpModel::from_params(header.config, params)?.with_metadata(header.metadata))
}

pub fn persist_model(model: &MlpModel<f32>, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_model(BufWriter::new(file), model).map_err(|e| with_path(e, path))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel<f32>, ClassifierError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_model(BufReader::new(file)).map_err(|e| with_path(e, path))
}

fn with_path(e: ClassifierError, path: &Path) -> ClassifierError {
    match e {
        ClassifierError::Io { source, .. } => ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}
