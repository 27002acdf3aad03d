//! `MTXE` embedding files.
//!
//! Layout: magic `MTXE`, `u8` version (1), `u32` LE dimension, `u64` LE
//! record count, then per record a `u16` LE id length, the UTF-8 id bytes and
//! `dim` little-endian `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Modality, Result};

pub const MTXE_MAGIC: [u8; 4] = *b"MTXE";
pub const MTXE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub utterance_id: String,
    /// Taken from the file stem on load; the file format carries no encoder id.
    pub encoder_id: String,
    /// Resolved from the manifest when records are joined to utterances.
    pub modality: Option<Modality>,
    pub vector: Vec<f32>,
}

fn truncated(what: &str, e: std::io::Error) -> CorpusError {
    if e.kind() == ErrorKind::UnexpectedEof {
        CorpusError::Truncated {
            detail: format!("file ends inside {what}"),
        }
    } else {
        CorpusError::io("<input>", e)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let encoder_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_embeddings(BufReader::new(file), expected_dim, &encoder_id).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

pub fn read_embeddings<R: Read>(
    mut reader: R,
    expected_dim: Option<usize>,
    encoder_id: &str,
) -> Result<Vec<EmbeddingRecord>> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| truncated("the magic bytes", e))?;
    if magic != MTXE_MAGIC {
        return Err(CorpusError::BadMagic { found: magic.to_vec() });
    }
    let mut version = [0u8; 1];
    reader.read_exact(&mut version).map_err(|e| truncated("the header", e))?;
    if version[0] != MTXE_VERSION {
        return Err(CorpusError::UnsupportedVersion {
            expected: MTXE_VERSION,
            found: version[0],
        });
    }
    let mut dim = [0u8; 4];
    reader.read_exact(&mut dim).map_err(|e| truncated("the header", e))?;
    let dim = u32::from_le_bytes(dim) as usize;
    let mut count = [0u8; 8];
    reader.read_exact(&mut count).map_err(|e| truncated("the header", e))?;
    let count = u64::from_le_bytes(count);
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(CorpusError::DimensionMismatch { expected, found: dim });
        }
    }

    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut payload = vec![0u8; dim * 4];
    for i in 0..count {
        let mut len = [0u8; 2];
        reader
            .read_exact(&mut len)
            .map_err(|e| truncated(&format!("record {i} of {count}"), e))?;
        let mut id = vec![0u8; u16::from_le_bytes(len) as usize];
        reader
            .read_exact(&mut id)
            .map_err(|e| truncated(&format!("record {i} of {count}"), e))?;
        let id = String::from_utf8(id).map_err(|_| CorpusError::Field {
            row: i as usize + 1,
            column: "id",
            detail: "id is not valid UTF-8".into(),
        })?;
        reader
            .read_exact(&mut payload)
            .map_err(|e| truncated(&format!("record {i} of {count}"), e))?;
        let vector: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite { id, index });
        }
        records.push(EmbeddingRecord {
            utterance_id: id,
            encoder_id: encoder_id.to_string(),
            modality: None,
            vector,
        });
    }
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest).map_err(|e| CorpusError::io("<input>", e))?;
    if !rest.is_empty() {
        return Err(CorpusError::TrailingData(rest.len()));
    }
    Ok(records)
}

pub fn write_embeddings<W: Write>(mut writer: W, dim: usize, records: &[EmbeddingRecord]) -> Result<()> {
    for r in records {
        if r.vector.len() != dim {
            return Err(CorpusError::VectorLength {
                id: r.utterance_id.clone(),
                expected: dim,
                found: r.vector.len(),
            });
        }
        if let Some(index) = r.vector.iter().position(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite {
                id: r.utterance_id.clone(),
                index,
            });
        }
        if r.utterance_id.len() > u16::MAX as usize {
            return Err(CorpusError::IdTooLong {
                id: r.utterance_id.clone(),
                len: r.utterance_id.len(),
            });
        }
    }
    let dim_u32 = u32::try_from(dim).map_err(|_| CorpusError::DimensionMismatch {
        expected: u32::MAX as usize,
        found: dim,
    })?;
    let io = |e| CorpusError::io("<output>", e);
    writer.write_all(&MTXE_MAGIC).map_err(io)?;
    writer.write_all(&[MTXE_VERSION]).map_err(io)?;
    writer.write_all(&dim_u32.to_le_bytes()).map_err(io)?;
    writer.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
    for r in records {
        writer
            .write_all(&(r.utterance_id.len() as u16).to_le_bytes())
            .map_err(io)?;
        writer.write_all(r.utterance_id.as_bytes()).map_err(io)?;
        for v in &r.vector {
            writer.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    writer.flush().map_err(io)
}

pub fn save_embeddings(path: impl AsRef<Path>, dim: usize, records: &[EmbeddingRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_embeddings(BufWriter::new(file), dim, records).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, vector: Vec<f32>) -> EmbeddingRecord {
        EmbeddingRecord {
            utterance_id: id.into(),
            encoder_id: "enc".into(),
            modality: None,
            vector,
        }
    }

    fn encode(dim: usize, records: &[EmbeddingRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embeddings(&mut buf, dim, records).unwrap();
        buf
    }

    #[test]
    fn header_layout_is_exact() {
        let buf = encode(4, &[record("ab", vec![1.0, 2.0, 3.0, 4.0])]);
        assert_eq!(&buf[..4], &[0x4D, 0x54, 0x58, 0x45]);
        assert_eq!(buf[4], 1);
        assert_eq!(&buf[5..9], &4u32.to_le_bytes());
        assert_eq!(&buf[9..17], &1u64.to_le_bytes());
        assert_eq!(&buf[17..19], &2u16.to_le_bytes());
        assert_eq!(&buf[19..21], b"ab");
        assert_eq!(&buf[21..25], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 17 + 2 + 2 + 16);
    }

    #[test]
    fn reads_two_records() {
        let recs = vec![record("a", vec![0.5; 4]), record("b", vec![-1.0, 0.0, 1.0, 2.0])];
        let back = read_embeddings(encode(4, &recs).as_slice(), None, "enc").unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn dimension_mismatch() {
        let buf = encode(512, &[]);
        assert!(matches!(
            read_embeddings(buf.as_slice(), Some(1024), "e"),
            Err(CorpusError::DimensionMismatch { expected: 1024, found: 512 })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut buf = encode(4, &[record("a", vec![1.0; 4]), record("b", vec![1.0; 4])]);
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_embeddings(buf.as_slice(), None, "e"), Err(CorpusError::Truncated { .. })));
    }

    #[test]
    fn bad_magic() {
        let mut buf = encode(4, &[]);
        buf[0] = b'X';
        assert!(matches!(read_embeddings(buf.as_slice(), None, "e"), Err(CorpusError::BadMagic { .. })));
    }

    #[test]
    fn non_finite_entry_rejected() {
        let mut buf = encode(2, &[record("a", vec![1.0, 2.0])]);
        let n = buf.len();
        buf[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_embeddings(buf.as_slice(), None, "e"),
            Err(CorpusError::NonFinite { index: 1, .. })
        ));
        let mut sink = Vec::new();
        assert!(write_embeddings(&mut sink, 1, &[record("a", vec![f32::INFINITY])]).is_err());
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut buf = encode(1, &[record("a", vec![1.0])]);
        buf.push(0);
        assert!(matches!(read_embeddings(buf.as_slice(), None, "e"), Err(CorpusError::TrailingData(1))));
    }
}
