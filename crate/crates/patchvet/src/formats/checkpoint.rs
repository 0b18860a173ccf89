//! Embedding-model checkpoint: versioned binary with magic `PJEMBv1`, a
//! dimensions header, little-endian 32-bit-real parameter blocks in the
//! model's canonical parameter order, and a trailing checksum.
//!
//! Parameters live in memory as 64-bit reals but are stored as 32-bit, so
//! saving rounds them; a model round-tripped through this format serializes
//! to byte-identical output forever after. The hex SHA-256 of the complete
//! file doubles as the model fingerprint that retrieval indexes pin.

use std::path::Path;

use patchvet_core::embedder::{EmbeddingModel, ModelConfig};
use patchvet_core::linalg::Matrix;

use super::{read_file, sha256_hex, seal, unseal, write_file, ByteReader, FormatError};

const MAGIC: &str = "PJEMBv1";

/// Serializes a model (plus the seed its dropout streams restart from) to
/// complete file bytes, trailing checksum included.
pub fn checkpoint_bytes(model: &EmbeddingModel, seed: u64) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    for dim in [
        cfg.vocab_size,
        cfg.d_emb,
        cfg.d_hid,
        cfg.d_out,
        cfg.max_input_tokens,
    ] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    out.extend_from_slice(&cfg.temperature.to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    for block in model.parameters() {
        for &value in block {
            out.extend_from_slice(&(value as f32).to_le_bytes());
        }
    }
    seal(out)
}

/// The model fingerprint: hex SHA-256 of the complete checkpoint bytes.
pub fn fingerprint(checkpoint_bytes: &[u8]) -> String {
    sha256_hex(checkpoint_bytes)
}

pub fn save_checkpoint(path: &Path, model: &EmbeddingModel, seed: u64) -> Result<(), FormatError> {
    write_file(path, &checkpoint_bytes(model, seed))
}

/// Parses checkpoint bytes back into a model and its seed.
pub fn checkpoint_from_bytes(
    bytes: &[u8],
    path: &Path,
) -> Result<(EmbeddingModel, u64), FormatError> {
    let payload = unseal(bytes, path)?;
    let mut reader = ByteReader::new(payload, path);
    if reader.take(MAGIC.len())? != MAGIC.as_bytes() {
        return Err(FormatError::BadMagic {
            path: path.to_path_buf(),
            expected: MAGIC,
        });
    }
    let vocab_size = reader.u32_le()? as usize;
    let d_emb = reader.u32_le()? as usize;
    let d_hid = reader.u32_le()? as usize;
    let d_out = reader.u32_le()? as usize;
    let max_input_tokens = reader.u32_le()? as usize;
    let dropout_rate = reader.f64_le()?;
    let temperature = reader.f64_le()?;
    let seed = reader.u64_le()?;

    let mut block = |len: usize| -> Result<Vec<f64>, FormatError> {
        let raw = reader.take(len.checked_mul(4).ok_or_else(|| FormatError::Truncated {
            path: path.to_path_buf(),
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    };
    let token_table = block(vocab_size * d_emb)?;
    let proj_w1 = block(d_emb * d_hid)?;
    let proj_b1 = block(d_hid)?;
    let proj_w2 = block(d_hid * d_out)?;
    let proj_b2 = block(d_out)?;
    reader.finish()?;

    let config = ModelConfig {
        vocab_size,
        d_emb,
        d_hid,
        d_out,
        dropout_rate,
        temperature,
        max_input_tokens,
    };
    Ok((
        EmbeddingModel::from_parts(
            config,
            seed,
            Matrix::from_vec(vocab_size, d_emb, token_table),
            Matrix::from_vec(d_emb, d_hid, proj_w1),
            proj_b1,
            Matrix::from_vec(d_hid, d_out, proj_w2),
            proj_b2,
        ),
        seed,
    ))
}

pub fn load_checkpoint(path: &Path) -> Result<(EmbeddingModel, u64), FormatError> {
    let bytes = read_file(path)?;
    checkpoint_from_bytes(&bytes, path)
}

/// Rounds a model through the 32-bit storage format without touching disk,
/// so in-memory pipelines see exactly the parameters a save/load cycle
/// would produce.
pub fn quantize_like_checkpoint(model: &EmbeddingModel, seed: u64) -> EmbeddingModel {
    let bytes = checkpoint_bytes(model, seed);
    let (model, _) = checkpoint_from_bytes(&bytes, Path::new("<memory>"))
        .expect("freshly serialized checkpoint always parses");
    model
}
