//! Tokenizer vocabulary file: the versioned text format produced by
//! [`Vocabulary::to_text`] ("BPEv1 <n_merges>" header, one merge per line).

use std::path::Path;

use patchvet_core::bpe::Vocabulary;

use super::{read_file, write_file, FormatError};

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), FormatError> {
    write_file(path, vocab.to_text().as_bytes())
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::Malformed {
        path: path.to_path_buf(),
        message: "vocabulary file is not valid UTF-8".to_string(),
    })?;
    Vocabulary::from_text(&text).map_err(|e| FormatError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
