//! Byte-level byte-pair-encoding tokenizer.
//!
//! Works directly on UTF-8 bytes with no pre-tokenization, so any string
//! round-trips exactly and out-of-vocabulary tokens cannot occur. Training
//! greedily merges the most frequent adjacent symbol pair each round;
//! frequency ties are broken by the lexicographically smallest *merged byte
//! expansion* (then by the pair's own expansions, then ids), which keeps
//! training deterministic across platforms.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors from tokenizer training, decoding, and vocabulary files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BpeError {
    /// Training corpus contained no documents.
    EmptyCorpus,
    /// A token id at or beyond the vocabulary size was decoded.
    UnknownTokenId(u32),
    /// Decoded bytes do not form valid UTF-8 (possible when ids are
    /// assembled by hand rather than produced by `encode`).
    InvalidUtf8,
    /// A vocabulary file line did not parse; payload is the 1-based line.
    FormatError(usize),
}

impl fmt::Display for BpeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BpeError::EmptyCorpus => write!(f, "training corpus is empty"),
            BpeError::UnknownTokenId(id) => write!(f, "unknown token id {id}"),
            BpeError::InvalidUtf8 => write!(f, "decoded bytes are not valid UTF-8"),
            BpeError::FormatError(line) => write!(f, "vocabulary file malformed at line {line}"),
        }
    }
}

impl core::error::Error for BpeError {}

/// A trained BPE vocabulary: 256 byte symbols plus an ordered merge list.
/// Merge `i` produces token id `256 + i`. Ids are dense in `[0, size)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    merges: Vec<(u32, u32)>,
    /// Byte expansion of every id; the first 256 are the single bytes.
    expansions: Vec<Vec<u8>>,
}

impl Vocabulary {
    /// The raw-bytes vocabulary with no merges.
    pub fn bytes_only() -> Self {
        let expansions = (0u16..256).map(|b| alloc::vec![b as u8]).collect();
        Vocabulary {
            merges: Vec::new(),
            expansions,
        }
    }

    pub fn size(&self) -> usize {
        256 + self.merges.len()
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    /// Byte expansion of a token id.
    pub fn expansion(&self, id: u32) -> Option<&[u8]> {
        self.expansions.get(id as usize).map(Vec::as_slice)
    }

    fn push_merge(&mut self, left: u32, right: u32) {
        let mut expansion = self.expansions[left as usize].clone();
        expansion.extend_from_slice(&self.expansions[right as usize]);
        self.expansions.push(expansion);
        self.merges.push((left, right));
    }

    /// Replaces every non-overlapping left-to-right occurrence of
    /// `(left, right)` in `tokens` with `merged`.
    fn apply_merge(tokens: &mut Vec<u32>, left: u32, right: u32, merged: u32) {
        let mut write = 0usize;
        let mut read = 0usize;
        while read < tokens.len() {
            if read + 1 < tokens.len() && tokens[read] == left && tokens[read + 1] == right {
                tokens[write] = merged;
                read += 2;
            } else {
                tokens[write] = tokens[read];
                read += 1;
            }
            write += 1;
        }
        tokens.truncate(write);
    }

    /// Tokenizes a string by applying the merges in learned order.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut tokens: Vec<u32> = text.bytes().map(u32::from).collect();
        for (i, &(left, right)) in self.merges.iter().enumerate() {
            if tokens.len() < 2 {
                break;
            }
            Self::apply_merge(&mut tokens, left, right, 256 + i as u32);
        }
        tokens
    }

    /// Inverse of [`encode`](Self::encode) for valid token sequences.
    pub fn decode(&self, tokens: &[u32]) -> Result<String, BpeError> {
        let mut bytes = Vec::new();
        for &id in tokens {
            let expansion = self
                .expansion(id)
                .ok_or(BpeError::UnknownTokenId(id))?;
            bytes.extend_from_slice(expansion);
        }
        String::from_utf8(bytes).map_err(|_| BpeError::InvalidUtf8)
    }

    /// Serializes to the versioned text format: a `BPEv1 <n_merges>` header
    /// followed by one `<left_id> <right_id>` merge per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("BPEv1 ");
        out.push_str(itoa(self.merges.len() as u64).as_str());
        out.push('\n');
        for &(l, r) in &self.merges {
            out.push_str(itoa(u64::from(l)).as_str());
            out.push(' ');
            out.push_str(itoa(u64::from(r)).as_str());
            out.push('\n');
        }
        out
    }

    /// Parses the text format produced by [`to_text`](Self::to_text).
    pub fn from_text(text: &str) -> Result<Self, BpeError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(BpeError::FormatError(1))?;
        let n: usize = header
            .strip_prefix("BPEv1 ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or(BpeError::FormatError(1))?;
        let mut vocab = Vocabulary::bytes_only();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if line.is_empty() {
                continue;
            }
            let (l, r) = line.split_once(' ').ok_or(BpeError::FormatError(line_no))?;
            let left: u32 = l.parse().map_err(|_| BpeError::FormatError(line_no))?;
            let right: u32 = r.parse().map_err(|_| BpeError::FormatError(line_no))?;
            let limit = vocab.size() as u32;
            if left >= limit || right >= limit {
                return Err(BpeError::FormatError(line_no));
            }
            vocab.push_merge(left, right);
        }
        if vocab.merges.len() != n {
            return Err(BpeError::FormatError(1));
        }
        Ok(vocab)
    }
}

/// Minimal integer-to-string helper (avoids pulling `format!` into the hot
/// serializer; also keeps output canonical).
fn itoa(mut v: u64) -> String {
    if v == 0 {
        return String::from("0");
    }
    let mut digits = Vec::new();
    while v > 0 {
        digits.push(b'0' + (v % 10) as u8);
        v /= 10;
    }
    digits.reverse();
    String::from_utf8(digits).expect("ascii digits")
}

/// Compares two candidate pairs for the frequency tie-break: smaller merged
/// byte expansion wins, then smaller left expansion, then smaller right,
/// then smaller ids.
fn pair_precedes(expansions: &[Vec<u8>], a: (u32, u32), b: (u32, u32)) -> bool {
    let concat = |p: (u32, u32)| {
        expansions[p.0 as usize]
            .iter()
            .chain(expansions[p.1 as usize].iter())
    };
    concat(a)
        .cmp(concat(b))
        .then_with(|| expansions[a.0 as usize].cmp(&expansions[b.0 as usize]))
        .then_with(|| expansions[a.1 as usize].cmp(&expansions[b.1 as usize]))
        .then_with(|| a.cmp(&b))
        .is_lt()
}

/// Trains a vocabulary of up to `vocab_target` symbols (256 byte symbols
/// plus `vocab_target − 256` merges; targets of 256 or less train no
/// merges). Each round merges the adjacent pair with the highest occurrence
/// count, counted over every adjacent position; training stops early when no
/// adjacent pair remains. The `seed` parameter is reserved for future
/// sampling-based training modes; the current algorithm is fully
/// deterministic and ignores it.
pub fn train_bpe<S: AsRef<str>>(
    corpus: &[S],
    vocab_target: usize,
    _seed: u64,
) -> Result<Vocabulary, BpeError> {
    if corpus.is_empty() {
        return Err(BpeError::EmptyCorpus);
    }
    let mut vocab = Vocabulary::bytes_only();
    let n_merges = vocab_target.saturating_sub(256);
    let mut docs: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| s.as_ref().bytes().map(u32::from).collect())
        .collect();

    for round in 0..n_merges {
        let mut counts: alloc::collections::BTreeMap<(u32, u32), u64> =
            alloc::collections::BTreeMap::new();
        for doc in &docs {
            for w in doc.windows(2) {
                *counts.entry((w[0], w[1])).or_insert(0) += 1;
            }
        }
        let mut best: Option<((u32, u32), u64)> = None;
        for (&pair, &count) in &counts {
            best = match best {
                None => Some((pair, count)),
                Some((bp, bc)) => {
                    if count > bc || (count == bc && pair_precedes(&vocab.expansions, pair, bp)) {
                        Some((pair, count))
                    } else {
                        Some((bp, bc))
                    }
                }
            };
        }
        let Some(((left, right), _)) = best else {
            break; // no adjacent pair anywhere: every document is length <= 1
        };
        let merged = 256 + round as u32;
        vocab.push_merge(left, right);
        for doc in &mut docs {
            Vocabulary::apply_merge(doc, left, right, merged);
        }
    }
    Ok(vocab)
}
