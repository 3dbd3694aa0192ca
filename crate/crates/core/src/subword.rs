//! WordPiece segmentation and model-input assembly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Instance, CLS, SEP};

pub const DEFAULT_MAX_LEN: usize = 512;
pub const DEFAULT_UNK: &str = "[UNK]";

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unknown piece {0:?} is not in the vocabulary")]
    MissingUnk(String),
    #[error("special piece {0:?} is not in the vocabulary")]
    MissingSpecial(&'static str),
    #[error("continuation prefix must be non-empty")]
    EmptyPrefix,
    #[error("max_len {0} is too small; need at least 4")]
    MaxLenTooSmall(usize),
}

#[derive(Debug, Clone)]
pub struct WordPieceVocab {
    ids: HashMap<String, u32>,
    pieces: Vec<String>,
    unk_piece: String,
    continuation_prefix: String,
    max_word_chars: usize,
}

impl WordPieceVocab {
    /// Piece ids are positions in `pieces`; a repeated piece keeps its first id.
    pub fn new(pieces: Vec<String>, unk_piece: &str) -> Result<Self, SubwordError> {
        let mut ids = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            ids.entry(p.clone()).or_insert(i as u32);
        }
        if !ids.contains_key(unk_piece) {
            return Err(SubwordError::MissingUnk(unk_piece.to_owned()));
        }
        Ok(Self {
            ids,
            pieces,
            unk_piece: unk_piece.to_owned(),
            continuation_prefix: "##".to_owned(),
            max_word_chars: 100,
        })
    }

    pub fn with_continuation_prefix(mut self, prefix: &str) -> Result<Self, SubwordError> {
        if prefix.is_empty() {
            return Err(SubwordError::EmptyPrefix);
        }
        self.continuation_prefix = prefix.to_owned();
        Ok(self)
    }

    pub fn with_max_word_chars(mut self, max: usize) -> Self {
        self.max_word_chars = max;
        self
    }

    /// One piece per line; the whole line (minus a trailing `\r`) is the piece.
    pub fn from_reader<R: BufRead>(reader: R, unk_piece: &str) -> Result<Self, SubwordError> {
        let pieces = reader
            .lines()
            .map(|l| {
                l.map(|mut s| {
                    if s.ends_with('\r') {
                        s.pop();
                    }
                    s
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(pieces, unk_piece)
    }

    pub fn from_file(path: impl AsRef<Path>, unk_piece: &str) -> Result<Self, SubwordError> {
        Self::from_reader(BufReader::new(File::open(path)?), unk_piece)
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.ids.contains_key(piece)
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.ids.get(piece).copied()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn unk_piece(&self) -> &str {
        &self.unk_piece
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }
}

/// Greedy longest-match-first segmentation of a single word.
///
/// Pieces after the first are looked up with the continuation prefix. If any
/// position has no match, or the word is longer than `max_word_chars`
/// characters, the whole word becomes the unknown piece.
pub fn wordpiece_tokenize(word: &str, vocab: &WordPieceVocab) -> Vec<String> {
    if word.is_empty() {
        return Vec::new();
    }
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    if bounds.len() - 1 > vocab.max_word_chars {
        return vec![vocab.unk_piece.clone()];
    }

    let mut out = Vec::new();
    let mut candidate = String::with_capacity(word.len() + vocab.continuation_prefix.len());
    let mut start = 0;
    while start < bounds.len() - 1 {
        let mut matched = None;
        for end in (start + 1..bounds.len()).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(&vocab.continuation_prefix);
            }
            candidate.push_str(&word[bounds[start]..bounds[end]]);
            if vocab.contains(&candidate) {
                matched = Some(end);
                break;
            }
        }
        let Some(end) = matched else {
            return vec![vocab.unk_piece.clone()];
        };
        out.push(candidate.clone());
        start = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlignedWord {
    #[serde(rename = "seg")]
    pub segment_index: usize,
    #[serde(rename = "idx")]
    pub token_index: usize,
    /// Position of the word's first piece in the assembled sequence.
    #[serde(rename = "pos")]
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubwordEncoding {
    pub pieces: Vec<String>,
    pub ids: Vec<u32>,
    /// Sorted by (segment, token); only words whose first piece survived truncation.
    #[serde(rename = "alignment")]
    pub word_to_first_piece: Vec<AlignedWord>,
    pub truncated: bool,
}

impl SubwordEncoding {
    pub fn first_piece(&self, segment_index: usize, token_index: usize) -> Option<usize> {
        self.word_to_first_piece
            .binary_search_by_key(&(segment_index, token_index), |a| {
                (a.segment_index, a.token_index)
            })
            .ok()
            .map(|i| self.word_to_first_piece[i].position)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// Assembles `[CLS] seg1 [SEP]` (plus `seg2 [SEP]` for pairs).
///
/// A token whose surface contains spaces (a multi-word replacement kept as
/// one token) is segmented word by word; its first piece is its alignment
/// position. When the assembly exceeds `max_len`, pieces are removed from the
/// end of the currently longest segment (the later one on ties) until it fits.
pub fn encode_instance(
    instance: &Instance,
    vocab: &WordPieceVocab,
    max_len: usize,
) -> Result<SubwordEncoding, SubwordError> {
    if max_len < 4 {
        return Err(SubwordError::MaxLenTooSmall(max_len));
    }
    let cls_id = vocab.id(CLS).ok_or(SubwordError::MissingSpecial(CLS))?;
    let sep_id = vocab.id(SEP).ok_or(SubwordError::MissingSpecial(SEP))?;

    // (piece, Some(token_index) if it starts a word)
    let mut segments: Vec<Vec<(String, Option<usize>)>> = instance
        .segments()
        .iter()
        .map(|seg| {
            let mut pieces = Vec::new();
            for (t, token) in seg.iter().enumerate() {
                let start = pieces.len();
                for word in token.surface.split_whitespace() {
                    pieces.extend(
                        wordpiece_tokenize(word, vocab)
                            .into_iter()
                            .map(|p| (p, None)),
                    );
                }
                if let Some(first) = pieces.get_mut(start) {
                    first.1 = Some(t);
                }
            }
            pieces
        })
        .collect();

    let mut total = 1 + segments.len() + segments.iter().map(Vec::len).sum::<usize>();
    let truncated = total > max_len;
    while total > max_len {
        let longest = (0..segments.len())
            .rev()
            .max_by_key(|&s| segments[s].len())
            .expect("at least one segment");
        // Specials alone never exceed max_len >= 4, so the longest segment is non-empty.
        segments[longest].pop();
        total -= 1;
    }

    let mut pieces = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    let mut alignment = Vec::new();
    pieces.push(CLS.to_owned());
    ids.push(cls_id);
    for (s, seg) in segments.into_iter().enumerate() {
        for (piece, word) in seg {
            if let Some(t) = word {
                alignment.push(AlignedWord {
                    segment_index: s,
                    token_index: t,
                    position: pieces.len(),
                });
            }
            ids.push(vocab.id(&piece).expect("pieces come from the vocabulary"));
            pieces.push(piece);
        }
        pieces.push(SEP.to_owned());
        ids.push(sep_id);
    }
    Ok(SubwordEncoding {
        pieces,
        ids,
        word_to_first_piece: alignment,
        truncated,
    })
}
