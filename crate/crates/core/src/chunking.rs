//! Token-bounded recursive chunking and fixed-stride character re-chunking.
//!
//! Splitting walks a separator hierarchy: a token range that is too long is
//! cut at every boundary carrying the first separator that occurs inside it,
//! the pieces are greedily packed back into chunks of at most `max_tokens`,
//! and any single piece that is still too long is split with the next
//! separator. The empty separator is the token-level fallback: fixed windows
//! of `max_tokens` with a stride of `max_tokens - overlap_tokens`. Only those
//! forced cuts carry overlap; cuts on a real separator do not.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::text::{TokenCounter, TokenSpan};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("max_tokens must be positive")]
    ZeroMax,
    #[error("overlap_tokens ({overlap}) must be smaller than max_tokens ({max})")]
    OverlapTooLarge { overlap: usize, max: usize },
    #[error("separator list must end with the empty separator")]
    MissingFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkProfile {
    max_tokens: usize,
    overlap_tokens: usize,
    separators: Vec<String>,
}

pub fn default_separators() -> Vec<String> {
    ["\n\n", "\n", ". ", " ", ""].iter().map(|s| s.to_string()).collect()
}

impl ChunkProfile {
    pub fn new(max_tokens: usize, overlap_tokens: usize, separators: Vec<String>) -> Result<Self, ChunkError> {
        if max_tokens == 0 {
            return Err(ChunkError::ZeroMax);
        }
        if overlap_tokens >= max_tokens {
            return Err(ChunkError::OverlapTooLarge {
                overlap: overlap_tokens,
                max: max_tokens,
            });
        }
        if separators.last().is_none_or(|s| !s.is_empty()) {
            return Err(ChunkError::MissingFallback);
        }
        Ok(Self {
            max_tokens,
            overlap_tokens,
            separators,
        })
    }

    /// 4096 tokens, 100 overlap. Used by the dense-only and staged topologies.
    pub fn standard() -> Self {
        Self::new(4096, 100, default_separators()).expect("valid preset")
    }

    /// 8192 tokens, 150 overlap. Used by the parallel hybrid topology.
    pub fn long_context() -> Self {
        Self::new(8192, 150, default_separators()).expect("valid preset")
    }

    pub fn max_tokens(&self) -> usize {
        self.max_tokens
    }

    pub fn overlap_tokens(&self) -> usize {
        self.overlap_tokens
    }

    pub fn separators(&self) -> &[String] {
        &self.separators
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub parent_id: String,
    pub ordinal: usize,
    pub text: String,
    pub token_count: usize,
    /// Half-open token range in the parent's token sequence.
    pub start_token: usize,
    pub end_token: usize,
    /// Leading tokens shared with the previous chunk.
    pub overlap_prev: usize,
}

impl Chunk {
    pub fn chunk_id(&self) -> String {
        format!("{}#{}", self.parent_id, self.ordinal)
    }
}

/// Split a document into chunks of at most `profile.max_tokens` tokens.
pub fn split_document(doc: &Document, profile: &ChunkProfile, counter: &dyn TokenCounter) -> Vec<Chunk> {
    split_text(&doc.id, &doc.text, profile, counter)
}

pub fn split_text(parent_id: &str, text: &str, profile: &ChunkProfile, counter: &dyn TokenCounter) -> Vec<Chunk> {
    let spans = counter.segment(text);
    let ranges = split_token_ranges(text, &spans, profile);

    let mut chunks = Vec::with_capacity(ranges.len());
    let mut prev_end = 0usize;
    for (ordinal, range) in ranges.into_iter().enumerate() {
        let chunk_text = if range.is_empty() {
            String::new()
        } else {
            text[spans[range.start].start..spans[range.end - 1].end].to_string()
        };
        let overlap_prev = if ordinal == 0 { 0 } else { prev_end.saturating_sub(range.start) };
        prev_end = range.end;
        chunks.push(Chunk {
            parent_id: parent_id.to_string(),
            ordinal,
            text: chunk_text,
            token_count: range.len(),
            start_token: range.start,
            end_token: range.end,
            overlap_prev,
        });
    }
    chunks
}

/// Token ranges for the chunks of `text`, in order.
pub fn split_token_ranges(text: &str, spans: &[TokenSpan], profile: &ChunkProfile) -> Vec<Range<usize>> {
    if spans.len() <= profile.max_tokens {
        return vec![0..spans.len()];
    }
    let mut out = Vec::new();
    split_range(text, spans, profile, 0..spans.len(), 0, &mut out);
    out
}

/// Whether the boundary before token `i` carries separator `sep`.
fn boundary_has(text: &str, spans: &[TokenSpan], i: usize, sep: &str) -> bool {
    text[spans[i - 1].start..spans[i].start].contains(sep)
}

fn split_range(
    text: &str,
    spans: &[TokenSpan],
    profile: &ChunkProfile,
    range: Range<usize>,
    level: usize,
    out: &mut Vec<Range<usize>>,
) {
    let max = profile.max_tokens;
    if range.len() <= max {
        out.push(range);
        return;
    }
    let sep = profile.separators[level].as_str();
    if sep.is_empty() {
        let stride = max - profile.overlap_tokens;
        let mut start = range.start;
        loop {
            let end = (start + max).min(range.end);
            out.push(start..end);
            if end == range.end {
                break;
            }
            start += stride;
        }
        return;
    }

    let cuts: Vec<usize> = (range.start + 1..range.end)
        .filter(|&i| boundary_has(text, spans, i, sep))
        .collect();
    if cuts.is_empty() {
        split_range(text, spans, profile, range, level + 1, out);
        return;
    }

    let mut pieces = Vec::with_capacity(cuts.len() + 1);
    let mut start = range.start;
    for cut in cuts {
        pieces.push(start..cut);
        start = cut;
    }
    pieces.push(start..range.end);

    let mut current: Option<Range<usize>> = None;
    for piece in pieces {
        if piece.len() > max {
            if let Some(c) = current.take() {
                out.push(c);
            }
            split_range(text, spans, profile, piece, level + 1, out);
            continue;
        }
        current = match current {
            Some(c) if c.len() + piece.len() <= max => Some(c.start..piece.end),
            Some(c) => {
                out.push(c);
                Some(piece)
            }
            None => Some(piece),
        };
    }
    if let Some(c) = current {
        out.push(c);
    }
}

/// Fixed-stride character windows of `size` characters, stride `size - overlap`.
///
/// Panics if `overlap >= size`.
pub fn rechunk_characters(text: &str, size: usize, overlap: usize) -> Vec<String> {
    assert!(size > overlap, "window size must exceed overlap");
    let chars: Vec<char> = text.chars().collect();
    let stride = size - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = (start + size).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Profile used for lexical re-chunking in the staged topology.
pub const RECHUNK_SIZE: usize = 512;
pub const RECHUNK_OVERLAP: usize = 100;
