//! Postings file. Little-endian throughout, terms in byte order.
//!
//! ```text
//! magic "JRBM" | version u32 | k1 f64 | b f64 | segments u32
//! segments x (id_len u32 | id utf-8 | length u32)
//! terms u32
//! terms x (term_len u32 | term utf-8 | n u32 | n x (segment u32 | tf u32))
//! ```

use std::collections::HashMap;

use super::{Bm25Params, LexicalError, LexicalIndex, Posting};

pub const POSTINGS_MAGIC: &[u8; 4] = b"JRBM";
pub const POSTINGS_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub(super) fn encode(index: &LexicalIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(POSTINGS_MAGIC);
    put_u32(&mut out, POSTINGS_VERSION);
    let p = index.params();
    out.extend_from_slice(&p.k1.to_le_bytes());
    out.extend_from_slice(&p.b.to_le_bytes());
    put_u32(&mut out, index.segment_count() as u32);
    for (id, &len) in index.segment_ids().iter().zip(index.lengths()) {
        put_str(&mut out, id);
        put_u32(&mut out, len);
    }
    let mut terms: Vec<(&String, &Vec<Posting>)> = index.raw_postings().iter().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));
    put_u32(&mut out, terms.len() as u32);
    for (term, postings) in terms {
        put_str(&mut out, term);
        put_u32(&mut out, postings.len() as u32);
        for posting in postings {
            put_u32(&mut out, posting.segment);
            put_u32(&mut out, posting.tf);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LexicalError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| LexicalError::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, LexicalError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64, LexicalError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self) -> Result<String, LexicalError> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?)
            .map(str::to_string)
            .map_err(|e| LexicalError::Format(format!("invalid utf-8: {e}")))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<LexicalIndex, LexicalError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != POSTINGS_MAGIC {
        return Err(LexicalError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != POSTINGS_VERSION {
        return Err(LexicalError::Format(format!("unsupported version {version}")));
    }
    let k1 = r.f64()?;
    let b = r.f64()?;
    let params = Bm25Params::new(k1, b).map_err(|e| LexicalError::Format(e.to_string()))?;
    let n = r.u32()? as usize;
    let mut ids = Vec::with_capacity(n.min(1 << 16));
    let mut lengths = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        ids.push(r.string()?);
        lengths.push(r.u32()?);
    }
    let terms = r.u32()? as usize;
    let mut postings = HashMap::with_capacity(terms.min(1 << 16));
    for _ in 0..terms {
        let term = r.string()?;
        let count = r.u32()? as usize;
        let mut list = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let segment = r.u32()?;
            if segment as usize >= n {
                return Err(LexicalError::Format(format!("segment {segment} out of range")));
            }
            list.push(Posting { segment, tf: r.u32()? });
        }
        if postings.insert(term.clone(), list).is_some() {
            return Err(LexicalError::Format(format!("duplicate term {term}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(LexicalError::Format("trailing bytes".into()));
    }
    Ok(LexicalIndex::from_parts(params, ids, lengths, postings))
}

pub(super) fn stats_text(index: &LexicalIndex) -> String {
    let p = index.params();
    format!(
        "segments = {}\navgdl = {}\nvocabulary = {}\nk1 = {}\nb = {}\n",
        index.segment_count(),
        index.avgdl(),
        index.vocabulary_size(),
        p.k1,
        p.b
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn round_trip_is_exact() {
        let segs: BTreeMap<String, String> = [
            ("a", "the appeal is dismissed"),
            ("b", "bail granted under section 439"),
            ("c", ""),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let idx = LexicalIndex::build(&segs, Bm25Params::default());
        let bytes = encode(&idx);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(encode(&back), bytes);
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(stats_text(&idx).contains("segments = 3"));
    }
}
