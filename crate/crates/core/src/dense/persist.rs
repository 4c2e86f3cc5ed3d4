//! Binary index file. All integers and floats are little-endian.
//!
//! ```text
//! header   magic "JRVX" | version u32 | kind u8 | metric u8 | precision u8 | reserved u8
//!          | dim u32 | count u64
//! params   flat: (none)
//!          hnsw: max_links u32 | ef_construction u32 | ef_search u32 | seed u64
//!                | has_entry u8 | entry u32 | max_level u32
//!          ivf:  nlist u32 | nprobe u32 | seed u64
//! vectors  count x (id_len u32 | id utf-8 bytes | dim x f32)
//! graph    hnsw: count x (level u32 | (level+1) x (n u32 | n x u32))
//! cells    ivf:  nlist x (dim x f32) | nlist x (n u32 | n x u32)
//! ```

use super::{DenseIndex, FlatIndex, HnswIndex, HnswParams, IndexError, IvfIndex, IvfParams, Metric, VectorSet};
use crate::embedding::Precision;

pub const MAGIC: &[u8; 4] = b"JRVX";
pub const FORMAT_VERSION: u32 = 1;

const KIND_FLAT: u8 = 0;
const KIND_HNSW: u8 = 1;
const KIND_IVF: u8 = 2;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn ids(&mut self, ids: &[u32]) {
        self.u32(ids.len() as u32);
        for &i in ids {
            self.u32(i);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| IndexError::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, IndexError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| IndexError::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect())
    }
    fn ids(&mut self, bound: usize) -> Result<Vec<u32>, IndexError> {
        let n = self.u32()? as usize;
        let mut out = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let id = self.u32()?;
            if id as usize >= bound {
                return Err(IndexError::Format(format!("node id {id} out of range")));
            }
            out.push(id);
        }
        Ok(out)
    }
}

fn metric_code(m: Metric) -> u8 {
    match m {
        Metric::Cosine => 0,
        Metric::L2 => 1,
    }
}

fn metric_from(code: u8) -> Result<Metric, IndexError> {
    match code {
        0 => Ok(Metric::Cosine),
        1 => Ok(Metric::L2),
        _ => Err(IndexError::Format(format!("unknown metric code {code}"))),
    }
}

fn precision_code(p: Precision) -> u8 {
    match p {
        Precision::Fp32 => 0,
        Precision::Fp16 => 1,
    }
}

fn precision_from(code: u8) -> Result<Precision, IndexError> {
    match code {
        0 => Ok(Precision::Fp32),
        1 => Ok(Precision::Fp16),
        _ => Err(IndexError::Format(format!("unknown precision code {code}"))),
    }
}

pub(super) fn encode(index: &DenseIndex) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    let vectors = index.vectors();
    let (kind, precision) = match index {
        DenseIndex::Flat(_) => (KIND_FLAT, Precision::Fp32),
        DenseIndex::Hnsw(h) => (KIND_HNSW, h.params().precision),
        DenseIndex::Ivf(_) => (KIND_IVF, Precision::Fp32),
    };
    w.u8(kind);
    w.u8(metric_code(index.metric()));
    w.u8(precision_code(precision));
    w.u8(0);
    w.u32(vectors.dim() as u32);
    w.u64(vectors.len() as u64);

    match index {
        DenseIndex::Flat(_) => {}
        DenseIndex::Hnsw(h) => {
            let p = h.params();
            w.u32(p.max_links as u32);
            w.u32(p.ef_construction as u32);
            w.u32(p.ef_search as u32);
            w.u64(p.seed);
            w.u8(h.entry_point().is_some() as u8);
            w.u32(h.entry_point().unwrap_or(0));
            w.u32(h.max_level() as u32);
        }
        DenseIndex::Ivf(ivf) => {
            let p = ivf.params();
            w.u32(p.nlist as u32);
            w.u32(p.nprobe as u32);
            w.u64(p.seed);
        }
    }

    for i in 0..vectors.len() {
        let id = vectors.id(i).as_bytes();
        w.u32(id.len() as u32);
        w.0.extend_from_slice(id);
        w.f32s(vectors.vector(i));
    }

    match index {
        DenseIndex::Flat(_) => {}
        DenseIndex::Hnsw(h) => {
            for node in 0..vectors.len() {
                let layers = h.links(node);
                w.u32((layers.len() - 1) as u32);
                for list in layers {
                    w.ids(list);
                }
            }
        }
        DenseIndex::Ivf(ivf) => {
            for c in ivf.centroids() {
                w.f32s(c);
            }
            for cell in ivf.cells() {
                w.ids(cell);
            }
        }
    }
    w.0
}

pub(super) fn decode(bytes: &[u8]) -> Result<DenseIndex, IndexError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IndexError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::Format(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    let metric = metric_from(r.u8()?)?;
    let precision = precision_from(r.u8()?)?;
    r.u8()?;
    let dim = r.u32()? as usize;
    let count = r.u64()? as usize;

    enum Params {
        Flat,
        Hnsw(HnswParams, Option<u32>, usize),
        Ivf(IvfParams),
    }
    let params = match kind {
        KIND_FLAT => Params::Flat,
        KIND_HNSW => {
            let max_links = r.u32()? as usize;
            let ef_construction = r.u32()? as usize;
            let ef_search = r.u32()? as usize;
            let seed = r.u64()?;
            let has_entry = r.u8()? != 0;
            let entry = r.u32()?;
            let max_level = r.u32()? as usize;
            Params::Hnsw(
                HnswParams {
                    max_links,
                    ef_construction,
                    ef_search,
                    metric,
                    precision,
                    seed,
                },
                has_entry.then_some(entry),
                max_level,
            )
        }
        KIND_IVF => {
            let nlist = r.u32()? as usize;
            let nprobe = r.u32()? as usize;
            let seed = r.u64()?;
            Params::Ivf(IvfParams {
                nlist,
                nprobe,
                metric,
                seed,
            })
        }
        other => return Err(IndexError::Format(format!("unknown index kind {other}"))),
    };

    let mut vectors = VectorSet::new(dim);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(len)?)
            .map_err(|e| IndexError::Format(format!("id is not utf-8: {e}")))?
            .to_string();
        let values = r.f32s(dim)?;
        vectors.push(id, &values)?;
    }

    let index = match params {
        Params::Flat => DenseIndex::Flat(FlatIndex::new(vectors, metric)),
        Params::Hnsw(p, entry, max_level) => {
            let mut links = Vec::with_capacity(count);
            for _ in 0..count {
                let level = r.u32()? as usize;
                if level > max_level {
                    return Err(IndexError::Format("node level exceeds max level".into()));
                }
                let mut layers = Vec::with_capacity(level + 1);
                for _ in 0..=level {
                    layers.push(r.ids(count)?);
                }
                links.push(layers);
            }
            DenseIndex::Hnsw(HnswIndex::from_parts(p, vectors, links, entry, max_level))
        }
        Params::Ivf(p) => {
            let mut centroids = Vec::with_capacity(p.nlist);
            for _ in 0..p.nlist {
                centroids.push(r.f32s(dim)?);
            }
            let mut cells = Vec::with_capacity(p.nlist);
            for _ in 0..p.nlist {
                cells.push(r.ids(count)?);
            }
            DenseIndex::Ivf(IvfIndex::from_parts(p, vectors, centroids, cells))
        }
    };
    if r.pos != bytes.len() {
        return Err(IndexError::Format("trailing bytes".into()));
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::test_util::random_unit_set;

    fn assert_same_results(a: &DenseIndex, b: &DenseIndex) {
        for i in (0..a.len()).step_by(13) {
            let q = a.vectors().vector(i);
            assert_eq!(a.search(q, 10).unwrap(), b.search(q, 10).unwrap());
        }
    }

    #[test]
    fn round_trips_every_kind() {
        let set = random_unit_set(150, 24, 77);
        let indexes = [
            DenseIndex::Flat(FlatIndex::new(set.clone(), Metric::Cosine)),
            DenseIndex::Hnsw(HnswIndex::build(&set, HnswParams::dense_only()).unwrap()),
            DenseIndex::Ivf(
                IvfIndex::build(
                    &set,
                    IvfParams {
                        nlist: 12,
                        nprobe: 3,
                        metric: Metric::L2,
                        seed: 5,
                    },
                )
                .unwrap(),
            ),
        ];
        for idx in &indexes {
            let bytes = encode(idx);
            let back = decode(&bytes).unwrap();
            assert_eq!(encode(&back), bytes, "{} re-encodes differently", idx.kind_name());
            assert_eq!(back.vectors(), idx.vectors());
            assert_same_results(idx, &back);
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let set = random_unit_set(10, 4, 1);
        let bytes = encode(&DenseIndex::Flat(FlatIndex::new(set, Metric::L2)));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }
}
