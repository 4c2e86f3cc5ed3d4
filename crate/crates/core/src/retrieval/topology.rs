use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RetrievalError, RRF_K};
use crate::chunking::{default_separators, ChunkProfile, RECHUNK_OVERLAP, RECHUNK_SIZE};
use crate::dense::{HnswParams, IvfParams};
use crate::lexical::Bm25Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
}

impl ChunkSpec {
    pub fn profile(&self) -> ChunkProfile {
        ChunkProfile::new(self.max_tokens, self.overlap_tokens, default_separators())
            .expect("chunk spec validated with its topology")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    DenseOnly,
    StagedHybrid,
    ParallelHybrid,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [TopologyKind::DenseOnly, TopologyKind::StagedHybrid, TopologyKind::ParallelHybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::DenseOnly => "dense_only",
            TopologyKind::StagedHybrid => "staged_hybrid",
            TopologyKind::ParallelHybrid => "parallel_hybrid",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TopologyKind {
    type Err = RetrievalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dense_only" | "dense" => Ok(TopologyKind::DenseOnly),
            "staged_hybrid" | "staged" => Ok(TopologyKind::StagedHybrid),
            "parallel_hybrid" | "parallel" => Ok(TopologyKind::ParallelHybrid),
            other => Err(RetrievalError::Config(format!("unknown topology {other:?}"))),
        }
    }
}

/// A retrieval topology together with every parameter it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case")]
pub enum PipelineTopology {
    /// HNSW search only, no lexical stage and no fusion.
    DenseOnly {
        hnsw: HnswParams,
        top_k: usize,
        chunk: ChunkSpec,
    },
    /// IVF candidates, BM25 over the candidates' character segments, RRF.
    StagedHybrid {
        ivf: IvfParams,
        dense_top_k: usize,
        segment_chars: usize,
        segment_overlap: usize,
        bm25: Bm25Params,
        rrf_k: usize,
        chunk: ChunkSpec,
    },
    /// HNSW and full-collection BM25 run side by side, then RRF.
    ParallelHybrid {
        hnsw: HnswParams,
        dense_top_k: usize,
        lexical_top_k: usize,
        bm25: Bm25Params,
        rrf_k: usize,
        chunk: ChunkSpec,
    },
}

impl PipelineTopology {
    pub fn dense_only() -> Self {
        PipelineTopology::DenseOnly {
            hnsw: HnswParams::dense_only(),
            top_k: 10,
            chunk: ChunkSpec {
                max_tokens: 4096,
                overlap_tokens: 100,
            },
        }
    }

    pub fn staged_hybrid() -> Self {
        PipelineTopology::StagedHybrid {
            ivf: IvfParams::staged_hybrid(),
            dense_top_k: 500,
            segment_chars: RECHUNK_SIZE,
            segment_overlap: RECHUNK_OVERLAP,
            bm25: Bm25Params::default(),
            rrf_k: RRF_K,
            chunk: ChunkSpec {
                max_tokens: 4096,
                overlap_tokens: 100,
            },
        }
    }

    pub fn parallel_hybrid() -> Self {
        PipelineTopology::ParallelHybrid {
            hnsw: HnswParams::parallel_hybrid(),
            dense_top_k: 10,
            lexical_top_k: 10,
            bm25: Bm25Params::default(),
            rrf_k: RRF_K,
            chunk: ChunkSpec {
                max_tokens: 8192,
                overlap_tokens: 150,
            },
        }
    }

    pub fn preset(kind: TopologyKind) -> Self {
        match kind {
            TopologyKind::DenseOnly => Self::dense_only(),
            TopologyKind::StagedHybrid => Self::staged_hybrid(),
            TopologyKind::ParallelHybrid => Self::parallel_hybrid(),
        }
    }

    /// Same topology with every index seed replaced.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            PipelineTopology::DenseOnly { hnsw, .. } | PipelineTopology::ParallelHybrid { hnsw, .. } => hnsw.seed = seed,
            PipelineTopology::StagedHybrid { ivf, .. } => ivf.seed = seed,
        }
        self
    }

    pub fn seed(&self) -> u64 {
        match self {
            PipelineTopology::DenseOnly { hnsw, .. } | PipelineTopology::ParallelHybrid { hnsw, .. } => hnsw.seed,
            PipelineTopology::StagedHybrid { ivf, .. } => ivf.seed,
        }
    }

    pub fn kind(&self) -> TopologyKind {
        match self {
            PipelineTopology::DenseOnly { .. } => TopologyKind::DenseOnly,
            PipelineTopology::StagedHybrid { .. } => TopologyKind::StagedHybrid,
            PipelineTopology::ParallelHybrid { .. } => TopologyKind::ParallelHybrid,
        }
    }

    pub fn chunk_spec(&self) -> ChunkSpec {
        match self {
            PipelineTopology::DenseOnly { chunk, .. }
            | PipelineTopology::StagedHybrid { chunk, .. }
            | PipelineTopology::ParallelHybrid { chunk, .. } => *chunk,
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let chunk = self.chunk_spec();
        ChunkProfile::new(chunk.max_tokens, chunk.overlap_tokens, default_separators())
            .map_err(|e| RetrievalError::Config(e.to_string()))?;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(RetrievalError::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        let bm25_ok = |p: &Bm25Params| {
            Bm25Params::new(p.k1, p.b)
                .map(|_| ())
                .map_err(|e| RetrievalError::Config(e.to_string()))
        };
        match self {
            PipelineTopology::DenseOnly { hnsw, top_k, .. } => {
                hnsw.validate().map_err(|e| RetrievalError::Config(e.to_string()))?;
                positive("top_k", *top_k)
            }
            PipelineTopology::StagedHybrid {
                ivf,
                dense_top_k,
                segment_chars,
                segment_overlap,
                bm25,
                rrf_k,
                ..
            } => {
                positive("nlist", ivf.nlist)?;
                positive("nprobe", ivf.nprobe)?;
                positive("dense_top_k", *dense_top_k)?;
                positive("segment_chars", *segment_chars)?;
                positive("rrf_k", *rrf_k)?;
                if segment_overlap >= segment_chars {
                    return Err(RetrievalError::Config("segment overlap must be below segment size".into()));
                }
                bm25_ok(bm25)
            }
            PipelineTopology::ParallelHybrid {
                hnsw,
                dense_top_k,
                lexical_top_k,
                bm25,
                rrf_k,
                ..
            } => {
                hnsw.validate().map_err(|e| RetrievalError::Config(e.to_string()))?;
                positive("dense_top_k", *dense_top_k)?;
                positive("lexical_top_k", *lexical_top_k)?;
                positive("rrf_k", *rrf_k)?;
                bm25_ok(bm25)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::Metric;
    use crate::embedding::Precision;

    #[test]
    fn presets() {
        let PipelineTopology::DenseOnly { hnsw, top_k, chunk } = PipelineTopology::dense_only() else {
            unreachable!()
        };
        assert_eq!((hnsw.max_links, hnsw.ef_construction, hnsw.ef_search, top_k), (16, 128, 128, 10));
        assert_eq!((hnsw.metric, hnsw.precision), (Metric::Cosine, Precision::Fp16));
        assert_eq!((chunk.max_tokens, chunk.overlap_tokens), (4096, 100));

        let PipelineTopology::StagedHybrid { ivf, dense_top_k, segment_chars, segment_overlap, bm25, rrf_k, .. } =
            PipelineTopology::staged_hybrid()
        else {
            unreachable!()
        };
        assert_eq!((ivf.nlist, ivf.nprobe, ivf.metric), (2048, 10, Metric::L2));
        assert_eq!((dense_top_k, segment_chars, segment_overlap, rrf_k), (500, 512, 100, 60));
        assert_eq!((bm25.k1, bm25.b), (1.6, 0.7));

        let PipelineTopology::ParallelHybrid { hnsw, dense_top_k, lexical_top_k, chunk, .. } =
            PipelineTopology::parallel_hybrid()
        else {
            unreachable!()
        };
        assert_eq!((hnsw.ef_construction, hnsw.metric), (200, Metric::L2));
        assert_eq!((dense_top_k, lexical_top_k, chunk.max_tokens), (10, 10, 8192));

        for kind in TopologyKind::ALL {
            let t = PipelineTopology::preset(kind);
            assert_eq!(t.kind(), kind);
            t.validate().unwrap();
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<PipelineTopology>(&json).unwrap(), t);
            assert_eq!(kind.as_str().parse::<TopologyKind>().unwrap(), kind);
        }
    }
}
