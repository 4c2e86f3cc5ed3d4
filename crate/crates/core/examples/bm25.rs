//! BM25 over a few segments, scoring everything or a candidate subset.
//!
//! cargo run --example bm25

use std::collections::HashSet;

use jurisrag::lexical::{Bm25Params, Candidates, LexicalIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index = LexicalIndex::build_from_iter(
        [
            ("s1", "possession of one co-sharer is possession of all co-sharers"),
            ("s2", "the tenant shall pay rent for the land"),
            ("s3", "a co-sharer in exclusive cultivatory possession may claim khudkasht"),
            ("s4", "bail may be granted by the high court"),
        ],
        Bm25Params::default(),
    );
    println!("{} segments, avgdl {:.2}", index.segment_count(), index.avgdl());

    let query = "co-sharers in possession";
    for hit in index.score(query, Candidates::All, 10)?.hits() {
        println!("{} {:.4}", hit.id, hit.score);
    }
    let subset: HashSet<String> = ["s2", "s3"].map(String::from).into();
    println!("subset: {:?}", index.score(query, Candidates::Subset(&subset), 10)?.ids());
    Ok(())
}
