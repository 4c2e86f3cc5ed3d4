//! Deterministic stub embeddings and fp16 quantization.
//!
//! cargo run --example embeddings

use jurisrag::embedding::{quantize_fp16, EmbeddingProvider, StubEmbedder, EMBEDDING_DIM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let texts: Vec<String> = [
        "possession of one co-sharer is possession of all",
        "co-sharer in possession of joint land",
        "bail under section 439",
    ]
    .map(String::from)
    .to_vec();
    let vectors = StubEmbedder.embed(&texts)?;
    println!("dim {EMBEDDING_DIM}, norm {:.6}", vectors[0].norm());
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            print!("{:.3} ", a.cosine(b));
        }
    }
    println!();
    let half = quantize_fp16(&vectors[0]);
    println!("fp16 cosine to fp32: {:.6}", half.cosine(&vectors[0]));
    Ok(())
}
