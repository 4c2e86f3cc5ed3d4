//! Build an HNSW graph over random unit vectors and measure recall@10
//! against exact search.
//!
//! cargo run --release --example hnsw -- [n] [ef]

use std::collections::HashSet;

use jurisrag::dense::{search_flat, HnswIndex, HnswParams, VectorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(2000), |a| a.parse())?;
    let ef: usize = args.next().map_or(Ok(128), |a| a.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut set = VectorSet::new(768);
    for i in 0..n {
        set.push(format!("v{i}"), &unit(&mut rng, 768))?;
    }
    let params = HnswParams::dense_only();
    let index = HnswIndex::build(&set, params)?;
    println!("{n} vectors, {} layers", index.max_level() + 1);

    let mut found = 0;
    for _ in 0..100 {
        let q = unit(&mut rng, 768);
        let flat = search_flat(&set, params.metric, &q, 10)?;
        let exact: HashSet<&str> = flat.ids().into_iter().collect();
        let approx = index.search(&q, ef, 10)?;
        found += approx.ids().iter().filter(|id| exact.contains(*id)).count();
    }
    println!("recall@10 at ef={ef}: {:.3}", found as f64 / 1000.0);
    Ok(())
}
