//! IVF search: probing every cell reproduces exact search.
//!
//! cargo run --release --example ivf

use jurisrag::dense::{search_flat, IvfIndex, IvfParams, Metric, VectorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut set = VectorSet::new(64);
    for i in 0..1000 {
        let v: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        set.push(format!("v{i}"), &v)?;
    }
    let params = IvfParams::staged_hybrid().scaled_to(set.len());
    let index = IvfIndex::build(&set, params)?;
    println!("nlist {} nprobe {}", index.params().nlist, index.params().nprobe);

    let q: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let exact = search_flat(&set, Metric::L2, &q, 5)?;
    for nprobe in [1, params.nprobe, params.nlist] {
        let hits = index.search(&q, nprobe, 5)?;
        println!("nprobe {nprobe:>2}: {:?} exact={}", hits.ids(), hits.ids() == exact.ids());
    }
    Ok(())
}
