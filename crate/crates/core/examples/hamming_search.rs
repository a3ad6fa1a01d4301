//! Builds an index over random codes and runs one radius-expanding search.
//!
//!     cargo run --release --example hamming_search

use hashrag::codes::CodeMatrix;
use hashrag::{HammingIndex, QueryCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hashrag::Result<()> {
    let (n, bits) = (20_000, 128);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let signs: Vec<i8> = (0..n * bits).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let codes = CodeMatrix::new(n, bits, signs)?;
    let index = HammingIndex::build(&codes, (0..n).map(|i| format!("p{i}")).collect())?;

    // A real-valued query near row 42, so reranking has something to use.
    let real: Vec<f32> = codes.row(42).iter().map(|&s| f32::from(s) + rng.random_range(-0.9..0.9)).collect();
    let result = index.search(&QueryCode::from_real(&real), 200, 5)?;
    println!(
        "radius {} candidates {} in {} us",
        result.stats.radius,
        result.stats.candidates,
        result.stats.nanos / 1000
    );
    for c in &result.ranked {
        println!("{} distance {} score {:.2}", index.prop_id(c.row), c.distance, c.score);
    }
    Ok(())
}
