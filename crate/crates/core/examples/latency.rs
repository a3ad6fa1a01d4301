//! Hashed search against an exact float scan on random data.
//!
//!     cargo run --release --example latency -- --n 100000 --bits 256

use std::time::Instant;

use clap::Parser;
use hashrag::eval::{exact_topk, LshHasher};
use hashrag::{EmbeddingMatrix, HammingIndex, QueryCode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    bits: usize,
    #[arg(long, default_value_t = 256)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 100)]
    alpha: usize,
    #[arg(long, default_value_t = 10)]
    j: usize,
}

fn main() -> hashrag::Result<()> {
    let a = Args::parse();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = |len: usize| -> Vec<f32> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let props = EmbeddingMatrix::new((0..a.n).map(|i| format!("p{i}")).collect(), a.dim, draw(a.n * a.dim))?;
    let queries: Vec<Vec<f32>> = (0..a.queries).map(|_| draw(a.dim)).collect();

    let hasher = LshHasher::new(a.dim, a.bits, 5)?;
    let codes = hasher.codes((0..a.n).map(|i| props.row(i)))?;
    let index = HammingIndex::build(&codes, props.ids().to_vec())?;
    let encoded: Vec<QueryCode> = queries
        .iter()
        .map(|q| hasher.project(q).map(|p| QueryCode::from_real(&p)))
        .collect::<hashrag::Result<_>>()?;

    let t = Instant::now();
    for q in &encoded {
        index.search(q, a.alpha, a.j)?;
    }
    let hashed = t.elapsed().as_secs_f64() * 1e3 / a.queries as f64;
    let t = Instant::now();
    for q in &queries {
        exact_topk(&props, q, a.j);
    }
    let exact = t.elapsed().as_secs_f64() * 1e3 / a.queries as f64;
    println!("hashed {hashed:.3} ms  exact {exact:.3} ms  ratio {:.3}", hashed / exact);
    println!("index {} bytes  floats {} bytes", index.index_bytes(), a.n * a.dim * 4);
    Ok(())
}
