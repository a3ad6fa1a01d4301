//! Trains a 64-bit head on a small synthetic corpus and prints the epoch trace.
//!
//!     cargo run --release --example train_codes

use hashrag::eval::{generate, SynthConfig};
use hashrag::{train, TrainConfig};

fn main() -> hashrag::Result<()> {
    let data = generate(&SynthConfig {
        clusters: 4,
        per_cluster: 50,
        dim: 64,
        train_queries_per_cluster: 25,
        ..SynthConfig::default()
    })?;
    let cfg = TrainConfig {
        bits: 64,
        epochs: 10,
        ..TrainConfig::default()
    };
    let trained = train(&data.corpus, &data.embeddings, Some(&data.triples), &cfg)?;
    let r = &trained.report;
    println!("mode {} rows {}", r.mode, r.rows);
    println!("epoch,objective,flips,beta");
    for e in 0..r.objective.len() {
        println!("{},{:.1},{},{:.3}", e + 1, r.objective[e], r.flips[e], r.beta[e]);
    }
    Ok(())
}
