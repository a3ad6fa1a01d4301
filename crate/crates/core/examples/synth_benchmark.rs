//! Learned codes vs. LSH vs. exact search on clustered synthetic data.
//!
//!     cargo run --release --example synth_benchmark -- --seeds 3

use clap::Parser;
use hashrag::eval::{run_benchmark, table_csv, BenchConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    query_noise_ratio: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    train_queries: Option<usize>,
}

fn main() -> hashrag::Result<()> {
    let args = Args::parse();
    let mut cfg = BenchConfig {
        seeds: (1..=args.seeds).collect(),
        ..BenchConfig::default()
    };
    if let Some(b) = args.bits {
        cfg.train.bits = b;
    }
    if let Some(d) = args.dim {
        cfg.synth.dim = d;
    }
    if let Some(x) = args.noise {
        cfg.synth.noise = x;
    }
    if let Some(x) = args.query_noise_ratio {
        cfg.synth.query_noise_ratio = x;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(x) = args.lr {
        cfg.train.learning_rate = x;
    }
    if let Some(x) = args.gamma {
        cfg.train.gamma = x;
    }
    if let Some(x) = args.batch {
        cfg.train.batch_size = x;
    }
    if let Some(x) = args.train_queries {
        cfg.synth.train_queries_per_cluster = x;
    }

    let started = std::time::Instant::now();
    let out = run_benchmark(&cfg)?;
    for run in &out.runs {
        println!("seed {}", run.seed);
        print!("{}", table_csv(&[run.learned.clone(), run.lsh.clone(), run.exact.clone()]));
    }
    let (learned, lsh, exact) = out.recall(10);
    println!(
        "recall@10  learned {:.3} ± {:.3}  lsh {:.3} ± {:.3}  exact {:.3} ± {:.3}  (n = {})",
        learned.mean, learned.stderr, lsh.mean, lsh.stderr, exact.mean, exact.stderr, learned.n
    );
    let (learned, lsh, exact) = out.map();
    println!(
        "MAP        learned {:.3}  lsh {:.3}  exact {:.3}",
        learned.mean, lsh.mean, exact.mean
    );
    println!("{:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
