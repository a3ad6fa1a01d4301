//! Learned-code MAP as the quantization weight varies.
//!
//!     cargo run --release --example gamma_sweep

use hashrag::eval::{gamma_sweep, BenchConfig};

fn main() -> hashrag::Result<()> {
    let cfg = BenchConfig::default();
    let gammas = [1.0, 10.0, 100.0, 200.0, 500.0];
    let curve = gamma_sweep(&cfg, &gammas)?;
    println!("gamma,map,stderr,seeds");
    for (gamma, s) in &curve {
        println!("{gamma},{:.4},{:.4},{}", s.mean, s.stderr, s.n);
    }
    let maps: Vec<f64> = curve.iter().map(|(_, s)| s.mean).collect();
    let spread = maps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - maps.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("spread {spread:.4}");
    Ok(())
}
