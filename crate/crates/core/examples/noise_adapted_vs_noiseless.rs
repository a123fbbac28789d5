//! Ideal PGM versus the PGM built from the dephased ensemble, at theta = 0,
//! together with the purity bound and (for two ports) the optimum.
//!
//!     cargo run --release --example noise_adapted_vs_noiseless -- 9

use pbtlab::fidelity::{compare_noise_adapted, crossovers};

fn main() -> pbtlab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let start = std::time::Instant::now();
    let rows = compare_noise_adapted(n, &grid)?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "|G|", "ideal", "adapted", "BK", "Helstrom");
    for r in &rows {
        let h = r.helstrom.map_or("-".to_string(), |h| format!("{h:.6}"));
        println!(
            "{:>5.2} {:>10.6} {:>10.6} {:>10.6} {:>10}",
            r.gamma_abs, r.noiseless, r.noise_adapted, r.beigi_konig, h
        );
    }
    match crossovers(&rows).as_slice() {
        [] => println!("no crossover on this grid"),
        xs => println!("curves cross near |Gamma| = {xs:.4?}"),
    }
    eprintln!("{} points in {:.1?}", rows.len(), start.elapsed());
    Ok(())
}
