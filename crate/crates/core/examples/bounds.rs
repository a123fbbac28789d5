//! Two ports: measured fidelities against the Helstrom optimum, the purity
//! bound and the pairwise-fidelity bound on success probability.

use pbtlab::closedform::{beigi_konig_bound, helstrom_bound_n2, knill_barnum_bound};
use pbtlab::ensemble::{DephasingParams, SignalEnsemble};
use pbtlab::fidelity::{helstrom_optimal_n2, noise_adapted_fidelity, noiseless_povm_fidelity};

fn main() -> pbtlab::Result<()> {
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "|G|", "BK", "ideal", "adapted", "optimum", "formula");
    for k in 0..=10 {
        let g = k as f64 / 10.0;
        let p = DephasingParams::new(g, 0.0)?;
        let ideal = noiseless_povm_fidelity(2, p)?.ent_fidelity;
        let adapted = noise_adapted_fidelity(2, p)?.ent_fidelity;
        let opt = helstrom_optimal_n2(&SignalEnsemble::noisy(2, p)?)?;
        println!(
            "{g:>5.1} {:>9.5} {ideal:>9.5} {adapted:>9.5} {opt:>9.5} {:>9.5}",
            beigi_konig_bound(2, g),
            helstrom_bound_n2(g)
        );
    }
    for n in [2, 3, 4, 5] {
        println!("N={n}: success probability >= {}", knill_barnum_bound(n));
    }
    Ok(())
}
