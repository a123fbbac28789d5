//! Ideal measurement on dephased signal states: closed form against a
//! direct trace over a small (|Gamma|, theta) grid.
//!
//!     cargo run --release --example noiseless_surface -- 5

use pbtlab::closedform::{fidelity_noiseless_povm, teleport_fidelity};
use pbtlab::ensemble::{DephasingParams, SignalEnsemble};
use pbtlab::fidelity::ent_fidelity;
use pbtlab::povm::noiseless_povm;

fn main() -> pbtlab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let povm = noiseless_povm(n)?;
    println!("N = {n}");
    println!("{:>6} {:>7} {:>12} {:>12} {:>10}", "|G|", "theta", "direct", "formula", "f");
    for g in [0.0, 0.5, 1.0] {
        for t in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let params = DephasingParams::new(g, t)?;
            let ens = SignalEnsemble::noisy(n, params)?;
            let direct = ent_fidelity(&povm, &ens)?.ent_fidelity;
            let formula = fidelity_noiseless_povm(n, params);
            println!(
                "{g:>6.2} {t:>7.4} {direct:>12.9} {formula:>12.9} {:>10.6}",
                teleport_fidelity(direct)?
            );
        }
    }
    Ok(())
}
