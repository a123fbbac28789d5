//! Series inverse square root: fidelity gap to the eigensolver PGM as the
//! truncation order grows.

use pbtlab::ensemble::{DephasingParams, SignalEnsemble};
use pbtlab::fidelity::ent_fidelity;
use pbtlab::linops::DEFAULT_RANK_TOL;
use pbtlab::povm::{pgm, pgm_taylor};

fn main() -> pbtlab::Result<()> {
    let ens = SignalEnsemble::noisy(2, DephasingParams::new(0.5, 0.0)?)?;
    let exact = ent_fidelity(&pgm(&ens, DEFAULT_RANK_TOL)?, &ens)?.ent_fidelity;
    println!("eigensolver: {exact:.12}");
    for order in [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 4000] {
        let povm = pgm_taylor(&ens, order)?;
        let f = ent_fidelity(&povm, &ens)?.ent_fidelity;
        let residual = povm.validate_against(&ens).completeness_residual;
        println!("order {order:>5}: {f:.12}  gap {:.3e}  completeness {residual:.1e}", (f - exact).abs());
    }
    Ok(())
}
