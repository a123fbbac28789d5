//! Building blocks: the dephased singlet, the port states, their pairwise
//! fidelity and the two-port trace distance.

use pbtlab::ensemble::{decohered_bell, DephasingParams, SignalEnsemble};
use pbtlab::linops::{eig_hermitian, partial_trace, state_fidelity, trace_norm};

fn main() -> pbtlab::Result<()> {
    let params = DephasingParams::new(0.6, 0.8)?;
    let bell = decohered_bell(params);
    let spectrum = eig_hermitian(&bell)?;
    println!("dephased singlet spectrum {:.4?}", spectrum.eigenvalues());
    println!("purity {:.6} (expect {:.6})", bell.trace_product(&bell)?.re, (1.0 + 0.36) / 2.0);
    println!("reduced state of A: {:?}", partial_trace(&bell, &[0])?.matrix());

    for n in 2..=5 {
        let ens = SignalEnsemble::noisy(n, params)?;
        let f = state_fidelity(&ens.states()[0], &ens.states()[n - 1])?;
        println!("N={n}: fidelity between ports 1 and {n} = {f:.12}");
    }
    let ens = SignalEnsemble::noisy(2, params)?;
    let d = trace_norm(&ens.states()[0].sub(&ens.states()[1])?)?;
    println!("N=2 trace distance {d:.12}, sqrt(1+2|G|^2) = {:.12}", (1.0f64 + 2.0 * 0.36).sqrt());
    Ok(())
}
