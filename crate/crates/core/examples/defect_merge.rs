//! Folding the completion operator into the ports. On the ideal ensemble
//! this changes nothing; on a dephased one it reproduces the fidelity of
//! the Pauli-channel comparison model.

use pbtlab::closedform::{fidelity_noiseless_povm, kim_fidelity};
use pbtlab::ensemble::{DephasingParams, SignalEnsemble};
use pbtlab::fidelity::ent_fidelity;
use pbtlab::povm::noiseless_povm;

fn main() -> pbtlab::Result<()> {
    let n = 3;
    let povm = noiseless_povm(n)?;
    let merged = povm.merged_defect();
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "|G|", "ideal", "merged", "model", "formula");
    for g in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let p = DephasingParams::new(g, 0.0)?;
        let ens = SignalEnsemble::noisy(n, p)?;
        let plain = ent_fidelity(&povm, &ens)?.ent_fidelity;
        let with_defect = ent_fidelity(&merged, &ens)?.ent_fidelity;
        println!(
            "{g:>5.2} {plain:>10.6} {with_defect:>10.6} {:>10.6} {:>10.6}",
            kim_fidelity(n, g),
            fidelity_noiseless_povm(n, p)
        );
    }
    Ok(())
}
