//! Spin-block eigenvalues of the ideal ensemble average next to a dense
//! diagonalization.

use pbtlab::closedform::spin_block_spectrum;
use pbtlab::ensemble::SignalEnsemble;
use pbtlab::linops::eigenvalues;

fn main() -> pbtlab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let spectrum = spin_block_spectrum(n)?;
    for b in &spectrum.blocks {
        println!(
            "s = {:<4} lambda- = {:.6} (x{:<4}) lambda+ = {:.6} (x{})",
            b.s, b.lambda_minus, b.degeneracy_minus, b.lambda_plus, b.degeneracy_plus
        );
    }
    println!("kernel dimension {}", spectrum.kernel_dim);

    let dense = eigenvalues(SignalEnsemble::noiseless(n)?.average_unnormalized())?;
    let formula = spectrum.eigenvalues();
    let worst = dense
        .iter()
        .zip(&formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |dense - formula| = {worst:.2e} over {} eigenvalues", dense.len());
    Ok(())
}
