//! The triplet correction: binomial form, its block-sum fidelity
//! contribution, the maximum over N and the large-N behaviour.

use pbtlab::closedform::{f_corr, f_corr_contribution, f_ih, f_ih_spin_sum};

fn main() {
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "N", "f_corr", "8*contrib", "F_IH", "spin sum");
    for n in (1..=12).chain([20, 50, 100]) {
        println!(
            "{n:>5} {:>12.8} {:>12.8} {:>12.8} {:>12.8}",
            f_corr(n),
            8.0 * f_corr_contribution(n),
            f_ih(n),
            f_ih_spin_sum(n)
        );
    }
    let best = (1..=20).max_by(|&a, &b| f_corr(a).total_cmp(&f_corr(b))).unwrap();
    println!("argmax over 1..=20: N = {best}, value {:.6}", f_corr(best));
    println!("400 * f_corr(400) = {:.5}", 400.0 * f_corr(400));
    let n = 10_000;
    println!("F_IH(1e4) = {:.6}, 1 - 3/(4N) = {:.6}", f_ih(n), 1.0 - 0.75 / n as f64);
}
