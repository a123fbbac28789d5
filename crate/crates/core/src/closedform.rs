//! Analytic fidelity formulas, the spin-block spectrum of the ideal
//! ensemble average, and the discrimination bounds.
//!
//! Binomial weights `C(N, k) / 2^N` are always formed as a single fused
//! quantity so that nothing overflows for `N` in the tens of thousands.

use serde::Serialize;

use crate::ensemble::DephasingParams;
use crate::error::{domain, Error, Result};

/// Largest `n` for which weights come from an exact floating Pascal row.
const PASCAL_LIMIT: usize = 64;

/// `C(n, k) / 2^n` for `k = 0..=n`.
pub fn binomial_weights(n: usize) -> Vec<f64> {
    if n <= PASCAL_LIMIT {
        let mut row = vec![1.0f64];
        for _ in 0..n {
            let mut next = vec![0.5; row.len() + 1];
            next[0] = 0.5 * row[0];
            for k in 1..row.len() {
                next[k] = 0.5 * (row[k - 1] + row[k]);
            }
            next[row.len()] = 0.5 * row[row.len() - 1];
            row = next;
        }
        return row;
    }
    let mut ln_c = 0.0f64;
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        out.push((ln_c - ln2n).exp());
        if k < n {
            ln_c += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        }
    }
    out
}

fn exact_binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(c)
}

/// Validates `s` for `n` spin-1/2 systems and returns `2s`.
fn twice_spin(n: usize, s: f64) -> Result<usize> {
    let t = 2.0 * s;
    if !(t >= 0.0) || t.fract() != 0.0 || t > n as f64 {
        return domain(format!("spin {s} is not admissible for {n} qubits"));
    }
    let t = t as usize;
    if !(n - t).is_multiple_of(2) {
        return domain(format!("spin {s} has the wrong parity for {n} qubits"));
    }
    Ok(t)
}

fn degeneracy_twice(n: usize, twice_s: usize) -> Option<u128> {
    // g = C(n, n/2 - s) (2s + 1) / (n/2 + s + 1)
    let lower = ((n - twice_s) / 2) as u64;
    let c = exact_binomial(n as u64, lower)?;
    let num = c.checked_mul(twice_s as u128 + 1)?;
    Some(num / ((n + twice_s) / 2 + 1) as u128)
}

/// Multiplicity of total spin `s` among `n` spin-1/2 systems.
pub fn degeneracy(n: usize, s: f64) -> Result<u64> {
    let t = twice_spin(n, s)?;
    degeneracy_twice(n, t)
        .and_then(|g| u64::try_from(g).ok())
        .ok_or_else(|| Error::Numerical {
            message: format!("degeneracy({n}, {s}) overflows u64"),
            residual: f64::INFINITY,
        })
}

/// `g^[n](s) / 2^n` in floating point, zero for inadmissible spins.
fn degeneracy_weight(n: usize, twice_s: i64, weights: &[f64]) -> f64 {
    if twice_s < 0 || twice_s as usize > n || !(n - twice_s as usize).is_multiple_of(2) {
        return 0.0;
    }
    let t = twice_s as usize;
    weights[(n - t) / 2] * (t as f64 + 1.0) / ((n + t) / 2 + 1) as f64
}

/// Spins `s` (as `2s`) available to `m` qubits, ascending.
fn spins_twice(m: usize) -> impl Iterator<Item = usize> {
    (m % 2..=m).step_by(2)
}

/// Ideal-case entanglement fidelity in its binomial form.
pub fn f_ih(n: usize) -> f64 {
    let nf = n as f64;
    binomial_weights(n)
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let kf = k as f64;
            let a = (nf - 2.0 * kf - 1.0) / (kf + 1.0).sqrt();
            let b = (nf - 2.0 * kf + 1.0) / (nf - kf + 1.0).sqrt();
            w * (a + b) * (a + b)
        })
        .sum::<f64>()
        / 8.0
}

/// The same quantity assembled from the spin blocks of the ideal average.
pub fn f_ih_spin_sum(n: usize) -> f64 {
    let nf = n as f64;
    let m = n - 1;
    let w = binomial_weights(m);
    spins_twice(m)
        .map(|t| {
            let s = t as f64 / 2.0;
            let g = degeneracy_weight(m, t as i64, &w);
            let c = s / (2.0 * s + 1.0) / (nf - 2.0 * s + 1.0).sqrt()
                + (s + 1.0) / (2.0 * s + 1.0) / (nf + 2.0 * s + 3.0).sqrt();
            (2.0 * s + 1.0) * g * c * c
        })
        .sum::<f64>()
        * nf
}

/// The correction term in its printed binomial form.
///
/// The fidelity contribution of the triplet admixture is one eighth of
/// this value; see [`f_corr_contribution`].
pub fn f_corr(n: usize) -> f64 {
    let nf = n as f64;
    binomial_weights(n)
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let kf = k as f64;
            let d = 1.0 / (kf + 1.0).sqrt() - 1.0 / (nf - kf + 1.0).sqrt();
            w * ((nf - 2.0 * kf).powi(2) - 1.0) * d * d
        })
        .sum::<f64>()
        / 3.0
}

/// `(1/4) sum_i tr Pi_i omega_i` for the ideal PGM, from the spin blocks.
///
/// Equals `f_corr(n) / 8` identically: the binomial form counts each
/// block twice under `k <-> N - k` and omits the overall `1/4`.
pub fn f_corr_contribution(n: usize) -> f64 {
    let nf = n as f64;
    let m = n - 1;
    let w = binomial_weights(m);
    spins_twice(m)
        .map(|t| {
            let s = t as f64 / 2.0;
            let g = degeneracy_weight(m, t as i64, &w);
            let d = 1.0 / (nf - 2.0 * s + 1.0).sqrt() - 1.0 / (nf + 2.0 * s + 3.0).sqrt();
            g * s * (s + 1.0) / (2.0 * s + 1.0) * d * d
        })
        .sum::<f64>()
        * nf
        / 3.0
}

/// Entanglement fidelity of the ideal PGM applied to the dephased ensemble.
/// Depends on the parameters only through `|Gamma| cos theta`.
pub fn fidelity_noiseless_povm(n: usize, params: DephasingParams) -> f64 {
    let x = params.real_part();
    0.5 * (1.0 + x) * f_ih(n) + 0.5 * (1.0 - x) * f_corr_contribution(n)
}

/// Average teleportation fidelity `(2F + 1) / 3`.
pub fn teleport_fidelity(ent_fid: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&ent_fid) {
        return domain(format!("entanglement fidelity {ent_fid} is outside [0, 1]"));
    }
    Ok((2.0 * ent_fid + 1.0) / 3.0)
}

/// One total-spin sector `s` of the remaining `N - 1` ports.
#[derive(Clone, Debug, Serialize)]
pub struct SpinBlock {
    pub s: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub degeneracy_minus: u64,
    pub degeneracy_plus: u64,
    /// `(2s+1) g^[N-1](s)` and `(2s+1) g^[N-1](s-1)`; empty at `s = 0`.
    pub families_minus: [u64; 2],
    /// `(2s+1) g^[N-1](s)` and `(2s+1) g^[N-1](s+1)`.
    pub families_plus: [u64; 2],
}

/// Spectrum of the ideal unnormalized average `sum_i sigma_i`.
#[derive(Clone, Debug, Serialize)]
pub struct SpinBlockSpectrum {
    pub n_ports: usize,
    pub blocks: Vec<SpinBlock>,
    pub kernel_dim: u64,
}

impl SpinBlockSpectrum {
    /// Nonzero eigenvalues with multiplicities, descending, then the kernel.
    pub fn eigenvalues_with_multiplicity(&self) -> Vec<(f64, u64)> {
        let mut out: Vec<(f64, u64)> = self
            .blocks
            .iter()
            .flat_map(|b| [(b.lambda_minus, b.degeneracy_minus), (b.lambda_plus, b.degeneracy_plus)])
            .filter(|&(_, m)| m > 0)
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut merged: Vec<(f64, u64)> = Vec::new();
        for (l, m) in out {
            match merged.last_mut() {
                Some(last) if (last.0 - l).abs() <= 1e-15 * l.abs().max(1.0) => last.1 += m,
                _ => merged.push((l, m)),
            }
        }
        if self.kernel_dim > 0 {
            merged.push((0.0, self.kernel_dim));
        }
        merged
    }

    /// Every eigenvalue repeated by multiplicity, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues_with_multiplicity()
            .into_iter()
            .flat_map(|(l, m)| std::iter::repeat_n(l, m as usize))
            .collect()
    }

    pub fn support_dim(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| b.degeneracy_minus + b.degeneracy_plus)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.lambda_minus * b.degeneracy_minus as f64 + b.lambda_plus * b.degeneracy_plus as f64)
            .sum()
    }
}

/// Block eigenvalues and multiplicities of the ideal average for `n` ports.
pub fn spin_block_spectrum(n: usize) -> Result<SpinBlockSpectrum> {
    if n == 0 {
        return domain("at least one port is required");
    }
    let overflow = || Error::Numerical {
        message: format!("multiplicities for {n} ports overflow u64"),
        residual: f64::INFINITY,
    };
    let g = |m: usize, t: i64| -> Result<u64> {
        if t < 0 || t as usize > m {
            return Ok(0);
        }
        degeneracy_twice(m, t as usize)
            .and_then(|v| u64::try_from(v).ok())
            .ok_or_else(overflow)
    };
    let m = n - 1;
    let scale = 2f64.powi(n as i32 + 1);
    let mut blocks = Vec::new();
    for t in spins_twice(m) {
        let ti = t as i64;
        let s = t as f64 / 2.0;
        let mult = (t + 1) as u64;
        let families_minus = if t == 0 {
            [0, 0]
        } else {
            [mult * g(m, ti)?, mult * g(m, ti - 2)?]
        };
        let families_plus = [mult * g(m, ti)?, mult * g(m, ti + 2)?];
        blocks.push(SpinBlock {
            s,
            lambda_minus: (n as f64 - 2.0 * s + 1.0) / scale,
            lambda_plus: (n as f64 + 2.0 * s + 3.0) / scale,
            degeneracy_minus: families_minus.iter().sum(),
            degeneracy_plus: families_plus.iter().sum(),
            families_minus,
            families_plus,
        });
    }
    let total = 1u64.checked_shl(n as u32 + 1).ok_or_else(overflow)?;
    let support: u64 = blocks
        .iter()
        .map(|b| b.degeneracy_minus + b.degeneracy_plus)
        .sum();
    Ok(SpinBlockSpectrum {
        n_ports: n,
        blocks,
        kernel_dim: total - support,
    })
}

/// Fidelity of the comparison model with real decoherence factor `gamma_abs`.
pub fn kim_fidelity(n: usize, gamma_abs: f64) -> f64 {
    (2.0 * gamma_abs + 1.0) / 3.0 * f_ih(n) + (1.0 - gamma_abs) / 6.0
}

/// Purity/rank lower bound on the PGM entanglement fidelity. Returned
/// unclamped, so it is negative (vacuous) for small `n`.
pub fn beigi_konig_bound(n: usize, gamma_abs: f64) -> f64 {
    0.5 * (1.0 - (1.0 + 2.0 * gamma_abs * gamma_abs) / n as f64)
}

/// Success-probability lower bound `1 - (n-1)/4` from pairwise fidelity 1/2.
pub fn knill_barnum_bound(n: usize) -> f64 {
    1.0 - (n as f64 - 1.0) / 4.0
}

/// Optimal two-port entanglement fidelity, independent of `theta`.
pub fn helstrom_bound_n2(gamma_abs: f64) -> f64 {
    0.25 * (1.0 + (1.0 + 2.0 * gamma_abs * gamma_abs).sqrt() / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn degeneracy_examples() {
        assert_eq!(degeneracy(2, 1.0).unwrap(), 1);
        assert_eq!(degeneracy(2, 0.0).unwrap(), 1);
        assert_eq!(degeneracy(5, 0.5).unwrap(), 5);
        assert_eq!(degeneracy(6, 0.0).unwrap(), 5);
        assert!(degeneracy(2, 0.5).is_err());
        assert!(degeneracy(2, 2.0).is_err());
        assert!(degeneracy(3, 0.25).is_err());
        for n in 1..=10usize {
            let total: u64 = spins_twice(n)
                .map(|t| (t as u64 + 1) * degeneracy(n, t as f64 / 2.0).unwrap())
                .sum();
            assert_eq!(total, 1 << n);
        }
    }

    #[test]
    fn weights_are_consistent_across_the_switch() {
        for n in [10, 64, 65, 200] {
            let w = binomial_weights(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "n={n}");
        }
        let a = binomial_weights(64);
        let mut ln_c = 0.0f64;
        for (k, w) in a.iter().enumerate() {
            let via_log = (ln_c - 64.0 * std::f64::consts::LN_2).exp();
            assert!((via_log - w).abs() <= 1e-12 * w.max(1e-300));
            if k < 64 {
                ln_c += ((64 - k) as f64).ln() - ((k + 1) as f64).ln();
            }
        }
    }

    #[test]
    fn f_ih_values() {
        assert!((f_ih(1) - 0.25).abs() < 1e-15);
        assert!((f_ih(2) - (0.25 + 3f64.sqrt() / 8.0)).abs() < 1e-15);
        assert!((f_ih(3) - 0.625).abs() < 1e-15);
        assert!((f_ih(4) - 0.732838894363083).abs() < 1e-13);
        for n in 1..=40 {
            assert!((f_ih(n) - f_ih_spin_sum(n)).abs() < 1e-13, "n={n}");
        }
        let n = 10_000;
        let asym = 1.0 - 3.0 / (4.0 * n as f64);
        assert!((f_ih(n) - asym).abs() <= 0.1 * asym);
    }

    #[test]
    fn f_corr_values() {
        let f2 = (1.0 / 12.0) * 2.0 * 3.0 * (1.0 - 1.0 / 3f64.sqrt()).powi(2);
        assert!((f_corr(2) - f2).abs() < 1e-15);
        assert!((f_corr(3) - 1.0 / 6.0).abs() < 1e-14);
        assert!((f_corr(6) - 0.2327402).abs() < 1e-6);
        assert!((f_corr(7) - 0.2242872).abs() < 1e-6);
        assert!((400.0 * f_corr(400) - 1.99627).abs() < 1e-4);
        for n in 1..=60 {
            assert!((f_corr_contribution(n) - f_corr(n) / 8.0).abs() < 1e-14, "n={n}");
        }
        assert!((f_corr_contribution(2) - 0.0111645497).abs() < 1e-10);
    }

    #[test]
    fn f_corr_shape() {
        for n in 6..200 {
            assert!(f_corr(n + 1) < f_corr(n), "n={n}");
        }
        assert!(f_corr(1) < f_corr(2) && f_corr(5) < f_corr(6));
        for n in [1, 10, 100, 1000] {
            for v in [f_ih(n), f_corr(n)] {
                assert!(v.is_finite() && (0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn noiseless_povm_formula() {
        let p = |g, t| DephasingParams::new(g, t).unwrap();
        for n in [2, 5, 9] {
            assert!((fidelity_noiseless_povm(n, p(1.0, 0.0)) - f_ih(n)).abs() < 1e-15);
            assert!((fidelity_noiseless_povm(n, p(1.0, PI)) - f_corr_contribution(n)).abs() < 1e-15);
            let mid = 0.5 * (f_ih(n) + f_corr_contribution(n));
            assert!((fidelity_noiseless_povm(n, p(0.0, 1.3)) - mid).abs() < 1e-15);
        }
        assert!((fidelity_noiseless_povm(2, p(0.5, 1.0)) - 0.3003410066).abs() < 1e-10);
    }

    #[test]
    fn teleport_conversion() {
        assert_eq!(teleport_fidelity(1.0).unwrap(), 1.0);
        assert!((teleport_fidelity(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((teleport_fidelity(0.2327).unwrap() - 0.48846666666).abs() < 1e-9);
        assert!(teleport_fidelity(1.5).is_err());
        assert!(teleport_fidelity(-0.1).is_err());
    }

    #[test]
    fn spectrum_small_cases() {
        let sp = spin_block_spectrum(1).unwrap();
        assert_eq!(sp.eigenvalues_with_multiplicity(), vec![(1.0, 1), (0.0, 3)]);
        let sp = spin_block_spectrum(2).unwrap();
        assert_eq!(sp.eigenvalues_with_multiplicity(), vec![(0.75, 2), (0.25, 2), (0.0, 4)]);
        let sp = spin_block_spectrum(3).unwrap();
        assert_eq!(
            sp.eigenvalues_with_multiplicity(),
            vec![(0.5, 3), (0.375, 2), (0.125, 6), (0.0, 5)]
        );
        for n in 1..=12 {
            let sp = spin_block_spectrum(n).unwrap();
            assert_eq!(sp.kernel_dim, n as u64 + 2);
            assert!((sp.trace() - n as f64).abs() < 1e-12);
            assert_eq!(sp.eigenvalues().len(), 1 << (n + 1));
        }
        assert!(spin_block_spectrum(0).is_err());
    }

    #[test]
    fn kim_and_bounds() {
        for n in [2, 9] {
            assert!((kim_fidelity(n, 1.0) - f_ih(n)).abs() < 1e-15);
            assert!((kim_fidelity(n, 0.0) - (f_ih(n) / 3.0 + 1.0 / 6.0)).abs() < 1e-15);
        }
        assert!((beigi_konig_bound(9, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((beigi_konig_bound(9, 0.0) - 4.0 / 9.0).abs() < 1e-15);
        assert!((beigi_konig_bound(2, 1.0) + 0.25).abs() < 1e-15);
        assert_eq!(knill_barnum_bound(2), 0.75);
        assert_eq!(knill_barnum_bound(3), 0.5);
        assert_eq!(knill_barnum_bound(5), 0.0);
        assert!((helstrom_bound_n2(1.0) - 0.25 * (1.0 + 3f64.sqrt() / 2.0)).abs() < 1e-15);
        assert_eq!(helstrom_bound_n2(0.0), 0.375);
        assert!((helstrom_bound_n2(1.0) - f_ih(2)).abs() < 1e-15);
    }
}
