//! Entanglement fidelity by direct trace, and the diagnostics built on it.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::Serialize;

use crate::closedform::{beigi_konig_bound, helstrom_bound_n2, teleport_fidelity};
use crate::ensemble::{psi_minus, psi_plus, DephasingParams, SignalEnsemble, SignalKind};
use crate::error::{domain, Error, Result};
use crate::linops::{
    eig_hermitian, product, trace_norm, trace_of_product, HermitianOp, DEFAULT_RANK_TOL,
};
use crate::povm::{Povm, PovmSource};

/// Largest tolerated imaginary part of `tr(Pi_i eta_i)`.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct FidelityResult {
    pub n_ports: usize,
    pub params: DephasingParams,
    pub povm_source: PovmSource,
    pub ent_fidelity: f64,
    pub teleport_fidelity: f64,
    /// `tr(Pi_i eta_i)` for each port.
    pub per_port_traces: Vec<f64>,
}

impl FidelityResult {
    fn assemble(
        ensemble: &SignalEnsemble,
        source: PovmSource,
        traces: Vec<c64>,
    ) -> Result<Self> {
        let worst = traces.iter().map(|t| t.im.abs()).fold(0.0, f64::max);
        if worst > IMAG_TOL {
            return Err(Error::Numerical {
                message: "trace of a POVM element against a state is not real".into(),
                residual: worst,
            });
        }
        let per_port_traces: Vec<f64> = traces.iter().map(|t| t.re).collect();
        let ent = per_port_traces.iter().sum::<f64>() / 4.0;
        Ok(Self {
            n_ports: ensemble.n_ports(),
            params: ensemble.params(),
            povm_source: source,
            ent_fidelity: ent,
            teleport_fidelity: teleport_fidelity(ent)?,
            per_port_traces,
        })
    }

    /// Largest difference between two per-port traces.
    pub fn port_spread(&self) -> f64 {
        let max = self.per_port_traces.iter().copied().fold(f64::MIN, f64::max);
        let min = self.per_port_traces.iter().copied().fold(f64::MAX, f64::min);
        max - min
    }
}

/// `F = (1/4) sum_i tr(Pi_i eta_i)`.
pub fn ent_fidelity(povm: &Povm, ensemble: &SignalEnsemble) -> Result<FidelityResult> {
    if povm.len() != ensemble.n_ports() || povm.dim() != ensemble.dim() {
        return domain(format!(
            "POVM ({} elements, dim {}) does not match ensemble ({} ports, dim {})",
            povm.len(),
            povm.dim(),
            ensemble.n_ports(),
            ensemble.dim()
        ));
    }
    let traces = povm
        .elements()
        .iter()
        .zip(ensemble.states())
        .map(|(e, s)| e.trace_product(s))
        .collect::<Result<Vec<_>>>()?;
    FidelityResult::assemble(ensemble, povm.source(), traces)
}

/// The factor `T = S^{-1/2}` of a PGM, kept so that the measurement can be
/// scored against many ensembles without forming its elements.
#[derive(Clone, Debug)]
pub struct PreparedPgm {
    root: HermitianOp,
    states: Vec<HermitianOp>,
    source: PovmSource,
}

impl PreparedPgm {
    pub fn new(built_from: &SignalEnsemble, rank_tol: f64) -> Result<Self> {
        let root = eig_hermitian(built_from.average_unnormalized())?
            .with_rank_tol(rank_tol)
            .map_on_support(|l| l.powf(-0.5))?;
        let source = match built_from.kind() {
            SignalKind::Sigma => PovmSource::Noiseless,
            _ => PovmSource::NoiseAdapted,
        };
        Ok(Self {
            root,
            states: built_from.states().to_vec(),
            source,
        })
    }

    /// `tr(T s_i T e_i) = tr((T s_i)(T e_i))`; both products use the
    /// sparsity of the states.
    pub fn fidelity_on(&self, ensemble: &SignalEnsemble) -> Result<FidelityResult> {
        if self.states.len() != ensemble.n_ports() || self.root.dim() != ensemble.dim() {
            return domain("measurement and ensemble differ in size");
        }
        let traces = self
            .states
            .iter()
            .zip(ensemble.states())
            .map(|(s, e)| {
                let ts: Mat<c64> = product(self.root.matrix(), s);
                let te: Mat<c64> = product(self.root.matrix(), e);
                trace_of_product(ts.as_ref(), te.as_ref())
            })
            .collect();
        FidelityResult::assemble(ensemble, self.source, traces)
    }
}

/// Fidelity of the PGM built from `built_from`, measured on `evaluated_on`.
pub fn pgm_fidelity(
    built_from: &SignalEnsemble,
    evaluated_on: &SignalEnsemble,
    rank_tol: f64,
) -> Result<FidelityResult> {
    PreparedPgm::new(built_from, rank_tol)?.fidelity_on(evaluated_on)
}

/// Fidelity of the PGM adapted to the dephased ensemble itself.
pub fn noise_adapted_fidelity(n: usize, params: DephasingParams) -> Result<FidelityResult> {
    let ens = SignalEnsemble::noisy(n, params)?;
    pgm_fidelity(&ens, &ens, DEFAULT_RANK_TOL)
}

/// Fidelity of the ideal PGM on the dephased ensemble, by direct trace.
pub fn noiseless_povm_fidelity(n: usize, params: DephasingParams) -> Result<FidelityResult> {
    let ideal = SignalEnsemble::noiseless(n)?;
    let ens = SignalEnsemble::noisy(n, params)?;
    pgm_fidelity(&ideal, &ens, DEFAULT_RANK_TOL)
}

/// `i (|Psi+><Psi-| - |Psi-><Psi+|)` on `(A_port, B)`, identity elsewhere,
/// scaled like a signal state.
pub fn coherence_operator(port: usize, n: usize) -> Result<HermitianOp> {
    if port == 0 || port > n {
        return domain(format!("port {port} is outside 1..={n}"));
    }
    let (m, p) = (psi_minus(), psi_plus());
    let i = c64::new(0.0, 1.0);
    let block = HermitianOp::from_fn(2, |r, c| i * (p[r] * m[c].conj() - m[r] * p[c].conj()))?;
    Ok(HermitianOp::embed_two_qubit(&block, port - 1, n, n + 1)?.scaled(0.5f64.powi(n as i32 - 1)))
}

/// `|tr(Pi_port K)|` for the triplet-singlet coherence `K`; vanishes for
/// the ideal PGM.
pub fn mixed_term(povm: &Povm, port: usize, n: usize) -> Result<f64> {
    if povm.len() != n || port == 0 || port > n {
        return domain(format!("port {port} is not a valid element of this POVM"));
    }
    let k = coherence_operator(port, n)?;
    Ok(povm.elements()[port - 1].trace_product(&k)?.norm())
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub n_ports: usize,
    pub gamma_abs: f64,
    pub noiseless: f64,
    pub noise_adapted: f64,
    pub beigi_konig: f64,
    /// Only for two ports.
    pub helstrom: Option<f64>,
}

/// Ideal versus adapted PGM at `theta = 0` over a grid of `|Gamma|`.
pub fn compare_noise_adapted(n: usize, gamma_grid: &[f64]) -> Result<Vec<ComparisonRow>> {
    let ideal = PreparedPgm::new(&SignalEnsemble::noiseless(n)?, DEFAULT_RANK_TOL)?;
    gamma_grid
        .par_iter()
        .map(|&g| {
            let params = DephasingParams::new(g, 0.0)?;
            let ens = SignalEnsemble::noisy(n, params)?;
            Ok(ComparisonRow {
                n_ports: n,
                gamma_abs: g,
                noiseless: ideal.fidelity_on(&ens)?.ent_fidelity,
                noise_adapted: pgm_fidelity(&ens, &ens, DEFAULT_RANK_TOL)?.ent_fidelity,
                beigi_konig: beigi_konig_bound(n, g),
                helstrom: (n == 2).then(|| helstrom_bound_n2(g)),
            })
        })
        .collect()
}

/// Interpolated `|Gamma|` values where the adapted and ideal curves cross.
pub fn crossovers(rows: &[ComparisonRow]) -> Vec<f64> {
    rows.windows(2)
        .filter_map(|w| {
            let d0 = w[0].noise_adapted - w[0].noiseless;
            let d1 = w[1].noise_adapted - w[1].noiseless;
            if d0 == 0.0 {
                Some(w[0].gamma_abs)
            } else if d0 * d1 < 0.0 {
                let t = d0 / (d0 - d1);
                Some(w[0].gamma_abs + t * (w[1].gamma_abs - w[0].gamma_abs))
            } else {
                None
            }
        })
        .collect()
}

/// Optimal two-port entanglement fidelity `(1/2) P_succ` with
/// `P_succ = 1/2 + ||eta_1 - eta_2||_1 / 4`.
pub fn helstrom_optimal_n2(ensemble: &SignalEnsemble) -> Result<f64> {
    if ensemble.n_ports() != 2 {
        return domain(format!(
            "Helstrom discrimination needs 2 ports, got {}",
            ensemble.n_ports()
        ));
    }
    let s = ensemble.states();
    let dist = trace_norm(&s[0].sub(&s[1])?)?;
    Ok(0.5 * (0.5 + 0.25 * dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{f_corr_contribution, f_ih, fidelity_noiseless_povm};
    use crate::povm::{noiseless_povm, pgm, random_povm, rotated_noiseless_povm};
    use std::f64::consts::PI;

    fn p(g: f64, t: f64) -> DephasingParams {
        DephasingParams::new(g, t).unwrap()
    }

    #[test]
    fn direct_trace_matches_formula() {
        for n in 2..=4 {
            let povm = noiseless_povm(n).unwrap();
            for (g, t) in [(1.0, 0.0), (1.0, PI), (0.5, 1.0), (0.0, 0.0), (0.3, 2.5)] {
                let ens = SignalEnsemble::noisy(n, p(g, t)).unwrap();
                let r = ent_fidelity(&povm, &ens).unwrap();
                let want = fidelity_noiseless_povm(n, p(g, t));
                assert!((r.ent_fidelity - want).abs() < 1e-12, "n={n} g={g} t={t}");
                assert!(r.port_spread() < 1e-12);
                let fast = noiseless_povm_fidelity(n, p(g, t)).unwrap();
                assert!((fast.ent_fidelity - r.ent_fidelity).abs() < 1e-12);
            }
        }
        let ens = SignalEnsemble::noisy(2, p(1.0, PI)).unwrap();
        let r = ent_fidelity(&noiseless_povm(2).unwrap(), &ens).unwrap();
        assert!((r.ent_fidelity - 0.0111645497).abs() < 1e-10);
        assert!((r.ent_fidelity - f_corr_contribution(2)).abs() < 1e-12);
    }

    #[test]
    fn result_invariants() {
        let ens = SignalEnsemble::noisy(3, p(0.4, 0.2)).unwrap();
        let r = ent_fidelity(&pgm(&ens, DEFAULT_RANK_TOL).unwrap(), &ens).unwrap();
        let sum: f64 = r.per_port_traces.iter().sum();
        assert!((r.ent_fidelity - sum / 4.0).abs() < 1e-12);
        assert!((r.teleport_fidelity - (2.0 * r.ent_fidelity + 1.0) / 3.0).abs() < 1e-12);
        let fast = noise_adapted_fidelity(3, p(0.4, 0.2)).unwrap();
        assert!((fast.ent_fidelity - r.ent_fidelity).abs() < 1e-12);
        let wrong = noiseless_povm(2).unwrap();
        assert!(ent_fidelity(&wrong, &ens).is_err());
    }

    #[test]
    fn adapted_values() {
        let cases = [
            (2, 0.0, 0.375),
            (2, 0.5, 0.3959),
            (2, 1.0, 0.46651),
            (5, 0.5, 0.55154),
            (5, 0.8, 0.67037),
        ];
        for (n, g, want) in cases {
            let r = noise_adapted_fidelity(n, p(g, 0.0)).unwrap();
            assert!((r.ent_fidelity - want).abs() < 5e-5, "n={n} g={g}: {}", r.ent_fidelity);
        }
        let a = noise_adapted_fidelity(3, p(0.6, 0.0)).unwrap().ent_fidelity;
        let b = noise_adapted_fidelity(3, p(0.6, 2.0)).unwrap().ent_fidelity;
        assert!((a - b).abs() < 1e-12);
        assert!((noise_adapted_fidelity(4, p(1.0, 0.0)).unwrap().ent_fidelity - f_ih(4)).abs() < 1e-12);
    }

    #[test]
    fn rotated_povm_removes_phase() {
        for n in [2, 3] {
            for (g, t) in [(0.7, 1.1), (0.4, 2.9), (1.0, PI)] {
                let povm = rotated_noiseless_povm(n, t).unwrap();
                let ens = SignalEnsemble::noisy(n, p(g, t)).unwrap();
                let r = ent_fidelity(&povm, &ens).unwrap();
                assert!((r.ent_fidelity - fidelity_noiseless_povm(n, p(g, 0.0))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_term_vanishes_only_for_pgm() {
        for n in [2, 3] {
            let povm = noiseless_povm(n).unwrap();
            for i in 1..=n {
                assert!(mixed_term(&povm, i, n).unwrap() < 1e-12);
            }
        }
        let control = random_povm(2, 3, 11).unwrap();
        assert!(mixed_term(&control, 1, 2).unwrap() > 1e-4);
    }

    #[test]
    fn helstrom_two_ports() {
        let hb = helstrom_optimal_n2(&SignalEnsemble::noisy(2, p(1.0, 0.0)).unwrap()).unwrap();
        assert!((hb - 0.25 * (1.0 + 3f64.sqrt() / 2.0)).abs() < 1e-12);
        let hb = helstrom_optimal_n2(&SignalEnsemble::noisy(2, p(0.0, 0.0)).unwrap()).unwrap();
        assert!((hb - 0.375).abs() < 1e-12);
        for t in [0.0, 1.0, 2.0, 3.0] {
            let h = helstrom_optimal_n2(&SignalEnsemble::noisy(2, p(0.6, t)).unwrap()).unwrap();
            assert!((h - helstrom_bound_n2(0.6)).abs() < 1e-10);
        }
        assert!(helstrom_optimal_n2(&SignalEnsemble::noisy(3, p(1.0, 0.0)).unwrap()).is_err());
    }

    #[test]
    fn comparison_and_crossover() {
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let rows = compare_noise_adapted(2, &grid).unwrap();
        assert!((rows[10].noiseless - f_ih(2)).abs() < 1e-12);
        assert!((rows[10].noise_adapted - f_ih(2)).abs() < 1e-12);
        for r in &rows {
            let h = r.helstrom.unwrap();
            assert!(r.noiseless <= h + 1e-12 && r.noise_adapted <= h + 1e-12);
            assert!(r.beigi_konig <= r.noise_adapted);
        }
        assert!(rows[2].noise_adapted >= rows[2].noiseless);
    }
}
