//! Measurement operator sets for port discrimination.

use faer::{c64, Mat};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ensemble::{phase_rotation, SignalEnsemble, SignalKind};
use crate::error::{domain, Result};
use crate::linops::{
    eig_hermitian, eigenvalues, frobenius, sandwich, HermitianOp, DEFAULT_RANK_TOL,
};

/// Eigenvalues of `Delta` in `(-DEFECT_CLAMP * lambda_max, 0)` are set to zero.
const DEFECT_CLAMP: f64 = 1e-10;

/// Positivity slack, relative to the largest eigenvalue of each element.
pub const PSD_TOL: f64 = 1e-10;
/// Frobenius tolerance on `sum Pi_i + Delta - I`.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Largest admissible `tr(Delta eta_i)`.
pub const DEFECT_OVERLAP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmSource {
    Noiseless,
    NoiseAdapted,
    Taylor,
    /// Assembled by the caller or drawn at random.
    Custom,
}

/// `N` port elements plus the completion `Delta` that belongs to no port.
#[derive(Clone, Debug)]
pub struct Povm {
    elements: Vec<HermitianOp>,
    defect: HermitianOp,
    rank_tol: f64,
    source: PovmSource,
}

impl Povm {
    /// Checks only that all operators share one dimension.
    pub fn from_parts(
        elements: Vec<HermitianOp>,
        defect: HermitianOp,
        rank_tol: f64,
        source: PovmSource,
    ) -> Result<Self> {
        if elements.is_empty() {
            return domain("a POVM needs at least one element");
        }
        if elements.iter().any(|e| e.dim() != defect.dim()) {
            return domain("POVM elements and defect differ in dimension");
        }
        Ok(Self {
            elements,
            defect,
            rank_tol,
            source,
        })
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    pub fn defect(&self) -> &HermitianOp {
        &self.defect
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn source(&self) -> PovmSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.defect.dim()
    }

    /// Conjugates every operator by `R(theta)` on the last qubit.
    pub fn rotated(&self, theta: f64) -> Result<Self> {
        let r = phase_rotation(theta);
        let q = self.defect.qubit_count() - 1;
        Ok(Self {
            elements: self
                .elements
                .iter()
                .map(|e| e.conjugate_local(&r, q))
                .collect::<Result<_>>()?,
            defect: self.defect.conjugate_local(&r, q)?,
            rank_tol: self.rank_tol,
            source: self.source,
        })
    }

    /// Adds `Delta / N` to each element, leaving a zero defect.
    pub fn merged_defect(&self) -> Self {
        let share = 1.0 / self.elements.len() as f64;
        Self {
            elements: self
                .elements
                .iter()
                .map(|e| e.add_scaled(&self.defect, share).expect("same dimension"))
                .collect(),
            defect: HermitianOp::zeros(self.defect.qubit_count()),
            rank_tol: self.rank_tol,
            source: self.source,
        }
    }

    /// Positivity and completeness; the defect overlap is measured against
    /// the elements themselves.
    pub fn validate(&self) -> PovmReport {
        let overlap = self
            .elements
            .iter()
            .map(|e| self.defect.trace_product(e).map(|v| v.re).unwrap_or(f64::NAN))
            .fold(0.0, f64::max);
        self.report(overlap)
    }

    /// As [`Povm::validate`], with the overlap taken against `ensemble`.
    pub fn validate_against(&self, ensemble: &SignalEnsemble) -> PovmReport {
        let overlap = ensemble
            .states()
            .iter()
            .map(|s| self.defect.trace_product(s).map(|v| v.re).unwrap_or(f64::NAN))
            .fold(0.0, f64::max);
        self.report(overlap)
    }

    fn report(&self, defect_overlap: f64) -> PovmReport {
        let min_relative = |op: &HermitianOp| -> f64 {
            match eigenvalues(op) {
                Ok(v) => {
                    let top = v.first().copied().unwrap_or(0.0).abs();
                    let low = v.last().copied().unwrap_or(0.0);
                    if top > 0.0 {
                        low / top
                    } else {
                        low
                    }
                }
                Err(_) => f64::NAN,
            }
        };
        let element_min_eigenvalues: Vec<f64> = self.elements.iter().map(min_relative).collect();
        let defect_min_eigenvalue = min_relative(&self.defect);
        let dim = self.dim();
        let mut total = self.defect.matrix().to_owned();
        for e in &self.elements {
            total += e.matrix();
        }
        let residual = frobenius((total - Mat::<c64>::identity(dim, dim)).as_ref());
        let psd_ok = element_min_eigenvalues
            .iter()
            .chain(std::iter::once(&defect_min_eigenvalue))
            .all(|&m| m >= -PSD_TOL);
        PovmReport {
            element_min_eigenvalues,
            defect_min_eigenvalue,
            completeness_residual: residual,
            defect_overlap,
            passed: psd_ok && residual <= COMPLETENESS_TOL && defect_overlap <= DEFECT_OVERLAP_TOL,
        }
    }
}

/// Outcome of [`Povm::validate`]. Minimum eigenvalues are relative to the
/// largest eigenvalue of the same operator.
#[derive(Clone, Debug, Serialize)]
pub struct PovmReport {
    pub element_min_eigenvalues: Vec<f64>,
    pub defect_min_eigenvalue: f64,
    pub completeness_residual: f64,
    pub defect_overlap: f64,
    pub passed: bool,
}

fn source_of(ensemble: &SignalEnsemble) -> PovmSource {
    match ensemble.kind() {
        SignalKind::Sigma => PovmSource::Noiseless,
        _ => PovmSource::NoiseAdapted,
    }
}

fn check_psd(ensemble: &SignalEnsemble) -> Result<()> {
    for (i, s) in ensemble.states().iter().enumerate() {
        let v = eigenvalues(s)?;
        let top = v.first().copied().unwrap_or(0.0);
        let low = v.last().copied().unwrap_or(0.0);
        if low < -DEFAULT_RANK_TOL * top.abs().max(1.0) {
            return domain(format!(
                "ensemble member {} is not positive semidefinite (eigenvalue {low:e})",
                i + 1
            ));
        }
    }
    Ok(())
}

/// `Pi_i = S^{-1/2} eta_i S^{-1/2}` with `S = sum_i eta_i` inverted on its
/// support; `Delta` is the projector onto the kernel of `S`.
pub fn pgm(ensemble: &SignalEnsemble, rank_tol: f64) -> Result<Povm> {
    check_psd(ensemble)?;
    let spectrum = eig_hermitian(ensemble.average_unnormalized())?.with_rank_tol(rank_tol);
    let root = spectrum.map_on_support(|l| l.powf(-0.5))?;
    let elements = ensemble
        .states()
        .iter()
        .map(|s| sandwich(&root, s))
        .collect();
    Ok(Povm {
        elements,
        defect: spectrum.kernel_projector(),
        rank_tol,
        source: source_of(ensemble),
    })
}

/// The PGM of the ideal singlet ensemble.
pub fn noiseless_povm(n: usize) -> Result<Povm> {
    pgm(&SignalEnsemble::noiseless(n)?, DEFAULT_RANK_TOL)
}

/// The ideal PGM conjugated by `R(theta)` on Bob's qubit, so that it is
/// matched to an ensemble dephased with phase `theta`.
pub fn rotated_noiseless_povm(n: usize, theta: f64) -> Result<Povm> {
    noiseless_povm(n)?.rotated(theta)
}

/// Coefficients of `(1 + x)^{-1/2} = sum_k c_k x^k`.
pub fn inverse_sqrt_series(order: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(order + 1);
    c.push(1.0);
    for k in 1..=order {
        let prev = c[k - 1];
        c.push(prev * (-0.5 - (k as f64 - 1.0)) / k as f64);
    }
    c
}

/// PGM with the inverse square root of the normalized average replaced by
/// its binomial series about the identity, truncated at `order`.
///
/// The series diverges on the kernel of the average, but those directions
/// are annihilated by the signal states in `T eta_i T`.
pub fn pgm_taylor(ensemble: &SignalEnsemble, order: usize) -> Result<Povm> {
    if order < 1 {
        return domain("Taylor order must be at least 1");
    }
    let avg = ensemble.average();
    let dim = avg.dim();
    let mut x = avg.matrix().to_owned();
    for i in 0..dim {
        x[(i, i)] -= c64::new(1.0, 0.0);
    }
    let coeffs = inverse_sqrt_series(order);
    let mut acc = Mat::<c64>::identity(dim, dim) * faer::Scale(c64::new(coeffs[order], 0.0));
    for &c in coeffs[..order].iter().rev() {
        acc = &acc * &x;
        for i in 0..dim {
            acc[(i, i)] += c64::new(c, 0.0);
        }
    }
    let t = HermitianOp::hermitized(acc);
    let share = 1.0 / ensemble.n_ports() as f64;
    let elements: Vec<HermitianOp> = ensemble
        .states()
        .iter()
        .map(|s| sandwich(&t, s).scaled(share))
        .collect();
    let mut rest = HermitianOp::identity(avg.qubit_count());
    for e in &elements {
        rest = rest.sub(e)?;
    }
    let spectrum = eig_hermitian(&rest)?;
    let cut = DEFECT_CLAMP * spectrum.eigenvalues().first().copied().unwrap_or(0.0).abs();
    let defect = spectrum
        .with_rank_tol(0.0)
        .map_all(|l| if l < 0.0 && l > -cut { 0.0 } else { l });
    Ok(Povm {
        elements,
        defect,
        rank_tol: DEFAULT_RANK_TOL,
        source: PovmSource::Taylor,
    })
}

/// Random complete POVM with `n` elements on `qubits` qubits, used as a
/// control that structural identities are not satisfied vacuously.
pub fn random_povm(n: usize, qubits: usize, seed: u64) -> Result<Povm> {
    if n == 0 {
        return domain("a POVM needs at least one element");
    }
    let dim = 1usize << qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<HermitianOp> = (0..n)
        .map(|_| {
            let g = Mat::from_fn(dim, dim, |_, _| {
                c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            HermitianOp::hermitized(&g * g.adjoint())
        })
        .collect();
    let mut total = raw[0].clone();
    for r in &raw[1..] {
        total = total.add(r)?;
    }
    let root = eig_hermitian(&total)?.map_on_support(|l| l.powf(-0.5))?;
    let elements = raw.iter().map(|r| sandwich(&root, r)).collect();
    Ok(Povm {
        elements,
        defect: HermitianOp::zeros(qubits),
        rank_tol: DEFAULT_RANK_TOL,
        source: PovmSource::Custom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{signal_state, DephasingParams};

    fn p(g: f64, t: f64) -> DephasingParams {
        DephasingParams::new(g, t).unwrap()
    }

    fn success(povm: &Povm, ens: &SignalEnsemble) -> f64 {
        povm.elements()
            .iter()
            .zip(ens.states())
            .map(|(e, s)| e.trace_product(s).unwrap().re)
            .sum::<f64>()
            / 4.0
    }

    #[test]
    fn single_state_pgm_is_support_projector() {
        let ens = SignalEnsemble::noiseless(1).unwrap();
        let povm = pgm(&ens, DEFAULT_RANK_TOL).unwrap();
        let st = &ens.states()[0];
        assert!(povm.elements()[0].max_abs_diff(st).unwrap() < 1e-14);
        let comp = HermitianOp::identity(2).sub(st).unwrap();
        assert!(povm.defect().max_abs_diff(&comp).unwrap() < 1e-14);
        assert_eq!(povm.source(), PovmSource::Noiseless);
    }

    #[test]
    fn orthogonal_pure_states_are_discriminated() {
        let a = HermitianOp::projector(&[c64::new(1.0, 0.0), c64::new(0.0, 0.0)]).unwrap();
        let b = HermitianOp::projector(&[c64::new(0.0, 0.0), c64::new(1.0, 0.0)]).unwrap();
        let ens =
            SignalEnsemble::from_states(vec![a.clone(), b.clone()], SignalKind::Eta, p(1.0, 0.0))
                .unwrap();
        let povm = pgm(&ens, DEFAULT_RANK_TOL).unwrap();
        assert!(povm.elements()[0].max_abs_diff(&a).unwrap() < 1e-14);
        assert!(povm.elements()[1].max_abs_diff(&b).unwrap() < 1e-14);
        assert!(povm.defect().frobenius_norm() < 1e-14);
    }

    #[test]
    fn rejects_non_psd_members() {
        let z = HermitianOp::from_fn(1, |i, j| {
            c64::new(if i != j { 0.0 } else if i == 0 { 1.0 } else { -1.0 }, 0.0)
        })
        .unwrap();
        let ens = SignalEnsemble::from_states(
            vec![z, HermitianOp::identity(1)],
            SignalKind::Eta,
            p(1.0, 0.0),
        )
        .unwrap();
        assert!(pgm(&ens, DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn noiseless_reproduces_closed_form() {
        for n in 2..=4 {
            let povm = noiseless_povm(n).unwrap();
            let ens = SignalEnsemble::noiseless(n).unwrap();
            assert!((success(&povm, &ens) - crate::closedform::f_ih(n)).abs() < 1e-12);
            let report = povm.validate_against(&ens);
            assert!(report.passed, "{report:?}");
        }
    }

    #[test]
    fn corrupted_element_is_flagged() {
        let povm = noiseless_povm(3).unwrap();
        assert!(povm.validate().passed);
        let mut elements = povm.elements().to_vec();
        let mut m = elements[0].matrix().to_owned();
        m[(0, 0)] += c64::new(0.1, 0.0);
        elements[0] = HermitianOp::new(m).unwrap();
        let bad = Povm::from_parts(elements, povm.defect().clone(), 1e-12, PovmSource::Custom)
            .unwrap();
        let report = bad.validate();
        assert!(report.completeness_residual > 1e-3);
        assert!(!report.passed);
    }

    #[test]
    fn adapted_defect_avoids_support() {
        let ens = SignalEnsemble::noisy(3, p(0.5, 0.7)).unwrap();
        let povm = pgm(&ens, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(povm.source(), PovmSource::NoiseAdapted);
        let report = povm.validate_against(&ens);
        assert!(report.passed, "{report:?}");
        assert!(report.defect_overlap <= 1e-9);
    }

    #[test]
    fn rotation_by_zero_and_full_turn() {
        let a = noiseless_povm(2).unwrap();
        let b = rotated_noiseless_povm(2, 0.0).unwrap();
        for (x, y) in a.elements().iter().zip(b.elements()) {
            assert!(x.max_abs_diff(y).unwrap() < 1e-15);
        }
        let ens = SignalEnsemble::noisy(2, p(0.6, 1.2)).unwrap();
        let c = rotated_noiseless_povm(2, std::f64::consts::TAU).unwrap();
        assert!((success(&a, &ens) - success(&c, &ens)).abs() < 1e-14);
    }

    #[test]
    fn merging_defect_keeps_completeness() {
        let ens = SignalEnsemble::noiseless(3).unwrap();
        let povm = noiseless_povm(3).unwrap();
        let merged = povm.merged_defect();
        assert!(merged.validate().completeness_residual < 1e-10);
        assert!((success(&povm, &ens) - success(&merged, &ens)).abs() < 1e-12);
    }

    #[test]
    fn series_coefficients() {
        let c = inverse_sqrt_series(4);
        let want = [1.0, -0.5, 0.375, -0.3125, 0.2734375];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn taylor_is_exact_on_identity_average() {
        let one = HermitianOp::identity(0);
        let ens = SignalEnsemble::from_states(vec![one.clone()], SignalKind::Eta, p(1.0, 0.0))
            .unwrap();
        let povm = pgm_taylor(&ens, 1).unwrap();
        assert!(povm.elements()[0].max_abs_diff(&one).unwrap() < 1e-15);
        assert!(povm.defect().frobenius_norm() < 1e-15);
        assert!(pgm_taylor(&ens, 0).is_err());
    }

    #[test]
    fn taylor_converges_to_eigen_pgm() {
        let ens = SignalEnsemble::noisy(2, p(0.5, 0.0)).unwrap();
        let exact = success(&pgm(&ens, DEFAULT_RANK_TOL).unwrap(), &ens);
        let mut last_gap = f64::INFINITY;
        for order in [50, 200, 800, 3200] {
            let gap = (success(&pgm_taylor(&ens, order).unwrap(), &ens) - exact).abs();
            assert!(gap <= last_gap + 1e-15);
            last_gap = gap;
        }
        assert!(last_gap < 1e-8);
    }

    #[test]
    fn pgm_is_port_covariant() {
        let prm = p(0.4, 0.9);
        let n = 3;
        let perm = [1, 0, 2, 3];
        let ens = SignalEnsemble::noisy(n, prm).unwrap();
        let povm = pgm(&ens, DEFAULT_RANK_TOL).unwrap();
        let swapped: Vec<HermitianOp> = [2, 1, 3]
            .iter()
            .map(|&i| signal_state(SignalKind::Eta, i, n, prm).unwrap())
            .collect();
        let ens2 = SignalEnsemble::from_states(swapped, SignalKind::Eta, prm).unwrap();
        let povm2 = pgm(&ens2, DEFAULT_RANK_TOL).unwrap();
        for (k, e) in povm.elements().iter().enumerate() {
            let relabeled = e.permute_qubits(&perm).unwrap();
            assert!(relabeled.max_abs_diff(&povm2.elements()[k]).unwrap() < 1e-12);
        }
    }

    #[test]
    fn random_povm_is_complete() {
        let povm = random_povm(3, 3, 7).unwrap();
        let report = povm.validate();
        assert!(report.completeness_residual < 1e-10, "{report:?}");
        assert!(report.element_min_eigenvalues.iter().all(|&m| m > -1e-10));
    }
}
