//! Decohered Bell pairs and the port signal states built from them.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linops::{HermitianOp, Matrix2};

/// The single-qubit dephasing factor `Gamma = gamma_abs * exp(i theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingParams {
    gamma_abs: f64,
    theta: f64,
}

impl DephasingParams {
    /// `theta` is reduced into `[0, 2 pi)`.
    pub fn new(gamma_abs: f64, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma_abs) {
            return domain(format!("|Gamma| = {gamma_abs} is outside [0, 1]"));
        }
        if !theta.is_finite() {
            return domain(format!("theta = {theta} is not finite"));
        }
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Ok(Self { gamma_abs, theta })
    }

    pub fn noiseless() -> Self {
        Self {
            gamma_abs: 1.0,
            theta: 0.0,
        }
    }

    pub fn gamma_abs(&self) -> f64 {
        self.gamma_abs
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `Re Gamma = |Gamma| cos theta`.
    pub fn real_part(&self) -> f64 {
        self.gamma_abs * self.theta.cos()
    }

    pub fn gamma(&self) -> c64 {
        c64::from_polar(self.gamma_abs, self.theta)
    }
}

/// `R(theta) = exp(-i theta)|0><0| + |1><1|`.
pub fn phase_rotation(theta: f64) -> Matrix2 {
    let zero = c64::new(0.0, 0.0);
    [
        [c64::from_polar(1.0, -theta), zero],
        [zero, c64::new(1.0, 0.0)],
    ]
}

/// `(|01> - |10>) / sqrt 2` in the basis `|00>, |01>, |10>, |11>`.
pub fn psi_minus() -> [c64; 4] {
    let s = FRAC_1_SQRT_2;
    [0.0, s, -s, 0.0].map(|v| c64::new(v, 0.0))
}

/// `(|01> + |10>) / sqrt 2`.
pub fn psi_plus() -> [c64; 4] {
    let s = FRAC_1_SQRT_2;
    [0.0, s, s, 0.0].map(|v| c64::new(v, 0.0))
}

/// The singlet after the dephasing channel acts on its second qubit.
///
/// The channel keeps populations and multiplies the `|0><1|` coherence of
/// the qubit by `conj(Gamma)`, which equals
/// `R [ (1+|Gamma|)/2 rho + (1-|Gamma|)/2 Z rho Z ] R^dagger`.
pub fn decohered_bell(params: DephasingParams) -> HermitianOp {
    let singlet = HermitianOp::projector(&psi_minus()).expect("length 4");
    let g = params.gamma();
    HermitianOp::hermitized(faer::Mat::from_fn(4, 4, |r, c| {
        let v = singlet.entry(r, c);
        match (r & 1, c & 1) {
            (0, 1) => v * g.conj(),
            (1, 0) => v * g,
            _ => v,
        }
    }))
}

/// Which two-qubit block sits on `(A_i, B)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// Ideal singlet.
    Sigma,
    /// The triplet `Psi+` that dephasing mixes in.
    Omega,
    /// Decohered singlet.
    Eta,
}

fn block(kind: SignalKind, params: DephasingParams) -> HermitianOp {
    match kind {
        SignalKind::Sigma => HermitianOp::projector(&psi_minus()).expect("length 4"),
        SignalKind::Omega => HermitianOp::projector(&psi_plus()).expect("length 4"),
        SignalKind::Eta => decohered_bell(params),
    }
}

/// Normalized state on `n_ports + 1` qubits with the block on `(A_port, B)`
/// and the other ports maximally mixed. `port` counts from 1.
pub fn signal_state(
    kind: SignalKind,
    port: usize,
    n_ports: usize,
    params: DephasingParams,
) -> Result<HermitianOp> {
    if n_ports == 0 {
        return domain("at least one port is required");
    }
    if port == 0 || port > n_ports {
        return domain(format!("port {port} is outside 1..={n_ports}"));
    }
    let b = block(kind, params);
    let embedded = HermitianOp::embed_two_qubit(&b, port - 1, n_ports, n_ports + 1)?;
    Ok(embedded.scaled(0.5f64.powi(n_ports as i32 - 1)))
}

/// Sum of the states, divided by their number when `normalized`.
pub fn ensemble_average(states: &[HermitianOp], normalized: bool) -> Result<HermitianOp> {
    let Some(first) = states.first() else {
        return domain("cannot average an empty ensemble");
    };
    let mut acc = first.clone();
    for s in &states[1..] {
        acc = acc.add(s)?;
    }
    Ok(if normalized {
        acc.scaled(1.0 / states.len() as f64)
    } else {
        acc
    })
}

/// The `N` port states together with their unnormalized sum.
#[derive(Clone, Debug)]
pub struct SignalEnsemble {
    n_ports: usize,
    params: DephasingParams,
    kind: SignalKind,
    states: Vec<HermitianOp>,
    average_unnormalized: HermitianOp,
}

impl SignalEnsemble {
    pub fn new(n_ports: usize, kind: SignalKind, params: DephasingParams) -> Result<Self> {
        let states = (1..=n_ports)
            .map(|i| signal_state(kind, i, n_ports, params))
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(states, kind, params)
    }

    /// The ideal `sigma` ensemble.
    pub fn noiseless(n_ports: usize) -> Result<Self> {
        Self::new(n_ports, SignalKind::Sigma, DephasingParams::noiseless())
    }

    /// The decohered `eta` ensemble.
    pub fn noisy(n_ports: usize, params: DephasingParams) -> Result<Self> {
        Self::new(n_ports, SignalKind::Eta, params)
    }

    /// Wraps arbitrary equal-dimension states, for instance a permuted ensemble.
    pub fn from_states(
        states: Vec<HermitianOp>,
        kind: SignalKind,
        params: DephasingParams,
    ) -> Result<Self> {
        let average_unnormalized = ensemble_average(&states, false)?;
        Ok(Self {
            n_ports: states.len(),
            params,
            kind,
            states,
            average_unnormalized,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn params(&self) -> DephasingParams {
        self.params
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn states(&self) -> &[HermitianOp] {
        &self.states
    }

    pub fn average_unnormalized(&self) -> &HermitianOp {
        &self.average_unnormalized
    }

    pub fn average(&self) -> HermitianOp {
        self.average_unnormalized.scaled(1.0 / self.n_ports as f64)
    }

    pub fn dim(&self) -> usize {
        self.average_unnormalized.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{eig_hermitian, partial_trace, state_fidelity, tensor};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(g: f64, t: f64) -> DephasingParams {
        DephasingParams::new(g, t).unwrap()
    }

    #[test]
    fn params_are_validated_and_wrapped() {
        assert!(DephasingParams::new(1.2, 0.0).is_err());
        assert!(DephasingParams::new(-0.1, 0.0).is_err());
        assert!(DephasingParams::new(0.5, f64::NAN).is_err());
        assert!((p(0.5, -FRAC_PI_2).theta() - 3.0 * FRAC_PI_2).abs() < 1e-15);
        assert_eq!(p(0.5, TAU).theta(), 0.0);
    }

    #[test]
    fn rotation_examples() {
        let r = phase_rotation(0.0);
        assert_eq!(r[0][0], c64::new(1.0, 0.0));
        let r = phase_rotation(PI);
        assert!((r[0][0] - c64::new(-1.0, 0.0)).norm() < 1e-15);
        let r = phase_rotation(FRAC_PI_2);
        assert!((r[0][0] - c64::new(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(r[1][1], c64::new(1.0, 0.0));
    }

    #[test]
    fn bell_endpoints() {
        let singlet = HermitianOp::projector(&psi_minus()).unwrap();
        assert_eq!(decohered_bell(p(1.0, 0.0)).max_abs_diff(&singlet).unwrap(), 0.0);
        for t in [0.0, 1.0, 4.0] {
            let d = decohered_bell(p(0.0, t));
            let want = HermitianOp::from_fn(2, |i, j| {
                c64::new(if i == j && (i == 1 || i == 2) { 0.5 } else { 0.0 }, 0.0)
            })
            .unwrap();
            assert!(d.max_abs_diff(&want).unwrap() < 1e-15);
        }
    }

    #[test]
    fn bell_matches_triplet_mixture_form() {
        let sm = HermitianOp::projector(&psi_minus()).unwrap();
        let sp = HermitianOp::projector(&psi_plus()).unwrap();
        let (m, q) = (psi_minus(), psi_plus());
        for g in [0.0, 0.3, 0.8, 1.0] {
            for t in [0.0, 0.7, 2.0, 4.5] {
                let a = 0.5 * (1.0 + g * f64::cos(t));
                let b = 0.5 * (1.0 - g * f64::cos(t));
                let k = c64::new(0.0, 0.5 * g * f64::sin(t));
                let want = HermitianOp::from_fn(2, |i, j| {
                    sm.entry(i, j) * a
                        + sp.entry(i, j) * b
                        + k * (q[i] * m[j].conj() - m[i] * q[j].conj())
                })
                .unwrap();
                let got = decohered_bell(p(g, t));
                assert!(got.max_abs_diff(&want).unwrap() < 1e-15, "g={g} t={t}");
                let purity = got.trace_product(&got).unwrap().re;
                assert!((purity - (1.0 + g * g) / 2.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eta_is_rotated_mixture() {
        for n in 2..=4 {
            for g in [0.0, 0.25, 0.5, 0.75, 1.0] {
                for t in [0.0, 0.8, 1.6, 2.4, PI] {
                    let prm = p(g, t);
                    for i in 1..=n {
                        let s = signal_state(SignalKind::Sigma, i, n, prm).unwrap();
                        let o = signal_state(SignalKind::Omega, i, n, prm).unwrap();
                        let mix = s.scaled(0.5 * (1.0 + g)).add_scaled(&o, 0.5 * (1.0 - g)).unwrap();
                        let rotated = mix.conjugate_local(&phase_rotation(t), n).unwrap();
                        let eta = signal_state(SignalKind::Eta, i, n, prm).unwrap();
                        assert!(eta.max_abs_diff(&rotated).unwrap() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn signal_state_examples() {
        let n = 3;
        let s = signal_state(SignalKind::Sigma, 2, n, p(0.4, 1.0)).unwrap();
        let e = signal_state(SignalKind::Eta, 2, n, p(1.0, 0.0)).unwrap();
        assert_eq!(s.max_abs_diff(&e).unwrap(), 0.0);

        let o = signal_state(SignalKind::Omega, 2, n, p(0.0, 0.0)).unwrap();
        let e0 = signal_state(SignalKind::Eta, 2, n, p(0.0, 0.0)).unwrap();
        let half = s.add(&o).unwrap().scaled(0.5);
        assert!(e0.max_abs_diff(&half).unwrap() < 1e-16);

        let s1 = signal_state(SignalKind::Sigma, 1, n, p(1.0, 0.0)).unwrap();
        let overlap = s1.trace_product(&s).unwrap();
        assert!((overlap.re - 0.5f64.powi(n as i32 + 1)).abs() < 1e-15);

        let scalar = partial_trace(&e, &[]).unwrap();
        assert!((scalar.trace() - 1.0).abs() < 1e-14);

        assert!(signal_state(SignalKind::Eta, 0, n, p(1.0, 0.0)).is_err());
        assert!(signal_state(SignalKind::Eta, 4, n, p(1.0, 0.0)).is_err());
    }

    #[test]
    fn layout_is_block_tensor_identity() {
        let prm = p(0.6, 1.1);
        let eta = signal_state(SignalKind::Eta, 1, 2, prm).unwrap();
        let d = decohered_bell(prm);
        let want = tensor(&d, &HermitianOp::identity(1))
            .permute_qubits(&[0, 2, 1])
            .unwrap()
            .scaled(0.5);
        assert!(eta.max_abs_diff(&want).unwrap() < 1e-16);
    }

    #[test]
    fn averages() {
        let one = signal_state(SignalKind::Eta, 1, 1, p(0.4, 0.3)).unwrap();
        let avg = ensemble_average(std::slice::from_ref(&one), true).unwrap();
        assert_eq!(avg.max_abs_diff(&one).unwrap(), 0.0);
        assert!(ensemble_average(&[], false).is_err());
        assert!(ensemble_average(&[one, HermitianOp::identity(1)], false).is_err());

        for n in 2..=4 {
            for g in [0.0, 0.5, 1.0] {
                let ens = SignalEnsemble::noisy(n, p(g, 0.9)).unwrap();
                assert!((ens.average_unnormalized().trace() - n as f64).abs() < 1e-9);
                let bar = ens.average();
                let purity = bar.trace_product(&bar).unwrap().re;
                let want = (g * g + (n as f64 + 1.0) / 2.0) / (2f64.powi(n as i32) * n as f64);
                assert!((purity - want).abs() < 1e-13, "n={n} g={g}");
            }
        }
        let ens = SignalEnsemble::noisy(2, p(1.0, 0.0)).unwrap();
        let bar = ens.average();
        assert!((bar.trace_product(&bar).unwrap().re - 0.3125).abs() < 1e-14);
    }

    #[test]
    fn ranks_and_positivity() {
        for n in 2..=4 {
            for (g, rank) in [(0.5, 1usize << n), (0.999, 1 << n), (1.0, 1 << (n - 1))] {
                let ens = SignalEnsemble::noisy(n, p(g, 0.4)).unwrap();
                for st in ens.states() {
                    let e = eig_hermitian(st).unwrap();
                    assert_eq!(e.rank(), rank, "n={n} g={g}");
                    assert!(*e.eigenvalues().last().unwrap() > -1e-12);
                    assert!((st.trace() - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn port_swap_is_qubit_swap() {
        let n = 4;
        let prm = p(0.7, 2.2);
        let a = signal_state(SignalKind::Eta, 2, n, prm).unwrap();
        let b = signal_state(SignalKind::Eta, 4, n, prm).unwrap();
        let swapped = a.permute_qubits(&[0, 3, 2, 1, 4]).unwrap();
        assert_eq!(swapped.max_abs_diff(&b).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_fidelity_is_half() {
        for n in 2..=3 {
            let ens = SignalEnsemble::noisy(n, p(0.3, 1.0)).unwrap();
            let f = state_fidelity(&ens.states()[0], &ens.states()[n - 1]).unwrap();
            assert!((f - 0.5).abs() < 1e-9);
        }
    }
}
