//! Decoherence factor of the generalized Ohmic spin-boson model.
//!
//! All quantities are dimensionless: frequencies in units of the cutoff,
//! `tau` is time times the cutoff, `ell` the pair separation over the
//! cutoff wavelength, and `temperature_ratio` the temperature over cutoff.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{fidelity_noiseless_povm, teleport_fidelity};
use crate::ensemble::DephasingParams;
use crate::error::{domain, Error, Result};
use crate::fidelity::noise_adapted_fidelity;

/// Below this frequency the integrands are replaced by their leading power.
const SERIES_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub upper_cutoff: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSettings {
    /// `upper_cutoff = 40 + 10 s`.
    pub fn for_ohmicity(s: f64) -> Self {
        Self {
            upper_cutoff: 40.0 + 10.0 * s,
            rel_tol: 1e-11,
            abs_tol: 1e-14,
            max_subdivisions: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    ohmicity: f64,
    temperature_ratio: f64,
    separation: f64,
    quad: QuadratureSettings,
}

impl SpinBosonParams {
    pub fn new(ohmicity: f64, temperature_ratio: f64, separation: f64) -> Result<Self> {
        Self::with_quadrature(
            ohmicity,
            temperature_ratio,
            separation,
            QuadratureSettings::for_ohmicity(ohmicity),
        )
    }

    pub fn with_quadrature(
        ohmicity: f64,
        temperature_ratio: f64,
        separation: f64,
        quad: QuadratureSettings,
    ) -> Result<Self> {
        if !(ohmicity > 1.0) || !ohmicity.is_finite() {
            return domain(format!("ohmicity must exceed 1, got {ohmicity}"));
        }
        if !(temperature_ratio >= 0.0) || !temperature_ratio.is_finite() {
            return domain(format!("temperature ratio must be >= 0, got {temperature_ratio}"));
        }
        if !(separation >= 0.0) || !separation.is_finite() {
            return domain(format!("separation must be >= 0, got {separation}"));
        }
        if !(quad.rel_tol > 0.0 && quad.abs_tol > 0.0 && quad.max_subdivisions > 0) {
            return domain("quadrature tolerances must be positive");
        }
        let tail = (-quad.upper_cutoff).exp() * quad.upper_cutoff.powf(ohmicity + 1.0);
        if !(tail < quad.abs_tol) {
            return domain(format!(
                "upper cutoff {} leaves a tail of {tail:e}, above abs_tol {:e}",
                quad.upper_cutoff, quad.abs_tol
            ));
        }
        Ok(Self {
            ohmicity,
            temperature_ratio,
            separation,
            quad,
        })
    }

    pub fn ohmicity(&self) -> f64 {
        self.ohmicity
    }

    pub fn temperature_ratio(&self) -> f64 {
        self.temperature_ratio
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        self.quad
    }
}

/// Modulus and phase of `Gamma = exp(-chi + i phase)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecoherenceFactor {
    pub chi: f64,
    pub phase: f64,
    pub gamma_abs: f64,
    pub as_params: DephasingParams,
}

// 15-point Kronrod abscissae on [-1, 1] (non-negative half) with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod over `[a, b]` split into panels no wider than
/// `max_panel`.
fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    max_panel: f64,
    quad: &QuadratureSettings,
) -> Result<f64> {
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut err_total = 0.0;
    let mut splits = 0usize;
    let mut stack: Vec<(f64, f64, usize)> = Vec::new();
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let hi = if p + 1 == panels { b } else { lo + width };
        stack.push((lo, hi, 0));
        while let Some((x0, x1, depth)) = stack.pop() {
            let (val, err) = kronrod(&f, x0, x1);
            let budget = (quad.rel_tol * val.abs()).max(quad.abs_tol * (x1 - x0) / (b - a));
            if err <= budget || depth >= 50 {
                total += val;
                err_total += err;
                continue;
            }
            splits += 1;
            if splits > quad.max_subdivisions {
                return Err(Error::Numerical {
                    message: format!("quadrature did not converge in {} subdivisions", quad.max_subdivisions),
                    residual: err_total + err,
                });
            }
            let mid = 0.5 * (x0 + x1);
            stack.push((mid, x1, depth + 1));
            stack.push((x0, mid, depth + 1));
        }
    }
    Ok(total)
}

/// `1 - cos x` without cancellation.
fn one_minus_cos(x: f64) -> f64 {
    let s = (0.5 * x).sin();
    2.0 * s * s
}

fn lower_limit(tau: f64, ell: f64) -> f64 {
    SERIES_EPS.min(1e-3 / tau.max(ell).max(1.0))
}

fn max_panel(tau: f64, ell: f64) -> f64 {
    PI / tau.max(ell).max(1.0)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return domain(format!("tau must be finite and >= 0, got {tau}"));
    }
    Ok(())
}

/// Decay exponent
/// `chi = 2 int w^{s-2} e^{-w} (1 - cos w tau) coth(w / 2T) (1 - cos w ell) dw`.
pub fn chi(tau: f64, params: &SpinBosonParams) -> Result<f64> {
    check_tau(tau)?;
    let (s, t, ell) = (params.ohmicity, params.temperature_ratio, params.separation);
    if tau == 0.0 || ell == 0.0 {
        return Ok(0.0);
    }
    let eps = lower_limit(tau, ell);
    let integrand = |w: f64| {
        let coth = if t > 0.0 { 1.0 / (w / (2.0 * t)).tanh() } else { 1.0 };
        2.0 * w.powf(s - 2.0) * (-w).exp() * one_minus_cos(w * tau) * coth * one_minus_cos(w * ell)
    };
    // leading behaviour: w^{s+1} tau^2 ell^2 T, or w^{s+2} tau^2 ell^2 / 2 at T = 0
    let head = if t > 0.0 {
        tau * tau * ell * ell * t * eps.powf(s + 2.0) / (s + 2.0)
    } else {
        tau * tau * ell * ell * eps.powf(s + 3.0) / (2.0 * (s + 3.0))
    };
    let body = integrate(
        integrand,
        eps,
        params.quad.upper_cutoff,
        max_panel(tau, ell),
        &params.quad,
    )?;
    Ok((head + body).max(0.0))
}

/// Phase `theta = (1/2) int w^{s-2} e^{-w} (1 - cos w tau) sin(w ell) dw`;
/// independent of temperature.
pub fn phase(tau: f64, params: &SpinBosonParams) -> Result<f64> {
    check_tau(tau)?;
    let (s, ell) = (params.ohmicity, params.separation);
    if tau == 0.0 || ell == 0.0 {
        return Ok(0.0);
    }
    let eps = lower_limit(tau, ell);
    let integrand =
        |w: f64| 0.5 * w.powf(s - 2.0) * (-w).exp() * one_minus_cos(w * tau) * (w * ell).sin();
    let head = tau * tau * ell * eps.powf(s + 2.0) / (4.0 * (s + 2.0));
    let body = integrate(
        integrand,
        eps,
        params.quad.upper_cutoff,
        max_panel(tau, ell),
        &params.quad,
    )?;
    Ok(head + body)
}

pub fn decoherence_factor(tau: f64, params: &SpinBosonParams) -> Result<DecoherenceFactor> {
    let chi = chi(tau, params)?;
    let phase = phase(tau, params)?;
    let gamma_abs = (-chi).exp();
    Ok(DecoherenceFactor {
        chi,
        phase,
        gamma_abs,
        as_params: DephasingParams::new(gamma_abs, phase.rem_euclid(TAU))?,
    })
}

/// Which measurement produces a fidelity curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// Ideal PGM, evaluated through the closed form.
    ClosedForm,
    /// PGM adapted to the complex decoherence factor at each time.
    NoiseAdapted,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimePoint {
    pub tau: f64,
    pub chi: f64,
    pub phase: f64,
    pub gamma_abs: f64,
    pub ent_fidelity: f64,
    pub teleport_fidelity: f64,
}

/// Fidelity at each `tau`; the grid must be ascending.
pub fn fidelity_vs_time(
    n: usize,
    params: &SpinBosonParams,
    taus: &[f64],
    mode: CurveMode,
) -> Result<Vec<TimePoint>> {
    if taus.windows(2).any(|w| !(w[0] <= w[1])) {
        return domain("tau grid must be sorted ascending");
    }
    taus.par_iter()
        .map(|&tau| {
            let d = decoherence_factor(tau, params)?;
            let ent = match mode {
                CurveMode::ClosedForm => fidelity_noiseless_povm(n, d.as_params),
                CurveMode::NoiseAdapted => noise_adapted_fidelity(n, d.as_params)?.ent_fidelity,
            };
            Ok(TimePoint {
                tau,
                chi: d.chi,
                phase: d.phase,
                gamma_abs: d.gamma_abs,
                ent_fidelity: ent,
                teleport_fidelity: teleport_fidelity(ent)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sb(s: f64, t: f64, ell: f64) -> SpinBosonParams {
        SpinBosonParams::new(s, t, ell).unwrap()
    }

    #[test]
    fn kronrod_is_exact_on_polynomials() {
        let q = QuadratureSettings::for_ohmicity(2.0);
        let v = integrate(|x| x.powi(6) - 3.0 * x, 0.0, 2.0, 10.0, &q).unwrap();
        assert!((v - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
        let v = integrate(|x| (-x).exp() * x.sin(), 0.0, 60.0, 0.5, &q).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vanishing_cases() {
        let p = sb(2.0, 0.9, 3.0);
        assert_eq!(chi(0.0, &p).unwrap(), 0.0);
        assert_eq!(phase(0.0, &p).unwrap(), 0.0);
        let p0 = sb(2.0, 0.9, 0.0);
        for tau in [0.5, 3.0, 8.0] {
            assert_eq!(chi(tau, &p0).unwrap(), 0.0);
            assert_eq!(phase(tau, &p0).unwrap(), 0.0);
            assert_eq!(decoherence_factor(tau, &p0).unwrap().gamma_abs, 1.0);
        }
        let d = decoherence_factor(0.0, &p).unwrap();
        assert_eq!(d.gamma_abs, 1.0);
        assert_eq!(d.as_params.theta(), 0.0);
        assert!(chi(-1.0, &p).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(SpinBosonParams::new(1.0, 0.1, 3.0).is_err());
        assert!(SpinBosonParams::new(2.0, -0.1, 3.0).is_err());
        assert!(SpinBosonParams::new(2.0, 0.1, -3.0).is_err());
        let mut q = QuadratureSettings::for_ohmicity(2.0);
        q.upper_cutoff = 5.0;
        assert!(SpinBosonParams::with_quadrature(2.0, 0.1, 3.0, q).is_err());
    }

    #[test]
    fn temperature_ordering_and_phase_independence() {
        let hot = sb(2.0, 0.9, 3.0);
        let cold = sb(2.0, 0.1, 3.0);
        assert!(chi(8.0, &hot).unwrap() > chi(8.0, &cold).unwrap());
        for tau in [0.7, 3.0, 6.5] {
            assert_eq!(phase(tau, &hot).unwrap(), phase(tau, &cold).unwrap());
        }
    }

    #[test]
    fn zero_temperature_closed_form() {
        // s = 2, T = 0, ell -> the integral of 2 e^{-w}(1-cos w tau)(1-cos w ell)
        // has an elementary form via int e^{-w} cos(a w) = 1/(1+a^2).
        let (tau, ell) = (2.5, 1.5);
        let l = |a: f64| 1.0 / (1.0 + a * a);
        let want = 2.0
            * (1.0 - l(tau) - l(ell) + 0.5 * (l(tau + ell) + l(tau - ell)));
        let got = chi(tau, &sb(2.0, 0.0, ell)).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        // phase with int e^{-w} sin(a w) = a/(1+a^2)
        let m = |a: f64| a / (1.0 + a * a);
        let want = 0.5 * (m(ell) - 0.5 * (m(ell + tau) + m(ell - tau)));
        let got = phase(tau, &sb(2.0, 0.0, ell)).unwrap();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn chi_saturates() {
        let p = sb(2.0, 0.1, 3.0);
        let a = chi(60.0, &p).unwrap();
        let b = chi(120.0, &p).unwrap();
        assert!((a - b).abs() < 0.05 * a);
        assert!(chi(0.3, &p).unwrap() < a);
    }

    #[test]
    fn curve_rejects_unsorted_grid() {
        let p = sb(2.0, 0.1, 3.0);
        assert!(fidelity_vs_time(2, &p, &[1.0, 0.5], CurveMode::ClosedForm).is_err());
        let c = fidelity_vs_time(2, &p, &[0.0, 1.0], CurveMode::ClosedForm).unwrap();
        let f0 = teleport_fidelity(crate::closedform::f_ih(2)).unwrap();
        assert!((c[0].teleport_fidelity - f0).abs() < 1e-15);
    }
}
