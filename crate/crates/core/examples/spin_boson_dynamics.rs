//! Teleportation fidelity while the pairs dephase through a common Ohmic
//! bath. Pass `--adapted` to add the noise-adapted curve (dense, slower).

use pbtlab::spinboson::{fidelity_vs_time, CurveMode, SpinBosonParams};

fn main() -> pbtlab::Result<()> {
    let adapted = std::env::args().any(|a| a == "--adapted");
    let n = 9;
    let taus: Vec<f64> = (0..=80).map(|k| k as f64 * 0.1).collect();
    for s in [2.0, 3.0] {
        for temp in [0.1, 0.9] {
            let params = SpinBosonParams::new(s, temp, 3.0)?;
            let curve = fidelity_vs_time(n, &params, &taus, CurveMode::ClosedForm)?;
            let dip = curve
                .windows(3)
                .find(|w| w[1].teleport_fidelity < w[0].teleport_fidelity && w[1].teleport_fidelity < w[2].teleport_fidelity)
                .map_or("none".to_string(), |w| format!("{:.1}", w[1].tau));
            let last = curve.last().expect("non-empty grid");
            println!(
                "s={s} T={temp}: first dip at tau={dip}, f(8)={:.5}, |Gamma(8)|={:.4}",
                last.teleport_fidelity, last.gamma_abs
            );
            if adapted {
                let other = fidelity_vs_time(n, &params, &taus, CurveMode::NoiseAdapted)?;
                let above = curve
                    .iter()
                    .zip(&other)
                    .filter(|(c, o)| o.teleport_fidelity > c.teleport_fidelity + 1e-12)
                    .map(|(c, _)| c.tau)
                    .collect::<Vec<_>>();
                println!("    adapted above ideal at {} of {} times: {above:?}", above.len(), taus.len());
            }
        }
    }
    Ok(())
}
