//! Linearize the detailed 28-state model about its equilibrium and
//! inspect the spectrum: the analytic descriptor form is checked against
//! finite differences, the structural rotation-symmetry zero is shown, and
//! the slowest modes are listed.
//!
//! ```text
//! cargo run --example eigen_spectrum
//! ```

use microgrid::config::{MicrogridConfig, RxPreset};
use microgrid::equilibrium::find_equilibrium;
use microgrid::linearize::{linearize_analytic, linearize_numeric, relative_difference};
use microgrid::models::ModelKind;
use microgrid::stability::eigen_of;

fn main() {
    let cfg = MicrogridConfig::preset(RxPreset::Eq1);
    let kind = ModelKind::Detailed;
    let eq = find_equilibrium(kind, &cfg, None).expect("equilibrium");

    let analytic = linearize_analytic(kind, &cfg, &eq).expect("analytic linearization");
    let numeric = linearize_numeric(kind, &cfg, &eq).expect("numeric linearization");

    // Same explicit Jacobian from both paths.
    let explicit = analytic.system_matrix().expect("well-conditioned mass");
    let diff = relative_difference(&explicit, &numeric.a);
    println!(
        "descriptor form: {} states, mass condition {:.3e}",
        analytic.gamma.nrows(),
        analytic.mass_condition()
    );
    println!("analytic vs finite-difference Jacobian: relative difference {diff:.3e}");
    assert!(diff < 1e-6);

    let set = eigen_of(&analytic, (cfg.inverter_i.k_p, cfg.inverter_i.k_q)).expect("spectrum");
    println!();
    println!(
        "raw abscissa      {:>12.4e}  (the rotation-symmetry zero mode)",
        set.raw_abscissa
    );
    println!(
        "deflated abscissa {:>12.4e}  (stability verdict: {})",
        set.spectral_abscissa,
        if set.is_stable() { "stable" } else { "not stable" }
    );

    println!();
    println!("slowest eigenvalues (by |real part|):");
    let mut evs = set.eigenvalues.clone();
    evs.sort_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap());
    for ev in evs.iter().take(7) {
        let hz = ev.im.abs() / std::f64::consts::TAU;
        println!("  {:>12.4e} {:>+12.4e}i   ({hz:.2} Hz)", ev.re, ev.im);
    }
}
