//! Nonlinear transient versus linear prediction: perturb the equilibrium,
//! integrate the nonlinear model, fit the decay rate of the frequency
//! envelope, and compare it with the linearization's spectral abscissa.
//!
//! ```text
//! cargo run --example step_response
//! ```

use microgrid::config::{MicrogridConfig, RxPreset};
use microgrid::sim::{decay_rate, simulate, SimOptions, StartSource};
use microgrid::stability::eigen;
use microgrid::models::ModelKind;

fn main() {
    let cfg = MicrogridConfig::preset(RxPreset::Eq1);
    let kind = ModelKind::Em5;

    let set = eigen(kind, &cfg).expect("spectrum");
    println!(
        "{} model at default gains: spectral abscissa {:.4} 1/s ({})",
        kind.name(),
        set.spectral_abscissa,
        if set.is_stable() { "stable" } else { "not stable" }
    );

    let opts = SimOptions {
        t_end: 2.0,
        source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
        ..SimOptions::default()
    };
    let traj = simulate(kind, &cfg, &opts).expect("simulation");
    assert!(traj.diverged.is_none());

    let fitted = decay_rate(&traj.times, &traj.f_i).expect("transient present");
    println!("fitted decay of the f_i envelope: {fitted:.4} 1/s");
    println!(
        "difference from the linear prediction: {:.2} %",
        100.0 * (fitted - set.spectral_abscissa).abs() / set.spectral_abscissa.abs()
    );

    // A coarse look at the transient itself.
    println!();
    println!("{:>8} {:>12} {:>12}", "t (s)", "f_i (Hz)", "V_i (V)");
    for idx in (0..traj.times.len()).step_by(traj.times.len() / 10) {
        println!(
            "{:>8.3} {:>12.6} {:>12.4}",
            traj.times[idx], traj.f_i[idx], traj.v_i[idx]
        );
    }
}
