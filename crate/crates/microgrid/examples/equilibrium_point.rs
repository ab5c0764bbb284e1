//! Solve the steady state of all four models on the balanced line and
//! show that they agree on the operating point and obey the droop laws.
//!
//! ```text
//! cargo run --example equilibrium_point
//! ```

use microgrid::config::{MicrogridConfig, RxPreset};
use microgrid::equilibrium::find_equilibrium;
use microgrid::models::{self, ModelKind};
use std::f64::consts::TAU;

fn main() {
    let cfg = MicrogridConfig::preset(RxPreset::Eq1);
    println!(
        "two-inverter microgrid, balanced line (R/X = {:.2}), droop gains k_p = {:e}, k_q = {:e}",
        cfg.line.rx_ratio(cfg.omega0),
        cfg.inverter_i.k_p,
        cfg.inverter_i.k_q
    );
    println!();
    println!(
        "{:<9} {:>12} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "model", "f0 (Hz)", "delta_k", "V_i (V)", "V_k (V)", "P_i (W)", "P_k (W)"
    );

    for kind in ModelKind::ALL {
        let eq = find_equilibrium(kind, &cfg, None).expect("equilibrium");
        let local = eq.config(&cfg);
        let x = eq.x_star.data();
        let (pi, pk) = models::injected_power(kind, x, &local).expect("powers");
        println!(
            "{:<9} {:>12.6} {:>10.6} {:>10.4} {:>10.4} {:>10.2} {:>10.2}",
            kind.name(),
            eq.omega0 / TAU,
            x[1],
            x[4],
            x[5],
            pi.p,
            pk.p
        );

        // The droop laws tie the solved frequency and voltages to the
        // injected powers; residuals here are solver-level small.
        let w_err = (eq.omega0 - (cfg.inverter_i.omega_n - cfg.inverter_i.k_p * pi.p)).abs();
        let v_err = (x[4] - (cfg.inverter_i.v_n - cfg.inverter_i.k_q * pi.q)).abs();
        assert!(w_err < 1e-6 && v_err < 1e-6, "droop law violated");
    }

    println!();
    println!("all four models satisfy omega0 = omega_n - k_p P and V = V_n - k_q Q");
}
