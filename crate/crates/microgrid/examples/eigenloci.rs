//! Sweep the active droop gain and watch the dominant eigenvalue pair
//! migrate toward the imaginary axis: the classic route to instability of
//! droop-controlled inverters when k_p is pushed up.
//!
//! ```text
//! cargo run --example eigenloci
//! ```

use microgrid::config::{MicrogridConfig, RxPreset};
use microgrid::models::ModelKind;
use microgrid::stability::eigenloci_sweep;
use std::f64::consts::TAU;

fn main() {
    let cfg = MicrogridConfig::preset(RxPreset::Eq1);
    let kind = ModelKind::Em5;
    let kq = cfg.inverter_i.k_q;
    let loci = eigenloci_sweep(kind, &cfg, (1e-5, 1e-3), 17, kq).expect("sweep");

    println!(
        "{} model on the balanced line, k_q = {kq:e}, {} gain steps",
        kind.name(),
        loci.k_p.len()
    );
    println!();
    println!(
        "{:>11} {:>12} {:>24}",
        "k_p", "abscissa", "dominant pair"
    );
    for (row, kp) in loci.k_p.iter().enumerate() {
        // Rightmost non-rotation eigenvalue at this gain.
        let dominant = loci.eigenvalues[row]
            .iter()
            .filter(|ev| ev.norm() > 1e-6)
            .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
            .copied()
            .unwrap();
        println!(
            "{:>11.4e} {:>12.4e} {:>11.3} ±{:>7.2} Hz",
            kp,
            loci.abscissas[row],
            dominant.re,
            dominant.im.abs() / TAU
        );
    }

    let crossing = loci
        .k_p
        .iter()
        .zip(&loci.abscissas)
        .find(|(_, a)| **a > 0.0)
        .map(|(kp, _)| *kp);
    println!();
    match crossing {
        Some(kp) => println!("first unstable sweep point: k_p = {kp:.4e}"),
        None => println!("stable across the whole sweep"),
    }
}
