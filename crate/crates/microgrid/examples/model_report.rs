//! Full model-accuracy report: trace every model's stability boundary
//! over the default reactive-gain grid and grade each reduced model
//! against the detailed reference as Good, Acceptable, or Unacceptable.
//!
//! ```text
//! cargo run --example model_report            # balanced line
//! cargo run --example model_report -- rx-ll1  # or any preset name
//! ```

use microgrid::config::{MicrogridConfig, RxPreset};
use microgrid::output::format_report;
use microgrid::stability::{default_kq_grid, model_report, ClassifyOptions, DEFAULT_KP_BRACKET};

fn main() {
    let preset = std::env::args()
        .nth(1)
        .map(|arg| arg.parse::<RxPreset>().expect("preset name"))
        .unwrap_or(RxPreset::Eq1);

    let cfg = MicrogridConfig::preset(preset);
    let grid = default_kq_grid();
    println!("line preset {preset}, R/X = {:.2}", cfg.line.rx_ratio(cfg.omega0));
    println!();

    let report = model_report(&cfg, &grid, DEFAULT_KP_BRACKET, &ClassifyOptions::default())
        .expect("report");
    print!("{}", format_report(&report));
}
