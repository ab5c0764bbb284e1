//! Round-trip the TOML parameter schema: serialize the built-in defaults,
//! parse a hand-written override file, and show how omitted sections fall
//! back per bus.
//!
//! ```text
//! cargo run --example config_files
//! ```

use microgrid::config::{parse_config, serialize_config, MicrogridConfig, RxPreset};

fn main() {
    let cfg = MicrogridConfig::preset(RxPreset::Gg1);
    let text = serialize_config(&cfg);
    println!("serialized default configuration (strongly resistive line):\n");
    println!("{text}");

    let reparsed = parse_config(&text).expect("round-trip");
    assert_eq!(reparsed, cfg);
    println!("round-trip parse returns the identical configuration\n");

    // A minimal override: only one load value changes, everything else
    // keeps its per-bus default.
    let override_text = "
[inverter_i]
k_p = 1.2e-4

[load_i]
R_l = 25.0
";
    let custom = parse_config(override_text).expect("partial config");
    println!("partial file: k_p(i) = {:e}", custom.inverter_i.k_p);
    println!(
        "load_i = ({} ohm, {} H) — R_l overridden, L_l defaulted",
        custom.load_i.r_l, custom.load_i.l_l
    );
    println!(
        "load_k = ({} ohm, {} H) — untouched bus keeps its own default",
        custom.load_k.r_l, custom.load_k.l_l
    );

    let bad = parse_config("[inverter_i]\nk_p = -1.0\n");
    println!("\nnegative gain rejected: {}", bad.unwrap_err());
}
