//! Parameter containers for the two-inverter microgrid, the built-in line
//! R/X presets, and the text config schema (TOML sections `[inverter_i]`,
//! `[inverter_k]`, `[line]`, `[load_i]`, `[load_k]` with keys named after
//! the circuit and controller symbols). Omitted keys fall back to the
//! built-in defaults; every parameter must be strictly positive.

use crate::error::ConfigError;
use serde::Serialize;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

/// Filter, droop, and inner-loop parameters of one grid-forming inverter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterParams {
    /// Filter resistance (ohm).
    pub r_f: f64,
    /// Filter inductance (henry).
    pub l_f: f64,
    /// Filter capacitance (farad).
    pub c_f: f64,
    /// Frequency droop gain ((rad/s)/W).
    pub k_p: f64,
    /// Voltage droop gain (V/var).
    pub k_q: f64,
    /// Droop measurement filter time constant (s).
    pub tau: f64,
    /// Nominal frequency setpoint (rad/s).
    pub omega_n: f64,
    /// Nominal voltage setpoint (V, dq magnitude).
    pub v_n: f64,
    /// Voltage loop proportional gain.
    pub k_pv: f64,
    /// Voltage loop integral gain (1/s).
    pub k_iv: f64,
    /// Current loop proportional gain.
    pub k_pc: f64,
    /// Current loop integral gain (1/s).
    pub k_ic: f64,
}

impl Default for InverterParams {
    fn default() -> Self {
        InverterParams {
            r_f: 0.1,
            l_f: 5e-3,
            c_f: 50e-6,
            k_p: 6e-5,
            k_q: 1.5e-4,
            tau: 31.8e-3,
            omega_n: TAU * 50.0,
            v_n: 311.0,
            k_pv: 5.0,
            k_iv: 10.0,
            k_pc: 5.0,
            k_ic: 25.0,
        }
    }
}

/// Series RL parameters of the line joining the two buses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    /// Line resistance (ohm).
    pub r_ik: f64,
    /// Line inductance (henry).
    pub l_ik: f64,
}

impl LineParams {
    pub fn new(r_ik: f64, l_ik: f64) -> Self {
        LineParams { r_ik, l_ik }
    }

    /// Line reactance `X = omega0 * L` at the synchronous frequency.
    pub fn reactance(&self, omega0: f64) -> f64 {
        omega0 * self.l_ik
    }

    /// R/X ratio at the synchronous frequency.
    pub fn rx_ratio(&self, omega0: f64) -> f64 {
        self.r_ik / self.reactance(omega0)
    }

    /// Quasi-stationary conductance and susceptance
    /// `(G, B) = (R, X) / (R^2 + X^2)`.
    pub fn admittance(&self, omega0: f64) -> (f64, f64) {
        let x = self.reactance(omega0);
        let d = self.r_ik * self.r_ik + x * x;
        (self.r_ik / d, x / d)
    }

    /// Subsynchronous conductance and susceptance: the coefficients of the
    /// first-order correction to the line power flow,
    /// `G' = (R^2 - X^2) L / (R^2 + X^2)^2` (may be negative when X > R)
    /// and `B' = 2 R X L / (R^2 + X^2)^2` (always positive).
    pub fn subsynchronous(&self, omega0: f64) -> (f64, f64) {
        let x = self.reactance(omega0);
        let d = self.r_ik * self.r_ik + x * x;
        (
            (self.r_ik * self.r_ik - x * x) * self.l_ik / (d * d),
            2.0 * self.r_ik * x * self.l_ik / (d * d),
        )
    }
}

impl Default for LineParams {
    fn default() -> Self {
        RxPreset::Eq1.line()
    }
}

/// Series RL parameters of one bus load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    /// Load resistance (ohm).
    pub r_l: f64,
    /// Load inductance (henry).
    pub l_l: f64,
}

impl LoadParams {
    pub fn new(r_l: f64, l_l: f64) -> Self {
        LoadParams { r_l, l_l }
    }
}

/// Built-in line presets spanning the three R/X regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxPreset {
    /// Strongly resistive line, R/X about 7.8.
    Gg1,
    /// Balanced line, R/X about 1.0.
    Eq1,
    /// Strongly inductive line, R/X about 0.18.
    Ll1,
}

impl RxPreset {
    pub const ALL: [RxPreset; 3] = [RxPreset::Gg1, RxPreset::Eq1, RxPreset::Ll1];

    /// Line parameters of this preset.
    pub fn line(self) -> LineParams {
        match self {
            RxPreset::Gg1 => LineParams::new(641e-3, 0.26e-3),
            RxPreset::Eq1 => LineParams::new(195e-3, 0.61e-3),
            RxPreset::Ll1 => LineParams::new(0.4, 7e-3),
        }
    }

    /// The CLI spelling: `rx-gg1`, `rx-eq1`, `rx-ll1`.
    pub fn name(self) -> &'static str {
        match self {
            RxPreset::Gg1 => "rx-gg1",
            RxPreset::Eq1 => "rx-eq1",
            RxPreset::Ll1 => "rx-ll1",
        }
    }
}

impl fmt::Display for RxPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RxPreset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "rx-gg1" | "gg1" => Ok(RxPreset::Gg1),
            "rx-eq1" | "eq1" => Ok(RxPreset::Eq1),
            "rx-ll1" | "ll1" => Ok(RxPreset::Ll1),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

/// Complete parameter set of the two-bus microgrid: two inverters, the
/// connecting line, and one RL load per bus, plus the synchronous frame
/// frequency `omega0`.
///
/// `omega0` defaults to the nominal frequency and is replaced by the solved
/// steady-state value when an equilibrium is available (see
/// [`MicrogridConfig::with_omega0`]); all line, load, and quasi-stationary
/// flow expressions evaluate at this frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrogridConfig {
    pub inverter_i: InverterParams,
    pub inverter_k: InverterParams,
    pub line: LineParams,
    pub load_i: LoadParams,
    pub load_k: LoadParams,
    /// Synchronous frame frequency (rad/s).
    pub omega0: f64,
}

impl Default for MicrogridConfig {
    fn default() -> Self {
        let inverter = InverterParams::default();
        MicrogridConfig {
            inverter_i: inverter,
            inverter_k: inverter,
            line: LineParams::default(),
            load_i: LoadParams::new(20.0, 15e-3),
            load_k: LoadParams::new(40.0, 40e-3),
            omega0: inverter.omega_n,
        }
    }
}

impl MicrogridConfig {
    /// Default parameters with the line of `preset`.
    pub fn preset(preset: RxPreset) -> Self {
        MicrogridConfig {
            line: preset.line(),
            ..MicrogridConfig::default()
        }
    }

    /// Same configuration with both inverters' droop gains replaced.
    pub fn with_droop_gains(mut self, k_p: f64, k_q: f64) -> Self {
        self.inverter_i.k_p = k_p;
        self.inverter_i.k_q = k_q;
        self.inverter_k.k_p = k_p;
        self.inverter_k.k_q = k_q;
        self
    }

    /// Same configuration with the synchronous frequency replaced.
    pub fn with_omega0(mut self, omega0: f64) -> Self {
        self.omega0 = omega0;
        self
    }

    /// Checks that every parameter is finite and strictly positive.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inverter_keys = |section: &'static str, p: &InverterParams| {
            [
                (format!("{section}.R_f"), p.r_f),
                (format!("{section}.L_f"), p.l_f),
                (format!("{section}.C_f"), p.c_f),
                (format!("{section}.k_p"), p.k_p),
                (format!("{section}.k_q"), p.k_q),
                (format!("{section}.tau"), p.tau),
                (format!("{section}.omega_n"), p.omega_n),
                (format!("{section}.V_n"), p.v_n),
                (format!("{section}.K_PV"), p.k_pv),
                (format!("{section}.K_IV"), p.k_iv),
                (format!("{section}.K_PC"), p.k_pc),
                (format!("{section}.K_IC"), p.k_ic),
            ]
        };
        let mut entries: Vec<(String, f64)> = Vec::new();
        entries.extend(inverter_keys("inverter_i", &self.inverter_i));
        entries.extend(inverter_keys("inverter_k", &self.inverter_k));
        entries.push(("line.R_ik".to_string(), self.line.r_ik));
        entries.push(("line.L_ik".to_string(), self.line.l_ik));
        entries.push(("load_i.R_l".to_string(), self.load_i.r_l));
        entries.push(("load_i.L_l".to_string(), self.load_i.l_l));
        entries.push(("load_k.R_l".to_string(), self.load_k.r_l));
        entries.push(("load_k.L_l".to_string(), self.load_k.l_l));
        for (key, value) in entries {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { key: leak(key) });
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive {
                    key: leak(key),
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Interns a key path for the error type; validation failures are terminal,
/// so the leak is bounded by the number of distinct keys.
fn leak(key: String) -> &'static str {
    Box::leak(key.into_boxed_str())
}

mod schema {
    //! Serde view of the config file. Every key is optional; omissions take
    //! the built-in defaults. Unknown keys are rejected with a message that
    //! lists the valid keys of the offending section.

    use serde::{Deserialize, Serialize};

    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    pub struct File {
        pub inverter_i: Inverter,
        pub inverter_k: Inverter,
        pub line: Line,
        pub load_i: Load,
        pub load_k: Load,
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    pub struct Inverter {
        #[serde(rename = "R_f")]
        pub r_f: f64,
        #[serde(rename = "L_f")]
        pub l_f: f64,
        #[serde(rename = "C_f")]
        pub c_f: f64,
        pub k_p: f64,
        pub k_q: f64,
        pub tau: f64,
        pub omega_n: f64,
        #[serde(rename = "V_n")]
        pub v_n: f64,
        #[serde(rename = "K_PV")]
        pub k_pv: f64,
        #[serde(rename = "K_IV")]
        pub k_iv: f64,
        #[serde(rename = "K_PC")]
        pub k_pc: f64,
        #[serde(rename = "K_IC")]
        pub k_ic: f64,
    }

    impl Default for Inverter {
        fn default() -> Self {
            let p = super::InverterParams::default();
            Inverter {
                r_f: p.r_f,
                l_f: p.l_f,
                c_f: p.c_f,
                k_p: p.k_p,
                k_q: p.k_q,
                tau: p.tau,
                omega_n: p.omega_n,
                v_n: p.v_n,
                k_pv: p.k_pv,
                k_iv: p.k_iv,
                k_pc: p.k_pc,
                k_ic: p.k_ic,
            }
        }
    }

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    pub struct Line {
        #[serde(rename = "R_ik")]
        pub r_ik: f64,
        #[serde(rename = "L_ik")]
        pub l_ik: f64,
    }

    impl Default for Line {
        fn default() -> Self {
            let p = super::LineParams::default();
            Line {
                r_ik: p.r_ik,
                l_ik: p.l_ik,
            }
        }
    }

    /// The two buses default to different loads, so omitted keys are kept
    /// as `None` here and resolved per bus when building the config.
    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    pub struct Load {
        #[serde(rename = "R_l")]
        pub r_l: Option<f64>,
        #[serde(rename = "L_l")]
        pub l_l: Option<f64>,
    }
}

impl Serialize for MicrogridConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        schema::File::from(self).serialize(serializer)
    }
}

impl From<&MicrogridConfig> for schema::File {
    fn from(cfg: &MicrogridConfig) -> Self {
        let inverter = |p: &InverterParams| schema::Inverter {
            r_f: p.r_f,
            l_f: p.l_f,
            c_f: p.c_f,
            k_p: p.k_p,
            k_q: p.k_q,
            tau: p.tau,
            omega_n: p.omega_n,
            v_n: p.v_n,
            k_pv: p.k_pv,
            k_iv: p.k_iv,
            k_pc: p.k_pc,
            k_ic: p.k_ic,
        };
        schema::File {
            inverter_i: inverter(&cfg.inverter_i),
            inverter_k: inverter(&cfg.inverter_k),
            line: schema::Line {
                r_ik: cfg.line.r_ik,
                l_ik: cfg.line.l_ik,
            },
            load_i: schema::Load {
                r_l: Some(cfg.load_i.r_l),
                l_l: Some(cfg.load_i.l_l),
            },
            load_k: schema::Load {
                r_l: Some(cfg.load_k.r_l),
                l_l: Some(cfg.load_k.l_l),
            },
        }
    }
}

impl schema::File {
    fn into_config(self) -> MicrogridConfig {
        let inverter = |p: schema::Inverter| InverterParams {
            r_f: p.r_f,
            l_f: p.l_f,
            c_f: p.c_f,
            k_p: p.k_p,
            k_q: p.k_q,
            tau: p.tau,
            omega_n: p.omega_n,
            v_n: p.v_n,
            k_pv: p.k_pv,
            k_iv: p.k_iv,
            k_pc: p.k_pc,
            k_ic: p.k_ic,
        };
        let load = |p: schema::Load, fallback: LoadParams| LoadParams {
            r_l: p.r_l.unwrap_or(fallback.r_l),
            l_l: p.l_l.unwrap_or(fallback.l_l),
        };
        let defaults = MicrogridConfig::default();
        let inverter_i = inverter(self.inverter_i);
        MicrogridConfig {
            omega0: inverter_i.omega_n,
            inverter_i,
            inverter_k: inverter(self.inverter_k),
            line: LineParams::new(self.line.r_ik, self.line.l_ik),
            load_i: load(self.load_i, defaults.load_i),
            load_k: load(self.load_k, defaults.load_k),
        }
    }
}

/// Parses a TOML config. Missing sections and keys take the built-in
/// defaults; unknown keys fail with a message listing the valid keys;
/// non-positive values fail naming the key.
pub fn parse_config(text: &str) -> Result<MicrogridConfig, ConfigError> {
    let file: schema::File =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg = file.into_config();
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a config to TOML text that [`parse_config`] reparses to an
/// identical configuration.
pub fn serialize_config(cfg: &MicrogridConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serialization cannot fail")
}
