//! The four nonlinear dynamic models of the two-inverter microgrid and the
//! shared power-calculation helpers.
//!
//! All models share the droop outer loop per inverter
//! `tau * domega = -omega + omega_n - k_p * P` and
//! `tau * dV = -V + V_n - k_q * Q`, and the same RL load dynamics. They
//! differ in how the injected powers `P`, `Q` and the network are modelled:
//!
//! * [`ModelKind::Detailed`] (28 states): LC output filter with cascaded PI
//!   voltage/current loops per inverter, dynamic line and load currents.
//! * [`ModelKind::Em5`] (12 states): the inverter is an ideal voltage source
//!   `v_odq = e * V`, line and load currents stay dynamic.
//! * [`ModelKind::Conv3`] (10 states): the line is replaced by its
//!   quasi-stationary (zero-order) power flow; load currents stay dynamic.
//! * [`ModelKind::Hf3`] (10 states): first-order Taylor correction of the
//!   line flow in terms of the subsynchronous conductance/susceptance,
//!   which makes the voltage/frequency rows an implicit mass-matrix system.
//!
//! Sign conventions: the line current `I_DQ,ik` flows from bus i to bus k,
//! so bus k's output current and line power use `-I_DQ,ik`. Synchronous
//! frame quantities rotate at the configured `omega0`.

use crate::config::MicrogridConfig;
use crate::frames::{e, j, rotation_raw};
use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use thiserror::Error;

/// Model evaluation failure.
#[derive(Debug, Error)]
pub enum ModelError {
    /// State vector length does not match the model layout.
    #[error("state has dimension {got}, expected {expected} for {kind}")]
    DimensionMismatch {
        kind: ModelKind,
        got: usize,
        expected: usize,
    },
    /// The voltage-row mass matrix of the Taylor-corrected model is
    /// numerically singular: the first-order line approximation breaks down
    /// in this parameter regime.
    #[error("singular voltage mass matrix (condition estimate {cond:.3e})")]
    SingularMass { cond: f64 },
}

/// Identity of one of the four dynamic models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Detailed average model with filter and inner control loops.
    Detailed,
    /// Electromagnetic 5th-order-per-inverter reduction.
    Em5,
    /// Conventional 3rd-order reduction with static line flow.
    Conv3,
    /// High-fidelity 3rd-order reduction with Taylor line correction.
    Hf3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Detailed,
        ModelKind::Em5,
        ModelKind::Conv3,
        ModelKind::Hf3,
    ];

    /// Number of states in this model's flat layout.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Detailed => 28,
            ModelKind::Em5 => 12,
            ModelKind::Conv3 | ModelKind::Hf3 => 10,
        }
    }

    /// Labels of the flat state layout, in order.
    pub fn state_labels(self) -> Vec<&'static str> {
        let head = ["delta_i", "delta_k", "omega_i", "omega_k", "V_i", "V_k"];
        let line = ["I_D_ik", "I_Q_ik"];
        let loads = ["I_D_li", "I_Q_li", "I_D_lk", "I_Q_lk"];
        let mut labels: Vec<&'static str> = head.to_vec();
        match self {
            ModelKind::Detailed => {
                labels.extend([
                    "phi_d_i", "phi_q_i", "phi_d_k", "phi_q_k", "gamma_d_i", "gamma_q_i",
                    "gamma_d_k", "gamma_q_k", "i_d_i", "i_q_i", "i_d_k", "i_q_k", "vo_d_i",
                    "vo_q_i", "vo_d_k", "vo_q_k",
                ]);
                labels.extend(line);
                labels.extend(loads);
            }
            ModelKind::Em5 => {
                labels.extend(line);
                labels.extend(loads);
            }
            ModelKind::Conv3 | ModelKind::Hf3 => {
                labels.extend(loads);
            }
        }
        labels
    }

    /// The CLI spelling: `detailed`, `em5`, `conv3`, `hf3`.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Detailed => "detailed",
            ModelKind::Em5 => "em5",
            ModelKind::Conv3 => "conv3",
            ModelKind::Hf3 => "hf3",
        }
    }

    /// Index of the first load-current state.
    pub(crate) fn load_offset(self) -> usize {
        match self {
            ModelKind::Detailed => 24,
            ModelKind::Em5 => 8,
            ModelKind::Conv3 | ModelKind::Hf3 => 6,
        }
    }

    /// Index of the line-current state pair, if this model has one.
    pub(crate) fn line_offset(self) -> Option<usize> {
        match self {
            ModelKind::Detailed => Some(22),
            ModelKind::Em5 => Some(6),
            ModelKind::Conv3 | ModelKind::Hf3 => None,
        }
    }

    /// Default cold-start state: angles zero, frequencies and voltages at
    /// their nominal setpoints, all currents and integrators zero. The
    /// detailed model's filter capacitor voltages start at `e * V_n` so the
    /// output voltage is consistent with `V = V_n`.
    pub fn cold_start(self, cfg: &MicrogridConfig) -> StateVector {
        let mut x = DVector::zeros(self.dim());
        x[OMEGA_I] = cfg.inverter_i.omega_n;
        x[OMEGA_K] = cfg.inverter_k.omega_n;
        x[V_I] = cfg.inverter_i.v_n;
        x[V_K] = cfg.inverter_k.v_n;
        if self == ModelKind::Detailed {
            x[det::VO_I] = cfg.inverter_i.v_n;
            x[det::VO_K] = cfg.inverter_k.v_n;
        }
        StateVector { kind: self, data: x }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "detailed" => Ok(ModelKind::Detailed),
            "em5" => Ok(ModelKind::Em5),
            "conv3" => Ok(ModelKind::Conv3),
            "hf3" => Ok(ModelKind::Hf3),
            other => Err(ConfigError::UnknownModel(other.to_string())),
        }
    }
}

// Shared head of every layout.
pub(crate) const DELTA_I: usize = 0;
pub(crate) const DELTA_K: usize = 1;
pub(crate) const OMEGA_I: usize = 2;
pub(crate) const OMEGA_K: usize = 3;
pub(crate) const V_I: usize = 4;
pub(crate) const V_K: usize = 5;

/// Detailed-model block offsets after the shared head. Each constant names
/// inverter i's dq pair; inverter k's sits two entries later (`.. + 2 * r`
/// with `r` being 0 for i and 1 for k).
pub(crate) mod det {
    pub const PHI_I: usize = 6;
    pub const GAMMA_I: usize = 10;
    pub const I_I: usize = 14;
    pub const VO_I: usize = 18;
    pub const VO_K: usize = 20;
    pub const I_IK: usize = 22;
    pub const I_LI: usize = 24;
}

/// A flat state vector tagged with its model layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    kind: ModelKind,
    data: DVector<f64>,
}

impl StateVector {
    /// Wraps a raw vector, checking its length against the layout.
    pub fn new(kind: ModelKind, data: DVector<f64>) -> Result<Self, ModelError> {
        if data.len() != kind.dim() {
            return Err(ModelError::DimensionMismatch {
                kind,
                got: data.len(),
                expected: kind.dim(),
            });
        }
        Ok(StateVector { kind, data })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }
}

/// Active and reactive power (W, var).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPair {
    pub p: f64,
    pub q: f64,
}

fn vec2(x: &DVector<f64>, at: usize) -> Vector2<f64> {
    Vector2::new(x[at], x[at + 1])
}

fn set2(out: &mut DVector<f64>, at: usize, v: Vector2<f64>) {
    out[at] = v[0];
    out[at + 1] = v[1];
}

/// Power delivered through a synchronous-frame current into a local-dq bus
/// voltage: `P = I^T T(delta) v`, `Q = I^T J T(delta) v`. For the reduced
/// models the bus voltage is `e * V`.
pub fn load_power(delta: f64, v_odq: Vector2<f64>, i_load: Vector2<f64>) -> PowerPair {
    let tv = rotation_raw(delta) * v_odq;
    PowerPair {
        p: i_load.dot(&tv),
        q: i_load.dot(&(j() * tv)),
    }
}

/// Quasi-stationary line flow between the buses.
///
/// Returns the complex current phasor `I0` in the synchronous frame and the
/// zero-order powers injected into the line at each end: `(p0_ik, q0_ik)`
/// measured at bus i and `(p0_ki, q0_ki)` at bus k (index swap).
pub fn static_line_flow(
    delta_i: f64,
    delta_k: f64,
    v_i: f64,
    v_k: f64,
    line: &crate::config::LineParams,
    omega0: f64,
) -> (Complex64, f64, f64, f64, f64) {
    let x = line.reactance(omega0);
    let ei = Complex64::from_polar(v_i, delta_i);
    let ek = Complex64::from_polar(v_k, delta_k);
    let i0 = (ei - ek) / Complex64::new(line.r_ik, x);
    let (p_ik, q_ik) = static_end_power(delta_i, delta_k, v_i, v_k, line, omega0);
    let (p_ki, q_ki) = static_end_power(delta_k, delta_i, v_k, v_i, line, omega0);
    (i0, p_ik, q_ik, p_ki, q_ki)
}

/// Zero-order power injected into the line at the `r` end, the other end
/// being `o`: `P0 = G V_r^2 - G V_r V_o cos + B V_r V_o sin`,
/// `Q0 = B V_r^2 - B V_r V_o cos - G V_r V_o sin` of the angle difference.
fn static_end_power(
    delta_r: f64,
    delta_o: f64,
    v_r: f64,
    v_o: f64,
    line: &crate::config::LineParams,
    omega0: f64,
) -> (f64, f64) {
    let (g, b) = line.admittance(omega0);
    let (s, c) = (delta_r - delta_o).sin_cos();
    let cross = v_r * v_o;
    (
        g * v_r * v_r - g * cross * c + b * cross * s,
        b * v_r * v_r - b * cross * c - g * cross * s,
    )
}

/// First-order Taylor-corrected line power at the i end.
///
/// Extends the zero-order flow with the six derivative terms in
/// `(dv_i, dv_k, ddelta_i, ddelta_k)` weighted by the subsynchronous
/// conductance `G'` and susceptance `B'`; with `G' = B' = 0` (or all
/// derivatives zero) it reduces to the zero-order flow. The k-end powers
/// follow by swapping the index pairs.
#[allow(clippy::too_many_arguments)]
pub fn taylor_line_power(
    delta_i: f64,
    delta_k: f64,
    v_i: f64,
    v_k: f64,
    ddelta_i: f64,
    ddelta_k: f64,
    dv_i: f64,
    dv_k: f64,
    line: &crate::config::LineParams,
    omega0: f64,
) -> (f64, f64) {
    let (gp, bp) = line.subsynchronous(omega0);
    taylor_line_power_with(
        delta_i, delta_k, v_i, v_k, ddelta_i, ddelta_k, dv_i, dv_k, line, omega0, gp, bp,
    )
}

/// [`taylor_line_power`] with explicitly supplied subsynchronous
/// coefficients, exposing the exact reduction to the zero-order flow at
/// `g_prime = b_prime = 0`.
#[allow(clippy::too_many_arguments)]
pub fn taylor_line_power_with(
    delta_i: f64,
    delta_k: f64,
    v_i: f64,
    v_k: f64,
    ddelta_i: f64,
    ddelta_k: f64,
    dv_i: f64,
    dv_k: f64,
    line: &crate::config::LineParams,
    omega0: f64,
    gp: f64,
    bp: f64,
) -> (f64, f64) {
    let (p0, q0) = static_end_power(delta_i, delta_k, v_i, v_k, line, omega0);
    let (s, c) = (delta_i - delta_k).sin_cos();
    let p1 = p0 - gp * v_i * dv_i + gp * v_i * dv_k * c - bp * v_i * dv_k * s
        - bp * v_i * v_i * ddelta_i
        + gp * v_i * v_k * ddelta_k * s
        + bp * v_i * v_k * ddelta_k * c;
    let q1 = q0 + gp * v_i * v_i * ddelta_i - bp * v_i * dv_i
        + gp * v_i * dv_k * s
        + bp * v_i * dv_k * c
        - gp * v_i * v_k * ddelta_k * c
        + bp * v_i * v_k * ddelta_k * s;
    (p1, q1)
}

/// Per-inverter droop row: `tau * d = -value + setpoint - gain * power`.
fn droop(tau: f64, value: f64, setpoint: f64, gain: f64, power: f64) -> f64 {
    (-value + setpoint - gain * power) / tau
}

/// Injected powers `(P_i, Q_i)` and `(P_k, Q_k)` at the current state,
/// consistent with the given model's own network representation.
pub fn injected_power(
    kind: ModelKind,
    x: &DVector<f64>,
    cfg: &MicrogridConfig,
) -> Result<(PowerPair, PowerPair), ModelError> {
    check_dim(kind, x)?;
    match kind {
        ModelKind::Detailed => {
            let (pi, qi) = detailed_bus_power(x, 0);
            let (pk, qk) = detailed_bus_power(x, 1);
            Ok((PowerPair { p: pi, q: qi }, PowerPair { p: pk, q: qk }))
        }
        ModelKind::Em5 => {
            let i_ik = vec2(x, 6);
            let p_i = reduced_bus_power(x, 0, ModelKind::Em5, i_ik);
            let p_k = reduced_bus_power(x, 1, ModelKind::Em5, -i_ik);
            Ok((p_i, p_k))
        }
        ModelKind::Conv3 | ModelKind::Hf3 => {
            // At a state snapshot the derivative terms of the Taylor
            // correction are not part of the state; both 3rd-order models
            // report the zero-order flow here.
            let (p_ik, q_ik) = static_end_power(
                x[DELTA_I],
                x[DELTA_K],
                x[V_I],
                x[V_K],
                &cfg.line,
                cfg.omega0,
            );
            let (p_ki, q_ki) = static_end_power(
                x[DELTA_K],
                x[DELTA_I],
                x[V_K],
                x[V_I],
                &cfg.line,
                cfg.omega0,
            );
            let off = kind.load_offset();
            let l_i = load_power(x[DELTA_I], e() * x[V_I], vec2(x, off));
            let l_k = load_power(x[DELTA_K], e() * x[V_K], vec2(x, off + 2));
            Ok((
                PowerPair {
                    p: l_i.p + p_ik,
                    q: l_i.q + q_ik,
                },
                PowerPair {
                    p: l_k.p + p_ki,
                    q: l_k.q + q_ki,
                },
            ))
        }
    }
}

/// Detailed-model injected power at bus `r` (0 = i, 1 = k):
/// `P = io^T vo` with `io = T^-1(delta) (sign * I_ik + I_l)`.
fn detailed_bus_power(x: &DVector<f64>, r: usize) -> (f64, f64) {
    let sign = if r == 0 { 1.0 } else { -1.0 };
    let delta = x[DELTA_I + r];
    let vo = vec2(x, det::VO_I + 2 * r);
    let i_ik = vec2(x, det::I_IK);
    let i_l = vec2(x, det::I_LI + 2 * r);
    let io = rotation_raw(delta).transpose() * (sign * i_ik + i_l);
    (io.dot(&vo), io.dot(&(j() * vo)))
}

/// Reduced-model injected power at bus `r` with ideal voltage `e * V_r`:
/// the full bus current (line share already signed) into `T(delta) e V`.
fn reduced_bus_power(
    x: &DVector<f64>,
    r: usize,
    kind: ModelKind,
    line_share: Vector2<f64>,
) -> PowerPair {
    let delta = x[DELTA_I + r];
    let v = x[V_I + r];
    let i_l = vec2(x, kind.load_offset() + 2 * r);
    let tv = rotation_raw(delta) * (e() * v);
    let total = line_share + i_l;
    PowerPair {
        p: total.dot(&tv),
        q: total.dot(&(j() * tv)),
    }
}

fn check_dim(kind: ModelKind, x: &DVector<f64>) -> Result<(), ModelError> {
    if x.len() != kind.dim() {
        return Err(ModelError::DimensionMismatch {
            kind,
            got: x.len(),
            expected: kind.dim(),
        });
    }
    Ok(())
}

/// Evaluates the right-hand side of `kind` at state `x`.
pub fn rhs(
    kind: ModelKind,
    x: &DVector<f64>,
    cfg: &MicrogridConfig,
) -> Result<DVector<f64>, ModelError> {
    check_dim(kind, x)?;
    match kind {
        ModelKind::Detailed => Ok(detailed_rhs(x, cfg)),
        ModelKind::Em5 => Ok(em5_rhs(x, cfg)),
        ModelKind::Conv3 => Ok(conv3_rhs(x, cfg)),
        ModelKind::Hf3 => hf3_rhs(x, cfg),
    }
}

/// [`rhs`] on a tagged state.
pub fn rhs_state(x: &StateVector, cfg: &MicrogridConfig) -> Result<StateVector, ModelError> {
    Ok(StateVector {
        kind: x.kind,
        data: rhs(x.kind, &x.data, cfg)?,
    })
}

/// Detailed average model: LC filter, cascaded PI voltage/current loops
/// with inductor feed-forward, droop outer loop, dynamic line and loads.
fn detailed_rhs(x: &DVector<f64>, cfg: &MicrogridConfig) -> DVector<f64> {
    let mut dx = DVector::zeros(28);
    let w0 = cfg.omega0;
    let i_ik = vec2(x, det::I_IK);

    for r in 0..2 {
        let inv = if r == 0 { &cfg.inverter_i } else { &cfg.inverter_k };
        let load = if r == 0 { &cfg.load_i } else { &cfg.load_k };
        let sign = if r == 0 { 1.0 } else { -1.0 };
        let delta = x[DELTA_I + r];
        let omega = x[OMEGA_I + r];
        let v = x[V_I + r];
        let phi = vec2(x, det::PHI_I + 2 * r);
        let gamma = vec2(x, det::GAMMA_I + 2 * r);
        let i_f = vec2(x, det::I_I + 2 * r);
        let vo = vec2(x, det::VO_I + 2 * r);
        let i_l = vec2(x, det::I_LI + 2 * r);

        let t = rotation_raw(delta);
        let io = t.transpose() * (sign * i_ik + i_l);
        let p = io.dot(&vo);
        let q = io.dot(&(j() * vo));

        // Outer droop loop and the angle of the local frame.
        dx[DELTA_I + r] = omega - w0;
        dx[OMEGA_I + r] = droop(inv.tau, omega, inv.omega_n, inv.k_p, p);
        dx[V_I + r] = droop(inv.tau, v, inv.v_n, inv.k_q, q);

        // Cascaded voltage and current PI loops with inductor feed-forward.
        let v_err = e() * v - vo;
        let i_ref = inv.k_pv * v_err + inv.k_iv * phi;
        let i_err = i_ref - i_f;
        let v_cmd = inv.k_pc * i_err + inv.k_ic * gamma + omega * inv.l_f * (j() * i_f);
        set2(&mut dx, det::PHI_I + 2 * r, v_err);
        set2(&mut dx, det::GAMMA_I + 2 * r, i_err);

        // LC filter.
        let di = (omega * inv.l_f * (j() * i_f) - inv.r_f * i_f + v_cmd - vo) / inv.l_f;
        let dvo = (omega * inv.c_f * (j() * vo) + i_f - io) / inv.c_f;
        set2(&mut dx, det::I_I + 2 * r, di);
        set2(&mut dx, det::VO_I + 2 * r, dvo);

        // RL load at this bus, in the synchronous frame.
        let dil = ((-load.r_l) * i_l + w0 * load.l_l * (j() * i_l) + t * vo) / load.l_l;
        set2(&mut dx, det::I_LI + 2 * r, dil);
    }

    // Line current, synchronous frame, driven by the bus voltage difference.
    let vo_i = rotation_raw(x[DELTA_I]) * vec2(x, det::VO_I);
    let vo_k = rotation_raw(x[DELTA_K]) * vec2(x, det::VO_K);
    let line = &cfg.line;
    let dik =
        ((-line.r_ik) * i_ik + w0 * line.l_ik * (j() * i_ik) + vo_i - vo_k) / line.l_ik;
    set2(&mut dx, det::I_IK, dik);

    dx
}

/// EM 5th-order model: ideal voltage sources `e * V`, dynamic line and
/// load currents.
fn em5_rhs(x: &DVector<f64>, cfg: &MicrogridConfig) -> DVector<f64> {
    let mut dx = DVector::zeros(12);
    let w0 = cfg.omega0;
    let i_ik = vec2(x, 6);

    for r in 0..2 {
        let inv = if r == 0 { &cfg.inverter_i } else { &cfg.inverter_k };
        let load = if r == 0 { &cfg.load_i } else { &cfg.load_k };
        let sign = if r == 0 { 1.0 } else { -1.0 };
        let delta = x[DELTA_I + r];
        let omega = x[OMEGA_I + r];
        let v = x[V_I + r];
        let i_l = vec2(x, 8 + 2 * r);

        let power = reduced_bus_power(x, r, ModelKind::Em5, sign * i_ik);
        dx[DELTA_I + r] = omega - w0;
        dx[OMEGA_I + r] = droop(inv.tau, omega, inv.omega_n, inv.k_p, power.p);
        dx[V_I + r] = droop(inv.tau, v, inv.v_n, inv.k_q, power.q);

        let tv = rotation_raw(delta) * (e() * v);
        let dil = ((-load.r_l) * i_l + w0 * load.l_l * (j() * i_l) + tv) / load.l_l;
        set2(&mut dx, 8 + 2 * r, dil);
    }

    let tv_i = rotation_raw(x[DELTA_I]) * (e() * x[V_I]);
    let tv_k = rotation_raw(x[DELTA_K]) * (e() * x[V_K]);
    let line = &cfg.line;
    let dik =
        ((-line.r_ik) * i_ik + w0 * line.l_ik * (j() * i_ik) + tv_i - tv_k) / line.l_ik;
    set2(&mut dx, 6, dik);

    dx
}

/// Conventional 3rd-order model: quasi-stationary line power flow, dynamic
/// load currents.
fn conv3_rhs(x: &DVector<f64>, cfg: &MicrogridConfig) -> DVector<f64> {
    let mut dx = DVector::zeros(10);
    let w0 = cfg.omega0;

    for r in 0..2 {
        let inv = if r == 0 { &cfg.inverter_i } else { &cfg.inverter_k };
        let load = if r == 0 { &cfg.load_i } else { &cfg.load_k };
        let o = 1 - r;
        let delta = x[DELTA_I + r];
        let omega = x[OMEGA_I + r];
        let v = x[V_I + r];
        let i_l = vec2(x, 6 + 2 * r);

        let (p_line, q_line) = static_end_power(
            delta,
            x[DELTA_I + o],
            v,
            x[V_I + o],
            &cfg.line,
            w0,
        );
        let l = load_power(delta, e() * v, i_l);
        dx[DELTA_I + r] = omega - w0;
        dx[OMEGA_I + r] = droop(inv.tau, omega, inv.omega_n, inv.k_p, l.p + p_line);
        dx[V_I + r] = droop(inv.tau, v, inv.v_n, inv.k_q, l.q + q_line);

        let tv = rotation_raw(delta) * (e() * v);
        let dil = ((-load.r_l) * i_l + w0 * load.l_l * (j() * i_l) + tv) / load.l_l;
        set2(&mut dx, 6 + 2 * r, dil);
    }

    dx
}

/// High-fidelity 3rd-order model.
///
/// The Taylor-corrected line powers depend on the state derivatives, so the
/// voltage rows form a 2x2 linear system `M [dV_i, dV_k] = g` once the
/// explicit `ddelta = omega - omega0` is substituted; the frequency rows
/// then evaluate with the solved derivatives. Reduces to [`conv3_rhs`] when
/// the subsynchronous coefficients vanish.
fn hf3_rhs(x: &DVector<f64>, cfg: &MicrogridConfig) -> Result<DVector<f64>, ModelError> {
    let (gp, bp) = cfg.line.subsynchronous(cfg.omega0);
    hf3_rhs_with_subsync(x, cfg, gp, bp)
}

/// The high-fidelity 3rd-order right-hand side with explicitly supplied
/// subsynchronous coefficients; `g_prime = b_prime = 0` reproduces
/// the conventional model exactly.
pub fn hf3_rhs_with_subsync(
    x: &DVector<f64>,
    cfg: &MicrogridConfig,
    gp: f64,
    bp: f64,
) -> Result<DVector<f64>, ModelError> {
    let mut dx = DVector::zeros(10);
    let w0 = cfg.omega0;
    let ddelta = [x[OMEGA_I] - w0, x[OMEGA_K] - w0];
    let delta = [x[DELTA_I], x[DELTA_K]];
    let v = [x[V_I], x[V_K]];

    // Q at the r end as an affine function of (dV_i, dV_k): base value with
    // both derivatives zero, plus exact coefficients extracted from the
    // affine Taylor formula by unit evaluations.
    let q_line = |r: usize, dv_i: f64, dv_k: f64| {
        let o = 1 - r;
        let (dv_r, dv_o) = if r == 0 { (dv_i, dv_k) } else { (dv_k, dv_i) };
        taylor_line_power_with(
            delta[r], delta[o], v[r], v[o], ddelta[r], ddelta[o], dv_r, dv_o, &cfg.line, w0,
            gp, bp,
        )
        .1
    };

    let inv = [&cfg.inverter_i, &cfg.inverter_k];
    let load = [&cfg.load_i, &cfg.load_k];
    let mut m = Matrix2::zeros();
    let mut g = Vector2::zeros();
    let mut q_load = [0.0; 2];
    for r in 0..2 {
        let i_l = vec2(x, 6 + 2 * r);
        let lp = load_power(delta[r], e() * v[r], i_l);
        q_load[r] = lp.q;
        let q0 = q_line(r, 0.0, 0.0);
        let ci = q_line(r, 1.0, 0.0) - q0;
        let ck = q_line(r, 0.0, 1.0) - q0;
        // tau dV_r + k_q * (dQ/ddV) dV = -V_r + V_n - k_q (Q_load + Q_base)
        m[(r, 0)] = inv[r].k_q * ci;
        m[(r, 1)] = inv[r].k_q * ck;
        m[(r, r)] += inv[r].tau;
        g[r] = -v[r] + inv[r].v_n - inv[r].k_q * (lp.q + q0);
    }

    let det = m.determinant();
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() < 1e-12 * scale * scale {
        return Err(ModelError::SingularMass {
            cond: scale * scale / det.abs().max(f64::MIN_POSITIVE),
        });
    }
    let dv = m.try_inverse().expect("determinant checked above") * g;

    for r in 0..2 {
        let o = 1 - r;
        let (dv_r, dv_o) = (dv[r], dv[o]);
        let (p1, _) = taylor_line_power_with(
            delta[r], delta[o], v[r], v[o], ddelta[r], ddelta[o], dv_r, dv_o, &cfg.line, w0,
            gp, bp,
        );
        let i_l = vec2(x, 6 + 2 * r);
        let lp = load_power(delta[r], e() * v[r], i_l);
        dx[DELTA_I + r] = ddelta[r];
        dx[OMEGA_I + r] = droop(inv[r].tau, x[OMEGA_I + r], inv[r].omega_n, inv[r].k_p, lp.p + p1);
        dx[V_I + r] = dv[r];

        let tv = rotation_raw(delta[r]) * (e() * v[r]);
        let dil =
            ((-load[r].r_l) * i_l + w0 * load[r].l_l * (j() * i_l) + tv) / load[r].l_l;
        set2(&mut dx, 6 + 2 * r, dil);
    }

    Ok(dx)
}
