//! Small-signal linearization of the four models about an equilibrium.
//!
//! Each model is linearized in descriptor form `Gamma * dx/dt = A * dx`.
//! The droop rows are scaled by the inverse droop gains so the power
//! Jacobian blocks enter `A` unscaled; consequently the analytic path
//! requires strictly positive gains. For the Taylor-corrected model the
//! line powers depend on state derivatives, which shows up as off-diagonal
//! entries in `Gamma` rather than in `A`.
//!
//! [`linearize_numeric`] provides an independent central-difference
//! Jacobian of the explicit (mass-solved) right-hand side; at an
//! equilibrium it must agree with `Gamma^-1 A`.

use crate::config::MicrogridConfig;
use crate::equilibrium::Equilibrium;
use crate::error::LinearizeError;
use crate::frames::{e, j, rotation_deriv_raw, rotation_raw};
use crate::models::{self, det, ModelError, ModelKind};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Mass matrices with a 2-norm condition estimate beyond this limit are
/// refused by [`LinearModel::system_matrix`]; callers fall back to the
/// generalized eigenproblem of the pencil `(A, Gamma)`.
pub const MASS_CONDITION_LIMIT: f64 = 1e8;

/// A linearized model `Gamma * dx/dt = A * dx` about an equilibrium.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Descriptor mass matrix (identity for numerically obtained models).
    pub gamma: DMatrix<f64>,
    /// State matrix.
    pub a: DMatrix<f64>,
    /// Labels of the state entries, in layout order.
    pub state_labels: Vec<&'static str>,
    pub kind: ModelKind,
    /// The operating point this linearization is valid about.
    pub equilibrium: Equilibrium,
}

impl LinearModel {
    /// 2-norm condition estimate of the mass matrix.
    pub fn mass_condition(&self) -> f64 {
        let sv = self.gamma.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// The explicit system matrix `Gamma^-1 A`, refused when the mass
    /// matrix is near-singular.
    pub fn system_matrix(&self) -> Result<DMatrix<f64>, LinearizeError> {
        let cond = self.mass_condition();
        if !(cond < MASS_CONDITION_LIMIT) {
            return Err(LinearizeError::SingularMass { cond });
        }
        self.gamma
            .clone()
            .lu()
            .solve(&self.a)
            .ok_or(LinearizeError::SingularMass { cond })
    }
}

/// Relative Frobenius difference `|got - want|_F / |want|_F`.
pub fn relative_difference(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    (got - want).norm() / want.norm()
}

/// Assembles the closed-form descriptor pair of `kind` at `eq`.
///
/// The equilibrium must have the model's dimension; the conventional and
/// Taylor-corrected 3rd-order models share equilibria, so either one's
/// operating point is accepted for the other.
pub fn linearize_analytic(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    eq: &Equilibrium,
) -> Result<LinearModel, LinearizeError> {
    match kind {
        ModelKind::Hf3 => {
            let local = cfg.with_omega0(eq.omega0);
            let (gp, bp) = local.line.subsynchronous(local.omega0);
            linearize_hf3_with_subsync(cfg, eq, gp, bp)
        }
        _ => {
            check_gains(cfg)?;
            let local = cfg.with_omega0(eq.omega0);
            let x = require_dim(kind, eq);
            let (gamma, a) = match kind {
                ModelKind::Detailed => detailed_descriptor(x, &local),
                ModelKind::Em5 => em5_descriptor(x, &local),
                ModelKind::Conv3 => {
                    (third_order_gamma(&local), third_order_a(x, &local))
                }
                ModelKind::Hf3 => unreachable!("handled above"),
            };
            Ok(model(kind, gamma, a, eq))
        }
    }
}

/// The Taylor-corrected 3rd-order descriptor with explicitly supplied
/// subsynchronous coefficients. With `gp = bp = 0` the mass matrix loses
/// its off-diagonal couplings and the result coincides with the
/// conventional model's linearization exactly.
pub fn linearize_hf3_with_subsync(
    cfg: &MicrogridConfig,
    eq: &Equilibrium,
    gp: f64,
    bp: f64,
) -> Result<LinearModel, LinearizeError> {
    check_gains(cfg)?;
    let local = cfg.with_omega0(eq.omega0);
    let x = require_dim(ModelKind::Hf3, eq);
    let mut gamma = third_order_gamma(&local);
    let a = third_order_a(x, &local);

    // Line-power derivative couplings: the Taylor terms in (ddelta, dV)
    // belong on the left-hand side. Row scaling matches the droop rows.
    let (s, c) = (x[models::DELTA_I] - x[models::DELTA_K]).sin_cos();
    for r in 0..2 {
        let o = 1 - r;
        let s_r = if r == 0 { s } else { -s };
        let v_r = x[models::V_I + r];
        let v_o = x[models::V_I + o];
        let (w_row, v_row) = (models::OMEGA_I + r, models::V_I + r);
        let (d_r, d_o) = (models::DELTA_I + r, models::DELTA_I + o);
        let (vc_r, vc_o) = (models::V_I + r, models::V_I + o);
        gamma[(w_row, d_r)] += -bp * v_r * v_r;
        gamma[(w_row, d_o)] += gp * v_r * v_o * s_r + bp * v_r * v_o * c;
        gamma[(w_row, vc_r)] += -gp * v_r;
        gamma[(w_row, vc_o)] += gp * v_r * c - bp * v_r * s_r;
        gamma[(v_row, d_r)] += gp * v_r * v_r;
        gamma[(v_row, d_o)] += -gp * v_r * v_o * c + bp * v_r * v_o * s_r;
        gamma[(v_row, vc_r)] += -bp * v_r;
        gamma[(v_row, vc_o)] += gp * v_r * s_r + bp * v_r * c;
    }
    Ok(model(ModelKind::Hf3, gamma, a, eq))
}

/// Central-difference Jacobian of the explicit right-hand side at `eq`,
/// step `cbrt(eps) * (1 + |x_j|)` per column. The mass matrix of the
/// returned model is the identity.
pub fn linearize_numeric(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    eq: &Equilibrium,
) -> Result<LinearModel, LinearizeError> {
    let local = cfg.with_omega0(eq.omega0);
    let x = require_dim(kind, eq);
    let f = |y: &DVector<f64>| explicit_rhs(kind, y, &local);
    let a = jacobian_central(f, x, 1.0)?;
    let n = kind.dim();
    Ok(model(kind, DMatrix::identity(n, n), a, eq))
}

fn model(kind: ModelKind, gamma: DMatrix<f64>, a: DMatrix<f64>, eq: &Equilibrium) -> LinearModel {
    LinearModel {
        gamma,
        a,
        state_labels: kind.state_labels(),
        kind,
        equilibrium: eq.clone(),
    }
}

fn check_gains(cfg: &MicrogridConfig) -> Result<(), LinearizeError> {
    for inv in [&cfg.inverter_i, &cfg.inverter_k] {
        if inv.k_p <= 0.0 {
            return Err(LinearizeError::ZeroGain {
                key: "k_p",
                value: inv.k_p,
            });
        }
        if inv.k_q <= 0.0 {
            return Err(LinearizeError::ZeroGain {
                key: "k_q",
                value: inv.k_q,
            });
        }
    }
    Ok(())
}

fn require_dim(kind: ModelKind, eq: &Equilibrium) -> &DVector<f64> {
    assert_eq!(
        eq.x_star.data().len(),
        kind.dim(),
        "equilibrium has the wrong dimension for {kind}"
    );
    eq.x_star.data()
}

fn explicit_rhs(
    kind: ModelKind,
    x: &DVector<f64>,
    local: &MicrogridConfig,
) -> Result<DVector<f64>, LinearizeError> {
    models::rhs(kind, x, local).map_err(|err| match err {
        ModelError::SingularMass { cond } => LinearizeError::SingularMass { cond },
        ModelError::DimensionMismatch { .. } => {
            unreachable!("dimension fixed by the caller")
        }
    })
}

/// Central differences of `f` with per-column steps
/// `scale * cbrt(eps) * (1 + |x_j|)`.
fn jacobian_central<F>(
    f: F,
    x: &DVector<f64>,
    scale: f64,
) -> Result<DMatrix<f64>, LinearizeError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, LinearizeError>,
{
    let n = x.len();
    let base = scale * f64::EPSILON.cbrt();
    let mut jac = DMatrix::zeros(n, n);
    for col in 0..n {
        let h = base * (1.0 + x[col].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += h;
        xm[col] -= h;
        let fp = f(&xp)?;
        let fm = f(&xm)?;
        for row in 0..n {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn inverter(cfg: &MicrogridConfig, r: usize) -> &crate::config::InverterParams {
    if r == 0 {
        &cfg.inverter_i
    } else {
        &cfg.inverter_k
    }
}

fn load(cfg: &MicrogridConfig, r: usize) -> &crate::config::LoadParams {
    if r == 0 {
        &cfg.load_i
    } else {
        &cfg.load_k
    }
}

fn vec2(x: &DVector<f64>, at: usize) -> Vector2<f64> {
    Vector2::new(x[at], x[at + 1])
}

fn put2x2(m: &mut DMatrix<f64>, row: usize, col: usize, b: Matrix2<f64>) {
    for r in 0..2 {
        for c in 0..2 {
            m[(row + r, col + c)] += b[(r, c)];
        }
    }
}

fn put_col(m: &mut DMatrix<f64>, row: usize, col: usize, v: Vector2<f64>) {
    m[(row, col)] += v[0];
    m[(row + 1, col)] += v[1];
}

fn put_row(m: &mut DMatrix<f64>, row: usize, col: usize, v: Vector2<f64>) {
    m[(row, col)] += v[0];
    m[(row, col + 1)] += v[1];
}

/// RL self-dynamics block `-R I + omega0 L J`.
fn rl_block(r: f64, l: f64, omega0: f64) -> Matrix2<f64> {
    -r * Matrix2::identity() + omega0 * l * j()
}

fn detailed_descriptor(x: &DVector<f64>, cfg: &MicrogridConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let w0 = cfg.omega0;
    let mut gamma = DMatrix::zeros(28, 28);
    let mut a = DMatrix::zeros(28, 28);
    let i_ik = vec2(x, det::I_IK);

    for r in 0..2 {
        let inv = inverter(cfg, r);
        let ld = load(cfg, r);
        let sign = if r == 0 { 1.0 } else { -1.0 };
        let d = models::DELTA_I + r;
        let w = models::OMEGA_I + r;
        let v = models::V_I + r;
        let phi = det::PHI_I + 2 * r;
        let gam = det::GAMMA_I + 2 * r;
        let ii = det::I_I + 2 * r;
        let vo = det::VO_I + 2 * r;
        let il = det::I_LI + 2 * r;
        let ik = det::I_IK;

        let t = rotation_raw(x[d]);
        let dt = rotation_deriv_raw(x[d]);
        let vo_s = vec2(x, vo);
        let i_s = vec2(x, ii);
        let il_s = vec2(x, il);
        let a_r = sign * i_ik + il_s;
        let tv = t * vo_s;
        let jtv = j() * tv;

        gamma[(d, d)] = 1.0;
        gamma[(w, w)] = inv.tau / inv.k_p;
        gamma[(v, v)] = inv.tau / inv.k_q;
        for c in 0..2 {
            gamma[(phi + c, phi + c)] = 1.0;
            gamma[(gam + c, gam + c)] = 1.0;
            gamma[(ii + c, ii + c)] = inv.l_f;
            gamma[(vo + c, vo + c)] = inv.c_f;
            gamma[(il + c, il + c)] = ld.l_l;
        }

        // Angle row.
        a[(d, w)] = 1.0;

        // Droop rows: minus the power Jacobians.
        a[(w, d)] = -a_r.dot(&(dt * vo_s));
        a[(w, w)] = -1.0 / inv.k_p;
        put_row(&mut a, w, vo, -(t.transpose() * a_r));
        put_row(&mut a, w, ik, -sign * tv);
        put_row(&mut a, w, il, -tv);

        a[(v, d)] = -a_r.dot(&(j() * dt * vo_s));
        a[(v, v)] = -1.0 / inv.k_q;
        put_row(&mut a, v, vo, -((j() * t).transpose() * a_r));
        put_row(&mut a, v, ik, -sign * jtv);
        put_row(&mut a, v, il, -jtv);

        // Voltage-loop integrator: dphi = e V - vo.
        a[(phi, v)] = 1.0;
        put2x2(&mut a, phi, vo, -Matrix2::identity());

        // Current-loop integrator: dgamma = i_ref - i.
        a[(gam, v)] = inv.k_pv;
        put2x2(&mut a, gam, phi, inv.k_iv * Matrix2::identity());
        put2x2(&mut a, gam, ii, -Matrix2::identity());
        put2x2(&mut a, gam, vo, -inv.k_pv * Matrix2::identity());

        // Filter inductor rows, with the doubled rotation coupling from the
        // feed-forward term.
        put_col(&mut a, ii, w, 2.0 * inv.l_f * (j() * i_s));
        a[(ii, v)] = inv.k_pc * inv.k_pv;
        put2x2(&mut a, ii, phi, inv.k_pc * inv.k_iv * Matrix2::identity());
        put2x2(&mut a, ii, gam, inv.k_ic * Matrix2::identity());
        put2x2(
            &mut a,
            ii,
            ii,
            rl_block(inv.r_f + inv.k_pc, 2.0 * inv.l_f, w0),
        );
        put2x2(
            &mut a,
            ii,
            vo,
            -(inv.k_pc * inv.k_pv + 1.0) * Matrix2::identity(),
        );

        // Filter capacitor rows.
        put_col(&mut a, vo, d, -(dt.transpose() * a_r));
        put_col(&mut a, vo, w, inv.c_f * (j() * vo_s));
        put2x2(&mut a, vo, ii, Matrix2::identity());
        put2x2(&mut a, vo, vo, w0 * inv.c_f * j());
        put2x2(&mut a, vo, ik, -sign * t.transpose());
        put2x2(&mut a, vo, il, -t.transpose());

        // Line rows: this bus's voltage drive, signed.
        put_col(&mut a, ik, d, sign * (dt * vo_s));
        put2x2(&mut a, ik, vo, sign * t);

        // Load rows.
        put_col(&mut a, il, d, dt * vo_s);
        put2x2(&mut a, il, vo, t);
        put2x2(&mut a, il, il, rl_block(ld.r_l, ld.l_l, w0));
    }

    gamma[(det::I_IK, det::I_IK)] = cfg.line.l_ik;
    gamma[(det::I_IK + 1, det::I_IK + 1)] = cfg.line.l_ik;
    put2x2(
        &mut a,
        det::I_IK,
        det::I_IK,
        rl_block(cfg.line.r_ik, cfg.line.l_ik, w0),
    );

    (gamma, a)
}

fn em5_descriptor(x: &DVector<f64>, cfg: &MicrogridConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let w0 = cfg.omega0;
    let mut gamma = DMatrix::zeros(12, 12);
    let mut a = DMatrix::zeros(12, 12);
    let ik = 6usize;
    let i_ik = vec2(x, ik);

    for r in 0..2 {
        let inv = inverter(cfg, r);
        let ld = load(cfg, r);
        let sign = if r == 0 { 1.0 } else { -1.0 };
        let d = models::DELTA_I + r;
        let w = models::OMEGA_I + r;
        let v = models::V_I + r;
        let il = 8 + 2 * r;

        let t = rotation_raw(x[d]);
        let dt = rotation_deriv_raw(x[d]);
        let il_s = vec2(x, il);
        let a_r = sign * i_ik + il_s;
        let ev = t * e();
        let dev = dt * e();
        let tv = ev * x[v];
        let dtv = dev * x[v];
        let jtv = j() * tv;

        gamma[(d, d)] = 1.0;
        gamma[(w, w)] = inv.tau / inv.k_p;
        gamma[(v, v)] = inv.tau / inv.k_q;
        for c in 0..2 {
            gamma[(il + c, il + c)] = ld.l_l;
        }

        a[(d, w)] = 1.0;

        a[(w, d)] = -a_r.dot(&dtv);
        a[(w, w)] = -1.0 / inv.k_p;
        a[(w, v)] = -a_r.dot(&ev);
        put_row(&mut a, w, ik, -sign * tv);
        put_row(&mut a, w, il, -tv);

        a[(v, d)] = -a_r.dot(&(j() * dtv));
        a[(v, v)] = -1.0 / inv.k_q - a_r.dot(&(j() * ev));
        put_row(&mut a, v, ik, -sign * jtv);
        put_row(&mut a, v, il, -jtv);

        put_col(&mut a, ik, d, sign * dtv);
        put_col(&mut a, ik, v, sign * ev);

        put_col(&mut a, il, d, dtv);
        put_col(&mut a, il, v, ev);
        put2x2(&mut a, il, il, rl_block(ld.r_l, ld.l_l, w0));
    }

    gamma[(ik, ik)] = cfg.line.l_ik;
    gamma[(ik + 1, ik + 1)] = cfg.line.l_ik;
    put2x2(&mut a, ik, ik, rl_block(cfg.line.r_ik, cfg.line.l_ik, w0));

    (gamma, a)
}

/// Diagonal mass of both 3rd-order models before derivative couplings.
fn third_order_gamma(cfg: &MicrogridConfig) -> DMatrix<f64> {
    let mut gamma = DMatrix::zeros(10, 10);
    for r in 0..2 {
        let inv = inverter(cfg, r);
        let ld = load(cfg, r);
        gamma[(models::DELTA_I + r, models::DELTA_I + r)] = 1.0;
        gamma[(models::OMEGA_I + r, models::OMEGA_I + r)] = inv.tau / inv.k_p;
        gamma[(models::V_I + r, models::V_I + r)] = inv.tau / inv.k_q;
        for c in 0..2 {
            gamma[(6 + 2 * r + c, 6 + 2 * r + c)] = ld.l_l;
        }
    }
    gamma
}

/// State matrix shared by the conventional and Taylor-corrected 3rd-order
/// models: droop rows against the full quasi-stationary power Jacobian
/// (load and line, including cross-bus terms) plus the load dynamics.
fn third_order_a(x: &DVector<f64>, cfg: &MicrogridConfig) -> DMatrix<f64> {
    let w0 = cfg.omega0;
    let mut a = DMatrix::zeros(10, 10);
    let (g, b) = cfg.line.admittance(w0);
    let (s, c) = (x[models::DELTA_I] - x[models::DELTA_K]).sin_cos();

    for r in 0..2 {
        let o = 1 - r;
        let inv = inverter(cfg, r);
        let ld = load(cfg, r);
        let s_r = if r == 0 { s } else { -s };
        let d = models::DELTA_I + r;
        let d_o = models::DELTA_I + o;
        let w = models::OMEGA_I + r;
        let v = models::V_I + r;
        let v_o = models::V_I + o;
        let il = 6 + 2 * r;

        let t = rotation_raw(x[d]);
        let dt = rotation_deriv_raw(x[d]);
        let il_s = vec2(x, il);
        let ev = t * e();
        let dev = dt * e();
        let tv = ev * x[v];
        let dtv = dev * x[v];
        let jtv = j() * tv;
        let vr = x[v];
        let vo_val = x[v_o];
        let cross = vr * vo_val;

        // Load power partials at this bus.
        let lp_d = il_s.dot(&dtv);
        let lp_v = il_s.dot(&ev);
        let lq_d = il_s.dot(&(j() * dtv));
        let lq_v = il_s.dot(&(j() * ev));

        // Zero-order line power partials, seen from this end.
        let dp_dr = cross * (g * s_r + b * c);
        let dp_vr = 2.0 * g * vr - g * vo_val * c + b * vo_val * s_r;
        let dp_vo = -g * vr * c + b * vr * s_r;
        let dq_dr = cross * (b * s_r - g * c);
        let dq_vr = 2.0 * b * vr - b * vo_val * c - g * vo_val * s_r;
        let dq_vo = -b * vr * c - g * vr * s_r;

        a[(d, w)] = 1.0;

        a[(w, d)] = -(lp_d + dp_dr);
        a[(w, d_o)] = dp_dr;
        a[(w, w)] = -1.0 / inv.k_p;
        a[(w, v)] = -(lp_v + dp_vr);
        a[(w, v_o)] = -dp_vo;
        put_row(&mut a, w, il, -tv);

        a[(v, d)] = -(lq_d + dq_dr);
        a[(v, d_o)] = dq_dr;
        a[(v, v)] = -1.0 / inv.k_q - (lq_v + dq_vr);
        a[(v, v_o)] = -dq_vo;
        put_row(&mut a, v, il, -jtv);

        put_col(&mut a, il, d, dtv);
        put_col(&mut a, il, v, ev);
        put2x2(&mut a, il, il, rl_block(ld.r_l, ld.l_l, w0));
    }
    a
}
