//! Steady-state operating points.
//!
//! The rotating-frame models are invariant under a rigid rotation of all
//! angles and synchronous-frame currents, so an equilibrium is only unique
//! once a gauge is fixed: the first inverter's angle is pinned to zero and
//! in exchange the synchronous frequency `omega0` becomes an unknown,
//! determined by the pinned angle's own steady-state equation. Newton
//! iteration with a finite-difference Jacobian and damped line search does
//! the solving; if it stalls, the nonlinear model is integrated toward its
//! attractor and the result polished with Newton again.

use crate::config::MicrogridConfig;
use crate::error::EquilibriumError;
use crate::frames::rotation_raw;
use crate::models::{self, ModelKind, StateVector};
use nalgebra::{DMatrix, DVector};

/// Residual infinity-norm demanded of a converged equilibrium, relative to
/// `1 +` the state infinity-norm (the forward-difference Jacobian limits
/// what an absolute tolerance could reach on the stiffest model).
pub const NEWTON_TOL: f64 = 1e-10;
/// Newton iteration cap.
pub const MAX_ITERATIONS: usize = 100;

/// A converged steady-state operating point of one model.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// The steady state in the model's layout, in the gauge where the
    /// pinned angle is exactly zero.
    pub x_star: StateVector,
    /// Synchronous frequency at which the whole system rotates (rad/s).
    pub omega0: f64,
    /// Infinity-norm of the right-hand side at the solution.
    pub residual_norm: f64,
    /// State index of the angle pinned to zero (the first inverter's).
    pub angle_reference: usize,
}

impl Equilibrium {
    /// The configuration consistent with this equilibrium: the caller's
    /// parameters with the solved synchronous frequency installed.
    pub fn config(&self, cfg: &MicrogridConfig) -> MicrogridConfig {
        cfg.with_omega0(self.omega0)
    }
}

/// Solves for the steady state of `kind` under `cfg`.
///
/// `guess` warm-starts the iteration (its frequency entry seeds `omega0`);
/// without it the cold start (nominal setpoints, zero currents) is used.
/// Converged points with a non-positive bus voltage are rejected as
/// non-physical.
pub fn find_equilibrium(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    guess: Option<&StateVector>,
) -> Result<Equilibrium, EquilibriumError> {
    let n = kind.dim();
    let mut x = match guess {
        Some(g) => {
            if g.data().len() != n {
                return Err(EquilibriumError::BadGuess {
                    got: g.data().len(),
                    expected: n,
                });
            }
            g.data().clone()
        }
        None => kind.cold_start(cfg).into_data(),
    };
    x[models::DELTA_I] = 0.0;
    let mut omega0 = x[models::OMEGA_I];

    match newton(kind, cfg, x.clone(), omega0) {
        Ok((xs, w0, res)) => return accept(kind, xs, w0, res),
        Err(_) => {
            // Fall back to integrating the nonlinear model toward its
            // attractor, then polish.
            if let Some((settled, w_settled)) = settle(kind, cfg, &x, omega0) {
                x = settled;
                omega0 = w_settled;
            }
        }
    }
    let (xs, w0, res) = newton(kind, cfg, x, omega0).map_err(|(best, iters)| {
        EquilibriumError::NoConvergence {
            kind,
            best_residual: best,
            iterations: iters,
        }
    })?;
    accept(kind, xs, w0, res)
}

fn accept(
    kind: ModelKind,
    x: DVector<f64>,
    omega0: f64,
    residual_norm: f64,
) -> Result<Equilibrium, EquilibriumError> {
    for idx in [models::V_I, models::V_K] {
        if x[idx] <= 0.0 {
            return Err(EquilibriumError::NonPhysical { voltage: x[idx] });
        }
    }
    Ok(Equilibrium {
        x_star: StateVector::new(kind, x).expect("dimension maintained by solver"),
        omega0,
        residual_norm,
        angle_reference: models::DELTA_I,
    })
}

/// Residual of the augmented system: the model right-hand side evaluated
/// with the candidate synchronous frequency. The pinned angle contributes
/// its own row (which determines `omega0`) but is not an unknown.
fn residual(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    x: &DVector<f64>,
    omega0: f64,
) -> Option<DVector<f64>> {
    let local = cfg.with_omega0(omega0);
    models::rhs(kind, x, &local).ok().filter(|f| {
        f.iter().all(|v| v.is_finite())
    })
}

/// Newton iteration on the unknowns `[x without the pinned angle, omega0]`.
/// Returns the solution triple or `(best residual, iterations)` on failure.
#[allow(clippy::type_complexity)]
fn newton(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    mut x: DVector<f64>,
    mut omega0: f64,
) -> Result<(DVector<f64>, f64, f64), (f64, usize)> {
    let n = kind.dim();
    let mut best = f64::INFINITY;
    let mut f = residual(kind, cfg, &x, omega0).ok_or((best, 0))?;
    for iter in 0..MAX_ITERATIONS {
        let norm = f.amax();
        best = best.min(norm);
        if norm < NEWTON_TOL * (1.0 + x.amax()) {
            return Ok((x, omega0, norm));
        }

        let jac = jacobian(kind, cfg, &x, omega0, &f).ok_or((best, iter))?;
        let step = solve_step(&jac, &f).ok_or((best, iter))?;

        // Damped backtracking on the residual norm.
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 1.0 / 1024.0 {
            let (cx, cw) = apply_step(&x, omega0, &step, t, n);
            if let Some(cf) = residual(kind, cfg, &cx, cw) {
                if cf.amax() <= (1.0 - 0.25 * t) * norm || cf.amax() < norm {
                    x = cx;
                    omega0 = cw;
                    f = cf;
                    advanced = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !advanced {
            return Err((best, iter));
        }
    }
    let norm = f.amax();
    if norm < NEWTON_TOL * (1.0 + x.amax()) {
        return Ok((x, omega0, norm));
    }
    Err((best.min(norm), MAX_ITERATIONS))
}

/// Forward-difference Jacobian of the augmented residual with respect to
/// the unpinned states and `omega0`, step `sqrt(eps) * (1 + |u_j|)`.
fn jacobian(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    x: &DVector<f64>,
    omega0: f64,
    f0: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let n = kind.dim();
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut jac = DMatrix::zeros(n, n);
    // Columns for the unpinned state entries (1..n), then omega0.
    for col in 0..n {
        let (fp, h) = if col < n - 1 {
            let j = col + 1;
            let h = sqrt_eps * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            (residual(kind, cfg, &xp, omega0)?, h)
        } else {
            let h = sqrt_eps * (1.0 + omega0.abs());
            (residual(kind, cfg, x, omega0 + h)?, h)
        };
        for row in 0..n {
            jac[(row, col)] = (fp[row] - f0[row]) / h;
        }
    }
    Some(jac)
}

/// Newton step `J du = -f`, with an SVD least-squares fallback when the LU
/// solve fails or produces a non-finite direction (singular Jacobians occur
/// at gauge-degenerate or boundary-of-existence points).
fn solve_step(jac: &DMatrix<f64>, f: &DVector<f64>) -> Option<DVector<f64>> {
    let neg_f = -f;
    if let Some(du) = jac.clone().lu().solve(&neg_f) {
        if du.iter().all(|v| v.is_finite()) {
            return Some(du);
        }
    }
    let svd = jac.clone().svd(true, true);
    let du = svd.solve(&neg_f, 1e-12).ok()?;
    du.iter().all(|v| v.is_finite()).then_some(du)
}

fn apply_step(
    x: &DVector<f64>,
    omega0: f64,
    step: &DVector<f64>,
    t: f64,
    n: usize,
) -> (DVector<f64>, f64) {
    let mut cx = x.clone();
    for j in 1..n {
        cx[j] += t * step[j - 1];
    }
    (cx, omega0 + t * step[n - 1])
}

/// Integrates the nonlinear model from `x0` until the state is steady in
/// the frame rotating with the first inverter, then rotates the result
/// back into the pinned-angle gauge. Fixed-step RK4; accuracy comes from
/// the Newton polish afterwards.
fn settle(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    x0: &DVector<f64>,
    omega0: f64,
) -> Option<(DVector<f64>, f64)> {
    let local = cfg.with_omega0(omega0);
    let h = match kind {
        ModelKind::Detailed => 5e-5,
        _ => 2e-4,
    };
    let steps = (5.0 / h) as usize;
    let mut x = x0.clone();
    for step in 0..steps {
        let k1 = models::rhs(kind, &x, &local).ok()?;
        let k2 = models::rhs(kind, &(&x + 0.5 * h * &k1), &local).ok()?;
        let k3 = models::rhs(kind, &(&x + 0.5 * h * &k2), &local).ok()?;
        let k4 = models::rhs(kind, &(&x + h * &k3), &local).ok()?;
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !x.iter().all(|v| v.is_finite()) || x.amax() > 1e9 {
            return None;
        }
        if step % 200 == 0 {
            // Steadiness test in the co-rotating frame: re-evaluate with the
            // synchronous frequency set to the current inverter frequency.
            let co = cfg.with_omega0(x[models::OMEGA_I]);
            let dx = models::rhs(kind, &x, &co).ok()?;
            if dx.amax() < 1e-6 {
                return Some(rotate_to_gauge(kind, x));
            }
        }
    }
    None
}

/// Applies the rigid symmetry rotation that returns the pinned angle to
/// zero: shifts both angles and rotates every synchronous-frame current.
fn rotate_to_gauge(kind: ModelKind, mut x: DVector<f64>) -> (DVector<f64>, f64) {
    let alpha = -x[models::DELTA_I];
    let t = rotation_raw(alpha);
    x[models::DELTA_I] = 0.0;
    x[models::DELTA_K] += alpha;
    let mut spans = vec![kind.load_offset(), kind.load_offset() + 2];
    if let Some(line) = kind.line_offset() {
        spans.push(line);
    }
    for at in spans {
        let v = t * nalgebra::Vector2::new(x[at], x[at + 1]);
        x[at] = v[0];
        x[at + 1] = v[1];
    }
    let omega0 = x[models::OMEGA_I];
    (x, omega0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RxPreset;
    use approx::assert_relative_eq;

    #[test]
    fn balanced_preset_matches_reference_equilibrium() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let eq = find_equilibrium(ModelKind::Detailed, &cfg, None).unwrap();
        assert!(eq.residual_norm < 1e-8);
        assert_relative_eq!(eq.omega0, 313.955893, max_relative = 1e-6);
        let x = eq.x_star.data();
        assert_relative_eq!(x[models::DELTA_K], 0.00386, max_relative = 2e-3);
        assert_relative_eq!(x[models::V_I], 310.726, max_relative = 1e-5);
        assert_relative_eq!(x[models::V_K], 311.008, max_relative = 1e-5);
    }

    #[test]
    fn tiny_droop_gains_recover_nominal_setpoints() {
        // Even at k_p = 1e-9 the droop law shifts omega0 by k_p * P, a few
        // parts in 1e9 of omega_n, so the tolerance sits just above that.
        let cfg = MicrogridConfig::preset(RxPreset::Eq1).with_droop_gains(1e-9, 1e-9);
        for kind in ModelKind::ALL {
            let eq = find_equilibrium(kind, &cfg, None).unwrap();
            assert_relative_eq!(eq.omega0, cfg.inverter_i.omega_n, max_relative = 1e-7);
            assert_relative_eq!(eq.x_star.data()[models::V_I], 311.0, max_relative = 1e-6);
            assert_relative_eq!(eq.x_star.data()[models::V_K], 311.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn equal_gains_share_active_power_equally() {
        let cfg = MicrogridConfig::preset(RxPreset::Gg1);
        for kind in ModelKind::ALL {
            let eq = find_equilibrium(kind, &cfg, None).unwrap();
            let local = eq.config(&cfg);
            let (pi, pk) =
                models::injected_power(kind, eq.x_star.data(), &local).unwrap();
            assert_relative_eq!(pi.p, pk.p, max_relative = 1e-6);
        }
    }

    #[test]
    fn droop_laws_hold_at_equilibrium() {
        let cfg = MicrogridConfig::preset(RxPreset::Ll1);
        for kind in ModelKind::ALL {
            let eq = find_equilibrium(kind, &cfg, None).unwrap();
            let local = eq.config(&cfg);
            let x = eq.x_star.data();
            let (pi, pk) = models::injected_power(kind, x, &local).unwrap();
            let inv = &cfg.inverter_i;
            assert_relative_eq!(
                eq.omega0,
                inv.omega_n - inv.k_p * pi.p,
                max_relative = 1e-8
            );
            assert_relative_eq!(
                eq.omega0,
                cfg.inverter_k.omega_n - cfg.inverter_k.k_p * pk.p,
                max_relative = 1e-8
            );
            assert_relative_eq!(
                x[models::V_I],
                inv.v_n - inv.k_q * pi.q,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn detailed_and_em5_equilibria_share_common_states() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let det = find_equilibrium(ModelKind::Detailed, &cfg, None).unwrap();
        let em = find_equilibrium(ModelKind::Em5, &cfg, None).unwrap();
        let xd = det.x_star.data();
        let xe = em.x_star.data();
        assert_relative_eq!(det.omega0, em.omega0, max_relative = 1e-6);
        for (d_idx, e_idx) in [
            (models::DELTA_K, models::DELTA_K),
            (models::V_I, models::V_I),
            (models::V_K, models::V_K),
            (crate::models::det::I_IK, 6),
            (crate::models::det::I_IK + 1, 7),
            (crate::models::det::I_LI, 8),
            (crate::models::det::I_LI + 1, 9),
            (crate::models::det::I_LI + 2, 10),
            (crate::models::det::I_LI + 3, 11),
        ] {
            assert_relative_eq!(
                xd[d_idx],
                xe[e_idx],
                max_relative = 1e-6,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn conv3_and_hf3_share_equilibria() {
        let cfg = MicrogridConfig::preset(RxPreset::Ll1);
        let c = find_equilibrium(ModelKind::Conv3, &cfg, None).unwrap();
        let h = find_equilibrium(ModelKind::Hf3, &cfg, None).unwrap();
        assert_relative_eq!(c.omega0, h.omega0, max_relative = 1e-9);
        for n in 0..10 {
            assert_relative_eq!(
                c.x_star.data()[n],
                h.x_star.data()[n],
                max_relative = 1e-7,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn warm_start_reuses_previous_solution() {
        let cfg = MicrogridConfig::preset(RxPreset::Gg1);
        let eq = find_equilibrium(ModelKind::Em5, &cfg, None).unwrap();
        let bumped = cfg.with_droop_gains(8e-5, 1.6e-4);
        let warm =
            find_equilibrium(ModelKind::Em5, &bumped, Some(&eq.x_star)).unwrap();
        let scale = 1.0 + warm.x_star.data().amax();
        assert!(warm.residual_norm < NEWTON_TOL * scale);
    }

    #[test]
    fn wrong_dimension_guess_is_rejected() {
        let cfg = MicrogridConfig::default();
        let guess = ModelKind::Conv3.cold_start(&cfg);
        let err = find_equilibrium(ModelKind::Detailed, &cfg, Some(&guess)).unwrap_err();
        assert!(matches!(err, EquilibriumError::BadGuess { .. }));
    }
}
