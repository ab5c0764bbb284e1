//! Nonlinear time-domain simulation.
//!
//! An adaptive Dormand-Prince 5(4) pair with the first-same-as-last
//! property integrates any of the four models; accepted steps are resampled
//! onto a fixed output grid of at least 1 kHz through cubic Hermite
//! interpolation, so output spacing never depends on the step controller.
//!
//! Trajectories that leave the physical range are labelled as diverged and
//! returned rather than reported as errors: blowing up is the expected
//! outcome of simulating an unstable gain setting.

use crate::config::MicrogridConfig;
use crate::equilibrium::find_equilibrium;
use crate::error::SimError;
use crate::models::{self, ModelError, ModelKind, StateVector};
use crate::config::RxPreset;
use nalgebra::DVector;
use std::f64::consts::TAU;

/// How the initial state of a simulation is produced.
#[derive(Debug, Clone)]
pub enum StartSource {
    /// Solve the equilibrium, then displace every entry by a deterministic
    /// perturbation of the given relative scale.
    EquilibriumPerturbed { scale: f64 },
    /// Use the supplied state as-is.
    Explicit(StateVector),
    /// Start from nominal setpoints with all currents at zero.
    ColdStart,
}

/// Simulation options.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// End time (s); the run always starts at zero.
    pub t_end: f64,
    /// Relative tolerance of the step controller, in `(0, 1e-2]`.
    pub rel_tol: f64,
    /// Absolute tolerance of the step controller, in `(0, 1e-2]`.
    pub abs_tol: f64,
    /// Upper limit on the internal step size (s).
    pub max_step: f64,
    /// The run is labelled diverged once the state infinity-norm exceeds
    /// this factor times `1 +` the initial norm. Unstable trajectories of
    /// these models often saturate into large bounded attractors, so a
    /// tighter factor is the way to detect "left the modelled range".
    pub divergence_limit: f64,
    pub source: StartSource,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            t_end: 2.0,
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: 1e-2,
            divergence_limit: 1e6,
            source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), SimError> {
        let check_tol = |name: &str, v: f64| {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(SimError::BadOptions(format!(
                    "{name} must lie in (0, 1e-2], got {v:e}"
                )));
            }
            Ok(())
        };
        check_tol("rel_tol", self.rel_tol)?;
        check_tol("abs_tol", self.abs_tol)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::BadOptions(format!(
                "t_end must be positive and finite, got {}",
                self.t_end
            )));
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(SimError::BadOptions(format!(
                "max_step must be positive and finite, got {}",
                self.max_step
            )));
        }
        if !(self.divergence_limit > 1.0) {
            return Err(SimError::BadOptions(format!(
                "divergence_limit must exceed 1, got {}",
                self.divergence_limit
            )));
        }
        if let StartSource::EquilibriumPerturbed { scale } = self.source {
            if !(scale.is_finite() && (0.0..=0.5).contains(&scale)) {
                return Err(SimError::BadOptions(format!(
                    "perturbation scale must lie in [0, 0.5], got {scale}"
                )));
            }
        }
        Ok(())
    }
}

/// A sampled trajectory with the derived per-bus output channels.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: ModelKind,
    /// Sample times (s), spaced at 1 kHz or finer.
    pub times: Vec<f64>,
    /// Full state at each sample.
    pub states: Vec<DVector<f64>>,
    /// Bus frequencies (Hz).
    pub f_i: Vec<f64>,
    pub f_k: Vec<f64>,
    /// Bus voltage magnitudes (V).
    pub v_i: Vec<f64>,
    pub v_k: Vec<f64>,
    /// Injected active powers (W).
    pub p_i: Vec<f64>,
    pub p_k: Vec<f64>,
    /// Time at which the state left the physical range, if it did; the
    /// samples end there.
    pub diverged: Option<f64>,
}

/// Builds the configuration and cold-start state of a preset scenario at
/// the given droop gains.
pub fn scenario(
    kind: ModelKind,
    preset: RxPreset,
    k_p: f64,
    k_q: f64,
) -> (MicrogridConfig, StateVector) {
    let cfg = MicrogridConfig::preset(preset).with_droop_gains(k_p, k_q);
    let x0 = kind.cold_start(&cfg);
    (cfg, x0)
}

/// Simulates `kind` under `cfg` according to `opts`.
///
/// For the equilibrium-perturbed source the synchronous frequency is set
/// to the solved equilibrium value, so an unperturbed start stays exactly
/// put; the other sources integrate at the frequency already in `cfg`.
pub fn simulate(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    opts.validate()?;
    let (x0, local) = resolve_start(kind, cfg, &opts.source)?;
    integrate(kind, &local, x0, opts)
}

fn resolve_start(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    source: &StartSource,
) -> Result<(DVector<f64>, MicrogridConfig), SimError> {
    match source {
        StartSource::ColdStart => Ok((kind.cold_start(cfg).into_data(), *cfg)),
        StartSource::Explicit(x) => {
            if x.data().len() != kind.dim() {
                return Err(SimError::BadInitial {
                    got: x.data().len(),
                    expected: kind.dim(),
                });
            }
            Ok((x.data().clone(), *cfg))
        }
        StartSource::EquilibriumPerturbed { scale } => {
            let eq = find_equilibrium(kind, cfg, None)
                .map_err(|err| SimError::StartUnavailable(err.to_string()))?;
            let mut x = eq.x_star.data().clone();
            for (n, v) in x.iter_mut().enumerate() {
                *v += scale * (1.7 * n as f64 + 0.3).sin() * (1.0 + v.abs());
            }
            Ok((x, cfg.with_omega0(eq.omega0)))
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct StepResult {
    y_new: DVector<f64>,
    k_last: DVector<f64>,
    error: f64,
}

fn integrate(
    kind: ModelKind,
    local: &MicrogridConfig,
    x0: DVector<f64>,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    let eval = |y: &DVector<f64>| -> Option<DVector<f64>> {
        match models::rhs(kind, y, local) {
            Ok(dy) if dy.iter().all(|v| v.is_finite()) => Some(dy),
            Ok(_) => None,
            Err(ModelError::SingularMass { .. }) => None,
            Err(ModelError::DimensionMismatch { .. }) => {
                unreachable!("dimension fixed by the caller")
            }
        }
    };

    let bound = opts.divergence_limit * (1.0 + x0.amax());
    let dt_out = (1e-3_f64).min(opts.t_end / 1000.0);
    let mut samples: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut sample_idx = 0usize;
    let mut diverged = None;

    let mut t = 0.0;
    let mut y = x0;
    let mut k1 = eval(&y).ok_or(SimError::NonFinite { t: 0.0 })?;
    let mut h = initial_step(&y, &k1, opts);

    while t < opts.t_end * (1.0 - 1e-14) {
        h = h.min(opts.max_step).min(opts.t_end - t);
        if !(h > 1e-14 * (1.0 + t)) {
            return Err(SimError::StepUnderflow { t });
        }

        match try_step(&eval, &y, &k1, h, opts) {
            Some(step) if step.error <= 1.0 => {
                push_samples(
                    &mut samples,
                    &mut sample_idx,
                    dt_out,
                    opts.t_end,
                    t,
                    h,
                    &y,
                    &k1,
                    &step.y_new,
                    &step.k_last,
                );
                t += h;
                y = step.y_new;
                k1 = step.k_last;
                if y.amax() > bound {
                    diverged = Some(t);
                    break;
                }
                h *= (0.9 * step.error.powf(-0.2)).clamp(0.2, 5.0);
            }
            Some(step) => {
                h *= (0.9 * step.error.powf(-0.2)).clamp(0.1, 0.9);
            }
            None => {
                // A stage left the finite range. If the solution is already
                // enormous this is the blow-up finishing; otherwise retry
                // with a much smaller step.
                if y.amax() > 1e-3 * bound {
                    diverged = Some(t);
                    break;
                }
                h *= 0.25;
            }
        }
    }

    // The last accepted point, if the output grid missed it.
    if diverged.is_none() {
        let behind = samples
            .last()
            .map(|(ts, _)| t - ts > 1e-9)
            .unwrap_or(true);
        if behind {
            samples.push((t, y.clone()));
        }
    }

    Ok(derive_channels(kind, local, samples, diverged))
}

fn initial_step(y: &DVector<f64>, k1: &DVector<f64>, opts: &SimOptions) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (v, dv) in y.iter().zip(k1.iter()) {
        let sc = opts.abs_tol + opts.rel_tol * v.abs();
        d0 += (v / sc) * (v / sc);
        d1 += (dv / sc) * (dv / sc);
    }
    let h0 = if d1 > 1e-20 {
        0.01 * (d0 / d1).sqrt()
    } else {
        1e-6
    };
    h0.clamp(1e-10, opts.max_step).min(opts.t_end)
}

fn try_step<F>(
    eval: &F,
    y: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
    opts: &SimOptions,
) -> Option<StepResult>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let k2 = eval(&(y + h * A2[0] * k1))?;
    let k3 = eval(&(y + h * (A3[0] * k1 + A3[1] * &k2)))?;
    let k4 = eval(&(y + h * (A4[0] * k1 + A4[1] * &k2 + A4[2] * &k3)))?;
    let k5 = eval(&(y + h * (A5[0] * k1 + A5[1] * &k2 + A5[2] * &k3 + A5[3] * &k4)))?;
    let k6 = eval(
        &(y + h * (A6[0] * k1 + A6[1] * &k2 + A6[2] * &k3 + A6[3] * &k4 + A6[4] * &k5)),
    )?;
    let y_new = y + h
        * (B5[0] * k1 + B5[2] * &k3 + B5[3] * &k4 + B5[4] * &k5 + B5[5] * &k6);
    let k_last = eval(&y_new)?;

    let err_vec = ERR[0] * k1
        + ERR[2] * &k3
        + ERR[3] * &k4
        + ERR[4] * &k5
        + ERR[5] * &k6
        + ERR[6] * &k_last;
    let mut acc = 0.0f64;
    for idx in 0..y.len() {
        let sc = opts.abs_tol + opts.rel_tol * y[idx].abs().max(y_new[idx].abs());
        let e = h * err_vec[idx] / sc;
        acc += e * e;
    }
    let error = (acc / y.len() as f64).sqrt();
    error.is_finite().then_some(StepResult {
        y_new,
        k_last,
        error,
    })
}

/// Cubic Hermite resampling of one accepted step onto the output grid.
#[allow(clippy::too_many_arguments)]
fn push_samples(
    samples: &mut Vec<(f64, DVector<f64>)>,
    sample_idx: &mut usize,
    dt_out: f64,
    t_end: f64,
    t: f64,
    h: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    y1: &DVector<f64>,
    f1: &DVector<f64>,
) {
    loop {
        let ts = *sample_idx as f64 * dt_out;
        if ts > t + h + 1e-12 || ts > t_end + 1e-12 {
            break;
        }
        let theta = ((ts - t) / h).clamp(0.0, 1.0);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let state = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + theta) * h * f0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * f1;
        samples.push((ts.min(t_end), state));
        *sample_idx += 1;
    }
}

fn derive_channels(
    kind: ModelKind,
    local: &MicrogridConfig,
    samples: Vec<(f64, DVector<f64>)>,
    diverged: Option<f64>,
) -> Trajectory {
    let mut traj = Trajectory {
        kind,
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        f_i: Vec::with_capacity(samples.len()),
        f_k: Vec::with_capacity(samples.len()),
        v_i: Vec::with_capacity(samples.len()),
        v_k: Vec::with_capacity(samples.len()),
        p_i: Vec::with_capacity(samples.len()),
        p_k: Vec::with_capacity(samples.len()),
        diverged,
    };
    for (ts, state) in samples {
        let (pi, pk) = models::injected_power(kind, &state, local)
            .expect("dimension maintained by the integrator");
        traj.times.push(ts);
        traj.f_i.push(state[models::OMEGA_I] / TAU);
        traj.f_k.push(state[models::OMEGA_K] / TAU);
        traj.v_i.push(state[models::V_I]);
        traj.v_k.push(state[models::V_K]);
        traj.p_i.push(pi.p);
        traj.p_k.push(pk.p);
        traj.states.push(state);
    }
    traj
}

/// Fits the exponential decay rate of a channel's envelope.
///
/// Deviations from the terminal value are peak-picked (local maxima of the
/// magnitude) inside the middle of the record and a least-squares line is
/// fitted to their logarithms; the slope estimates the dominant mode's
/// real part. Returns `None` when the channel carries no usable transient.
pub fn decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    if times.len() != values.len() || times.len() < 16 {
        return None;
    }
    let terminal = *values.last()?;
    let dev: Vec<f64> = values.iter().map(|v| (v - terminal).abs()).collect();
    let max_dev = dev.iter().cloned().fold(0.0f64, f64::max);
    if max_dev <= 0.0 {
        return None;
    }
    let t_span = times.last()? - times.first()?;
    let (t_lo, t_hi) = (times[0] + 0.05 * t_span, times[0] + 0.9 * t_span);
    let floor = 1e-6 * max_dev;

    let mut points: Vec<(f64, f64)> = Vec::new();
    for n in 1..dev.len() - 1 {
        if times[n] < t_lo || times[n] > t_hi {
            continue;
        }
        if dev[n] >= dev[n - 1] && dev[n] >= dev[n + 1] && dev[n] > floor {
            points.push((times[n], dev[n].ln()));
        }
    }
    if points.len() < 3 {
        // Monotone envelope: fit the log of every in-window sample instead.
        points = times
            .iter()
            .zip(&dev)
            .filter(|(t, d)| **t >= t_lo && **t <= t_hi && **d > floor)
            .map(|(t, d)| (*t, d.ln()))
            .collect();
    }
    if points.len() < 3 {
        return None;
    }

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(t, _)| t).sum();
    let sy: f64 = points.iter().map(|(_, l)| l).sum();
    let sxx: f64 = points.iter().map(|(t, _)| t * t).sum();
    let sxy: f64 = points.iter().map(|(t, l)| t * l).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_start_stays_put_for_a_second() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let eq = find_equilibrium(ModelKind::Em5, &cfg, None).unwrap();
        let local = cfg.with_omega0(eq.omega0);
        let opts = SimOptions {
            t_end: 1.0,
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            source: StartSource::Explicit(eq.x_star.clone()),
            ..SimOptions::default()
        };
        let traj = simulate(ModelKind::Em5, &local, &opts).unwrap();
        assert!(traj.diverged.is_none());
        let x_star = eq.x_star.data();
        for state in &traj.states {
            for idx in 0..state.len() {
                let drift = (state[idx] - x_star[idx]).abs() / (1.0 + x_star[idx].abs());
                assert!(drift < 1e-6, "state {idx} drifted by {drift:e}");
            }
        }
    }

    #[test]
    fn halving_the_tolerance_barely_changes_the_trajectory() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let run = |rel: f64| {
            let opts = SimOptions {
                t_end: 0.5,
                rel_tol: rel,
                abs_tol: rel,
                source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
                ..SimOptions::default()
            };
            simulate(ModelKind::Em5, &cfg, &opts).unwrap()
        };
        let coarse = run(1e-6);
        let fine = run(5e-7);
        let n = coarse.times.len().min(fine.times.len());
        let scale = coarse.f_i.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
        for idx in 0..n {
            assert!(
                (coarse.f_i[idx] - fine.f_i[idx]).abs() / scale < 10.0 * 1e-6,
                "sample {idx} differs by more than the tolerance budget"
            );
        }
    }

    #[test]
    fn perturbed_run_settles_to_the_synchronous_frequency() {
        let cfg = MicrogridConfig::preset(RxPreset::Gg1);
        let eq = find_equilibrium(ModelKind::Em5, &cfg, None).unwrap();
        let opts = SimOptions {
            t_end: 2.0,
            source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
            ..SimOptions::default()
        };
        let traj = simulate(ModelKind::Em5, &cfg, &opts).unwrap();
        let f_i = *traj.f_i.last().unwrap();
        let f_k = *traj.f_k.last().unwrap();
        let f0 = eq.omega0 / TAU;
        assert!((f_i - f_k).abs() / f0 < 1e-6);
        assert!((f_i - f0).abs() / f0 < 1e-5);
    }

    #[test]
    fn unstable_gains_produce_a_labelled_divergence() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1).with_droop_gains(1e-1, 1.5e-4);
        let opts = SimOptions {
            t_end: 10.0,
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            divergence_limit: 1e2,
            source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
            ..SimOptions::default()
        };
        let traj = simulate(ModelKind::Conv3, &cfg, &opts).unwrap();
        let t_div = traj.diverged.expect("should leave the 100x nominal range");
        assert!(t_div < 10.0);
        assert!(traj.times.last().unwrap() <= &t_div);
    }

    #[test]
    fn options_are_validated() {
        let cfg = MicrogridConfig::default();
        let bad_tol = SimOptions {
            rel_tol: 0.0,
            ..SimOptions::default()
        };
        assert!(matches!(
            simulate(ModelKind::Em5, &cfg, &bad_tol),
            Err(SimError::BadOptions(_))
        ));
        let huge_tol = SimOptions {
            abs_tol: 0.5,
            ..SimOptions::default()
        };
        assert!(matches!(
            simulate(ModelKind::Em5, &cfg, &huge_tol),
            Err(SimError::BadOptions(_))
        ));
        let wrong_dim = SimOptions {
            source: StartSource::Explicit(ModelKind::Conv3.cold_start(&cfg)),
            ..SimOptions::default()
        };
        assert!(matches!(
            simulate(ModelKind::Em5, &cfg, &wrong_dim),
            Err(SimError::BadInitial {
                got: 10,
                expected: 12
            })
        ));
    }

    #[test]
    fn scenario_produces_matching_config_and_start() {
        let (cfg, x0) = scenario(ModelKind::Detailed, RxPreset::Ll1, 2e-3, 4e-4);
        assert_eq!(cfg.line, RxPreset::Ll1.line());
        assert_eq!(cfg.inverter_i.k_p, 2e-3);
        assert_eq!(cfg.inverter_k.k_q, 4e-4);
        assert_eq!(x0.data().len(), 28);
    }

    #[test]
    fn decay_fit_recovers_a_known_rate() {
        let times: Vec<f64> = (0..3000).map(|n| n as f64 * 1e-3).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| 5.0 + (-3.0 * t).exp() * (40.0 * t).cos())
            .collect();
        let rate = decay_rate(&times, &values).unwrap();
        assert_relative_eq!(rate, -3.0, max_relative = 0.02);
    }

    #[test]
    fn output_grid_is_at_least_a_kilohertz() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let opts = SimOptions {
            t_end: 0.25,
            source: StartSource::EquilibriumPerturbed { scale: 1e-3 },
            ..SimOptions::default()
        };
        let traj = simulate(ModelKind::Conv3, &cfg, &opts).unwrap();
        assert!(traj.times.len() >= 1000);
        for pair in traj.times.windows(2) {
            assert!(pair[1] - pair[0] <= 1e-3 + 1e-9);
        }
    }
}
