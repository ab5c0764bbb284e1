//! Eigenvalue analysis, droop-gain sweeps, stability boundaries, and the
//! model-accuracy classification built on them.
//!
//! All four models keep an exact rotational symmetry (a rigid shift of all
//! angles), so every linearization carries one structural zero eigenvalue.
//! The reported spectral abscissa deflates exactly that one mode — the
//! eigenvalue of smallest magnitude — while the undeflated maximum stays
//! available as [`EigenSet::raw_abscissa`].
//!
//! Stability boundaries are traced per reactive-droop gain by walking the
//! active-droop gain up geometrically until stability is lost and then
//! bisecting in the log domain. Loss of stability by eigenvalue crossing
//! and loss of the equilibrium itself are distinguished, and brackets
//! without a sign change are flagged rather than fabricated.

use crate::config::MicrogridConfig;
use crate::equilibrium::{find_equilibrium, Equilibrium};
use crate::error::{EquilibriumError, LinearizeError, StabilityError};
use crate::linearize::{linearize_analytic, LinearModel};
use crate::models::{ModelKind, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Margin on the deflated spectral abscissa: stable means `< -MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Relative width at which the boundary bisection stops.
pub const BOUNDARY_TOLERANCE: f64 = 1e-3;

/// Default active-droop bracket for boundary tracing.
pub const DEFAULT_KP_BRACKET: (f64, f64) = (1e-5, 1e-1);

/// The eigenvalues of one linearized model at one gain setting.
#[derive(Debug, Clone)]
pub struct EigenSet {
    /// All eigenvalues, sorted by descending real part then descending
    /// imaginary part; closed under conjugation.
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part after deflating the structural zero mode.
    pub spectral_abscissa: f64,
    /// Largest real part over all eigenvalues, including the structural
    /// zero (which sits at roundoff distance from the origin).
    pub raw_abscissa: f64,
    pub kind: ModelKind,
    /// The droop gains `(k_p, k_q)` this spectrum belongs to.
    pub gains: (f64, f64),
}

impl EigenSet {
    /// Stability in the sense of the deflated abscissa with margin.
    pub fn is_stable(&self) -> bool {
        self.spectral_abscissa < -STABILITY_MARGIN
    }
}

/// Eigenvalues of `kind` at the gains in `cfg`, solving the equilibrium
/// from a cold start.
pub fn eigen(kind: ModelKind, cfg: &MicrogridConfig) -> Result<EigenSet, StabilityError> {
    let eq = find_equilibrium(kind, cfg, None)?;
    eigen_with(kind, cfg, &eq)
}

/// Eigenvalues of `kind` about an already-solved equilibrium.
pub fn eigen_with(
    kind: ModelKind,
    cfg: &MicrogridConfig,
    eq: &Equilibrium,
) -> Result<EigenSet, StabilityError> {
    let model = linearize_analytic(kind, cfg, eq)?;
    eigen_of(&model, (cfg.inverter_i.k_p, cfg.inverter_i.k_q))
}

/// Eigenvalues of an assembled linear model. Falls back to the shifted
/// generalized pencil when the mass matrix is too ill-conditioned to
/// invert directly.
pub fn eigen_of(model: &LinearModel, gains: (f64, f64)) -> Result<EigenSet, StabilityError> {
    let eigenvalues = match model.system_matrix() {
        Ok(m) => dense_eigenvalues(&m)?,
        Err(LinearizeError::SingularMass { .. }) => {
            pencil_eigenvalues(&model.a, &model.gamma)?
        }
        Err(err) => return Err(err.into()),
    };
    Ok(eigen_set(model.kind, gains, eigenvalues))
}

fn eigen_set(kind: ModelKind, gains: (f64, f64), mut eigenvalues: Vec<Complex64>) -> EigenSet {
    eigenvalues.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .expect("finite eigenvalues")
            .then(b.im.partial_cmp(&a.im).expect("finite eigenvalues"))
    });
    let raw = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    // Deflate the single eigenvalue closest to the origin: the structural
    // zero of the rotational symmetry.
    let zero_idx = eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.norm().partial_cmp(&b.norm()).expect("finite"))
        .map(|(idx, _)| idx);
    let deflated = eigenvalues
        .iter()
        .enumerate()
        .filter(|(idx, _)| Some(*idx) != zero_idx)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    EigenSet {
        eigenvalues,
        spectral_abscissa: deflated,
        raw_abscissa: raw,
        kind,
        gains,
    }
}

fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, StabilityError> {
    let n = m.nrows();
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-14, 100_000)
        .ok_or(StabilityError::EigenFailure { n })?;
    Ok(schur.complex_eigenvalues().iter().cloned().collect())
}

/// Generalized eigenvalues of the pencil `(A, Gamma)` by shift-invert:
/// `mu = eig((A - sigma Gamma)^-1 Gamma)`, `lambda = sigma + 1/mu`.
/// Near-zero `mu` are the pencil's infinite eigenvalues (non-dynamic rows)
/// and are dropped.
fn pencil_eigenvalues(
    a: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<Vec<Complex64>, StabilityError> {
    let n = a.nrows();
    for sigma in [1.0, 347.0, -61.7] {
        let shifted = a - sigma * gamma;
        if let Some(m) = shifted.lu().solve(gamma) {
            if !m.iter().all(|v| v.is_finite()) {
                continue;
            }
            let scale = m.norm().max(1.0);
            let mu = dense_eigenvalues(&m)?;
            let lambdas: Vec<Complex64> = mu
                .into_iter()
                .filter(|u| u.norm() > 1e-12 * scale)
                .map(|u| sigma + 1.0 / u)
                .collect();
            if !lambdas.is_empty() {
                return Ok(lambdas);
            }
        }
    }
    Err(StabilityError::EigenFailure { n })
}

/// Eigenvalue loci over a linearly spaced active-droop sweep at fixed
/// reactive droop. Rows are branch-ordered: entry `[n][j]` continues the
/// branch that entry `[n-1][j]` belongs to (greedy nearest matching), so
/// columns can be plotted directly as loci.
#[derive(Debug, Clone)]
pub struct EigenLoci {
    pub kind: ModelKind,
    pub k_q: f64,
    /// The gains actually covered; shorter than requested if truncated.
    pub k_p: Vec<f64>,
    pub eigenvalues: Vec<Vec<Complex64>>,
    /// Deflated spectral abscissa per covered gain.
    pub abscissas: Vec<f64>,
    /// First swept gain whose equilibrium no longer exists; the sweep is
    /// truncated there rather than fabricated.
    pub lost_equilibrium_at: Option<f64>,
}

/// Sweeps both inverters' active droop over `n_steps` linearly spaced
/// gains in `kp_range` at fixed `kq_fixed`, warm-starting each equilibrium
/// from the previous one.
pub fn eigenloci_sweep(
    kind: ModelKind,
    cfg_base: &MicrogridConfig,
    kp_range: (f64, f64),
    n_steps: usize,
    kq_fixed: f64,
) -> Result<EigenLoci, StabilityError> {
    assert!(n_steps >= 2, "a sweep needs at least two steps");
    assert!(
        kp_range.0 > 0.0 && kp_range.1 > kp_range.0,
        "sweep range must be positive and increasing"
    );
    let mut loci = EigenLoci {
        kind,
        k_q: kq_fixed,
        k_p: Vec::new(),
        eigenvalues: Vec::new(),
        abscissas: Vec::new(),
        lost_equilibrium_at: None,
    };
    let mut guess: Option<StateVector> = None;
    for kp in lin_spaced(kp_range.0, kp_range.1, n_steps) {
        let cfg = cfg_base.with_droop_gains(kp, kq_fixed);
        match find_equilibrium(kind, &cfg, guess.as_ref()) {
            Ok(eq) => {
                let set = eigen_with(kind, &cfg, &eq)?;
                guess = Some(eq.x_star.clone());
                let row = match loci.eigenvalues.last() {
                    Some(prev) => match_branches(prev, set.eigenvalues),
                    None => set.eigenvalues,
                };
                loci.k_p.push(kp);
                loci.abscissas.push(set.spectral_abscissa);
                loci.eigenvalues.push(row);
            }
            Err(
                EquilibriumError::NoConvergence { .. } | EquilibriumError::NonPhysical { .. },
            ) => {
                loci.lost_equilibrium_at = Some(kp);
                break;
            }
            Err(err) => return Err(err.into()),
        }
    }
    Ok(loci)
}

/// Greedy nearest-neighbour continuation of eigenvalue branches.
fn match_branches(prev: &[Complex64], new: Vec<Complex64>) -> Vec<Complex64> {
    let mut used = vec![false; new.len()];
    let mut out = Vec::with_capacity(new.len());
    for p in prev {
        let best = new
            .iter()
            .enumerate()
            .filter(|(idx, _)| !used[*idx])
            .min_by(|(_, a), (_, b)| {
                (*a - p).norm().partial_cmp(&(*b - p).norm()).expect("finite")
            })
            .map(|(idx, _)| idx)
            .expect("same dimension along a sweep");
        used[best] = true;
        out.push(new[best]);
    }
    out
}

/// How a traced boundary point lost stability, or why no boundary exists
/// inside the bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMechanism {
    /// The deflated abscissa crossed zero with the equilibrium intact.
    EigenvalueCrossing,
    /// The equilibrium itself ceased to exist.
    EquilibriumLoss,
    /// Stable over the whole bracket: no critical gain below the upper end.
    StableThroughout,
    /// Already unstable (or without equilibrium) at the lower bracket end.
    UnstableThroughout,
}

impl BoundaryMechanism {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryMechanism::EigenvalueCrossing => "eigenvalue-crossing",
            BoundaryMechanism::EquilibriumLoss => "equilibrium-loss",
            BoundaryMechanism::StableThroughout => "stable-throughout",
            BoundaryMechanism::UnstableThroughout => "unstable-throughout",
        }
    }
}

/// One point of a stability boundary in the `(k_q, k_p)` gain plane.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub k_q: f64,
    /// Critical active droop, absent when the bracket saw no sign change.
    pub k_p_crit: Option<f64>,
    pub mechanism: BoundaryMechanism,
}

/// A stability boundary traced over a reactive-droop grid.
#[derive(Debug, Clone)]
pub struct StabilityRegion {
    pub kind: ModelKind,
    pub points: Vec<BoundaryPoint>,
}

enum Assessment {
    Stable(Equilibrium),
    Unstable,
    NoEquilibrium,
}

fn assess(
    kind: ModelKind,
    cfg_base: &MicrogridConfig,
    k_p: f64,
    k_q: f64,
    guess: Option<&StateVector>,
) -> Result<Assessment, StabilityError> {
    let cfg = cfg_base.with_droop_gains(k_p, k_q);
    match find_equilibrium(kind, &cfg, guess) {
        Ok(eq) => {
            let set = eigen_with(kind, &cfg, &eq)?;
            Ok(if set.is_stable() {
                Assessment::Stable(eq)
            } else {
                Assessment::Unstable
            })
        }
        Err(EquilibriumError::NoConvergence { .. } | EquilibriumError::NonPhysical { .. }) => {
            Ok(Assessment::NoEquilibrium)
        }
        Err(err) => Err(err.into()),
    }
}

/// Traces the critical active droop over `kq_grid` inside `kp_bracket`
/// for each point: geometric walk up by 1.6x until stability is lost,
/// then log-domain bisection to [`BOUNDARY_TOLERANCE`] relative width.
/// Equilibria are warm-started along the walk and across the grid.
pub fn stability_boundary(
    kind: ModelKind,
    cfg_base: &MicrogridConfig,
    kq_grid: &[f64],
    kp_bracket: (f64, f64),
) -> Result<StabilityRegion, StabilityError> {
    assert!(
        kp_bracket.0 > 0.0 && kp_bracket.1 > kp_bracket.0,
        "bracket must be positive and increasing"
    );
    let mut points = Vec::with_capacity(kq_grid.len());
    let mut seed: Option<StateVector> = None;
    for &k_q in kq_grid {
        let (point, next_seed) = trace_point(kind, cfg_base, k_q, kp_bracket, seed.take())?;
        seed = next_seed;
        points.push(point);
    }
    Ok(StabilityRegion { kind, points })
}

fn trace_point(
    kind: ModelKind,
    cfg_base: &MicrogridConfig,
    k_q: f64,
    (lo, hi): (f64, f64),
    seed: Option<StateVector>,
) -> Result<(BoundaryPoint, Option<StateVector>), StabilityError> {
    let mut stable_eq = match assess(kind, cfg_base, lo, k_q, seed.as_ref())? {
        Assessment::Stable(eq) => eq,
        Assessment::Unstable | Assessment::NoEquilibrium => {
            return Ok((
                BoundaryPoint {
                    k_q,
                    k_p_crit: None,
                    mechanism: BoundaryMechanism::UnstableThroughout,
                },
                seed,
            ));
        }
    };
    let next_seed = Some(stable_eq.x_star.clone());

    // Geometric walk up until stability is lost or the bracket ends.
    let mut lo_kp = lo;
    let mut bracket = None;
    let mut kp = lo;
    while kp < hi {
        kp = (kp * 1.6).min(hi);
        match assess(kind, cfg_base, kp, k_q, Some(&stable_eq.x_star))? {
            Assessment::Stable(eq) => {
                lo_kp = kp;
                stable_eq = eq;
            }
            Assessment::Unstable => {
                bracket = Some((kp, BoundaryMechanism::EigenvalueCrossing));
                break;
            }
            Assessment::NoEquilibrium => {
                bracket = Some((kp, BoundaryMechanism::EquilibriumLoss));
                break;
            }
        }
    }
    let Some((mut hi_kp, mut mechanism)) = bracket else {
        return Ok((
            BoundaryPoint {
                k_q,
                k_p_crit: None,
                mechanism: BoundaryMechanism::StableThroughout,
            },
            next_seed,
        ));
    };

    // Log-domain bisection.
    while hi_kp - lo_kp > BOUNDARY_TOLERANCE * hi_kp {
        let mid = (lo_kp * hi_kp).sqrt();
        if mid <= lo_kp || mid >= hi_kp {
            break;
        }
        match assess(kind, cfg_base, mid, k_q, Some(&stable_eq.x_star))? {
            Assessment::Stable(eq) => {
                lo_kp = mid;
                stable_eq = eq;
            }
            Assessment::Unstable => {
                hi_kp = mid;
                mechanism = BoundaryMechanism::EigenvalueCrossing;
            }
            Assessment::NoEquilibrium => {
                hi_kp = mid;
                mechanism = BoundaryMechanism::EquilibriumLoss;
            }
        }
    }

    // At a fold the critical eigenvalue approaches zero from below, so the
    // last bisection verdicts read "unstable" even though the deeper cause
    // is the equilibrium ceasing to exist. Probe slightly above the bracket
    // to tell the two apart.
    if mechanism == BoundaryMechanism::EigenvalueCrossing {
        let probe = hi_kp * 1.05;
        if probe <= hi
            && matches!(
                assess(kind, cfg_base, probe, k_q, Some(&stable_eq.x_star))?,
                Assessment::NoEquilibrium
            )
        {
            mechanism = BoundaryMechanism::EquilibriumLoss;
        }
    }
    Ok((
        BoundaryPoint {
            k_q,
            k_p_crit: Some((lo_kp * hi_kp).sqrt()),
            mechanism,
        },
        next_seed,
    ))
}

/// Verdict of a reduced model measured against the reference boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Never claims stability beyond the reference boundary.
    Good,
    /// Exceeds the reference by less than the tolerance, on a minority of
    /// grid points only.
    Acceptable,
    /// Exceeds the reference grossly or on too many points.
    Unacceptable,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Good => "Good",
            Verdict::Acceptable => "Acceptable",
            Verdict::Unacceptable => "Unacceptable",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds of the classification rule.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Largest tolerated relative excess over the reference boundary.
    pub excess_tolerance: f64,
    /// Exceedances must stay on strictly less than this fraction of the
    /// grid to remain acceptable.
    pub minority_fraction: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            excess_tolerance: 0.10,
            minority_fraction: 0.5,
        }
    }
}

/// Outcome of comparing one candidate boundary against the reference.
#[derive(Debug, Clone, Copy)]
pub struct Comparison {
    pub verdict: Verdict,
    /// Largest relative excess over the reference (0 when never above).
    pub worst_excess: f64,
    /// Number of grid points where the candidate exceeds the reference.
    pub exceed_count: usize,
    /// Number of grid points that could be compared.
    pub compared: usize,
}

/// Classifies a candidate boundary against the reference over their shared
/// grid. A candidate that is stable through the whole bracket where the
/// reference has a boundary counts as an unbounded exceedance; one that is
/// unstable throughout never exceeds.
pub fn classify(
    reference: &StabilityRegion,
    candidate: &StabilityRegion,
    opts: &ClassifyOptions,
) -> Comparison {
    let mut worst_excess = 0.0f64;
    let mut exceed_count = 0usize;
    let mut compared = 0usize;
    for (rp, cp) in reference.points.iter().zip(&candidate.points) {
        let Some(reference_crit) = rp.k_p_crit else {
            continue;
        };
        let candidate_crit = match cp.k_p_crit {
            Some(c) => c,
            None => match cp.mechanism {
                BoundaryMechanism::StableThroughout => f64::INFINITY,
                _ => 0.0,
            },
        };
        compared += 1;
        if candidate_crit > reference_crit * (1.0 + 1e-9) {
            exceed_count += 1;
            worst_excess =
                worst_excess.max((candidate_crit - reference_crit) / reference_crit);
        }
    }
    let verdict = if exceed_count == 0 {
        Verdict::Good
    } else if worst_excess < opts.excess_tolerance
        && (exceed_count as f64) < opts.minority_fraction * (compared as f64)
    {
        Verdict::Acceptable
    } else {
        Verdict::Unacceptable
    };
    Comparison {
        verdict,
        worst_excess,
        exceed_count,
        compared,
    }
}

/// One reduced model's boundary and verdict inside a report.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub kind: ModelKind,
    pub region: StabilityRegion,
    pub comparison: Comparison,
}

/// Boundary comparison of the three reduced models against the detailed
/// reference over a reactive-droop grid.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub kq_grid: Vec<f64>,
    pub reference: StabilityRegion,
    pub entries: Vec<ReportEntry>,
}

/// Traces all four boundaries over `kq_grid` and classifies the reduced
/// models against the detailed reference.
pub fn model_report(
    cfg_base: &MicrogridConfig,
    kq_grid: &[f64],
    kp_bracket: (f64, f64),
    opts: &ClassifyOptions,
) -> Result<ModelReport, StabilityError> {
    let reference = stability_boundary(ModelKind::Detailed, cfg_base, kq_grid, kp_bracket)?;
    let mut entries = Vec::new();
    for kind in [ModelKind::Em5, ModelKind::Conv3, ModelKind::Hf3] {
        let region = stability_boundary(kind, cfg_base, kq_grid, kp_bracket)?;
        let comparison = classify(&reference, &region, opts);
        entries.push(ReportEntry {
            kind,
            region,
            comparison,
        });
    }
    Ok(ModelReport {
        kq_grid: kq_grid.to_vec(),
        reference,
        entries,
    })
}

/// `n` linearly spaced values from `lo` to `hi` inclusive.
pub fn lin_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two points");
    (0..n)
        .map(|idx| lo + (hi - lo) * idx as f64 / (n - 1) as f64)
        .collect()
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo, "log spacing needs 0 < lo < hi");
    assert!(n >= 2, "need at least two points");
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|idx| (llo + (lhi - llo) * idx as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The default reactive-droop grid for reports: five logarithmically
/// spaced points per decade of the droop plane's interesting band.
pub fn default_kq_grid() -> Vec<f64> {
    log_spaced(1e-4, 1e-3, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RxPreset;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_are_conjugate_closed_and_stable_at_default_gains() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        for kind in ModelKind::ALL {
            let set = eigen(kind, &cfg).unwrap();
            assert_eq!(set.eigenvalues.len(), kind.dim());
            for z in &set.eigenvalues {
                if z.im.abs() > 0.0 {
                    let partner = set
                        .eigenvalues
                        .iter()
                        .map(|w| (w - z.conj()).norm())
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        partner < 1e-9 * (1.0 + z.norm()),
                        "{kind}: {z} lacks a conjugate partner"
                    );
                }
            }
            assert!(set.is_stable(), "{kind} should be stable at default gains");
            // The structural zero is the raw maximum and sits at roundoff.
            assert!(set.raw_abscissa.abs() < 1e-6);
            assert!(set.spectral_abscissa < -1.0);
        }
    }

    #[test]
    fn unstable_gains_are_detected() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1).with_droop_gains(1e-3, 1.5e-4);
        let set = eigen(ModelKind::Em5, &cfg).unwrap();
        assert!(!set.is_stable());
        assert!(set.spectral_abscissa > 0.0);
    }

    #[test]
    fn balanced_boundary_matches_pinned_references() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let region =
            stability_boundary(ModelKind::Em5, &cfg, &[1.5e-4], DEFAULT_KP_BRACKET).unwrap();
        let point = region.points[0];
        assert_eq!(point.mechanism, BoundaryMechanism::EigenvalueCrossing);
        assert_relative_eq!(point.k_p_crit.unwrap(), 4.842e-4, max_relative = 0.02);

        let conv =
            stability_boundary(ModelKind::Conv3, &cfg, &[1.5e-4], DEFAULT_KP_BRACKET).unwrap();
        assert_relative_eq!(
            conv.points[0].k_p_crit.unwrap(),
            5.056e-2,
            max_relative = 0.02
        );
    }

    #[test]
    fn em5_and_hf3_boundaries_agree_on_the_resistive_line() {
        let cfg = MicrogridConfig::preset(RxPreset::Gg1);
        let em = stability_boundary(ModelKind::Em5, &cfg, &[1.5e-4], DEFAULT_KP_BRACKET)
            .unwrap();
        let hf = stability_boundary(ModelKind::Hf3, &cfg, &[1.5e-4], DEFAULT_KP_BRACKET)
            .unwrap();
        let (a, b) = (
            em.points[0].k_p_crit.unwrap(),
            hf.points[0].k_p_crit.unwrap(),
        );
        assert!((a - b).abs() / a < 0.05, "em5 {a:.4e} vs hf3 {b:.4e}");
    }

    #[test]
    fn inductive_line_conv3_boundary_is_an_equilibrium_loss() {
        let cfg = MicrogridConfig::preset(RxPreset::Ll1);
        let region =
            stability_boundary(ModelKind::Conv3, &cfg, &[1.5e-4], DEFAULT_KP_BRACKET).unwrap();
        let point = region.points[0];
        assert_eq!(point.mechanism, BoundaryMechanism::EquilibriumLoss);
        assert_relative_eq!(point.k_p_crit.unwrap(), 8.275e-2, max_relative = 0.03);
    }

    #[test]
    fn sweep_truncates_when_the_equilibrium_vanishes() {
        let cfg = MicrogridConfig::preset(RxPreset::Ll1);
        let loci =
            eigenloci_sweep(ModelKind::Conv3, &cfg, (5e-2, 1.2e-1), 8, 1.5e-4).unwrap();
        assert!(loci.lost_equilibrium_at.is_some());
        assert!(loci.k_p.len() < 8);
        assert_eq!(loci.k_p.len(), loci.eigenvalues.len());
        assert_eq!(loci.k_p.len(), loci.abscissas.len());
        for row in &loci.eigenvalues {
            assert_eq!(row.len(), ModelKind::Conv3.dim());
        }
    }

    #[test]
    fn classification_rule_on_synthetic_boundaries() {
        let point = |k_q, crit: Option<f64>| BoundaryPoint {
            k_q,
            k_p_crit: crit,
            mechanism: BoundaryMechanism::EigenvalueCrossing,
        };
        let region = |crits: &[f64]| StabilityRegion {
            kind: ModelKind::Em5,
            points: crits
                .iter()
                .enumerate()
                .map(|(idx, &c)| point(idx as f64, Some(c)))
                .collect(),
        };
        let reference = region(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let opts = ClassifyOptions::default();

        let below = classify(&reference, &region(&[0.9, 0.8, 1.0, 0.7, 0.99]), &opts);
        assert_eq!(below.verdict, Verdict::Good);

        let slight = classify(&reference, &region(&[1.05, 0.8, 1.0, 0.7, 0.9]), &opts);
        assert_eq!(slight.verdict, Verdict::Acceptable);
        assert_eq!(slight.exceed_count, 1);

        let majority = classify(&reference, &region(&[1.05, 1.04, 1.06, 0.7, 0.9]), &opts);
        assert_eq!(majority.verdict, Verdict::Unacceptable);

        let gross = classify(&reference, &region(&[1.5, 0.8, 0.9, 0.7, 0.9]), &opts);
        assert_eq!(gross.verdict, Verdict::Unacceptable);
        assert!(gross.worst_excess > 0.45);
    }

    #[test]
    fn boundary_tracing_is_deterministic() {
        let cfg = MicrogridConfig::preset(RxPreset::Eq1);
        let grid = [1e-4, 3e-4];
        let one = stability_boundary(ModelKind::Em5, &cfg, &grid, DEFAULT_KP_BRACKET).unwrap();
        let two = stability_boundary(ModelKind::Em5, &cfg, &grid, DEFAULT_KP_BRACKET).unwrap();
        for (a, b) in one.points.iter().zip(&two.points) {
            assert_eq!(a.k_p_crit, b.k_p_crit);
            assert_eq!(a.mechanism, b.mechanism);
        }
    }
}
