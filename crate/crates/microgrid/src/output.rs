//! Deterministic text and CSV rendering of analysis results.
//!
//! Every number is written through Rust's shortest round-trip `Display`
//! form, so parsing a file back recovers the exact `f64` values and
//! rerunning the same analysis rewrites the file byte for byte. Headers
//! carry units; nothing here emits timestamps or other run-varying data.

use crate::config::MicrogridConfig;
use crate::equilibrium::Equilibrium;
use crate::models;
use crate::sim::Trajectory;
use crate::stability::{EigenLoci, EigenSet, ModelReport, StabilityRegion};
use nalgebra::DMatrix;
use std::io::{self, Write};

/// Shortest exact decimal form of a float; `NaN` for missing values.
fn num(x: f64) -> String {
    format!("{x}")
}

/// Critical-gain column entry: the gain itself or `NaN` when the boundary
/// has no crossing at that row.
fn crit(x: Option<f64>) -> String {
    match x {
        Some(v) => num(v),
        None => num(f64::NAN),
    }
}

/// One stability boundary as `k_q, k_p_crit, mechanism` rows.
pub fn write_region_csv<W: Write>(w: &mut W, region: &StabilityRegion) -> io::Result<()> {
    writeln!(w, "k_q (V/var),k_p_crit ((rad/s)/W),mechanism")?;
    for p in &region.points {
        writeln!(w, "{},{},{}", num(p.k_q), crit(p.k_p_crit), p.mechanism.name())?;
    }
    Ok(())
}

/// Several boundaries in one file, distinguished by a leading model column.
pub fn write_regions_csv<W: Write>(w: &mut W, regions: &[&StabilityRegion]) -> io::Result<()> {
    writeln!(w, "model,k_q (V/var),k_p_crit ((rad/s)/W),mechanism")?;
    for region in regions {
        for p in &region.points {
            writeln!(
                w,
                "{},{},{},{}",
                region.kind.name(),
                num(p.k_q),
                crit(p.k_p_crit),
                p.mechanism.name()
            )?;
        }
    }
    Ok(())
}

/// Eigenvalue loci in wide form: one row per swept gain, one `re/im`
/// column pair per branch, branches matched across rows.
pub fn write_eigenloci_csv<W: Write>(w: &mut W, loci: &EigenLoci) -> io::Result<()> {
    let branches = loci.eigenvalues.first().map_or(0, Vec::len);
    write!(w, "k_p ((rad/s)/W),abscissa (1/s)")?;
    for b in 1..=branches {
        write!(w, ",re_{b} (1/s),im_{b} (rad/s)")?;
    }
    writeln!(w)?;
    for (row, (kp, absc)) in loci
        .eigenvalues
        .iter()
        .zip(loci.k_p.iter().zip(&loci.abscissas))
    {
        write!(w, "{},{}", num(*kp), num(*absc))?;
        for ev in row {
            write!(w, ",{},{}", num(ev.re), num(ev.im))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// One spectrum as `re, im` rows in the stored order.
pub fn write_eigenvalues_csv<W: Write>(w: &mut W, set: &EigenSet) -> io::Result<()> {
    writeln!(w, "re (1/s),im (rad/s)")?;
    for ev in &set.eigenvalues {
        writeln!(w, "{},{}", num(ev.re), num(ev.im))?;
    }
    Ok(())
}

/// A square matrix with state labels on both axes.
pub fn write_matrix_csv<W: Write>(
    w: &mut W,
    labels: &[&str],
    m: &DMatrix<f64>,
) -> io::Result<()> {
    write!(w, "row")?;
    for label in labels {
        write!(w, ",{label}")?;
    }
    writeln!(w)?;
    for r in 0..m.nrows() {
        write!(w, "{}", labels.get(r).copied().unwrap_or("?"))?;
        for c in 0..m.ncols() {
            write!(w, ",{}", num(m[(r, c)]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A sampled trajectory's derived channels.
pub fn write_trajectory_csv<W: Write>(w: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t (s),f_i (Hz),f_k (Hz),V_i (V),V_k (V),P_i (W),P_k (W)")?;
    for idx in 0..traj.times.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            num(traj.times[idx]),
            num(traj.f_i[idx]),
            num(traj.f_k[idx]),
            num(traj.v_i[idx]),
            num(traj.v_k[idx]),
            num(traj.p_i[idx]),
            num(traj.p_k[idx])
        )?;
    }
    Ok(())
}

/// Equilibrium as labelled `quantity, value` rows: the full state followed
/// by the synchronous frequency, residual, and injected powers.
pub fn write_equilibrium_csv<W: Write>(
    w: &mut W,
    eq: &Equilibrium,
    cfg: &MicrogridConfig,
) -> io::Result<()> {
    let kind = eq.x_star.kind();
    let local = eq.config(cfg);
    let (pi, pk) = models::injected_power(kind, eq.x_star.data(), &local)
        .expect("equilibrium state has the model dimension");
    writeln!(w, "quantity,value")?;
    for (label, value) in kind.state_labels().iter().zip(eq.x_star.data().iter()) {
        writeln!(w, "{label},{}", num(*value))?;
    }
    writeln!(w, "omega0 (rad/s),{}", num(eq.omega0))?;
    writeln!(w, "f0 (Hz),{}", num(eq.omega0 / std::f64::consts::TAU))?;
    writeln!(w, "residual,{}", num(eq.residual_norm))?;
    writeln!(w, "P_i (W),{}", num(pi.p))?;
    writeln!(w, "Q_i (var),{}", num(pi.q))?;
    writeln!(w, "P_k (W),{}", num(pk.p))?;
    writeln!(w, "Q_k (var),{}", num(pk.q))?;
    Ok(())
}

/// Human-readable equilibrium summary.
pub fn format_equilibrium(eq: &Equilibrium, cfg: &MicrogridConfig) -> String {
    use std::fmt::Write as _;
    let kind = eq.x_star.kind();
    let local = eq.config(cfg);
    let (pi, pk) = models::injected_power(kind, eq.x_star.data(), &local)
        .expect("equilibrium state has the model dimension");
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", kind.name());
    let _ = writeln!(
        s,
        "synchronous frequency: {:.6} rad/s ({:.6} Hz)",
        eq.omega0,
        eq.omega0 / std::f64::consts::TAU
    );
    let _ = writeln!(s, "residual: {:.3e}", eq.residual_norm);
    let _ = writeln!(
        s,
        "injected power: P_i = {:.3} W, Q_i = {:.3} var, P_k = {:.3} W, Q_k = {:.3} var",
        pi.p, pi.q, pk.p, pk.q
    );
    let _ = writeln!(s, "state:");
    for (label, value) in kind.state_labels().iter().zip(eq.x_star.data().iter()) {
        let _ = writeln!(s, "  {label:<10} {value:>14.6}");
    }
    s
}

/// Human-readable spectrum summary.
pub fn format_eigen_summary(set: &EigenSet) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "model: {}  (k_p = {:e}, k_q = {:e})",
        set.kind.name(),
        set.gains.0,
        set.gains.1
    );
    let _ = writeln!(
        s,
        "spectral abscissa (rotation mode removed): {:.6e}",
        set.spectral_abscissa
    );
    let _ = writeln!(s, "raw abscissa: {:.6e}", set.raw_abscissa);
    let _ = writeln!(
        s,
        "verdict: {}",
        if set.is_stable() { "stable" } else { "not stable" }
    );
    let _ = writeln!(s, "eigenvalues (1/s, rad/s):");
    for ev in &set.eigenvalues {
        let _ = writeln!(s, "  {:>14.6e}  {:>+14.6e}i", ev.re, ev.im);
    }
    s
}

/// Human-readable region summary: one line per grid row.
pub fn format_region_summary(region: &StabilityRegion) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", region.kind.name());
    for p in &region.points {
        match p.k_p_crit {
            Some(k) => {
                let _ = writeln!(
                    s,
                    "  k_q = {:9.3e}  k_p_crit = {:9.3e}  ({})",
                    p.k_q,
                    k,
                    p.mechanism.name()
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "  k_q = {:9.3e}  k_p_crit = none       ({})",
                    p.k_q,
                    p.mechanism.name()
                );
            }
        }
    }
    s
}

/// Human-readable model comparison: the boundary table for every model
/// and one verdict line per reduced model.
pub fn format_report(report: &ModelReport) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "reference: {} model boundary over {} k_q values",
        report.reference.kind.name(),
        report.kq_grid.len()
    );
    let _ = writeln!(s);
    let _ = write!(s, "{:>12}", "k_q (V/var)");
    let _ = write!(s, "  {:>13}", report.reference.kind.name());
    for entry in &report.entries {
        let _ = write!(s, "  {:>13}", entry.kind.name());
    }
    let _ = writeln!(s);
    for (row, kq) in report.kq_grid.iter().enumerate() {
        let _ = write!(s, "{:>12.4e}", kq);
        let cell = |p: Option<f64>| match p {
            Some(v) => format!("{v:>13.4e}"),
            None => format!("{:>13}", "lost"),
        };
        let _ = write!(
            s,
            "  {}",
            cell(report.reference.points.get(row).and_then(|p| p.k_p_crit))
        );
        for entry in &report.entries {
            let _ = write!(
                s,
                "  {}",
                cell(entry.region.points.get(row).and_then(|p| p.k_p_crit))
            );
        }
        let _ = writeln!(s);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "verdicts (critical gain vs the reference boundary):");
    for entry in &report.entries {
        let c = &entry.comparison;
        let excess = if c.worst_excess.is_finite() {
            format!("worst excess {:+.1}%", 100.0 * c.worst_excess)
        } else {
            "reference boundary not matched".to_string()
        };
        let _ = writeln!(
            s,
            "  {:<9} {:<13} {}, exceeded {} of {} rows",
            entry.kind.name(),
            c.verdict.name(),
            excess,
            c.exceed_count,
            c.compared
        );
    }
    s
}
