//! Command-line front end: each subcommand runs one library operation and
//! writes its results as deterministic CSV files plus a short stdout
//! summary. Exit codes: 0 on success (a simulated divergence is still a
//! successful run), 2 for usage or configuration errors, 3 when a solve or
//! analysis fails at runtime.

use clap::{Args, Parser, Subcommand};
use microgrid::config::{self, MicrogridConfig, RxPreset};
use microgrid::equilibrium::find_equilibrium;
use microgrid::error::{ConfigError, SimError};
use microgrid::linearize::linearize_analytic;
use microgrid::models::ModelKind;
use microgrid::output;
use microgrid::sim::{self, SimOptions, StartSource};
use microgrid::stability::{self, ClassifyOptions, StabilityRegion, DEFAULT_KP_BRACKET};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(
    name = "microgrid",
    version,
    about = "Stability analysis of a droop-controlled two-inverter microgrid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// `--model` accepts the four model names or `all` where a subcommand
/// supports running every model.
#[derive(Debug, Clone, Copy)]
enum ModelChoice {
    One(ModelKind),
    All,
}

impl FromStr for ModelChoice {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        if s == "all" {
            Ok(ModelChoice::All)
        } else {
            ModelKind::from_str(s).map(ModelChoice::One)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Line preset: rx-gg1, rx-eq1, or rx-ll1. Overrides the line from
    /// --config; without either the balanced rx-eq1 line is used.
    #[arg(long)]
    preset: Option<RxPreset>,
    /// Model: detailed, em5, conv3, hf3, or all where supported.
    #[arg(long, default_value = "detailed")]
    model: ModelChoice,
    /// Frequency droop gain ((rad/s)/W), applied to both inverters.
    #[arg(long)]
    kp: Option<f64>,
    /// Voltage droop gain (V/var), applied to both inverters.
    #[arg(long)]
    kq: Option<f64>,
    /// TOML parameter file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the CSV outputs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the steady state of one model.
    Equilibrium(CommonArgs),
    /// Write the descriptor matrices and the spectrum of one model.
    Linearize(CommonArgs),
    /// Sweep k_p at fixed k_q and write branch-matched eigenvalue loci.
    Eigenloci {
        #[command(flatten)]
        common: CommonArgs,
        /// k_p sweep as lo:hi:n (linear spacing).
        #[arg(long, default_value = "1e-5:5e-3:25")]
        kp_range: String,
    },
    /// Trace the stability boundary k_p_crit over a k_q grid.
    Region {
        #[command(flatten)]
        common: CommonArgs,
        /// k_q grid as lo:hi:n (logarithmic spacing).
        #[arg(long, default_value = "1e-4:1e-3:5")]
        kq_grid: String,
    },
    /// Integrate the nonlinear model and write the sampled trajectory.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// End time (s).
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        /// Relative step-controller tolerance.
        #[arg(long, default_value_t = 1e-8)]
        rel_tol: f64,
        /// Absolute step-controller tolerance.
        #[arg(long, default_value_t = 1e-8)]
        abs_tol: f64,
        /// Initial state: equilibrium-perturbed or cold-start.
        #[arg(long, default_value = "equilibrium-perturbed")]
        source: String,
        /// Relative perturbation for the equilibrium-perturbed start.
        #[arg(long, default_value_t = 1e-3)]
        perturb: f64,
    },
    /// Compare all reduced-model boundaries against the detailed model
    /// (always runs every model; --model is ignored).
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// k_q grid as lo:hi:n (logarithmic spacing).
        #[arg(long, default_value = "1e-4:1e-3:5")]
        kq_grid: String,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Equilibrium(common) => cmd_equilibrium(common),
        Command::Linearize(common) => cmd_linearize(common),
        Command::Eigenloci { common, kp_range } => cmd_eigenloci(common, &kp_range),
        Command::Region { common, kq_grid } => cmd_region(common, &kq_grid),
        Command::Simulate {
            common,
            t_end,
            rel_tol,
            abs_tol,
            source,
            perturb,
        } => cmd_simulate(common, t_end, rel_tol, abs_tol, &source, perturb),
        Command::Report { common, kq_grid } => cmd_report(common, &kq_grid),
    }
}

/// Defaults, then the config file, then explicit flags.
fn resolve_config(common: &CommonArgs) -> Result<MicrogridConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            config::parse_config(&text).map_err(usage)?
        }
        None => MicrogridConfig::default(),
    };
    if let Some(preset) = common.preset {
        cfg.line = preset.line();
    }
    if let Some(kp) = common.kp {
        cfg.inverter_i.k_p = kp;
        cfg.inverter_k.k_p = kp;
    }
    if let Some(kq) = common.kq {
        cfg.inverter_i.k_q = kq;
        cfg.inverter_k.k_q = kq;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn single_model(common: &CommonArgs, what: &str) -> Result<ModelKind, Failure> {
    match common.model {
        ModelChoice::One(kind) => Ok(kind),
        ModelChoice::All => Err(usage(format!("--model all is not valid for {what}"))),
    }
}

fn models_of(choice: ModelChoice) -> Vec<ModelKind> {
    match choice {
        ModelChoice::One(kind) => vec![kind],
        ModelChoice::All => ModelKind::ALL.to_vec(),
    }
}

fn parse_range(text: &str, what: &str) -> Result<(f64, f64, usize), Failure> {
    let bad = || usage(format!("{what} must be lo:hi:n, got '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo && n >= 2) {
        return Err(usage(format!(
            "{what} needs 0 < lo < hi and n >= 2, got '{text}'"
        )));
    }
    Ok((lo, hi, n))
}

fn write_csv<F>(dir: &Path, name: &str, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    fs::create_dir_all(dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file =
        File::create(&path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    w.flush()
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_equilibrium(common: CommonArgs) -> Result<(), Failure> {
    let kind = single_model(&common, "equilibrium")?;
    let cfg = resolve_config(&common)?;
    let eq = find_equilibrium(kind, &cfg, None).map_err(runtime)?;
    print!("{}", output::format_equilibrium(&eq, &cfg));
    write_csv(&common.out, "equilibrium.csv", |w| {
        output::write_equilibrium_csv(w, &eq, &cfg)
    })
}

fn cmd_linearize(common: CommonArgs) -> Result<(), Failure> {
    let kind = single_model(&common, "linearize")?;
    let cfg = resolve_config(&common)?;
    let eq = find_equilibrium(kind, &cfg, None).map_err(runtime)?;
    let model = linearize_analytic(kind, &cfg, &eq).map_err(runtime)?;
    let set = stability::eigen_of(&model, (cfg.inverter_i.k_p, cfg.inverter_i.k_q))
        .map_err(runtime)?;
    print!("{}", output::format_eigen_summary(&set));
    write_csv(&common.out, "gamma.csv", |w| {
        output::write_matrix_csv(w, &model.state_labels, &model.gamma)
    })?;
    write_csv(&common.out, "a.csv", |w| {
        output::write_matrix_csv(w, &model.state_labels, &model.a)
    })?;
    write_csv(&common.out, "eigenvalues.csv", |w| {
        output::write_eigenvalues_csv(w, &set)
    })
}

fn cmd_eigenloci(common: CommonArgs, kp_range: &str) -> Result<(), Failure> {
    let cfg = resolve_config(&common)?;
    let (lo, hi, n) = parse_range(kp_range, "--kp-range")?;
    let kq = cfg.inverter_i.k_q;
    for kind in models_of(common.model) {
        let loci = stability::eigenloci_sweep(kind, &cfg, (lo, hi), n, kq).map_err(runtime)?;
        if let Some(at) = loci.lost_equilibrium_at {
            println!("{}: equilibrium lost at k_p = {at:e}", kind.name());
        } else {
            println!("{}: {} sweep points", kind.name(), loci.k_p.len());
        }
        let file = match common.model {
            ModelChoice::One(_) => "eigenloci.csv".to_string(),
            ModelChoice::All => format!("eigenloci_{}.csv", kind.name()),
        };
        write_csv(&common.out, &file, |w| output::write_eigenloci_csv(w, &loci))?;
    }
    Ok(())
}

fn cmd_region(common: CommonArgs, kq_grid: &str) -> Result<(), Failure> {
    let cfg = resolve_config(&common)?;
    let (lo, hi, n) = parse_range(kq_grid, "--kq-grid")?;
    let grid = stability::log_spaced(lo, hi, n);
    let mut regions = Vec::new();
    for kind in models_of(common.model) {
        let region =
            stability::stability_boundary(kind, &cfg, &grid, DEFAULT_KP_BRACKET).map_err(runtime)?;
        print!("{}", output::format_region_summary(&region));
        regions.push(region);
    }
    match common.model {
        ModelChoice::One(_) => write_csv(&common.out, "region.csv", |w| {
            output::write_region_csv(w, &regions[0])
        }),
        ModelChoice::All => {
            let refs: Vec<&StabilityRegion> = regions.iter().collect();
            write_csv(&common.out, "region.csv", |w| {
                output::write_regions_csv(w, &refs)
            })
        }
    }
}

fn cmd_simulate(
    common: CommonArgs,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    source: &str,
    perturb: f64,
) -> Result<(), Failure> {
    let kind = single_model(&common, "simulate")?;
    let cfg = resolve_config(&common)?;
    let source = match source {
        "cold-start" => StartSource::ColdStart,
        "equilibrium-perturbed" => StartSource::EquilibriumPerturbed { scale: perturb },
        other => {
            return Err(usage(format!(
                "unknown --source '{other}': use equilibrium-perturbed or cold-start"
            )))
        }
    };
    let opts = SimOptions {
        t_end,
        rel_tol,
        abs_tol,
        source,
        ..SimOptions::default()
    };
    let traj = sim::simulate(kind, &cfg, &opts).map_err(|e| match e {
        SimError::BadOptions(_) | SimError::BadInitial { .. } => usage(e),
        other => runtime(other),
    })?;
    match traj.diverged {
        Some(t) => println!(
            "diverged at t = {t:.6} s after {} samples",
            traj.times.len()
        ),
        None => println!(
            "completed: {} samples, final f_i = {:.6} Hz, f_k = {:.6} Hz",
            traj.times.len(),
            traj.f_i.last().copied().unwrap_or(f64::NAN),
            traj.f_k.last().copied().unwrap_or(f64::NAN)
        ),
    }
    write_csv(&common.out, "simulate.csv", |w| {
        output::write_trajectory_csv(w, &traj)
    })
}

fn cmd_report(common: CommonArgs, kq_grid: &str) -> Result<(), Failure> {
    let cfg = resolve_config(&common)?;
    let (lo, hi, n) = parse_range(kq_grid, "--kq-grid")?;
    let grid = stability::log_spaced(lo, hi, n);
    let report = stability::model_report(&cfg, &grid, DEFAULT_KP_BRACKET, &ClassifyOptions::default())
        .map_err(runtime)?;
    print!("{}", output::format_report(&report));
    let mut regions: Vec<&StabilityRegion> = vec![&report.reference];
    regions.extend(report.entries.iter().map(|e| &e.region));
    write_csv(&common.out, "report.csv", |w| {
        output::write_regions_csv(w, &regions)
    })
}
