use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use krylov_rp::ensembles::Normalization;
use krylov_rp::runner::{self, Experiment, ExperimentOptions, RunManifest};

/// Krylov-space analysis of Rosenzweig–Porter random matrices.
#[derive(Parser)]
#[command(name = "krylov-rp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble-mean Lanczos coefficient profile.
    Profile(CommonArgs),
    /// Fits of the q-log and superposition ansätze to the profile.
    Fit(FitArgs),
    /// Mean adjacent-gap ratio ⟨r⟩.
    Rstat(RstatArgs),
    /// Density of states: histogram, Lanczos integral, fitted ansatz.
    Dos(DosArgs),
    /// Spread complexity of the thermofield-double state.
    Spread(SpreadArgs),
    /// IPR of Krylov vectors and the fractal dimension D₂.
    Ipr(IprArgs),
    /// Log-variance of the Lanczos coefficients and its power law in γ.
    Logvar(CommonArgs),
    /// Predicted versus empirical Lanczos profile of the heteroskedastic ensemble.
    #[command(name = "variance-flow", alias = "sm5")]
    VarianceFlow(CommonArgs),
    /// Re-hash outputs and re-check invariants of a finished run.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// γ grid: comma list (`0.5,1,2`) or range `start:stop:step`.
    #[arg(long)]
    gamma: Option<String>,
    /// Matrix sizes: comma list.
    #[arg(long)]
    sizes: Option<String>,
    /// Realizations per cell.
    #[arg(long)]
    reals: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// standard, unit-bandwidth or heteroskedastic.
    #[arg(long)]
    norm: Option<Normalization>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with any manifest fields; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lift the size and work guardrails.
    #[arg(long)]
    allow_large: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smallest x used in the fit (default 2/N).
    #[arg(long)]
    x_min: Option<f64>,
}

#[derive(Args)]
struct RstatArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Central fraction of levels used.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args)]
struct DosArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    x_min: Option<f64>,
}

#[derive(Args)]
struct SpreadArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Inverse temperature of the thermofield double.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct IprArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Moment order ℓ.
    #[arg(long)]
    ell: Option<u32>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Output directory of the run.
    dir: PathBuf,
    /// Manifest or config whose input hash must match the recorded one.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Optional manifest fields accepted from `--config`.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<Experiment>,
    gamma_grid: Option<Vec<f64>>,
    n_grid: Option<Vec<usize>>,
    realizations: Option<usize>,
    seed: Option<u64>,
    normalization: Option<Normalization>,
    output_dir: Option<PathBuf>,
    version: Option<String>,
    options: Option<ExperimentOptions>,
    allow_large: Option<bool>,
}

enum Failure {
    Usage(String),
    Run(String),
}

fn parse_gamma(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad γ range '{s}': {e}")))
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(format!("bad γ range '{s}': need step > 0 and stop ≥ start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    parse_list(s, "γ")
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| format!("bad {what} value '{p}': {e}")))
        .collect()
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn build_manifest(
    experiment: Experiment,
    a: &CommonArgs,
    tweak: impl FnOnce(&mut ExperimentOptions),
) -> Result<RunManifest, Failure> {
    let cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    if let Some(e) = cfg.experiment {
        if e != experiment {
            return Err(Failure::Usage(format!("config is for '{e}', not '{experiment}'")));
        }
    }
    let gamma_grid = match &a.gamma {
        Some(s) => parse_gamma(s).map_err(Failure::Usage)?,
        None => cfg.gamma_grid.unwrap_or_default(),
    };
    let n_grid = match &a.sizes {
        Some(s) => parse_list(s, "size").map_err(Failure::Usage)?,
        None => cfg.n_grid.unwrap_or_default(),
    };
    if gamma_grid.is_empty() || n_grid.is_empty() {
        return Err(Failure::Usage("both --gamma and --sizes (or their config fields) are required and non-empty".into()));
    }
    let output_dir = a
        .out
        .clone()
        .or(cfg.output_dir)
        .unwrap_or_else(|| PathBuf::from(format!("runs/{experiment}")));
    let mut m = RunManifest::new(experiment, gamma_grid, n_grid, output_dir);
    m.realizations = a.reals.or(cfg.realizations).unwrap_or(m.realizations);
    m.seed = a.seed.or(cfg.seed).unwrap_or(m.seed);
    m.normalization = a.norm.or(cfg.normalization).unwrap_or(match experiment {
        Experiment::Spread => Normalization::UnitBandwidth,
        Experiment::VarianceFlow => Normalization::Heteroskedastic,
        _ => Normalization::Standard,
    });
    if let Some(v) = cfg.version {
        m.version = v;
    }
    m.options = cfg.options.unwrap_or_default();
    m.allow_large = a.allow_large || cfg.allow_large.unwrap_or(false);
    tweak(&mut m.options);
    Ok(m)
}

fn run_experiment(m: RunManifest) -> Result<(), Failure> {
    m.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let report = runner::run(&m).map_err(|e| Failure::Run(e.to_string()))?;
    println!(
        "{}: {} cells computed, {} cached, {} failed; outputs in {}",
        m.experiment,
        report.computed,
        report.cached,
        report.failed.len(),
        report.output_dir.display()
    );
    println!("input hash {}", report.input_hash);
    for (g, n, e) in &report.failed {
        eprintln!("cell γ={g} N={n} failed: {e}");
    }
    if report.success() {
        Ok(())
    } else {
        Err(Failure::Run(format!("{} cell(s) failed", report.failed.len())))
    }
}

fn verify(a: &VerifyArgs) -> Result<(), Failure> {
    let expected = match &a.manifest {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            // accept either a bare manifest or a manifest echo
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            let inner = value.get("manifest").cloned().unwrap_or(value);
            Some(
                serde_json::from_value::<RunManifest>(inner)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let report = runner::verify(&a.dir, expected.as_ref()).map_err(|e| Failure::Run(e.to_string()))?;
    print!("{}", report.render());
    if report.success() {
        println!("verify: all checks passed");
        Ok(())
    } else {
        Err(Failure::Run(format!(
            "verification failed; offending files: [{}]",
            report.offending_files().join(", ")
        )))
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let m = match cli.command {
        Command::Profile(a) => build_manifest(Experiment::LanczosProfile, &a, |_| {})?,
        Command::Fit(a) => build_manifest(Experiment::AnsatzSweep, &a.common, |o| {
            if a.x_min.is_some() {
                o.x_min = a.x_min;
            }
        })?,
        Command::Rstat(a) => build_manifest(Experiment::RStat, &a.common, |o| {
            if let Some(w) = a.window {
                o.r_window = w;
            }
        })?,
        Command::Dos(a) => build_manifest(Experiment::Dos, &a.common, |o| {
            if let Some(b) = a.bins {
                o.dos_bins = b;
            }
            if a.x_min.is_some() {
                o.x_min = a.x_min;
            }
        })?,
        Command::Spread(a) => build_manifest(Experiment::Spread, &a.common, |o| {
            if let Some(b) = a.beta {
                o.beta = b;
            }
        })?,
        Command::Ipr(a) => build_manifest(Experiment::KrylovIpr, &a.common, |o| {
            if let Some(l) = a.ell {
                o.ell = l;
            }
        })?,
        Command::Logvar(a) => build_manifest(Experiment::LogVar, &a, |_| {})?,
        Command::VarianceFlow(a) => build_manifest(Experiment::VarianceFlow, &a, |_| {})?,
        Command::Verify(a) => return verify(&a),
    };
    run_experiment(m)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
