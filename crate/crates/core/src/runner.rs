//! Reproducible sweeps over `(γ, N)` cells with manifests, per-cell caching
//! and CSV output.
//!
//! A run writes, under its output directory:
//! - `cells/<cell>.csv`: the detail table of one cell,
//! - `cells/<cell>.json`: the cell record (input key, summary rows, invariant
//!   checks, file hashes); written last, so its presence marks completion,
//! - `aggregate.csv` (plus experiment-specific cross-cell tables),
//! - `manifest.json`: the manifest echo with the input hash and the SHA-256
//!   of every output file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{generate_rp, DenseSymmetric, EnsembleConfig, Normalization};
use crate::error::{Error, Result};
use crate::krylov_dynamics::{spread_ensemble, TimeGridSpec, DEFAULT_PEAK_THRESHOLD};
use crate::krylov_ipr::{fit_d2, ipr, mean_stderr, KRule, KrylovIprRecord};
use crate::lanczos_stats::{default_x_min, fit_ansatz, fit_logvar_powerlaw, log_variance, AnsatzFit, AnsatzForm};
use crate::spectral::{
    dos_from_lanczos, eig_tridiagonal, frobenius_identity_error, r_statistics, trace_identity_error, DensityCurve,
    DEFAULT_R_WINDOW,
};
use crate::tridiagonalize::{householder_reduce, householder_tridiagonalize, EnsembleProfile, TridiagonalForm};
use crate::variance_flow::{overlay, predict_lanczos_profile};

/// Artifact version recorded in every manifest.
pub const OUTPUT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "KRP_WORKERS";
/// Largest `N` accepted without the override.
pub const GUARD_MAX_N: usize = 8192;
/// Largest `realizations · N³` accepted without the override.
pub const GUARD_MAX_WORK: f64 = 1e14;

const MANIFEST_FILE: &str = "manifest.json";
const AGGREGATE_FILE: &str = "aggregate.csv";
const CELL_DIR: &str = "cells";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LanczosProfile,
    AnsatzSweep,
    RStat,
    Dos,
    Spread,
    KrylovIpr,
    LogVar,
    VarianceFlow,
}

impl Experiment {
    pub fn command_name(&self) -> &'static str {
        match self {
            Experiment::LanczosProfile => "profile",
            Experiment::AnsatzSweep => "fit",
            Experiment::RStat => "rstat",
            Experiment::Dos => "dos",
            Experiment::Spread => "spread",
            Experiment::KrylovIpr => "ipr",
            Experiment::LogVar => "logvar",
            Experiment::VarianceFlow => "variance-flow",
        }
    }

    fn summary_header(&self) -> &'static [&'static str] {
        match self {
            Experiment::LanczosProfile => &["gamma", "N", "realizations", "b_max", "x_at_max"],
            Experiment::AnsatzSweep => &["gamma", "N", "p", "q", "dp", "dq", "epsilon", "form"],
            Experiment::RStat => &["gamma", "N", "r_mean", "r_stderr", "realizations"],
            Experiment::Dos => &["gamma", "N", "p", "q", "ks_lanczos", "ks_ansatz", "mass_lanczos"],
            Experiment::Spread => &["gamma", "peak_value", "peak_time", "plateau", "has_peak_fraction"],
            Experiment::KrylovIpr => &["gamma", "N", "k", "ell", "ipr", "stderr"],
            Experiment::LogVar => &["gamma", "N", "sigma_b"],
            Experiment::VarianceFlow => &["gamma", "N", "median_abs_rel_error", "max_abs_rel_error_bulk"],
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.command_name())
    }
}

/// Experiment-specific knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    /// Inverse temperature of the TFD state.
    pub beta: f64,
    /// Central fraction of levels used for `⟨r⟩`.
    pub r_window: f64,
    /// IPR moment order.
    pub ell: u32,
    /// Histogram bins of the density of states.
    pub dos_bins: usize,
    /// Fit-domain cutoff; `2/N` when absent.
    pub x_min: Option<f64>,
    pub time_grid: TimeGridSpec,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            beta: 0.0,
            r_window: DEFAULT_R_WINDOW,
            ell: 2,
            dos_bins: 60,
            x_min: None,
            time_grid: TimeGridSpec::default(),
        }
    }
}

/// Complete description of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub gamma_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub realizations: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub output_dir: PathBuf,
    pub version: String,
    #[serde(default)]
    pub options: ExperimentOptions,
    /// Lifts the desk-scale guardrails; not part of the input hash.
    #[serde(default)]
    pub allow_large: bool,
}

/// The fields that determine the outputs.
#[derive(Serialize)]
struct HashedInputs<'a> {
    experiment: Experiment,
    gamma_grid: &'a [f64],
    n_grid: &'a [usize],
    realizations: usize,
    seed: u64,
    normalization: Normalization,
    version: &'a str,
    options: &'a ExperimentOptions,
}

#[derive(Serialize)]
struct CellInputs<'a> {
    experiment: Experiment,
    gamma: f64,
    n: usize,
    realizations: usize,
    seed: u64,
    normalization: Normalization,
    version: &'a str,
    options: &'a ExperimentOptions,
}

/// Git-style object hash: SHA-256 over `"<kind> <len>\0<bytes>"`.
fn object_hash(kind: &str, bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("{kind} {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(object_hash("blob", &bytes))
}

impl RunManifest {
    pub fn new(experiment: Experiment, gamma_grid: Vec<f64>, n_grid: Vec<usize>, output_dir: PathBuf) -> Self {
        RunManifest {
            experiment,
            gamma_grid,
            n_grid,
            realizations: 20,
            seed: 0,
            normalization: Normalization::Standard,
            output_dir,
            version: OUTPUT_VERSION.to_string(),
            options: ExperimentOptions::default(),
            allow_large: false,
        }
    }

    /// Content hash of everything that determines the outputs.
    pub fn input_hash(&self) -> String {
        let inputs = HashedInputs {
            experiment: self.experiment,
            gamma_grid: &self.gamma_grid,
            n_grid: &self.n_grid,
            realizations: self.realizations,
            seed: self.seed,
            normalization: self.normalization,
            version: &self.version,
            options: &self.options,
        };
        object_hash("manifest", &serde_json::to_vec(&inputs).expect("serializable"))
    }

    fn cell_key(&self, gamma: f64, n: usize) -> String {
        let inputs = CellInputs {
            experiment: self.experiment,
            gamma,
            n,
            realizations: self.realizations,
            seed: self.seed,
            normalization: self.normalization,
            version: &self.version,
            options: &self.options,
        };
        object_hash("cell", &serde_json::to_vec(&inputs).expect("serializable"))
    }

    /// Structural checks and the desk-scale guardrails.
    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() {
            return Err(Error::invalid("gamma grid is empty"));
        }
        if self.n_grid.is_empty() {
            return Err(Error::invalid("size grid is empty"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be positive"));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::invalid(format!("gamma must be finite and non-negative, got {g}")));
        }
        let min_n = if self.experiment == Experiment::Spread { 2 } else { 16 };
        if let Some(n) = self.n_grid.iter().find(|&&n| n < min_n) {
            return Err(Error::invalid(format!("N must be at least {min_n}, got {n}")));
        }
        if self.experiment == Experiment::KrylovIpr && self.options.ell == 0 {
            return Err(Error::invalid("IPR moment order must be positive"));
        }
        if !self.allow_large {
            let max_n = *self.n_grid.iter().max().expect("non-empty");
            if max_n > GUARD_MAX_N {
                return Err(Error::invalid(format!(
                    "N = {max_n} exceeds {GUARD_MAX_N}; pass the large-run override to proceed"
                )));
            }
            let work = self.realizations as f64 * (max_n as f64).powi(3);
            if work > GUARD_MAX_WORK {
                return Err(Error::invalid(format!(
                    "realizations·N³ = {work:.2e} exceeds {GUARD_MAX_WORK:.0e}; pass the large-run override to proceed"
                )));
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        for &g in &self.gamma_grid {
            for &n in &self.n_grid {
                out.push((g, n));
            }
        }
        out
    }
}

/// Decimal with 8 significant digits; scientific outside `[1e-4, 1e8)`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e8).contains(&a) {
        let mag = a.log10().floor() as i32;
        let decimals = (7 - mag).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.7e}")
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(|e| csv_error(&tmp, e))?;
        w.write_record(header).map_err(|e| csv_error(&tmp, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| csv_error(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let bytes = serde_json::to_vec_pretty(value).expect("serializable");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// A recorded invariant with its acceptance limit (`value ≤ limit`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl InvariantCheck {
    fn new(name: &str, value: f64, limit: f64) -> Self {
        InvariantCheck {
            name: name.into(),
            value,
            limit,
        }
    }

    pub fn passes(&self) -> bool {
        self.value.is_finite() && self.value <= self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Persistent record of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub key: String,
    pub gamma: f64,
    pub n: usize,
    pub status: CellStatus,
    pub error: Option<String>,
    pub summary: Vec<Vec<String>>,
    pub invariants: Vec<InvariantCheck>,
    /// Structured results used by cross-cell tables.
    pub record: serde_json::Value,
    /// Detail file name and its hash.
    pub files: BTreeMap<String, String>,
}

struct CellOutput {
    detail_header: Vec<&'static str>,
    detail: Vec<Vec<String>>,
    summary: Vec<Vec<String>>,
    invariants: Vec<InvariantCheck>,
    record: serde_json::Value,
}

fn cell_stem(gamma: f64, n: usize) -> String {
    format!("g{}_n{}", fmt_num(gamma), n)
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub input_hash: String,
    pub computed: usize,
    pub cached: usize,
    /// `(γ, N, error)` of failed cells.
    pub failed: Vec<(f64, usize, String)>,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEcho {
    manifest: RunManifest,
    input_hash: String,
    created_unix: u64,
    cells: Vec<CellSummary>,
    files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellSummary {
    gamma: f64,
    n: usize,
    status: CellStatus,
    error: Option<String>,
    record_file: String,
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Executes the sweep; completed cells with a matching key are reused.
pub fn run(m: &RunManifest) -> Result<RunReport> {
    run_with_workers(m, worker_count())
}

pub fn run_with_workers(m: &RunManifest, workers: usize) -> Result<RunReport> {
    m.validate()?;
    let out = &m.output_dir;
    let cell_dir = out.join(CELL_DIR);
    fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;

    let mut records = Vec::new();
    let (mut computed, mut cached) = (0, 0);
    for (gamma, n) in m.cells() {
        let stem = cell_stem(gamma, n);
        let record_path = cell_dir.join(format!("{stem}.json"));
        let key = m.cell_key(gamma, n);
        if let Some(rec) = reusable(&record_path, &cell_dir, &key) {
            log::info!("cell γ={gamma} N={n}: cached");
            cached += 1;
            records.push(rec);
            continue;
        }
        log::info!("cell γ={gamma} N={n}: computing");
        let outcome = pool.install(|| compute_cell(m, gamma, n));
        let rec = match outcome {
            Ok(o) => {
                let detail_name = format!("{stem}.csv");
                let detail_path = cell_dir.join(&detail_name);
                write_csv(&detail_path, &o.detail_header, &o.detail)?;
                let mut files = BTreeMap::new();
                files.insert(detail_name, file_hash(&detail_path)?);
                CellRecord {
                    key,
                    gamma,
                    n,
                    status: CellStatus::Ok,
                    error: None,
                    summary: o.summary,
                    invariants: o.invariants,
                    record: o.record,
                    files,
                }
            }
            Err(e) => {
                log::error!("cell γ={gamma} N={n} failed: {e}");
                CellRecord {
                    key,
                    gamma,
                    n,
                    status: CellStatus::Failed,
                    error: Some(e.to_string()),
                    summary: Vec::new(),
                    invariants: Vec::new(),
                    record: serde_json::Value::Null,
                    files: BTreeMap::new(),
                }
            }
        };
        write_json(&record_path, &rec)?;
        computed += 1;
        records.push(rec);
    }

    let mut aggregates = vec![(AGGREGATE_FILE.to_string(), m.experiment.summary_header().to_vec(), aggregate_rows(&records))];
    aggregates.extend(cross_cell_tables(m, &records));
    for (name, header, rows) in &aggregates {
        write_csv(&out.join(name), header, rows)?;
    }

    let mut files = BTreeMap::new();
    for (name, _, _) in &aggregates {
        files.insert(name.clone(), file_hash(&out.join(name))?);
    }
    let mut cells = Vec::new();
    for rec in &records {
        let stem = cell_stem(rec.gamma, rec.n);
        let record_file = format!("{CELL_DIR}/{stem}.json");
        files.insert(record_file.clone(), file_hash(&out.join(&record_file))?);
        for name in rec.files.keys() {
            let rel = format!("{CELL_DIR}/{name}");
            files.insert(rel.clone(), file_hash(&out.join(&rel))?);
        }
        cells.push(CellSummary {
            gamma: rec.gamma,
            n: rec.n,
            status: rec.status,
            error: rec.error.clone(),
            record_file,
        });
    }
    let echo = ManifestEcho {
        manifest: m.clone(),
        input_hash: m.input_hash(),
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        cells,
        files,
    };
    write_json(&out.join(MANIFEST_FILE), &echo)?;
    Ok(RunReport {
        output_dir: out.clone(),
        input_hash: echo.input_hash,
        computed,
        cached,
        failed: records
            .iter()
            .filter(|r| r.status == CellStatus::Failed)
            .map(|r| (r.gamma, r.n, r.error.clone().unwrap_or_default()))
            .collect(),
    })
}

fn reusable(record_path: &Path, cell_dir: &Path, key: &str) -> Option<CellRecord> {
    let rec: CellRecord = read_json(record_path).ok()?;
    if rec.key != key || rec.status != CellStatus::Ok {
        return None;
    }
    for (name, hash) in &rec.files {
        if file_hash(&cell_dir.join(name)).ok()? != *hash {
            return None;
        }
    }
    Some(rec)
}

fn aggregate_rows(records: &[CellRecord]) -> Vec<Vec<String>> {
    records.iter().flat_map(|r| r.summary.iter().cloned()).collect()
}

type Table = (String, Vec<&'static str>, Vec<Vec<String>>);

fn cross_cell_tables(m: &RunManifest, records: &[CellRecord]) -> Vec<Table> {
    let ok: Vec<&CellRecord> = records.iter().filter(|r| r.status == CellStatus::Ok).collect();
    match m.experiment {
        Experiment::KrylovIpr => {
            let all: Vec<KrylovIprRecord> = ok
                .iter()
                .filter_map(|r| serde_json::from_value::<Vec<KrylovIprRecord>>(r.record.clone()).ok())
                .flatten()
                .collect();
            let mut tables = Vec::new();
            for (name, rule) in [("d2.csv", KRule::LastVector), ("d2_mid.csv", KRule::MidVector)] {
                let mut rows = Vec::new();
                for &g in &m.gamma_grid {
                    let recs: Vec<KrylovIprRecord> = all.iter().copied().filter(|r| r.gamma == g).collect();
                    match fit_d2(&recs, rule) {
                        Ok(f) => rows.push(vec![fmt_num(g), fmt_num(f.d2), fmt_num(f.fit_stderr)]),
                        Err(e) => log::warn!("D₂ at γ={g}: {e}"),
                    }
                }
                tables.push((name.to_string(), vec!["gamma", "D2", "stderr"], rows));
            }
            tables
        }
        Experiment::LogVar => {
            let mut rows = Vec::new();
            for &n in &m.n_grid {
                let pts: Vec<(f64, f64)> = ok
                    .iter()
                    .filter(|r| r.n == n)
                    .filter_map(|r| r.record.as_f64().map(|s| (r.gamma, s)))
                    .collect();
                match fit_logvar_powerlaw(&pts, n) {
                    Ok(fits) => {
                        for f in fits {
                            rows.push(vec![n.to_string(), fmt_num(f.a), fmt_num(f.n), fmt_num(f.c), f.phase.to_string()]);
                        }
                    }
                    Err(e) => log::warn!("power law at N={n}: {e}"),
                }
            }
            vec![("powerlaw.csv".to_string(), vec!["N", "a", "n", "c", "phase"], rows)]
        }
        _ => Vec::new(),
    }
}

fn ensemble_cfg(m: &RunManifest, gamma: f64, n: usize) -> EnsembleConfig {
    EnsembleConfig::new(n, gamma, m.normalization, m.seed)
}

fn realization(cfg: &EnsembleConfig, r: usize) -> Result<DenseSymmetric> {
    generate_rp(&cfg.with_realization(r as u64))
}

/// `max(|tr H − Σa|, |‖H‖²_F − Σa² − 2Σb²| / ‖H‖_F) / ‖H‖_F`.
fn orthogonal_invariant_error(h: &DenseSymmetric, t: &TridiagonalForm) -> f64 {
    let f = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let trace: f64 = (0..h.dim()).map(|i| h.get(i, i)).sum();
    let ta: f64 = t.a.iter().sum();
    let f2: f64 = t.a.iter().map(|x| x * x).sum::<f64>() + 2.0 * t.b.iter().map(|x| x * x).sum::<f64>();
    ((trace - ta).abs()).max((f * f - f2).abs() / f) / f
}

fn ensemble_forms(cfg: &EnsembleConfig, realizations: usize) -> Result<(Vec<TridiagonalForm>, f64)> {
    let out: Vec<(TridiagonalForm, f64)> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let h = realization(cfg, r)?;
            let t = householder_tridiagonalize(&h, false)?;
            let err = orthogonal_invariant_error(&h, &t);
            Ok((t, err))
        })
        .collect::<Result<_>>()?;
    let err = out.iter().map(|o| o.1).fold(0.0, f64::max);
    Ok((out.into_iter().map(|o| o.0).collect(), err))
}

fn compute_cell(m: &RunManifest, gamma: f64, n: usize) -> Result<CellOutput> {
    let cfg = ensemble_cfg(m, gamma, n);
    let reals = m.realizations;
    let g = fmt_num(gamma);
    match m.experiment {
        Experiment::LanczosProfile => {
            let (forms, err) = ensemble_forms(&cfg, reals)?;
            let prof = EnsembleProfile::from_forms(&forms)?;
            let detail = profile_rows(&prof);
            let (imax, bmax) = prof
                .b_mean
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, b)| (i, *b))
                .unwrap_or((0, 0.0));
            Ok(CellOutput {
                detail_header: vec!["x", "a_mean", "a_stderr", "b_mean", "b_stderr"],
                detail,
                summary: vec![vec![g, n.to_string(), reals.to_string(), fmt_num(bmax), fmt_num((imax + 1) as f64 / n as f64)]],
                invariants: vec![InvariantCheck::new("orthogonal_invariants", err, 1e-10)],
                record: serde_json::Value::Null,
            })
        }
        Experiment::AnsatzSweep => {
            let (forms, err) = ensemble_forms(&cfg, reals)?;
            let prof = EnsembleProfile::from_forms(&forms)?;
            let xb = prof.profile();
            let x_min = m.options.x_min.unwrap_or_else(|| default_x_min(n));
            let qlog = fit_ansatz(&xb, AnsatzForm::QLog, x_min)?;
            let sup = fit_ansatz(&xb, AnsatzForm::Superposition, x_min)?;
            let detail = xb
                .iter()
                .map(|&(x, b)| {
                    let model = |f: &AnsatzFit| f.form.evaluate(f.p, f.q, x).map_or(f64::NAN, |v| v * f.scale);
                    vec![fmt_num(x), fmt_num(b), fmt_num(b * b), fmt_num(model(&qlog)), fmt_num(model(&sup))]
                })
                .collect();
            let row = |f: &AnsatzFit| {
                vec![
                    g.clone(),
                    n.to_string(),
                    fmt_num(f.p),
                    fmt_num(f.q),
                    fmt_num(f.dp),
                    fmt_num(f.dq),
                    fmt_num(f.epsilon),
                    f.form.to_string(),
                ]
            };
            Ok(CellOutput {
                detail_header: vec!["x", "b_mean", "b2", "b2_qlog", "b2_superposition"],
                detail,
                summary: vec![row(&qlog), row(&sup)],
                invariants: vec![InvariantCheck::new("orthogonal_invariants", err, 1e-10)],
                record: serde_json::to_value([&qlog, &sup]).expect("serializable"),
            })
        }
        Experiment::RStat => {
            let out: Vec<(f64, f64)> = (0..reals)
                .into_par_iter()
                .map(|r| {
                    let h = realization(&cfg, r)?;
                    let t = householder_tridiagonalize(&h, false)?;
                    let values = eig_tridiagonal(&t, false)?.values;
                    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
                    let err = (trace_identity_error(&t, &values) / scale)
                        .max(frobenius_identity_error(&t, &values) / (scale * scale));
                    Ok((r_statistics(&values, m.options.r_window)?, err))
                })
                .collect::<Result<_>>()?;
            let rs: Vec<f64> = out.iter().map(|o| o.0).collect();
            let err = out.iter().map(|o| o.1).fold(0.0, f64::max);
            let (mean, se) = mean_stderr(&rs);
            Ok(CellOutput {
                detail_header: vec!["realization", "r"],
                detail: rs.iter().enumerate().map(|(i, r)| vec![i.to_string(), fmt_num(*r)]).collect(),
                summary: vec![vec![g, n.to_string(), fmt_num(mean), fmt_num(se), reals.to_string()]],
                invariants: vec![InvariantCheck::new("eigenvalue_identities", err, 1e-10)],
                record: serde_json::json!({ "r_mean": mean, "r_stderr": se }),
            })
        }
        Experiment::Dos => dos_cell(m, &cfg, gamma, n),
        Experiment::Spread => {
            let ens = spread_ensemble(&cfg, reals, m.options.beta, &m.options.time_grid)?;
            let peak = ens.peak(DEFAULT_PEAK_THRESHOLD)?;
            let detail = ens
                .times
                .iter()
                .zip(&ens.ks_mean)
                .zip(&ens.ks_stderr)
                .map(|((t, k), s)| vec![fmt_num(*t), fmt_num(*k), fmt_num(*s)])
                .collect();
            Ok(CellOutput {
                detail_header: vec!["t", "Ks_mean", "Ks_stderr"],
                detail,
                summary: vec![vec![
                    g,
                    fmt_num(peak.peak_value),
                    fmt_num(peak.peak_time),
                    fmt_num(peak.plateau),
                    fmt_num(ens.has_peak_fraction),
                ]],
                invariants: vec![InvariantCheck::new("unitarity", ens.unitarity_defect, 1e-9)],
                record: serde_json::to_value(peak).expect("serializable"),
            })
        }
        Experiment::KrylovIpr => {
            let ell = m.options.ell;
            let ks = [KRule::LastVector.index(n), KRule::MidVector.index(n)];
            let per: Vec<([f64; 2], f64)> = (0..reals)
                .into_par_iter()
                .map(|r| {
                    let h = realization(&cfg, r)?;
                    let red = householder_reduce(&h)?;
                    let mut vals = [0.0; 2];
                    let mut defect: f64 = 0.0;
                    for (slot, &k) in vals.iter_mut().zip(&ks) {
                        let v = red.krylov_vector(k);
                        *slot = ipr(&v, ell)?;
                        defect = defect.max((ipr(&v, 1)? - 1.0).abs());
                    }
                    Ok((vals, defect))
                })
                .collect::<Result<_>>()?;
            let defect = per.iter().map(|p| p.1).fold(0.0, f64::max);
            let records: Vec<KrylovIprRecord> = ks
                .iter()
                .enumerate()
                .map(|(slot, &k)| {
                    let vals: Vec<f64> = per.iter().map(|p| p.0[slot]).collect();
                    let (mean, se) = mean_stderr(&vals);
                    KrylovIprRecord {
                        gamma,
                        n,
                        k,
                        ell,
                        ipr: mean,
                        stderr: se,
                        realizations: reals,
                    }
                })
                .collect();
            let lower = (n as f64).powi(1 - ell as i32);
            let bound_violation = records
                .iter()
                .map(|r| (lower - r.ipr).max(r.ipr - 1.0).max(0.0))
                .fold(0.0, f64::max);
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| vec![g.clone(), n.to_string(), r.k.to_string(), r.ell.to_string(), fmt_num(r.ipr), fmt_num(r.stderr)])
                .collect();
            Ok(CellOutput {
                detail_header: vec!["gamma", "N", "k", "ell", "ipr", "stderr"],
                detail: rows.clone(),
                summary: rows,
                invariants: vec![
                    InvariantCheck::new("unit_norm", defect, 1e-10),
                    InvariantCheck::new("ipr_bounds", bound_violation, 1e-12),
                ],
                record: serde_json::to_value(&records).expect("serializable"),
            })
        }
        Experiment::LogVar => {
            let (forms, err) = ensemble_forms(&cfg, reals)?;
            let sig: Vec<f64> = forms.iter().map(log_variance).collect::<Result<_>>()?;
            let (mean, _) = mean_stderr(&sig);
            Ok(CellOutput {
                detail_header: vec!["realization", "sigma_b"],
                detail: sig.iter().enumerate().map(|(i, s)| vec![i.to_string(), fmt_num(*s)]).collect(),
                summary: vec![vec![g, n.to_string(), fmt_num(mean)]],
                invariants: vec![InvariantCheck::new("orthogonal_invariants", err, 1e-10)],
                record: serde_json::json!(mean),
            })
        }
        Experiment::VarianceFlow => {
            let hcfg = EnsembleConfig::new(n, gamma, Normalization::Heteroskedastic, m.seed);
            let v = hcfg.variances();
            let pred = predict_lanczos_profile(n, v.diagonal, v.off_diagonal)?;
            let (forms, err) = ensemble_forms(&hcfg, reals)?;
            let emp = EnsembleProfile::from_forms(&forms)?.profile();
            let rows = overlay(&pred.b_profile(), &emp)?;
            let mut abs: Vec<f64> = rows.iter().map(|r| r.rel_error.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let median = abs[abs.len() / 2];
            let bulk = rows
                .iter()
                .filter(|r| (0.1..=0.9).contains(&r.x))
                .map(|r| r.rel_error.abs())
                .fold(0.0, f64::max);
            Ok(CellOutput {
                detail_header: vec!["x", "b_predicted", "b_empirical", "rel_error"],
                detail: rows
                    .iter()
                    .map(|r| vec![fmt_num(r.x), fmt_num(r.b_predicted), fmt_num(r.b_empirical), fmt_num(r.rel_error)])
                    .collect(),
                summary: vec![vec![g, n.to_string(), fmt_num(median), fmt_num(bulk)]],
                invariants: vec![
                    InvariantCheck::new("orthogonal_invariants", err, 1e-10),
                    InvariantCheck::new("clamped_variances", pred.clamped as f64, 0.0),
                ],
                record: serde_json::json!({ "median": median, "bulk_max": bulk }),
            })
        }
    }
}

fn profile_rows(p: &EnsembleProfile) -> Vec<Vec<String>> {
    let n = p.n as f64;
    (0..p.b_mean.len())
        .map(|i| {
            vec![
                fmt_num((i + 1) as f64 / n),
                fmt_num(p.a_mean[i + 1]),
                fmt_num(p.a_stderr[i + 1]),
                fmt_num(p.b_mean[i]),
                fmt_num(p.b_stderr[i]),
            ]
        })
        .collect()
}

/// Refinement towards both ends of `(0, 1)`, where Lanczos profiles are singular.
pub fn two_sided_grid(edge: f64, per_side: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..per_side)
        .map(|i| edge.powf(1.0 - i as f64 / per_side as f64) * 0.5)
        .collect();
    xs.extend((0..per_side).rev().map(|i| 1.0 - edge.powf(1.0 - i as f64 / per_side as f64) * 0.5));
    xs
}

/// Density of states three ways: eigenvalue histogram, the Lanczos integral
/// of the ensemble-mean profile, and the same integral of the fitted q-log
/// profile.
pub struct DosComparison {
    pub fit: AnsatzFit,
    pub centers: Vec<f64>,
    pub empirical: Vec<f64>,
    pub lanczos: Vec<f64>,
    pub ansatz: Vec<f64>,
    pub ks_lanczos: f64,
    pub ks_ansatz: f64,
    pub mass_lanczos: f64,
}

pub fn dos_comparison(cfg: &EnsembleConfig, realizations: usize, bins: usize, x_min: Option<f64>) -> Result<DosComparison> {
    if bins < 4 {
        return Err(Error::invalid("need at least 4 histogram bins"));
    }
    let n = cfg.n;
    let out: Vec<(TridiagonalForm, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let h = realization(cfg, r)?;
            let t = householder_tridiagonalize(&h, false)?;
            let values = eig_tridiagonal(&t, false)?.values;
            Ok((t, values))
        })
        .collect::<Result<_>>()?;
    let forms: Vec<&TridiagonalForm> = out.iter().map(|o| &o.0).collect();
    let prof = EnsembleProfile::from_forms(forms.iter().copied())?;
    let samples: Vec<f64> = out.iter().flat_map(|o| o.1.iter().copied()).collect();
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in &samples {
        let i = (((e - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let total = samples.len() as f64;
    let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * width)).collect();

    let xab = prof.profile_with_a();
    let fit = fit_ansatz(&prof.profile(), AnsatzForm::QLog, x_min.unwrap_or_else(|| default_x_min(n)))?;
    let a_mean = prof.a_mean.iter().sum::<f64>() / prof.a_mean.len() as f64;
    let ansatz_profile: Vec<(f64, f64, f64)> = two_sided_grid(1e-10, 2000)
        .into_iter()
        .map(|x| {
            let b2 = fit.scale * fit.form.evaluate(fit.p, fit.q, x).unwrap_or(0.0);
            (x, a_mean, b2.max(0.0).sqrt())
        })
        .collect();
    // fine grid for the cumulative distributions
    let pad = 0.1 * (hi - lo);
    let fine: Vec<f64> = (0..=800).map(|i| lo - pad + (hi - lo + 2.0 * pad) * i as f64 / 800.0).collect();
    let lanczos_fine = dos_from_lanczos(&xab, &fine)?;
    let ansatz_fine = dos_from_lanczos(&ansatz_profile, &fine)?;
    let lanczos_curve = DensityCurve::new(fine.clone(), lanczos_fine)?;
    let ansatz_curve = DensityCurve::new(fine, ansatz_fine)?;
    Ok(DosComparison {
        lanczos: dos_from_lanczos(&xab, &centers)?,
        ansatz: dos_from_lanczos(&ansatz_profile, &centers)?,
        ks_lanczos: lanczos_curve.ks_distance(&samples),
        ks_ansatz: ansatz_curve.ks_distance(&samples),
        mass_lanczos: lanczos_curve.total_mass(),
        fit,
        centers,
        empirical,
    })
}

fn dos_cell(m: &RunManifest, cfg: &EnsembleConfig, gamma: f64, n: usize) -> Result<CellOutput> {
    let d = dos_comparison(cfg, m.realizations, m.options.dos_bins, m.options.x_min)?;
    let detail = (0..d.centers.len())
        .map(|i| {
            vec![
                fmt_num(d.centers[i]),
                fmt_num(d.empirical[i]),
                fmt_num(d.lanczos[i]),
                fmt_num(d.ansatz[i]),
            ]
        })
        .collect();
    Ok(CellOutput {
        detail_header: vec!["E", "rho_empirical", "rho_lanczos", "rho_ansatz"],
        detail,
        summary: vec![vec![
            fmt_num(gamma),
            n.to_string(),
            fmt_num(d.fit.p),
            fmt_num(d.fit.q),
            fmt_num(d.ks_lanczos),
            fmt_num(d.ks_ansatz),
            fmt_num(d.mass_lanczos),
        ]],
        invariants: vec![InvariantCheck::new("lanczos_dos_mass_defect", (d.mass_lanczos - 1.0).abs(), 2e-2)],
        record: serde_json::json!({ "ks_lanczos": d.ks_lanczos, "ks_ansatz": d.ks_ansatz }),
    })
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub check: String,
    pub target: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn success(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Files whose hash did not match or that are missing.
    pub fn offending_files(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.pass && r.check == "file-hash")
            .map(|r| r.target.clone())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "{:<4} {:<16} {:<40} {}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.target,
                r.detail
            ));
        }
        s
    }
}

/// Re-hashes every output file, re-checks the stored invariants and, when
/// `expected` is given, compares its input hash with the recorded one.
pub fn verify(dir: &Path, expected: Option<&RunManifest>) -> Result<VerifyReport> {
    let echo: ManifestEcho = read_json(&dir.join(MANIFEST_FILE))?;
    let mut rows = Vec::new();
    if let Some(m) = expected {
        let h = m.input_hash();
        rows.push(VerifyRow {
            check: "input-hash".into(),
            target: MANIFEST_FILE.into(),
            pass: h == echo.input_hash,
            detail: if h == echo.input_hash {
                "matches".into()
            } else {
                format!("expected {h}, recorded {}", echo.input_hash)
            },
        });
    }
    for (name, hash) in &echo.files {
        let got = file_hash(&dir.join(name));
        let (pass, detail) = match got {
            Ok(g) if g == *hash => (true, "ok".to_string()),
            Ok(g) => (false, format!("hash {g} differs from recorded {hash}")),
            Err(e) => (false, e.to_string()),
        };
        rows.push(VerifyRow {
            check: "file-hash".into(),
            target: name.clone(),
            pass,
            detail,
        });
    }
    for cell in &echo.cells {
        let target = format!("γ={} N={}", fmt_num(cell.gamma), cell.n);
        if cell.status == CellStatus::Failed {
            rows.push(VerifyRow {
                check: "cell-status".into(),
                target: target.clone(),
                pass: false,
                detail: cell.error.clone().unwrap_or_default(),
            });
            continue;
        }
        match read_json::<CellRecord>(&dir.join(&cell.record_file)) {
            Ok(rec) => {
                for inv in &rec.invariants {
                    rows.push(VerifyRow {
                        check: inv.name.clone(),
                        target: target.clone(),
                        pass: inv.passes(),
                        detail: format!("{:.3e} (limit {:.1e})", inv.value, inv.limit),
                    });
                }
            }
            Err(e) => rows.push(VerifyRow {
                check: "cell-record".into(),
                target,
                pass: false,
                detail: e.to_string(),
            }),
        }
    }
    Ok(VerifyReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.33333333");
        assert_eq!(fmt_num(-123.456789012), "-123.45679");
        assert_eq!(fmt_num(1e-9), "1.0000000e-9");
        assert_eq!(fmt_num(12345678901.0), "1.2345679e10");
    }

    #[test]
    fn guardrails() {
        let mut m = RunManifest::new(Experiment::RStat, vec![0.5], vec![9000], PathBuf::from("unused"));
        assert!(m.validate().is_err());
        m.allow_large = true;
        assert!(m.validate().is_ok());
        let mut m = RunManifest::new(Experiment::RStat, vec![0.5], vec![8192], PathBuf::from("unused"));
        m.realizations = 1000;
        assert!(m.validate().is_err());
        let m = RunManifest::new(Experiment::RStat, vec![0.5], vec![], PathBuf::from("unused"));
        assert!(m.validate().is_err());
    }

    #[test]
    fn input_hash_tracks_inputs_only() {
        let a = RunManifest::new(Experiment::RStat, vec![0.5], vec![64], PathBuf::from("a"));
        let mut b = a.clone();
        b.output_dir = PathBuf::from("b");
        b.allow_large = true;
        assert_eq!(a.input_hash(), b.input_hash());
        b.seed = 1;
        assert_ne!(a.input_hash(), b.input_hash());
    }
}
