//! Command-line front end: `verify`, `simulate`, `volume` and `contour`.

pub mod format;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use entverify::likelihood::{simulate_counts, Setting};
use entverify::qstate::{self, ops, DensityMatrix};
use entverify::regions::{self, check_epsilon, solve_confidence, ConfidenceReport, Method, RegionAssignment};
use entverify::rng;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use format::{ExperimentFile, WitnessEntry, WitnessPreset};

pub const EXIT_DETECTED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FULL_STATE_SPACE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{pointer}: line {line}, column {column}: {message}")]
    Parse {
        pointer: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Core(#[from] entverify::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "entverify", version, about = "Confidence that a measured state is witness-detected entangled")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the confidence of an experiment file and emit a JSON report.
    Verify(VerifyArgs),
    /// Draw multinomial counts from a known state and emit an experiment file.
    Simulate(SimulateArgs),
    /// Print the Hilbert-Schmidt volume of the state space.
    Volume(VolumeArgs),
    /// Tabulate δ over a grid of run counts and confidences as CSV.
    Contour(ContourArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    GammaW,
    GammaAlpha,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::GammaW => Method::GammaW,
            MethodArg::GammaAlpha => Method::GammaAlpha,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; the Monte Carlo split follows this, so pin it for
    /// reproducible reports.
    #[arg(long, env = "ENTVERIFY_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long)]
    pub sa_steps: Option<usize>,
    #[arg(long)]
    pub sa_repeats: Option<usize>,
    /// Check a single ε = 10^x instead of solving for the largest confidence.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon_log10: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    /// `(|00⟩ + |11⟩)/√2`
    PhiPlus,
    /// `(|01⟩ − |10⟩)/√2`
    PsiMinus,
    /// `(|00⟩ + e^{iφ}|11⟩)/√2` with φ given by `--phase`.
    Phi,
    /// The maximally mixed state.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WitnessArg {
    PhiPlusLinear,
    PhiPlusNonlinear,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub state: StateArg,
    /// Phase φ of `--state phi` in units of π.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phase: f64,
    /// Weight p of white noise: `(1 − p)ρ + p𝟙/d`.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Comma-separated Pauli product bases, one per setting.
    #[arg(long, default_value = "xx,yy,zz")]
    pub settings: String,
    /// Total shots, split evenly across settings.
    #[arg(long)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = WitnessArg::PhiPlusNonlinear, conflicts_with = "witness_file")]
    pub witness: WitnessArg,
    /// JSON file holding a `witness` block, for dimensions other than 4.
    #[arg(long)]
    pub witness_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[arg(long)]
    pub dim: usize,
    /// Also estimate the volume by rejection sampling.
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "ENTVERIFY_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n_min: u64,
    #[arg(long)]
    pub n_max: u64,
    #[arg(long, default_value_t = 1)]
    pub n_step: u64,
    #[arg(long)]
    pub c_min: f64,
    #[arg(long)]
    pub c_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Nesting depth of arrays, with objects counting as unbounded.
fn array_depth(v: &Value) -> usize {
    match v {
        Value::Array(items) => 1 + items.iter().map(array_depth).max().unwrap_or(0),
        Value::Object(_) => usize::MAX / 2,
        _ => 0,
    }
}

fn write_compact(v: &Value, out: &mut String) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_compact(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

/// Pretty JSON that keeps numeric vectors and matrix rows on one line.
fn write_pretty(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| " ".repeat(n);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (key, value)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 2));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_pretty(value, indent + 2, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        Value::Array(items) if array_depth(v) > 2 => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 2));
                write_pretty(item, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        other => write_compact(other, out),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("serializable");
    let mut out = String::new();
    write_pretty(&value, 0, &mut out);
    out.push('\n');
    out.into_bytes()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `verify` and returns the emitted report.
pub fn verify(args: &VerifyArgs) -> Result<ConfidenceReport, CliError> {
    let experiment = format::parse(&read(&args.path)?)?.validate()?;
    let mut params = experiment.params.to_confidence();
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.method {
        params.method = v.into();
    }
    if let Some(v) = args.eta {
        params.eta = v;
    }
    if let Some(v) = args.mc_samples {
        params.mc_samples = v;
    }
    if let Some(v) = args.sa_steps {
        params.sa.steps = v;
    }
    if let Some(v) = args.sa_repeats {
        params.sa.repeats = v;
    }
    params.workers = args.workers.unwrap_or_else(default_workers);
    let epsilon = args.epsilon_log10.or(experiment.params.epsilon_log10);
    if matches!(epsilon, Some(x) if x >= 0.0 || x.is_nan()) {
        return Err(CliError::Usage("--epsilon-log10 must be negative".into()));
    }
    let report = with_workers(params.workers, || match epsilon {
        Some(x) => check_epsilon(&experiment.data, &experiment.witness, &params, x),
        None => solve_confidence(&experiment.data, &experiment.witness, &params),
    })?;
    emit(args.out.as_deref(), &to_json(&report))?;
    Ok(report)
}

/// Exit status for a report: detected, inconclusive, or failed with a diagnostic.
pub fn exit_code(report: &ConfidenceReport) -> i32 {
    match (report.region, &report.diagnostic) {
        (_, Some(_)) => EXIT_ERROR,
        (RegionAssignment::DetectedSet, None) => EXIT_DETECTED,
        (RegionAssignment::FullStateSpace, None) => EXIT_FULL_STATE_SPACE,
    }
}

fn target_state(args: &SimulateArgs, dim: usize) -> Result<DensityMatrix, CliError> {
    if !(0.0..=1.0).contains(&args.noise) {
        return Err(CliError::Usage(format!("--noise {} outside [0, 1]", args.noise)));
    }
    let pure = match args.state {
        StateArg::PhiPlus => Some(ops::phi_plus()),
        StateArg::PsiMinus => Some(ops::psi_minus()),
        StateArg::Phi => Some(ops::phi_state(args.phase * std::f64::consts::PI)),
        StateArg::Mixed => None,
    };
    let mixed = DensityMatrix::maximally_mixed(dim);
    let Some(psi) = pure else {
        return Ok(mixed);
    };
    if psi.len() != dim {
        return Err(CliError::Usage(format!(
            "state {:?} is two-qubit but the settings describe dimension {dim}",
            args.state
        )));
    }
    Ok(DensityMatrix::mix(&DensityMatrix::pure(&psi)?, &mixed, 1.0 - args.noise)?)
}

/// Runs `simulate` and returns the emitted file.
pub fn simulate(args: &SimulateArgs) -> Result<ExperimentFile, CliError> {
    let labels: Vec<&str> = args.settings.split(',').map(str::trim).collect();
    let qubits = labels[0].len();
    if labels.iter().any(|l| l.len() != qubits) {
        return Err(CliError::Usage("all settings must act on the same number of qubits".into()));
    }
    if qubits == 0 || qubits > 10 {
        return Err(CliError::Usage(format!("unsupported setting length {qubits}")));
    }
    let dim = 1usize << qubits;
    let settings = labels
        .iter()
        .map(|l| Setting::pauli(l, &vec![0; dim]))
        .collect::<Result<Vec<_>, _>>()?;
    let state = target_state(args, dim)?;
    let data = simulate_counts(&state, &settings, args.shots, &mut rng::stream(args.seed))?;
    let witness = match &args.witness_file {
        Some(path) => {
            let text = read(path)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let entry: WitnessEntry = serde_path_to_error::deserialize(de).map_err(|e| CliError::Invalid {
                pointer: format!("{}{}", path.display(), e.path()),
                message: e.into_inner().to_string(),
            })?;
            entry.build(dim)?;
            entry
        }
        None => {
            let name = match args.witness {
                WitnessArg::PhiPlusLinear => WitnessPreset::PhiPlusLinear,
                WitnessArg::PhiPlusNonlinear => WitnessPreset::PhiPlusNonlinear,
            };
            let entry = WitnessEntry::Preset { name };
            entry.build(dim)?;
            entry
        }
    };
    let description = format!(
        "synthetic: state {:?}, phase {}π, noise {}, settings {}, shots {}, seed {}",
        args.state, args.phase, args.noise, args.settings, args.shots, args.seed
    );
    let file = ExperimentFile::from_data(&data, witness, Some(description));
    emit(args.out.as_deref(), &to_json(&file))?;
    Ok(file)
}

#[derive(Debug, Serialize)]
pub struct VolumeReport {
    pub dimension: usize,
    pub closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_deviation: Option<f64>,
}

pub fn volume(args: &VolumeArgs) -> Result<VolumeReport, CliError> {
    let closed_form = qstate::hs_volume(args.dim)?;
    let mut report = VolumeReport {
        dimension: args.dim,
        closed_form,
        monte_carlo: None,
        standard_error: None,
        relative_deviation: None,
    };
    if let Some(samples) = args.mc_samples {
        let workers = args.workers.unwrap_or_else(default_workers);
        let est = with_workers(workers, || qstate::mc_hs_volume(args.dim, samples, args.seed, workers))??;
        report.monte_carlo = Some(est.value);
        report.standard_error = Some(est.standard_error);
        report.relative_deviation = Some((est.value - closed_form) / closed_form);
    }
    emit(None, &to_json(&report))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct ContourRow {
    pub n: u64,
    pub confidence: f64,
    pub delta: f64,
    /// `δ ≥ 1`: only the full state space can be assigned.
    pub trivial: bool,
}

pub fn contour_rows(args: &ContourArgs) -> Result<Vec<ContourRow>, CliError> {
    if args.n_min == 0 || args.n_min > args.n_max || args.n_step == 0 {
        return Err(CliError::Usage("need 1 ≤ n-min ≤ n-max and n-step ≥ 1".into()));
    }
    if !(args.c_min > 0.0 && args.c_min <= args.c_max && args.c_step > 0.0) {
        return Err(CliError::Usage("need 0 < c-min ≤ c-max and c-step > 0".into()));
    }
    let c_count = ((args.c_max - args.c_min) / args.c_step + 1e-9).floor() as u64 + 1;
    let mut rows = Vec::new();
    for i in 0..c_count {
        let confidence = args.c_min + i as f64 * args.c_step;
        let mut n = args.n_min;
        while n <= args.n_max {
            let delta = regions::delta_log10(n, args.dim, -confidence)?;
            rows.push(ContourRow {
                n,
                confidence,
                delta,
                trivial: delta >= 1.0,
            });
            n = match n.checked_add(args.n_step) {
                Some(next) => next,
                None => break,
            };
        }
    }
    Ok(rows)
}

pub fn contour(args: &ContourArgs) -> Result<Vec<ContourRow>, CliError> {
    let rows = contour_rows(args)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    emit(args.out.as_deref(), &bytes)?;
    Ok(rows)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Verify(args) => verify(args).map(|r| {
            if let Some(d) = &r.diagnostic {
                eprintln!("entverify: {d}");
            }
            exit_code(&r)
        }),
        Command::Simulate(args) => simulate(args).map(|_| EXIT_DETECTED),
        Command::Volume(args) => volume(args).map(|_| EXIT_DETECTED),
        Command::Contour(args) => contour(args).map(|_| EXIT_DETECTED),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("entverify: {err}");
            EXIT_ERROR
        }
    }
}
