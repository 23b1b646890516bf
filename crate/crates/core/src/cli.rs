//! Command-line front end: argument parsing, config files, the dataset file
//! format and CSV/JSON output.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
//! 3 unreadable or malformed input, 4 pilot non-convergence under `--strict`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_report, BoundConstants, MonteCarloConfig};
use crate::error::Error;
use crate::model::{split_sample, Dataset, ProblemInstance, SplitScheme};
use crate::mom::{
    mom_pilot_estimate, mom_select_with_pilot, ContaminationSpec, MomConfig, OutlierKind, PilotKind,
};
use crate::selector::{Regime, ThresholdSpec, TwoStepFit, DEFAULT_DELTA};
use crate::sim::{
    gen_instance, grid, mc_risk_batch, phase_sweep, DesignKind, GeneratorSpec, Method, NoiseKind,
    RiskEstimate, SignalKind, SweepAxis, SweepRow,
};
use crate::slope::PilotConfig;

/// Version of the CSV layout, written in every row.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Tag in the header line of dataset files.
pub const DATASET_FORMAT: &str = "sparse-recover-dataset";

const THREADS_ENV: &str = "SPARSE_RECOVER_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "sparse-recover",
    version,
    about = "Exact support recovery in noisy compressed sensing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a selector on a dataset file and write the estimated support.
    Select(Opts),
    /// Estimate the Hamming risk and exact-recovery rate by simulation.
    Risk(Opts),
    /// Repeat `risk` over a grid of one problem parameter.
    Sweep(Opts),
    /// Evaluate the theoretical risk bounds.
    Bounds(Opts),
    /// Write a synthetic dataset file.
    Generate(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    TwoStep,
    Mom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    Gaussian,
    Rademacher,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Gaussian,
    StudentT,
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    Equal,
    RandomSigns,
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outliers {
    Adversarial,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Theory,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomPilotName {
    SqrtSlope,
    MomPilot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Linear,
    Log,
}

/// Every option of every command. A `--config` JSON file supplies the same
/// fields (snake_case keys); flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Opts {
    /// JSON file with default values for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Input dataset file (select).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Size of the first subsample; defaults to n/2.
    #[arg(long)]
    pub n1: Option<usize>,

    /// Threshold regime: known-all, known-a, known-sigma or fully-adaptive.
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Selectors to run; comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Option<Vec<MethodName>>,
    /// Penalty preset of the pilot.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Explicit penalty constant; overrides --preset.
    #[arg(long)]
    pub lambda_a: Option<f64>,

    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    pub design: Option<Design>,
    #[arg(long, value_enum)]
    pub noise: Option<Noise>,
    /// Degrees of freedom of Student-t noise.
    #[arg(long)]
    pub df: Option<f64>,
    #[arg(long, value_enum)]
    pub signal: Option<Signal>,
    /// Largest |beta_i|/a for `--signal at-least`.
    #[arg(long)]
    pub max_ratio: Option<f64>,
    /// Number of outlier rows.
    #[arg(long)]
    pub outliers: Option<usize>,
    #[arg(long, value_enum)]
    pub outlier_kind: Option<Outliers>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Row range `lo:hi` the outliers are placed in.
    #[arg(long)]
    pub outlier_rows: Option<String>,

    /// Number of median-of-means blocks.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub c3: Option<f64>,
    #[arg(long)]
    pub c4: Option<f64>,
    #[arg(long, value_enum)]
    pub mom_pilot: Option<MomPilotName>,

    /// Swept parameter: n, n2, a or s.
    #[arg(long)]
    pub axis: Option<SweepAxis>,
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,

    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub c0_bar: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// Absolute constant of the second lower bound.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub c_subgaussian: Option<f64>,
    #[arg(long)]
    pub s_prime: Option<f64>,
    #[arg(long)]
    pub b_star: Option<f64>,

    /// Ground-truth output file (generate).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads; falls back to SPARSE_RECOVER_THREADS, then all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fail with exit code 4 when the pilot does not converge.
    #[arg(long)]
    pub strict: bool,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    pub quiet: bool,
}

macro_rules! fill_from {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.take(); } )*
    };
}

impl Opts {
    /// Fills unset options from `file`.
    pub fn merge(mut self, mut file: Opts) -> Opts {
        fill_from!(self, file;
            data, n, p, s, a, sigma, n1, regime, delta, method, preset, lambda_a, trials, seed,
            design, noise, df, signal, max_ratio, outliers, outlier_kind, magnitude, outlier_rows,
            k, c3, c4, mom_pilot, axis, start, stop, count, scale,
            c0, c0_bar, c1, c2, c, epsilon, c_subgaussian, s_prime, b_star,
            truth, out, format, threads,
        );
        self.strict |= file.strict;
        self.quiet |= file.quiet;
        self
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Runtime(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("pilot did not converge: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::RegimeViolation(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require<T: Copy>(value: Option<T>, flag: &str, command: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(format!("{command} requires --{flag}")))
}

/// Header line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub p: usize,
    pub dtype: String,
    pub layout: String,
    /// Generator seed, when the data are synthetic.
    pub seed: Option<u64>,
}

fn encode_f64s<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64s(line: &str, expected: usize, what: &str) -> Result<Vec<f64>, String> {
    let bytes = B64
        .decode(line.trim())
        .map_err(|e| format!("{what} block is not valid base64: {e}"))?;
    if bytes.len() != expected * 8 {
        return Err(format!(
            "{what} block holds {} bytes, expected {}",
            bytes.len(),
            expected * 8
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes a JSON header line, then `X` (row-major) and `Y` as base64 of
/// little-endian `f64`, one block per line.
pub fn write_dataset<W: Write>(mut w: W, data: &Dataset, seed: Option<u64>) -> io::Result<()> {
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: 1,
        n: data.n(),
        p: data.p(),
        dtype: "f64-le".into(),
        layout: "row-major".into(),
        seed,
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    writeln!(w, "{}", encode_f64s(data.x.iter()))?;
    writeln!(w, "{}", encode_f64s(data.y.iter()))?;
    w.flush()
}

/// Parses a file written by [`write_dataset`].
pub fn read_dataset<R: BufRead>(r: R) -> Result<(Dataset, DatasetHeader), String> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String, String> {
        lines
            .next()
            .ok_or_else(|| format!("missing {what} line"))?
            .map_err(|e| e.to_string())
    };
    let header: DatasetHeader =
        serde_json::from_str(&next("header")?).map_err(|e| format!("bad header: {e}"))?;
    if header.format != DATASET_FORMAT || header.dtype != "f64-le" || header.layout != "row-major" {
        return Err(format!(
            "unsupported dataset kind {}/{}/{}",
            header.format, header.dtype, header.layout
        ));
    }
    let x = decode_f64s(&next("design")?, header.n * header.p, "design")?;
    let y = decode_f64s(&next("response")?, header.n, "response")?;
    let x = Array2::from_shape_vec((header.n, header.p), x).map_err(|e| e.to_string())?;
    let data = Dataset::new(x, Array1::from(y)).map_err(|e| e.to_string())?;
    Ok((data, header))
}

pub fn read_dataset_file(path: &Path) -> CliResult<(Dataset, DatasetHeader)> {
    let file = File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    read_dataset(BufReader::new(file))
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
}

/// Ground truth written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub support: Vec<u8>,
    pub beta: Vec<f64>,
}

fn open_output(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::Input(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("write failed: {e}"))
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> CliResult<()> {
    let mut w = open_output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io_err)?;
    writeln!(w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn problem_from(o: &Opts, command: &str) -> CliResult<ProblemInstance> {
    let n = require(o.n, "n", command)?;
    let p = require(o.p, "p", command)?;
    let s = require(o.s, "s", command)?;
    let a = require(o.a, "a", command)?;
    let sigma = require(o.sigma, "sigma", command)?;
    let n1 = o.n1.unwrap_or(n / 2);
    Ok(if sigma == 0.0 {
        ProblemInstance::noiseless(n, p, s, a, n1)?
    } else {
        ProblemInstance::new(n, p, s, a, sigma, n1)?
    })
}

fn pilot_from(o: &Opts) -> CliResult<PilotConfig> {
    let mut pilot = match o.preset.unwrap_or(Preset::Practical) {
        Preset::Theory => PilotConfig::theory(),
        Preset::Practical => PilotConfig::practical(),
    };
    if let Some(a) = o.lambda_a {
        if !(a.is_finite() && a > 0.0) {
            return Err(config_err(format!("--lambda-a must be positive, got {a}")));
        }
        pilot.lambda_a = a;
    }
    Ok(pilot)
}

fn parse_rows(spec: &str) -> CliResult<(usize, usize)> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| config_err(format!("--outlier-rows expects lo:hi, got {spec}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| config_err(format!("bad row bound '{v}' in --outlier-rows")))
    };
    Ok((parse(lo)?, parse(hi)?))
}

fn generator_from(o: &Opts, seed: u64) -> CliResult<GeneratorSpec> {
    let design = match o.design.unwrap_or(Design::Gaussian) {
        Design::Gaussian => DesignKind::GaussianIid,
        Design::Rademacher => DesignKind::RademacherIid,
        Design::Uniform => DesignKind::UniformScaledIid,
    };
    let noise = match o.noise.unwrap_or(Noise::Gaussian) {
        Noise::Gaussian => NoiseKind::Gaussian,
        Noise::StudentT => NoiseKind::StudentT {
            df: o.df.unwrap_or(3.0),
        },
        Noise::Laplace => NoiseKind::Laplace,
    };
    let signal = match o.signal.unwrap_or(Signal::Equal) {
        Signal::Equal => SignalKind::AllEqualA,
        Signal::RandomSigns => SignalKind::RandomSignsA,
        Signal::AtLeast => SignalKind::MagnitudesAtLeastA {
            max_ratio: o.max_ratio.unwrap_or(2.0),
        },
    };
    let contamination = match o.outliers {
        None | Some(0) => None,
        Some(count) => Some(ContaminationSpec {
            outlier_count: count,
            outlier_kind: match o.outlier_kind.unwrap_or(Outliers::Adversarial) {
                Outliers::Adversarial => OutlierKind::AdversarialLargeY,
                Outliers::Random => OutlierKind::RandomCorruptRow,
            },
            magnitude: o.magnitude.unwrap_or(1e3),
            rows: o.outlier_rows.as_deref().map(parse_rows).transpose()?,
        }),
    };
    Ok(GeneratorSpec {
        design,
        noise,
        signal,
        contamination,
        seed,
    })
}

fn mom_from(o: &Opts, sigma: f64) -> MomConfig {
    let mut cfg = MomConfig::new(sigma);
    cfg.k = o.k;
    cfg.c3 = o.c3;
    if let Some(c4) = o.c4 {
        cfg.c4 = c4;
    }
    cfg.pilot = match o.mom_pilot.unwrap_or(MomPilotName::SqrtSlope) {
        MomPilotName::SqrtSlope => PilotKind::SqrtSlope,
        MomPilotName::MomPilot => PilotKind::MomPilot,
    };
    cfg
}

fn methods_from(o: &Opts, sigma: f64) -> Vec<Method> {
    let names = o
        .method
        .clone()
        .unwrap_or_else(|| vec![MethodName::TwoStep]);
    names
        .into_iter()
        .map(|m| match m {
            MethodName::TwoStep => Method::TwoStep {
                regime: o.regime.unwrap_or(Regime::KnownAll),
                delta: o.delta.unwrap_or(DEFAULT_DELTA),
            },
            MethodName::Mom => Method::Mom(mom_from(o, sigma)),
        })
        .collect()
}

fn thread_count(o: &Opts) -> CliResult<Option<usize>> {
    if let Some(t) = o.threads {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| config_err(format!("{THREADS_ENV} must be a count, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn note(o: &Opts, msg: &str) {
    if !o.quiet {
        eprintln!("{msg}");
    }
}

/// Resolves the config file, sets up the worker pool and runs the command.
pub fn run(cli: Cli) -> CliResult<()> {
    let (name, opts) = match &cli.command {
        Command::Select(o) => ("select", o),
        Command::Risk(o) => ("risk", o),
        Command::Sweep(o) => ("sweep", o),
        Command::Bounds(o) => ("bounds", o),
        Command::Generate(o) => ("generate", o),
    };
    let mut opts = opts.clone();
    if let Some(path) = opts.config.clone() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let file: Opts = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("cannot parse config {}: {e}", path.display())))?;
        opts = opts.merge(file);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    match thread_count(&opts)? {
        Some(0) => return Err(config_err("--threads must be at least 1")),
        Some(t) => pool = pool.num_threads(t),
        None => {}
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match name {
        "select" => cmd_select(&opts),
        "risk" => cmd_risk(&opts),
        "sweep" => cmd_sweep(&opts),
        "bounds" => cmd_bounds(&opts),
        _ => cmd_generate(&opts),
    })
}

#[derive(Serialize)]
struct SelectMetadata {
    method: MethodName,
    regime: Option<Regime>,
    sigma_hat: Option<f64>,
    thresholds: Option<crate::selector::ThresholdSummary>,
    threshold: Option<f64>,
    blocks: Option<usize>,
    selected: usize,
    pilot_converged: bool,
    config: SelectConfig,
}

#[derive(Serialize)]
struct SelectConfig {
    data: PathBuf,
    n: usize,
    p: usize,
    n1: usize,
    threshold: Option<ThresholdSpec>,
    mom: Option<MomConfig>,
    pilot: PilotConfig,
}

#[derive(Serialize)]
struct SelectOutput {
    support: Vec<u8>,
    metadata: SelectMetadata,
}

fn threshold_spec_from(o: &Opts, p: usize, n2: usize) -> CliResult<ThresholdSpec> {
    let regime = o.regime.unwrap_or(Regime::FullyAdaptive);
    let need = |v: Option<f64>, flag: &str| require(v, flag, &format!("regime {regime}"));
    let spec = match regime {
        Regime::KnownAll => ThresholdSpec::known_all(
            need(o.a, "a")?,
            need(o.sigma, "sigma")?,
            require(o.s, "s", &format!("regime {regime}"))?,
            p,
            n2,
        )?,
        Regime::KnownA => ThresholdSpec::known_a(need(o.a, "a")?, p, n2)?,
        Regime::KnownSigma => ThresholdSpec::known_sigma(need(o.sigma, "sigma")?, p, n2)?,
        Regime::FullyAdaptive => ThresholdSpec::fully_adaptive(p, n2)?,
    };
    Ok(spec.with_delta(o.delta.unwrap_or(DEFAULT_DELTA))?)
}

fn cmd_select(o: &Opts) -> CliResult<()> {
    let path = o
        .data
        .clone()
        .ok_or_else(|| config_err("select requires --data"))?;
    let (data, _) = read_dataset_file(&path)?;
    let (n, p) = (data.n(), data.p());
    let n1 = o.n1.unwrap_or(n / 2);
    if n1 == 0 || n1 >= n {
        return Err(config_err(format!("--n1 must lie in 1..{n}, got {n1}")));
    }
    let scheme = SplitScheme::leading(n, n1);
    let pilot = pilot_from(o)?;
    let method = match o.method.as_deref() {
        None | Some([]) => MethodName::TwoStep,
        Some([m]) => *m,
        Some(_) => return Err(config_err("select runs a single --method")),
    };
    let output = match method {
        MethodName::TwoStep => {
            let spec = threshold_spec_from(o, p, n - n1)?;
            note(
                o,
                &format!(
                    "select: two-step, regime {}, n={n}, p={p}, n1={n1}",
                    spec.regime
                ),
            );
            let sel = TwoStepFit::fit(&data, &scheme, &pilot)?.select(&spec)?;
            SelectOutput {
                support: sel.support.to_bits(),
                metadata: SelectMetadata {
                    method,
                    regime: Some(sel.regime),
                    sigma_hat: sel.sigma_hat,
                    thresholds: Some(sel.thresholds),
                    threshold: None,
                    blocks: None,
                    selected: sel.support.count(),
                    pilot_converged: sel.pilot_converged,
                    config: SelectConfig {
                        data: path,
                        n,
                        p,
                        n1,
                        threshold: Some(spec),
                        mom: None,
                        pilot,
                    },
                },
            }
        }
        MethodName::Mom => {
            let sigma = require(o.sigma, "sigma", "the mom selector")?;
            let cfg = mom_from(o, sigma);
            cfg.validate()?;
            note(
                o,
                &format!("select: median-of-means, n={n}, p={p}, n1={n1}"),
            );
            let (first, second) = split_sample(&data, &scheme)?;
            cfg.resolve_k(p, second.n())?;
            let (beta_star, converged) = mom_pilot_estimate(first.x(), first.y(), &cfg, &pilot)?;
            let sel = mom_select_with_pilot(second.x(), second.y(), &beta_star, &cfg)?;
            SelectOutput {
                support: sel.support.to_bits(),
                metadata: SelectMetadata {
                    method,
                    regime: None,
                    sigma_hat: None,
                    thresholds: None,
                    threshold: Some(sel.threshold),
                    blocks: Some(sel.blocks),
                    selected: sel.support.count(),
                    pilot_converged: converged,
                    config: SelectConfig {
                        data: path,
                        n,
                        p,
                        n1,
                        threshold: None,
                        mom: Some(cfg),
                        pilot,
                    },
                },
            }
        }
    };
    if o.strict && !output.metadata.pilot_converged {
        return Err(CliError::NotConverged(
            "iteration limit reached; rerun without --strict to accept".into(),
        ));
    }
    write_json(&o.out, &output)
}

/// Everything that determines the numbers of a `risk` or `sweep` run.
#[derive(Debug, Clone, Serialize)]
pub struct RiskConfig {
    pub command: String,
    pub problem: ProblemInstance,
    pub generator: GeneratorSpec,
    pub methods: Vec<Method>,
    pub pilot: PilotConfig,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub scale: Scale,
    pub grid: Vec<f64>,
}

fn risk_config(o: &Opts, command: &str) -> CliResult<RiskConfig> {
    let problem = problem_from(o, command)?;
    let seed = o.seed.ok_or_else(|| {
        config_err(format!(
            "{command} requires --seed (no implicit randomness)"
        ))
    })?;
    let trials = o.trials.unwrap_or(100);
    if trials == 0 {
        return Err(config_err("--trials must be at least 1"));
    }
    Ok(RiskConfig {
        command: command.into(),
        problem,
        generator: generator_from(o, seed)?,
        methods: methods_from(o, problem.sigma),
        pilot: pilot_from(o)?,
        trials,
        seed,
        sweep: None,
    })
}

const RISK_COLUMNS: [&str; 16] = [
    "schema_version",
    "n",
    "p",
    "s",
    "a",
    "sigma",
    "method",
    "regime",
    "trials",
    "hamming_mean",
    "hamming_se",
    "recovery_rate",
    "seed",
    "failures",
    "nonconverged",
    "config_fingerprint",
];

fn opt_num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn risk_record(
    problem: &ProblemInstance,
    seed: u64,
    method: &Method,
    trials: usize,
    est: Option<&RiskEstimate>,
) -> Vec<String> {
    vec![
        CSV_SCHEMA_VERSION.to_string(),
        problem.n.to_string(),
        problem.p.to_string(),
        problem.s.to_string(),
        problem.a.to_string(),
        problem.sigma.to_string(),
        method.name().to_string(),
        method.regime_label().to_string(),
        trials.to_string(),
        opt_num(est.map(|e| e.hamming_mean)),
        opt_num(est.and_then(|e| e.hamming_se)),
        opt_num(est.map(|e| e.exact_recovery_rate)),
        seed.to_string(),
        est.map(|e| e.failures.to_string()).unwrap_or_default(),
        est.map(|e| e.nonconverged.to_string()).unwrap_or_default(),
        est.map(|e| e.config_fingerprint.clone())
            .unwrap_or_default(),
    ]
}

fn write_csv(
    out: &Option<PathBuf>,
    config: &RiskConfig,
    header: &[&str],
    rows: &[Vec<String>],
) -> CliResult<()> {
    let mut w = open_output(out)?;
    let json = serde_json::to_string(config).map_err(io_err)?;
    writeln!(w, "# config: {json}").map_err(io_err)?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(header).map_err(io_err)?;
        for row in rows {
            csv.write_record(row).map_err(io_err)?;
        }
        csv.flush().map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize)]
struct JsonTable<'a, T: Serialize> {
    config: &'a RiskConfig,
    rows: &'a [T],
}

fn cmd_risk(o: &Opts) -> CliResult<()> {
    let config = risk_config(o, "risk")?;
    note(
        o,
        &format!(
            "risk: {} trials of n={}, p={}, s={}",
            config.trials, config.problem.n, config.problem.p, config.problem.s
        ),
    );
    let estimates = mc_risk_batch(
        &config.problem,
        &config.generator,
        &config.methods,
        &config.pilot,
        config.trials,
        config.seed,
    )?;
    if o.strict && estimates.iter().any(|e| e.nonconverged > 0) {
        return Err(CliError::NotConverged(
            "some pilot fits hit the iteration limit".into(),
        ));
    }
    match o.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = config
                .methods
                .iter()
                .zip(&estimates)
                .map(|(m, e)| risk_record(&config.problem, config.seed, m, config.trials, Some(e)))
                .collect();
            write_csv(&o.out, &config, &RISK_COLUMNS, &rows)
        }
        OutputFormat::Json => write_json(
            &o.out,
            &JsonTable {
                config: &config,
                rows: &estimates,
            },
        ),
    }
}

fn cmd_sweep(o: &Opts) -> CliResult<()> {
    let mut config = risk_config(o, "sweep")?;
    let axis = o.axis.ok_or_else(|| config_err("sweep requires --axis"))?;
    let start = require(o.start, "start", "sweep")?;
    let stop = require(o.stop, "stop", "sweep")?;
    let count = require(o.count, "count", "sweep")?;
    let scale = o.scale.unwrap_or(Scale::Linear);
    let points = grid(start, stop, count, scale == Scale::Log)?;
    config.sweep = Some(SweepConfig {
        axis,
        start,
        stop,
        count,
        scale,
        grid: points.clone(),
    });
    note(
        o,
        &format!("sweep: {} points over {}", points.len(), axis.as_str()),
    );
    let rows = phase_sweep(
        &config.problem,
        axis,
        &points,
        &config.generator,
        &config.methods,
        &config.pilot,
        config.trials,
        config.seed,
    )?;
    let succeeded = rows.iter().any(|r| r.estimate.is_some());
    match o.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut header = vec!["schema_version", "grid_axis", "grid_value"];
            header.extend_from_slice(&RISK_COLUMNS[1..]);
            header.push("status");
            let records: Vec<Vec<String>> = rows
                .iter()
                .zip(config.methods.iter().cycle())
                .map(|(row, method)| sweep_record(row, method, &config))
                .collect();
            write_csv(&o.out, &config, &header, &records)?;
        }
        OutputFormat::Json => write_json(
            &o.out,
            &JsonTable {
                config: &config,
                rows: &rows,
            },
        )?,
    }
    if succeeded {
        Ok(())
    } else {
        Err(CliError::Runtime("every grid point failed".into()))
    }
}

fn sweep_record(row: &SweepRow, method: &Method, config: &RiskConfig) -> Vec<String> {
    let problem = row.problem.unwrap_or(config.problem);
    let mut rec = risk_record(
        &problem,
        config.seed,
        method,
        config.trials,
        row.estimate.as_ref(),
    );
    rec.splice(1..1, [row.axis.as_str().to_string(), row.value.to_string()]);
    rec.push(row.status.clone());
    rec
}

#[derive(Serialize)]
struct BoundsOutput {
    report: crate::bounds::BoundsReport,
}

fn cmd_bounds(o: &Opts) -> CliResult<()> {
    let problem = problem_from(o, "bounds")?;
    let defaults = BoundConstants::default();
    let consts = BoundConstants {
        c0: o.c0.unwrap_or(defaults.c0),
        c0_bar: o.c0_bar.unwrap_or(defaults.c0_bar),
        c1: o.c1.unwrap_or(defaults.c1),
        c2: o.c2.unwrap_or(defaults.c2),
        delta: o.delta.unwrap_or(defaults.delta),
        s_prime: o.s_prime,
        c: o.c.unwrap_or(defaults.c),
        epsilon: o.epsilon.unwrap_or(defaults.epsilon),
        c_subgaussian: o.c_subgaussian.unwrap_or(defaults.c_subgaussian),
        b_star: o.b_star,
    };
    let mc = MonteCarloConfig::new(
        o.trials.unwrap_or(MonteCarloConfig::default().trials),
        o.seed.unwrap_or(0),
    );
    note(
        o,
        &format!("bounds: n={}, p={}, s={}", problem.n, problem.p, problem.s),
    );
    let report = bounds_report(&problem, &consts, &mc)?;
    write_json(&o.out, &BoundsOutput { report })
}

fn cmd_generate(o: &Opts) -> CliResult<()> {
    let problem = problem_from(o, "generate")?;
    let seed = o
        .seed
        .ok_or_else(|| config_err("generate requires --seed"))?;
    let out = o
        .out
        .clone()
        .ok_or_else(|| config_err("generate requires --out"))?;
    let gen = generator_from(o, seed)?;
    let (data, beta) = gen_instance(&problem, &gen)?;
    write_dataset(open_output(&Some(out.clone()))?, &data, Some(seed)).map_err(io_err)?;
    if let Some(truth) = &o.truth {
        let file = TruthFile {
            support: beta.support().to_bits(),
            beta: beta.values.to_vec(),
        };
        write_json(&Some(truth.clone()), &file)?;
    }
    note(
        o,
        &format!(
            "generate: wrote {}x{} dataset to {}",
            data.n(),
            data.p(),
            out.display()
        ),
    );
    Ok(())
}
