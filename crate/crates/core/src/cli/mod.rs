//! Command-line front end. Each subcommand resolves its arguments, runs the
//! library operation and writes a JSON report (or a CSV table).

mod battery;
mod commands;

use crate::error::{Error, Result};
use crate::families::GapSystem;
use crate::ifs_core::DSystem;
use crate::report::{to_json_string, Report};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use battery::{run_battery, BatteryOutcome, BatteryRow};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "IFSDIM_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_EXPECTATION_FAILED: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug, Clone)]
#[command(name = "ifsdim", version, about = "Dimension experiments for digit-restricted infinite IFS")]
pub struct Cli {
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record wall time in the report (makes reports non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Root of the truncated Bowen equation.
    Bowen(BowenArgs),
    /// Ladder sequence and its growth ratios.
    Ladder(LadderArgs),
    /// Count or list restricted words.
    Words(WordsArgs),
    /// Restricted cover sums for every depth up to --depth.
    Cover(CoverArgs),
    /// Box-counting dimension of a point set.
    Boxdim(BoxdimArgs),
    /// Closed-form Hausdorff and packing predictions.
    Predict(PredictArgs),
    /// Build the ladder measure and check its mass-length inequality.
    Frostman(FrostmanArgs),
    /// Monte Carlo local dimension of the power-law Markov measure.
    Localdim(LocaldimArgs),
    /// Build (or load) and validate a piecewise-linear gap system.
    Gapsys(GapsysArgs),
    /// Run a TOML battery of experiments against expectations.
    Battery(BatteryArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bowen(_) => "bowen",
            Command::Ladder(_) => "ladder",
            Command::Words(_) => "words",
            Command::Cover(_) => "cover",
            Command::Boxdim(_) => "boxdim",
            Command::Predict(_) => "predict",
            Command::Frostman(_) => "frostman",
            Command::Localdim(_) => "localdim",
            Command::Gapsys(_) => "gapsys",
            Command::Battery(_) => "battery",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BowenArgs {
    /// gauss | linpow:<d> | gapsys:<path>
    #[arg(long, default_value = "gauss")]
    pub system: String,
    /// xi | lambda | both
    #[arg(long, default_value = "xi")]
    pub bound: String,
    #[arg(long, default_value_t = 10)]
    pub k: u64,
    #[arg(long, default_value_t = 10_000)]
    pub m: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Solve the untruncated equation; --m is where the integral tail starts.
    #[arg(long)]
    pub infinite: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LadderArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value = "lin:1")]
    pub phi: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WordsArgs {
    #[arg(long, default_value = "lin:1")]
    pub phi: String,
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub cap: u64,
    /// a_{n+1} > Φ(a_n) (the default).
    #[arg(long, conflicts_with = "non_strict")]
    pub strict: bool,
    /// a_{n+1} ≥ Φ(a_n).
    #[arg(long)]
    pub non_strict: bool,
    /// List the words, not just count them.
    #[arg(long)]
    pub list: bool,
    #[arg(long, default_value_t = 100_000)]
    pub limit: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoverArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value = "lin:1")]
    pub phi: String,
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = crate::dimension::DEFAULT_COVER_CAP)]
    pub cap: u64,
    #[arg(long)]
    pub non_strict: bool,
    /// Enumerate words one by one up to this many.
    #[arg(long, default_value_t = 200_000)]
    pub exact_limit: u64,
    /// First depth used for the monotonicity verdict.
    #[arg(long, default_value_t = 1)]
    pub trend_from: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoxdimArgs {
    /// reciprocal:<n> | cantor:<depth> | first-level:<n> | file:<path>
    #[arg(long)]
    pub source: String,
    /// System for first-level sources.
    #[arg(long, default_value = "gauss")]
    pub system: String,
    /// Scales run over 2^-j for j in j-min..=j-max.
    #[arg(long, default_value_t = 2)]
    pub j_min: u32,
    #[arg(long, default_value_t = 20)]
    pub j_max: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub d: f64,
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub s0: f64,
    #[arg(long)]
    pub gauss_like: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FrostmanArgs {
    #[arg(long, default_value = "gauss")]
    pub system: String,
    #[arg(long, default_value = "lin:1")]
    pub phi: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// full | trim
    #[arg(long, default_value = "full")]
    pub policy: String,
    /// Seed for the sampled check beyond the exhaustive limit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LocaldimArgs {
    #[arg(long, default_value_t = 2.0)]
    pub d: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// First digit.
    #[arg(long, default_value_t = 2)]
    pub k: u64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to gauss when d = 2 and linpow:<d> otherwise.
    #[arg(long)]
    pub system: Option<String>,
    /// Include per-sample traces in the JSON report.
    #[arg(long)]
    pub traces: bool,
    /// Normalizers c_i are summarized over 1..=normalizer-range.
    #[arg(long, default_value_t = 10_000)]
    pub normalizer_range: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GapsysArgs {
    #[arg(long, default_value = "pow:2")]
    pub phi: String,
    #[arg(long, default_value_t = 2.0)]
    pub d: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_max: u64,
    #[arg(long, default_value_t = 10_000)]
    pub table_len: u64,
    /// Load a saved system instead of building one.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Save the system document here.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BatteryArgs {
    /// TOML file with one section per experiment.
    pub config: PathBuf,
    /// Directory for summary.csv and per-experiment reports.
    #[arg(long, default_value = "battery-out")]
    pub out_dir: PathBuf,
}

/// Result of one subcommand: the report plus an optional CSV rendering.
pub struct Outcome {
    pub report: Report,
    pub csv: Option<Vec<u8>>,
}

/// Parses a system spec: `gauss`, `linpow:<d>` or `gapsys:<path>`.
pub fn parse_system(spec: &str) -> Result<DSystem> {
    match spec.split_once(':') {
        None if spec == "gauss" => Ok(crate::families::make_gauss()),
        Some(("linpow", d)) => {
            let d: f64 = d.parse().map_err(|_| Error::Parse(format!("bad exponent in system spec {spec:?}")))?;
            crate::families::make_linear_power(d)
        }
        Some(("gapsys", path)) => Ok(load_gap_system(Path::new(path))?.into()),
        _ => Err(Error::Parse(format!("unknown system spec {spec:?}; expected gauss, linpow:<d> or gapsys:<path>"))),
    }
}

pub fn load_gap_system(path: &Path) -> Result<GapSystem> {
    let text = std::fs::read_to_string(path)?;
    let doc = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    GapSystem::from_document(&doc)
}

/// Runs one non-battery subcommand and returns its report.
pub fn execute(command: &Command, format: Format, timing: bool) -> Result<Outcome> {
    let start = Instant::now();
    let mut outcome = commands::dispatch(command, format)?;
    if let Some(obj) = outcome.report.config.as_object_mut() {
        obj.insert("format".into(), serde_json::to_value(format).expect("enum serializes"));
    }
    if timing {
        outcome.report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(outcome)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(bytes)?;
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only when a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_precondition() {
        EXIT_PRECONDITION
    } else {
        EXIT_NUMERIC
    }
}

/// Entry point: parses `argv` (including the program name), runs the
/// command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PRECONDITION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_workers();
    match run_parsed(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_parsed(cli: &Cli) -> Result<i32> {
    if let Command::Battery(args) = &cli.command {
        let outcome = run_battery(&args.config, &args.out_dir)?;
        let summary = to_json_string(&outcome)?;
        write_output(cli.out.as_deref(), summary.as_bytes())?;
        return Ok(if outcome.all_pass { EXIT_OK } else { EXIT_EXPECTATION_FAILED });
    }
    let outcome = execute(&cli.command, cli.format, cli.timing)?;
    let bytes = match cli.format {
        Format::Json => to_json_string(&outcome.report)?.into_bytes(),
        Format::Csv => outcome
            .csv
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no CSV layout", cli.command.name())))?,
    };
    write_output(cli.out.as_deref(), &bytes)?;
    Ok(EXIT_OK)
}
