//! Command-line front end.
//!
//! Every command resolves its parameters from built-in defaults, then an
//! optional JSON config file, then command-line flags, and echoes the
//! result to `<out-dir>/<name>.config.json`. Passing that echo back with
//! `--config` reproduces the run.

mod commands;
mod reproduce;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub use commands::{
    split_rows, EvaluateArgs, EvaluateParams, GenerateArgs, GenerateParams, PoincareArgs, PoincareParams,
    SaliTraceArgs, SaliTraceParams, ThresholdArgs, ThresholdColumn, ThresholdParams, TrainArgs, TrainParams,
};
pub use reproduce::{
    reproduce, AccuracyRow, ReproduceArgs, ReproduceParams, ReproduceReport, DESK_DOUBLE_PENDULUM_CASES,
    HENON_HEILES_ENERGIES, STANDARD_MAP_KS,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "chaos-ld", version, about = "Chaos detection with SALI, Lagrangian descriptors and a linear SVM")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CHAOS_LD_THREADS")]
    pub threads: Option<usize>,

    /// JSON file with command parameters; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample initial conditions and write a labelled indicator dataset.
    Generate(GenerateArgs),
    /// Locate the valley of a dataset column's histogram.
    Threshold(ThresholdArgs),
    /// Train a linear classifier on one or more datasets.
    Train(TrainArgs),
    /// Score a model against the SALI labels of datasets.
    Evaluate(EvaluateArgs),
    /// Write Poincaré section crossings (or map iterates) of sampled orbits.
    Poincare(PoincareArgs),
    /// Write the SALI time series of one orbit with its fitted asymptote.
    SaliTrace(SaliTraceArgs),
    /// Generate, train and evaluate the cross-system accuracy tables.
    Reproduce(ReproduceArgs),
}

/// Exit status for an error: 2 configuration or validation, 3 data, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        Error::Json(e) if e.is_io() => EXIT_IO,
        Error::NoThreshold
        | Error::Untrainable(_)
        | Error::InsufficientData(_)
        | Error::DegenerateEnergy { .. }
        | Error::DegenerateCenter
        | Error::Infeasible
        | Error::StencilInfeasible
        | Error::Integration { .. }
        | Error::Csv(_) => EXIT_DATA,
        Error::InvalidParameter(_)
        | Error::Unsupported { .. }
        | Error::DimensionMismatch { .. }
        | Error::MalformedModel(_)
        | Error::VersionMismatch { .. }
        | Error::RecipeMismatch { .. }
        | Error::Json(_) => EXIT_CONFIG,
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command inside a thread pool sized by `--threads`.
pub fn run(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut out = Outputs::new(&cli.out_dir)?;
    let config = cli.config.as_deref();
    let result = pool.install(|| match &cli.command {
        Command::Generate(a) => commands::generate(&resolve("generate", config, a)?, &mut out),
        Command::Threshold(a) => commands::threshold(&resolve("threshold", config, a)?, &mut out),
        Command::Train(a) => commands::train(&resolve("train", config, a)?, &mut out),
        Command::Evaluate(a) => commands::evaluate(&resolve("evaluate", config, a)?, &mut out),
        Command::Poincare(a) => commands::poincare(&resolve("poincare", config, a)?, &mut out),
        Command::SaliTrace(a) => commands::sali_trace(&resolve("sali-trace", config, a)?, &mut out),
        Command::Reproduce(a) => reproduce::run(&resolve("reproduce", config, a)?, &mut out),
    });
    if result.is_err() {
        out.discard();
    }
    result
}

/// Output files of one run; removed again if the run fails.
pub(crate) struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path of an output file, registered for clean-up on failure.
    pub(crate) fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub(crate) fn echo<P: Serialize>(&mut self, command: &str, name: &str, params: &P) -> Result<()> {
        let doc = serde_json::json!({ "command": command, "params": params });
        let path = self.file(&format!("{name}.config.json"));
        write_json(&path, &doc)
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Defaults, overlaid by the config file, overlaid by the flags that were
/// given. The config file holds either the parameter object itself or a
/// `{"command", "params"}` echo.
fn resolve<P, F>(command: &str, config: Option<&Path>, flags: &F) -> Result<P>
where
    P: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = serde_json::to_value(P::default())?;
    if let Some(path) = config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("config {}: {e}", path.display())))?;
        let params = match doc {
            Value::Object(mut m) if m.contains_key("command") => {
                let found = m.remove("command").unwrap_or(Value::Null);
                if found.as_str() != Some(command) {
                    return Err(Error::InvalidParameter(format!(
                        "config {} is for command {found}, not `{command}`",
                        path.display()
                    )));
                }
                m.remove("params").unwrap_or_else(|| Value::Object(Default::default()))
            }
            other => other,
        };
        overlay(&mut merged, params)?;
    }
    overlay(&mut merged, serde_json::to_value(flags)?)?;
    serde_json::from_value(merged).map_err(|e| Error::InvalidParameter(format!("{command} parameters: {e}")))
}

fn overlay(base: &mut Value, top: Value) -> Result<()> {
    let (Value::Object(base), Value::Object(top)) = (base, top) else {
        return Err(Error::InvalidParameter("configuration must be a JSON object".into()));
    };
    base.extend(top);
    Ok(())
}

#[cfg(test)]
mod tests;
