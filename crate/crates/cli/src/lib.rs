//! Experiment runner: every verification of the workbench as a reproducible subcommand.

// `!(a < b)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub mod commands;
pub mod spec;
pub mod summary;

pub use summary::{Check, Outcome, Summary};

use commands::*;

/// Invalid configuration or arguments; exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser, Debug)]
#[command(name = "weyllab", version, about = "Spectral geometry of singular Riemannian models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory for CSV files and summary.json.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with option values; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "WEYLLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Free-form label copied into the summary.
    #[arg(long, global = true)]
    pub tag: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature report of a frame model, checked against closed forms.
    Curvature(CurvatureArgs),
    /// Curvature, convexity and injectivity bounds of a model near its singularity.
    Model(ModelArgs),
    /// Counting function and Weyl ratio.
    Weyl(WeylArgs),
    /// Dirichlet-Neumann bracketing sandwich.
    Bracketing(BracketingArgs),
    /// Hardy constants and Neumann strip gaps near the singularity.
    Hardy(HardyArgs),
    /// Heat trace and the exponent of its remainder.
    Heattrace(HeatTraceArgs),
    /// Freud remainders and the Karamata limit.
    Tauberian(TauberianArgs),
    /// Metric with a prescribed Weyl law.
    Prescribe(PrescribeArgs),
    /// Eigenfunction mass away from the singularity.
    Concentrate(ConcentrateArgs),
    /// Slowly varying functions: values, defects, de Haan ratios.
    Svf(SvfArgs),
}

/// Settings shared by all commands after merging flags and config.
#[derive(Clone, Debug)]
pub struct Context {
    pub seed: u64,
    pub tag: Option<String>,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(config_error(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(config_error(format!("{}: {e}", path.display()))),
    }
}

/// Overlays the non-null flag values on the config object.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Map<String, Value>) -> anyhow::Result<T> {
    let mut base = config;
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| config_error(format!("config: {e}")))
}

struct Globals {
    out: Option<PathBuf>,
    threads: Option<usize>,
    ctx: Context,
}

fn split_globals(cli: &Cli, config: &mut Map<String, Value>) -> anyhow::Result<Globals> {
    let name = command_name(&cli.command);
    if let Some(c) = config.remove("command") {
        if c.as_str() != Some(name) {
            return Err(config_error(format!("config is for command {c}, not {name}")));
        }
    }
    let take = |config: &mut Map<String, Value>, key: &str| config.remove(key);
    let out = match take(config, "out") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(v) => return Err(config_error(format!("config: out must be a string, got {v}"))),
        None => None,
    };
    let as_u64 = |v: Option<Value>, key: &str| -> anyhow::Result<Option<u64>> {
        match v {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| config_error(format!("config: {key} must be an integer"))),
        }
    };
    let seed = as_u64(take(config, "seed"), "seed")?;
    let threads = as_u64(take(config, "threads"), "threads")?.map(|t| t as usize);
    let tag = match take(config, "tag") {
        Some(Value::String(s)) => Some(s),
        Some(v) => return Err(config_error(format!("config: tag must be a string, got {v}"))),
        None => None,
    };
    Ok(Globals {
        out: cli.out.clone().or(out),
        threads: cli.threads.or(threads),
        ctx: Context { seed: cli.seed.or(seed).unwrap_or(1), tag: cli.tag.clone().or(tag) },
    })
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Curvature(_) => "curvature",
        Command::Model(_) => "model",
        Command::Weyl(_) => "weyl",
        Command::Bracketing(_) => "bracketing",
        Command::Hardy(_) => "hardy",
        Command::Heattrace(_) => "heattrace",
        Command::Tauberian(_) => "tauberian",
        Command::Prescribe(_) => "prescribe",
        Command::Concentrate(_) => "concentrate",
        Command::Svf(_) => "svf",
    }
}

fn dispatch(command: &Command, config: Map<String, Value>, ctx: &Context) -> anyhow::Result<Outcome> {
    match command {
        Command::Curvature(a) => curvature::run(&merge(a, config)?, ctx),
        Command::Model(a) => model::run(&merge(a, config)?, ctx),
        Command::Weyl(a) => weyl::run(&merge(a, config)?, ctx),
        Command::Bracketing(a) => bracketing::run(&merge(a, config)?, ctx),
        Command::Hardy(a) => hardy::run(&merge(a, config)?, ctx),
        Command::Heattrace(a) => heattrace::run(&merge(a, config)?, ctx),
        Command::Tauberian(a) => tauberian::run(&merge(a, config)?, ctx),
        Command::Prescribe(a) => prescribe::run(&merge(a, config)?, ctx),
        Command::Concentrate(a) => concentrate::run(&merge(a, config)?, ctx),
        Command::Svf(a) => svf::run(&merge(a, config)?, ctx),
    }
}

/// Runs a parsed command inside its own worker pool. Returns the outcome and the output directory.
pub fn run(cli: &Cli) -> anyhow::Result<(Outcome, Option<PathBuf>)> {
    let mut config = load_config(cli.config.as_deref())?;
    let g = split_globals(cli, &mut config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(config_error("threads must be positive"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().context("building worker pool")?;
    let outcome = pool.install(|| dispatch(&cli.command, config, &g.ctx))?;
    Ok((outcome, g.out))
}

/// Parses `args` (without the program name) and runs the command in-process without writing files.
pub fn execute<I, S>(args: I) -> anyhow::Result<Outcome>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("weyllab")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| config_error(e.to_string()))?;
    Ok(run(&cli)?.0)
}

pub fn write_outputs(outcome: &Outcome, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, content) in &outcome.files {
        std::fs::write(dir.join(name), content).with_context(|| format!("writing {name}"))?;
    }
    let mut s = serde_json::to_string_pretty(&outcome.summary)?;
    s.push('\n');
    std::fs::write(dir.join("summary.json"), s).context("writing summary.json")?;
    Ok(())
}

/// 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use weyllab_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Parse { .. } | E::Unsupported(_) | E::Domain(_) | E::Monotonicity(_) => 2,
                _ => 1,
            };
        }
    }
    1
}
