//! The `pancake` command line: argument parsing, TOML config merging, worker
//! pool setup and dispatch. Every command echoes its resolved configuration
//! into its outputs, and depends only on (flags, seed), never on thread count.

mod commands;
pub mod output;

use crate::error::{Error, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::ffi::OsString;
use std::path::PathBuf;

pub use commands::*;

#[derive(Debug, Parser)]
#[command(name = "pancake", version, about = "Gaussian pancakes: sampling, diffusion, testing and estimation")]
pub struct Cli {
    /// TOML file with one table per command; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw pancake samples and a density profile along the hidden direction.
    Sample(SampleArgs),
    /// Tabulate the likelihood ratio, its score and the density on a grid.
    Score(ScoreArgs),
    /// Run the reverse diffusion sampler with a chosen score oracle.
    Diffuse(DiffuseArgs),
    /// Run the score-based Gaussianity test on both hypotheses.
    Distinguish(DistinguishArgs),
    /// Recover the hidden direction by brute-force search over a net.
    Estimate(EstimateArgs),
    /// Emit the Hermite spectrum of the discrete Gaussian.
    Hermite(HermiteArgs),
    /// Evaluate the analytic bounds at one parameter point.
    VerifyBounds(VerifyBoundsArgs),
    /// Run the built-in invariant suite.
    Selftest(SelftestArgs),
}

/// Overlays the non-null flag values on the command's table from the config
/// file and deserializes the result.
pub(crate) fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&toml::Table>, section: &str) -> Result<T> {
    let to_json = |e: serde_json::Error| Error::config(format!("[{section}]: {e}"));
    let mut base = match file.and_then(|t| t.get(section)) {
        Some(toml::Value::Table(t)) => serde_json::to_value(t).map_err(to_json)?,
        Some(_) => return Err(Error::config(format!("config entry `{section}` must be a table"))),
        None => serde_json::Value::Object(Default::default()),
    };
    let over = serde_json::to_value(flags).map_err(to_json)?;
    if let (Some(b), serde_json::Value::Object(o)) = (base.as_object_mut(), over) {
        for (k, v) in o {
            if !v.is_null() {
                b.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(to_json)
}

fn read_config(path: Option<&PathBuf>) -> Result<Option<toml::Table>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path)?;
    text.parse::<toml::Table>()
        .map(Some)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// Sizes the global worker pool from PANCAKE_THREADS, if set.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("PANCAKE_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(format!("PANCAKE_THREADS must be a positive integer, got {v:?}")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    init_threads()?;
    let file = read_config(cli.config.as_ref())?;
    let file = file.as_ref();
    match cli.command {
        Command::Sample(a) => commands::sample(merge(&a, file, "sample")?),
        Command::Score(a) => commands::score(merge(&a, file, "score")?),
        Command::Diffuse(a) => commands::diffuse(merge(&a, file, "diffuse")?),
        Command::Distinguish(a) => commands::distinguish(merge(&a, file, "distinguish")?),
        Command::Estimate(a) => commands::estimate(merge(&a, file, "estimate")?),
        Command::Hermite(a) => commands::hermite(merge(&a, file, "hermite")?),
        Command::VerifyBounds(a) => commands::verify_bounds(merge(&a, file, "verify-bounds")?),
        Command::Selftest(a) => commands::selftest(merge(&a, file, "selftest")?),
    }
}

/// Parses `args` and runs; returns the process exit code (0 ok, 1 usage or
/// configuration error, 2 numeric failure).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pancake: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
