//! `imh`: train inductive manifold hash functions, encode data, search and
//! evaluate Hamming rankings, and run the benchmark suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

mod bench;
mod config;
mod encode;
mod eval;
mod manifest;
mod train;

/// Inductive manifold hashing.
#[derive(Debug, Parser)]
#[command(name = "imh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a hash function and save it with a run manifest.
    Train(train::TrainArgs),
    /// Hash a dataset with a trained model.
    Encode(encode::EncodeArgs),
    /// Rank or look up database codes for each query.
    Query(encode::QueryArgs),
    /// Score query codes against database codes.
    Eval(eval::EvalArgs),
    /// Run a benchmark suite (table1, sensitivity or bounds).
    Bench(bench::BenchArgs),
}

/// Parses a value through its serde name, e.g. `imh-le` or `kmeans`.
pub(crate) fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Loads the config recorded in a manifest, checking its hash and command.
pub(crate) fn config_from_manifest<T: serde::de::DeserializeOwned>(path: &Path, command: &str) -> anyhow::Result<T> {
    let m = manifest::Manifest::load_verified(path)?;
    if m.command != command {
        anyhow::bail!("{} records a `{}` run, not `{command}`", path.display(), m.command);
    }
    serde_json::from_value(m.config).with_context(|| format!("{}: config does not match this version", path.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `codes.bin` -> `codes.manifest.json`.
pub(crate) fn sidecar_manifest(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("IMH_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("IMH_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        anyhow::bail!("IMH_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => train::run(a),
        Command::Encode(a) => encode::run_encode(a),
        Command::Query(a) => encode::run_query(a),
        Command::Eval(a) => eval::run(a),
        Command::Bench(a) => bench::run(a),
    }
}

/// 1 for bad inputs, 2 for internal failures (numerical breakdown, panics).
fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .filter_map(|e| e.downcast_ref::<imh::Error>())
        .any(|e| !e.is_user_error());
    if internal {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(2),
    }
}
