//! The `flashdex` command-line tool.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

pub use args::Cli;
use args::{Command, IndexCommand};
use commands::Outcome;
use config::{resolve, Flags};
pub use error::{CliError, Result};
use manifest::Manifest;

/// Worker cap from `FLASHDEX_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("FLASHDEX_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!("FLASHDEX_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn init_threads() -> Result<()> {
    if let Some(n) = thread_cap()? {
        // Fails only if a pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs a handler on fully merged flags, then writes the manifest and any
/// stdout text.
pub(crate) fn execute<T: Flags>(name: &str, flags: T, handler: fn(T) -> Result<Outcome>) -> Result<()> {
    let params = serde_json::to_value(&flags).expect("flags serialize");
    let start = Instant::now();
    let outcome = handler(flags)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(primary) = outcome.outputs.first() {
        Manifest::new(name, params, &outcome.inputs, &outcome.outputs, wall_ms)?.write(primary)?;
    }
    if let Some(text) = outcome.stdout {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(())
}

fn with_config<T: Flags + Serialize>(name: &str, flags: T, handler: fn(T) -> Result<Outcome>) -> Result<()> {
    execute(name, resolve(flags, name)?, handler)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => with_config("ingest", a, commands::ingest),
        Command::Prune(a) => with_config("prune", a, commands::prune),
        Command::Embed(a) => with_config("embed", a, commands::embed),
        Command::Index(IndexCommand::Sparse(a)) => with_config("index.sparse", a, commands::index_sparse),
        Command::Index(IndexCommand::Dense(a)) => with_config("index.dense", a, commands::index_dense),
        Command::Compress(a) => with_config("compress", a, commands::compress),
        Command::Refine(a) => with_config("refine", a, commands::refine),
        Command::Search(a) => with_config("search", a, commands::search),
        Command::Eval(a) => with_config("eval", a, commands::eval),
        Command::Bench(a) => with_config("bench", a, commands::bench),
        Command::Stats(a) => with_config("stats", a, commands::stats),
        Command::Run(a) => pipeline::run_pipeline(&a.config),
    }
}
