//! `run`: executes the `stages` of a config file in order.
//!
//! A stage name is a section path. Its first component picks the
//! subcommand (`index` takes a second, `sparse` or `dense`); anything after
//! that is a free label, so `search.dense` is a second search stage.

use std::path::Path;

use crate::args::*;
use crate::commands;
use crate::config::ConfigFile;
use crate::error::{CliError, Result};
use crate::execute;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Ingest,
    Prune,
    Embed,
    IndexSparse,
    IndexDense,
    Compress,
    Refine,
    Search,
    Eval,
    Bench,
    Stats,
}

impl StageKind {
    pub fn of(stage: &str) -> Option<Self> {
        let mut parts = stage.split('.');
        Some(match parts.next()? {
            "ingest" => Self::Ingest,
            "prune" => Self::Prune,
            "embed" => Self::Embed,
            "index" => match parts.next()? {
                "sparse" => Self::IndexSparse,
                "dense" => Self::IndexDense,
                _ => return None,
            },
            "compress" => Self::Compress,
            "refine" => Self::Refine,
            "search" => Self::Search,
            "eval" => Self::Eval,
            "bench" => Self::Bench,
            "stats" => Self::Stats,
            _ => return None,
        })
    }
}

fn run_stage(file: &ConfigFile, stage: &str, kind: StageKind) -> Result<()> {
    match kind {
        StageKind::Ingest => execute(stage, file.section::<IngestArgs>(stage)?, commands::ingest),
        StageKind::Prune => execute(stage, file.section::<PruneArgs>(stage)?, commands::prune),
        StageKind::Embed => execute(stage, file.section::<EmbedArgs>(stage)?, commands::embed),
        StageKind::IndexSparse => execute(stage, file.section::<SparseIndexArgs>(stage)?, commands::index_sparse),
        StageKind::IndexDense => execute(stage, file.section::<DenseIndexArgs>(stage)?, commands::index_dense),
        StageKind::Compress => execute(stage, file.section::<CompressArgs>(stage)?, commands::compress),
        StageKind::Refine => execute(stage, file.section::<RefineArgs>(stage)?, commands::refine),
        StageKind::Search => execute(stage, file.section::<SearchArgs>(stage)?, commands::search),
        StageKind::Eval => execute(stage, file.section::<EvalArgs>(stage)?, commands::eval),
        StageKind::Bench => execute(stage, file.section::<BenchArgs>(stage)?, commands::bench),
        StageKind::Stats => execute(stage, file.section::<StatsArgs>(stage)?, commands::stats),
    }
}

pub fn run_pipeline(path: &Path) -> Result<()> {
    let file = ConfigFile::load(path)?;
    let stages = file.stages();
    if stages.is_empty() {
        return Err(CliError::Config { path: path.to_path_buf(), message: "no stages listed".into() });
    }
    let mut plan = Vec::with_capacity(stages.len());
    for stage in &stages {
        let kind = StageKind::of(stage).ok_or_else(|| CliError::Config {
            path: path.to_path_buf(),
            message: format!("unknown stage {stage:?}"),
        })?;
        plan.push((stage.as_str(), kind));
    }
    for (stage, kind) in plan {
        run_stage(&file, stage, kind).map_err(|e| CliError::Stage { stage: stage.to_string(), source: Box::new(e) })?;
        eprintln!("stage {stage} done");
    }
    Ok(())
}
