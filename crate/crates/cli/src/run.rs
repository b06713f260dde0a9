use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::run_experiment;
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::plot::emit_plot_script;

pub const THREADS_ENV: &str = "AUTODROP_LAB_THREADS";
pub const CHECKPOINT_FILE: &str = "autodrop_state.toml";

/// Concurrency cap from `AUTODROP_LAB_THREADS`; unset means rayon's default.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
    pub files: Vec<String>,
}

/// Runs the experiment and writes its CSVs, checkpoint, manifest and plot
/// script into `cfg.out`. Non-finite values are reported after the files
/// are written so the partial output can be inspected.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> CliResult<RunSummary> {
    let pool = thread_pool(threads)?;
    let outputs = run_experiment(cfg, &pool)?;
    let dir = cfg.out.as_path();
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let mut files = Vec::with_capacity(outputs.tables.len());
    for table in &outputs.tables {
        table.write(dir)?;
        files.push(table.file_name());
    }
    let checkpoint = match &outputs.checkpoint {
        Some(snap) => {
            write_checkpoint(&dir.join(CHECKPOINT_FILE), snap)?;
            Some(CHECKPOINT_FILE.to_string())
        }
        None => None,
    };
    Manifest::new(cfg, files.clone(), checkpoint).write(dir)?;
    let manifest = dir.join(MANIFEST_FILE);
    emit_plot_script(&manifest)?;
    log::info!("{} wrote {} file(s) to {}", cfg.kind(), files.len(), dir.display());

    if let Some((table, (row, col))) = outputs
        .tables
        .iter()
        .find_map(|t| t.first_non_finite().map(|hit| (t, hit)))
    {
        return Err(CliError::Numeric(format!(
            "non-finite value in {} row {} column `{col}`",
            table.file_name(),
            row + 1
        )));
    }
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        manifest,
        files,
    })
}

pub fn write_checkpoint(path: &Path, snap: &autodrop_core::AutoDropSnapshot) -> CliResult<()> {
    let text = toml::to_string(snap).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> CliResult<autodrop_core::AutoDropSnapshot> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
