//! Output plumbing: a run context carrying the command-line flags and an
//! output directory where every command echoes its configuration beside the
//! artifacts it writes, so each directory is self-describing.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;

use crate::{CResult, CliError};

pub struct RunContext {
    pub out: PathBuf,
    /// Master seed override from the command line.
    pub seed: Option<u64>,
    /// Worker threads for sample-parallel commands; `None` keeps the
    /// default pool.
    pub jobs: Option<usize>,
    pub check: bool,
    pub suite: Option<String>,
}

impl RunContext {
    pub fn effective_seed(&self, config_seed: u64) -> u64 {
        self.seed.unwrap_or(config_seed)
    }

    fn ensure_dir(&self) -> CResult<()> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> CResult<PathBuf> {
        self.ensure_dir()?;
        let path = self.out.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Buffered writer for streaming CSV output.
    pub fn create(&self, name: &str) -> CResult<(PathBuf, BufWriter<fs::File>)> {
        self.ensure_dir()?;
        let path = self.out.join(name);
        let file = fs::File::create(&path)?;
        Ok((path, BufWriter::new(file)))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CResult<PathBuf> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("serializing {name}: {e}")))?;
        self.write_text(name, &format!("{text}\n"))
    }

    /// `config.json`: the parsed configuration plus the seed that applied.
    /// The worker count is deliberately absent; it never changes bytes.
    pub fn echo_config<T: Serialize>(
        &self,
        command: &str,
        seed: Option<u64>,
        config: &T,
    ) -> CResult<()> {
        let mut echo = serde_json::json!({ "command": command, "config": config });
        if let Some(seed) = seed {
            echo["seed"] = seed.into();
        }
        self.write_json("config.json", &echo)?;
        Ok(())
    }
}

/// Flush helper that surfaces buffered write errors at the call site.
pub fn finish<W: Write>(mut w: W) -> CResult<()> {
    w.flush()?;
    Ok(())
}

/// Run `f` on a dedicated worker pool when `--jobs` is given. Sampling
/// results are aggregated by index, so the thread count never changes
/// output bytes.
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CResult<T> {
    match jobs {
        None => Ok(f()),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Config(format!("worker pool: {e}"))),
    }
}
