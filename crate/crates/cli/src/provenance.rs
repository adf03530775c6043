//! `run.json` provenance records.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, Serialize)]
pub struct Provenance<C: Serialize> {
    pub command: String,
    pub args: Vec<String>,
    pub version: &'static str,
    pub config: C,
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub status: String,
}

impl<C: Serialize> Provenance<C> {
    pub fn start(command: &str, config: C, seed: Option<u64>) -> Self {
        Provenance {
            command: command.to_string(),
            args: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            config,
            seed,
            threads: rayon::current_num_threads(),
            started_unix: unix_seconds(),
            finished_unix: None,
            status: "running".into(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("run.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(&mut self, dir: &Path, status: &str) -> Result<()> {
        self.finished_unix = Some(unix_seconds());
        self.status = status.to_string();
        self.write(dir)
    }
}
