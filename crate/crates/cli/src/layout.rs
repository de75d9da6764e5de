use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;

/// Directory layout of a run under `--out`.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    fn dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.root.join(name);
        std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    pub fn data(&self) -> Result<PathBuf> {
        self.dir("data")
    }

    pub fn params(&self) -> Result<PathBuf> {
        self.dir("params")
    }

    pub fn predictions(&self) -> Result<PathBuf> {
        self.dir("predictions")
    }

    pub fn verification(&self) -> Result<PathBuf> {
        self.dir("verification")
    }

    pub fn report(&self) -> Result<PathBuf> {
        self.dir("report")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn forecasts_csv(&self, cfg: &RunConfig) -> PathBuf {
        cfg.paths.forecasts.as_deref().map_or_else(|| self.root.join("data/forecasts.csv"), |p| self.resolve(p))
    }

    pub fn observations_csv(&self, cfg: &RunConfig) -> PathBuf {
        cfg.paths.observations.as_deref().map_or_else(|| self.root.join("data/observations.csv"), |p| self.resolve(p))
    }
}

impl Layout {
    pub fn root_file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}
