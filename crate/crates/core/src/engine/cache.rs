use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::critical::{mc_critical_value, CriticalValueKey, CriticalValueTable};
use crate::error::Result;
use crate::grids::Grid;
use crate::ranks::ScoreKind;

/// Directory of cached critical-value tables, one JSON file per key.
#[derive(Debug, Clone)]
pub struct CriticalValueCache {
    dir: PathBuf,
}

impl CriticalValueCache {
    pub const ENV_VAR: &'static str = "OTRANK_CACHE";
    pub const DEFAULT_DIR: &'static str = ".otrank-cache";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CriticalValueCache { dir: dir.into() }
    }

    /// An explicit directory wins, then `OTRANK_CACHE`, then `./.otrank-cache`.
    pub fn resolve(explicit: Option<&Path>) -> Self {
        match explicit {
            Some(p) => Self::new(p),
            None => Self::new(std::env::var_os(Self::ENV_VAR).map_or_else(|| PathBuf::from(Self::DEFAULT_DIR), PathBuf::from)),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CriticalValueKey) -> Result<PathBuf> {
        let digest = Sha256::digest(serde_json::to_vec(key)?);
        Ok(self.dir.join(format!("{}.json", hex::encode(digest))))
    }

    pub fn load(&self, key: &CriticalValueKey) -> Result<Option<CriticalValueTable>> {
        let path = self.path_for(key)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let table: CriticalValueTable = serde_json::from_str(&text)?;
        Ok((table.key == *key && table.null_sample.is_some()).then_some(table))
    }

    /// Writes the table through a temporary file and a rename, so readers
    /// never see a partial entry.
    pub fn store(&self, table: &CriticalValueTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&table.key)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&serde_json::to_vec(table)?)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    /// Cached table for the key at level `alpha`, computing and storing it
    /// on a miss.
    pub fn get_or_compute(
        &self,
        grid: &Grid,
        score: ScoreKind,
        n1: usize,
        alpha: f64,
        reps: usize,
        seed: u64,
    ) -> Result<CriticalValueTable> {
        let key = CriticalValueKey {
            dim: grid.dim(),
            n: grid.len(),
            n1,
            reference: grid.kind(),
            score,
            reps,
            seed,
            grid_id: grid.id(),
        };
        if let Some(table) = self.load(&key)? {
            return table.with_alpha(alpha);
        }
        let table = mc_critical_value(grid, score, n1, alpha, reps, seed)?;
        self.store(&table)?;
        Ok(table)
    }
}
