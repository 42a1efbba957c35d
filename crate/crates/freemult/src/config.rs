//! Run configuration: grid sizes, tolerances, output directory and thread
//! count. Loaded from an optional JSON file (path in `FREEMULT_CONFIG`) with
//! defaults matching the library constants.

use crate::error::{Error, Result};
use crate::experiments::ExperimentOptions;
use crate::recovery::RecoveryOptions;
use crate::subordination::FIXED_POINT_TOL;
use crate::transforms::NEWTON_TOL;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming a config JSON file.
pub const CONFIG_ENV: &str = "FREEMULT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Nodes of density and convolution output grids.
    pub grid: usize,
    /// Nodes used to discretize closed-form input laws.
    pub measure_nodes: usize,
    /// Largest accepted certification residual of a subordination solution.
    pub fixed_point_tol: f64,
    /// Largest accepted Newton residual.
    pub newton_tol: f64,
    pub recovery_j_min: i32,
    pub recovery_j_max: i32,
    pub output_dir: PathBuf,
    /// Worker threads; 0 leaves the choice to the thread pool.
    pub threads: usize,
}

impl Default for Config {
    fn default() -> Self {
        let r = RecoveryOptions::default();
        Config {
            grid: crate::convolution::DEFAULT_GRID,
            measure_nodes: 1024,
            fixed_point_tol: FIXED_POINT_TOL,
            newton_tol: NEWTON_TOL,
            recovery_j_min: r.j_min,
            recovery_j_max: r.j_max,
            output_dir: PathBuf::from("."),
            threads: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 64 || self.measure_nodes < 64 {
            return Err(Error::validation("config.grid", "grid sizes must be at least 64"));
        }
        if !(self.fixed_point_tol > 0.0 && self.newton_tol > 0.0) {
            return Err(Error::validation("config.tolerance", "tolerances must be positive"));
        }
        if self.fixed_point_tol < FIXED_POINT_TOL || self.newton_tol < NEWTON_TOL {
            return Err(Error::validation("config.tolerance", "tolerances cannot be tighter than the solver targets"));
        }
        self.recovery().map(|_| ())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The file named by `FREEMULT_CONFIG`, or defaults when it is unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn recovery(&self) -> Result<RecoveryOptions> {
        let r = RecoveryOptions {
            j_min: self.recovery_j_min,
            j_max: self.recovery_j_max,
            ..RecoveryOptions::default()
        };
        if r.j_min < 1 || r.j_max < r.j_min + 2 || r.j_max > 40 {
            return Err(Error::validation("config.recovery", "need 1 <= j_min and j_min + 2 <= j_max <= 40"));
        }
        Ok(r)
    }

    pub fn experiment_options(&self, threshold: Option<f64>) -> Result<ExperimentOptions> {
        Ok(ExperimentOptions {
            grid: self.grid,
            measure_nodes: self.measure_nodes,
            recovery: self.recovery()?,
            threshold,
        })
    }

    /// Size the global thread pool. Only the first call in a process takes effect.
    pub fn apply_threads(&self) {
        if self.threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(self.threads).build_global();
        }
    }

    /// Fail when a certified residual exceeds the configured tolerance.
    pub fn check_residual(&self, residual: f64) -> Result<()> {
        if residual > self.fixed_point_tol {
            return Err(Error::NonConvergence { iterations: 0, residual });
        }
        Ok(())
    }
}
