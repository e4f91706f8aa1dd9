// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use crate::detector::WatchConfig;
use crate::error::{Error, LoadError, Result};

const EPSILONS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
const OMEGAS: [usize; 3] = [5, 10, 20];
const KAPPA_BATCHES: [usize; 3] = [2, 4, 6];
const MU_BATCHES: [usize; 2] = [10, 20];

/// Built-in search grid for a series of length `n_obs`.
///
/// The default configuration comes first, followed by every valid
/// `(epsilon, omega, kappa, mu)` combination with `mu` also taking the value
/// `n_obs` (an effectively unbounded buffer).
pub fn default_grid(n_obs: usize) -> Vec<WatchConfig> {
    let default = WatchConfig::default();
    let mut grid = vec![default.clone()];
    for &epsilon in &EPSILONS {
        for &omega in &OMEGAS {
            for &kb in &KAPPA_BATCHES {
                let mus = MU_BATCHES.iter().map(|&m| m * omega).chain(std::iter::once(n_obs));
                for mu in mus {
                    let cfg = WatchConfig {
                        kappa: kb * omega,
                        mu,
                        epsilon,
                        omega,
                        ..WatchConfig::default()
                    };
                    if cfg.validate().is_ok() && cfg != default && !grid.contains(&cfg) {
                        grid.push(cfg);
                    }
                }
            }
        }
    }
    grid
}

/// Parses a grid file: a nonempty JSON list of valid configurations.
pub fn parse_grid(text: &str) -> Result<Vec<WatchConfig>> {
    let grid: Vec<WatchConfig> = serde_json::from_str(text).map_err(LoadError::from)?;
    if grid.is_empty() {
        return Err(Error::invalid_config("grid is empty"));
    }
    for (i, cfg) in grid.iter().enumerate() {
        cfg.validate()
            .map_err(|e| Error::invalid_config(format!("grid entry {i}: {e}")))?;
    }
    Ok(grid)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Vec<WatchConfig>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_grid(&text)
}
