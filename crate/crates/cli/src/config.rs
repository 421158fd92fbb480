//! Run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use hermite_frames::lp::SystemDescriptor;
use hermite_frames::norms::QuadratureBox;
use hermite_frames::tiles::TileConfig;
use hermite_frames::verify::ScanGrid;
use hermite_frames::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable that may override the output directory.
pub const OUT_DIR_ENV: &str = "HERMITE_OUT_DIR";

/// Every field optional so that a file and flags can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dim: Option<usize>,
    pub max_level: Option<usize>,
    pub delta_star: Option<f64>,
    pub grid: Option<ScanGrid>,
    pub quadrature_box: Option<QuadratureBox>,
    pub output_dir: Option<PathBuf>,
    pub suites: Vec<String>,
    pub symbol: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tiles_per_level: Option<usize>,
    pub system: Option<SystemDescriptor>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    /// Fields set in `flags` win.
    pub fn overlay(self, flags: RunConfig) -> Self {
        RunConfig {
            dim: flags.dim.or(self.dim),
            max_level: flags.max_level.or(self.max_level),
            delta_star: flags.delta_star.or(self.delta_star),
            grid: flags.grid.or(self.grid),
            quadrature_box: flags.quadrature_box.or(self.quadrature_box),
            output_dir: flags.output_dir.or(self.output_dir),
            suites: if flags.suites.is_empty() { self.suites } else { flags.suites },
            symbol: flags.symbol.or(self.symbol),
            input: flags.input.or(self.input),
            seed: flags.seed.or(self.seed),
            tiles_per_level: flags.tiles_per_level.or(self.tiles_per_level),
            system: flags.system.or(self.system),
            threads: flags.threads.or(self.threads),
        }
    }

    /// Fills every default so that reports record exactly what ran.
    pub fn resolved(mut self) -> Result<Self> {
        let dim = self.dim();
        self.dim = Some(dim);
        self.seed = Some(self.seed());
        self.system = Some(self.system());
        self.output_dir = Some(self.output_dir());
        if self.delta_star.is_none() {
            self.delta_star = Some(TileConfig::new(dim, 0)?.delta_star);
        }
        self.threads = Some(self.threads.unwrap_or_else(rayon::current_num_threads));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(1)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }

    pub fn system(&self) -> SystemDescriptor {
        self.system.unwrap_or_default()
    }

    /// Flag, then file, then the environment, then `reports`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("reports"))
    }
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `half_width,points`.
pub fn parse_grid(text: &str) -> std::result::Result<ScanGrid, String> {
    let (a, b) = text.split_once(',').ok_or("expected HALF_WIDTH,POINTS")?;
    let half_width: f64 = a.trim().parse().map_err(|e| format!("half width: {e}"))?;
    let points: usize = b.trim().parse().map_err(|e| format!("points: {e}"))?;
    if !(half_width > 0.0) || points < 2 {
        return Err("need a positive half width and at least 2 points".into());
    }
    Ok(ScanGrid { half_width, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            dim: Some(2),
            seed: Some(3),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        let merged = file.overlay(flags);
        assert_eq!((merged.dim(), merged.seed()), (2, 9));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"dimm": 2}"#).is_err());
    }

    #[test]
    fn grid_spec() {
        assert_eq!(parse_grid("8,161").unwrap(), ScanGrid { half_width: 8.0, points: 161 });
        assert!(parse_grid("8").is_err());
        assert!(parse_grid("-1,5").is_err());
    }
}
