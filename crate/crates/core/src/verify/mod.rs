//! Measured constants for the estimate-type statements: molecule conditions,
//! almost orthogonality, smoothness and cancellation of `T_sigma` applied to
//! needlets, synthesis and boundedness ratios, plus smaller suites for the
//! kernels, tiles and norms.
//!
//! "Bounded by a uniform constant" is made operational as: the measured sup
//! is finite, moves by less than [`STABILITY_TOLERANCE`] when the grid is
//! refined, and moves by less than the same amount when the level range is
//! extended by one.

mod ao;
mod molecule;
mod operators;
mod suites;
mod synthesis;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::TensorGrid;
use crate::tiles::TileSet;

pub use ao::{verify_almost_orthogonality, AoOptions, MoleculeFamily, SLOPE_SLACK};
pub use operators::{
    needlet_route_cross_check, verify_boundedness, verify_tcanc, verify_tsmooth, BoundednessOptions, GrowthCandidate,
    TcancOptions, TsmoothOptions,
};
pub use suites::{
    example_symbols, run_suite, verify_embeddings, verify_hoppe, verify_kernel, verify_linearization, verify_maximal,
    verify_qq, verify_tiles, SuiteConfig, SuiteOutcome, SUITES,
};
pub use synthesis::{synthesis_conditions, verify_synthesis, SynthesisOptions};
pub use molecule::{
    check_molecule, fat_tail_bump, molecule_clauses, verify_needlet_molecules, Molecule, SampledMolecule,
};

/// Largest relative change of a constant that still counts as stable.
pub const STABILITY_TOLERANCE: f64 = 0.1;

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if a == b {
        0.0
    } else if !scale.is_finite() {
        f64::INFINITY
    } else {
        (a - b).abs() / scale
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Uniform sampling grid `[-X, X]^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub half_width: f64,
    pub points: usize,
}

impl ScanGrid {
    /// 801 points on `[-14, 14]` for `n = 1`; 121 per axis on `[-10, 10]` above.
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            ScanGrid {
                half_width: 14.0,
                points: 801,
            }
        } else {
            ScanGrid {
                half_width: 10.0,
                points: 121,
            }
        }
    }

    /// Halves the spacing.
    pub fn refined(&self) -> Self {
        ScanGrid {
            half_width: self.half_width,
            points: 2 * self.points - 1,
        }
    }

    /// Widens the window by `factor` at the same spacing.
    pub fn enlarged(&self, factor: f64) -> Self {
        let cells = ((self.points - 1) as f64 * factor).round() as usize;
        ScanGrid {
            half_width: self.half_width * factor,
            points: cells + 1,
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn tensor(&self, dim: usize) -> Result<TensorGrid> {
        TensorGrid::uniform(dim, self.half_width, self.points)
    }
}

/// `count` tiles spread evenly (in index order) over the tiles whose node
/// lies in `[-reach, reach]^n`.
pub fn sample_tiles(set: &TileSet, count: usize, reach: f64) -> Vec<Vec<usize>> {
    let candidates: Vec<usize> = (0..set.len())
        .filter(|&flat| {
            let idx = set.unflatten(flat);
            set.node(&idx).iter().all(|t| t.abs() <= reach)
        })
        .collect();
    if candidates.len() <= count {
        return candidates.into_iter().map(|f| set.unflatten(f)).collect();
    }
    if count == 1 {
        return vec![set.unflatten(candidates[candidates.len() / 2])];
    }
    (0..count)
        .map(|i| {
            let pos = (i * (candidates.len() - 1) + (count - 1) / 2) / (count - 1);
            set.unflatten(candidates[pos])
        })
        .collect()
}

/// Molecule parameters `(M, theta, N, delta, mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    #[serde(rename = "M")]
    pub big_m: i32,
    pub theta: f64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub delta: f64,
    pub mu: f64,
}

impl MoleculeParams {
    pub fn new(big_m: i32, theta: f64, big_n: usize, delta: f64, mu: f64) -> Result<Self> {
        let cancellation_ok = (big_m >= 0 && theta > 0.0 && theta < 1.0) || (big_m == -1 && theta == 1.0);
        if !cancellation_ok {
            return Err(Error::invalid("(M, theta)", "need M >= 0 with 0 < theta < 1, or (M, theta) = (-1, 1)"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid("delta", "must lie in [0, 1]"));
        }
        if !(mu >= 1.0) {
            return Err(Error::invalid("mu", "must be at least 1"));
        }
        Ok(MoleculeParams {
            big_m,
            theta,
            big_n,
            delta,
            mu,
        })
    }

    /// `(1, 1/2, 2, 1/2, n + 2)`.
    pub fn needlet_default(dim: usize) -> Self {
        MoleculeParams {
            big_m: 1,
            theta: 0.5,
            big_n: 2,
            delta: 0.5,
            mu: dim as f64 + 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    pub level: usize,
    pub value: f64,
}

/// A named sub-constant (a clause, an order, a space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub value: f64,
}

/// A decay table: `(x, y)` pairs for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }
}

/// What was scanned.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scan {
    pub dim: usize,
    pub levels: Vec<usize>,
    pub tiles_per_level: usize,
    pub grid: Option<ScanGrid>,
    pub notes: Vec<String>,
}

/// Result of one estimate scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub scan: Scan,
    /// Sup of left side over right side.
    pub constant: f64,
    pub per_level: Vec<LevelValue>,
    pub components: Vec<Component>,
    /// The constant on the refined grid.
    pub refined_constant: Option<f64>,
    /// The constant with one more level (or a larger family) included.
    pub extended_constant: Option<f64>,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl EstimateReport {
    pub fn new(id: &str, scan: Scan) -> Self {
        EstimateReport {
            id: id.to_string(),
            scan,
            constant: 0.0,
            per_level: Vec::new(),
            components: Vec::new(),
            refined_constant: None,
            extended_constant: None,
            series: Vec::new(),
            checks: Vec::new(),
            passed: false,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn push_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn push_component(&mut self, name: impl Into<String>, value: f64) {
        self.components.push(Component {
            name: name.into(),
            value,
        });
    }

    /// Sets `per_level` to `values` (level `j` at index `j`), `constant` to
    /// the max over the first `scanned` levels and `extended_constant` to the
    /// max over all of them when there are more.
    pub fn set_levels(&mut self, values: &[f64], scanned: usize) {
        self.per_level = values
            .iter()
            .enumerate()
            .map(|(level, &value)| LevelValue { level, value })
            .collect();
        let scanned = scanned.min(values.len());
        self.constant = max_of(&values[..scanned]);
        if values.len() > scanned {
            self.extended_constant = Some(max_of(values));
        }
    }

    /// Adds the finiteness and stability checks and sets `passed`.
    pub fn finish(mut self) -> Self {
        let c = self.constant;
        self.push_check("finite", c.is_finite(), format!("constant {c:.6e}"));
        if let Some(r) = self.refined_constant {
            let change = relative_change(c, r);
            self.push_check(
                "refinement",
                change < STABILITY_TOLERANCE,
                format!("{c:.6e} -> {r:.6e} on the refined grid, change {change:.3}"),
            );
        }
        if let Some(e) = self.extended_constant {
            let change = relative_change(c, e);
            self.push_check(
                "extension",
                change < STABILITY_TOLERANCE,
                format!("{c:.6e} -> {e:.6e} when the range is extended, change {change:.3}"),
            );
        }
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    /// One line: id, verdict, constant and any failed checks.
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        format!(
            "{} {} C={:.4e}{}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.constant,
            if failed.is_empty() {
                String::new()
            } else {
                format!(" failed: {}", failed.join(", "))
            }
        )
    }
}

/// All multi-indices of dimension `dim` with total order `<= max`.
pub(crate) fn orders_up_to(dim: usize, max: usize) -> Vec<Vec<usize>> {
    crate::hermite::MultiIndex::up_to_degree(dim, max)
        .into_iter()
        .map(|m| m.0)
        .collect()
}

pub(crate) fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiles::{build_level, TileConfig};

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.5 * i as f64)).collect();
        assert!((fit_slope(&pts) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn stability_checks() {
        let mut r = EstimateReport::new("x", Scan::default());
        r.set_levels(&[1.0, 2.0, 2.05], 2);
        assert_eq!(r.constant, 2.0);
        r.refined_constant = Some(2.1);
        let r = r.finish();
        assert!(r.passed, "{:?}", r.checks);
        let mut r = EstimateReport::new("y", Scan::default());
        r.set_levels(&[1.0, 2.0, 3.0], 2);
        assert!(!r.finish().passed);
        let mut r = EstimateReport::new("z", Scan::default());
        r.set_levels(&[1.0, 2.0, 3.0], 3);
        assert_eq!(r.extended_constant, None);
        assert_eq!(relative_change(0.0, 0.0), 0.0);
    }

    #[test]
    fn tile_sampling_is_spread_and_in_range() {
        let cfg = TileConfig::new(1, 3).unwrap();
        let set = build_level(3, &cfg).unwrap();
        let tiles = sample_tiles(&set, 20, 12.0);
        assert_eq!(tiles.len(), 20);
        let xs: Vec<f64> = tiles.iter().map(|i| set.node(i)[0]).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(xs[0] < -11.0 && xs[19] > 11.0 && xs.iter().all(|x| x.abs() <= 12.0));
    }

    #[test]
    fn molecule_parameter_ranges() {
        assert!(MoleculeParams::new(-1, 1.0, 0, 0.0, 1.0).is_ok());
        assert!(MoleculeParams::new(-1, 0.5, 0, 0.0, 1.0).is_err());
        assert!(MoleculeParams::new(0, 1.0, 0, 0.0, 1.0).is_err());
        assert!(MoleculeParams::new(1, 0.5, 2, 1.5, 3.0).is_err());
        assert!(MoleculeParams::new(1, 0.5, 2, 0.5, 0.5).is_err());
    }
}
