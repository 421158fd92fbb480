//! Multiscale node sets built from zeros of `H_{2N_j}`, their tiles and
//! the Gauss-type cubature they carry.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{e_function, hermite_zeros, log_christoffel, Constants};

/// Which partial sum of `h_k^2` enters the cubature weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightConvention {
    /// `1 / sum_{k < 2N_j} h_k^2`, the Gauss weight of the `2N_j`-point rule.
    #[default]
    Classical,
    /// `1 / sum_{k <= 2N_j} h_k^2`; identical at the nodes because
    /// `h_{2N_j}` vanishes there.
    Inclusive,
}

/// Distance from the outermost zero to the edge of the outermost tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OuterMargin {
    /// `2^{-j/3}`, matching the spacing of the largest zeros.
    #[default]
    CubeRoot,
    /// `2^{-j/6}`.
    SixthRoot,
}

impl OuterMargin {
    pub fn width(self, level: usize) -> f64 {
        match self {
            OuterMargin::CubeRoot => 2f64.powf(-(level as f64) / 3.0),
            OuterMargin::SixthRoot => 2f64.powf(-(level as f64) / 6.0),
        }
    }
}

pub const DEFAULT_DELTA_STAR: f64 = 1.0 / 40.0;
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileConfig {
    pub delta_star: f64,
    pub dim: usize,
    pub max_level: usize,
    pub node_budget: usize,
    pub weight_convention: WeightConvention,
    pub outer_margin: OuterMargin,
}

impl TileConfig {
    pub fn new(dim: usize, max_level: usize) -> Result<Self> {
        let cfg = TileConfig {
            delta_star: DEFAULT_DELTA_STAR,
            dim,
            max_level,
            node_budget: DEFAULT_NODE_BUDGET,
            weight_convention: WeightConvention::Classical,
            outer_margin: OuterMargin::CubeRoot,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_delta_star(mut self, delta_star: f64) -> Result<Self> {
        self.delta_star = delta_star;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_star > 0.0 && self.delta_star < 1.0 / 37.0) {
            return Err(Error::invalid("delta_star", "must lie in (0, 1/37)"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(())
    }

    /// `N_j = floor((1 + 11 delta_star) (4/pi)^2 4^j) + 3`.
    pub fn n_j(&self, level: usize) -> usize {
        let base = (1.0 + 11.0 * self.delta_star) * (4.0 / std::f64::consts::PI).powi(2);
        (base * 4f64.powi(level as i32)).floor() as usize + 3
    }

    /// Number of zeros per axis, `2 N_j`.
    pub fn side(&self, level: usize) -> usize {
        2 * self.n_j(level)
    }

    /// `(2 N_j)^n`, or `None` on overflow.
    pub fn node_count(&self, level: usize) -> Option<usize> {
        let side = self.side(level);
        (0..self.dim).try_fold(1usize, |acc, _| acc.checked_mul(side))
    }

    pub fn constants(&self) -> Constants {
        Constants::for_delta_star(self.delta_star)
    }
}

/// One-dimensional partition of a level: zeros, cell edges and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPartition {
    pub level: usize,
    pub zeros: Vec<f64>,
    pub edges: Vec<f64>,
    pub tau: Vec<f64>,
}

impl AxisPartition {
    pub fn build(level: usize, cfg: &TileConfig) -> Result<Self> {
        let m = cfg.side(level);
        let zeros = hermite_zeros(m)?;
        let margin = cfg.outer_margin.width(level);
        let mut edges = Vec::with_capacity(m + 1);
        edges.push(zeros[0] - margin);
        edges.extend(zeros.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(zeros[m - 1] + margin);
        let upto = match cfg.weight_convention {
            WeightConvention::Classical => m - 1,
            WeightConvention::Inclusive => m,
        };
        let tau = zeros.iter().map(|&z| log_christoffel(upto, z).exp()).collect();
        Ok(AxisPartition {
            level,
            zeros,
            edges,
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Cell containing `t`; shared edges go to the lower cell.
    pub fn locate(&self, t: f64) -> Option<usize> {
        let m = self.len();
        if !(t >= self.edges[0] && t <= self.edges[m]) {
            return None;
        }
        let p = self.edges.partition_point(|&e| e < t);
        Some(p.saturating_sub(1).min(m - 1))
    }
}

/// A single tile.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub level: usize,
    pub index: Vec<usize>,
    pub node: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub weight: f64,
    pub measure: f64,
}

impl Tile {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&t, (&a, &b))| t >= a && t <= b)
    }
}

/// All tiles of one level: the axis partition raised to the `n`-th power.
#[derive(Debug, Clone)]
pub struct TileSet {
    level: usize,
    dim: usize,
    delta_star: f64,
    axis: Arc<AxisPartition>,
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    level: usize,
    dim: usize,
    delta_star: f64,
    weight_convention: WeightConvention,
    outer_margin: OuterMargin,
    axis: AxisPartition,
}

/// Builds level `j`, refusing levels whose node count exceeds the budget.
pub fn build_level(level: usize, cfg: &TileConfig) -> Result<TileSet> {
    cfg.validate()?;
    if level > cfg.max_level {
        return Err(Error::invalid(
            "level",
            format!("{level} exceeds the configured maximum {}", cfg.max_level),
        ));
    }
    check_budget(level, cfg)?;
    Ok(TileSet {
        level,
        dim: cfg.dim,
        delta_star: cfg.delta_star,
        axis: Arc::new(AxisPartition::build(level, cfg)?),
    })
}

fn check_budget(level: usize, cfg: &TileConfig) -> Result<()> {
    match cfg.node_count(level) {
        Some(count) if count <= cfg.node_budget => Ok(()),
        count => Err(Error::Budget {
            level,
            nodes: count.unwrap_or(usize::MAX),
            budget: cfg.node_budget,
        }),
    }
}

/// Builds levels `0..=cfg.max_level`.
pub fn build_levels(cfg: &TileConfig) -> Result<Vec<TileSet>> {
    (0..=cfg.max_level).map(|j| build_level(j, cfg)).collect()
}

impl TileSet {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self) -> &AxisPartition {
        &self.axis
    }

    /// Tiles per axis.
    pub fn side(&self) -> usize {
        self.axis.len()
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let m = self.side();
        let mut idx = vec![0; self.dim];
        for slot in idx.iter_mut().rev() {
            *slot = flat % m;
            flat /= m;
        }
        idx
    }

    pub fn flatten(&self, index: &[usize]) -> Result<usize> {
        let m = self.side();
        if index.len() != self.dim || index.iter().any(|&i| i >= m) {
            return Err(Error::InvalidNode {
                level: self.level,
                index: index.to_vec(),
            });
        }
        Ok(index.iter().fold(0, |acc, &i| acc * m + i))
    }

    pub fn node(&self, index: &[usize]) -> Vec<f64> {
        index.iter().map(|&i| self.axis.zeros[i]).collect()
    }

    /// `tau_R`, the product of the one-dimensional weights.
    pub fn weight(&self, index: &[usize]) -> f64 {
        index.iter().map(|&i| self.axis.tau[i]).product()
    }

    pub fn measure(&self, index: &[usize]) -> f64 {
        index.iter().map(|&i| self.axis.width(i)).product()
    }

    pub fn tile(&self, index: &[usize]) -> Tile {
        Tile {
            level: self.level,
            index: index.to_vec(),
            node: self.node(index),
            lo: index.iter().map(|&i| self.axis.edges[i]).collect(),
            hi: index.iter().map(|&i| self.axis.edges[i + 1]).collect(),
            weight: self.weight(index),
            measure: self.measure(index),
        }
    }

    pub fn tile_flat(&self, flat: usize) -> Tile {
        self.tile(&self.unflatten(flat))
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (0..self.len()).map(move |i| self.tile_flat(i))
    }

    /// Half-width of the cube `Q_j` covered by the tiles.
    pub fn outer_half_width(&self) -> f64 {
        *self.axis.edges.last().expect("nonempty partition")
    }

    /// Per-axis node coordinates, for tensor evaluation.
    pub fn node_axes(&self) -> Vec<Vec<f64>> {
        vec![self.axis.zeros.clone(); self.dim]
    }

    /// Tile whose box contains `x`, or `None` outside `Q_j`.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.dim {
            return None;
        }
        x.iter().map(|&t| self.axis.locate(t)).collect()
    }

    /// `sum_R tau_R f(x_R) g(x_R)` over samples in flat node order.
    pub fn cubature(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        for s in [f, g] {
            if s.len() != self.len() {
                return Err(Error::SampleCount {
                    level: self.level,
                    expected: self.len(),
                    got: s.len(),
                });
            }
        }
        Ok((0..self.len())
            .map(|flat| self.weight(&self.unflatten(flat)) * f[flat] * g[flat])
            .sum())
    }

    pub fn to_cache_json(&self, cfg: &TileConfig) -> Result<String> {
        let record = CacheRecord {
            level: self.level,
            dim: self.dim,
            delta_star: self.delta_star,
            weight_convention: cfg.weight_convention,
            outer_margin: cfg.outer_margin,
            axis: (*self.axis).clone(),
        };
        serde_json::to_string(&record).map_err(|source| Error::Json {
            context: "tile cache".into(),
            source,
        })
    }

    /// Restores a cached level; the key `(j, n, delta_star)` and the
    /// construction options must match.
    pub fn from_cache_json(text: &str, level: usize, cfg: &TileConfig) -> Result<Self> {
        let record: CacheRecord = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "tile cache".into(),
            source,
        })?;
        if record.level != level
            || record.dim != cfg.dim
            || record.delta_star != cfg.delta_star
            || record.weight_convention != cfg.weight_convention
            || record.outer_margin != cfg.outer_margin
            || record.axis.len() != cfg.side(level)
        {
            return Err(Error::Precondition("tile cache entry does not match the requested level".into()));
        }
        Ok(TileSet {
            level,
            dim: record.dim,
            delta_star: record.delta_star,
            axis: Arc::new(record.axis),
        })
    }
}

/// File name of a cached level.
pub fn cache_path(dir: &Path, level: usize, cfg: &TileConfig) -> PathBuf {
    dir.join(format!(
        "tiles_j{level}_n{}_d{:016x}.json",
        cfg.dim,
        cfg.delta_star.to_bits()
    ))
}

/// Loads level `j` from `dir` if present, otherwise builds and stores it.
pub fn build_level_cached(level: usize, cfg: &TileConfig, dir: &Path) -> Result<TileSet> {
    check_budget(level, cfg)?;
    let path = cache_path(dir, level, cfg);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(set) = TileSet::from_cache_json(&text, level, cfg) {
            return Ok(set);
        }
    }
    let set = build_level(level, cfg)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    std::fs::write(&path, set.to_cache_json(cfg)?).map_err(|source| Error::Io { path, source })?;
    Ok(set)
}

/// Measured geometry of one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelGeometry {
    pub level: usize,
    /// Smallest `c` with `R ⊂ Q(x_R, c 2^{-j})` over tiles with
    /// `|x_R| <= (1 + 4 delta_star) 2^{j+1}`.
    pub c0: f64,
    /// Largest `c` with `Q(x_R, c 2^{-j}) ⊂ R` over all tiles.
    pub c1: f64,
    /// Smallest `c` with `R ⊂ Q(x_R, c 2^{-j/3})` over all tiles.
    pub c2: f64,
    pub min_measure_scaled: f64,
    pub max_measure_scaled: f64,
    pub tau_ratio_min: f64,
    pub tau_ratio_max: f64,
    /// `|sum |R| - |Q_j|| / |Q_j|`.
    pub covering_error: f64,
    /// Whether every node lies strictly inside its box.
    pub nodes_inside: bool,
    /// Sup over tiles of `|R| 2^{jn} e_{eps 4^j}(x_R)`.
    pub tile_control: f64,
}

/// Cubes are `Q(x, r) = {y : |y - x|_inf <= r}`.
pub fn level_geometry(set: &TileSet, cfg: &TileConfig) -> LevelGeometry {
    let j = set.level as f64;
    let n = set.dim as i32;
    let scale = 2f64.powf(j);
    let near = (1.0 + 4.0 * cfg.delta_star) * 2f64.powf(j + 1.0);
    let consts = cfg.constants();
    let axis = set.axis();
    let m = axis.len();

    // Per-axis extents: distance from the node to each edge.
    let reach: Vec<(f64, f64)> = (0..m)
        .map(|i| (axis.zeros[i] - axis.edges[i], axis.edges[i + 1] - axis.zeros[i]))
        .collect();

    let mut g = LevelGeometry {
        level: set.level,
        c0: 0.0,
        c1: f64::INFINITY,
        c2: 0.0,
        min_measure_scaled: f64::INFINITY,
        max_measure_scaled: 0.0,
        tau_ratio_min: f64::INFINITY,
        tau_ratio_max: 0.0,
        covering_error: 0.0,
        nodes_inside: true,
        tile_control: 0.0,
    };
    let mut total = 0.0;
    for flat in 0..set.len() {
        let idx = set.unflatten(flat);
        let node = set.node(&idx);
        let far = idx.iter().map(|&i| reach[i].0.max(reach[i].1)).fold(0.0, f64::max);
        let close = idx.iter().map(|&i| reach[i].0.min(reach[i].1)).fold(f64::INFINITY, f64::min);
        let norm = node.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm <= near {
            g.c0 = g.c0.max(far * scale);
        }
        g.c1 = g.c1.min(close * scale);
        g.c2 = g.c2.max(far * scale.powf(1.0 / 3.0));
        g.nodes_inside &= close > 0.0;
        let measure = set.measure(&idx);
        total += measure;
        let scaled = measure * scale.powi(n);
        g.min_measure_scaled = g.min_measure_scaled.min(scaled);
        g.max_measure_scaled = g.max_measure_scaled.max(scaled);
        let ratio = set.weight(&idx) / measure;
        g.tau_ratio_min = g.tau_ratio_min.min(ratio);
        g.tau_ratio_max = g.tau_ratio_max.max(ratio);
        let e = e_function(consts.epsilon * 4f64.powf(j), &node, &consts);
        g.tile_control = g.tile_control.max(scaled * e);
    }
    let cube = (2.0 * set.outer_half_width()).powi(n);
    g.covering_error = (total - cube).abs() / cube;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{eval_hermite_1d, MultiIndex, SpectralFunction};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_sizes() {
        let cfg = TileConfig::new(1, 4).unwrap();
        assert_eq!(cfg.n_j(0), 5);
        assert_eq!(cfg.n_j(1), 11);
        assert_eq!(cfg.n_j(2), 36);
        assert_eq!(cfg.n_j(3), 135);
        assert_eq!(cfg.n_j(4), 532);
        assert_eq!(build_level(0, &cfg).unwrap().len(), 10);
        assert_eq!(build_level(1, &cfg).unwrap().len(), 22);
        let cfg2 = TileConfig::new(2, 2).unwrap();
        assert_eq!(build_level(2, &cfg2).unwrap().len(), 72 * 72);
    }

    #[test]
    fn delta_star_is_validated() {
        let cfg = TileConfig::new(1, 1).unwrap();
        assert!(cfg.with_delta_star(1.0 / 37.0).is_err());
        assert!(cfg.with_delta_star(0.0).is_err());
        assert!(cfg.with_delta_star(0.02).is_ok());
    }

    #[test]
    fn budget_is_enforced() {
        let mut cfg = TileConfig::new(3, 4).unwrap();
        cfg.node_budget = 1000;
        assert!(matches!(build_level(1, &cfg), Err(Error::Budget { level: 1, .. })));
        assert!(build_level(0, &cfg).is_ok());
    }

    #[test]
    fn conventions_agree_at_the_nodes() {
        let mut cfg = TileConfig::new(1, 3).unwrap();
        let a = build_level(3, &cfg).unwrap();
        cfg.weight_convention = WeightConvention::Inclusive;
        let b = build_level(3, &cfg).unwrap();
        for (x, y) in a.axis().tau.iter().zip(&b.axis().tau) {
            assert_relative_eq!(*x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn cubature_examples() {
        let cfg = TileConfig::new(1, 1).unwrap();
        let l0 = build_level(0, &cfg).unwrap();
        let h0: Vec<Complex64> = l0.axis().zeros.iter().map(|&z| eval_hermite_1d(0, z).unwrap()[0].into()).collect();
        assert_relative_eq!(l0.cubature(&h0, &h0).unwrap().re, 1.0, epsilon = 1e-10);
        let l1 = build_level(1, &cfg).unwrap();
        let h = |k: usize| -> Vec<Complex64> {
            l1.axis().zeros.iter().map(|&z| eval_hermite_1d(k, z).unwrap()[k].into()).collect()
        };
        assert!(l1.cubature(&h(2), &h(5)).unwrap().norm() < 1e-10);
        let zero = vec![Complex64::default(); l1.len()];
        assert_eq!(l1.cubature(&zero, &zero).unwrap(), Complex64::default());
        assert!(matches!(l1.cubature(&zero[1..], &zero), Err(Error::SampleCount { .. })));
    }

    #[test]
    fn cubature_exact_in_two_dimensions() {
        let cfg = TileConfig::new(2, 1).unwrap();
        let set = build_level(1, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut random = |k: usize| {
            SpectralFunction::from_coeffs(
                2,
                k,
                MultiIndex::up_to_degree(2, k)
                    .into_iter()
                    .map(|xi| (xi, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))),
            )
            .unwrap()
        };
        let f = random(20);
        let g = random(23);
        let fs = f.eval_tensor(&set.node_axes()).unwrap();
        let gs = g.eval_tensor(&set.node_axes()).unwrap();
        let exact: Complex64 = f.coeffs().map(|(xi, c)| c * g.coeff(xi)).sum();
        let q = set.cubature(&fs, &gs).unwrap();
        assert!((q - exact).norm() < 1e-10 * exact.norm().max(1.0));
    }

    #[test]
    fn locate_agrees_with_linear_scan() {
        let cfg = TileConfig::new(2, 1).unwrap();
        let set = build_level(1, &cfg).unwrap();
        let tiles: Vec<Tile> = set.tiles().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = set.outer_half_width() * 1.1;
        for _ in 0..10_000 {
            let x = [rng.gen_range(-w..w), rng.gen_range(-w..w)];
            let scan = tiles.iter().find(|t| t.contains(&x)).map(|t| t.index.clone());
            assert_eq!(set.locate(&x), scan);
        }
        for t in tiles.iter().take(50) {
            assert_eq!(set.locate(&t.node), Some(t.index.clone()));
        }
        assert_eq!(set.locate(&[1e3, 0.0]), None);
    }

    #[test]
    fn shared_edges_go_to_the_lower_tile() {
        let cfg = TileConfig::new(1, 0).unwrap();
        let set = build_level(0, &cfg).unwrap();
        let e = set.axis().edges[3];
        assert_eq!(set.locate(&[e]), Some(vec![2]));
        assert_eq!(set.locate(&[set.axis().edges[0]]), Some(vec![0]));
        assert_eq!(set.locate(&[set.axis().edges[10]]), Some(vec![9]));
    }

    #[test]
    fn geometry_of_low_levels() {
        let cfg = TileConfig::new(1, 4).unwrap();
        for j in 0..=4 {
            let g = level_geometry(&build_level(j, &cfg).unwrap(), &cfg);
            assert!(g.nodes_inside);
            assert!(g.covering_error < 1e-12);
            assert!(g.c0.is_finite() && g.c1 > 0.0 && g.c2.is_finite());
            assert!(g.tau_ratio_min > 0.0 && g.tau_ratio_max.is_finite());
        }
    }

    #[test]
    fn sixth_root_margin_grows_the_outer_tiles() {
        let mut cfg = TileConfig::new(1, 4).unwrap();
        cfg.outer_margin = OuterMargin::SixthRoot;
        let c2: Vec<f64> = (0..=4)
            .map(|j| level_geometry(&build_level(j, &cfg).unwrap(), &cfg).c2)
            .collect();
        // The outermost reach is 2^{-j/6}, so c2 >= 2^{j/6}.
        assert!(c2[4] >= 2f64.powf(4.0 / 6.0) - 1e-12);
        assert!(c2[4] / c2[0] > 1.1);
    }

    #[test]
    fn cache_round_trip() {
        let cfg = TileConfig::new(1, 2).unwrap();
        let dir = std::env::temp_dir().join(format!("hermite-tiles-{}", std::process::id()));
        let a = build_level_cached(2, &cfg, &dir).unwrap();
        assert!(cache_path(&dir, 2, &cfg).exists());
        let b = build_level_cached(2, &cfg, &dir).unwrap();
        assert_eq!(a.axis(), b.axis());
        let other = TileConfig::new(2, 2).unwrap();
        assert!(TileSet::from_cache_json(&a.to_cache_json(&cfg).unwrap(), 2, &other).is_err());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
