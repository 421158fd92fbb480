//! Needlets, the analysis and synthesis operators, and the frame round trip.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{hermite_values, MultiIndex, SpectralFunction};
use crate::lp::{apply_lp, dual_kernel_section, kernel_section, lp_kernel, AdmissibleSystem};
use crate::tiles::{build_level, Tile, TileConfig, TileSet};

/// Synthesized coefficients below this magnitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// An admissible system together with the tile sets of levels `0..=J`.
#[derive(Debug, Clone)]
pub struct Frame {
    system: AdmissibleSystem,
    config: TileConfig,
    levels: Vec<TileSet>,
}

/// `phi_R` (or its dual `psi_R`) attached to one tile.
#[derive(Debug, Clone)]
pub struct Needlet {
    pub tile: Tile,
    pub dual: bool,
    spectral: SpectralFunction,
    system: AdmissibleSystem,
}

impl Needlet {
    /// Exact Hermite expansion, coefficients `tau_R^{1/2} phi_j(sqrt(lambda_|xi|)) h_xi(x_R)`.
    pub fn spectral(&self) -> &SpectralFunction {
        &self.spectral
    }

    pub fn into_spectral(self) -> SpectralFunction {
        self.spectral
    }

    /// `tau_R^{1/2} phi_j(sqrt L)(x, x_R)` through the projector kernels.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.dual {
            return Ok(self.spectral.eval(x)?.re);
        }
        Ok(self.tile.weight.sqrt() * lp_kernel(&self.system, self.tile.level, x, &self.tile.node)?)
    }
}

impl Frame {
    /// Builds levels `0..=config.max_level`.
    pub fn new(system: AdmissibleSystem, config: TileConfig) -> Result<Self> {
        let levels = (0..=config.max_level)
            .map(|j| build_level(j, &config))
            .collect::<Result<_>>()?;
        Ok(Frame { system, config, levels })
    }

    /// Uses already built (for example cached) tile sets.
    pub fn from_levels(system: AdmissibleSystem, config: TileConfig, levels: Vec<TileSet>) -> Result<Self> {
        for (j, set) in levels.iter().enumerate() {
            if set.level() != j || set.dim() != config.dim {
                return Err(Error::invalid("levels", format!("tile set {j} does not match the configuration")));
            }
        }
        if levels.is_empty() {
            return Err(Error::invalid("levels", "need at least level 0"));
        }
        Ok(Frame { system, config, levels })
    }

    pub fn system(&self) -> &AdmissibleSystem {
        &self.system
    }

    pub fn config(&self) -> &TileConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[TileSet] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> Result<&TileSet> {
        self.levels
            .get(j)
            .ok_or_else(|| Error::invalid("level", format!("{j} exceeds the built maximum {}", self.max_level())))
    }

    fn tile(&self, j: usize, index: &[usize]) -> Result<Tile> {
        let set = self.level(j)?;
        set.flatten(index)?;
        Ok(set.tile(index))
    }

    pub fn needlet(&self, j: usize, index: &[usize]) -> Result<Needlet> {
        let tile = self.tile(j, index)?;
        let spectral = kernel_section(&self.system, j, &tile.node, tile.weight.sqrt())?;
        Ok(Needlet {
            tile,
            dual: false,
            spectral,
            system: self.system.clone(),
        })
    }

    /// `psi_R = tau_R^{1/2} psi_j(sqrt L)(., x_R)`.
    pub fn dual_needlet(&self, j: usize, index: &[usize]) -> Result<Needlet> {
        let tile = self.tile(j, index)?;
        let spectral = dual_kernel_section(&self.system, j, &tile.node, tile.weight.sqrt())?;
        Ok(Needlet {
            tile,
            dual: true,
            spectral,
            system: self.system.clone(),
        })
    }

    /// `s_R = tau_R^{1/2} (phi_j(sqrt L) f)(x_R)`: exact diagonal action, then
    /// evaluation at the nodes.
    pub fn analyze(&self, f: &SpectralFunction) -> Result<CoefficientSequence> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.dim(),
            });
        }
        let levels = self
            .levels
            .iter()
            .map(|set| {
                let j = set.level();
                let piece = apply_lp(&self.system, j, f);
                let mut entries = BTreeMap::new();
                if !piece.is_empty() {
                    let values = piece.eval_tensor(&set.node_axes())?;
                    for (flat, v) in values.into_iter().enumerate() {
                        let index = set.unflatten(flat);
                        entries.insert(index.clone(), v * set.weight(&index).sqrt());
                    }
                }
                Ok(LevelCoefficients { j, entries })
            })
            .collect::<Result<_>>()?;
        Ok(CoefficientSequence { dim: self.dim(), levels })
    }

    /// `sum_R s_R psi_R`, assembled coefficient by coefficient.
    pub fn synthesize(&self, s: &CoefficientSequence) -> Result<SpectralFunction> {
        Ok(self.synthesize_with_report(s)?.0)
    }

    /// As [`Frame::synthesize`], also returning how many coefficients were
    /// pruned below [`PRUNE_THRESHOLD`].
    pub fn synthesize_with_report(&self, s: &CoefficientSequence) -> Result<(SpectralFunction, usize)> {
        if s.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.dim,
            });
        }
        let dim = self.dim();
        let cap = self.system.max_degree(self.max_level(), dim);
        let mut out = SpectralFunction::zero(dim, cap);
        for level in &s.levels {
            let set = self.level(level.j)?;
            for index in level.entries.keys() {
                if set.flatten(index).is_err() {
                    return Err(Error::InvalidNode {
                        level: level.j,
                        index: index.clone(),
                    });
                }
            }
            let Some((lo, hi)) = self.system.degree_range(level.j, dim) else {
                continue;
            };
            if level.entries.is_empty() {
                continue;
            }
            // Per-axis Hermite tables at the nodes.
            let table: Vec<Vec<f64>> = set.axis().zeros.iter().map(|&t| hermite_values(hi, t)).collect();
            let entries: Vec<(&Vec<usize>, Complex64)> = level
                .entries
                .iter()
                .map(|(idx, c)| (idx, c * set.weight(idx).sqrt()))
                .collect();
            let xis: Vec<MultiIndex> = (lo..=hi).flat_map(|k| MultiIndex::of_degree(dim, k)).collect();
            let terms: Vec<(MultiIndex, Complex64)> = xis
                .into_par_iter()
                .filter_map(|xi| {
                    let w = self.system.dual_window(level.j, xi.degree(), dim);
                    if w == 0.0 {
                        return None;
                    }
                    let sum: Complex64 = entries
                        .iter()
                        .map(|(idx, c)| {
                            let h: f64 = xi.0.iter().zip(idx.iter()).map(|(&d, &i)| table[i][d]).product();
                            c * h
                        })
                        .sum();
                    Some((xi, sum * w))
                })
                .collect();
            for (xi, c) in terms {
                let total = out.coeff(&xi) + c;
                out.insert(xi, total)?;
            }
        }
        let pruned = out.prune(PRUNE_THRESHOLD);
        Ok((out, pruned))
    }

    /// `||T_psi S_phi f - f||_2 / ||f||_2` with a flag telling whether the
    /// levels cover the occupied spectrum of `f`.
    pub fn roundtrip_residual(&self, f: &SpectralFunction) -> Result<Roundtrip> {
        let k = f.occupied_degree().unwrap_or(0);
        let covered = self.system.covers(self.max_level(), k, self.dim());
        let back = self.synthesize(&self.analyze(f)?)?;
        let norm = f.l2_norm();
        let diff = back.sub(f)?.l2_norm();
        Ok(Roundtrip {
            residual: if norm == 0.0 { diff } else { diff / norm },
            covered,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roundtrip {
    pub residual: f64,
    /// False when the precondition fails; the residual is then meaningless.
    pub covered: bool,
}

/// Coefficients of one level, keyed by per-axis node indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelCoefficients {
    pub j: usize,
    pub entries: BTreeMap<Vec<usize>, Complex64>,
}

/// Sparse frame coefficients `{s_R}` over levels `0..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSequence {
    pub dim: usize,
    pub levels: Vec<LevelCoefficients>,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    node: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct LevelRecord {
    j: usize,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
struct SequenceRecord {
    levels: Vec<LevelRecord>,
}

impl CoefficientSequence {
    /// Empty sequence over levels `0..=max_level`.
    pub fn zero(dim: usize, max_level: usize) -> Self {
        CoefficientSequence {
            dim,
            levels: (0..=max_level)
                .map(|j| LevelCoefficients {
                    j,
                    entries: BTreeMap::new(),
                })
                .collect(),
        }
    }

    pub fn max_level(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    pub fn get(&self, j: usize, index: &[usize]) -> Complex64 {
        self.levels
            .get(j)
            .and_then(|l| l.entries.get(index))
            .copied()
            .unwrap_or_default()
    }

    pub fn insert(&mut self, j: usize, index: Vec<usize>, c: Complex64) -> Result<()> {
        if index.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: index.len(),
            });
        }
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite("coefficient"));
        }
        while self.levels.len() <= j {
            let next = self.levels.len();
            self.levels.push(LevelCoefficients {
                j: next,
                entries: BTreeMap::new(),
            });
        }
        self.levels[j].entries.insert(index, c);
        Ok(())
    }

    /// `(j, index, s_R)` for every stored entry.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Vec<usize>, Complex64)> {
        self.levels
            .iter()
            .flat_map(|l| l.entries.iter().map(move |(idx, c)| (l.j, idx, *c)))
    }

    pub fn nnz(&self) -> usize {
        self.levels.iter().map(|l| l.entries.len()).sum()
    }

    /// `a self + b other`.
    pub fn combine(&self, a: Complex64, other: &CoefficientSequence, b: Complex64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = CoefficientSequence::zero(self.dim, self.max_level().max(other.max_level()));
        for (j, idx, c) in self.iter() {
            out.insert(j, idx.clone(), a * c)?;
        }
        for (j, idx, c) in other.iter() {
            let v = out.get(j, idx) + b * c;
            out.insert(j, idx.clone(), v)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = SequenceRecord {
            levels: self
                .levels
                .iter()
                .map(|l| LevelRecord {
                    j: l.j,
                    entries: l
                        .entries
                        .iter()
                        .map(|(node, c)| EntryRecord {
                            node: node.clone(),
                            re: c.re,
                            im: c.im,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&record).map_err(|source| Error::Json {
            context: "coefficient sequence".into(),
            source,
        })
    }

    /// Parses the JSON layout of [`CoefficientSequence::to_json`]; the
    /// dimension is read off the node indices.
    pub fn from_json(text: &str, dim: usize, context: &str) -> Result<Self> {
        let record: SequenceRecord = serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        let mut out = CoefficientSequence::zero(dim, 0);
        for level in record.levels {
            if out.levels.len() <= level.j {
                out.insert_level(level.j);
            }
            for e in level.entries {
                out.insert(level.j, e.node, Complex64::new(e.re, e.im))?;
            }
        }
        Ok(out)
    }

    fn insert_level(&mut self, j: usize) {
        while self.levels.len() <= j {
            let next = self.levels.len();
            self.levels.push(LevelCoefficients {
                j: next,
                entries: BTreeMap::new(),
            });
        }
    }

    /// Dimension stored in the first entry of a serialized sequence.
    pub fn json_dim(text: &str, context: &str) -> Result<Option<usize>> {
        let record: SequenceRecord = serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        Ok(record
            .levels
            .iter()
            .flat_map(|l| l.entries.first())
            .map(|e| e.node.len())
            .next())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{eval_hermite_1d, gauss_hermite, projector_kernels};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_function(dim: usize, k_max: usize, seed: u64) -> SpectralFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralFunction::from_coeffs(
            dim,
            k_max,
            MultiIndex::up_to_degree(dim, k_max)
                .into_iter()
                .map(|xi| (xi, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))),
        )
        .unwrap()
    }

    fn frame(dim: usize, levels: usize) -> Frame {
        Frame::new(AdmissibleSystem::default_system(), TileConfig::new(dim, levels).unwrap()).unwrap()
    }

    #[test]
    fn needlet_at_its_node_and_norm() {
        let fr = frame(1, 3);
        for j in 0..=3 {
            let set = fr.level(j).unwrap();
            let index = vec![set.side() / 3];
            let nd = fr.needlet(j, &index).unwrap();
            let x = nd.tile.node.clone();
            let direct = nd.tile.weight.sqrt() * lp_kernel(fr.system(), j, &x, &x).unwrap();
            assert_relative_eq!(nd.eval(&x).unwrap(), direct, epsilon = 1e-15);
            assert!((nd.spectral().eval(&x).unwrap().re - direct).abs() < 1e-12);

            let p = projector_kernels(200, &x, &x).unwrap();
            let parseval: f64 = (0..=200)
                .map(|k| fr.system().window(j, k, 1).powi(2) * p[k])
                .sum::<f64>()
                * nd.tile.weight;
            assert!((nd.spectral().l2_norm().powi(2) - parseval).abs() < 1e-10);
        }
    }

    #[test]
    fn level_zero_needlet_is_one_term() {
        let fr = frame(1, 1);
        let nd = fr.needlet(0, &[2]).unwrap();
        let x = &nd.tile.node;
        let h0x = eval_hermite_1d(0, x[0]).unwrap()[0];
        for y in [-1.0, 0.0, 0.4] {
            let expect = nd.tile.weight.sqrt() * fr.system().phi0.eval(1.0) * h0x * eval_hermite_1d(0, y).unwrap()[0];
            assert_eq!(nd.eval(&[y]).unwrap(), expect);
        }
    }

    #[test]
    fn analysis_examples() {
        let fr = frame(1, 3);
        let s = fr.analyze(&SpectralFunction::zero(1, 5)).unwrap();
        assert!(s.iter().all(|(_, _, c)| c == Complex64::default()));

        let h0 = SpectralFunction::basis(MultiIndex::zero(1));
        let s = fr.analyze(&h0).unwrap();
        for (j, idx, c) in s.iter() {
            let set = fr.level(j).unwrap();
            let x = set.node(idx)[0];
            let expect = set.weight(idx).sqrt() * fr.system().phi_j(j, 1.0) * eval_hermite_1d(0, x).unwrap()[0];
            assert!((c.re - expect).abs() < 1e-15 && c.im == 0.0);
        }
    }

    #[test]
    fn analysis_matches_quadrature_inner_products() {
        let fr = frame(1, 3);
        let f = random_function(1, 20, 7);
        let s = fr.analyze(&f).unwrap();
        let g = gauss_hermite(120).unwrap();
        let fv: Vec<Complex64> = g.nodes.iter().map(|&y| f.eval(&[y]).unwrap()).collect();
        for j in 0..=3 {
            let set = fr.level(j).unwrap();
            for i in (0..set.side()).step_by(set.side() / 5 + 1) {
                let nd = fr.needlet(j, &[i]).unwrap();
                let re: Vec<f64> = g.nodes.iter().zip(&fv).map(|(&y, v)| v.re * nd.eval(&[y]).unwrap()).collect();
                let im: Vec<f64> = g.nodes.iter().zip(&fv).map(|(&y, v)| v.im * nd.eval(&[y]).unwrap()).collect();
                let q = Complex64::new(g.integrate_function(&re), g.integrate_function(&im));
                assert!((q - s.get(j, &[i])).norm() < 1e-10, "j={j} i={i}");
            }
        }
    }

    #[test]
    fn synthesis_of_a_single_coefficient() {
        let fr = frame(1, 2);
        let mut s = CoefficientSequence::zero(1, 2);
        s.insert(2, vec![7], Complex64::new(1.0, 0.0)).unwrap();
        let g = fr.synthesize(&s).unwrap();
        let psi = fr.dual_needlet(2, &[7]).unwrap();
        assert!(g.sub(psi.spectral()).unwrap().l2_norm() < 1e-14);
    }

    #[test]
    fn synthesis_is_linear() {
        let fr = frame(2, 2);
        let a = fr.analyze(&random_function(2, 5, 1)).unwrap();
        let b = fr.analyze(&random_function(2, 5, 2)).unwrap();
        let c = Complex64::new(0.3, -1.2);
        let lhs = fr.synthesize(&a.combine(c, &b, 1.0.into()).unwrap()).unwrap();
        let rhs = fr
            .synthesize(&a)
            .unwrap()
            .combine(c, &fr.synthesize(&b).unwrap(), 1.0.into())
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn rejects_invalid_nodes() {
        let fr = frame(1, 1);
        let mut s = CoefficientSequence::zero(1, 1);
        s.insert(1, vec![10_000], Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(fr.synthesize(&s), Err(Error::InvalidNode { level: 1, .. })));
    }

    #[test]
    fn roundtrip_h0_and_random() {
        let fr = frame(1, 2);
        let r = fr.roundtrip_residual(&SpectralFunction::basis(MultiIndex::zero(1))).unwrap();
        assert!(r.covered && r.residual < 1e-9, "{r:?}");

        let fr = frame(1, 4);
        let r = fr.roundtrip_residual(&random_function(1, 30, 11)).unwrap();
        assert!(r.covered && r.residual < 1e-8, "{r:?}");
    }

    #[test]
    fn uncovered_spectrum_is_flagged() {
        let fr = frame(1, 2);
        let f = SpectralFunction::basis(MultiIndex::new(vec![12]));
        let r = fr.roundtrip_residual(&f).unwrap();
        assert!(!r.covered);
        assert!(r.residual > 0.1);
    }

    #[test]
    fn json_round_trip() {
        let fr = frame(2, 1);
        let s = fr.analyze(&random_function(2, 3, 5)).unwrap();
        let text = s.to_json().unwrap();
        assert_eq!(CoefficientSequence::json_dim(&text, "mem").unwrap(), Some(2));
        let back = CoefficientSequence::from_json(&text, 2, "mem").unwrap();
        assert_eq!(back, s);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(value["levels"][0]["entries"].is_array());
    }
}
