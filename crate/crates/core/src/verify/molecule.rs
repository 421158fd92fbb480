//! The three molecule conditions (size with derivatives, Hölder continuity of
//! the top derivatives, almost vanishing moments) measured on a grid.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{distance, norm, orders_up_to, sample_tiles, EstimateReport, MoleculeParams, Scan, ScanGrid, Series};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::hermite::{SpectralFunction, TensorGrid};
use crate::pseudomult::{x_partials, Symbol};
use crate::tiles::Tile;

/// Something the molecule conditions can be measured on.
pub trait Molecule: Sync {
    fn dim(&self) -> usize;

    /// `d^gamma m` at every point of `grid`, row-major.
    fn partial_on(&self, gamma: &[usize], grid: &TensorGrid) -> Result<Vec<Complex64>>;

    /// `int (y - center)^gamma m(y) dy`; `grid` is used only by sampled molecules.
    fn moment(&self, gamma: &[usize], center: &[f64], grid: &TensorGrid) -> Result<Complex64>;
}

impl Molecule for SpectralFunction {
    fn dim(&self) -> usize {
        SpectralFunction::dim(self)
    }

    fn partial_on(&self, gamma: &[usize], grid: &TensorGrid) -> Result<Vec<Complex64>> {
        self.partial(gamma)?.eval_tensor(grid.axes())
    }

    fn moment(&self, gamma: &[usize], center: &[f64], _grid: &TensorGrid) -> Result<Complex64> {
        SpectralFunction::moment(self, gamma, center)
    }
}

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A pointwise function; derivatives by extrapolated differences, moments
/// by the trapezoid rule on the scan grid.
#[derive(Clone)]
pub struct SampledMolecule {
    dim: usize,
    max_order: usize,
    f: Field,
}

impl std::fmt::Debug for SampledMolecule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledMolecule")
            .field("dim", &self.dim)
            .field("max_order", &self.max_order)
            .finish()
    }
}

impl SampledMolecule {
    pub fn new(dim: usize, max_order: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        SampledMolecule {
            dim,
            max_order,
            f: Arc::new(f),
        }
    }
}

/// Lets the difference machinery of the symbol module act on `x`.
struct AsSymbol<'a>(&'a SampledMolecule);

impl Symbol for AsSymbol<'_> {
    fn eval(&self, x: &[f64], _xi: f64) -> Complex64 {
        Complex64::new((self.0.f)(x), 0.0)
    }
}

impl Molecule for SampledMolecule {
    fn dim(&self) -> usize {
        self.dim
    }

    fn partial_on(&self, gamma: &[usize], grid: &TensorGrid) -> Result<Vec<Complex64>> {
        let order: usize = gamma.iter().sum();
        if order > self.max_order {
            return Err(Error::DerivativeUnavailable {
                order,
                reason: format!("sampled molecule provides derivatives up to order {}", self.max_order),
            });
        }
        let sym = AsSymbol(self);
        Ok((0..grid.len())
            .into_par_iter()
            .map(|flat| x_partials(&sym, gamma, &grid.point(flat), &[0.0])[0])
            .collect())
    }

    fn moment(&self, gamma: &[usize], center: &[f64], grid: &TensorGrid) -> Result<Complex64> {
        let w = grid.trapezoid_weights();
        let sum: f64 = (0..grid.len())
            .map(|flat| {
                let y = grid.point(flat);
                let mono: f64 = y
                    .iter()
                    .zip(center)
                    .zip(gamma)
                    .map(|((a, c), &g)| (a - c).powi(g as i32))
                    .product();
                w[flat] * mono * (self.f)(&y)
            })
            .sum();
        Ok(Complex64::new(sum, 0.0))
    }
}

/// `A / (1 + |x - x_R - offset|^2)^{1/2}`: decays like `|x|^{-1}`, far too
/// slowly for any `mu >= 1`.
pub fn fat_tail_bump(tile: &Tile, amplitude: f64, offset: &[f64]) -> SampledMolecule {
    let center: Vec<f64> = tile.node.iter().zip(offset).map(|(a, b)| a + b).collect();
    SampledMolecule::new(tile.node.len(), 8, move |x| {
        amplitude / (1.0 + distance(x, &center).powi(2)).sqrt()
    })
}

/// Sups of the three clause ratios on `grid`: size, Hölder, moments.
/// A clause that is void (no moments for `M = -1`) reports 0.
pub fn molecule_clauses(m: &dyn Molecule, tile: &Tile, params: &MoleculeParams, grid: &TensorGrid) -> Result<[f64; 3]> {
    let n = tile.node.len();
    if m.dim() != n || grid.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.dim().min(grid.dim()),
        });
    }
    let j = tile.level as i32;
    let scale = 2f64.powi(j);
    let inv_sqrt_measure = tile.measure.powf(-0.5);
    let xr = &tile.node;
    let points: Vec<Vec<f64>> = grid.points().collect();
    let localization: Vec<f64> = points
        .iter()
        .map(|x| (1.0 + scale * distance(x, xr)).powf(params.mu))
        .collect();
    let big_n = params.big_n;

    let mut size: f64 = 0.0;
    let mut top: Vec<(Vec<usize>, Vec<Complex64>)> = Vec::new();
    for gamma in orders_up_to(n, big_n) {
        let order: usize = gamma.iter().sum();
        let values = m.partial_on(&gamma, grid)?;
        let rhs = inv_sqrt_measure * scale.powi(order as i32);
        for ((x, v), loc) in points.iter().zip(&values).zip(&localization) {
            let decay = (1.0 + norm(x) / scale).powf(big_n as f64 + params.delta);
            size = size.max(v.norm() * loc * decay / rhs);
        }
        if order == big_n {
            top.push((gamma, values));
        }
    }

    let mut holder: f64 = 0.0;
    let step = 1.0 / scale;
    for (gamma, values) in &top {
        let rhs = inv_sqrt_measure * scale.powi(big_n as i32);
        for axis in 0..n {
            for frac in [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0] {
                let h = frac * step;
                let mut axes = grid.axes().to_vec();
                axes[axis].iter_mut().for_each(|t| *t += h);
                let shifted = m.partial_on(gamma, &TensorGrid::new(axes)?)?;
                let gap = (frac.abs()).powf(params.delta);
                for ((a, b), loc) in values.iter().zip(&shifted).zip(&localization) {
                    holder = holder.max((a - b).norm() * loc / (rhs * gap));
                }
            }
        }
    }

    let mut moments: f64 = 0.0;
    if params.big_m >= 0 {
        let spread = (1.0 + norm(xr)) / scale;
        let order_sum = params.big_m as f64 + params.theta;
        for gamma in orders_up_to(n, params.big_m as usize) {
            let order: usize = gamma.iter().sum();
            let value = m.moment(&gamma, xr, grid)?.norm();
            let rhs = inv_sqrt_measure
                * scale.powi(-((n + order) as i32))
                * spread.powf(order_sum - order as f64);
            moments = moments.max(value / rhs);
        }
    }
    Ok([size, holder, moments])
}

fn clause_report(id: &str, scan: Scan, base: &[[f64; 3]], refined: &[[f64; 3]], enlarged: &[[f64; 3]]) -> EstimateReport {
    let worst = |rows: &[[f64; 3]]| rows.iter().flat_map(|r| r.iter().copied()).fold(0.0, f64::max);
    let mut report = EstimateReport::new(id, scan);
    report.constant = worst(base);
    for (i, name) in ["size", "holder", "moments"].iter().enumerate() {
        report.push_component(*name, base.iter().map(|r| r[i]).fold(0.0, f64::max));
    }
    report.refined_constant = Some(worst(refined));
    let wide = worst(enlarged);
    let change = super::relative_change(report.constant, wide);
    report.push_check(
        "window",
        change < super::STABILITY_TOLERANCE,
        format!("{:.6e} -> {wide:.6e} on a window 1.5 times wider, change {change:.3}", report.constant),
    );
    report
}

/// Measures one molecule against one tile. Passing means a finite sup that
/// is stable under grid refinement and under widening the window.
pub fn check_molecule(m: &dyn Molecule, tile: &Tile, params: &MoleculeParams, grid: ScanGrid) -> Result<EstimateReport> {
    let n = tile.node.len();
    let base = molecule_clauses(m, tile, params, &grid.tensor(n)?)?;
    let refined = molecule_clauses(m, tile, params, &grid.refined().tensor(n)?)?;
    let enlarged = molecule_clauses(m, tile, params, &grid.enlarged(1.5).tensor(n)?)?;
    let scan = Scan {
        dim: n,
        levels: vec![tile.level],
        tiles_per_level: 1,
        grid: Some(grid),
        notes: vec![format!("tile {:?} at {:?}", tile.index, tile.node)],
    };
    Ok(clause_report("molecule", scan, &[base], &[refined], &[enlarged]).finish())
}

/// Needlets `phi_R` for `tiles_per_level` sampled tiles of levels
/// `0..=levels`. When `frame` has level `levels + 1` it is scanned too, on
/// the refined grid, and enters only the extension check.
pub fn verify_needlet_molecules(
    frame: &Frame,
    params: &MoleculeParams,
    levels: usize,
    tiles_per_level: usize,
    grid: ScanGrid,
) -> Result<EstimateReport> {
    let n = frame.dim();
    if levels > frame.max_level() {
        return Err(Error::invalid("levels", format!("frame has levels up to {}", frame.max_level())));
    }
    let grids = [grid.tensor(n)?, grid.refined().tensor(n)?, grid.enlarged(1.5).tensor(n)?];
    let reach = 0.9 * grid.half_width;
    let top = (levels + 1).min(frame.max_level());
    let mut rows: [Vec<[f64; 3]>; 3] = Default::default();
    let mut per_level = Vec::new();
    for j in 0..=top {
        let tiles = sample_tiles(frame.level(j)?, tiles_per_level, reach);
        let extension = j > levels;
        let results: Vec<[[f64; 3]; 3]> = tiles
            .par_iter()
            .map(|index| {
                let needlet = frame.needlet(j, index)?;
                let mut out = [[0.0; 3]; 3];
                if extension {
                    out[0] = molecule_clauses(needlet.spectral(), &needlet.tile, params, &grids[1])?;
                    return Ok(out);
                }
                for (slot, g) in out.iter_mut().zip(&grids) {
                    *slot = molecule_clauses(needlet.spectral(), &needlet.tile, params, g)?;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        per_level.push(results.iter().flat_map(|r| r[0].iter().copied()).fold(0.0, f64::max));
        if extension {
            continue;
        }
        for r in results {
            for (dst, src) in rows.iter_mut().zip(r) {
                dst.push(src);
            }
        }
    }
    let mut notes = vec![format!(
        "needlets against (M, theta, N, delta, mu) = ({}, {}, {}, {}, {})",
        params.big_m, params.theta, params.big_n, params.delta, params.mu
    )];
    if top > levels {
        notes.push(format!("level {top} scanned on the refined grid for the extension check"));
    } else {
        notes.push("no extension level available".into());
    }
    let scan = Scan {
        dim: n,
        levels: (0..=levels).collect(),
        tiles_per_level,
        grid: Some(grid),
        notes,
    };
    let mut report = clause_report("molecule", scan, &rows[0], &rows[1], &rows[2]);
    report.set_levels(&per_level, levels + 1);
    report.series.push(Series {
        name: "per_level".into(),
        x_label: "level".into(),
        y_label: "constant".into(),
        points: per_level.iter().enumerate().map(|(j, &v)| (j as f64, v)).collect(),
    });
    Ok(report.finish())
}
