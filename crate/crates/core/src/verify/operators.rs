//! `T_sigma` applied to needlets: smoothness and cancellation ratios, the
//! boundedness ratio on random families, and a cross-check of the kernel
//! derivative route against the spectral route.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::molecule::molecule_clauses;
use super::{distance, max_of, norm, orders_up_to, relative_change, sample_tiles, EstimateReport, MoleculeParams, Scan, ScanGrid};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::hermite::{
    binomial, degree_convolution, e_function, eigenvalue, hermite_derivative_table, hermite_values, Constants,
    MultiIndex, SpectralFunction, TensorGrid,
};
use crate::lp::kernel_section;
use crate::norms::{distribution_norm, SpaceParams};
use crate::pseudomult::{
    apply_multiplier, apply_pseudomultiplier, gauss_hermite_grid, reproject, reprojection_points, x_partials, Symbol,
};
use crate::tiles::Tile;

/// `sigma` and its `x`-derivatives up to a total order, at every grid point,
/// for the degrees of one level.
struct SigmaTable {
    lo: usize,
    orders: Vec<Vec<usize>>,
    /// `[point][order][k - lo]`
    values: Vec<Vec<Vec<Complex64>>>,
}

impl SigmaTable {
    fn build(sym: &dyn Symbol, dim: usize, lo: usize, hi: usize, max_order: usize, grid: &TensorGrid) -> Self {
        let orders = orders_up_to(dim, max_order);
        let lambdas: Vec<f64> = (lo..=hi).map(|k| eigenvalue(k, dim)).collect();
        let moving = sym.depends_on_x();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|flat| {
                let x = grid.point(flat);
                orders
                    .iter()
                    .map(|nu| {
                        if nu.iter().sum::<usize>() > 0 && !moving {
                            vec![Complex64::new(0.0, 0.0); lambdas.len()]
                        } else {
                            x_partials(sym, nu, &x, &lambdas)
                        }
                    })
                    .collect()
            })
            .collect();
        SigmaTable { lo, orders, values }
    }

    fn order_index(&self, nu: &[usize]) -> usize {
        self.orders.iter().position(|o| o == nu).expect("order in table")
    }
}

/// Per-axis tables `h_m^{(a)}(t)` at the grid coordinates.
struct AxisTables {
    /// `[axis][point][a][m]`
    tables: Vec<Vec<Vec<Vec<f64>>>>,
}

impl AxisTables {
    fn build(grid: &TensorGrid, hi: usize, max_order: usize) -> Self {
        let tables = grid
            .axes()
            .iter()
            .map(|axis| axis.iter().map(|&t| hermite_derivative_table(hi, max_order, t)).collect())
            .collect();
        AxisTables { tables }
    }
}

/// `d^gamma_x [T_sigma phi_R](x)` on the grid for every `gamma` of order
/// `<= max_order`, through Leibniz over the `x`-derivatives of `sigma` and of
/// the projector kernels `P_k(x, x_R)`. Returned as `[gamma][point]`.
fn t_partials(
    frame: &Frame,
    sigma: &SigmaTable,
    axes: &AxisTables,
    tile: &Tile,
    max_order: usize,
    grid: &TensorGrid,
) -> Result<Vec<Vec<Complex64>>> {
    let n = frame.dim();
    let j = tile.level;
    let Some((lo, hi)) = frame.system().degree_range(j, n) else {
        return Ok(vec![vec![Complex64::new(0.0, 0.0); grid.len()]; orders_up_to(n, max_order).len()]);
    };
    let amp = tile.weight.sqrt();
    let weights: Vec<f64> = (lo..=hi).map(|k| amp * frame.system().window(j, k, n)).collect();
    let node_tables: Vec<Vec<f64>> = tile.node.iter().map(|&t| hermite_values(hi, t)).collect();
    let gammas = orders_up_to(n, max_order);
    // Leibniz terms: (gamma, [(sigma order index, kernel order, coefficient)])
    let terms: Vec<Vec<(usize, Vec<usize>, f64)>> = gammas
        .iter()
        .map(|gamma| {
            orders_up_to(n, gamma.iter().sum())
                .into_iter()
                .filter(|nu| nu.iter().zip(gamma).all(|(a, b)| a <= b))
                .map(|nu| {
                    let coef: f64 = gamma.iter().zip(&nu).map(|(&g, &v)| binomial(g, v)).product();
                    let rest: Vec<usize> = gamma.iter().zip(&nu).map(|(g, v)| g - v).collect();
                    (sigma.order_index(&nu), rest, coef)
                })
                .collect()
        })
        .collect();
    let kernel_orders = orders_up_to(n, max_order);
    let per_point: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let idx = grid.unflatten(flat);
            let kernels: Vec<Vec<f64>> = kernel_orders
                .iter()
                .map(|alpha| {
                    let seqs: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            let d = &axes.tables[i][idx[i]][alpha[i]];
                            d.iter().zip(&node_tables[i]).map(|(a, b)| a * b).collect()
                        })
                        .collect();
                    degree_convolution(&seqs, hi)
                })
                .collect();
            let sig = &sigma.values[flat];
            terms
                .iter()
                .map(|leibniz| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (si, rest, coef) in leibniz {
                        let kernel = &kernels[kernel_orders.iter().position(|o| o == rest).expect("order")];
                        for k in lo..=hi {
                            acc += sig[*si][k - sigma.lo] * (coef * weights[k - lo] * kernel[k]);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok((0..gammas.len()).map(|g| per_point.iter().map(|row| row[g]).collect()).collect())
}

/// A choice of `(kappa, epsilon)` in the growth weight `e_{epsilon 4^j}^{1 - kappa}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCandidate {
    pub kappa: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsmoothOptions {
    /// Order `m` of the symbol.
    pub m: f64,
    pub max_gamma: usize,
    pub max_decay: usize,
    pub candidates: Vec<GrowthCandidate>,
    pub vartheta: f64,
    pub levels: usize,
    pub tiles_per_level: usize,
    pub grid: ScanGrid,
}

impl TsmoothOptions {
    /// `|gamma| <= 2`, `N <= 3`, levels up to 3.
    pub fn new(m: f64, dim: usize) -> Self {
        TsmoothOptions {
            m,
            max_gamma: 2,
            max_decay: 3,
            candidates: [(0.0, 4.0001), (0.5, 4.0001), (0.0, 16.0001), (0.5, 16.0001)]
                .into_iter()
                .map(|(kappa, epsilon)| GrowthCandidate { kappa, epsilon })
                .collect(),
            vartheta: 0.25,
            levels: 3,
            tiles_per_level: if dim == 1 { 20 } else { 8 },
            grid: ScanGrid::default_for(dim),
        }
    }
}

fn check_levels(frame: &Frame, levels: usize) -> Result<usize> {
    if levels > frame.max_level() {
        return Err(Error::invalid("levels", format!("frame has levels up to {}", frame.max_level())));
    }
    Ok((levels + 1).min(frame.max_level()))
}

/// `[candidate][gamma][N - 1]` sups over the sampled tiles of level `j`.
fn tsmooth_level(
    frame: &Frame,
    sym: &dyn Symbol,
    j: usize,
    opts: &TsmoothOptions,
    grid: &TensorGrid,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = frame.dim();
    let gammas = orders_up_to(n, opts.max_gamma);
    let mut out = vec![vec![vec![0.0; opts.max_decay + 1]; gammas.len()]; opts.candidates.len()];
    let Some((lo, hi)) = frame.system().degree_range(j, n) else {
        return Ok(out);
    };
    let sigma = SigmaTable::build(sym, n, lo, hi, opts.max_gamma, grid);
    let axes = AxisTables::build(grid, hi, opts.max_gamma);
    let scale = 2f64.powi(j as i32);
    let points: Vec<Vec<f64>> = grid.points().collect();
    let growth: Vec<Vec<f64>> = opts
        .candidates
        .iter()
        .map(|c| {
            let constants = Constants {
                vartheta: opts.vartheta,
                epsilon: c.epsilon,
            };
            points
                .iter()
                .map(|x| e_function(c.epsilon * scale * scale, x, &constants).powf(1.0 - c.kappa))
                .collect()
        })
        .collect();
    let set = frame.level(j)?;
    for index in sample_tiles(set, opts.tiles_per_level, 0.9 * grid.axis(0)[grid.axis(0).len() - 1]) {
        let tile = set.tile(&index);
        let partials = t_partials(frame, &sigma, &axes, &tile, opts.max_gamma, grid)?;
        let inv_sqrt_measure = tile.measure.powf(-0.5);
        for (g, gamma) in gammas.iter().enumerate() {
            let order = gamma.iter().sum::<usize>() as f64;
            let rhs = inv_sqrt_measure * scale.powf(opts.m + order);
            for (flat, v) in partials[g].iter().enumerate() {
                let base = v.norm() / rhs;
                if base == 0.0 {
                    continue;
                }
                let loc = 1.0 + scale * distance(&points[flat], &tile.node);
                for (c, weights) in growth.iter().enumerate() {
                    let r = base / weights[flat];
                    for (big_n, slot) in out[c][g].iter_mut().enumerate() {
                        *slot = slot.max(r * loc.powi(big_n as i32));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Smoothness of `T_sigma phi_R`:
/// `|d^gamma T_sigma phi_R(x)| (1 + 2^j |x - x_R|)^N / (|R|^{-1/2} 2^{j(m + |gamma|)} e_{epsilon 4^j}(x)^{1 - kappa})`
/// over `|gamma| <= max_gamma`, `N <= max_decay`, for every growth
/// candidate; the report keeps the best candidate whose constant is stable.
pub fn verify_tsmooth(frame: &Frame, sym: &dyn Symbol, opts: &TsmoothOptions) -> Result<EstimateReport> {
    let n = frame.dim();
    let top = check_levels(frame, opts.levels)?;
    let base = opts.grid.tensor(n)?;
    let refined = opts.grid.refined().tensor(n)?;
    let gammas = orders_up_to(n, opts.max_gamma);
    let flatten = |t: &Vec<Vec<Vec<f64>>>| -> Vec<f64> { t.iter().map(|c| max_of(&c.iter().map(|g| max_of(g)).collect::<Vec<_>>())).collect() };

    // [level] -> per-candidate sups; level values on the base grid except the extension level.
    let mut per_level: Vec<Vec<f64>> = Vec::new();
    let mut refined_per: Vec<Vec<f64>> = Vec::new();
    let mut detail = vec![vec![vec![0.0f64; opts.max_decay + 1]; gammas.len()]; opts.candidates.len()];
    for j in 0..=top {
        let fine = tsmooth_level(frame, sym, j, opts, &refined)?;
        if j > opts.levels {
            per_level.push(flatten(&fine));
            continue;
        }
        let coarse = tsmooth_level(frame, sym, j, opts, &base)?;
        for (c, rows) in coarse.iter().enumerate() {
            for (g, row) in rows.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    detail[c][g][k] = detail[c][g][k].max(*v);
                }
            }
        }
        per_level.push(flatten(&coarse));
        refined_per.push(flatten(&fine));
    }

    let candidate_report = |c: usize| {
        let values: Vec<f64> = per_level.iter().map(|v| v[c]).collect();
        let mut r = EstimateReport::new("tsmooth", Scan::default());
        r.set_levels(&values, opts.levels + 1);
        r.refined_constant = Some(refined_per.iter().map(|v| v[c]).fold(0.0, f64::max));
        r.finish()
    };
    let reports: Vec<EstimateReport> = (0..opts.candidates.len()).map(candidate_report).collect();
    let best = (0..reports.len())
        .filter(|&c| reports[c].passed)
        .min_by(|&a, &b| reports[a].constant.total_cmp(&reports[b].constant))
        .or_else(|| (0..reports.len()).min_by(|&a, &b| reports[a].constant.total_cmp(&reports[b].constant)))
        .ok_or_else(|| Error::invalid("candidates", "need at least one (kappa, epsilon)"))?;

    let chosen = opts.candidates[best];
    let scan = Scan {
        dim: n,
        levels: (0..=opts.levels).collect(),
        tiles_per_level: opts.tiles_per_level,
        grid: Some(opts.grid),
        notes: vec![
            format!("m = {}, |gamma| <= {}, N <= {}", opts.m, opts.max_gamma, opts.max_decay),
            format!("chosen kappa = {}, epsilon = {}", chosen.kappa, chosen.epsilon),
            if top > opts.levels {
                format!("level {top} scanned on the refined grid for the extension check")
            } else {
                "no extension level available".into()
            },
        ],
    };
    let mut report = reports[best].clone();
    report.scan = scan;
    for (c, cand) in opts.candidates.iter().enumerate() {
        report.push_component(format!("kappa={},epsilon={}", cand.kappa, cand.epsilon), reports[c].constant);
    }
    for (g, gamma) in gammas.iter().enumerate() {
        for big_n in 0..=opts.max_decay {
            report.push_component(format!("gamma={gamma:?},N={big_n}"), detail[best][g][big_n]);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcancOptions {
    pub m: f64,
    pub params: MoleculeParams,
    pub levels: usize,
    pub tiles_per_level: usize,
    pub grid: ScanGrid,
}

impl TcancOptions {
    pub fn new(m: f64, dim: usize) -> Self {
        TcancOptions {
            m,
            params: MoleculeParams::needlet_default(dim),
            levels: 3,
            tiles_per_level: if dim == 1 { 20 } else { 8 },
            grid: ScanGrid::default_for(dim),
        }
    }
}

/// `[tile][gamma]` moments `int (x - x_R)^gamma T_sigma phi_R(x) dx`: exact
/// for multipliers, trapezoid on `grid` otherwise.
fn tcanc_moments(frame: &Frame, sym: &dyn Symbol, j: usize, tiles: &[Tile], orders: &[Vec<usize>], grid: &TensorGrid) -> Result<Vec<Vec<Complex64>>> {
    let n = frame.dim();
    let Some((lo, hi)) = frame.system().degree_range(j, n) else {
        return Ok(vec![vec![Complex64::new(0.0, 0.0); orders.len()]; tiles.len()]);
    };
    if !sym.depends_on_x() {
        let origin = vec![0.0; n];
        let lambdas: Vec<f64> = (0..=hi).map(|k| eigenvalue(k, n)).collect();
        let sig = sym.eval_many(&origin, &lambdas);
        return tiles
            .iter()
            .map(|tile| {
                let f = kernel_section(frame.system(), j, &tile.node, tile.weight.sqrt())?.map_by_degree_complex(|k| sig[k]);
                orders.iter().map(|g| f.moment(g, &tile.node)).collect()
            })
            .collect();
    }
    let sigma = SigmaTable::build(sym, n, lo, hi, 0, grid);
    let axes = AxisTables::build(grid, hi, 0);
    let w = grid.trapezoid_weights();
    let points: Vec<Vec<f64>> = grid.points().collect();
    tiles
        .iter()
        .map(|tile| {
            let values = &t_partials(frame, &sigma, &axes, tile, 0, grid)?[0];
            Ok(orders
                .iter()
                .map(|g| {
                    values
                        .iter()
                        .zip(&points)
                        .zip(&w)
                        .map(|((v, x), w)| {
                            let mono: f64 = x.iter().zip(&tile.node).zip(g).map(|((a, b), &e)| (a - b).powi(e as i32)).product();
                            v * (mono * w)
                        })
                        .sum()
                })
                .collect())
        })
        .collect()
}

/// Cancellation of `T_sigma phi_R`:
/// `|int (x - x_R)^gamma T_sigma phi_R| / (|R|^{-1/2} 2^{j(m - n - |gamma|)} ((1 + |x_R|)/2^j)^{M + theta - |gamma|})`
/// for `|gamma| <= M`.
pub fn verify_tcanc(frame: &Frame, sym: &dyn Symbol, opts: &TcancOptions) -> Result<EstimateReport> {
    let n = frame.dim();
    let p = &opts.params;
    if p.big_m < 0 {
        return Err(Error::Precondition("no moment conditions when M = -1".into()));
    }
    let top = check_levels(frame, opts.levels)?;
    let orders = orders_up_to(n, p.big_m as usize);
    let base = opts.grid.tensor(n)?;
    let refined = opts.grid.refined().tensor(n)?;
    let reach = 0.9 * opts.grid.half_width;

    let ratios = |j: usize, tiles: &[Tile], moments: &[Vec<Complex64>]| -> Vec<f64> {
        let scale = 2f64.powi(j as i32);
        let mut worst = vec![0.0f64; orders.len()];
        for (tile, row) in tiles.iter().zip(moments) {
            let spread = (1.0 + norm(&tile.node)) / scale;
            for (g, gamma) in orders.iter().enumerate() {
                let order = gamma.iter().sum::<usize>() as f64;
                let rhs = tile.measure.powf(-0.5)
                    * scale.powf(opts.m - n as f64 - order)
                    * spread.powf(p.big_m as f64 + p.theta - order);
                worst[g] = worst[g].max(row[g].norm() / rhs);
            }
        }
        worst
    };

    let mut per_level = Vec::new();
    let mut refined_constant: f64 = 0.0;
    let mut by_order = vec![0.0f64; orders.len()];
    let mut quadrature_gap: f64 = 0.0;
    for j in 0..=top {
        let set = frame.level(j)?;
        let tiles: Vec<Tile> = sample_tiles(set, opts.tiles_per_level, reach).iter().map(|i| set.tile(i)).collect();
        let fine = ratios(j, &tiles, &tcanc_moments(frame, sym, j, &tiles, &orders, &refined)?);
        if j > opts.levels {
            per_level.push(max_of(&fine));
            continue;
        }
        let coarse = ratios(j, &tiles, &tcanc_moments(frame, sym, j, &tiles, &orders, &base)?);
        for (g, v) in coarse.iter().enumerate() {
            by_order[g] = by_order[g].max(*v);
            quadrature_gap = quadrature_gap.max(relative_change(*v, fine[g]));
        }
        per_level.push(max_of(&coarse));
        refined_constant = refined_constant.max(max_of(&fine));
    }

    let scan = Scan {
        dim: n,
        levels: (0..=opts.levels).collect(),
        tiles_per_level: opts.tiles_per_level,
        grid: Some(opts.grid),
        notes: vec![
            format!("m = {}, M = {}, theta = {}", opts.m, p.big_m, p.theta),
            if sym.depends_on_x() {
                format!("trapezoid moments; largest per-order change under refinement {quadrature_gap:.3e}")
            } else {
                "exact spectral moments".into()
            },
        ],
    };
    let mut report = EstimateReport::new("tcanc", scan);
    report.set_levels(&per_level, opts.levels + 1);
    report.refined_constant = Some(refined_constant);
    for (gamma, v) in orders.iter().zip(&by_order) {
        report.push_component(format!("gamma={gamma:?}"), *v);
    }
    Ok(report.finish())
}

/// Clause (size) of the molecule conditions for needlets, computed through
/// the kernel derivative tables with `sigma = 1`, against the spectral
/// route. Passes when they agree within `tolerance` (relative).
pub fn needlet_route_cross_check(
    frame: &Frame,
    params: &MoleculeParams,
    levels: usize,
    tiles_per_level: usize,
    grid: ScanGrid,
    tolerance: f64,
) -> Result<EstimateReport> {
    struct One;
    impl Symbol for One {
        fn eval(&self, _x: &[f64], _xi: f64) -> Complex64 {
            Complex64::new(1.0, 0.0)
        }
        fn depends_on_x(&self) -> bool {
            false
        }
    }
    let n = frame.dim();
    check_levels(frame, levels)?;
    let tensor = grid.tensor(n)?;
    let points: Vec<Vec<f64>> = tensor.points().collect();
    let big_n = params.big_n;
    let mut worst_gap: f64 = 0.0;
    let mut kernel_sup: f64 = 0.0;
    let mut spectral_sup: f64 = 0.0;
    for j in 0..=levels {
        let Some((lo, hi)) = frame.system().degree_range(j, n) else {
            continue;
        };
        let sigma = SigmaTable::build(&One, n, lo, hi, big_n, &tensor);
        let axes = AxisTables::build(&tensor, hi, big_n);
        let set = frame.level(j)?;
        let scale = 2f64.powi(j as i32);
        for index in sample_tiles(set, tiles_per_level, 0.9 * grid.half_width) {
            let tile = set.tile(&index);
            let partials = t_partials(frame, &sigma, &axes, &tile, big_n, &tensor)?;
            let mut kernel_route: f64 = 0.0;
            for (gamma, values) in orders_up_to(n, big_n).iter().zip(&partials) {
                let rhs = tile.measure.powf(-0.5) * scale.powi(gamma.iter().sum::<usize>() as i32);
                for (x, v) in points.iter().zip(values) {
                    let w = (1.0 + scale * distance(x, &tile.node)).powf(params.mu)
                        * (1.0 + norm(x) / scale).powf(big_n as f64 + params.delta);
                    kernel_route = kernel_route.max(v.norm() * w / rhs);
                }
            }
            let needlet = frame.needlet(j, &index)?;
            let spectral = molecule_clauses(needlet.spectral(), &tile, params, &tensor)?[0];
            worst_gap = worst_gap.max(relative_change(kernel_route, spectral));
            kernel_sup = kernel_sup.max(kernel_route);
            spectral_sup = spectral_sup.max(spectral);
        }
    }
    let scan = Scan {
        dim: n,
        levels: (0..=levels).collect(),
        tiles_per_level,
        grid: Some(grid),
        notes: vec!["size clause through kernel derivative tables vs spectral partials".into()],
    };
    let mut report = EstimateReport::new("needlet-routes", scan);
    report.constant = worst_gap;
    report.push_component("kernel_route", kernel_sup);
    report.push_component("spectral_route", spectral_sup);
    report.push_check(
        "agreement",
        worst_gap <= tolerance,
        format!("largest relative gap {worst_gap:.3e} against {tolerance}"),
    );
    report.passed = report.checks.iter().all(|c| c.passed);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessOptions {
    /// Order `m`: the ratio is `||T f||_{A_alpha} / ||f||_{A_{alpha + m}}`.
    pub m: f64,
    pub spaces: Vec<SpaceParams>,
    pub family_size: usize,
    /// Degree of the random inputs.
    pub degree: usize,
    /// Degree of the reprojection of `T_sigma f`.
    pub output_degree: usize,
    pub seed: u64,
    /// Reprojection residuals above this are flagged.
    pub residual_threshold: f64,
}

impl BoundednessOptions {
    pub fn new(m: f64, spaces: Vec<SpaceParams>) -> Self {
        BoundednessOptions {
            m,
            spaces,
            family_size: 20,
            degree: 16,
            output_degree: 32,
            seed: 7,
            residual_threshold: 1e-6,
        }
    }
}

fn random_input(dim: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<SpectralFunction> {
    let coeffs: Vec<(MultiIndex, Complex64)> = MultiIndex::up_to_degree(dim, degree)
        .into_iter()
        .map(|xi| {
            // Decaying in degree so that the family spans several levels evenly.
            let damp = 1.0 / (1.0 + xi.degree() as f64);
            (xi, Complex64::new(rng.gen_range(-1.0..1.0) * damp, 0.0))
        })
        .collect();
    SpectralFunction::from_coeffs(dim, degree, coeffs)
}

/// `T_sigma f` as a spectral function of degree `k_prime` with the
/// reprojection residual (zero for multipliers).
fn apply_to(sym: &dyn Symbol, f: &SpectralFunction, k_prime: usize, threshold: f64) -> Result<(SpectralFunction, f64)> {
    if !sym.depends_on_x() {
        return Ok((apply_multiplier(sym, f)?, 0.0));
    }
    let grid = gauss_hermite_grid(f.dim(), reprojection_points(f.max_degree(), k_prime))?;
    let g = apply_pseudomultiplier(sym, f, &grid)?;
    let r = reproject(&g, k_prime, threshold)?;
    Ok((r.function, r.residual))
}

/// Ratios `||T_sigma f||_{A_alpha} / ||f||_{A_{alpha + m}}` over a seeded
/// random family, for each space. The constant is the sup over the first
/// half of the family; the whole family gives the extension check and a
/// larger reprojection degree gives the refinement check.
pub fn verify_boundedness(frame: &Frame, sym: &dyn Symbol, opts: &BoundednessOptions) -> Result<EstimateReport> {
    let n = frame.dim();
    let sys = frame.system();
    if opts.family_size < 2 {
        return Err(Error::invalid("family_size", "need at least 2 inputs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let inputs: Vec<SpectralFunction> =
        (0..opts.family_size).map(|_| random_input(n, opts.degree, &mut rng)).collect::<Result<_>>()?;
    let finer_degree = opts.output_degree + opts.output_degree / 2;
    let outputs: Vec<((SpectralFunction, f64), (SpectralFunction, f64))> = inputs
        .par_iter()
        .map(|f| {
            Ok((
                apply_to(sym, f, opts.output_degree, opts.residual_threshold)?,
                apply_to(sym, f, finer_degree, opts.residual_threshold)?,
            ))
        })
        .collect::<Result<_>>()?;
    let half = opts.family_size / 2;
    let mut first_half: f64 = 0.0;
    let mut whole: f64 = 0.0;
    let mut refined: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut by_space = Vec::new();
    for space in &opts.spaces {
        let shifted = SpaceParams { alpha: space.alpha + opts.m, ..*space };
        let mut worst: f64 = 0.0;
        for (i, (f, ((g, res), (g_fine, _)))) in inputs.iter().zip(&outputs).enumerate() {
            let denom = distribution_norm(sys, f, &shifted, None, None)?.value;
            let ratio = distribution_norm(sys, g, space, None, None)?.value / denom;
            let ratio_fine = distribution_norm(sys, g_fine, space, None, None)?.value / denom;
            residual = residual.max(*res);
            worst = worst.max(ratio);
            whole = whole.max(ratio);
            if i < half {
                first_half = first_half.max(ratio);
                refined = refined.max(ratio_fine);
            }
        }
        by_space.push((space, worst));
    }
    let scan = Scan {
        dim: n,
        levels: Vec::new(),
        tiles_per_level: 0,
        grid: None,
        notes: vec![
            format!(
                "{} random inputs of degree {} (seed {}), T f reprojected to degree {} and {finer_degree}",
                opts.family_size, opts.degree, opts.seed, opts.output_degree
            ),
            format!(
                "largest reprojection residual {residual:.3e}{}",
                if residual > opts.residual_threshold { " (above threshold)" } else { "" }
            ),
        ],
    };
    let mut report = EstimateReport::new("boundedness", scan);
    report.constant = first_half;
    report.extended_constant = Some(whole);
    report.refined_constant = Some(refined);
    for (space, worst) in by_space {
        report.push_component(
            format!("{:?}(alpha={},p={},q={})", space.family, space.alpha, space.p, space.q),
            worst,
        );
    }
    report.push_component("reprojection_residual", residual);
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{lp_moment, AdmissibleSystem};
    use crate::pseudomult::hermite_multiplier;
    use crate::tiles::TileConfig;

    fn frame(dim: usize, levels: usize) -> Frame {
        Frame::new(AdmissibleSystem::default_system(), TileConfig::new(dim, levels).unwrap()).unwrap()
    }

    struct Pointwise<F>(F);
    impl<F: Fn(&[f64], f64) -> Complex64 + Send + Sync> Symbol for Pointwise<F> {
        fn eval(&self, x: &[f64], xi: f64) -> Complex64 {
            (self.0)(x, xi)
        }
    }

    #[test]
    fn identity_symbol_reproduces_needlet_derivatives() {
        let fr = frame(1, 2);
        let grid = TensorGrid::uniform(1, 6.0, 61).unwrap();
        let one = Pointwise(|_: &[f64], _| Complex64::new(1.0, 0.0));
        let (lo, hi) = fr.system().degree_range(2, 1).unwrap();
        let sigma = SigmaTable::build(&one, 1, lo, hi, 2, &grid);
        let axes = AxisTables::build(&grid, hi, 2);
        let tile = fr.level(2).unwrap().tile(&[20]);
        let partials = t_partials(&fr, &sigma, &axes, &tile, 2, &grid).unwrap();
        let needlet = fr.needlet(2, &[20]).unwrap();
        for order in 0..=2 {
            let direct = needlet.spectral().partial(&[order]).unwrap().eval_tensor(grid.axes()).unwrap();
            for (a, b) in partials[order].iter().zip(&direct) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "order {order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn leibniz_with_moving_symbol() {
        // sigma(x, xi) = 1 + x^2 multiplies phi_R by (1 + x^2).
        let fr = frame(1, 1);
        let grid = TensorGrid::uniform(1, 5.0, 21).unwrap();
        let sym = Pointwise(|x: &[f64], _| Complex64::new(1.0 + x[0] * x[0], 0.0));
        let (lo, hi) = fr.system().degree_range(1, 1).unwrap();
        let sigma = SigmaTable::build(&sym, 1, lo, hi, 1, &grid);
        let axes = AxisTables::build(&grid, hi, 1);
        let tile = fr.level(1).unwrap().tile(&[5]);
        let d = t_partials(&fr, &sigma, &axes, &tile, 1, &grid).unwrap();
        let phi = fr.needlet(1, &[5]).unwrap();
        let v = phi.spectral().eval_tensor(grid.axes()).unwrap();
        let dv = phi.spectral().partial(&[1]).unwrap().eval_tensor(grid.axes()).unwrap();
        for (i, x) in grid.axis(0).iter().enumerate() {
            let expect = dv[i] * (1.0 + x * x) + v[i] * (2.0 * x);
            assert!((d[1][i] - expect).norm() < 1e-6 * (1.0 + expect.norm()));
        }
    }

    #[test]
    fn trapezoid_moments_of_identity_match_kernel_moments() {
        let fr = frame(1, 2);
        let grid = ScanGrid::default_for(1).tensor(1).unwrap();
        let one = Pointwise(|_: &[f64], _| Complex64::new(1.0, 0.0));
        let set = fr.level(2).unwrap();
        let tile = set.tile(&[18]);
        let orders = vec![vec![0], vec![1], vec![2]];
        let m = tcanc_moments(&fr, &one, 2, std::slice::from_ref(&tile), &orders, &grid).unwrap();
        for (g, gamma) in orders.iter().enumerate() {
            let sign = if gamma[0] % 2 == 0 { 1.0 } else { -1.0 };
            let expect = tile.weight.sqrt() * sign * lp_moment(fr.system(), 2, &tile.node, gamma).unwrap();
            assert!((m[0][g].re - expect).abs() < 1e-8, "{gamma:?}: {} vs {expect}", m[0][g]);
        }
    }

    #[test]
    fn multiplier_moments_are_exact_and_agree_with_grid() {
        let fr = frame(1, 2);
        let grid = ScanGrid::default_for(1).tensor(1).unwrap();
        let mult = hermite_multiplier(|l: f64| Complex64::new(1.0 / (1.0 + l), 0.0));
        let moving = Pointwise(|_: &[f64], l: f64| Complex64::new(1.0 / (1.0 + l), 0.0));
        let tile = fr.level(1).unwrap().tile(&[7]);
        let orders = vec![vec![0], vec![1]];
        let a = tcanc_moments(&fr, &mult, 1, std::slice::from_ref(&tile), &orders, &grid).unwrap();
        let b = tcanc_moments(&fr, &moving, 1, std::slice::from_ref(&tile), &orders, &grid).unwrap();
        for g in 0..2 {
            assert!((a[0][g] - b[0][g]).norm() < 1e-8);
        }
    }

    #[test]
    fn cross_check_agrees() {
        let fr = frame(1, 3);
        let params = MoleculeParams::needlet_default(1);
        let grid = ScanGrid { half_width: 10.0, points: 401 };
        let r = needlet_route_cross_check(&fr, &params, 2, 5, grid, 0.05).unwrap();
        assert!(r.passed, "{:?}", r.checks);
        assert!(r.constant < 1e-6);
    }

    #[test]
    fn identity_is_bounded_with_constant_one() {
        let fr = frame(1, 6);
        let one = hermite_multiplier(|_| Complex64::new(1.0, 0.0));
        let mut opts = BoundednessOptions::new(0.0, vec![SpaceParams::besov(0.5, 2.0, 2.0).unwrap()]);
        opts.family_size = 6;
        let r = verify_boundedness(&fr, &one, &opts).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12, "{}", r.constant);
        assert!(r.passed);
    }
}
