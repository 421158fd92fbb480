//! Synthesis ratio `||sum_R s_R psi_R||_A / ||s||_a` over random sparse
//! sequences of central tiles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{max_of, relative_change, Check, EstimateReport, MoleculeParams, Scan, Series};
use crate::error::{Error, Result};
use crate::frames::{CoefficientSequence, Frame};
use crate::norms::{distribution_norm, sequence_norm, QuadratureBox, SpaceParams};

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// The parameter conditions of the synthesis estimate, plus the two weaker
/// inequalities `N + delta > alpha` and `n + M + theta + alpha > n_pq` that
/// can replace the first four.
pub fn synthesis_conditions(params: &MoleculeParams, space: &SpaceParams, dim: usize) -> Vec<Check> {
    let n = dim as f64;
    let npq = space.n_pq(dim);
    let alpha = space.alpha;
    let m = params.big_m as f64;
    let big_n = params.big_n as f64;
    let gap = npq - n - alpha;
    let theta_floor = if gap >= 0.0 { frac(npq).max(frac(npq - alpha)) } else { 0.0 };
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };
    let m_floor = gap.floor().max(-1.0);
    push("M", m >= m_floor, format!("M = {m} >= {m_floor}"));
    push("theta", params.theta > theta_floor, format!("theta = {} > {theta_floor}", params.theta));
    let n_floor = alpha.floor().max(0.0);
    push("N", big_n >= n_floor, format!("N = {big_n} >= {n_floor}"));
    let delta_ok = if alpha >= 0.0 { params.delta > frac(alpha) } else { params.delta >= 0.0 };
    push("delta", delta_ok, format!("delta = {} against alpha = {alpha}", params.delta));
    let mu_floor = npq.max(n + m + params.theta);
    push("mu", params.mu > mu_floor, format!("mu = {} > {mu_floor}", params.mu));
    push(
        "weak_decay",
        big_n + params.delta > alpha,
        format!("N + delta = {} > alpha = {alpha}", big_n + params.delta),
    );
    push(
        "weak_cancellation",
        n + m + params.theta + alpha > npq,
        format!("n + M + theta + alpha = {} > n_pq = {npq}", n + m + params.theta + alpha),
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub params: MoleculeParams,
    pub space: SpaceParams,
    pub sequences: usize,
    pub max_terms: usize,
    /// Sequences live on levels `0..=levels`; the extension family reaches `levels + 1`.
    pub levels: usize,
    /// Only tiles with `|x_R|_inf <= reach` are used.
    pub reach: f64,
    pub seed: u64,
}

impl SynthesisOptions {
    /// Needlet parameters, `F^{2,2}_0`, 100 sequences of up to 8 terms on levels up to 3.
    pub fn new(dim: usize) -> Self {
        SynthesisOptions {
            params: MoleculeParams::needlet_default(dim),
            space: SpaceParams::triebel(0.0, 2.0, 2.0).expect("valid exponents"),
            sequences: 100,
            max_terms: 8,
            levels: 3,
            reach: 3.0,
            seed: 11,
        }
    }
}

fn central_tiles(frame: &Frame, j: usize, reach: f64) -> Result<Vec<Vec<usize>>> {
    let set = frame.level(j)?;
    Ok((0..set.len())
        .map(|flat| set.unflatten(flat))
        .filter(|idx| set.node(idx).iter().all(|t| t.abs() <= reach))
        .collect())
}

fn random_sequence(frame: &Frame, top: usize, opts: &SynthesisOptions, pools: &[Vec<Vec<usize>>], rng: &mut ChaCha8Rng) -> Result<CoefficientSequence> {
    let mut s = CoefficientSequence::zero(frame.dim(), frame.max_level());
    let terms = rng.gen_range(1..=opts.max_terms);
    for _ in 0..terms {
        let j = rng.gen_range(0..=top);
        if pools[j].is_empty() {
            continue;
        }
        let idx = pools[j][rng.gen_range(0..pools[j].len())].clone();
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        s.insert(j, idx, c)?;
    }
    Ok(s)
}

/// `(ratio on the default box, ratio on the refined box)`, `None` for a zero sequence.
fn ratio(frame: &Frame, s: &CoefficientSequence, space: &SpaceParams) -> Result<Option<(f64, f64)>> {
    let denom = sequence_norm(frame, s, space)?;
    if denom == 0.0 {
        return Ok(None);
    }
    let f = frame.synthesize(s)?;
    if f.is_empty() {
        return Ok(Some((0.0, 0.0)));
    }
    let k = f.occupied_degree().unwrap_or(0);
    let bx = QuadratureBox::for_exponent(k, frame.dim(), space.p);
    let fine = QuadratureBox {
        half_width: bx.half_width,
        points: 2 * bx.points - 1,
    };
    let a = distribution_norm(frame.system(), &f, space, None, Some(bx))?.value;
    let b = distribution_norm(frame.system(), &f, space, None, Some(fine))?.value;
    Ok(Some((a / denom, b / denom)))
}

/// Synthesis ratio for the dual needlets. The constant is the sup over
/// `sequences` random sparse sequences on levels `<= levels`; a second family
/// reaching level `levels + 1` gives the extension check and a box with
/// halved spacing the refinement check. Also reports the single-tile ratios.
pub fn verify_synthesis(frame: &Frame, opts: &SynthesisOptions) -> Result<EstimateReport> {
    let n = frame.dim();
    let conditions = synthesis_conditions(&opts.params, &opts.space, n);
    let holds = |name: &str| conditions.iter().any(|c| c.name == name && c.passed);
    let strong = ["M", "theta", "N", "delta"].iter().all(|c| holds(c));
    let weak = holds("weak_decay") && holds("weak_cancellation");
    if !holds("mu") || !(strong || weak) {
        let failed: Vec<&str> = conditions.iter().filter(|c| !c.passed).map(|c| c.detail.as_str()).collect();
        return Err(Error::Precondition(format!("synthesis parameters violate: {}", failed.join("; "))));
    }
    if opts.levels > frame.max_level() {
        return Err(Error::invalid("levels", format!("frame has levels up to {}", frame.max_level())));
    }
    let top = (opts.levels + 1).min(frame.max_level());
    let pools: Vec<Vec<Vec<usize>>> = (0..=top).map(|j| central_tiles(frame, j, opts.reach)).collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let base: Vec<CoefficientSequence> =
        (0..opts.sequences).map(|_| random_sequence(frame, opts.levels, opts, &pools, &mut rng)).collect::<Result<_>>()?;
    let extra: Vec<CoefficientSequence> = if top > opts.levels {
        (0..opts.sequences / 2).map(|_| random_sequence(frame, top, opts, &pools, &mut rng)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let measure = |family: &[CoefficientSequence]| -> Result<Vec<(f64, f64)>> {
        Ok(family
            .par_iter()
            .map(|s| ratio(frame, s, &opts.space))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect())
    };
    let base_ratios = measure(&base)?;
    let extra_ratios = measure(&extra)?;
    let constant = base_ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    let refined = base_ratios.iter().map(|r| r.1).fold(0.0, f64::max);

    // Single tiles, one per level near the origin.
    let mut singles = Vec::new();
    for (j, pool) in pools.iter().enumerate().take(opts.levels + 1) {
        if let Some(idx) = pool.get(pool.len() / 2) {
            let mut s = CoefficientSequence::zero(n, frame.max_level());
            s.insert(j, idx.clone(), Complex64::new(1.0, 0.0))?;
            if let Some((r, _)) = ratio(frame, &s, &opts.space)? {
                singles.push((j as f64, r));
            }
        }
    }

    let scan = Scan {
        dim: n,
        levels: (0..=opts.levels).collect(),
        tiles_per_level: pools.iter().map(Vec::len).max().unwrap_or(0),
        grid: None,
        notes: vec![
            format!(
                "{} sequences (seed {}) of up to {} terms on tiles with |x_R| <= {}; {} zero sequences skipped",
                opts.sequences,
                opts.seed,
                opts.max_terms,
                opts.reach,
                opts.sequences - base_ratios.len()
            ),
            format!("space {:?}, parameters {:?}", opts.space, opts.params),
            if strong {
                "all parameter conditions hold".into()
            } else {
                "only the weakened parameter conditions hold".into()
            },
        ],
    };
    let mut report = EstimateReport::new("synthesis", scan);
    report.constant = constant;
    report.refined_constant = Some(refined);
    if !extra_ratios.is_empty() {
        report.extended_constant = Some(constant.max(extra_ratios.iter().map(|r| r.0).fold(0.0, f64::max)));
    }
    report.push_component("single_tile", max_of(&singles.iter().map(|p| p.1).collect::<Vec<_>>()));
    let spread = base_ratios.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    report.push_component("smallest_ratio", spread);
    report.push_component("refinement_change", relative_change(constant, refined));
    report.series.push(Series {
        name: "single_tile".into(),
        x_label: "level".into(),
        y_label: "ratio".into(),
        points: singles,
    });
    report.checks.extend(conditions);
    Ok(report.finish())
}
