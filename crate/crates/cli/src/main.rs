//! `hermite`: build tiles and windows, analyse and synthesise with needlets,
//! compute norms, apply symbols and run the verification suites.
//!
//! Exit status: 0 on success, 1 on invalid input or a violated
//! precondition, 2 when a verification suite fails its criterion.

mod config;
mod output;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hermite_frames::frames::{CoefficientSequence, Frame};
use hermite_frames::hermite::{eigenvalue, SpectralFunction, TensorGrid};
use hermite_frames::lp::AdmissibleSystem;
use hermite_frames::norms::{distribution_norm, lp_norm, QuadratureBox, SpaceParams};
use hermite_frames::pseudomult::{apply_pseudomultiplier, build_symbol, linearize_nonlinearity, Nonlinearity, SymbolDescriptor};
use hermite_frames::tiles::{build_level, TileConfig};
use hermite_frames::verify::{run_suite, ScanGrid, SuiteConfig, SUITES};
use hermite_frames::{Complex64, Error, Result};
use serde::Serialize;

use config::{parse_grid, read, write, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hermite", version, about = "Hermite needlets, function-space norms and pseudo-multipliers")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for `verify` (also settable through HERMITE_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    delta_star: Option<f64>,
    /// Highest level used.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Evaluation grid as HALF_WIDTH,POINTS.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<ScanGrid>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nodes and tiles of one level as CSV: level,node_index,x1..xn,tau,measure,lo1,hi1,...
    Nodes {
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Window values phi_j(sqrt(lambda_k)) and psi_j(sqrt(lambda_k)) as CSV.
    Windows {
        /// Largest degree k tabulated (default: the top of the last window).
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One needlet, as grid samples (CSV) or its Hermite expansion (JSON).
    Needlet {
        #[arg(long)]
        level: usize,
        /// Tile index, comma separated (one entry per axis).
        #[arg(long, value_delimiter = ',')]
        index: Vec<usize>,
        #[arg(long)]
        dual: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Needlet coefficients of a Hermite expansion.
    Analyze {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum of dual needlets weighted by a coefficient sequence.
    Synthesize {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Besov (B), Triebel-Lizorkin (F) or Lebesgue (L) norm.
    Norm {
        #[arg(long, value_enum)]
        space: Space,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Samples T_sigma f on a grid (CSV).
    Apply {
        /// Symbol descriptor JSON.
        #[arg(long)]
        symbol: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// T_{sigma_f} f for the symbol that linearizes H(f); prints the sup error against H(f).
    Linearize {
        /// Nonlinearity in u, e.g. "u^2" or "sin(u)".
        #[arg(long)]
        h: String,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        t_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a verification suite ("all" runs every suite) and writes JSON and CSV reports.
    Verify {
        suite: Option<String>,
        #[arg(long)]
        tiles: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Space {
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "F", alias = "f")]
    F,
    #[value(name = "L", alias = "l")]
    L,
}

/// What a command reports back to `main`.
enum Outcome {
    Done,
    SuiteFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::SuiteFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        dim: cli.dim,
        max_level: cli.levels,
        delta_star: cli.delta_star,
        grid: cli.grid,
        output_dir: cli.out_dir.clone(),
        seed: cli.seed,
        threads: cli.threads,
        ..RunConfig::default()
    };
    let cfg = file.overlay(flags);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    }
    let explicit_dim = cfg.dim;
    let mut cfg = cfg.resolved()?;
    match cli.command {
        Command::Nodes { level, out } => {
            let tiles = tile_config(&cfg, level)?;
            emit(out.as_deref(), &nodes_csv(level, &tiles)?)?;
        }
        Command::Windows { max_degree, out } => {
            let levels = cfg.max_level.unwrap_or(4);
            let sys = system(&cfg)?;
            emit(out.as_deref(), &windows_csv(&sys, levels, max_degree, cfg.dim())?)?;
        }
        Command::Needlet {
            level,
            index,
            dual,
            format,
            out,
        } => {
            let frame = Frame::new(system(&cfg)?, tile_config(&cfg, level)?)?;
            let needlet = if dual { frame.dual_needlet(level, &index)? } else { frame.needlet(level, &index)? };
            let text = match format {
                Format::Json => output::reformat(&needlet.spectral().to_json()?)?,
                Format::Csv => {
                    let grid = cfg.grid.unwrap_or_else(|| ScanGrid::default_for(cfg.dim()));
                    needlet.spectral().eval_grid(&grid.tensor(cfg.dim())?)?.to_csv()
                }
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Analyze { input, out } => {
            cfg.input = input.or(cfg.input);
            let f = load_function(&cfg, explicit_dim)?;
            cfg.dim = Some(f.dim());
            let levels = cfg.max_level.unwrap_or_else(|| covering_level(&f));
            cfg.max_level = Some(levels);
            let frame = Frame::new(system(&cfg)?, tile_config(&cfg, levels)?)?;
            emit(out.as_deref(), &output::reformat(&frame.analyze(&f)?.to_json()?)?)?;
        }
        Command::Synthesize { input, out } => {
            cfg.input = input.or(cfg.input);
            let path = required(&cfg.input, "--in")?;
            let text = read(&path)?;
            let dim = sequence_dim(&text).or(explicit_dim).unwrap_or(1);
            let s = CoefficientSequence::from_json(&text, dim, &path.display().to_string())?;
            cfg.dim = Some(dim);
            let frame = Frame::new(system(&cfg)?, tile_config(&cfg, s.max_level())?)?;
            emit(out.as_deref(), &output::reformat(&frame.synthesize(&s)?.to_json()?)?)?;
        }
        Command::Norm {
            space,
            alpha,
            p,
            q,
            input,
        } => {
            cfg.input = input.or(cfg.input);
            let f = load_function(&cfg, explicit_dim)?;
            cfg.dim = Some(f.dim());
            let report = match space {
                Space::L => lp_norm(&f, p, cfg.quadrature_box)?,
                Space::B | Space::F => {
                    let params = if matches!(space, Space::B) {
                        SpaceParams::besov(alpha, p, q)?
                    } else {
                        SpaceParams::triebel(alpha, p, q)?
                    };
                    distribution_norm(&system(&cfg)?, &f, &params, cfg.max_level, cfg.quadrature_box)?
                }
            };
            #[derive(Serialize)]
            struct NormOutput<'a> {
                #[serde(flatten)]
                report: &'a hermite_frames::norms::NormReport,
                config: &'a RunConfig,
            }
            print!("{}", output::to_json(&NormOutput { report: &report, config: &cfg })?);
        }
        Command::Apply { symbol, input, out } => {
            cfg.input = input.or(cfg.input);
            cfg.symbol = symbol.or(cfg.symbol);
            let f = load_function(&cfg, explicit_dim)?;
            cfg.dim = Some(f.dim());
            let path = required(&cfg.symbol, "--symbol")?;
            let desc: SymbolDescriptor = serde_json::from_str(&read(&path)?).map_err(|source| Error::Json {
                context: path.display().to_string(),
                source,
            })?;
            let sym = build_symbol(&desc, f.dim(), Some(&f))?;
            let grid = output_grid(&cfg, &f)?;
            emit(out.as_deref(), &apply_pseudomultiplier(sym.as_ref(), &f, &grid)?.to_csv())?;
        }
        Command::Linearize { h, input, t_points, out } => {
            cfg.input = input.or(cfg.input);
            let f = load_function(&cfg, explicit_dim)?;
            cfg.dim = Some(f.dim());
            let nl = Nonlinearity::parse(&h)?;
            let sym = linearize_nonlinearity(&nl, &f, &system(&cfg)?, cfg.max_level, t_points)?;
            let grid = output_grid(&cfg, &f)?;
            let g = apply_pseudomultiplier(&sym, &f, &grid)?;
            let fv = f.eval_grid(&grid)?;
            let error = g
                .samples
                .iter()
                .zip(&fv.samples)
                .map(|(a, b)| (a - Complex64::new(nl.value(b.re), 0.0)).norm())
                .fold(0.0, f64::max);
            emit(out.as_deref(), &g.to_csv())?;
            let summary = serde_json::json!({ "h": h, "t_points": t_points, "sup_error": error, "config": &cfg });
            if out.is_some() {
                print!("{}", output::to_json(&summary)?);
            } else {
                eprint!("{}", output::to_json(&summary)?);
            }
        }
        Command::Verify { suite, tiles } => {
            cfg.tiles_per_level = tiles.or(cfg.tiles_per_level);
            let names: Vec<String> = match suite.as_deref() {
                Some("all") => SUITES.iter().map(|s| s.to_string()).collect(),
                Some(name) => vec![name.to_string()],
                None if !cfg.suites.is_empty() => cfg.suites.clone(),
                None => return Err(Error::Precondition(format!("name a suite: one of {SUITES:?} or all"))),
            };
            cfg.suites = names.clone();
            return verify(&cfg, &names);
        }
    }
    Ok(Outcome::Done)
}

fn verify(cfg: &RunConfig, names: &[String]) -> Result<Outcome> {
    let dir = cfg.output_dir();
    let suite_cfg = SuiteConfig {
        dim: cfg.dim(),
        levels: cfg.max_level,
        tiles_per_level: cfg.tiles_per_level,
        grid: cfg.grid,
        seed: cfg.seed(),
        delta_star: cfg.delta_star,
    };
    let mut all_passed = true;
    for name in names {
        if cfg.dim() != 1 && name == "linearize" {
            println!("{name}: skipped (one dimension only)");
            continue;
        }
        let outcome = run_suite(name, &suite_cfg)?;
        #[derive(Serialize)]
        struct Document<'a> {
            config: &'a RunConfig,
            outcome: &'a hermite_frames::verify::SuiteOutcome,
        }
        write(&dir.join(format!("{name}.json")), &output::to_json(&Document { config: cfg, outcome: &outcome })?)?;
        for report in &outcome.reports {
            for series in &report.series {
                write(&dir.join(format!("{}_{}.csv", report.id, series.name)), &series.to_csv())?;
            }
            println!("{}", report.summary());
        }
        println!("{name}: {}", if outcome.passed { "PASS" } else { "FAIL" });
        all_passed &= outcome.passed;
    }
    Ok(if all_passed { Outcome::Done } else { Outcome::SuiteFailed })
}

fn system(cfg: &RunConfig) -> Result<AdmissibleSystem> {
    AdmissibleSystem::from_descriptor(&cfg.system())
}

fn tile_config(cfg: &RunConfig, levels: usize) -> Result<TileConfig> {
    let tiles = TileConfig::new(cfg.dim(), levels)?;
    match cfg.delta_star {
        Some(d) => tiles.with_delta_star(d),
        None => Ok(tiles),
    }
}

fn required(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    path.clone().ok_or_else(|| Error::Precondition(format!("{flag} is required")))
}

/// Reads `--in`; a dimension given by flag or file must match the function's.
fn load_function(cfg: &RunConfig, explicit_dim: Option<usize>) -> Result<SpectralFunction> {
    let path = required(&cfg.input, "--in")?;
    let f = SpectralFunction::from_json(&read(&path)?, &path.display().to_string())?;
    if let Some(n) = explicit_dim {
        if n != f.dim() {
            return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
        }
    }
    Ok(f)
}

/// Smallest `J` with `lambda_K <= 4^(J-1)`, where the windows up to `J` sum to one.
fn covering_level(f: &SpectralFunction) -> usize {
    let lambda = eigenvalue(f.occupied_degree().unwrap_or(0), f.dim());
    let mut j = 1;
    while 4f64.powi(j as i32 - 1) < lambda {
        j += 1;
    }
    j
}

/// Dimension read off the first node index of a coefficient sequence.
fn sequence_dim(text: &str) -> Option<usize> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    v["levels"].as_array()?.iter().find_map(|l| Some(l["entries"].as_array()?.first()?["node"].as_array()?.len()))
}

fn output_grid(cfg: &RunConfig, f: &SpectralFunction) -> Result<TensorGrid> {
    match cfg.grid {
        Some(g) => g.tensor(f.dim()),
        None => QuadratureBox::for_degree(f.max_degree(), f.dim()).grid(f.dim()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn nodes_csv(level: usize, cfg: &TileConfig) -> Result<String> {
    let set = build_level(level, cfg)?;
    let n = cfg.dim;
    let mut out = String::from("level,node_index");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",tau,measure");
    for i in 1..=n {
        let _ = write!(out, ",lo{i},hi{i}");
    }
    out.push('\n');
    for (flat, tile) in set.tiles().enumerate() {
        let _ = write!(out, "{level},{flat}");
        for x in &tile.node {
            let _ = write!(out, ",{x:.16e}");
        }
        let _ = write!(out, ",{:.16e},{:.16e}", tile.weight, tile.measure);
        for (lo, hi) in tile.lo.iter().zip(&tile.hi) {
            let _ = write!(out, ",{lo:.16e},{hi:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn windows_csv(sys: &AdmissibleSystem, levels: usize, max_degree: Option<usize>, dim: usize) -> Result<String> {
    // phi_J vanishes beyond sqrt(lambda) = 2^J.
    let top = max_degree.unwrap_or_else(|| {
        let mut k = 0;
        while eigenvalue(k + 1, dim).sqrt() <= 2f64.powi(levels as i32) {
            k += 1;
        }
        k
    });
    let mut out = String::from("j,k,lambda,phi,psi\n");
    for j in 0..=levels {
        for k in 0..=top {
            let t = eigenvalue(k, dim).sqrt();
            let _ = writeln!(out, "{j},{k},{:.16e},{:.16e},{:.16e}", eigenvalue(k, dim), sys.phi_j(j, t), sys.psi_j(j, t));
        }
    }
    Ok(out)
}
