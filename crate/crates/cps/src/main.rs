//! Batch front door: config ingestion, subcommand dispatch, deterministic
//! seeding, CSV emission and space-time SVG rendering.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime precondition
//! error, 4 failed verification check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use cps::analysis::{estimate_critical, survival_sweep};
use cps::config::{resolve, write_atomic, RawConfig, RunConfig};
use cps::coupling;
use cps::duality::run_duality_suite;
use cps::dynamics::{simulate_direct, write_states_rle, write_trajectory_csv};
use cps::error::CpsError;
use cps::oracle::generator_matrix;
use cps::rates::EffectiveRates;
use cps::render::{render_spacetime_svg, SvgStyle};
use cps::rng::{streams, StreamRng};
use cps::sites::SiteSet;

#[derive(Parser)]
#[command(
    name = "cps",
    version,
    about = "Contact process with switching: simulation and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta_a: Option<f64>,
    #[arg(long)]
    delta_d: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Ring length (one-dimensional periodic lattice).
    #[arg(long = "L")]
    l: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u32>,
    #[arg(long)]
    instances: Option<u32>,
    #[arg(long)]
    out: Option<String>,
    /// Render style: lines | density.
    #[arg(long)]
    style: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and emit its summary CSV.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        /// Also dump run-length-encoded full states to this path.
        #[arg(long)]
        states_out: Option<PathBuf>,
        /// Also render a space-time SVG to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Survival-ratio sweep over an infection-rate grid.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Grid values, e.g. --grid 6,6.5,7,7.5,8.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Horizons, e.g. --horizons 2500,5000,10000.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<f64>>,
    },
    /// Print the closed-form comparison rates for the configured parameters.
    Bounds {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the pathwise coupling suites (zero-violation gates).
    CoupleCheck {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the pathwise duality-relation suite.
    DualCheck {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte Carlo marginal against the exact small-lattice solver.
    OracleCheck {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Render a space-time diagram of one simulated trajectory.
    Render {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Bisection bracket for the critical infection rate.
    Critical {
        #[command(flatten)]
        overrides: Overrides,
        /// Bracket endpoints, e.g. --bracket 6,9.
        #[arg(long, value_delimiter = ',')]
        bracket: Option<Vec<f64>>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 12)]
        max_iters: u32,
        #[arg(long, default_value_t = 0.25)]
        width_tol: f64,
    },
}

enum AppError {
    Config(String),
    Runtime(String),
    Check(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Runtime(_) => 3,
            AppError::Check(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Config(m) | AppError::Runtime(m) | AppError::Check(m) => m,
        }
    }
}

fn runtime(e: CpsError) -> AppError {
    AppError::Runtime(e.to_string())
}

fn load(overrides: &Overrides) -> Result<RunConfig, AppError> {
    let base = match &overrides.config {
        Some(path) => RawConfig::from_file(path).map_err(|e| AppError::Config(e.to_string()))?,
        None => RawConfig::default(),
    };
    let style = match overrides.style.as_deref() {
        None => None,
        Some("lines") => Some(SvgStyle::Lines),
        Some("density") => Some(SvgStyle::Density),
        Some(other) => {
            return Err(AppError::Config(format!(
                "style must be \"lines\" or \"density\", got \"{other}\""
            )))
        }
    };
    let flags = RawConfig {
        preset: overrides.preset.clone(),
        lambda: overrides.lambda,
        delta: overrides.delta,
        delta_a: overrides.delta_a,
        delta_d: overrides.delta_d,
        sigma: overrides.sigma,
        rho: overrides.rho,
        l: overrides.l,
        t: overrides.t,
        seed: overrides.seed,
        replicas: overrides.replicas,
        instances: overrides.instances,
        style,
        out: overrides.out.clone(),
        ..Default::default()
    };
    resolve(&flags.over(base)).map_err(|e| AppError::Config(e.to_string()))
}

fn initial_sets(cfg: &RunConfig, n: usize) -> Result<(SiteSet, SiteSet), AppError> {
    let x0 = SiteSet::from_sites(n, cfg.x0.iter().copied());
    let mut a0 = match &cfg.a0 {
        Some(sites) => SiteSet::from_sites(n, sites.iter().copied()),
        None => {
            let alpha = cps::rates::alpha(&cfg.rates).map_err(runtime)?;
            let mut rng = StreamRng::from_key(cfg.seed, &[streams::INIT_ACTIVITY]);
            SiteSet::from_sites(n, (0..n).filter(|_| rng.bernoulli(alpha)))
        }
    };
    if cfg.rates.variant == cps::rates::Variant::Cpb {
        for site in x0.iter() {
            a0.insert(site);
        }
    }
    Ok((x0, a0))
}

fn emit(out: Option<&String>, bytes: &[u8]) -> Result<(), AppError> {
    match out {
        Some(path) => write_atomic(Path::new(path), bytes).map_err(runtime),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| AppError::Runtime(e.to_string()))
        }
    }
}

fn sample_grid(cfg: &RunConfig) -> Vec<f64> {
    let k = cfg.sample_points;
    (0..k)
        .map(|i| cfg.horizon * i as f64 / (k - 1) as f64)
        .collect()
}

fn run_simulate(
    cfg: &RunConfig,
    states_out: Option<&PathBuf>,
    svg: Option<&PathBuf>,
) -> Result<(), AppError> {
    let lattice = Arc::new(cfg.lattice.compile().map_err(runtime)?);
    let (x0, a0) = initial_sets(cfg, lattice.n_sites())?;
    let times = sample_grid(cfg);
    let need_full = states_out.is_some() || svg.is_some();
    let traj = simulate_direct(
        &lattice,
        &cfg.rates,
        &x0,
        &a0,
        cfg.horizon,
        cfg.seed,
        &times,
        need_full,
    )
    .map_err(runtime)?;

    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv).map_err(|e| AppError::Runtime(e.to_string()))?;
    emit(cfg.out.as_ref(), &csv)?;

    if let Some(path) = states_out {
        let mut rle = Vec::new();
        write_states_rle(&traj, &mut rle).map_err(runtime)?;
        write_atomic(path, &rle).map_err(runtime)?;
    }
    if let Some(path) = svg {
        let doc = render_spacetime_svg(
            &lattice,
            &traj.sample_times,
            traj.snapshots.as_ref().unwrap(),
            cfg.style,
        )
        .map_err(runtime)?;
        write_atomic(path, doc.as_bytes()).map_err(runtime)?;
    }
    Ok(())
}

fn run_sweep(
    cfg: &RunConfig,
    grid: Option<Vec<f64>>,
    horizons: Option<Vec<f64>>,
) -> Result<(), AppError> {
    let grid = grid
        .or_else(|| {
            if cfg.lambda_grid.is_empty() {
                None
            } else {
                Some(cfg.lambda_grid.clone())
            }
        })
        .ok_or_else(|| AppError::Config("sweep needs a rate grid (--grid)".into()))?;
    let horizons = horizons.unwrap_or_else(|| cfg.horizons.clone());
    let lattice = Arc::new(cfg.lattice.compile().map_err(runtime)?);
    let result = survival_sweep(
        &lattice,
        &cfg.rates,
        &grid,
        &horizons,
        cfg.replicas,
        cfg.seed,
    )
    .map_err(runtime)?;

    let mut csv = Vec::new();
    result
        .write_csv(&mut csv)
        .map_err(|e| AppError::Runtime(e.to_string()))?;
    emit(cfg.out.as_ref(), &csv)?;
    if let Some(out) = &cfg.out {
        let meta = serde_json::to_string_pretty(&result.metadata_json())
            .map_err(|e| AppError::Runtime(e.to_string()))?;
        let meta_path = format!("{out}.meta.json");
        write_atomic(Path::new(&meta_path), meta.as_bytes()).map_err(runtime)?;
    }
    Ok(())
}

fn run_bounds(cfg: &RunConfig) -> Result<(), AppError> {
    let nbhd = cfg.lattice.offsets.len();
    let eff = EffectiveRates::compute(&cfg.rates, nbhd).map_err(runtime)?;
    let mut text = String::new();
    use std::fmt::Write;
    let _ = writeln!(text, "alpha = {}", eff.alpha);
    let _ = writeln!(text, "lambda_star = {}", eff.lambda_star);
    let _ = writeln!(text, "delta_star = {}", eff.delta_star);
    let _ = writeln!(text, "lambda_max = {}", eff.lambda_max);
    let _ = writeln!(text, "delta_bar = {}", eff.delta_bar);
    let _ = writeln!(text, "lambda_bar_outgoing = {}", eff.lambda_bar_outgoing);
    let _ = writeln!(text, "lambda_bar_incoming = {}", eff.lambda_bar_incoming);
    let _ = writeln!(text, "delta_max = {}", eff.delta_max);
    emit(cfg.out.as_ref(), text.as_bytes())
}

type SuiteFn = fn(u32, u64) -> cps::error::Result<u32>;

fn run_couple_check(cfg: &RunConfig) -> Result<(), AppError> {
    let n = cfg.instances;
    let suites: [(&str, SuiteFn); 6] = [
        ("monotone", coupling::run_monotone_suite),
        ("additivity", coupling::run_additivity_suite),
        ("trivial-dominating", coupling::run_trivial_dominating_suite),
        ("cps-over-cpb", coupling::run_cpb_suite),
        ("cpid-over-cpd", coupling::run_cpid_suite),
        ("cpree-switch-monotone", coupling::run_cpree_suite),
    ];
    for (name, suite) in suites {
        match suite(n, cfg.seed) {
            Ok(ran) => println!("{name}: PASS ({ran} instances)"),
            Err(e) => {
                println!("{name}: FAIL ({e})");
                return Err(AppError::Check(format!("{name}: {e}")));
            }
        }
    }
    Ok(())
}

fn run_dual_check(cfg: &RunConfig) -> Result<(), AppError> {
    match run_duality_suite(cfg.instances, cfg.seed) {
        Ok(ran) => {
            println!("duality-relation: PASS ({ran} instances)");
            Ok(())
        }
        Err(e) => {
            println!("duality-relation: FAIL ({e})");
            Err(AppError::Check(e.to_string()))
        }
    }
}

fn run_oracle_check(cfg: &RunConfig) -> Result<(), AppError> {
    let lattice = Arc::new(cfg.lattice.compile().map_err(runtime)?);
    let n = lattice.n_sites();
    let (x0, _) = initial_sets(cfg, n)?;
    let alpha = cps::rates::alpha(&cfg.rates).map_err(runtime)?;

    let q = generator_matrix(&lattice, &cfg.rates).map_err(runtime)?;
    let init = q.product_activity_initial(&x0, alpha).map_err(runtime)?;
    let dist = q
        .transient_distribution(&init, cfg.horizon)
        .map_err(runtime)?;
    let exact = q.exact_marginal(&dist, |s| s.site(0).infected);

    use rayon::prelude::*;
    let hits: u64 = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let sub = cps::rng::replica_seed(cfg.seed, r as u64);
            let mut init_rng = StreamRng::from_key(sub, &[streams::INIT_ACTIVITY]);
            let mut a0 = SiteSet::from_sites(n, (0..n).filter(|_| init_rng.bernoulli(alpha)));
            if cfg.rates.variant == cps::rates::Variant::Cpb {
                for site in x0.iter() {
                    a0.insert(site);
                }
            }
            let traj = simulate_direct(
                &lattice,
                &cfg.rates,
                &x0,
                &a0,
                cfg.horizon,
                sub,
                &[cfg.horizon],
                true,
            )
            .expect("simulation");
            traj.snapshots.unwrap()[0].infected.contains(0) as u64
        })
        .sum();
    let mc = hits as f64 / cfg.replicas as f64;
    let se = (mc * (1.0 - mc) / cfg.replicas as f64).sqrt().max(1e-12);
    let diff = (mc - exact).abs();
    println!(
        "P(origin infected at T={}): exact {exact:.6}, monte-carlo {mc:.6} ({} replicas), |diff| = {diff:.6}, 3se = {:.6}",
        cfg.horizon,
        cfg.replicas,
        3.0 * se
    );
    if diff <= 3.0 * se {
        println!("oracle-check: PASS");
        Ok(())
    } else {
        println!("oracle-check: FAIL");
        Err(AppError::Check(format!(
            "marginal off by {diff:.6} > 3se = {:.6}",
            3.0 * se
        )))
    }
}

fn run_render(cfg: &RunConfig) -> Result<(), AppError> {
    let lattice = Arc::new(cfg.lattice.compile().map_err(runtime)?);
    let (x0, a0) = initial_sets(cfg, lattice.n_sites())?;
    let times = sample_grid(cfg);
    let traj = simulate_direct(
        &lattice,
        &cfg.rates,
        &x0,
        &a0,
        cfg.horizon,
        cfg.seed,
        &times,
        true,
    )
    .map_err(runtime)?;
    let doc = render_spacetime_svg(
        &lattice,
        &traj.sample_times,
        traj.snapshots.as_ref().unwrap(),
        cfg.style,
    )
    .map_err(runtime)?;
    emit(cfg.out.as_ref(), doc.as_bytes())
}

fn run_critical(
    cfg: &RunConfig,
    bracket: Option<Vec<f64>>,
    threshold: Option<f64>,
    max_iters: u32,
    width_tol: f64,
) -> Result<(), AppError> {
    let bracket = match (bracket, cfg.bracket) {
        (Some(v), _) => {
            if v.len() != 2 {
                return Err(AppError::Config(
                    "bracket needs exactly two values, e.g. --bracket 6,9".into(),
                ));
            }
            (v[0], v[1])
        }
        (None, Some(b)) => b,
        (None, None) => {
            return Err(AppError::Config("critical needs --bracket lo,hi".into()))
        }
    };
    let lattice = Arc::new(cfg.lattice.compile().map_err(runtime)?);
    let out = estimate_critical(
        &lattice,
        &cfg.rates,
        bracket,
        threshold.unwrap_or(cfg.threshold),
        cfg.horizon,
        cfg.replicas,
        max_iters,
        width_tol,
        cfg.seed,
    )
    .map_err(runtime)?;
    let text = serde_json::to_string_pretty(&out).map_err(|e| AppError::Runtime(e.to_string()))?;
    emit(cfg.out.as_ref(), format!("{text}\n").as_bytes())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate {
            overrides,
            states_out,
            svg,
        } => {
            let cfg = load(&overrides)?;
            run_simulate(&cfg, states_out.as_ref(), svg.as_ref())
        }
        Command::Sweep {
            overrides,
            grid,
            horizons,
        } => {
            let cfg = load(&overrides)?;
            run_sweep(&cfg, grid, horizons)
        }
        Command::Bounds { overrides } => {
            let cfg = load(&overrides)?;
            run_bounds(&cfg)
        }
        Command::CoupleCheck { overrides } => {
            let cfg = load(&overrides)?;
            run_couple_check(&cfg)
        }
        Command::DualCheck { overrides } => {
            let cfg = load(&overrides)?;
            run_dual_check(&cfg)
        }
        Command::OracleCheck { overrides } => {
            let cfg = load(&overrides)?;
            run_oracle_check(&cfg)
        }
        Command::Render { overrides } => {
            let cfg = load(&overrides)?;
            run_render(&cfg)
        }
        Command::Critical {
            overrides,
            bracket,
            threshold,
            max_iters,
            width_tol,
        } => {
            let cfg = load(&overrides)?;
            run_critical(&cfg, bracket, threshold, max_iters, width_tol)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
