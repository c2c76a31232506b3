//! `wiretap`: command-line surface for the secrecy-capacity toolkit.
//! Emits JSON on stdout, CSV to files or stdout, and a run manifest
//! alongside every file output so runs can be reproduced exactly.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use std::path::{Path, PathBuf};
use std::time::Instant;
use wiretap_core::bounds::{
    explicit_upper_bound, scalar_bound_report, ScalarBoundReport,
};
use wiretap_core::density::{g_function, g_lower_bound, xi};
use wiretap_core::model::{ChannelParams, QuadratureConfig, ShellPmf, UnitMode};
use wiretap_core::optimizer::{optimize, OptimizeResult, OptimizerConfig};
use wiretap_core::regime::{capacity_avg_power, capacity_single_shell_integral, threshold};
use wiretap_core::specfun::{ncx2_pdf, NoncentralChiSq};
use wiretap_core::Error as CoreError;

const CSV_SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(name = "wiretap", version, about = "Secrecy capacity of the amplitude-constrained Gaussian wiretap channel")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Largest radius at which a single shell at R is capacity-achieving.
    Threshold(ThresholdArgs),
    /// Threshold table for unit legitimate variance: one row per dimension.
    Table1(Table1Args),
    /// Estimate the secrecy capacity and the optimal shell pmf.
    Optimize(OptimizeArgs),
    /// Grid sweeps of capacity, thresholds, and diagnostic functions.
    Sweep(SweepArgs),
    /// Support-size bounds for the scalar (n=1) channel.
    ScalarBounds(ScalarBoundsArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma1_sq: f64,
    #[arg(long)]
    sigma2_sq: f64,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 5e-4)]
    tol: f64,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 35)]
    n_max: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma1_sq: f64,
    #[arg(long)]
    sigma2_sq: f64,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = UnitArg::Nats)]
    units: UnitArg,
    /// Write the converged pmf as CSV here (plus a manifest).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Nats,
    Bits,
}

impl From<UnitArg> for UnitMode {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Nats => UnitMode::Nats,
            UnitArg::Bits => UnitMode::Bits,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Capacity,
    Threshold,
    Gfunction,
    Density,
    OutputDensity,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    quantity: Quantity,
    #[arg(long, default_value_t = 1.0)]
    sigma1_sq: f64,
    #[arg(long)]
    sigma2_sq: f64,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Amplitude constraint; required by every quantity except `threshold`.
    #[arg(long)]
    radius: Option<f64>,
    /// Grid spec `start:stop:count` (for `threshold`: integer `start:stop`).
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalarBoundsArgs {
    #[arg(long, default_value_t = 1.0)]
    sigma1_sq: f64,
    #[arg(long)]
    sigma2_sq: f64,
    #[arg(long)]
    radius: f64,
    /// Use this certified secrecy information inside the bound window.
    #[arg(long, conflicts_with = "use_cg")]
    cs: Option<f64>,
    /// Use the average-power Gaussian capacity as the C_s surrogate.
    #[arg(long)]
    use_cg: bool,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    params: serde_json::Value,
    configs: serde_json::Value,
    seed: Option<u64>,
    tool_version: String,
    wall_time_s: f64,
    output_paths: Vec<String>,
    csv_schema_version: String,
}

fn manifest(
    command: &str,
    params: serde_json::Value,
    configs: serde_json::Value,
    started: Instant,
    outputs: &[&Path],
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        params,
        configs,
        seed: None,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        output_paths: outputs.iter().map(|p| p.display().to_string()).collect(),
        csv_schema_version: CSV_SCHEMA_VERSION.to_string(),
    }
}

/// Repeatable 9-significant-digit scientific notation for CSV cells.
fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.8e}")
    }
}

fn exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Model(_) | CoreError::Domain(_) | CoreError::UnsupportedNorm(_) | CoreError::NotScalar(_) => 1,
        CoreError::QuadratureNonConvergence { .. }
        | CoreError::BracketFailure { .. }
        | CoreError::DegenerateGap { .. } => 2,
        CoreError::NonConvergence(_) | CoreError::TooManyPoints { .. }
        | CoreError::OutsideLowAmplitudeRegime { .. } => 3,
    }
}

fn fail(e: CoreError) -> ! {
    let msg = serde_json::json!({ "error": e.to_string() });
    eprintln!("{msg}");
    std::process::exit(exit_code(&e));
}

fn write_manifest(out: &Path, m: &RunManifest) -> anyhow::Result<()> {
    let path = out.with_extension("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(m)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn emit_csv(out: Option<&Path>, header: &str, rows: &[String]) -> anyhow::Result<()> {
    let mut body = String::with_capacity(rows.len() * 64 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> anyhow::Result<()> {
    if let Ok(threads) = std::env::var("WIRETAP_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .ok();
        }
    }
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Threshold(a) => cmd_threshold(a),
        Cmd::Table1(a) => cmd_table1(a),
        Cmd::Optimize(a) => cmd_optimize(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::ScalarBounds(a) => cmd_scalar_bounds(a),
    }
}

fn cmd_threshold(a: ThresholdArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = QuadratureConfig::default();
    let res = match threshold(a.sigma1_sq, a.sigma2_sq, a.n, a.tol, &cfg) {
        Ok(r) => r,
        Err(e) => fail(e),
    };
    let m = manifest(
        "threshold",
        serde_json::json!({
            "sigma1_sq": a.sigma1_sq, "sigma2_sq": a.sigma2_sq, "n": a.n, "tol": a.tol
        }),
        serde_json::to_value(&cfg)?,
        started,
        &[],
    );
    println!(
        "{}",
        serde_json::json!({ "r_bar": res.r_bar, "report": res.report, "manifest": m })
    );
    Ok(())
}

/// σ₂² surrogates per table column. The first and last columns print the
/// σ₂²→σ₁² and σ₂²→∞ limits; 1.001·σ₁² and 1e9·σ₁² reproduce the limit
/// values to better than the table's own 5e-3 resolution (1000·σ₁² does
/// not: it is still 1.5e-2 short of the limit at n=35).
const TABLE_COLUMNS: [(&str, f64); 6] = [
    ("mmse", 1.001),
    ("1.001", 1.001),
    ("1.5", 1.5),
    ("10", 10.0),
    ("1000", 1000.0),
    ("ptp", 1e9),
];

fn cmd_table1(a: Table1Args) -> anyhow::Result<()> {
    use rayon::prelude::*;
    let started = Instant::now();
    let n_max = a.n_max.clamp(1, 35);
    let mut cfg = QuadratureConfig::default();
    cfg.rel_tol = 1e-7;
    cfg.abs_tol = 1e-10;
    let cells: Vec<Result<f64, CoreError>> = (1..=n_max)
        .flat_map(|n| TABLE_COLUMNS.iter().map(move |&(_, s2)| (n, s2)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(n, s2)| threshold(1.0, s2, n, 5e-4, &cfg).map(|t| t.r_bar))
        .collect();
    let mut rows = Vec::with_capacity(n_max as usize);
    let mut cells = cells.into_iter();
    for n in 1..=n_max {
        let mut row = n.to_string();
        for _ in 0..6 {
            match cells.next().unwrap() {
                Ok(v) => {
                    row.push(',');
                    row.push_str(&fmt(v));
                }
                Err(e) => fail(e),
            }
        }
        rows.push(row);
    }
    let header = "n,mmse,1.001,1.5,10,1000,ptp";
    emit_csv(a.out.as_deref(), header, &rows)?;
    if let Some(out) = &a.out {
        let m = manifest(
            "table1",
            serde_json::json!({ "n_max": n_max }),
            serde_json::to_value(&cfg)?,
            started,
            &[out],
        );
        write_manifest(out, &m)?;
        println!("{}", serde_json::to_string(&m)?);
    }
    Ok(())
}

fn cmd_optimize(a: OptimizeArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = QuadratureConfig::default();
    let mut opt = OptimizerConfig::default();
    opt.epsilon = a.epsilon;
    let p = match ChannelParams::new(a.sigma1_sq, a.sigma2_sq, a.n, a.radius) {
        Ok(p) => p,
        Err(e) => fail(CoreError::Model(e)),
    };
    let res: OptimizeResult = match optimize(&p, &opt, &cfg, None) {
        Ok(r) => r,
        Err(e) => fail(e),
    };
    let units: UnitMode = a.units.into();
    if let Some(out) = &a.out {
        let rows: Vec<String> = res
            .pmf
            .iter()
            .map(|(r, q)| format!("{},{}", fmt(r), fmt(q)))
            .collect();
        emit_csv(Some(out), "radius,probability", &rows)?;
    }
    let outputs: Vec<&Path> = a.out.iter().map(|p| p.as_path()).collect();
    let m = manifest(
        "optimize",
        serde_json::json!({
            "sigma1_sq": a.sigma1_sq, "sigma2_sq": a.sigma2_sq, "n": a.n,
            "radius": a.radius, "epsilon": a.epsilon
        }),
        serde_json::json!({ "quadrature": cfg, "optimizer": opt }),
        started,
        &outputs,
    );
    if let Some(out) = &a.out {
        write_manifest(out, &m)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "capacity": units.from_nats(res.capacity),
            "units": units,
            "pmf": res.pmf,
            "kkt": res.kkt,
            "points_added": res.points_added,
            "manifest": m
        })
    );
    Ok(())
}

fn parse_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (a, b): (f64, f64) = (start.parse()?, stop.parse()?);
            let k: usize = count.parse()?;
            anyhow::ensure!(k >= 2 && b > a, "grid needs stop > start and count >= 2");
            Ok((0..k)
                .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                .collect())
        }
        [start, stop] => {
            let (a, b): (u32, u32) = (start.parse()?, stop.parse()?);
            anyhow::ensure!(b >= a, "grid needs stop >= start");
            Ok((a..=b).map(f64::from).collect())
        }
        _ => anyhow::bail!("grid spec must be start:stop:count (or start:stop for integers)"),
    }
}

/// Radial pdf of the output norm ‖Y_j‖ for a shell input.
fn norm_pdf(pmf: &ShellPmf, n: u32, sigma_sq: f64, y: f64) -> Result<f64, CoreError> {
    let mut acc = 0.0;
    for (rho, q) in pmf.iter() {
        let d = NoncentralChiSq::new(n, rho * rho / sigma_sq)?;
        acc += q * ncx2_pdf(d, y * y / sigma_sq)? * 2.0 * y / sigma_sq;
    }
    Ok(acc)
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    use rayon::prelude::*;
    let started = Instant::now();
    let cfg = QuadratureConfig::default();
    let grid = parse_grid(&a.grid)?;
    let need_radius = || -> anyhow::Result<f64> {
        a.radius
            .ok_or_else(|| anyhow::anyhow!("--radius is required for this quantity"))
    };
    let (header, results): (&str, Vec<Result<String, CoreError>>) = match a.quantity {
        Quantity::Threshold => (
            "n,r_bar,r_bar_over_sqrt_n",
            grid.par_iter()
                .map(|&nf| {
                    let n = nf as u32;
                    threshold(a.sigma1_sq, a.sigma2_sq, n, 5e-4, &cfg).map(|t| {
                        format!("{n},{},{}", fmt(t.r_bar), fmt(t.r_bar / (n as f64).sqrt()))
                    })
                })
                .collect(),
        ),
        Quantity::Capacity => {
            let opt = OptimizerConfig::default();
            (
                "radius,capacity,capacity_avg_power,capacity_low_amplitude,shells",
                grid.par_iter()
                    .map(|&r| {
                        let p = ChannelParams::new(a.sigma1_sq, a.sigma2_sq, a.n, r)
                            .map_err(CoreError::Model)?;
                        let res = optimize(&p, &opt, &cfg, None)?;
                        let cg = capacity_avg_power(a.sigma1_sq, a.sigma2_sq, r * r, a.n)?;
                        let single = capacity_single_shell_integral(&p, &cfg)?;
                        Ok(format!(
                            "{},{},{},{},{}",
                            fmt(r),
                            fmt(res.capacity),
                            fmt(cg),
                            fmt(single),
                            res.pmf.len()
                        ))
                    })
                    .collect(),
            )
        }
        Quantity::Gfunction => {
            let r = need_radius()?;
            let p = match ChannelParams::new(a.sigma1_sq, a.sigma2_sq, a.n, r) {
                Ok(p) => p,
                Err(e) => fail(CoreError::Model(e)),
            };
            (
                "y,g,g_lower_bound",
                grid.par_iter()
                    .map(|&y| {
                        let g = g_function(y, &p, &cfg)?;
                        let lb = g_lower_bound(y, &p)?;
                        Ok(format!("{},{},{}", fmt(y), fmt(g), fmt(lb)))
                    })
                    .collect(),
            )
        }
        Quantity::Density | Quantity::OutputDensity => {
            let r = need_radius()?;
            let p = match ChannelParams::new(a.sigma1_sq, a.sigma2_sq, a.n, r) {
                Ok(p) => p,
                Err(e) => fail(CoreError::Model(e)),
            };
            let pmf = match optimize(&p, &OptimizerConfig::default(), &cfg, None) {
                Ok(res) => res.pmf,
                Err(e) => fail(e),
            };
            match a.quantity {
                Quantity::Density => (
                    "t,xi",
                    grid.par_iter()
                        .map(|&t| Ok(format!("{},{}", fmt(t), fmt(xi(t, &pmf, &p, &cfg)?))))
                        .collect(),
                ),
                _ => (
                    "y,pdf_legitimate,pdf_eavesdropper",
                    grid.par_iter()
                        .map(|&y| {
                            let f1 = norm_pdf(&pmf, p.n, p.sigma1_sq, y)?;
                            let f2 = norm_pdf(&pmf, p.n, p.sigma2_sq, y)?;
                            Ok(format!("{},{},{}", fmt(y), fmt(f1), fmt(f2)))
                        })
                        .collect(),
                ),
            }
        }
    };
    let mut failures = 0usize;
    let rows: Vec<String> = results
        .into_iter()
        .zip(&grid)
        .map(|(res, &x)| match res {
            Ok(row) => row,
            Err(e) => {
                failures += 1;
                eprintln!("sweep point {x}: {e}");
                let nan_cols = header.split(',').count() - 1;
                let mut row = fmt(x);
                for _ in 0..nan_cols {
                    row.push_str(",NaN");
                }
                row
            }
        })
        .collect();
    emit_csv(a.out.as_deref(), header, &rows)?;
    if let Some(out) = &a.out {
        let m = manifest(
            "sweep",
            serde_json::json!({
                "quantity": header, "sigma1_sq": a.sigma1_sq, "sigma2_sq": a.sigma2_sq,
                "n": a.n, "radius": a.radius, "grid": a.grid
            }),
            serde_json::to_value(&cfg)?,
            started,
            &[out],
        );
        write_manifest(out, &m)?;
        println!("{}", serde_json::to_string(&m)?);
    }
    if failures * 10 > grid.len() {
        eprintln!("sweep: {failures}/{} points failed", grid.len());
        std::process::exit(3);
    }
    Ok(())
}

fn cmd_scalar_bounds(a: ScalarBoundsArgs) -> anyhow::Result<()> {
    let started = Instant::now();
    let cfg = QuadratureConfig::default();
    let (sigma1, sigma2) = (a.sigma1_sq.sqrt(), a.sigma2_sq.sqrt());
    let report: ScalarBoundReport = if let Some(cs) = a.cs {
        match explicit_upper_bound(sigma1, sigma2, a.radius, cs) {
            Ok(r) => r,
            Err(e) => fail(e),
        }
    } else if a.use_cg {
        let cg = match capacity_avg_power(a.sigma1_sq, a.sigma2_sq, a.radius * a.radius, 1) {
            Ok(c) => c,
            Err(e) => fail(e),
        };
        match explicit_upper_bound(sigma1, sigma2, a.radius, cg) {
            Ok(r) => r,
            Err(e) => fail(e),
        }
    } else {
        // No surrogate given: certify a pmf with the optimizer so the
        // implicit zero count can be included.
        let p = match ChannelParams::new(a.sigma1_sq, a.sigma2_sq, 1, a.radius) {
            Ok(p) => p,
            Err(e) => fail(CoreError::Model(e)),
        };
        let res = match optimize(&p, &OptimizerConfig::default(), &cfg, None) {
            Ok(r) => r,
            Err(e) => fail(e),
        };
        match scalar_bound_report(&res.pmf, &p, &cfg) {
            Ok(r) => r,
            Err(e) => fail(e),
        }
    };
    assert!(
        report.lower <= report.explicit_upper,
        "bound consistency violated: lower {} > upper {}",
        report.lower,
        report.explicit_upper
    );
    let m = manifest(
        "scalar-bounds",
        serde_json::json!({
            "sigma1_sq": a.sigma1_sq, "sigma2_sq": a.sigma2_sq, "radius": a.radius,
            "cs": a.cs, "use_cg": a.use_cg
        }),
        serde_json::to_value(&cfg)?,
        started,
        &[],
    );
    println!("{}", serde_json::json!({ "report": report, "manifest": m }));
    Ok(())
}
