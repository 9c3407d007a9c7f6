//! Command line for the winding-number statistics library.
//!
//! Subcommands: `spectral-flow`, `verify-z`, `winding-hist`, `analytic-z`,
//! `polys`, `selftest`. Exit codes: 0 pass, 1 verification failure, 2
//! configuration error, 3 numerical failure (gap closure / singularity).

mod config;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use chiralwind_core::analytic::{aiii_zkk, cii_zkk, PointSets};
use chiralwind_core::ensembles::EnsembleSample;
use chiralwind_core::montecarlo::{estimate_from_blocks, partition_block, BlockSpec, ValueBlock};
use chiralwind_core::specfun::{skew_norm, SkewPolyEven};
use chiralwind_core::winding::{
    spectral_flow, winding_sample_chunk, WindingHistogram, WINDING_CHUNK,
};
use chiralwind_core::{Complex64, SymmetryClass};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use config::{FormatSpec, Overrides, RunConfig};
use output::{emit, json_document, CsvTable};

#[derive(Debug)]
pub enum AppError {
    /// exit code 2
    Config(String),
    /// exit code 1
    Verification(String),
    /// exit code 3
    Numeric(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Verification(m) => write!(f, "verification failed: {m}"),
            AppError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

macro_rules! numeric_from {
    ($($ty:ty),+) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::Numeric(e.to_string())
            }
        }
    )+};
}
numeric_from!(
    chiralwind_core::numerics::NumericsError,
    chiralwind_core::specfun::SpecFunError,
    chiralwind_core::field::FieldError,
    chiralwind_core::ensembles::EnsembleError,
    chiralwind_core::winding::WindingError,
    chiralwind_core::montecarlo::McError,
    chiralwind_core::analytic::AnalyticError,
    chiralwind_core::oracles::QuadError
);

#[derive(Parser)]
#[command(
    name = "chiralwind",
    version,
    about = "Winding number statistics of chiral random matrix fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export eigenvalues of H(p) and K(p) and det K(p) over one period
    SpectralFlow(Overrides),
    /// Compare the closed-form average against a Monte Carlo estimate
    VerifyZ(Overrides),
    /// Histogram winding numbers over fresh ensemble samples
    WindingHist(Overrides),
    /// Evaluate the closed-form average at the configured points
    AnalyticZ(Overrides),
    /// Tabulate skew-orthogonal polynomial coefficients and norms
    Polys(Overrides),
    /// Run the built-in quick verification checks
    Selftest(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SpectralFlow(ov) => cmd_spectral_flow(ov),
        Command::VerifyZ(ov) => cmd_verify_z(ov),
        Command::WindingHist(ov) => cmd_winding_hist(ov),
        Command::AnalyticZ(ov) => cmd_analytic_z(ov),
        Command::Polys(ov) => cmd_polys(ov),
        Command::Selftest(ov) => selftest::run(ov),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chiralwind: {e}");
            match e {
                AppError::Verification(_) => ExitCode::from(1),
                AppError::Config(_) => ExitCode::from(2),
                AppError::Numeric(_) => ExitCode::from(3),
            }
        }
    }
}

fn resolve(ov: &Overrides) -> Result<(RunConfig, Option<PathBuf>), AppError> {
    RunConfig::resolve(ov)
}

/// Momentum grid export of the spectral flow of one seeded realization.
fn cmd_spectral_flow(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, out) = resolve(ov)?;
    let field = cfg.build_field()?;
    let sample = EnsembleSample::draw_seeded(cfg.class(), cfg.n, cfg.seed, 0);
    let rows = spectral_flow(&field, &sample, cfg.grid)?;

    let d = field.matrix_dim();
    match cfg.format {
        FormatSpec::Csv => {
            let mut header = vec!["p".to_string()];
            for i in 0..2 * d {
                header.push(format!("h{i}_re"));
                header.push(format!("h{i}_im"));
            }
            for i in 0..d {
                header.push(format!("k{i}_re"));
                header.push(format!("k{i}_im"));
            }
            header.push("det_re".into());
            header.push("det_im".into());
            let mut table = CsvTable::new(&cfg, &header)?;
            for row in &rows {
                let mut cells = vec![row.p];
                for e in &row.h_eigenvalues {
                    cells.push(e.re);
                    cells.push(e.im);
                }
                for e in &row.k_eigenvalues {
                    cells.push(e.re);
                    cells.push(e.im);
                }
                cells.push(row.det_k.re);
                cells.push(row.det_k.im);
                table.push_row(&cells);
            }
            emit(out.as_deref(), &table.render())
        }
        FormatSpec::Json => {
            let payload: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "p": r.p,
                        "h_eigenvalues": r.h_eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                        "k_eigenvalues": r.k_eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                        "det_k": [r.det_k.re, r.det_k.im],
                    })
                })
                .collect();
            emit(out.as_deref(), &json_document(&cfg, &payload)?)
        }
    }
}

fn analytic_value(cfg: &RunConfig) -> Result<(Complex64, PointSets), AppError> {
    let field = cfg.build_field()?;
    let (q, p) = cfg.point_sets()?;
    let points = PointSets::new(q, p).map_err(|e| AppError::Config(e.to_string()))?;
    let value = match cfg.class() {
        SymmetryClass::Aiii => aiii_zkk(&field, &points)?,
        SymmetryClass::Cii => cii_zkk(&field, &points, cfg.gauge())?,
    };
    Ok((value, points))
}

/// Closed form vs Monte Carlo with a 3-sigma pass bound; exit 1 on failure.
fn cmd_verify_z(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, out) = resolve(ov)?;
    let field = cfg.build_field()?;
    let (analytic, points) = analytic_value(&cfg)?;

    let spec = BlockSpec::new(cfg.n_samples, cfg.method().blocks_hint(), cfg.seed);
    let blocks: Vec<ValueBlock> = (0..spec.blocks)
        .into_par_iter()
        .map(|i| partition_block(&field, &points.q, &points.p, &spec, i))
        .collect::<Result<_, _>>()?;
    let est = estimate_from_blocks(&blocks, cfg.method(), cfg.seed, false)?;

    let z = est.z_score(analytic);
    let pass = z <= 3.0;
    let payload = json!({
        "analytic": [analytic.re, analytic.im],
        "mc_mean": [est.mean.re, est.mean.im],
        "mc_stderr": est.stderr,
        "z_score": z,
        "pass": pass,
        "n_samples": est.n_samples,
        "rejected": est.rejected,
        "q_points": points.q,
        "p_points": points.p,
    });
    emit(out.as_deref(), &json_document(&cfg, &payload)?)?;
    if pass {
        Ok(())
    } else {
        Err(AppError::Verification(format!(
            "z-score {z:.2} exceeds 3 (analytic {analytic}, mc {})",
            est.mean
        )))
    }
}

/// Winding histogram over fresh samples, chunk-parallel with a deterministic
/// merge in chunk order.
fn cmd_winding_hist(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, out) = resolve(ov)?;
    let field = cfg.build_field()?;
    let chunks = cfg.n_samples.div_ceil(WINDING_CHUNK);
    let parts: Vec<WindingHistogram> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let count = WINDING_CHUNK.min(cfg.n_samples - chunk * WINDING_CHUNK);
            winding_sample_chunk(&field, cfg.grid, cfg.seed, chunk, count)
        })
        .collect();
    let mut hist = WindingHistogram {
        counts: Default::default(),
        failures: 0,
        n_samples: 0,
        seed: cfg.seed,
        grid_points: cfg.grid,
    };
    for part in &parts {
        hist.merge(part);
    }

    match cfg.format {
        FormatSpec::Csv => {
            let mut table = CsvTable::new(&cfg, &["w".into(), "count".into()])?;
            for (w, c) in &hist.counts {
                table.push_raw(&[w.to_string(), c.to_string()]);
            }
            table.push_raw(&["rejected".into(), hist.failures.to_string()]);
            emit(out.as_deref(), &table.render())
        }
        FormatSpec::Json => {
            let payload = json!({
                "counts": hist
                    .counts
                    .iter()
                    .map(|(w, c)| (w.to_string(), c))
                    .collect::<std::collections::BTreeMap<_, _>>(),
                "rejected": hist.failures,
                "n_samples": hist.n_samples,
                "mean": hist.mean(),
                "mean_stderr": hist.mean_stderr(),
            });
            emit(out.as_deref(), &json_document(&cfg, &payload)?)
        }
    }
}

/// Closed-form evaluation at the configured points.
fn cmd_analytic_z(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, out) = resolve(ov)?;
    let (value, points) = analytic_value(&cfg)?;
    let payload = json!({
        "value": [value.re, value.im],
        "q_points": points.q,
        "p_points": points.p,
        "gauge": cfg.gauge,
    });
    emit(out.as_deref(), &json_document(&cfg, &payload)?)
}

/// Coefficient and norm table of the skew-orthogonal polynomials.
fn cmd_polys(ov: &Overrides) -> Result<(), AppError> {
    let (cfg, out) = resolve(ov)?;
    let n = cfg.n;
    match cfg.format {
        FormatSpec::Csv => {
            let mut header = vec!["name".to_string()];
            for m in 0..n {
                header.push(format!("c{}", 2 * m));
            }
            let mut table = CsvTable::new(&cfg, &header)?;
            for half in 0..n {
                let poly = SkewPolyEven::new(half, n)?;
                let mut cells = vec![format!("q{}", 2 * half)];
                for m in 0..n {
                    cells.push(
                        poly.coeffs()
                            .get(m)
                            .map(|c| format!("{c}"))
                            .unwrap_or_default(),
                    );
                }
                table.push_raw(&cells);
            }
            let mut cells = vec!["h".to_string()];
            for j in 0..n {
                cells.push(format!("{}", skew_norm(j, n)?));
            }
            table.push_raw(&cells);
            emit(out.as_deref(), &table.render())
        }
        FormatSpec::Json => {
            let polys: Vec<_> = (0..n)
                .map(|half| {
                    SkewPolyEven::new(half, n).map(|p| {
                        json!({
                            "degree": 2 * half,
                            "coefficients": p.coeffs(),
                        })
                    })
                })
                .collect::<Result<_, _>>()?;
            let norms: Vec<f64> = (0..n).map(|j| skew_norm(j, n)).collect::<Result<_, _>>()?;
            let payload = json!({ "polynomials": polys, "norms": norms });
            emit(out.as_deref(), &json_document(&cfg, &payload)?)
        }
    }
}

/// `Method::blocks` is private to core; the CLI derives the block count the
/// same way for its parallel driver.
trait BlocksHint {
    fn blocks_hint(&self) -> u32;
}

impl BlocksHint for chiralwind_core::montecarlo::Method {
    fn blocks_hint(&self) -> u32 {
        match self {
            chiralwind_core::montecarlo::Method::PlainMean => {
                chiralwind_core::montecarlo::DEFAULT_BLOCKS
            }
            chiralwind_core::montecarlo::Method::MedianOfMeans { blocks } => (*blocks).max(1),
        }
    }
}
