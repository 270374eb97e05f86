//! `pvqc`: exact simulation and trainability diagnostics for passive
//! photonic variational circuits.

mod config;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pvqc_core::fock::{enumerate_basis, OccupationVector};
use pvqc_core::harness::{
    fit_scaling, fmt_f64, gradcheck_suite, purity_table, read_variance_csv, run_gradcheck, sweep,
    write_purity_csv, FitReport, ScalingModel, GRADCHECK_REL_TOL,
};
use pvqc_core::loss::{postselected_distribution, DEFAULT_FLOOR};
use pvqc_core::mesh::MeshParams;
use pvqc_core::postselect::{retained_indices, Regime};

use config::{
    load_toml, resolve_purity, resolve_sweep, write_echo, PurityEcho, PurityFile, SweepEcho,
    SweepFile, SweepOverrides,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad usage, config, or input: exit code 2.
    Usage(String),
    /// A numerical check failed: exit code 1.
    Check(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<pvqc_core::Error> for CliError {
    fn from(e: pvqc_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "pvqc",
    version,
    about = "Exact simulator and gradient diagnostics for passive photonic variational circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the size and states of one n-photon, m-mode Fock sector.
    Basis {
        /// Mode count (>= 1).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        modes: u64,
        /// Photon count.
        #[arg(long)]
        photons: u32,
    },
    /// Run the Hong-Ou-Mandel check on a balanced two-mode mesh.
    Hom,
    /// Write the reference-observable purity CSV across regimes and sizes.
    Purity {
        /// TOML config file (keys: regimes, m_values, output_dir).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Regimes, comma separated (fock, unbunched, dual_rail, rail3).
        #[arg(long, value_delimiter = ',')]
        regimes: Option<Vec<String>>,
        /// Even mode counts, comma separated; each runs with n = m/2 photons.
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        /// Directory for purity.csv and the resolved config echo.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run a gradient-variance sweep and write the results CSV.
    Sweep {
        /// TOML config file; flags below override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        regimes: Option<Vec<String>>,
        /// Initializers, comma separated (uniform, beta, haar).
        #[arg(long, value_delimiter = ',')]
        inits: Option<Vec<String>>,
        /// Logical sizes N, comma separated.
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        /// Explicit mode counts for a mode sweep at fixed n = N.
        #[arg(long, value_delimiter = ',')]
        m_values: Option<Vec<usize>>,
        /// Monte-Carlo samples per cell.
        #[arg(long)]
        samples: Option<usize>,
        /// Master seed for all substreams.
        #[arg(long)]
        seed: Option<u64>,
        /// Success-probability floor.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Refuse cells with sector dimension above this cap.
        #[arg(long)]
        d_cap: Option<u64>,
        /// Worker threads (0 = available parallelism). Overrides PVQC_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
        /// Directory for results.csv and the resolved config echo.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Fit scaling laws to a results CSV and compare models by AIC.
    Fit {
        /// Input CSV produced by `pvqc sweep`.
        #[arg(long)]
        csv: PathBuf,
        /// Directory for per-curve fit reports.
        #[arg(long)]
        output_dir: PathBuf,
        /// Models, comma separated (exponential, power, cubic_log).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Fit against N (default) or against m (mode sweeps).
        #[arg(long, default_value = "n")]
        x_axis: String,
    },
    /// Compare analytic gradients with finite differences over the
    /// built-in 30-configuration suite.
    Gradcheck {
        /// Central-difference step size.
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Basis { modes, photons } => cmd_basis(modes as usize, photons),
        Command::Hom => cmd_hom(),
        Command::Purity {
            config,
            regimes,
            m_values,
            output_dir,
        } => cmd_purity(config, regimes, m_values, output_dir),
        Command::Sweep {
            config,
            regimes,
            inits,
            n_values,
            m_values,
            samples,
            seed,
            epsilon,
            d_cap,
            workers,
            output_dir,
        } => cmd_sweep(
            config,
            SweepOverrides {
                regimes,
                inits,
                n_values,
                m_values,
                samples,
                master_seed: seed,
                epsilon,
                d_cap,
                workers,
                output_dir,
            },
        ),
        Command::Fit {
            csv,
            output_dir,
            models,
            x_axis,
        } => cmd_fit(csv, output_dir, models, x_axis),
        Command::Gradcheck { step } => cmd_gradcheck(step),
    }
}

fn cmd_basis(modes: usize, photons: u32) -> Result<(), CliError> {
    let basis = enumerate_basis(modes, photons);
    println!("dim={}", basis.dim());
    if basis.dim() <= 16 {
        for (i, s) in basis.states().iter().enumerate() {
            println!("{i}: {s}");
        }
    } else {
        println!("first={}", basis.state(0));
        println!("last={}", basis.state(basis.dim() - 1));
    }
    Ok(())
}

fn cmd_hom() -> Result<(), CliError> {
    let basis = enumerate_basis(2, 2);
    let params = MeshParams::new(2, vec![PI / 4.0], vec![0.0], vec![0.0, 0.0])
        .map_err(CliError::from)?;
    let input = OccupationVector::new(vec![1, 1]);
    let dist = postselected_distribution(
        &params,
        &input,
        &Regime::AllowBunching,
        &basis,
        DEFAULT_FLOOR,
    )?;
    let outcomes = retained_indices(&Regime::AllowBunching, &basis)?;
    let expected = [0.5, 0.0, 0.5];
    let mut max_dev: f64 = 0.0;
    for ((label, &p), &e) in outcomes
        .labels()
        .iter()
        .zip(dist.probabilities())
        .zip(expected.iter())
    {
        println!("p{label}={p:.10}");
        max_dev = max_dev.max((p - e).abs());
    }
    if max_dev > 1e-10 {
        return Err(CliError::Check(format!(
            "Hong-Ou-Mandel deviation {max_dev:.3e} exceeds 1e-10"
        )));
    }
    println!("PASS max_deviation={max_dev:.3e}");
    Ok(())
}

fn cmd_purity(
    config_path: Option<PathBuf>,
    regimes: Option<Vec<String>>,
    m_values: Option<Vec<usize>>,
    output_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let file: PurityFile = load_toml(config_path.as_deref())?;
    let resolved = resolve_purity(file, regimes, m_values, output_dir)?;
    write_echo(&PurityEcho::new(&resolved), &resolved.output_dir)?;

    let rows = purity_table(&resolved.regimes, &resolved.m_values)?;
    let path = resolved.output_dir.join("purity.csv");
    let mut out = BufWriter::new(
        File::create(&path)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?,
    );
    write_purity_csv(&rows, &mut out)?;
    for r in &rows {
        println!(
            "{} m={} n={} dim={} purity={:.6}",
            r.regime, r.m, r.n, r.subspace_dim, r.purity
        );
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn cmd_sweep(config_path: Option<PathBuf>, flags: SweepOverrides) -> Result<(), CliError> {
    let file: SweepFile = load_toml(config_path.as_deref())?;
    let resolved = resolve_sweep(file, flags)?;
    write_echo(&SweepEcho::new(&resolved), &resolved.output_dir)?;

    let path = resolved.output_dir.join("results.csv");
    let mut out = BufWriter::new(
        File::create(&path)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?,
    );
    let estimates = sweep(&resolved.config, &mut out)?;
    println!("wrote {} rows to {}", estimates.len(), path.display());
    Ok(())
}

/// Requested models plus whether the user picked them explicitly; the
/// default selection drops models a curve cannot support instead of failing.
fn parse_models(models: Option<Vec<String>>) -> Result<(Vec<ScalingModel>, bool), CliError> {
    match models {
        None => Ok((
            vec![
                ScalingModel::Exponential,
                ScalingModel::Power,
                ScalingModel::CubicLog,
            ],
            false,
        )),
        Some(names) => names
            .iter()
            .map(|n| ScalingModel::parse(n).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()
            .map(|m| (m, true)),
    }
}

fn min_points(model: ScalingModel) -> usize {
    match model {
        ScalingModel::CubicLog => 5,
        _ => 3,
    }
}

fn fit_report_text(curve: &str, fit: &FitReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("model: {}\n", fit.model.name()));
    out.push_str(&format!("curve: {curve}\n"));
    out.push_str(&format!("points: {}\n", fit.points));
    match fit.model {
        ScalingModel::Exponential => {
            out.push_str(&format!("C: {}\n", fmt_f64(fit.coefficients[0])));
            out.push_str(&format!("a: {}\n", fmt_f64(fit.coefficients[1])));
        }
        ScalingModel::Power => {
            out.push_str(&format!("C: {}\n", fmt_f64(fit.coefficients[0])));
            out.push_str(&format!("c: {}\n", fmt_f64(fit.coefficients[1])));
        }
        ScalingModel::CubicLog => {
            for (i, c) in fit.coefficients.iter().enumerate() {
                out.push_str(&format!("b{i}: {}\n", fmt_f64(*c)));
            }
        }
    }
    out.push_str(&format!("r_squared: {}\n", fmt_f64(fit.r_squared)));
    out.push_str(&format!("aic: {}\n", fmt_f64(fit.aic)));
    out
}

fn cmd_fit(
    csv: PathBuf,
    output_dir: PathBuf,
    models: Option<Vec<String>>,
    x_axis: String,
) -> Result<(), CliError> {
    let (models, explicit) = parse_models(models)?;
    let text = std::fs::read_to_string(&csv)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", csv.display())))?;
    let rows = read_variance_csv(&text)?;
    if rows.is_empty() {
        return Err(CliError::usage("results CSV contains no data rows"));
    }
    std::fs::create_dir_all(&output_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", output_dir.display())))?;

    // Group rows into curves along the requested axis.
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    match x_axis.as_str() {
        "n" => {
            for r in &rows {
                let key = format!("{}_{}", r.regime, r.init);
                curves
                    .entry(key.clone())
                    .or_default()
                    .push((r.n_logical as f64, r.var_mean));
            }
            for (key, pts) in &curves {
                let mut ns: Vec<f64> = pts.iter().map(|&(x, _)| x).collect();
                ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ns.dedup();
                if ns.len() != pts.len() {
                    return Err(CliError::usage(format!(
                        "curve {key} has repeated N values (mode sweep?); rerun with --x-axis m"
                    )));
                }
            }
        }
        "m" => {
            for r in &rows {
                let key = format!("{}_{}_N{}", r.regime, r.init, r.n_logical);
                curves
                    .entry(key)
                    .or_default()
                    .push((r.m as f64, r.var_mean));
            }
        }
        other => {
            return Err(CliError::usage(format!(
                "--x-axis must be \"n\" or \"m\", got \"{other}\""
            )))
        }
    }

    let mut comparison = String::new();
    for (curve, mut points) in curves {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut fits: BTreeMap<&'static str, FitReport> = BTreeMap::new();
        for &model in &models {
            if !explicit && points.len() < min_points(model) {
                println!(
                    "{curve} {}: skipped ({} points, needs {})",
                    model.name(),
                    points.len(),
                    min_points(model)
                );
                continue;
            }
            let fit = fit_scaling(&points, model).map_err(CliError::from)?;
            let path = output_dir.join(format!("fit_{curve}_{}.txt", model.name()));
            std::fs::write(&path, fit_report_text(&curve, &fit))
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
            println!(
                "{curve} {}: r2={:.6} aic={:.3}",
                model.name(),
                fit.r_squared,
                fit.aic
            );
            fits.insert(model.name(), fit);
        }
        if let (Some(e), Some(p)) = (fits.get("exponential"), fits.get("power")) {
            let preferred = if e.aic < p.aic { "exponential" } else { "power" };
            comparison.push_str(&format!(
                "curve: {curve}\naic_exponential: {}\naic_power: {}\npreferred: {preferred}\n\n",
                fmt_f64(e.aic),
                fmt_f64(p.aic)
            ));
            println!("{curve} preferred: {preferred}");
        }
    }
    if !comparison.is_empty() {
        let path = output_dir.join("aic_comparison.txt");
        std::fs::write(&path, comparison)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_gradcheck(step: f64) -> Result<(), CliError> {
    let cases = gradcheck_suite();
    let report = run_gradcheck(&cases, step)?;
    println!(
        "configs={} step={step:.1e} max_rel_err={:.3e} worst=[{}]",
        report.cases, report.max_rel_err, report.worst_case
    );
    if report.max_rel_err > GRADCHECK_REL_TOL {
        return Err(CliError::Check(format!(
            "max relative error {:.3e} exceeds {GRADCHECK_REL_TOL:.0e}",
            report.max_rel_err
        )));
    }
    println!("PASS");
    Ok(())
}
