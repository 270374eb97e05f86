//! Monte-Carlo gradient-variance estimation, sweeps over system sizes,
//! scaling-law fits with AIC comparison, and CSV persistence.
//!
//! Determinism contract: every sample draws from substreams keyed by
//! (master_seed, cell, sample index), cells run in sorted key order, and
//! aggregation is order-insensitive, so output bytes do not depend on worker
//! count or cell execution order.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::ensembles::{sample_target, Initializer, SeedPolicy};
use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, sector_dimension};
use crate::liealg::{reference_purity, GPurityReport};
use crate::linalg::solve_dense;
use crate::loss::{
    bhattacharyya_loss, postselected_distribution, GradientWorkspace,
};
use crate::mesh::MeshParams;
use crate::postselect::{default_input, retained_indices, Regime};

/// One per-sample gradient vector in R^P.
pub type GradientSample = Vec<f64>;

/// Grid description for a variance sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub regimes: Vec<Regime>,
    pub inits: Vec<Initializer>,
    /// Logical sizes N. Fock/unbunched cells use m = 2N unless `m_values`
    /// is given; rail codes always use m = rN.
    pub n_values: Vec<usize>,
    /// Explicit mode sweep with fixed n = N (fock/unbunched only).
    pub m_values: Option<Vec<usize>>,
    pub samples: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    /// Refuse cells whose sector dimension exceeds this cap.
    pub d_cap: u64,
    /// Worker threads; 0 = available parallelism.
    pub workers: usize,
}

pub const DEFAULT_D_CAP: u64 = 50_000;

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub regime_name: String,
    pub init_name: String,
    pub n_logical: usize,
    pub m: usize,
    pub n: u32,
}

impl Cell {
    pub fn regime(&self) -> Regime {
        Regime::parse(&self.regime_name).expect("cell regimes are pre-validated")
    }

    pub fn init(&self) -> Initializer {
        Initializer::parse(&self.init_name).expect("cell inits are pre-validated")
    }

    fn tag(&self, purpose: &str) -> String {
        format!(
            "{purpose}/{}/{}/N={}/m={}/n={}",
            self.regime_name, self.init_name, self.n_logical, self.m, self.n
        )
    }
}

/// Expand and validate the full cell grid before any compute.
pub fn cells(config: &SweepConfig) -> Result<Vec<Cell>> {
    if config.samples < 2 {
        return Err(Error::config("sweep needs at least 2 samples per cell"));
    }
    if config.n_values.is_empty() {
        return Err(Error::config("sweep needs a non-empty N range"));
    }
    if config.epsilon <= 0.0 {
        return Err(Error::config("floor epsilon must be positive"));
    }
    if config.regimes.is_empty() || config.inits.is_empty() {
        return Err(Error::config("sweep needs at least one regime and initializer"));
    }
    let mut out = Vec::new();
    for regime in &config.regimes {
        for init in &config.inits {
            for &n_logical in &config.n_values {
                if n_logical == 0 {
                    return Err(Error::config("logical size N must be >= 1"));
                }
                let mode_counts: Vec<usize> = match regime {
                    Regime::RailCode { rails } => {
                        if config.m_values.is_some() {
                            return Err(Error::config(format!(
                                "regime {} forces m = {}·N and cannot join an explicit mode sweep",
                                regime.name(),
                                rails
                            )));
                        }
                        vec![rails * n_logical]
                    }
                    _ => config
                        .m_values
                        .clone()
                        .unwrap_or_else(|| vec![2 * n_logical]),
                };
                for m in mode_counts {
                    let n = n_logical as u32;
                    if m < 2 {
                        return Err(Error::config(format!("cell needs m >= 2, got m={m}")));
                    }
                    regime.validate(m, n)?;
                    default_input(regime, m, n)?;
                    let d = sector_dimension(m, n);
                    if d > config.d_cap {
                        return Err(Error::config(format!(
                            "cell ({}, {}, N={n_logical}, m={m}, n={n}) has sector dimension {d} > cap {}",
                            regime.name(),
                            init.name(),
                            config.d_cap
                        )));
                    }
                    out.push(Cell {
                        regime_name: regime.name(),
                        init_name: init.name().to_string(),
                        n_logical,
                        m,
                        n,
                    });
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

struct CellRunner<'a> {
    config: &'a SweepConfig,
    cell: &'a Cell,
    workspace: GradientWorkspace,
    policy: SeedPolicy,
    params_tag: String,
    target_tag: String,
}

impl<'a> CellRunner<'a> {
    fn new(config: &'a SweepConfig, cell: &'a Cell) -> Result<Self> {
        let regime = cell.regime();
        let basis = enumerate_basis(cell.m, cell.n);
        let input = default_input(&regime, cell.m, cell.n)?;
        let workspace = GradientWorkspace::new(&regime, basis, input)?;
        Ok(CellRunner {
            config,
            cell,
            workspace,
            policy: SeedPolicy::new(config.master_seed),
            params_tag: cell.tag("params"),
            target_tag: cell.tag("target"),
        })
    }

    fn sample(&self, index: u64) -> Result<GradientSample> {
        let params = self
            .cell
            .init()
            .init(self.cell.m, &mut self.policy.stream(&self.params_tag, index))?;
        let q = sample_target(
            self.workspace.outcomes(),
            &mut self.policy.stream(&self.target_tag, index),
        )?;
        let (_, grad) = self
            .workspace
            .loss_and_gradient(&params, &q, self.config.epsilon)?;
        Ok(grad)
    }
}

/// One fresh random circuit and one fresh random target, producing the
/// gradient vector for (cell, sample_index). Deterministic in its arguments.
pub fn run_sample(config: &SweepConfig, cell: &Cell, sample_index: u64) -> Result<GradientSample> {
    CellRunner::new(config, cell)?.sample(sample_index)
}

/// Variance statistics of one cell, without its key.
#[derive(Debug, Clone, Copy)]
pub struct VarianceSummary {
    /// V̂ = (1/P)·Σ_μ Var_s[g_μ], with the unbiased S−1 denominator.
    pub per_param_mean_variance: f64,
    /// Bootstrap standard error of V̂ (200 resamples).
    pub standard_error: f64,
    pub param_count: usize,
    pub samples_used: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

fn mean_component_variance(samples: &[&GradientSample], p: usize) -> f64 {
    let s = samples.len();
    let mut acc = 0.0;
    for mu in 0..p {
        let mean: f64 = samples.iter().map(|g| g[mu]).sum::<f64>() / s as f64;
        let var: f64 = samples
            .iter()
            .map(|g| {
                let d = g[mu] - mean;
                d * d
            })
            .sum::<f64>()
            / (s - 1) as f64;
        acc += var;
    }
    acc / p as f64
}

/// Per-component empirical variance averaged over parameters, with a
/// bootstrap standard error drawn from `rng`.
pub fn estimate_variance(
    samples: &[GradientSample],
    rng: &mut impl Rng,
) -> Result<VarianceSummary> {
    if samples.len() < 2 {
        return Err(Error::invalid("variance estimation needs at least 2 samples"));
    }
    let p = samples[0].len();
    if p == 0 || samples.iter().any(|g| g.len() != p) {
        return Err(Error::invalid("gradient samples must share a non-zero length"));
    }
    let refs: Vec<&GradientSample> = samples.iter().collect();
    let v_hat = mean_component_variance(&refs, p);

    let s = samples.len();
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample: Vec<&GradientSample> = Vec::with_capacity(s);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        resample.clear();
        for _ in 0..s {
            resample.push(&samples[rng.gen_range(0..s)]);
        }
        boot.push(mean_component_variance(&resample, p));
    }
    let bmean: f64 = boot.iter().sum::<f64>() / boot.len() as f64;
    let bvar: f64 = boot
        .iter()
        .map(|v| (v - bmean) * (v - bmean))
        .sum::<f64>()
        / (boot.len() - 1) as f64;

    Ok(VarianceSummary {
        per_param_mean_variance: v_hat,
        standard_error: bvar.sqrt(),
        param_count: p,
        samples_used: s,
    })
}

/// One output row of a variance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub regime: String,
    pub init: String,
    pub n_logical: usize,
    pub m: usize,
    pub n: u32,
    pub param_count: usize,
    pub samples: usize,
    pub var_mean: f64,
    pub var_se: f64,
    pub master_seed: u64,
    pub epsilon: f64,
}

pub const VARIANCE_CSV_HEADER: &str = "regime,init,N,m,n,P,S,var_mean,var_se,master_seed,epsilon";

/// 17 significant digits: round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn variance_row(est: &VarianceEstimate) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        est.regime,
        est.init,
        est.n_logical,
        est.m,
        est.n,
        est.param_count,
        est.samples,
        fmt_f64(est.var_mean),
        fmt_f64(est.var_se),
        est.master_seed,
        fmt_f64(est.epsilon)
    )
}

/// Run the full grid, writing one row per cell (sorted key order) with an
/// incremental flush after every cell.
pub fn sweep<W: Write>(config: &SweepConfig, out: &mut W) -> Result<Vec<VarianceEstimate>> {
    let grid = cells(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::config(format!("failed to build worker pool: {e}")))?;

    writeln!(out, "{VARIANCE_CSV_HEADER}")?;
    out.flush()?;

    let mut estimates = Vec::with_capacity(grid.len());
    for cell in &grid {
        let runner = CellRunner::new(config, cell)?;
        let samples: Vec<GradientSample> = pool.install(|| {
            (0..config.samples as u64)
                .into_par_iter()
                .map(|i| runner.sample(i))
                .collect::<Result<Vec<_>>>()
        })?;
        let mut boot_rng = runner.policy.stream(&cell.tag("bootstrap"), 0);
        let summary = estimate_variance(&samples, &mut boot_rng)?;
        let est = VarianceEstimate {
            regime: cell.regime_name.clone(),
            init: cell.init_name.clone(),
            n_logical: cell.n_logical,
            m: cell.m,
            n: cell.n,
            param_count: summary.param_count,
            samples: summary.samples_used,
            var_mean: summary.per_param_mean_variance,
            var_se: summary.standard_error,
            master_seed: config.master_seed,
            epsilon: config.epsilon,
        };
        writeln!(out, "{}", variance_row(&est))?;
        out.flush()?;
        estimates.push(est);
    }
    Ok(estimates)
}

/// Parse a variance CSV produced by [`sweep`]; errors carry line numbers.
pub fn read_variance_csv(content: &str) -> Result<Vec<VarianceEstimate>> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == VARIANCE_CSV_HEADER => {}
        Some((i, header)) => {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("unexpected header \"{header}\""),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".to_string(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 11 fields, got {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid {what} \"{s}\""),
            })
        };
        let parse_f64 = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid {what} \"{s}\""),
            })
        };
        rows.push(VarianceEstimate {
            regime: fields[0].to_string(),
            init: fields[1].to_string(),
            n_logical: parse_usize(fields[2], "N")?,
            m: parse_usize(fields[3], "m")?,
            n: parse_usize(fields[4], "n")? as u32,
            param_count: parse_usize(fields[5], "P")?,
            samples: parse_usize(fields[6], "S")?,
            var_mean: parse_f64(fields[7], "var_mean")?,
            var_se: parse_f64(fields[8], "var_se")?,
            master_seed: fields[9].parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid master_seed \"{}\"", fields[9]),
            })?,
            epsilon: parse_f64(fields[10], "epsilon")?,
        });
    }
    Ok(rows)
}

/// Scaling-law families fitted to V̂ curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingModel {
    /// V ≈ C·exp(−a·N); linear in (N, ln V).
    Exponential,
    /// V ≈ C·N^{−c}; linear in (ln N, ln V).
    Power,
    /// Cubic polynomial in log10 V versus N.
    CubicLog,
}

impl ScalingModel {
    pub fn name(&self) -> &'static str {
        match self {
            ScalingModel::Exponential => "exponential",
            ScalingModel::Power => "power",
            ScalingModel::CubicLog => "cubic_log",
        }
    }

    pub fn parse(name: &str) -> Result<ScalingModel> {
        match name {
            "exponential" | "exp" => Ok(ScalingModel::Exponential),
            "power" => Ok(ScalingModel::Power),
            "cubic_log" | "cubic" => Ok(ScalingModel::CubicLog),
            other => Err(Error::config(format!("unknown model \"{other}\""))),
        }
    }

    fn coefficient_count(&self) -> usize {
        match self {
            ScalingModel::Exponential | ScalingModel::Power => 2,
            ScalingModel::CubicLog => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: ScalingModel,
    /// [C, a] for exponential; [C, c] for power; [b0..b3] for cubic_log.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub aic: f64,
    pub points: usize,
}

fn ols_line(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let xm: f64 = x.iter().sum::<f64>() / n;
    let ym: f64 = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(&a, &b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let tss: f64 = y.iter().map(|&b| (b - ym) * (b - ym)).sum();
    (intercept, slope, rss, tss)
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss <= 0.0 {
        if rss <= 1e-24 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - rss / tss
    }
}

/// AIC = 2k + n·ln(RSS/n); RSS is clamped away from zero so exact fits keep
/// the criterion finite.
fn aic(k: usize, n: usize, rss: f64) -> f64 {
    2.0 * k as f64 + n as f64 * (rss.max(f64::MIN_POSITIVE) / n as f64).ln()
}

/// Ordinary least squares in transformed coordinates for one model family.
pub fn fit_scaling(points: &[(f64, f64)], model: ScalingModel) -> Result<FitReport> {
    let min_points = match model {
        ScalingModel::CubicLog => 5,
        _ => 3,
    };
    if points.len() < min_points {
        return Err(Error::invalid(format!(
            "{} fit needs at least {min_points} points, got {}",
            model.name(),
            points.len()
        )));
    }
    if points.iter().any(|&(_, v)| v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid("fit requires strictly positive finite values"));
    }
    if matches!(model, ScalingModel::Power) && points.iter().any(|&(x, _)| x <= 0.0) {
        return Err(Error::invalid("power-law fit requires positive abscissae"));
    }

    let n = points.len();
    let report = match model {
        ScalingModel::Exponential => {
            let xs: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
            let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
            let (intercept, slope, rss, tss) = ols_line(&xs, &ys);
            FitReport {
                model,
                coefficients: vec![intercept.exp(), -slope],
                r_squared: r_squared(rss, tss),
                aic: aic(model.coefficient_count(), n, rss),
                points: n,
            }
        }
        ScalingModel::Power => {
            let xs: Vec<f64> = points.iter().map(|&(x, _)| x.ln()).collect();
            let ys: Vec<f64> = points.iter().map(|&(_, v)| v.ln()).collect();
            let (intercept, slope, rss, tss) = ols_line(&xs, &ys);
            FitReport {
                model,
                coefficients: vec![intercept.exp(), -slope],
                r_squared: r_squared(rss, tss),
                aic: aic(model.coefficient_count(), n, rss),
                points: n,
            }
        }
        ScalingModel::CubicLog => {
            let ys: Vec<f64> = points.iter().map(|&(_, v)| v.log10()).collect();
            let design: Vec<[f64; 4]> = points
                .iter()
                .map(|&(x, _)| [1.0, x, x * x, x * x * x])
                .collect();
            let mut normal = Array2::<f64>::zeros((4, 4));
            let mut rhs = [0.0f64; 4];
            for (row, &y) in design.iter().zip(ys.iter()) {
                for a in 0..4 {
                    for b in 0..4 {
                        normal[[a, b]] += row[a] * row[b];
                    }
                    rhs[a] += row[a] * y;
                }
            }
            let coeffs = solve_dense(&normal, &rhs)?;
            let rss: f64 = design
                .iter()
                .zip(ys.iter())
                .map(|(row, &y)| {
                    let fit: f64 = (0..4).map(|a| coeffs[a] * row[a]).sum();
                    let r = y - fit;
                    r * r
                })
                .sum();
            let ym: f64 = ys.iter().sum::<f64>() / n as f64;
            let tss: f64 = ys.iter().map(|&y| (y - ym) * (y - ym)).sum();
            FitReport {
                model,
                coefficients: coeffs,
                r_squared: r_squared(rss, tss),
                aic: aic(model.coefficient_count(), n, rss),
                points: n,
            }
        }
    };
    Ok(report)
}

/// Purity of the reference observable for every (regime, m) pair with
/// n = m/2 photons, sorted by (regime, m).
pub fn purity_table(regimes: &[Regime], m_values: &[usize]) -> Result<Vec<GPurityReport>> {
    if regimes.is_empty() || m_values.is_empty() {
        return Err(Error::config("purity table needs regimes and mode counts"));
    }
    let mut rows = Vec::new();
    for regime in regimes {
        for &m in m_values {
            if m < 2 || m % 2 != 0 {
                return Err(Error::config(format!(
                    "purity table uses n = m/2 photons and needs even m >= 2, got m={m}"
                )));
            }
            let n = (m / 2) as u32;
            regime.validate(m, n)?;
            let basis = enumerate_basis(m, n);
            rows.push(reference_purity(regime, &basis)?);
        }
    }
    rows.sort_by(|a, b| (a.regime.clone(), a.m).cmp(&(b.regime.clone(), b.m)));
    Ok(rows)
}

pub const PURITY_CSV_HEADER: &str = "regime,m,n,subspace_dim,purity";

pub fn write_purity_csv<W: Write>(rows: &[GPurityReport], out: &mut W) -> Result<()> {
    writeln!(out, "{PURITY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.regime,
            r.m,
            r.n,
            r.subspace_dim,
            fmt_f64(r.purity)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One configuration of the finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub regime: Regime,
    pub m: usize,
    pub n: u32,
    pub init: Initializer,
    pub seed: u64,
}

/// The default 30-configuration suite spanning all regimes, m ≤ 8, n ≤ 4.
pub fn gradcheck_suite() -> Vec<GradCheckCase> {
    use Initializer::{Beta, Haar, Uniform};
    let fock = Regime::AllowBunching;
    let cf = Regime::CollisionFree;
    let dr = Regime::RailCode { rails: 2 };
    let r3 = Regime::RailCode { rails: 3 };
    let table: [(Regime, usize, u32, Initializer); 30] = [
        (fock, 2, 1, Uniform),
        (fock, 3, 1, Beta),
        (fock, 3, 2, Haar),
        (fock, 4, 2, Uniform),
        (fock, 5, 2, Beta),
        (fock, 5, 3, Haar),
        (fock, 6, 3, Uniform),
        (fock, 7, 3, Beta),
        (fock, 8, 4, Haar),
        (fock, 4, 3, Uniform),
        (cf, 2, 1, Haar),
        (cf, 3, 2, Uniform),
        (cf, 4, 2, Beta),
        (cf, 4, 3, Haar),
        (cf, 5, 2, Uniform),
        (cf, 5, 3, Beta),
        (cf, 6, 3, Haar),
        (cf, 6, 2, Uniform),
        (cf, 7, 3, Beta),
        (cf, 8, 4, Uniform),
        (dr, 2, 1, Uniform),
        (dr, 4, 2, Beta),
        (dr, 4, 2, Haar),
        (dr, 6, 3, Uniform),
        (dr, 6, 3, Beta),
        (dr, 8, 4, Haar),
        (dr, 8, 4, Uniform),
        (dr, 2, 1, Beta),
        (r3, 3, 1, Uniform),
        (r3, 6, 2, Haar),
    ];
    table
        .into_iter()
        .enumerate()
        .map(|(i, (regime, m, n, init))| GradCheckCase {
            regime,
            m,
            n,
            init,
            seed: i as u64,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error among components that fail the absolute window.
    pub max_rel_err: f64,
    pub cases: usize,
    pub worst_case: String,
}

pub const GRADCHECK_REL_TOL: f64 = 1e-6;
pub const GRADCHECK_ABS_TOL: f64 = 1e-9;

/// Compare the analytic gradient against central finite differences of the
/// loss for every suite case.
pub fn run_gradcheck(cases: &[GradCheckCase], step: f64) -> Result<GradCheckReport> {
    if step <= 0.0 {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let policy = SeedPolicy::new(1);
    let mut max_rel: f64 = 0.0;
    let mut worst = String::from("none");
    for case in cases {
        let basis = enumerate_basis(case.m, case.n);
        let input = default_input(&case.regime, case.m, case.n)?;
        let outcomes = retained_indices(&case.regime, &basis)?;
        let tag = format!("gradcheck/{}/{}/{}", case.regime.name(), case.m, case.n);
        let params = case
            .init
            .init(case.m, &mut policy.stream(&tag, case.seed))?;
        let q = sample_target(
            &outcomes,
            &mut policy.stream(&format!("{tag}/target"), case.seed),
        )?;
        let grad = crate::loss::bhattacharyya_gradient(
            &params,
            &input,
            &case.regime,
            &basis,
            &q,
            crate::loss::DEFAULT_FLOOR,
        )?;
        let flat = params.to_flat();
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            plus[k] += step;
            let mut minus = flat.clone();
            minus[k] -= step;
            let eval = |f: &[f64]| -> Result<f64> {
                let pp = MeshParams::from_flat(case.m, f)?;
                let d = postselected_distribution(
                    &pp,
                    &input,
                    &case.regime,
                    &basis,
                    crate::loss::DEFAULT_FLOOR,
                )?;
                bhattacharyya_loss(d.probabilities(), &q)
            };
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * step);
            let diff = (grad[k] - fd).abs();
            if diff <= GRADCHECK_ABS_TOL {
                continue;
            }
            let rel = diff / grad[k].abs().max(fd.abs());
            if rel > max_rel {
                max_rel = rel;
                worst = format!(
                    "{} m={} n={} {} k={k}",
                    case.regime.name(),
                    case.m,
                    case.n,
                    case.init.name()
                );
            }
        }
    }
    Ok(GradCheckReport {
        max_rel_err: max_rel,
        cases: cases.len(),
        worst_case: worst,
    })
}
