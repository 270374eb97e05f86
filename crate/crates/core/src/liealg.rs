//! Algebra generator bases, lifted Gram matrices, g-purities, and the
//! Haar-variance formula for passive circuits.
//!
//! The purity of an observable is the squared Hilbert–Schmidt norm of its
//! projection onto the span of the lifted algebra generators, computed as
//! v†G⁻¹v from the full-sector Gram matrix G and the projection coefficients
//! v of the postselection-restricted observable. Lifted generators are kept
//! in sparse column form; a single mode-level generator lifts to at most a
//! few entries per column, so Gram assembly never materializes D×D matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, FockBasis, SectorOperator};
use crate::linalg::{sym_eigen, C64, CMat};
use crate::postselect::{retained_indices, OutcomeSet, Regime};

/// Condition-number ceiling for the Gram solve.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgebraKind {
    /// u(m): m² generators including the identity.
    U,
    /// su(m): m²−1 traceless generators.
    Su,
}

/// Hermitian generator basis of u(m) or su(m) (generalized Gell-Mann
/// construction: symmetric and antisymmetric pairs, traceless diagonals,
/// plus the identity for u(m)).
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    m: usize,
    kind: AlgebraKind,
    elements: Vec<CMat>,
}

impl GeneratorBasis {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn elements(&self) -> &[CMat] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

pub fn generator_basis(m: usize, kind: AlgebraKind) -> GeneratorBasis {
    assert!(m >= 2, "generator basis requires m >= 2");
    let mut elements = Vec::with_capacity(m * m);
    for j in 0..m {
        for k in j + 1..m {
            let mut sym = CMat::zeros((m, m));
            sym[[j, k]] = C64::new(1.0, 0.0);
            sym[[k, j]] = C64::new(1.0, 0.0);
            elements.push(sym);
        }
    }
    for j in 0..m {
        for k in j + 1..m {
            let mut asym = CMat::zeros((m, m));
            asym[[j, k]] = C64::new(0.0, -1.0);
            asym[[k, j]] = C64::new(0.0, 1.0);
            elements.push(asym);
        }
    }
    for l in 1..m {
        let norm = (2.0 / (l as f64 * (l + 1) as f64)).sqrt();
        let mut d = CMat::zeros((m, m));
        for i in 0..l {
            d[[i, i]] = C64::new(norm, 0.0);
        }
        d[[l, l]] = C64::new(-norm * l as f64, 0.0);
        elements.push(d);
    }
    if matches!(kind, AlgebraKind::U) {
        let mut id = CMat::zeros((m, m));
        for i in 0..m {
            id[[i, i]] = C64::new(1.0, 0.0);
        }
        elements.push(id);
    }
    GeneratorBasis { m, kind, elements }
}

/// Sparse column form of one lifted generator dπ(B).
struct SparseLift {
    /// cols[s] = (row, value) entries of column s.
    cols: Vec<Vec<(u32, C64)>>,
}

fn sparse_lift(gen: &CMat, basis: &FockBasis) -> SparseLift {
    let m = basis.m();
    let d = basis.dim();
    let mut support: Vec<(usize, usize)> = Vec::new();
    for j in 0..m {
        for k in 0..m {
            if j != k && gen[[j, k]] != C64::new(0.0, 0.0) {
                support.push((j, k));
            }
        }
    }
    let mut cols = Vec::with_capacity(d);
    let mut scratch = vec![0u32; m];
    for s in basis.states() {
        let occ = s.occ();
        let mut entries: Vec<(u32, C64)> = Vec::with_capacity(support.len() + 1);
        let mut diag = C64::new(0.0, 0.0);
        for j in 0..m {
            if occ[j] > 0 {
                diag += gen[[j, j]] * occ[j] as f64;
            }
        }
        if diag != C64::new(0.0, 0.0) {
            let idx = basis.rank(occ) as u32;
            entries.push((idx, diag));
        }
        for &(j, k) in &support {
            if occ[k] == 0 {
                continue;
            }
            scratch.copy_from_slice(occ);
            scratch[k] -= 1;
            scratch[j] += 1;
            let t = basis.rank(&scratch) as u32;
            let w = (occ[k] as f64 * (occ[j] + 1) as f64).sqrt();
            entries.push((t, gen[[j, k]] * w));
        }
        cols.push(entries);
    }
    SparseLift { cols }
}

/// Full-sector Gram of the lifted generators, assembled column by column.
fn gram_full(lifts: &[SparseLift], d: usize) -> Array2<f64> {
    let k = lifts.len();
    let mut g = Array2::<f64>::zeros((k, k));
    let mut bucket: Vec<(u32, usize, C64)> = Vec::new();
    for s in 0..d {
        bucket.clear();
        for (idx, lift) in lifts.iter().enumerate() {
            for &(row, val) in &lift.cols[s] {
                bucket.push((row, idx, val));
            }
        }
        bucket.sort_unstable_by_key(|&(row, _, _)| row);
        let mut start = 0;
        while start < bucket.len() {
            let row = bucket[start].0;
            let mut end = start;
            while end < bucket.len() && bucket[end].0 == row {
                end += 1;
            }
            for a in start..end {
                let (_, ia, va) = bucket[a];
                for b in start..end {
                    let (_, ib, vb) = bucket[b];
                    g[[ia, ib]] += (va.conj() * vb).re;
                }
            }
            start = end;
        }
    }
    g
}

/// Tr[dπ(B)†·X] for dense X, using the sparse lift.
fn sparse_trace_with(lift: &SparseLift, x: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (s, entries) in lift.cols.iter().enumerate() {
        for &(row, val) in entries {
            acc += val.conj() * x[[row as usize, s]];
        }
    }
    acc
}

/// Tr[dπ(B)†·diag(x)] for a diagonal X.
fn sparse_trace_with_diag(lift: &SparseLift, x: &[f64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (s, entries) in lift.cols.iter().enumerate() {
        for &(row, val) in entries {
            if row as usize == s {
                acc += val.conj() * x[s];
            }
        }
    }
    acc.re
}

/// Gram matrix over a restricted subspace: G_{μν} = Tr[(H_μ^eff)† H_ν^eff]
/// with H^eff the [I, I] submatrix of each lifted operator.
pub fn gram_matrix(lifted: &[SectorOperator], retained: &OutcomeSet) -> Result<Array2<f64>> {
    if lifted.is_empty() {
        return Err(Error::invalid("gram_matrix needs at least one operator"));
    }
    if retained.is_empty() {
        return Err(Error::config("gram_matrix over an empty retained set"));
    }
    let first = &lifted[0];
    for op in lifted {
        if !op.same_sector(first) {
            return Err(Error::invalid("gram_matrix operators must share a sector"));
        }
    }
    let k = lifted.len();
    let idx = retained.retained();
    let mut g = Array2::<f64>::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let mut acc = C64::new(0.0, 0.0);
            for &r in idx {
                for &c in idx {
                    acc += lifted[a].entries()[[r, c]].conj() * lifted[b].entries()[[r, c]];
                }
            }
            g[[a, b]] = acc.re;
            g[[b, a]] = acc.re;
        }
    }
    Ok(g)
}

/// Purity of one observable under one regime.
#[derive(Debug, Clone)]
pub struct GPurityReport {
    pub regime: String,
    pub m: usize,
    pub n: u32,
    pub purity: f64,
    pub subspace_dim: usize,
}

struct GramSolver {
    eigvals: Vec<f64>,
    eigvecs: Array2<f64>,
}

impl GramSolver {
    fn new(g: &Array2<f64>) -> Result<Self> {
        let (eigvals, eigvecs) = sym_eigen(g)?;
        let max = *eigvals.last().unwrap();
        let min = *eigvals.first().unwrap();
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if cond.is_nan() || cond > GRAM_CONDITION_LIMIT {
            return Err(Error::DegenerateRestriction { cond });
        }
        Ok(GramSolver { eigvals, eigvecs })
    }

    /// v†G⁻¹v by projection onto the eigenbasis.
    fn quadratic_form(&self, v: &[f64]) -> f64 {
        let k = self.eigvals.len();
        let mut acc = 0.0;
        for i in 0..k {
            let mut dot = 0.0;
            for r in 0..k {
                dot += self.eigvecs[[r, i]] * v[r];
            }
            acc += dot * dot / self.eigvals[i];
        }
        acc
    }
}

/// g-purity of an observable: project the regime-pulled-back observable onto
/// the lifted algebra span and return the squared norm (Gram solve, no
/// explicit inverse). The Gram is taken over the full sector; restriction
/// enters through the projection coefficients.
pub fn g_purity(
    obs: &SectorOperator,
    regime: &Regime,
    basis: &FockBasis,
    kind: AlgebraKind,
) -> Result<GPurityReport> {
    let gens = generator_basis(basis.m(), kind);
    g_purity_with_basis(obs, regime, basis, &gens)
}

/// Same as [`g_purity`] with a caller-supplied generator basis (any
/// invertible recombination gives the same purity).
pub fn g_purity_with_basis(
    obs: &SectorOperator,
    regime: &Regime,
    basis: &FockBasis,
    gens: &GeneratorBasis,
) -> Result<GPurityReport> {
    if obs.m() != basis.m() || obs.n() != basis.n() {
        return Err(Error::invalid("observable sector does not match basis"));
    }
    let outcome = retained_indices(regime, basis)?;
    let pulled = crate::postselect::pulled_back_observable(regime, obs, basis)?;

    let lifts: Vec<SparseLift> = gens
        .elements()
        .iter()
        .map(|g| sparse_lift(g, basis))
        .collect();
    let gram = gram_full(&lifts, basis.dim());
    let solver = GramSolver::new(&gram)?;
    let v: Vec<f64> = lifts
        .iter()
        .map(|l| sparse_trace_with(l, pulled.entries()).re)
        .collect();
    Ok(GPurityReport {
        regime: regime.name(),
        m: basis.m(),
        n: basis.n(),
        purity: solver.quadratic_form(&v),
        subspace_dim: outcome.len(),
    })
}

/// Fast path for diagonal observables (e.g. the success projector): avoids
/// any dense D×D storage, so larger sectors stay tractable.
pub fn purity_of_diagonal(
    diag: &[f64],
    regime: &Regime,
    basis: &FockBasis,
    kind: AlgebraKind,
) -> Result<GPurityReport> {
    if diag.len() != basis.dim() {
        return Err(Error::invalid("diagonal length does not match sector"));
    }
    let outcome = retained_indices(regime, basis)?;
    let mut pulled = vec![0.0; basis.dim()];
    for &i in outcome.retained() {
        pulled[i] = diag[i];
    }
    let gens = generator_basis(basis.m(), kind);
    let lifts: Vec<SparseLift> = gens
        .elements()
        .iter()
        .map(|g| sparse_lift(g, basis))
        .collect();
    let gram = gram_full(&lifts, basis.dim());
    let solver = GramSolver::new(&gram)?;
    let v: Vec<f64> = lifts
        .iter()
        .map(|l| sparse_trace_with_diag(l, &pulled))
        .collect();
    Ok(GPurityReport {
        regime: regime.name(),
        m: basis.m(),
        n: basis.n(),
        purity: solver.quadratic_form(&v),
        subspace_dim: outcome.len(),
    })
}

/// Purity of the reference observable (identity pulled back through the
/// regime, i.e. the success projector K†K) with the u(m) algebra.
pub fn reference_purity(regime: &Regime, basis: &FockBasis) -> Result<GPurityReport> {
    let diag = vec![1.0; basis.dim()];
    purity_of_diagonal(&diag, regime, basis, AlgebraKind::U)
}

/// Haar gradient-variance formula for passive photonic circuits:
/// Var = P_su(ρ)·P_su(O)/(m²−1). Only su(m) contributes; the u(1) center
/// moves the mean. Exactness requires O (or ρ) inside the lifted algebra
/// image; callers are responsible for that applicability condition.
pub fn predicted_variance(rho: &SectorOperator, obs: &SectorOperator, m: usize) -> Result<f64> {
    if rho.m() != m || obs.m() != m {
        return Err(Error::invalid("mode count does not match sector operators"));
    }
    if !rho.same_sector(obs) {
        return Err(Error::invalid("state and observable live on different sectors"));
    }
    let basis = enumerate_basis(m, rho.n());
    let gens = generator_basis(m, AlgebraKind::Su);
    let lifts: Vec<SparseLift> = gens
        .elements()
        .iter()
        .map(|g| sparse_lift(g, &basis))
        .collect();
    let gram = gram_full(&lifts, basis.dim());
    let solver = GramSolver::new(&gram)?;
    let v_rho: Vec<f64> = lifts
        .iter()
        .map(|l| sparse_trace_with(l, rho.entries()).re)
        .collect();
    let v_obs: Vec<f64> = lifts
        .iter()
        .map(|l| sparse_trace_with(l, obs.entries()).re)
        .collect();
    let p_rho = solver.quadratic_form(&v_rho);
    let p_obs = solver.quadratic_form(&v_obs);
    Ok(p_rho * p_obs / (m * m - 1) as f64)
}
