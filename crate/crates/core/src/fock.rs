//! Fock-sector machinery: basis enumeration, matrix permanents, and the lift
//! of mode unitaries / generators from m modes to the n-photon sector.
//!
//! The lift convention is second quantization with π(S) a_j† π(S)† = Σ_i S_ij a_i†,
//! giving the matrix element ⟨t|π(S)|s⟩ = Per(S[t|s]) / sqrt(∏ t_i! ∏ s_j!),
//! where S[t|s] repeats column j s_j times and row i t_i times.

use std::fmt;
use std::sync::OnceLock;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::linalg::{dagger, identity, unitarity_residual, C64, CMat, CVec};

pub const UNITARY_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Photon counts per mode; the label of one Fock basis state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationVector {
    occ: Vec<u32>,
}

impl OccupationVector {
    pub fn new(occ: Vec<u32>) -> Self {
        OccupationVector { occ }
    }

    pub fn occ(&self) -> &[u32] {
        &self.occ
    }

    pub fn modes(&self) -> usize {
        self.occ.len()
    }

    /// Total photon number Σ_j occ_j.
    pub fn photons(&self) -> u32 {
        self.occ.iter().sum()
    }
}

impl From<Vec<u32>> for OccupationVector {
    fn from(occ: Vec<u32>) -> Self {
        OccupationVector::new(occ)
    }
}

impl From<&[u32]> for OccupationVector {
    fn from(occ: &[u32]) -> Self {
        OccupationVector::new(occ.to_vec())
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.occ.iter().map(|k| k.to_string()).join(","))
    }
}

/// The n-photon, m-mode sector basis in strictly decreasing lexicographic
/// order, with an exact combinatorial rank function as the reverse index.
#[derive(Debug, Clone)]
pub struct FockBasis {
    m: usize,
    n: u32,
    states: Vec<OccupationVector>,
    /// binom[a][b] = C(a, b), sized to cover rank computations.
    binom: Vec<Vec<u64>>,
}

/// Number of states in the (m, n) sector: C(m+n−1, n).
pub fn sector_dimension(m: usize, n: u32) -> u64 {
    binomial_table(m + n as usize + 1)[m + n as usize - 1][n as usize]
}

fn binomial_table(max: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; max + 1]; max + 1];
    for a in 0..=max {
        t[a][0] = 1;
        for b in 1..=a {
            t[a][b] = t[a - 1][b - 1] + if b <= a - 1 { t[a - 1][b] } else { 0 };
        }
    }
    t
}

/// Enumerate the full (m, n) sector. Preconditions: m ≥ 1 (asserted).
pub fn enumerate_basis(m: usize, n: u32) -> FockBasis {
    assert!(m >= 1, "enumerate_basis requires m >= 1");
    let mut states = Vec::new();
    let mut current = vec![0u32; m];
    fill_states(&mut states, &mut current, 0, n);
    let basis = FockBasis {
        m,
        n,
        states,
        binom: binomial_table(m + n as usize + 1),
    };
    debug_assert_eq!(basis.states.len() as u64, sector_dimension(m, n));
    basis
}

fn fill_states(out: &mut Vec<OccupationVector>, current: &mut Vec<u32>, mode: usize, left: u32) {
    if mode == current.len() - 1 {
        current[mode] = left;
        out.push(OccupationVector::new(current.clone()));
        return;
    }
    // Decreasing lexicographic order: largest count first in the leading mode.
    for k in (0..=left).rev() {
        current[mode] = k;
        fill_states(out, current, mode + 1, left - k);
    }
}

impl FockBasis {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationVector] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &OccupationVector {
        &self.states[idx]
    }

    /// Exact reverse lookup: position of `s` in the canonical ordering.
    pub fn index(&self, s: &OccupationVector) -> Result<usize> {
        if s.modes() != self.m {
            return Err(Error::invalid(format!(
                "state has {} modes, basis has {}",
                s.modes(),
                self.m
            )));
        }
        if s.photons() != self.n {
            return Err(Error::invalid(format!(
                "state has {} photons, sector has {}",
                s.photons(),
                self.n
            )));
        }
        Ok(self.rank(s.occ()))
    }

    /// Rank in decreasing lex order, counting predecessors combinatorially.
    pub(crate) fn rank(&self, occ: &[u32]) -> usize {
        let mut rank = 0u64;
        let mut rem = self.n;
        for (j, &sj) in occ.iter().enumerate() {
            let modes_after = self.m - j - 1;
            // States sharing occ[..j] with a larger entry at j fill
            // C(rem − v + modes_after − 1, modes_after − 1) slots for each v > sj.
            if rem > sj && modes_after >= 1 {
                let w = (rem - sj - 1) as usize;
                rank += self.binom[w + modes_after][modes_after];
            }
            rem -= sj;
        }
        rank as usize
    }
}

/// m×m mode-level unitary, validated on construction.
#[derive(Debug, Clone)]
pub struct ModeUnitary {
    entries: CMat,
}

impl ModeUnitary {
    /// Validates ‖S†S − I‖_F ≤ 1e−10.
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::invalid("mode unitary must be square"));
        }
        let res = unitarity_residual(&entries);
        if res > UNITARY_TOL {
            return Err(Error::validation(format!(
                "matrix is not unitary: residual {res:.3e} > {UNITARY_TOL:.0e}"
            )));
        }
        Ok(ModeUnitary { entries })
    }

    pub fn identity(m: usize) -> Self {
        ModeUnitary {
            entries: identity(m),
        }
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        ModeUnitary {
            entries: dagger(&self.entries),
        }
    }
}

/// Dense D×D operator tagged with its (m, n) sector.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    m: usize,
    n: u32,
    entries: CMat,
}

impl SectorOperator {
    pub fn new(m: usize, n: u32, entries: CMat) -> Result<Self> {
        let d = sector_dimension(m, n) as usize;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::invalid(format!(
                "sector ({m},{n}) has dimension {d}, matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(SectorOperator { m, n, entries })
    }

    pub fn identity(basis: &FockBasis) -> Self {
        SectorOperator {
            m: basis.m(),
            n: basis.n(),
            entries: identity(basis.dim()),
        }
    }

    pub fn from_diagonal(basis: &FockBasis, diag: &[f64]) -> Result<Self> {
        if diag.len() != basis.dim() {
            return Err(Error::invalid("diagonal length does not match sector"));
        }
        let mut entries = CMat::zeros((basis.dim(), basis.dim()));
        for (i, &v) in diag.iter().enumerate() {
            entries[[i, i]] = C64::new(v, 0.0);
        }
        Ok(SectorOperator {
            m: basis.m(),
            n: basis.n(),
            entries,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut CMat {
        &mut self.entries
    }

    pub fn same_sector(&self, other: &SectorOperator) -> bool {
        self.m == other.m && self.n == other.n
    }
}

fn factorial(k: u32) -> f64 {
    static TABLE: OnceLock<[f64; 31]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [1.0f64; 31];
        for i in 1..31 {
            t[i] = t[i - 1] * i as f64;
        }
        t
    });
    table[k as usize]
}

/// Exact permanent by Ryser's formula with Gray-code column updates, O(k·2^k).
pub fn permanent(a: &CMat) -> Result<C64> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::invalid(format!(
            "permanent requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if k > 30 {
        return Err(Error::invalid(format!("permanent limited to k <= 30, got {k}")));
    }
    // Column-major flat copy keeps the hot loop on plain slices.
    let mut cols = vec![C64::new(0.0, 0.0); k * k];
    for c in 0..k {
        for r in 0..k {
            cols[c * k + r] = a[[r, c]];
        }
    }
    Ok(permanent_flat(k, &cols))
}

/// Ryser kernel over a column-major k×k buffer; `cols.len() == k·k`.
pub(crate) fn permanent_flat(k: usize, cols: &[C64]) -> C64 {
    debug_assert_eq!(cols.len(), k * k);
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut row_sums = vec![C64::new(0.0, 0.0); k];
    let mut total = C64::new(0.0, 0.0);
    let mut gray_prev: u64 = 0;
    for g in 1u64..(1u64 << k) {
        let gray = g ^ (g >> 1);
        let changed = gray ^ gray_prev;
        let col = changed.trailing_zeros() as usize;
        let column = &cols[col * k..(col + 1) * k];
        if gray & changed != 0 {
            for (s, &v) in row_sums.iter_mut().zip(column) {
                *s += v;
            }
        } else {
            for (s, &v) in row_sums.iter_mut().zip(column) {
                *s -= v;
            }
        }
        gray_prev = gray;
        let mut prod = C64::new(1.0, 0.0);
        for s in &row_sums {
            prod *= *s;
        }
        if gray.count_ones() % 2 == 0 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if k % 2 == 0 {
        total = -total;
    }
    total
}

/// Test oracle: permanent by explicit sum over permutations, O(k!·k).
pub fn permanent_naive(a: &CMat) -> Result<C64> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::invalid("permanent_naive requires a square matrix"));
    }
    if k > 9 {
        return Err(Error::invalid(format!(
            "permanent_naive limited to k <= 9, got {k}"
        )));
    }
    if k == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let mut total = C64::new(0.0, 0.0);
    for perm in (0..k).permutations(k) {
        let mut prod = C64::new(1.0, 0.0);
        for (row, &col) in perm.iter().enumerate() {
            prod *= a[[row, col]];
        }
        total += prod;
    }
    Ok(total)
}

/// ⟨t|π(S)|s⟩, the n-photon transition amplitude between Fock states.
pub fn transition_amplitude(
    s_mat: &ModeUnitary,
    input: &OccupationVector,
    output: &OccupationVector,
) -> Result<C64> {
    let m = s_mat.m();
    if input.modes() != m || output.modes() != m {
        return Err(Error::invalid("occupation length does not match mode count"));
    }
    if input.photons() != output.photons() {
        return Err(Error::invalid(format!(
            "photon number mismatch: input {} vs output {}",
            input.photons(),
            output.photons()
        )));
    }
    let n = input.photons() as usize;
    let mut sub = CMat::zeros((n, n));
    let mut col = 0;
    for (j, &sj) in input.occ().iter().enumerate() {
        for _ in 0..sj {
            let mut row = 0;
            for (i, &ti) in output.occ().iter().enumerate() {
                for _ in 0..ti {
                    sub[[row, col]] = s_mat.entries()[[i, j]];
                    row += 1;
                }
            }
            col += 1;
        }
    }
    let per = permanent(&sub)?;
    let norm: f64 = input
        .occ()
        .iter()
        .chain(output.occ().iter())
        .map(|&k| factorial(k))
        .product();
    Ok(per / norm.sqrt())
}

/// Lift an m×m unitary to the D×D sector unitary π(S).
pub fn lift_unitary(s_mat: &ModeUnitary, basis: &FockBasis) -> Result<SectorOperator> {
    if s_mat.m() != basis.m() {
        return Err(Error::invalid("mode count mismatch between unitary and basis"));
    }
    let d = basis.dim();
    let mut out = CMat::zeros((d, d));
    for col in 0..d {
        let column = evolve_state(s_mat, basis.state(col), basis)?;
        for row in 0..d {
            out[[row, col]] = column[row];
        }
    }
    SectorOperator::new(basis.m(), basis.n(), out)
}

/// Column of π(S) at the input state: amplitudes of π(S)|input⟩.
pub fn evolve_state(
    s_mat: &ModeUnitary,
    input: &OccupationVector,
    basis: &FockBasis,
) -> Result<CVec> {
    if s_mat.m() != basis.m() || input.modes() != basis.m() {
        return Err(Error::invalid("mode count mismatch"));
    }
    if input.photons() != basis.n() {
        return Err(Error::invalid(format!(
            "input has {} photons, sector has {}",
            input.photons(),
            basis.n()
        )));
    }
    let n = basis.n() as usize;
    let m = basis.m();
    let d = basis.dim();

    // Columns of the submatrix are fixed by the input; reuse them for every
    // output state and only re-gather rows. Column-major flat layout feeds
    // the Ryser kernel directly.
    let mut cols: Vec<usize> = Vec::with_capacity(n);
    for (j, &sj) in input.occ().iter().enumerate() {
        for _ in 0..sj {
            cols.push(j);
        }
    }
    let mut col_gather = vec![C64::new(0.0, 0.0); m * n];
    for (c, &j) in cols.iter().enumerate() {
        for i in 0..m {
            col_gather[c * m + i] = s_mat.entries()[[i, j]];
        }
    }
    let input_norm: f64 = input.occ().iter().map(|&k| factorial(k)).product();

    let mut out = CVec::zeros(d);
    let mut sub = vec![C64::new(0.0, 0.0); n * n];
    let mut rows: Vec<usize> = Vec::with_capacity(n);
    for (idx, t) in basis.states().iter().enumerate() {
        rows.clear();
        for (i, &ti) in t.occ().iter().enumerate() {
            for _ in 0..ti {
                rows.push(i);
            }
        }
        for c in 0..n {
            let src = &col_gather[c * m..(c + 1) * m];
            let dst = &mut sub[c * n..(c + 1) * n];
            for (slot, &i) in dst.iter_mut().zip(rows.iter()) {
                *slot = src[i];
            }
        }
        let per = permanent_flat(n, &sub);
        let t_norm: f64 = t.occ().iter().map(|&k| factorial(k)).product();
        out[idx] = per / (t_norm * input_norm).sqrt();
    }
    Ok(out)
}

/// Lift an arbitrary m×m matrix A to dπ(A) = Σ_jk A_jk a_j† a_k on the sector.
///
/// No Hermiticity is required; the map is linear in A. Matrix elements:
/// ⟨s − e_k + e_j| a_j† a_k |s⟩ = sqrt(s_k)·sqrt(s_j + 1 − δ_jk), and s_j on
/// the diagonal.
pub fn lift_operator(a: &CMat, basis: &FockBasis) -> Result<SectorOperator> {
    let m = basis.m();
    if a.nrows() != m || a.ncols() != m {
        return Err(Error::invalid("generator dimension does not match mode count"));
    }
    let d = basis.dim();
    let mut out = CMat::zeros((d, d));
    let mut scratch = vec![0u32; m];
    for (s_idx, s) in basis.states().iter().enumerate() {
        let occ = s.occ();
        let mut diag = C64::new(0.0, 0.0);
        for j in 0..m {
            if occ[j] > 0 {
                diag += a[[j, j]] * occ[j] as f64;
            }
        }
        out[[s_idx, s_idx]] += diag;
        for k in 0..m {
            if occ[k] == 0 {
                continue;
            }
            for j in 0..m {
                if j == k || a[[j, k]] == C64::new(0.0, 0.0) {
                    continue;
                }
                scratch.copy_from_slice(occ);
                scratch[k] -= 1;
                scratch[j] += 1;
                let t_idx = basis.rank(&scratch);
                let w = (occ[k] as f64 * (occ[j] + 1) as f64).sqrt();
                out[[t_idx, s_idx]] += a[[j, k]] * w;
            }
        }
    }
    SectorOperator::new(m, basis.n(), out)
}

/// Lift a Hermitian generator; validates Hermiticity within 1e−10.
pub fn lift_generator(h: &CMat, basis: &FockBasis) -> Result<SectorOperator> {
    let res = crate::linalg::hermiticity_residual(h);
    if res > HERMITIAN_TOL {
        return Err(Error::validation(format!(
            "generator is not Hermitian: residual {res:.3e} > {HERMITIAN_TOL:.0e}"
        )));
    }
    lift_operator(h, basis)
}

/// Tr[π(S) ρ π(S)† O] for a state ρ and observable O on a shared sector.
pub fn expectation_value(
    s_mat: &ModeUnitary,
    rho: &SectorOperator,
    obs: &SectorOperator,
) -> Result<f64> {
    if !rho.same_sector(obs) {
        return Err(Error::invalid("state and observable live on different sectors"));
    }
    if s_mat.m() != rho.m() {
        return Err(Error::invalid("mode count mismatch with sector operators"));
    }
    let basis = enumerate_basis(rho.m(), rho.n());
    let lifted = lift_unitary(s_mat, &basis)?;
    let u = lifted.entries();
    let evolved = u.dot(rho.entries()).dot(&dagger(u));
    let val = crate::linalg::hs_inner(&dagger(obs.entries()), &evolved);
    Ok(val.re)
}

/// Precomputed photon-lowering maps for one sector: supports fast evaluation of
/// the one-particle transition matrix M_jl = ⟨φ| a_j† a_l |ψ⟩ without forming
/// any D×D operator.
#[derive(Debug, Clone)]
pub struct HopContext {
    m: usize,
    lower_dim: usize,
    /// raised[s'·m + l] = index in the n-photon basis of s' + e_l.
    raised: Vec<u32>,
    /// weight[s'·m + l] = sqrt(s'_l + 1).
    weight: Vec<f64>,
}

impl HopContext {
    pub fn new(basis: &FockBasis) -> Self {
        let m = basis.m();
        if basis.n() == 0 {
            return HopContext {
                m,
                lower_dim: 0,
                raised: Vec::new(),
                weight: Vec::new(),
            };
        }
        let lower = enumerate_basis(m, basis.n() - 1);
        let dl = lower.dim();
        let mut raised = vec![0u32; dl * m];
        let mut weight = vec![0.0f64; dl * m];
        let mut scratch = vec![0u32; m];
        for (i, s) in lower.states().iter().enumerate() {
            for l in 0..m {
                scratch.copy_from_slice(s.occ());
                scratch[l] += 1;
                raised[i * m + l] = basis.rank(&scratch) as u32;
                weight[i * m + l] = ((s.occ()[l] + 1) as f64).sqrt();
            }
        }
        HopContext {
            m,
            lower_dim: dl,
            raised,
            weight,
        }
    }

    /// M_jl = ⟨φ| a_j† a_l |ψ⟩ = (a_j φ)†(a_l ψ), computed through the
    /// (n−1)-photon sector in O(D'·m²).
    pub fn transition_matrix(&self, phi: &CVec, psi: &CVec) -> CMat {
        let m = self.m;
        let dl = self.lower_dim;
        let mut out = CMat::zeros((m, m));
        if dl == 0 {
            return out;
        }
        let mut lowered_phi = CMat::zeros((m, dl));
        let mut lowered_psi = CMat::zeros((m, dl));
        for i in 0..dl {
            for l in 0..m {
                let idx = self.raised[i * m + l] as usize;
                let w = self.weight[i * m + l];
                lowered_phi[[l, i]] = phi[idx] * w;
                lowered_psi[[l, i]] = psi[idx] * w;
            }
        }
        for j in 0..m {
            for l in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..dl {
                    acc += lowered_phi[[j, i]].conj() * lowered_psi[[l, i]];
                }
                out[[j, l]] = acc;
            }
        }
        out
    }
}
