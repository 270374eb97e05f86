//! Universal rectangular MZI meshes: parameterization, construction,
//! decomposition, and exact parameter derivatives.
//!
//! Block convention: an MZI on adjacent modes (p, p+1) applies
//!
//! ```text
//! T(θ, φ) = [ e^{iφ}·cosθ   −sinθ ]
//!           [ e^{iφ}·sinθ    cosθ ]
//! ```
//!
//! The mesh unitary is S = diag(e^{iα}) · T_K ⋯ T_1 with T_1 the first
//! placement in layout order, so light traverses layers in layout order and
//! output phases come last. Total parameter count is m(m−1)/2·2 + m = m².

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::ModeUnitary;
use crate::linalg::{identity, C64, CMat};

const TWO_PI: f64 = 2.0 * PI;

/// Beam-splitter angles, internal phases, and output phases of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshParams {
    m: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    alpha: Vec<f64>,
}

/// Which scalar a flat parameter index addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Beam-splitter angle of placement i.
    Theta(usize),
    /// Internal phase of placement i.
    Phi(usize),
    /// Output phase of mode j.
    Alpha(usize),
}

impl MeshParams {
    pub fn new(m: usize, theta: Vec<f64>, phi: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let k = m * (m - 1) / 2;
        if theta.len() != k || phi.len() != k || alpha.len() != m {
            return Err(Error::invalid(format!(
                "mesh for m={m} needs {k} thetas, {k} phis, {m} alphas; got {}/{}/{}",
                theta.len(),
                phi.len(),
                alpha.len()
            )));
        }
        for v in theta.iter().chain(phi.iter()).chain(alpha.iter()) {
            if !v.is_finite() {
                return Err(Error::invalid("mesh parameters must be finite"));
            }
        }
        Ok(MeshParams { m, theta, phi, alpha })
    }

    pub fn zeros(m: usize) -> Self {
        let k = m * (m - 1) / 2;
        MeshParams {
            m,
            theta: vec![0.0; k],
            phi: vec![0.0; k],
            alpha: vec![0.0; m],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn mzi_count(&self) -> usize {
        self.theta.len()
    }

    /// Total flat parameter count P = m².
    pub fn param_count(&self) -> usize {
        2 * self.theta.len() + self.m
    }

    /// Flat layout: all thetas (layout order), then all phis, then alphas.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.theta);
        out.extend_from_slice(&self.phi);
        out.extend_from_slice(&self.alpha);
        out
    }

    pub fn from_flat(m: usize, flat: &[f64]) -> Result<Self> {
        let k = m * (m - 1) / 2;
        if flat.len() != 2 * k + m {
            return Err(Error::invalid(format!(
                "expected {} flat parameters for m={m}, got {}",
                2 * k + m,
                flat.len()
            )));
        }
        MeshParams::new(
            m,
            flat[..k].to_vec(),
            flat[k..2 * k].to_vec(),
            flat[2 * k..].to_vec(),
        )
    }

    pub fn classify(&self, k: usize) -> Result<ParamKind> {
        let mzis = self.theta.len();
        if k < mzis {
            Ok(ParamKind::Theta(k))
        } else if k < 2 * mzis {
            Ok(ParamKind::Phi(k - mzis))
        } else if k < 2 * mzis + self.m {
            Ok(ParamKind::Alpha(k - 2 * mzis))
        } else {
            Err(Error::invalid(format!(
                "parameter index {k} out of range (P = {})",
                self.param_count()
            )))
        }
    }
}

/// Rectangular (Clements-order) placement of MZIs: layer ℓ hosts pairs
/// (p, p+1) with p ≡ ℓ (mod 2).
#[derive(Debug, Clone)]
pub struct MeshLayout {
    m: usize,
    placements: Vec<(usize, usize)>,
}

impl MeshLayout {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Ordered (layer, top mode) placements.
    pub fn placements(&self) -> &[(usize, usize)] {
        &self.placements
    }

    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }
}

/// Deterministic rectangular tiling with m(m−1)/2 placements.
pub fn layout(m: usize) -> Result<MeshLayout> {
    if m < 2 {
        return Err(Error::invalid(format!("mesh layout requires m >= 2, got {m}")));
    }
    let mut placements = Vec::with_capacity(m * (m - 1) / 2);
    for layer in 0..m {
        let start = layer % 2;
        let mut p = start;
        while p + 1 < m {
            placements.push((layer, p));
            p += 2;
        }
    }
    debug_assert_eq!(placements.len(), m * (m - 1) / 2);
    Ok(MeshLayout { m, placements })
}

#[inline]
fn block(theta: f64, phi: f64) -> [[C64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let e = C64::new(phi.cos(), phi.sin());
    [
        [e * c, C64::new(-s, 0.0)],
        [e * s, C64::new(c, 0.0)],
    ]
}

fn apply_block_left(mat: &mut CMat, p: usize, b: &[[C64; 2]; 2]) {
    let m = mat.ncols();
    for col in 0..m {
        let top = mat[[p, col]];
        let bot = mat[[p + 1, col]];
        mat[[p, col]] = b[0][0] * top + b[0][1] * bot;
        mat[[p + 1, col]] = b[1][0] * top + b[1][1] * bot;
    }
}

fn apply_block_right(mat: &mut CMat, p: usize, b: &[[C64; 2]; 2]) {
    let m = mat.nrows();
    for row in 0..m {
        let left = mat[[row, p]];
        let right = mat[[row, p + 1]];
        mat[[row, p]] = left * b[0][0] + right * b[1][0];
        mat[[row, p + 1]] = left * b[0][1] + right * b[1][1];
    }
}

/// Build the mode unitary realized by the mesh parameters.
pub fn build_unitary(params: &MeshParams) -> ModeUnitary {
    build_matrix(params)
        .and_then(ModeUnitary::new)
        .expect("mesh product of unitary blocks must be unitary")
}

fn build_matrix(params: &MeshParams) -> Result<CMat> {
    let m = params.m();
    let lay = layout(m)?;
    let mut s = identity(m);
    for (i, &(_, p)) in lay.placements().iter().enumerate() {
        let b = block(params.theta()[i], params.phi()[i]);
        apply_block_left(&mut s, p, &b);
    }
    for (j, &a) in params.alpha().iter().enumerate() {
        let phase = C64::new(a.cos(), a.sin());
        for col in 0..m {
            s[[j, col]] *= phase;
        }
    }
    Ok(s)
}

/// Decompose a unitary into canonical mesh parameters
/// (θ ∈ [0, π/2], φ, α ∈ [0, 2π)) with build_unitary∘decompose ≈ id.
///
/// Elimination sweeps null the lower triangle diagonal by diagonal, right
/// multiplications on odd diagonals and left multiplications on even ones;
/// the accumulated left factors are then commuted through the residual
/// diagonal, which turns them into ordinary mesh blocks.
pub fn decompose(s: &CMat) -> Result<MeshParams> {
    let m = s.nrows();
    if s.ncols() != m {
        return Err(Error::invalid("decompose requires a square matrix"));
    }
    if m < 2 {
        return Err(Error::invalid("decompose requires m >= 2"));
    }
    let res = crate::linalg::unitarity_residual(s);
    if res > 1e-8 {
        return Err(Error::validation(format!(
            "decompose input is not unitary: residual {res:.3e} > 1e-8"
        )));
    }

    let mut u = s.to_owned();
    // (pair index p, theta, phi) in the order the factors were applied.
    let mut right_seq: Vec<(usize, f64, f64)> = Vec::new();
    let mut left_seq: Vec<(usize, f64, f64)> = Vec::new();

    for diag in 1..m {
        if diag % 2 == 1 {
            // Null u[m−1−j, diag−1−j] with a right factor on columns (c, c+1).
            for j in 0..diag {
                let row = m - 1 - j;
                let col = diag - 1 - j;
                let a = u[[row, col]];
                let b = u[[row, col + 1]];
                let (theta, phi) = right_elimination_angles(a, b);
                let blk = block(theta, phi);
                let inv = block_adjoint(&blk);
                apply_block_right(&mut u, col, &inv);
                right_seq.push((col, theta, phi));
            }
        } else {
            // Null u[m−1+j−diag+1 ...]: left factor on rows (p, p+1), nulled at
            // the lower row of the pair.
            for j in 1..=diag {
                let row = m + j - diag - 1;
                let col = j - 1;
                let p = row - 1;
                let a = u[[p, col]];
                let b = u[[row, col]];
                let (theta, phi) = left_elimination_angles(a, b);
                let blk = block(theta, phi);
                apply_block_left(&mut u, p, &blk);
                left_seq.push((p, theta, phi));
            }
        }
    }

    // u is now diagonal (unitary with zero lower triangle). Commute the
    // inverse left factors through it: T⁻¹(θ,φ)·D = D'·T(θ,φ') with
    // φ' = arg(−d_p/d_{p+1}), d'_p = −d_{p+1}e^{−iφ}, d'_{p+1} unchanged.
    let mut d: Vec<C64> = (0..m).map(|i| u[[i, i]]).collect();
    let mut pushed: Vec<(usize, f64, f64)> = Vec::with_capacity(left_seq.len());
    for &(p, theta, phi) in left_seq.iter().rev() {
        if theta.sin() == 0.0 {
            // Block is diagonal; absorb the internal phase into d directly.
            let e_neg = C64::new(phi.cos(), -phi.sin());
            d[p] *= e_neg;
            pushed.push((p, theta, 0.0));
        } else {
            let ratio = -d[p] / d[p + 1];
            let phi_new = canonical_angle(ratio.arg());
            let e_neg = C64::new(phi.cos(), -phi.sin());
            d[p] = -d[p + 1] * e_neg;
            pushed.push((p, theta, phi_new));
        }
    }

    // Application order of the final product: rights first, then the pushed
    // lefts (innermost push = applied first).
    let mut seq: Vec<(usize, f64, f64)> = right_seq;
    seq.extend(pushed);

    let lay = layout(m)?;
    let ordered = match_sequence_to_layout(&seq, lay.placements())?;

    let mut theta = Vec::with_capacity(ordered.len());
    let mut phi = Vec::with_capacity(ordered.len());
    for (t, f) in ordered {
        theta.push(t);
        phi.push(canonical_angle(f));
    }
    let alpha: Vec<f64> = d.iter().map(|z| canonical_angle(z.arg())).collect();
    MeshParams::new(m, theta, phi, alpha)
}

fn block_adjoint(b: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [
        [b[0][0].conj(), b[1][0].conj()],
        [b[0][1].conj(), b[1][1].conj()],
    ]
}

/// Choose (θ, φ) with a·e^{−iφ}·cosθ = b·sinθ, nulling (U·T⁻¹)[row, p].
fn right_elimination_angles(a: C64, b: C64) -> (f64, f64) {
    if a.norm() == 0.0 {
        // Already null: keep the factor trivial.
        return (0.0, 0.0);
    }
    if b.norm() == 0.0 {
        return (PI / 2.0, 0.0);
    }
    let theta = a.norm().atan2(b.norm());
    let phi = canonical_angle((a * b.conj()).arg());
    (theta, phi)
}

/// Choose (θ, φ) with e^{iφ}·sinθ·a + cosθ·b = 0, nulling (T·U)[p+1, col].
fn left_elimination_angles(a: C64, b: C64) -> (f64, f64) {
    if b.norm() == 0.0 {
        return (0.0, 0.0);
    }
    if a.norm() == 0.0 {
        return (PI / 2.0, 0.0);
    }
    let theta = b.norm().atan2(a.norm());
    let phi = canonical_angle((b * a.conj()).arg() + PI);
    (theta, phi)
}

fn canonical_angle(a: f64) -> f64 {
    let mut out = a.rem_euclid(TWO_PI);
    if out >= TWO_PI {
        out -= TWO_PI;
    }
    out
}

/// Stable-sort an emitted factor sequence into layout order using only swaps
/// of adjacent factors acting on disjoint mode pairs.
fn match_sequence_to_layout(
    seq: &[(usize, f64, f64)],
    placements: &[(usize, usize)],
) -> Result<Vec<(f64, f64)>> {
    if seq.len() != placements.len() {
        return Err(Error::validation(format!(
            "decomposition produced {} factors, layout has {}",
            seq.len(),
            placements.len()
        )));
    }
    let mut pool: Vec<(usize, f64, f64)> = seq.to_vec();
    let mut out = Vec::with_capacity(seq.len());
    for &(_, want) in placements {
        let mut found = None;
        for (i, &(p, t, f)) in pool.iter().enumerate() {
            if p == want {
                found = Some((i, t, f));
                break;
            }
            // A factor may only commute past factors on disjoint pairs.
            if p.abs_diff(want) <= 1 {
                break;
            }
        }
        match found {
            Some((i, t, f)) => {
                pool.remove(i);
                out.push((t, f));
            }
            None => {
                return Err(Error::validation(
                    "decomposition factor order is incompatible with the rectangular layout"
                        .to_string(),
                ))
            }
        }
    }
    Ok(out)
}

/// Exact ∂S/∂p_k; not unitary.
pub fn derivative_unitary(params: &MeshParams, k: usize) -> Result<CMat> {
    let derivs = MeshDerivatives::new(params)?;
    derivs.derivative(k)
}

/// Right tangent generator H_k = S†·∂_k S; anti-Hermitian.
pub fn tangent_generator(params: &MeshParams, k: usize) -> Result<CMat> {
    let derivs = MeshDerivatives::new(params)?;
    derivs.right_generator(k)
}

/// Left generator of one MZI parameter in factored form G = V·b·V†,
/// with V the two relevant columns of the cached suffix product.
pub enum LeftGenerator {
    Factored {
        /// m×2 slice of D·T_K⋯T_{i+1}.
        v: CMat,
        /// 2×2 core: ∂T·T† conjugated into the suffix frame.
        b: [[C64; 2]; 2],
    },
    /// G = i·E_jj for output-phase parameters.
    PhaseMode(usize),
}

/// Prefix/suffix product caches for one parameter point: serves S, ∂_k S,
/// right generators S†∂_kS and left generators (∂_kS)S† for all k without
/// re-multiplying the mesh per parameter.
pub struct MeshDerivatives {
    m: usize,
    placements: Vec<(usize, usize)>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    /// prefix[i] = T_i ⋯ T_1 (prefix[0] = I).
    prefix: Vec<CMat>,
    /// suffix_d[i] = D·T_K ⋯ T_{i+1} (suffix_d[K] = D); suffix_d[0] = S.
    suffix_d: Vec<CMat>,
}

impl MeshDerivatives {
    pub fn new(params: &MeshParams) -> Result<Self> {
        let m = params.m();
        let lay = layout(m)?;
        let placements = lay.placements().to_vec();
        let kq = placements.len();

        let blocks: Vec<[[C64; 2]; 2]> = (0..kq)
            .map(|i| block(params.theta()[i], params.phi()[i]))
            .collect();

        let mut prefix = Vec::with_capacity(kq + 1);
        prefix.push(identity(m));
        for i in 0..kq {
            let mut next = prefix[i].clone();
            apply_block_left(&mut next, placements[i].1, &blocks[i]);
            prefix.push(next);
        }

        let mut diag = identity(m);
        for (j, &a) in params.alpha().iter().enumerate() {
            diag[[j, j]] = C64::new(a.cos(), a.sin());
        }
        let mut suffix_d = vec![CMat::zeros((m, m)); kq + 1];
        suffix_d[kq] = diag;
        for i in (0..kq).rev() {
            let mut next = suffix_d[i + 1].clone();
            apply_block_right(&mut next, placements[i].1, &blocks[i]);
            suffix_d[i] = next;
        }

        Ok(MeshDerivatives {
            m,
            placements,
            theta: params.theta().to_vec(),
            phi: params.phi().to_vec(),
            prefix,
            suffix_d,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn unitary(&self) -> &CMat {
        &self.suffix_d[0]
    }

    pub fn param_count(&self) -> usize {
        2 * self.placements.len() + self.m
    }

    fn classify(&self, k: usize) -> Result<ParamKind> {
        let mzis = self.placements.len();
        if k < mzis {
            Ok(ParamKind::Theta(k))
        } else if k < 2 * mzis {
            Ok(ParamKind::Phi(k - mzis))
        } else if k < 2 * mzis + self.m {
            Ok(ParamKind::Alpha(k - 2 * mzis))
        } else {
            Err(Error::invalid(format!(
                "parameter index {k} out of range (P = {})",
                self.param_count()
            )))
        }
    }

    fn block_derivative(&self, i: usize, wrt_theta: bool) -> [[C64; 2]; 2] {
        let (s, c) = self.theta[i].sin_cos();
        let e = C64::new(self.phi[i].cos(), self.phi[i].sin());
        if wrt_theta {
            [
                [e * -s, C64::new(-c, 0.0)],
                [e * c, C64::new(-s, 0.0)],
            ]
        } else {
            let ie = C64::new(0.0, 1.0) * e;
            [
                [ie * c, C64::new(0.0, 0.0)],
                [ie * s, C64::new(0.0, 0.0)],
            ]
        }
    }

    /// ∂S/∂p_k via the cached products.
    pub fn derivative(&self, k: usize) -> Result<CMat> {
        match self.classify(k)? {
            ParamKind::Theta(i) | ParamKind::Phi(i) => {
                let wrt_theta = matches!(self.classify(k)?, ParamKind::Theta(_));
                let p = self.placements[i].1;
                let db = self.block_derivative(i, wrt_theta);
                // suffix_d[i+1]·embed(∂B)·prefix[i], where embed(∂B) is ∂B on
                // the block and zero elsewhere (unlike T, which embeds into I).
                let mut mid = self.prefix[i].clone();
                apply_block_left(&mut mid, p, &db);
                for r in 0..self.m {
                    if r != p && r != p + 1 {
                        for cidx in 0..self.m {
                            mid[[r, cidx]] = C64::new(0.0, 0.0);
                        }
                    }
                }
                Ok(self.suffix_d[i + 1].dot(&mid))
            }
            ParamKind::Alpha(j) => {
                // ∂S = i·E_jj·S: scale row j by i.
                let mut out = CMat::zeros((self.m, self.m));
                for cidx in 0..self.m {
                    out[[j, cidx]] = C64::new(0.0, 1.0) * self.unitary()[[j, cidx]];
                }
                Ok(out)
            }
        }
    }

    /// H_k = S†·∂_kS = prefix†·(B†∂B)·prefix for MZI parameters.
    pub fn right_generator(&self, k: usize) -> Result<CMat> {
        match self.classify(k)? {
            ParamKind::Theta(i) => {
                let e_neg = C64::new(self.phi[i].cos(), -self.phi[i].sin());
                let e_pos = C64::new(self.phi[i].cos(), self.phi[i].sin());
                // B†∂_θB = [[0, −e^{−iφ}], [e^{iφ}, 0]].
                let core = [
                    [C64::new(0.0, 0.0), -e_neg],
                    [e_pos, C64::new(0.0, 0.0)],
                ];
                Ok(self.conjugate_core_by_prefix(i, &core))
            }
            ParamKind::Phi(i) => {
                // B†∂_φB = [[i, 0], [0, 0]].
                let core = [
                    [C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
                    [C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
                ];
                Ok(self.conjugate_core_by_prefix(i, &core))
            }
            ParamKind::Alpha(j) => {
                // S†·iE_jj·S = i·(row j of S)†⊗(row j of S).
                let s = self.unitary();
                let mut out = CMat::zeros((self.m, self.m));
                for r in 0..self.m {
                    for cidx in 0..self.m {
                        out[[r, cidx]] =
                            C64::new(0.0, 1.0) * s[[j, r]].conj() * s[[j, cidx]];
                    }
                }
                Ok(out)
            }
        }
    }

    fn conjugate_core_by_prefix(&self, i: usize, core: &[[C64; 2]; 2]) -> CMat {
        let p = self.placements[i].1;
        let w = &self.prefix[i];
        // prefix†·embed(core)·prefix = V·core·V† with V = (rows p,p+1 of prefix)†.
        let m = self.m;
        let mut out = CMat::zeros((m, m));
        for r in 0..m {
            for cidx in 0..m {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..2 {
                    for b in 0..2 {
                        acc += w[[p + a, r]].conj() * core[a][b] * w[[p + b, cidx]];
                    }
                }
                out[[r, cidx]] = acc;
            }
        }
        out
    }

    /// Left generator G_k = (∂_kS)·S† in factored form for fast contractions.
    pub fn left_generator(&self, k: usize) -> Result<LeftGenerator> {
        match self.classify(k)? {
            ParamKind::Theta(i) => {
                // ∂_θT·T† = [[0, −1], [1, 0]].
                let core = [
                    [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
                    [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                ];
                Ok(LeftGenerator::Factored {
                    v: self.suffix_columns(i),
                    b: core,
                })
            }
            ParamKind::Phi(i) => {
                let (s, c) = self.theta[i].sin_cos();
                let i1 = C64::new(0.0, 1.0);
                // ∂_φT·T† = i·[[c², cs], [cs, s²]].
                let core = [
                    [i1 * (c * c), i1 * (c * s)],
                    [i1 * (c * s), i1 * (s * s)],
                ];
                Ok(LeftGenerator::Factored {
                    v: self.suffix_columns(i),
                    b: core,
                })
            }
            ParamKind::Alpha(j) => Ok(LeftGenerator::PhaseMode(j)),
        }
    }

    fn suffix_columns(&self, i: usize) -> CMat {
        let p = self.placements[i].1;
        let w = &self.suffix_d[i + 1];
        let mut v = CMat::zeros((self.m, 2));
        for r in 0..self.m {
            v[[r, 0]] = w[[r, p]];
            v[[r, 1]] = w[[r, p + 1]];
        }
        v
    }

    /// Dense left generator, mainly for tests.
    pub fn left_generator_dense(&self, k: usize) -> Result<CMat> {
        match self.left_generator(k)? {
            LeftGenerator::Factored { v, b } => {
                let m = self.m;
                let mut out = CMat::zeros((m, m));
                for r in 0..m {
                    for cidx in 0..m {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..2 {
                            for bb in 0..2 {
                                acc += v[[r, a]] * b[a][bb] * v[[cidx, bb]].conj();
                            }
                        }
                        out[[r, cidx]] = acc;
                    }
                }
                Ok(out)
            }
            LeftGenerator::PhaseMode(j) => {
                let mut out = CMat::zeros((self.m, self.m));
                out[[j, j]] = C64::new(0.0, 1.0);
                Ok(out)
            }
        }
    }
}
