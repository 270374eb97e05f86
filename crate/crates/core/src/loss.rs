//! Postselected output distributions, the Bhattacharyya loss, and its exact
//! parameter gradient.
//!
//! The gradient never materializes a lifted D×D unitary. With left tangent
//! generators G_k = (∂_k S)·S†, each derivative of the evolved state is
//! ∂_k ψ = dπ(G_k)·ψ, and the full chain rule collapses to the one-particle
//! transition matrix M_jl = ⟨φ| a_j† a_l |ψ⟩ with a single cotangent vector
//! φ, after which every parameter costs O(m²).

use crate::error::{Error, Result};
use crate::fock::{evolve_state, FockBasis, HopContext, ModeUnitary, OccupationVector};
use crate::linalg::{C64, CVec};
use crate::mesh::{LeftGenerator, MeshDerivatives, MeshParams};
use crate::postselect::{retained_indices, OutcomeSet, Regime};

/// Default floor ε applied to the success probability.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Target distribution over a retained outcome set.
#[derive(Debug, Clone)]
pub struct TargetDistribution {
    q: Vec<f64>,
}

impl TargetDistribution {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("target distribution cannot be empty"));
        }
        if q.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("target probabilities must be finite and >= 0"));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "target probabilities sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(TargetDistribution { q })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Unnormalized outcome probabilities a, success probability s, and the
/// floored normalized distribution p over one regime's retained outcomes.
#[derive(Debug, Clone)]
pub struct PostselectedDistribution {
    a: Vec<f64>,
    s: f64,
    p: Vec<f64>,
    floor_applied: bool,
}

impl PostselectedDistribution {
    pub fn unnormalized(&self) -> &[f64] {
        &self.a
    }

    pub fn success_probability(&self) -> f64 {
        self.s
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn floor_applied(&self) -> bool {
        self.floor_applied
    }
}

/// Project an evolved pure state onto retained outcomes:
/// a_x = |ψ_x|², s = Σ a_x, p_x = a_x / max(s, ε).
pub fn postselect_state(
    psi: &CVec,
    outcomes: &OutcomeSet,
    epsilon: f64,
) -> PostselectedDistribution {
    let a: Vec<f64> = outcomes
        .retained()
        .iter()
        .map(|&i| psi[i].norm_sqr())
        .collect();
    let s: f64 = a.iter().sum();
    let floor_applied = s < epsilon;
    let denom = s.max(epsilon);
    let p: Vec<f64> = a.iter().map(|&v| v / denom).collect();
    PostselectedDistribution {
        a,
        s,
        p,
        floor_applied,
    }
}

/// Evolve the input Fock state through the mesh and postselect.
pub fn postselected_distribution(
    params: &MeshParams,
    input: &OccupationVector,
    regime: &Regime,
    basis: &FockBasis,
    epsilon: f64,
) -> Result<PostselectedDistribution> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("floor epsilon must be positive"));
    }
    let outcomes = retained_indices(regime, basis)?;
    let s_mat = crate::mesh::build_unitary(params);
    let psi = evolve_state(&s_mat, input, basis)?;
    Ok(postselect_state(&psi, &outcomes, epsilon))
}

/// Bhattacharyya coefficient B(p, q) = Σ_x sqrt(p_x q_x).
pub fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q.iter()).map(|(&a, &b)| (a * b).sqrt()).sum()
}

/// L_B = 1 − B(p, q)².
pub fn bhattacharyya_loss(p: &[f64], q: &TargetDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distribution lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let b = bhattacharyya_coefficient(p, q.probabilities());
    Ok(1.0 - b * b)
}

/// χ²(p‖q) = Σ_x (p_x − q_x)²/q_x.
pub fn chi_squared(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid("chi_squared requires equal lengths"));
    }
    let mut acc = 0.0;
    for (&pv, &qv) in p.iter().zip(q.iter()) {
        if qv <= 0.0 {
            return Err(Error::invalid("chi_squared requires q_x > 0 for all x"));
        }
        let d = pv - qv;
        acc += d * d / qv;
    }
    Ok(acc)
}

/// Per-cell resources for repeated gradient evaluations on one
/// (regime, m, n, input) combination.
pub struct GradientWorkspace {
    basis: FockBasis,
    outcomes: OutcomeSet,
    hop: HopContext,
    input: OccupationVector,
}

impl GradientWorkspace {
    pub fn new(regime: &Regime, basis: FockBasis, input: OccupationVector) -> Result<Self> {
        if input.modes() != basis.m() || input.photons() != basis.n() {
            return Err(Error::invalid("input state does not match the sector"));
        }
        let outcomes = retained_indices(regime, &basis)?;
        let hop = HopContext::new(&basis);
        Ok(GradientWorkspace {
            basis,
            outcomes,
            hop,
            input,
        })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn outcomes(&self) -> &OutcomeSet {
        &self.outcomes
    }

    pub fn input(&self) -> &OccupationVector {
        &self.input
    }

    /// Loss and exact gradient of L_B∘(floored postselection) at `params`.
    pub fn loss_and_gradient(
        &self,
        params: &MeshParams,
        q: &TargetDistribution,
        epsilon: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if q.len() != self.outcomes.len() {
            return Err(Error::invalid(format!(
                "target has {} outcomes, regime retains {}",
                q.len(),
                self.outcomes.len()
            )));
        }
        if epsilon <= 0.0 {
            return Err(Error::invalid("floor epsilon must be positive"));
        }
        if params.m() != self.basis.m() {
            return Err(Error::invalid("mesh mode count does not match workspace"));
        }

        let derivs = MeshDerivatives::new(params)?;
        let s_mat = ModeUnitary::new(derivs.unitary().clone())?;
        let psi = evolve_state(&s_mat, &self.input, &self.basis)?;
        let dist = postselect_state(&psi, &self.outcomes, epsilon);
        let qs = q.probabilities();

        let b = bhattacharyya_coefficient(&dist.p, qs);
        let loss = 1.0 - b * b;

        // dL = −B Σ_x sqrt(q_x/p_x)·∂p_x over outcomes with p_x > 0. The
        // singular factor cancels at the amplitude level:
        // sqrt(q_y/p_y)·ψ_y = sqrt(q_y·s̃)·ψ_y/|ψ_y|, which stays bounded for
        // arbitrarily small p_y; exact zeros contribute nothing.
        let denom = dist.s.max(epsilon);
        let mut phi = CVec::zeros(self.basis.dim());
        for (y, &idx) in self.outcomes.retained().iter().enumerate() {
            let amp = psi[idx];
            let norm = amp.norm();
            let u_psi = if norm > 0.0 {
                amp * ((qs[y] * denom).sqrt() / norm)
            } else {
                C64::new(0.0, 0.0)
            };
            // ∂p_y = (∂a_y − p_y·∂s)/s off the floor; ∂p_y = ∂a_y/ε on it.
            phi[idx] = if dist.floor_applied {
                u_psi * (-b / epsilon)
            } else {
                (u_psi - amp * b) * (-b / dist.s)
            };
        }
        let mmat = self.hop.transition_matrix(&phi, &psi);

        let m = self.basis.m();
        let pcount = params.param_count();
        let mut grad = vec![0.0; pcount];
        for (k, g) in grad.iter_mut().enumerate() {
            match derivs.left_generator(k)? {
                LeftGenerator::Factored { v, b: core } => {
                    // Σ_jl G_jl M_jl = Σ_ab core_ab (Vᵀ M conj(V))_ab.
                    let mut t = [[C64::new(0.0, 0.0); 2]; 2];
                    for a in 0..2 {
                        for bb in 0..2 {
                            let mut acc = C64::new(0.0, 0.0);
                            for j in 0..m {
                                let mut inner = C64::new(0.0, 0.0);
                                for l in 0..m {
                                    inner += mmat[[j, l]] * v[[l, bb]].conj();
                                }
                                acc += v[[j, a]] * inner;
                            }
                            t[a][bb] = acc;
                        }
                    }
                    let mut contraction = C64::new(0.0, 0.0);
                    for a in 0..2 {
                        for bb in 0..2 {
                            contraction += core[a][bb] * t[a][bb];
                        }
                    }
                    *g = 2.0 * contraction.re;
                }
                LeftGenerator::PhaseMode(j) => {
                    // G = i·E_jj: 2·Re(i·M_jj) = −2·Im(M_jj).
                    *g = -2.0 * mmat[[j, j]].im;
                }
            }
        }
        Ok((loss, grad))
    }
}

/// Exact gradient of the Bhattacharyya loss with respect to all P = m²
/// mesh parameters (flat order: thetas, phis, alphas).
pub fn bhattacharyya_gradient(
    params: &MeshParams,
    input: &OccupationVector,
    regime: &Regime,
    basis: &FockBasis,
    q: &TargetDistribution,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let ws = GradientWorkspace::new(regime, basis.clone(), input.clone())?;
    Ok(ws.loss_and_gradient(params, q, epsilon)?.1)
}
