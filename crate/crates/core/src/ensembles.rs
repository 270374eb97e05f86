//! Parameter initialization ensembles, random targets, and the deterministic
//! counter-based stream discipline.
//!
//! Every random draw comes from a substream derived as
//! `hash(master_seed, purpose_tag, sample_index)`; identical keys give
//! identical draws regardless of execution order or worker count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMat};
use crate::loss::TargetDistribution;
use crate::mesh::{decompose, MeshParams};
use crate::postselect::OutcomeSet;

const TWO_PI: f64 = 2.0 * PI;

/// Counter-based substream derivation from one master seed.
#[derive(Debug, Clone, Copy)]
pub struct SeedPolicy {
    master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Independent stream for (purpose_tag, sample_index).
    pub fn stream(&self, purpose_tag: &str, sample_index: u64) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update([0x1f]);
        hasher.update(purpose_tag.as_bytes());
        hasher.update([0x1f]);
        hasher.update(sample_index.to_le_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }
}

/// Initialization strategy names as they appear in configs and output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initializer {
    Uniform,
    Beta,
    Haar,
}

impl Initializer {
    pub fn name(&self) -> &'static str {
        match self {
            Initializer::Uniform => "uniform",
            Initializer::Beta => "beta",
            Initializer::Haar => "haar",
        }
    }

    pub fn parse(name: &str) -> Result<Initializer> {
        match name {
            "uniform" => Ok(Initializer::Uniform),
            "beta" => Ok(Initializer::Beta),
            "haar" => Ok(Initializer::Haar),
            other => Err(Error::config(format!(
                "unknown initializer \"{other}\" (expected uniform, beta, or haar)"
            ))),
        }
    }

    pub fn init(&self, m: usize, rng: &mut impl Rng) -> Result<MeshParams> {
        match self {
            Initializer::Uniform => Ok(init_uniform(m, rng)),
            Initializer::Beta => Ok(init_beta(m, rng)),
            Initializer::Haar => init_haar(m, rng),
        }
    }
}

/// All mesh parameters drawn independently from Unif[0, 2π).
pub fn init_uniform(m: usize, rng: &mut impl Rng) -> MeshParams {
    let k = m * (m - 1) / 2;
    let mut draw = || rng.gen::<f64>() * TWO_PI;
    let theta: Vec<f64> = (0..k).map(|_| draw()).collect();
    let phi: Vec<f64> = (0..k).map(|_| draw()).collect();
    let alpha: Vec<f64> = (0..m).map(|_| draw()).collect();
    MeshParams::new(m, theta, phi, alpha).expect("sampled parameters are consistent")
}

/// Beta(0.5, 0.5) draw by exact inverse CDF: sin²(π·u/2) follows the arcsine
/// law on [0, 1].
fn beta_half_half(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    let s = (PI * u / 2.0).sin();
    s * s
}

/// All mesh parameters drawn as π·Beta(0.5, 0.5), concentrating near 0 and π.
pub fn init_beta(m: usize, rng: &mut impl Rng) -> MeshParams {
    let k = m * (m - 1) / 2;
    let mut draw = || PI * beta_half_half(rng);
    let theta: Vec<f64> = (0..k).map(|_| draw()).collect();
    let phi: Vec<f64> = (0..k).map(|_| draw()).collect();
    let alpha: Vec<f64> = (0..m).map(|_| draw()).collect();
    MeshParams::new(m, theta, phi, alpha).expect("sampled parameters are consistent")
}

/// Haar-random unitary: complex Ginibre matrix orthonormalized by modified
/// Gram-Schmidt. The triangular factor's diagonal is real positive by
/// construction, which is exactly the phase convention Haar sampling needs.
pub fn haar_unitary(m: usize, rng: &mut impl Rng) -> CMat {
    let mut a = CMat::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            a[[i, j]] = C64::new(re, im) / 2.0f64.sqrt();
        }
    }
    // Column-wise MGS with one re-orthogonalization pass.
    for j in 0..m {
        for _pass in 0..2 {
            for i in 0..j {
                let mut proj = C64::new(0.0, 0.0);
                for r in 0..m {
                    proj += a[[r, i]].conj() * a[[r, j]];
                }
                for r in 0..m {
                    let prev = a[[r, i]];
                    a[[r, j]] -= proj * prev;
                }
            }
        }
        let norm: f64 = (0..m).map(|r| a[[r, j]].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..m {
            a[[r, j]] /= norm;
        }
    }
    a
}

/// Sample S ~ Haar(U(m)) and decompose into mesh parameters.
pub fn init_haar(m: usize, rng: &mut impl Rng) -> Result<MeshParams> {
    let u = haar_unitary(m, rng);
    decompose(&u)
}

/// Flat-Dirichlet target over an outcome set: exponential draws, normalized.
pub fn sample_target(outcomes: &OutcomeSet, rng: &mut impl Rng) -> Result<TargetDistribution> {
    if outcomes.is_empty() {
        return Err(Error::config("cannot sample a target over an empty outcome set"));
    }
    let mut q: Vec<f64> = (0..outcomes.len())
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = q.iter().sum();
    for v in q.iter_mut() {
        *v /= total;
    }
    TargetDistribution::new(q)
}
