//! Postselection regimes: retained outcome sets, logical labels for rail
//! codes, success observables, and pulled-back observables.

use crate::error::{Error, Result};
use crate::fock::{FockBasis, OccupationVector, SectorOperator};
use crate::linalg::C64;

/// One of the three outcome-space restrictions. Retained sets are always
/// derived from the basis on demand, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// K = I: the full n-photon sector is retained.
    AllowBunching,
    /// Keep outcomes with at most one photon per mode.
    CollisionFree,
    /// m = rails·N modes encode N logical units, one photon per block.
    RailCode { rails: usize },
}

impl Regime {
    /// Stable name used in configs and CSV output.
    pub fn name(&self) -> String {
        match self {
            Regime::AllowBunching => "fock".to_string(),
            Regime::CollisionFree => "unbunched".to_string(),
            Regime::RailCode { rails: 2 } => "dual_rail".to_string(),
            Regime::RailCode { rails } => format!("rail{rails}"),
        }
    }

    pub fn parse(name: &str) -> Result<Regime> {
        match name {
            "fock" => Ok(Regime::AllowBunching),
            "unbunched" => Ok(Regime::CollisionFree),
            "dual_rail" => Ok(Regime::RailCode { rails: 2 }),
            "rail3" => Ok(Regime::RailCode { rails: 3 }),
            other => Err(Error::config(format!(
                "unknown regime \"{other}\" (expected fock, unbunched, dual_rail, or rail3)"
            ))),
        }
    }

    /// Check compatibility with a sector. RailCode(r) requires r ≥ 2,
    /// r | m, and n = m/r logical units.
    pub fn validate(&self, m: usize, n: u32) -> Result<()> {
        match self {
            Regime::AllowBunching => Ok(()),
            Regime::CollisionFree => {
                if (n as usize) > m {
                    Err(Error::config(format!(
                        "collision-free regime needs n <= m, got n={n}, m={m}"
                    )))
                } else {
                    Ok(())
                }
            }
            Regime::RailCode { rails } => {
                if *rails < 2 {
                    return Err(Error::config("rail code requires r >= 2"));
                }
                if m % rails != 0 {
                    return Err(Error::config(format!(
                        "rail code with r={rails} requires r to divide m={m}"
                    )));
                }
                let logical = m / rails;
                if n as usize != logical {
                    return Err(Error::config(format!(
                        "rail code with m={m}, r={rails} encodes N={logical} units and needs n=N, got n={n}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Number of logical units for rail codes; photon count otherwise.
    pub fn logical_units(&self, m: usize, n: u32) -> usize {
        match self {
            Regime::RailCode { rails } => m / rails,
            _ => n as usize,
        }
    }
}

/// Retained basis indices (sorted) with display labels.
#[derive(Debug, Clone)]
pub struct OutcomeSet {
    retained: Vec<usize>,
    labels: Vec<String>,
}

impl OutcomeSet {
    #[cfg(test)]
    pub(crate) fn from_parts(retained: Vec<usize>, labels: Vec<String>) -> Self {
        OutcomeSet { retained, labels }
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }
}

fn is_collision_free(s: &OccupationVector) -> bool {
    s.occ().iter().all(|&k| k <= 1)
}

fn is_rail_state(s: &OccupationVector, rails: usize) -> bool {
    s.occ()
        .chunks(rails)
        .all(|block| block.iter().sum::<u32>() == 1 && block.iter().all(|&k| k <= 1))
}

/// Retained outcome set of a regime, ordered by basis index.
pub fn retained_indices(regime: &Regime, basis: &FockBasis) -> Result<OutcomeSet> {
    regime.validate(basis.m(), basis.n())?;
    let mut retained = Vec::new();
    let mut labels = Vec::new();
    for (i, s) in basis.states().iter().enumerate() {
        let keep = match regime {
            Regime::AllowBunching => true,
            Regime::CollisionFree => is_collision_free(s),
            Regime::RailCode { rails } => is_rail_state(s, *rails),
        };
        if keep {
            retained.push(i);
            labels.push(match regime {
                Regime::RailCode { rails } => logical_label(s, *rails)?,
                _ => s.to_string(),
            });
        }
    }
    Ok(OutcomeSet { retained, labels })
}

/// Logical digit string of a rail-code state: digit b is the 0-based rail
/// position of the photon in block b.
pub fn logical_label(s: &OccupationVector, rails: usize) -> Result<String> {
    if rails < 2 || s.modes() % rails != 0 {
        return Err(Error::invalid(format!(
            "rail count {rails} incompatible with {} modes",
            s.modes()
        )));
    }
    if !is_rail_state(s, rails) {
        return Err(Error::invalid(format!(
            "{s} is not a valid rail-{rails} code state"
        )));
    }
    let mut out = String::with_capacity(s.modes() / rails);
    for block in s.occ().chunks(rails) {
        let pos = block.iter().position(|&k| k == 1).unwrap();
        out.push_str(&pos.to_string());
    }
    Ok(out)
}

/// O_succ = K†K: diagonal projector with ones on retained indices.
pub fn success_observable(regime: &Regime, basis: &FockBasis) -> Result<SectorOperator> {
    let outcome = retained_indices(regime, basis)?;
    let mut diag = vec![0.0; basis.dim()];
    for &i in outcome.retained() {
        diag[i] = 1.0;
    }
    SectorOperator::from_diagonal(basis, &diag)
}

/// O^(K) = K†OK: zero all rows and columns outside the retained set.
pub fn pulled_back_observable(
    regime: &Regime,
    obs: &SectorOperator,
    basis: &FockBasis,
) -> Result<SectorOperator> {
    if obs.m() != basis.m() || obs.n() != basis.n() {
        return Err(Error::invalid("observable sector does not match basis"));
    }
    let outcome = retained_indices(regime, basis)?;
    let d = basis.dim();
    let mut keep = vec![false; d];
    for &i in outcome.retained() {
        keep[i] = true;
    }
    let mut out = obs.clone();
    let entries = out.entries_mut();
    for r in 0..d {
        for c in 0..d {
            if !(keep[r] && keep[c]) {
                entries[[r, c]] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(out)
}

/// Canonical input state: rail codes place the photon on rail 0 of each
/// block (modes 0, r, 2r, …); other regimes fill modes 0..n−1.
pub fn default_input(regime: &Regime, m: usize, n: u32) -> Result<OccupationVector> {
    regime.validate(m, n)?;
    let mut occ = vec![0u32; m];
    match regime {
        Regime::RailCode { rails } => {
            for b in 0..(m / rails) {
                occ[b * rails] = 1;
            }
        }
        _ => {
            if n as usize > m {
                return Err(Error::config(format!(
                    "default input needs one photon per designated mode: n={n} > m={m}"
                )));
            }
            for j in 0..n as usize {
                occ[j] = 1;
            }
        }
    }
    Ok(OccupationVector::new(occ))
}
