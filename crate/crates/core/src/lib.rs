//! Exact simulator and diagnostics toolkit for passive photonic variational
//! circuits under postselection.
//!
//! The crate covers the full pipeline: Fock-sector enumeration and permanent
//! kernels ([`fock`]), universal rectangular MZI meshes ([`mesh`]),
//! postselection regimes ([`postselect`]), Lie-algebraic purity diagnostics
//! ([`liealg`]), the Bhattacharyya loss with exact gradients ([`loss`]),
//! reproducible initialization ensembles ([`ensembles`]), and the
//! Monte-Carlo variance harness with scaling-law fits ([`harness`]).

pub mod ensembles;
pub mod error;
pub mod fock;
pub mod harness;
pub mod liealg;
pub mod linalg;
pub mod loss;
pub mod mesh;
pub mod postselect;

pub use error::{Error, Result};
