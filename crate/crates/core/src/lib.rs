//! Critical lattice models and their super-Brownian reference quantities.
//!
//! The crate covers voter-model, oriented-percolation, and branching random
//! walk simulation with exact ancestral relations; exact lattice-tree and
//! lace-expansion identities at small size; the boundary blow-up profile
//! `v_d(0)` and Feller-diffusion closed forms; and Monte Carlo estimators for
//! survival, one-arm, range, and moment statistics.

pub mod ancestral;
pub mod brw;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod op;
pub mod rng;
pub mod tree;
pub mod voter;
pub mod walk;

pub use ancestral::{check_ar_axioms, AncestralPath, AncestralSystem, TimeKind};
pub use error::{Error, Result};
pub use lattice::{Kernel, KernelVariant, PointSet, ScalingFunction, Site};
pub use rng::StreamKey;
