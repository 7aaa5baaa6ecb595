//! Desk-scale toolkit for generating, measuring and certifying the complete
//! d-dimensional Bell basis of OAM-entangled photon pairs.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`spdc`] builds the down-converted biphoton for an OAM-superposed pump and
//!    equalizes it with Procrustean filtering, one correlation class `m` at a time.
//! 2. [`gates`] applies a Dove-prism phase to one arm to reach every phase class `n`.
//! 3. [`measurement`] evaluates the two-mode projective measurement set and emulates
//!    noisy coincidence counts.
//! 4. [`tomography`] reconstructs a physical density matrix by constrained χ² fitting.
//! 5. [`certify`] computes fidelities, overlap tables, the dimensionality witness and
//!    the dense-coding mutual information.
//!
//! [`hilbert`] holds the small dense linear-algebra kernel and [`bellbasis`] the
//! reference Bell states everything is checked against.

pub mod bellbasis;
pub mod certify;
pub mod cli;
pub mod error;
pub mod formats;
pub mod gates;
pub mod hilbert;
pub mod measurement;
pub mod spdc;
pub mod svg;
pub mod tomography;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, Operator, PureState, C64};
