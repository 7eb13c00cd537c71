//! Geometric quantum-circuit complexity on SU(2^n) and Lie-algebraic
//! barren-plateau diagnostics.
//!
//! * [`pauli`]: exact Pauli-string algebra and Hermitian coefficient vectors.
//! * [`unitary`]: exponential, principal logarithm, charts, curve
//!   Hamiltonians, time-ordered propagation and the frame-change series.
//! * [`lie`]: dynamical Lie algebra closure, center, simple ideals, purities.
//! * [`geometry`]: right-invariant penalty metrics and Pauli geodesics.
//! * [`sampling`]: Haar sampling and invariance tests.
//! * [`plateau`]: layered ansaetze, loss variance and moment operators.

pub mod error;
pub mod geometry;
pub mod lie;
pub mod linalg;
pub mod pauli;
pub mod plateau;
pub mod sampling;
pub mod stats;
pub mod unitary;

pub use error::{Error, Result};
pub use pauli::{HermitianCoeffs, PauliString, Phase, PhasedPauli};
pub use unitary::{UnitaryCurve, UnitaryMatrix};
