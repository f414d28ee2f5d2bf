//! Biprime factorization workbench built around a continuous-time
//! self-organizing-gate (SOG) circuit emulator.
//!
//! The pipeline compiles factorization into binary integer linear programs,
//! relaxes them with the emulator, and post-processes the solutions:
//!
//! 1. [`model_direct`] encodes `p*q = n` directly over factor bits.
//! 2. [`model_congruence`] encodes the search for smooth congruences
//!    `x̄x + kn = y`, which [`combiner`] turns into Fermat relations
//!    `Y² − X² = Kn` and factors via `gcd(Y − X, n)`.
//! 3. [`sog`] is the circuit emulator: one voltage per binary variable, one
//!    feedback unit per linear inequality, convergence accepted only on an
//!    exact integer re-evaluation of the model.
//! 4. [`tuner`] searches the per-family design parameter space with parallel
//!    tempering; [`diagnostics`] provides time-to-solution statistics, gamma
//!    fits, threshold-crossing correlations and unsat summaries.
//! 5. [`harness`] wires everything into runnable experiments (also exposed
//!    through the `sogfactor` binary and the `examples/` directory).
//!
//! Numbers are exact everywhere it matters: models evaluate with
//! arbitrary-precision integers, relations are validated with exact
//! arithmetic, and floating point only drives the circuit dynamics.

pub mod combiner;
pub mod diagnostics;
pub mod harness;
pub mod ilp;
pub mod model_congruence;
pub mod model_direct;
pub mod numtheory;
pub mod testkit;
pub mod sog;
pub mod tuner;

pub use ilp::{Assignment, IlpModel, LinearConstraint, Sense, VarId};
pub use numtheory::{BenchmarkBiprime, FactorBase, SmoothFactorization};
