//! Optimal work extraction from finite-dimensional quantum systems for agents
//! that are not neutral to risk.
//!
//! An agent performs a unitary cycle on a state `ρ` with Hamiltonian `H` and
//! ranks cycles by the expected value of a utility function of the extracted
//! work. For the exponential utility `u(w) = (1 - e^{-rw})/r` the optimum over
//! all cycles has a closed form; for incoherent states it is realised by a
//! permutation of the energy levels, and for coherent states by the
//! eigenbasis of `e^{-rH/2} ρ e^{-rH/2}` under the `q = 1/2` quasiprobability
//! representation of work.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices and a Jacobi eigensolver for small
//!   Hermitian matrices.
//! - [`model`]: Hamiltonians, density states, dephasing, composition and
//!   reduction of bipartite systems, passivity predicates.
//! - [`work`]: two-point-measurement and quasiprobability work distributions.
//! - [`utility`]: utility functions, expected utility, certainty equivalents.
//! - [`incoherent`]: closed-form and exhaustive optima for incoherent states,
//!   thresholds, small-`r` expansions and majorization criteria.
//! - [`coherent`]: optima with initial coherence, the `x_jk` matrix and its
//!   affine decomposition into permutation matrices.
//! - [`oracle`]: brute-force search over the unitary group.
//! - [`sweep`]: phase diagrams, `q` sweeps and state comparison grids.

pub mod coherent;
pub mod error;
pub mod incoherent;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sampling;
pub mod sweep;
pub mod tolerance;
pub mod utility;
pub mod work;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, EigenDecomposition, RealMatrix};
pub use model::{DensityState, Hamiltonian};
pub use tolerance::Tolerances;

pub use num_complex::Complex64;
