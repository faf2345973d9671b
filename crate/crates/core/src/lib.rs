//! Recovery of a vector from phaseless quadratic measurements `|<x, z_i>|^2`
//! by lifting to `X = x x*` and solving the convex feasibility problem
//! `{X ⪰ 0} ∩ {A(X) = b}` without any trace minimization.
//!
//! The crate is organised bottom-up:
//!
//! * [`matcore`]: field-generic Hermitian matrices, eigendecomposition,
//!   Schatten norms and the `T_x` / `T_x⊥` subspace projectors.
//! * [`sensing`]: Gaussian sensing ensembles, the lifted measurement operator
//!   and its adjoint, the moment operator `S` and the noise model.
//! * [`projections`]: projectors onto the PSD cone and the affine measurement
//!   slice, plus rounding helpers.
//! * [`solvers`]: Douglas-Rachford, POCS and accelerated projected gradient.
//! * [`certificate`]: the truncated inexact dual certificate and empirical
//!   checks of the conditions that certify uniqueness.
//! * [`harness`]: seeded trials, phase-transition grids, convergence studies
//!   and their CSV / PGM outputs.

pub mod certificate;
pub mod error;
pub mod harness;
pub mod matcore;
pub mod projections;
pub mod rng;
pub mod sensing;
pub mod solvers;

pub use error::{Error, Result};
pub use matcore::{EigenDecomposition, Field, HermitianMatrix, Scalar, SchattenP, SubspaceAnchor};
pub use projections::AffineProjector;
pub use sensing::{MeasurementVector, SensingEnsemble};
pub use solvers::{Method, SolverConfig, SolverTrace, TraceRecord};

pub use nalgebra::{Complex, DMatrix, DVector};
