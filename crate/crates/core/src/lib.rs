// SPDX-License-Identifier: Apache-2.0

//! Nonlinear dyadic Wolff potentials, their energies, and certified bounds
//! for two-weight trace inequalities `||T[f dsigma]||_{L^q(mu)} <= C ||f||_{L^p(sigma)}`.
//!
//! The dyadic side ([`lattice`], [`dyadic`], [`certifier`]) is exact finite
//! arithmetic over a [`LatticeWindow`]; [`continuum`] evaluates the radial
//! analogues by quadrature and bridges back through shifted dyadic lattices.

/// Library version embedded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod bench;
pub mod calibration;
pub mod certifier;
pub mod continuum;
pub mod dyadic;
pub mod error;
pub mod instance;
pub mod lattice;

pub use certifier::{
    best_constant, best_constant_oracle, certificate_from_potentials, equivalence_report, witness_bounds,
    AscentConfig, Certificate, ConstantEstimate, EquivalenceReport, TraceProblem, WitnessReport,
};
pub use continuum::{RadialKernel, ReferenceMeasure};
pub use dyadic::{CarlesonReport, CarlesonStatus, DyadicKernel, DyadicModel, Exponents, Mu1, NodeField};
pub use error::{Endpoint, Error, Result};
pub use instance::{Instance, KernelSpec};
pub use lattice::{cube_at, Atom, AtomicMeasure, BallMode, DyadicCube, LatticeWindow, MeasureTree, NodeId};
