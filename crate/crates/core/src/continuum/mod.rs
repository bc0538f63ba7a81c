// SPDX-License-Identifier: Apache-2.0

//! Radial kernels `k(|x - y|)` on `R^n`: averaged kernels over balls, the
//! continuous Wolff potentials, continuous energies, and the bridge back to
//! the dyadic theory through randomly shifted lattices.

pub mod energy;
pub mod kernel;
pub mod potential;
pub mod quadrature;

pub use energy::{
    compare_continuum, covering_window, energy_continuous, potential_at, sample_shifts, sampled_doubling,
    shifted_energy_sup, ContinuumComparison, EnergyEstimate, MonteCarloConfig, ShiftedEnergy,
};
pub use kernel::{unit_ball_volume, RadialKernel, ReferenceMeasure};
pub use potential::{
    kbar_radial, lbo_constant, wolff_continuous, wolff_continuous_with, wolff_convolution, LboBall, LboReport,
    WolffMethod,
};
pub use quadrature::QuadratureConfig;

/// `k_c(r) = k(c r)`.
pub fn dilate(k: &RadialKernel, c: f64) -> crate::error::Result<RadialKernel> {
    k.dilate(c)
}
