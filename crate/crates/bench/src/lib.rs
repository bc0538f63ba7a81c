// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the criterion harness.

use wolff_trace::bench::Fixture;
use wolff_trace::instance::{generate, Instance, InstanceSpec, KernelClass};

pub use wolff_trace::bench::{naive_masses, sweep, tree_masses};

/// `(depth, atoms)` cells measured by the criterion group; the CLI `bench`
/// command covers the full grid.
pub const CELLS: [(usize, usize); 4] = [(4, 1_000), (8, 1_000), (10, 1_000), (10, 10_000)];

pub fn fixture(depth: usize, atoms: usize) -> Fixture {
    Fixture::new(1, depth, atoms, 7).expect("fixture parameters are valid")
}

/// Small certifier workload: three sigma atoms, eight mu atoms.
pub fn certify_instance() -> Instance {
    generate(&InstanceSpec {
        seed: 11,
        sigma_atoms: 3,
        mu_atoms: 8,
        level_min: -6,
        kernel: KernelClass::Power { gamma_min: 0.0, gamma_max: 1.0, jitter: 2.0 },
        ..InstanceSpec::default()
    })
    .expect("generator spec is valid")
}
