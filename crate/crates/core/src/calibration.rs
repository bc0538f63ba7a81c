// SPDX-License-Identifier: Apache-2.0

//! Seeded instance families behind the acceptance suite, and the ratio
//! windows calibrated on them.
//!
//! The equivalence constants of the two-sided estimates are not explicit,
//! so each family's window is measured once (`wolff-trace calibrate`),
//! widened by [`MARGIN`] on both sides, and frozen into a fixture. A rerun
//! must reproduce the observed extremes exactly and keep every member
//! inside the window.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certifier::{self, certificate_from_potentials};
use crate::continuum::{self, RadialKernel, WolffMethod};
use crate::dyadic::Exponents;
use crate::error::Result;
use crate::instance::{generate, Instance, InstanceSpec, KernelClass};
use crate::lattice::AtomicMeasure;

/// Relative widening of observed extremes.
pub const MARGIN: f64 = 1.25;
pub const ORACLE_FAMILY: usize = 500;
pub const SANDWICH_FAMILY: usize = 200;
pub const SANDWICH_P: [f64; 3] = [1.5, 2.0, 3.0];
pub const DLBO_CEILING: f64 = 4.0;
pub const EQUIVALENCE_FAMILY: usize = 100;
pub const EQUIVALENCE_PQ: [(f64, f64); 3] = [(2.0, 1.0), (2.0, 0.5), (3.0, 2.0)];
pub const EQUIVALENCE_GRID: usize = 20_000;
pub const WITNESS_FAMILY: usize = 200;
pub const DILATION_FAMILY: usize = 50;
pub const DILATIONS: [f64; 2] = [0.5, 2.0];
pub const DILATION_TRUNCATION: f64 = 4.0;
pub const CONTINUUM_FAMILY: usize = 50;
pub const CONTINUUM_SHIFTS: usize = 64;
pub const CONTINUUM_LEVELS: (i32, i32) = (-6, 0);

/// Mixed-class instance `i` of the oracle-equivalence family: `n` in
/// {1, 2}, depth at most 6, at most 50 atoms.
pub fn oracle_spec(i: usize) -> InstanceSpec {
    let n = 1 + i % 2;
    let depth = if n == 1 { 1 + i % 6 } else { 1 + i % 4 };
    let kernel = match i % 3 {
        0 => KernelClass::Power { gamma_min: -0.5, gamma_max: 1.0, jitter: 3.0 },
        1 => KernelClass::Riesz { alpha_min: 0.2, alpha_max: 0.9 * n as f64 },
        _ => KernelClass::SingleCube { value: 1.5 },
    };
    let p = [1.5, 2.0, 3.0][i % 3];
    InstanceSpec {
        seed: 1_000_000 + i as u64,
        n,
        level_min: -(depth as i32),
        level_max: 0,
        roots_per_axis: 1 + ((i / 2) % 2) as i64,
        sigma_atoms: 1 + i % 25,
        mu_atoms: 1 + (i * 7) % 25,
        kernel,
        p,
        q: p / 2.0,
        max_dlbo: f64::INFINITY,
        max_attempts: 1,
        ..InstanceSpec::default()
    }
}

/// Instance `i` of the Wolff-sandwich family at exponent `p`, `A <= 4`.
pub fn sandwich_spec(p: f64, i: usize) -> InstanceSpec {
    let n = 1 + i % 2;
    InstanceSpec {
        seed: 2_000_000 + (p * 1000.0) as u64 * 1000 + i as u64,
        n,
        level_min: if n == 1 { -5 } else { -3 },
        level_max: 0,
        roots_per_axis: 1,
        sigma_atoms: 4 + i % 17,
        mu_atoms: 1 + i % 8,
        kernel: KernelClass::Power { gamma_min: 0.0, gamma_max: 1.0, jitter: 2.0 },
        p,
        q: p / 2.0,
        max_dlbo: DLBO_CEILING,
        max_attempts: 500,
        ..InstanceSpec::default()
    }
}

/// Instance `i` of the trace-equivalence family: at most 3 sigma atoms.
pub fn equivalence_spec(p: f64, q: f64, i: usize) -> InstanceSpec {
    InstanceSpec {
        seed: 3_000_000 + (p * 100.0 + q * 10.0) as u64 * 1000 + i as u64,
        n: 1,
        level_min: -4,
        level_max: 0,
        roots_per_axis: 1,
        sigma_atoms: 1 + i % 3,
        mu_atoms: 1 + i % 6,
        kernel: KernelClass::Power { gamma_min: 0.0, gamma_max: 1.0, jitter: 2.0 },
        p,
        q,
        max_dlbo: DLBO_CEILING,
        max_attempts: 500,
        ..InstanceSpec::default()
    }
}

/// Instance and random `lambda` (indexed by node id) for witness pair `i`.
pub fn witness_case(i: usize) -> Result<(Instance, Vec<f64>)> {
    let inst = generate(&sandwich_spec(2.0, i))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4_000_000 + i as u64);
    let lambda = (0..inst.window().cube_count())
        .map(|_| if rng.random::<f64>() < 0.3 { rng.random::<f64>() } else { 0.0 })
        .collect();
    Ok((inst, lambda))
}

fn random_atoms(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64) -> AtomicMeasure {
    AtomicMeasure::from_pairs(1, (0..count).map(|_| (vec![rng.random_range(lo..hi)], rng.random_range(0.1..1.0))))
        .expect("one-dimensional atoms")
}

/// Riesz kernel on the line with `alpha in [0.6, 0.9]` and 1-5 mu atoms.
pub fn dilation_case(i: usize) -> (RadialKernel, AtomicMeasure) {
    let mut rng = ChaCha8Rng::seed_from_u64(5_000_000 + i as u64);
    let alpha = rng.random_range(0.6..0.9);
    let count = rng.random_range(1..=5);
    let mu = random_atoms(&mut rng, count, 0.0, 1.0);
    (RadialKernel::riesz(alpha, 1).expect("alpha in range"), mu)
}

/// Riesz kernel with `alpha in [0.3, 0.7]`, sigma the 64-point grid of
/// `[0, 1)` with mass 1/64 each (discretized Lebesgue), 1-5 distinct mu
/// atoms in `[0.1, 0.9]` placed midway between grid points, so no mu atom
/// sits closer to sigma than the finest dyadic scale resolves.
pub fn continuum_case(i: usize) -> (RadialKernel, AtomicMeasure, AtomicMeasure) {
    let mut rng = ChaCha8Rng::seed_from_u64(6_000_000 + i as u64);
    let alpha = rng.random_range(0.3..0.7);
    let count = rng.random_range(1..=5);
    let mut slots: Vec<u32> = Vec::with_capacity(count);
    while slots.len() < count {
        let j = rng.random_range(7..=57);
        if !slots.contains(&j) {
            slots.push(j);
        }
    }
    let mu = AtomicMeasure::from_pairs(1, slots.iter().map(|&j| (vec![j as f64 / 64.0], rng.random_range(0.1..1.0))))
        .expect("grid atoms");
    let sigma = AtomicMeasure::from_pairs(1, (0..64).map(|j| (vec![(j as f64 + 0.5) / 64.0], 1.0 / 64.0)))
        .expect("grid atoms");
    (RadialKernel::riesz(alpha, 1).expect("alpha in range"), sigma, mu)
}

/// `energy / wolff_energy` across the sandwich family; empty-mu members
/// are impossible by construction.
pub fn sandwich_ratios(p: f64) -> Result<Vec<f64>> {
    (0..SANDWICH_FAMILY)
        .into_par_iter()
        .map(|i| {
            let inst = generate(&sandwich_spec(p, i))?;
            let m = inst.model()?;
            let e = inst.exponents();
            Ok(m.energy(inst.mu(), e)? / m.wolff_energy(inst.mu(), e)?)
        })
        .collect()
}

/// `C^q / certificate` with `C` from the grid oracle.
pub fn equivalence_ratios(p: f64, q: f64) -> Result<Vec<f64>> {
    (0..EQUIVALENCE_FAMILY)
        .into_par_iter()
        .map(|i| {
            let inst = generate(&equivalence_spec(p, q, i))?;
            let m = inst.model()?;
            let e = inst.exponents();
            let c = certifier::best_constant_oracle(&m, inst.mu(), e, EQUIVALENCE_GRID)?;
            Ok(c.trace_constant / certifier::certificate(&m, inst.mu(), e)?.value)
        })
        .collect()
}

/// Certificate built from the truncated convolution-form potential.
pub fn convolution_certificate(k: &RadialKernel, mu: &AtomicMeasure, exps: &Exponents, truncation: f64) -> Result<f64> {
    let w: Vec<f64> = mu
        .atoms()
        .iter()
        .map(|a| continuum::wolff_convolution(k, mu, exps, &a.x, truncation, WolffMethod::Auto))
        .collect::<Result<_>>()?;
    Ok(certificate_from_potentials(mu, &w, exps).value)
}

/// `certificate(k) / certificate(k_c)` over the dilation family.
pub fn dilation_ratios(c: f64) -> Result<Vec<f64>> {
    let exps = Exponents::new(2.0, 1.0)?;
    (0..DILATION_FAMILY)
        .into_par_iter()
        .map(|i| {
            let (k, mu) = dilation_case(i);
            let a = convolution_certificate(&k, &mu, &exps, DILATION_TRUNCATION)?;
            let b = convolution_certificate(&k.dilate(c)?, &mu, &exps, DILATION_TRUNCATION)?;
            Ok(a / b)
        })
        .collect()
}

/// `energy_continuous / shifted_energy_sup` over the continuum family.
pub fn continuum_ratios() -> Result<Vec<f64>> {
    let exps = Exponents::new(2.0, 1.0)?;
    (0..CONTINUUM_FAMILY)
        .into_par_iter()
        .map(|i| {
            let (k, sigma, mu) = continuum_case(i);
            let (lo, hi) = CONTINUUM_LEVELS;
            let r = continuum::compare_continuum(&k, &sigma, &mu, &exps, CONTINUUM_SHIFTS, i as u64, lo, hi)?;
            Ok(r.ratio)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenWindow {
    pub observed_min: f64,
    pub observed_max: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FrozenWindow {
    pub fn from_ratios(ratios: &[f64]) -> Self {
        let observed_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let observed_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        FrozenWindow { observed_min, observed_max, lo: observed_min / MARGIN, hi: observed_max * MARGIN }
    }

    pub fn contains_all(&self, ratios: &[f64]) -> bool {
        ratios.iter().all(|r| r.is_finite() && *r > 0.0 && *r >= self.lo && *r <= self.hi)
    }

    /// The observed extremes of `ratios` match the frozen ones bit for bit.
    pub fn reproduced_by(&self, ratios: &[f64]) -> bool {
        let now = FrozenWindow::from_ratios(ratios);
        now.observed_min.to_bits() == self.observed_min.to_bits()
            && now.observed_max.to_bits() == self.observed_max.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowsFile {
    pub margin: f64,
    pub sandwich: BTreeMap<String, FrozenWindow>,
    pub equivalence: BTreeMap<String, FrozenWindow>,
    pub dilation: BTreeMap<String, FrozenWindow>,
    pub continuum: FrozenWindow,
}

pub fn sandwich_key(p: f64) -> String {
    format!("p={p}")
}
pub fn equivalence_key(p: f64, q: f64) -> String {
    format!("p={p},q={q}")
}
pub fn dilation_key(c: f64) -> String {
    format!("c={c}")
}

/// Runs every calibrated family and freezes its window.
pub fn calibrate() -> Result<WindowsFile> {
    let mut sandwich = BTreeMap::new();
    for p in SANDWICH_P {
        sandwich.insert(sandwich_key(p), FrozenWindow::from_ratios(&sandwich_ratios(p)?));
    }
    let mut equivalence = BTreeMap::new();
    for (p, q) in EQUIVALENCE_PQ {
        equivalence.insert(equivalence_key(p, q), FrozenWindow::from_ratios(&equivalence_ratios(p, q)?));
    }
    let mut dilation = BTreeMap::new();
    for c in DILATIONS {
        dilation.insert(dilation_key(c), FrozenWindow::from_ratios(&dilation_ratios(c)?));
    }
    let continuum = FrozenWindow::from_ratios(&continuum_ratios()?);
    Ok(WindowsFile { margin: MARGIN, sandwich, equivalence, dilation, continuum })
}
