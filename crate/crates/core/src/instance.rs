// SPDX-License-Identifier: Apache-2.0

//! The `wolff-trace/1` instance format and the seeded instance generator.
//!
//! An instance is one JSON document: window, both measures as
//! `[[coordinates], mass]` pairs, the kernel, and `p`, `q`. Reals are
//! written in shortest round-trip form, so parse(serialize(x)) == x exactly.
//! The instance hash is the SHA-256 of the compact serialization.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuum::RadialKernel;
use crate::dyadic::{DyadicKernel, DyadicModel, Exponents};
use crate::error::{Error, Result};
use crate::lattice::{cell_index, pow2, AtomicMeasure, LatticeWindow};

pub const SCHEMA: &str = "wolff-trace/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub shift: Vec<f64>,
    pub level_min: i32,
    pub level_max: i32,
    pub roots: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Riesz { alpha: f64 },
    Table { r: Vec<f64>, k: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `(level, index, K(Q))` on the window's lattice; absent cubes have
    /// `K = 0`.
    Table { entries: Vec<(i32, Vec<i64>, f64)> },
    /// `K(Q) = k(2^level)`.
    Radial { profile: ProfileSpec },
}

/// On-disk form, field order fixed for canonical serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema: String,
    pub n: usize,
    pub window: WindowSpec,
    pub sigma: Vec<(Vec<f64>, f64)>,
    pub mu: Vec<(Vec<f64>, f64)>,
    pub kernel: KernelSpec,
    pub p: f64,
    pub q: f64,
}

/// A validated instance.
#[derive(Clone, Debug)]
pub struct Instance {
    file: InstanceFile,
    sigma: AtomicMeasure,
    mu: AtomicMeasure,
    exps: Exponents,
    kernel: DyadicKernel,
    radial: Option<RadialKernel>,
}

impl ProfileSpec {
    pub fn to_kernel(&self, dim: usize) -> Result<RadialKernel> {
        match self {
            ProfileSpec::Riesz { alpha } => RadialKernel::riesz(*alpha, dim),
            ProfileSpec::Table { r, k } => RadialKernel::table(r.clone(), k.clone()),
        }
    }
}

impl Instance {
    pub fn from_file(file: InstanceFile) -> Result<Self> {
        if file.schema != SCHEMA {
            return Err(Error::Schema(file.schema));
        }
        let w = &file.window;
        if w.shift.len() != file.n {
            return Err(Error::DimensionMismatch { expected: file.n, found: w.shift.len() });
        }
        let window = LatticeWindow::new(w.shift.clone(), w.level_min, w.level_max, w.roots.clone())?;
        let sigma = AtomicMeasure::from_pairs(file.n, file.sigma.iter().cloned())?;
        let mu = AtomicMeasure::from_pairs(file.n, file.mu.iter().cloned())?;
        let exps = Exponents::new(file.p, file.q)?;
        let (kernel, radial) = match &file.kernel {
            KernelSpec::Table { entries } => (DyadicKernel::from_table(window, entries)?, None),
            KernelSpec::Radial { profile } => {
                let k = profile.to_kernel(file.n)?;
                (DyadicKernel::from_radial(window, &k)?, Some(k))
            }
        };
        Ok(Instance { file, sigma, mu, exps, kernel, radial })
    }

    /// Parses and validates; JSON errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        Instance::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Instance::parse(&std::fs::read_to_string(path)?)
    }

    pub fn file(&self) -> &InstanceFile {
        &self.file
    }
    pub fn sigma(&self) -> &AtomicMeasure {
        &self.sigma
    }
    pub fn mu(&self) -> &AtomicMeasure {
        &self.mu
    }
    pub fn exponents(&self) -> &Exponents {
        &self.exps
    }
    pub fn kernel(&self) -> &DyadicKernel {
        &self.kernel
    }
    pub fn window(&self) -> &LatticeWindow {
        self.kernel.window()
    }
    pub fn radial(&self) -> Option<&RadialKernel> {
        self.radial.as_ref()
    }

    pub fn model(&self) -> Result<DyadicModel> {
        DyadicModel::new(self.kernel.clone(), self.sigma.clone())
    }

    /// Compact serialization; the hash input.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.file).expect("instance serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.file).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_pretty_json())?)
    }

    /// Same instance on the levels `[level_min, level_max]` of the same
    /// lattice, with roots covering every atom. Table entries must fall in
    /// the new window.
    pub fn with_levels(&self, level_min: i32, level_max: i32) -> Result<Self> {
        let shift = &self.file.window.shift;
        let mut roots: Vec<Vec<i64>> = self
            .sigma
            .atoms()
            .iter()
            .chain(self.mu.atoms())
            .map(|a| a.x.iter().zip(shift).map(|(x, z)| cell_index(x - z, level_max)).collect())
            .collect();
        // keep the old window's extent, too
        let old = &self.file.window;
        for r in &old.roots {
            let corner: Vec<f64> = r.iter().map(|k| *k as f64 * pow2(old.level_max)).collect();
            roots.push(corner.iter().map(|c| cell_index(*c, level_max)).collect());
        }
        roots.sort();
        roots.dedup();
        let mut file = self.file.clone();
        file.window = WindowSpec { shift: shift.clone(), level_min, level_max, roots };
        Instance::from_file(file)
    }
}

/// Family of dyadic kernels drawn by the generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelClass {
    /// `K(Q) = r_Q^gamma * U[1, jitter]` with `gamma ~ U[gamma_min, gamma_max]`
    /// drawn once per attempt and the jitter per cube.
    Power { gamma_min: f64, gamma_max: f64, jitter: f64 },
    /// Radial Riesz profile with `alpha ~ U[alpha_min, alpha_max]`.
    Riesz { alpha_min: f64, alpha_max: f64 },
    /// `K = value` on one randomly chosen root, zero elsewhere (`A = 1`).
    SingleCube { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub n: usize,
    pub level_min: i32,
    pub level_max: i32,
    /// Roots are the `roots_per_axis^n` top-level cubes of `[0, roots_per_axis 2^level_max)^n`.
    pub roots_per_axis: i64,
    pub sigma_atoms: usize,
    pub mu_atoms: usize,
    pub mass_min: f64,
    pub mass_max: f64,
    pub kernel: KernelClass,
    pub p: f64,
    pub q: f64,
    /// Kernels are redrawn until the DLBO constant is at most this.
    pub max_dlbo: f64,
    pub max_attempts: usize,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            seed: 0,
            n: 1,
            level_min: -4,
            level_max: 0,
            roots_per_axis: 1,
            sigma_atoms: 8,
            mu_atoms: 4,
            mass_min: 0.1,
            mass_max: 1.0,
            kernel: KernelClass::Power { gamma_min: 0.0, gamma_max: 1.0, jitter: 2.0 },
            p: 2.0,
            q: 1.0,
            max_dlbo: f64::INFINITY,
            max_attempts: 64,
        }
    }
}

/// Uniform point of `[0, extent)^n` off every finest-level cell boundary.
fn draw_point(rng: &mut ChaCha8Rng, n: usize, extent: f64, level_min: i32) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * extent).collect();
        let on_boundary = x.iter().any(|c| {
            let scaled = c * pow2(-level_min);
            scaled == scaled.floor()
        });
        if !on_boundary {
            return x;
        }
    }
}

fn draw_atoms(rng: &mut ChaCha8Rng, spec: &InstanceSpec, count: usize, extent: f64) -> Vec<(Vec<f64>, f64)> {
    (0..count)
        .map(|_| {
            let x = draw_point(rng, spec.n, extent, spec.level_min);
            let w = if spec.mass_max > spec.mass_min { rng.random_range(spec.mass_min..spec.mass_max) } else { spec.mass_min };
            (x, w)
        })
        .collect()
}

/// Deterministic instance from `spec`: same spec, same bytes.
pub fn generate(spec: &InstanceSpec) -> Result<Instance> {
    if spec.n == 0 || spec.roots_per_axis < 1 {
        return Err(Error::InvalidArgument("dimension and roots per axis must be positive".into()));
    }
    if !(spec.mass_min > 0.0 && spec.mass_max >= spec.mass_min) {
        return Err(Error::InvalidArgument("mass range must be positive".into()));
    }
    let window = LatticeWindow::grid(spec.n, spec.level_min, spec.level_max, spec.roots_per_axis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let extent = spec.roots_per_axis as f64 * pow2(spec.level_max);
    let sigma = draw_atoms(&mut rng, spec, spec.sigma_atoms, extent);
    let mu = draw_atoms(&mut rng, spec, spec.mu_atoms, extent);
    let sigma_m = AtomicMeasure::from_pairs(spec.n, sigma.iter().cloned())?;
    let tree = crate::lattice::MeasureTree::build(&window, &sigma_m)?;

    let window_spec = WindowSpec {
        shift: window.shift().to_vec(),
        level_min: spec.level_min,
        level_max: spec.level_max,
        roots: window.roots().to_vec(),
    };
    let mut best = f64::INFINITY;
    for _ in 0..spec.max_attempts.max(1) {
        let kernel_spec = match spec.kernel {
            KernelClass::Power { gamma_min, gamma_max, jitter } => {
                let gamma = if gamma_max > gamma_min { rng.random_range(gamma_min..gamma_max) } else { gamma_min };
                let entries = (0..window.cube_count())
                    .map(|id| {
                        let c = window.cube(id);
                        let j = if jitter > 1.0 { rng.random_range(1.0..jitter) } else { 1.0 };
                        (c.level, c.index, pow2(c.level).powf(gamma) * j)
                    })
                    .collect();
                KernelSpec::Table { entries }
            }
            KernelClass::Riesz { alpha_min, alpha_max } => {
                let alpha = if alpha_max > alpha_min { rng.random_range(alpha_min..alpha_max) } else { alpha_min };
                KernelSpec::Radial { profile: ProfileSpec::Riesz { alpha } }
            }
            KernelClass::SingleCube { value } => {
                let root = window.roots()[rng.random_range(0..window.roots().len())].clone();
                KernelSpec::Table { entries: vec![(spec.level_max, root, value)] }
            }
        };
        let file = InstanceFile {
            schema: SCHEMA.into(),
            n: spec.n,
            window: window_spec.clone(),
            sigma: sigma.clone(),
            mu: mu.clone(),
            kernel: kernel_spec,
            p: spec.p,
            q: spec.q,
        };
        let inst = Instance::from_file(file)?;
        let a = DyadicModel::with_tree(inst.kernel.clone(), inst.sigma.clone(), tree.clone())?.dlbo_constant();
        if a <= spec.max_dlbo {
            return Ok(inst);
        }
        best = best.min(a);
    }
    Err(Error::TargetAUnreachable { target: spec.max_dlbo, attempts: spec.max_attempts.max(1), best })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "schema": "wolff-trace/1", "n": 1,
        "window": {"shift": [0.0], "level_min": -1, "level_max": 0, "roots": [[0]]},
        "sigma": [[[0.25], 1.0], [[0.75], 1.0]],
        "mu": [[[0.25], 1.0]],
        "kernel": {"type": "table", "entries": [[0, [0], 1.0], [-1, [0], 2.0], [-1, [1], 2.0]]},
        "p": 2.0, "q": 1.0
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let inst = Instance::parse(EXAMPLE).unwrap();
        let m = inst.model().unwrap();
        assert_eq!(m.wolff_dlbo(inst.mu(), inst.exponents(), &[0.25]).unwrap(), 8.0);
        let again = Instance::parse(&inst.to_pretty_json()).unwrap();
        assert_eq!(again.file(), inst.file());
        assert_eq!(again.hash(), inst.hash());
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Instance::parse("{\n  \"schema\": \"wolff-trace/1\",\n  \"n\": x }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let bad_schema = EXAMPLE.replace("wolff-trace/1", "wolff-trace/9");
        assert!(matches!(Instance::parse(&bad_schema), Err(Error::Schema(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = InstanceSpec { seed: 1, ..InstanceSpec::default() };
        let a = generate(&spec).unwrap().to_pretty_json();
        let b = generate(&spec).unwrap().to_pretty_json();
        assert_eq!(a, b);
        let c = generate(&InstanceSpec { seed: 2, ..spec.clone() }).unwrap().to_pretty_json();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_measures_and_single_cube() {
        let spec = InstanceSpec {
            sigma_atoms: 0,
            mu_atoms: 0,
            kernel: KernelClass::SingleCube { value: 2.0 },
            roots_per_axis: 3,
            max_dlbo: 1.0,
            ..InstanceSpec::default()
        };
        let inst = generate(&spec).unwrap();
        assert!(inst.sigma().is_empty() && inst.mu().is_empty());
        for seed in 0..20 {
            let spec = InstanceSpec { seed, sigma_atoms: 5, ..spec.clone() };
            assert_eq!(generate(&spec).unwrap().model().unwrap().dlbo_constant(), 1.0);
        }
    }

    #[test]
    fn unreachable_target() {
        let spec = InstanceSpec {
            kernel: KernelClass::Power { gamma_min: -3.0, gamma_max: -3.0, jitter: 1.0 },
            sigma_atoms: 6,
            max_dlbo: 1.0,
            max_attempts: 3,
            ..InstanceSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::TargetAUnreachable { attempts: 3, .. })));
    }
}
