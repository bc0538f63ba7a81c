// SPDX-License-Identifier: Apache-2.0

//! Naive versus tree-aggregated evaluation of `T[f dsigma]` over a size grid.
//!
//! The naive path scans every atom for every window cube; the tree path
//! pushes each atom up its chain once. Both then evaluate the same chain sums
//! at every sigma atom, so the discrepancy column measures only the
//! aggregation step.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dyadic::DyadicKernel;
use crate::error::Result;
use crate::lattice::{pow2, AtomicMeasure, LatticeWindow, MeasureTree};

/// One benchmark workload: a unit-interval window of the given depth with a
/// Power kernel, `atoms` random sigma atoms and a random density.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub kernel: DyadicKernel,
    pub sigma: AtomicMeasure,
    pub f: Vec<f64>,
}

impl Fixture {
    pub fn new(dim: usize, depth: usize, atoms: usize, seed: u64) -> Result<Self> {
        let level_min = -(depth as i32);
        let window = LatticeWindow::grid(dim, level_min, 0, 1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..window.cube_count())
            .map(|id| pow2(window.node_level(id)).powf(0.5) * rng.random_range(1.0..2.0))
            .collect();
        let kernel = DyadicKernel::from_values(window, values)?;
        let sigma = AtomicMeasure::from_pairs(
            dim,
            (0..atoms).map(|_| ((0..dim).map(|_| rng.random::<f64>()).collect(), rng.random_range(0.1..1.0))),
        )?;
        let f = (0..atoms).map(|_| rng.random::<f64>()).collect();
        Ok(Fixture { kernel, sigma, f })
    }
}

/// Cube-by-cube scan of `sum f_j w_j` over atoms in the cube, in atom order.
pub fn naive_masses(window: &LatticeWindow, sigma: &AtomicMeasure, f: &[f64]) -> Vec<f64> {
    (0..window.cube_count())
        .map(|id| {
            let cube = window.cube(id);
            sigma
                .atoms()
                .iter()
                .zip(f)
                .filter(|(a, _)| cube.contains(&a.x))
                .map(|(a, fj)| fj * a.w)
                .sum()
        })
        .collect()
}

pub fn tree_masses(window: &LatticeWindow, sigma: &AtomicMeasure, f: &[f64]) -> Vec<f64> {
    MeasureTree::build_weighted(window, sigma, f).expect("fixture dimensions agree").masses().to_vec()
}

/// `T[f dsigma]` at every sigma atom from per-cube masses.
pub fn sweep(kernel: &DyadicKernel, sigma: &AtomicMeasure, masses: &[f64]) -> Vec<f64> {
    let window = kernel.window();
    sigma
        .atoms()
        .iter()
        .map(|a| match window.leaf_id(&a.x) {
            Some(leaf) => window.ancestors_of(leaf).map(|id| kernel.node_value(id) * masses[id]).sum(),
            None => 0.0,
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub depth: usize,
    pub atoms: usize,
    pub cubes: usize,
    pub naive_ms: f64,
    pub tree_ms: f64,
    pub speedup: f64,
    pub max_rel_discrepancy: f64,
}

pub const BENCH_CSV_HEADER: &str = "depth,atoms,cubes,naive_ms,tree_ms,speedup,max_rel_discrepancy";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.3},{:e}",
            self.depth, self.atoms, self.cubes, self.naive_ms, self.tree_ms, self.speedup, self.max_rel_discrepancy
        )
    }
}

/// Mean wall time in ms of `run`, repeated until at least `min_ms` elapse.
fn time_ms<T>(min_ms: f64, mut run: impl FnMut() -> T) -> (f64, T) {
    let mut reps = 0usize;
    let start = Instant::now();
    loop {
        let out = run();
        reps += 1;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        if elapsed >= min_ms || reps >= 1000 {
            return (elapsed / reps as f64, out);
        }
    }
}

pub fn bench_cell(dim: usize, depth: usize, atoms: usize, seed: u64) -> Result<BenchRow> {
    let fx = Fixture::new(dim, depth, atoms, seed)?;
    let window = fx.kernel.window();
    let (naive_ms, naive) = time_ms(20.0, || sweep(&fx.kernel, &fx.sigma, &naive_masses(window, &fx.sigma, &fx.f)));
    let (tree_ms, tree) = time_ms(20.0, || sweep(&fx.kernel, &fx.sigma, &tree_masses(window, &fx.sigma, &fx.f)));
    let max_rel_discrepancy = naive
        .iter()
        .zip(&tree)
        .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
        .fold(0.0, f64::max);
    Ok(BenchRow {
        depth,
        atoms,
        cubes: window.cube_count(),
        naive_ms,
        tree_ms,
        speedup: naive_ms / tree_ms,
        max_rel_discrepancy,
    })
}

/// Default size grid: depths 0..=10 in steps of 2, atoms 10^2..10^4.
pub fn default_sizes() -> Vec<(usize, usize)> {
    let mut sizes = Vec::new();
    for depth in [0, 2, 4, 6, 8, 10] {
        for atoms in [100, 1_000, 10_000] {
            sizes.push((depth, atoms));
        }
    }
    sizes
}

pub fn run_bench(dim: usize, sizes: &[(usize, usize)], seed: u64) -> Result<Vec<BenchRow>> {
    sizes.iter().map(|&(d, a)| bench_cell(dim, d, a, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_agree_bitwise() {
        let fx = Fixture::new(2, 3, 200, 5).unwrap();
        let w = fx.kernel.window();
        assert_eq!(naive_masses(w, &fx.sigma, &fx.f), tree_masses(w, &fx.sigma, &fx.f));
    }
}
