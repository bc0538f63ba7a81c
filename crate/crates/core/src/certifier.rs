// SPDX-License-Identifier: Apache-2.0

//! Two-sided certification of the trace inequality
//! `||T[f dsigma]||_{L^q(mu)} <= C ||f||_{L^p(sigma)}` for `q < p`.
//!
//! The upper side is the Wolff-norm certificate `||W[mu]||_{L^s(mu)}^(q/p')`,
//! computed exactly. The lower side is a numerical estimate of the least
//! `C` by multiplicative ascent over nonnegative densities on the atoms of
//! `sigma`, cross-checked by exhaustive angular search when `sigma` has at
//! most three atoms.
//!
//! Homogeneity: under `K -> cK`, `sigma -> t sigma`, `mu -> u mu` the
//! certificate scales like `C^q`, not `C`. Comparisons therefore use
//! [`ConstantEstimate::trace_constant`] `= C^q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{pow_pos, DyadicModel, Exponents};
use crate::error::{Error, Result};
use crate::lattice::{AtomicMeasure, LatticeWindow, MeasureTree, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub s: f64,
    /// `||W[mu]||_{L^s(mu)}`.
    pub wolff_norm: f64,
    /// `wolff_norm^(q/p')`.
    pub value: f64,
    pub finite: bool,
}

/// Certificate from the potential values `wolff[j] = W[mu](x_j)`.
pub fn certificate_from_potentials(mu: &AtomicMeasure, wolff: &[f64], exps: &Exponents) -> Certificate {
    let s = exps.s();
    let sum: f64 = mu.atoms().iter().zip(wolff).map(|(a, w)| a.w * pow_pos(*w, s)).sum();
    let wolff_norm = pow_pos(sum, 1.0 / s);
    let value = pow_pos(wolff_norm, exps.q() / exps.p_prime());
    Certificate { s, wolff_norm, value, finite: wolff_norm.is_finite() }
}

/// Dyadic certificate with `W` the DLBO-form Wolff potential.
pub fn certificate(model: &DyadicModel, mu: &AtomicMeasure, exps: &Exponents) -> Result<Certificate> {
    let w = model.wolff_at_atoms(mu, exps)?;
    Ok(certificate_from_potentials(mu, &w, exps))
}

/// The finite-dimensional trace problem: maximize
/// `R(f) = (sum_i mu_i (G S f)_i^q)^(1/q) / (sum_j sigma_j f_j^p)^(1/p)`
/// over `f >= 0` on the sigma atoms, where `G_ij = sum K(Q)` over cubes
/// containing both mu atom `i` and sigma atom `j`, and `S = diag(sigma)`.
#[derive(Clone, Debug)]
pub struct TraceProblem {
    gram: Vec<f64>,
    sigma: Vec<f64>,
    mu: Vec<f64>,
    exps: Exponents,
}

impl TraceProblem {
    pub fn new(model: &DyadicModel, mu: &AtomicMeasure, exps: &Exponents) -> Result<Self> {
        let window = model.window();
        let mu_tree = MeasureTree::build(window, mu)?;
        let sig_leaves = model.sigma_tree().leaves();

        // prefix[id] = sum of K over id and its ancestors
        let mut prefix = vec![0.0; window.cube_count()];
        for id in 0..window.cube_count() {
            prefix[id] = model.kernel().node_value(id) + window.parent(id).map_or(0.0, |p| prefix[p]);
        }

        let mut gram = vec![0.0; mu.len() * sig_leaves.len()];
        for (i, li) in mu_tree.leaves().iter().enumerate() {
            let Some(li) = *li else { continue };
            for (j, lj) in sig_leaves.iter().enumerate() {
                if let Some(lj) = *lj {
                    if let Some(c) = common_ancestor(window, li, lj) {
                        gram[i * sig_leaves.len() + j] = prefix[c];
                    }
                }
            }
        }
        TraceProblem::from_parts(
            gram,
            model.sigma().atoms().iter().map(|a| a.w).collect(),
            mu.atoms().iter().map(|a| a.w).collect(),
            *exps,
        )
    }

    /// Problem from an explicit row-major `mu.len() x sigma.len()` matrix.
    pub fn from_parts(gram: Vec<f64>, sigma: Vec<f64>, mu: Vec<f64>, exps: Exponents) -> Result<Self> {
        if gram.len() != sigma.len() * mu.len() {
            return Err(Error::InvalidArgument("kernel matrix shape does not match the measures".into()));
        }
        if gram.iter().chain(&sigma).chain(&mu).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("trace problem entries must be finite and nonnegative".into()));
        }
        Ok(TraceProblem { gram, sigma, mu, exps })
    }

    pub fn exponents(&self) -> &Exponents {
        &self.exps
    }
    pub fn sigma_masses(&self) -> &[f64] {
        &self.sigma
    }
    pub fn mu_masses(&self) -> &[f64] {
        &self.mu
    }
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.sigma.len() + j]
    }

    /// `(T[f dsigma])(x_i)` at every mu atom.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = self.sigma.len();
        (0..self.mu.len())
            .map(|i| {
                let row = &self.gram[i * m..(i + 1) * m];
                row.iter().zip(&self.sigma).zip(f).map(|((g, s), f)| g * s * f).sum()
            })
            .collect()
    }

    /// `||f||_{L^p(sigma)}` for `f >= 0`.
    pub fn norm_p(&self, f: &[f64]) -> f64 {
        let p = self.exps.p();
        pow_pos(self.sigma.iter().zip(f).map(|(s, f)| s * pow_pos(f.abs(), p)).sum(), 1.0 / p)
    }

    /// `||T[f dsigma]||_{L^q(mu)}`; signed `f` allowed.
    pub fn norm_q(&self, f: &[f64]) -> f64 {
        let q = self.exps.q();
        let tf = self.apply(f);
        pow_pos(self.mu.iter().zip(&tf).map(|(m, t)| m * pow_pos(t.abs(), q)).sum(), 1.0 / q)
    }

    /// `R(f)`; zero when `||f||_p = 0`.
    pub fn ratio(&self, f: &[f64]) -> f64 {
        let d = self.norm_p(f);
        if d == 0.0 {
            0.0
        } else {
            self.norm_q(f) / d
        }
    }

    fn positive_atoms(&self) -> Vec<usize> {
        (0..self.sigma.len()).filter(|&j| self.sigma[j] > 0.0).collect()
    }

    /// The same problem with `f` forced to vanish off `keep`.
    pub fn restricted(&self, keep: &[usize]) -> TraceProblem {
        let mut sigma = vec![0.0; self.sigma.len()];
        for &j in keep {
            sigma[j] = self.sigma[j];
        }
        TraceProblem { gram: self.gram.clone(), sigma, mu: self.mu.clone(), exps: self.exps }
    }

    fn normalize(&self, f: &mut [f64]) {
        let n = self.norm_p(f);
        if n > 0.0 {
            f.iter_mut().for_each(|v| *v /= n);
        }
    }

    /// One multiplicative step: `f_j <- [sum_i G_ij mu_i (Mf)_i^(q-1)]^(1/(p-1))`,
    /// the fixed-point form of the stationarity condition on the unit sphere.
    fn ascent_step(&self, f: &[f64]) -> Vec<f64> {
        let (p, q) = (self.exps.p(), self.exps.q());
        let tf = self.apply(f);
        let weights: Vec<f64> = self
            .mu
            .iter()
            .zip(&tf)
            .map(|(m, t)| if *t > 0.0 { m * t.powf(q - 1.0) } else { 0.0 })
            .collect();
        let m = self.sigma.len();
        let mut next: Vec<f64> = (0..m)
            .map(|j| {
                if self.sigma[j] == 0.0 {
                    return 0.0;
                }
                let g: f64 = (0..self.mu.len()).map(|i| self.gram[i * m + j] * weights[i]).sum();
                pow_pos(g, 1.0 / (p - 1.0))
            })
            .collect();
        self.normalize(&mut next);
        next
    }

    fn ascend(&self, mut f: Vec<f64>, config: &AscentConfig) -> (f64, Vec<f64>, usize) {
        self.normalize(&mut f);
        let mut r = self.ratio(&f);
        let mut iterations = 0;
        while iterations < config.max_iterations {
            iterations += 1;
            let proposal = self.ascent_step(&f);
            let mut rp = self.ratio(&proposal);
            let mut accepted = proposal;
            // damped geometric blend when the full step overshoots
            let mut theta = 0.5;
            while rp < r && theta > 1e-6 {
                let mut blend: Vec<f64> = f
                    .iter()
                    .zip(&accepted)
                    .map(|(a, b)| if *a > 0.0 && *b > 0.0 { a.powf(1.0 - theta) * b.powf(theta) } else { 0.0 })
                    .collect();
                self.normalize(&mut blend);
                rp = self.ratio(&blend);
                accepted = blend;
                theta *= 0.5;
            }
            if rp < r {
                break;
            }
            let gain = (rp - r) / r.max(f64::MIN_POSITIVE);
            f = accepted;
            r = rp;
            if gain < config.tolerance {
                break;
            }
        }
        (r, f, iterations)
    }

    /// Best `R` over `restarts` seeded ascents. Restart 0 starts from the
    /// constant density; the rest from random positive densities.
    pub fn best_constant(&self, config: &AscentConfig) -> Result<ConstantEstimate> {
        let support = self.positive_atoms();
        if support.is_empty() {
            return Err(Error::NoMass);
        }
        let m = self.sigma.len();
        let restarts = config.restarts.max(1);
        let mut runs: Vec<(f64, Vec<f64>, usize)> = (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut f = vec![0.0; m];
                if r == 0 {
                    support.iter().for_each(|&j| f[j] = 1.0);
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(r as u64);
                    support.iter().for_each(|&j| f[j] = rng.random_range(0.01..1.0));
                }
                self.ascend(f, config)
            })
            .collect();

        let mut best = 0;
        for (k, run) in runs.iter().enumerate() {
            if run.0 > runs[best].0 {
                best = k;
            }
        }
        let iterations = runs.iter().map(|r| r.2).sum();
        let (_, witness_f, _) = runs.swap_remove(best);
        let value = self.ratio(&witness_f);
        Ok(ConstantEstimate {
            value,
            trace_constant: pow_pos(value, self.exps.q()),
            witness_f,
            method: if restarts > 1 { EstimateMethod::Restarts } else { EstimateMethod::MultiplicativeAscent },
            iterations,
            tolerance: config.tolerance,
            seed: Some(config.seed),
        })
    }

    /// Exhaustive search over the nonnegative sector of the unit sphere of
    /// `L^p(sigma)`, for at most three atoms of positive mass.
    /// `f_j = (u_j / sigma_j)^(1/p)` with `u` on the simplex, parametrized
    /// by squared sines and cosines of at most two angles; `grid_resolution`
    /// is the total number of grid points.
    pub fn oracle(&self, grid_resolution: usize) -> Result<ConstantEstimate> {
        let support = self.positive_atoms();
        let p = self.exps.p();
        let build = |u: &[f64]| {
            let mut f = vec![0.0; self.sigma.len()];
            for (&j, &uj) in support.iter().zip(u) {
                f[j] = pow_pos(uj / self.sigma[j], 1.0 / p);
            }
            f
        };
        let half_pi = std::f64::consts::FRAC_PI_2;
        let angle = |k: usize, n: usize| half_pi * k as f64 / (n - 1).max(1) as f64;

        let candidates: Vec<(f64, Vec<f64>)> = match support.len() {
            0 => return Err(Error::NoMass),
            1 => {
                let f = build(&[1.0]);
                vec![(self.ratio(&f), f)]
            }
            2 => {
                let n = grid_resolution.max(2);
                (0..n)
                    .into_par_iter()
                    .map(|k| {
                        let (s, c) = angle(k, n).sin_cos();
                        let f = build(&[c * c, s * s]);
                        (self.ratio(&f), f)
                    })
                    .collect()
            }
            3 => {
                let n = ((grid_resolution as f64).sqrt().ceil() as usize).max(2);
                (0..n * n)
                    .into_par_iter()
                    .map(|k| {
                        let (st, ct) = angle(k / n, n).sin_cos();
                        let (sp, cp) = angle(k % n, n).sin_cos();
                        let f = build(&[ct * ct, st * st * cp * cp, st * st * sp * sp]);
                        (self.ratio(&f), f)
                    })
                    .collect()
            }
            k => return Err(Error::TooManyAtoms(k)),
        };
        let mut best = 0;
        for (k, c) in candidates.iter().enumerate() {
            if c.0 > candidates[best].0 {
                best = k;
            }
        }
        let (value, witness_f) = candidates[best].clone();
        Ok(ConstantEstimate {
            value,
            trace_constant: pow_pos(value, self.exps.q()),
            witness_f,
            method: EstimateMethod::Grid,
            iterations: candidates.len(),
            tolerance: 0.0,
            seed: None,
        })
    }
}

fn common_ancestor(window: &LatticeWindow, mut a: NodeId, mut b: NodeId) -> Option<NodeId> {
    while window.node_depth(a) > window.node_depth(b) {
        a = window.parent(a)?;
    }
    while window.node_depth(b) > window.node_depth(a) {
        b = window.parent(b)?;
    }
    while a != b {
        a = window.parent(a)?;
        b = window.parent(b)?;
    }
    Some(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Grid,
    MultiplicativeAscent,
    Restarts,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AscentConfig {
    pub restarts: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig { restarts: 32, tolerance: 1e-9, max_iterations: 10_000, seed: 0 }
    }
}

/// Estimated least constant `C`, with the density that attains it.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantEstimate {
    /// `R(witness_f)`, a lower bound on the least constant.
    pub value: f64,
    /// `value^q`, the quantity with the certificate's homogeneity.
    pub trace_constant: f64,
    /// Nonnegative, unit `L^p(sigma)` norm.
    pub witness_f: Vec<f64>,
    pub method: EstimateMethod,
    pub iterations: usize,
    pub tolerance: f64,
    pub seed: Option<u64>,
}

pub fn best_constant(
    model: &DyadicModel,
    mu: &AtomicMeasure,
    exps: &Exponents,
    config: &AscentConfig,
) -> Result<ConstantEstimate> {
    TraceProblem::new(model, mu, exps)?.best_constant(config)
}

pub fn best_constant_oracle(
    model: &DyadicModel,
    mu: &AtomicMeasure,
    exps: &Exponents,
    grid_resolution: usize,
) -> Result<ConstantEstimate> {
    TraceProblem::new(model, mu, exps)?.oracle(grid_resolution)
}

/// Result of checking `T[f dsigma] >= sum K(Q) lambda_Q sigma(Q) chi_Q` for
/// `f = sup lambda_Q chi_Q` and `T[g dsigma] >= sum lambda_Q sigma(Q) K̄(Q) chi_Q`
/// for `g = sum lambda_Q chi_Q`.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub probes: usize,
    /// `min (lhs - rhs)` over probes, first estimate.
    pub sup_margin: f64,
    /// `min (lhs - rhs)` over probes, second estimate.
    pub sum_margin: f64,
    /// Worst `(lhs - rhs) / max(1, rhs)` over both estimates.
    pub worst_relative: f64,
    pub pass: bool,
}

pub const WITNESS_SLACK: f64 = 1e-12;

/// Evaluates both witness estimates at every finest-cell center and every
/// sigma atom in the window. `lambda` is indexed by window node id.
pub fn witness_bounds(model: &DyadicModel, lambda: &[f64]) -> Result<WitnessReport> {
    let window = model.window();
    let n = window.cube_count();
    if lambda.len() != n {
        return Err(Error::InvalidArgument(format!("lambda has {} values for {n} cubes", lambda.len())));
    }
    if lambda.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("lambda must be finite and nonnegative".into()));
    }
    let sigma = model.sigma();
    let tree = model.sigma_tree();
    let mut f = vec![0.0; sigma.len()];
    let mut g = vec![0.0; sigma.len()];
    for (j, leaf) in tree.leaves().iter().enumerate() {
        if let Some(leaf) = leaf {
            for id in window.ancestors_of(*leaf) {
                f[j] = f64::max(f[j], lambda[id]);
                g[j] += lambda[id];
            }
        }
    }
    let tf = model.operator_field(sigma, Some(&f))?;
    let tg = model.operator_field(sigma, Some(&g))?;
    let kbar = model.kbar_inf_values();
    let rhs_f: Vec<f64> = (0..n).map(|id| model.kernel().node_value(id) * lambda[id] * tree.mass(id)).collect();
    let rhs_g: Vec<f64> = (0..n).map(|id| lambda[id] * tree.mass(id) * kbar[id]).collect();

    let mut report = WitnessReport {
        probes: 0,
        sup_margin: f64::INFINITY,
        sum_margin: f64::INFINITY,
        worst_relative: f64::INFINITY,
        pass: true,
    };
    let mut probe = |leaf: NodeId| {
        let mut sums = [0.0; 4];
        for id in window.ancestors_of(leaf) {
            sums[0] += tf.values()[id];
            sums[1] += rhs_f[id];
            sums[2] += tg.values()[id];
            sums[3] += rhs_g[id];
        }
        let (m1, m2) = (sums[0] - sums[1], sums[2] - sums[3]);
        report.probes += 1;
        report.sup_margin = report.sup_margin.min(m1);
        report.sum_margin = report.sum_margin.min(m2);
        let rel = (m1 / sums[1].max(1.0)).min(m2 / sums[3].max(1.0));
        report.worst_relative = report.worst_relative.min(rel);
    };
    for leaf in window.finest_ids() {
        probe(leaf);
    }
    for leaf in tree.leaves().iter().flatten() {
        probe(*leaf);
    }
    if report.probes == 0 {
        report.sup_margin = 0.0;
        report.sum_margin = 0.0;
        report.worst_relative = 0.0;
    }
    report.pass = report.worst_relative >= -WITNESS_SLACK;
    Ok(report)
}

/// One family member: estimated `C^q` against the certificate.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceRow {
    pub index: usize,
    pub trace_constant: f64,
    pub certificate: f64,
    /// `trace_constant / certificate`; `None` when both vanish.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
    pub declared_window: Option<f64>,
    pub pass: bool,
}

/// Summarizes `(C^q, certificate)` pairs. Passes when every ratio is finite
/// and positive and, if given, the spread stays within `declared_window`.
pub fn equivalence_report(pairs: &[(f64, f64)], declared_window: Option<f64>) -> EquivalenceReport {
    let rows: Vec<EquivalenceRow> = pairs
        .iter()
        .enumerate()
        .map(|(index, &(c, cert))| EquivalenceRow {
            index,
            trace_constant: c,
            certificate: cert,
            ratio: if c == 0.0 && cert == 0.0 { None } else { Some(c / cert) },
        })
        .collect();
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let (min_ratio, max_ratio, median_ratio) = if ratios.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (ratios[0], ratios[ratios.len() - 1], median(&ratios))
    };
    let spread = max_ratio / min_ratio;
    let sane = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
    let pass = sane && declared_window.is_none_or(|w| ratios.is_empty() || spread <= w);
    EquivalenceReport { rows, min_ratio, max_ratio, median_ratio, spread, declared_window, pass }
}

/// Median of sorted values.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
