// SPDX-License-Identifier: Apache-2.0

//! Dyadic potentials over a lattice window: averaged kernels `K̄(Q)(x)`, the
//! DLBO constant, the operator `T`, both forms of the dyadic Wolff potential,
//! energies, the Carleson constant of the diagonal case and the deflated
//! measure `mu_1`.
//!
//! Every quantity here is an exact finite sum. Per-cube data is computed in
//! one sweep over the window (bottom-up for subtree quantities) and per-point
//! data by walking the ancestor chain of the point's finest cell.

use log::warn;
use serde::Serialize;

use crate::continuum::RadialKernel;
use crate::error::{Error, Result};
use crate::lattice::{check_dim, pow2, AtomicMeasure, DyadicCube, LatticeWindow, MeasureTree, NodeId};

/// Exponent pair `1 < p`, `0 < q < p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Exponents {
    p: f64,
    q: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidExponents(format!("p must be finite and > 1, got {p}")));
        }
        if !(q > 0.0 && q < p) {
            return Err(Error::InvalidExponents(format!("q must satisfy 0 < q < p, got q = {q}, p = {p}")));
        }
        Ok(Exponents { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    /// Conjugate exponent `p / (p - 1)`.
    pub fn p_prime(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
    /// Integrability exponent of the Wolff potential, `q (p - 1) / (p - q)`.
    pub fn s(&self) -> f64 {
        self.q * (self.p - 1.0) / (self.p - self.q)
    }
}

/// `base^e` for `base >= 0`, `e > 0`, with `0^e = 0` and exact small
/// integer exponents.
#[inline]
pub(crate) fn pow_pos(base: f64, e: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else if e == 1.0 {
        base
    } else if e == 2.0 {
        base * base
    } else {
        base.powf(e)
    }
}

/// `K: D -> [0, inf)` supported on a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicKernel {
    window: LatticeWindow,
    values: Vec<f64>,
    radial_origin: Option<RadialKernel>,
}

impl DyadicKernel {
    /// Dense values indexed by window node id.
    pub fn from_values(window: LatticeWindow, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.cube_count() {
            return Err(Error::InvalidKernel(format!(
                "{} values for a window of {} cubes",
                values.len(),
                window.cube_count()
            )));
        }
        if let Some((id, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidKernel(format!("K = {v} at cube {:?}", window.cube(id))));
        }
        Ok(DyadicKernel { window, values, radial_origin: None })
    }

    /// Sparse `(level, index, value)` entries on the window's lattice; all
    /// other window cubes get `K = 0`.
    pub fn from_table(window: LatticeWindow, entries: &[(i32, Vec<i64>, f64)]) -> Result<Self> {
        let mut values = vec![0.0; window.cube_count()];
        for (level, index, value) in entries {
            if index.len() != window.dim() {
                return Err(Error::DimensionMismatch { expected: window.dim(), found: index.len() });
            }
            let cube = DyadicCube::new(*level, index.clone(), window.shift().to_vec());
            let id = window.node_id(&cube).ok_or_else(|| Error::CubeOutsideWindow {
                level: *level,
                index: index.clone(),
            })?;
            values[id] = *value;
        }
        DyadicKernel::from_values(window, values)
    }

    /// `K(Q) = k(r_Q)`.
    pub fn from_radial(window: LatticeWindow, profile: &RadialKernel) -> Result<Self> {
        let values = (0..window.cube_count())
            .map(|id| profile.eval(pow2(window.node_level(id))))
            .collect();
        let mut kernel = DyadicKernel::from_values(window, values)?;
        kernel.radial_origin = Some(profile.clone());
        Ok(kernel)
    }

    /// Kernel equal to `value` on one cube and zero elsewhere.
    pub fn single_cube(window: LatticeWindow, cube: &DyadicCube, value: f64) -> Result<Self> {
        let id = window.node_id(cube).ok_or_else(|| Error::CubeOutsideWindow {
            level: cube.level,
            index: cube.index.clone(),
        })?;
        let mut values = vec![0.0; window.cube_count()];
        values[id] = value;
        DyadicKernel::from_values(window, values)
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn node_value(&self, id: NodeId) -> f64 {
        self.values[id]
    }
    pub fn radial_origin(&self) -> Option<&RadialKernel> {
        self.radial_origin.as_ref()
    }

    /// `K(Q)`, zero for cubes outside the window.
    pub fn value(&self, cube: &DyadicCube) -> f64 {
        self.window.node_id(cube).map_or(0.0, |id| self.values[id])
    }

    pub fn scaled(&self, c: f64) -> Self {
        DyadicKernel {
            window: self.window.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            radial_origin: self.radial_origin.as_ref().map(|k| k.scaled(c)),
        }
    }

    /// Nonzero entries as `(level, index, value)`, in node order.
    pub fn entries(&self) -> Vec<(i32, Vec<i64>, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(id, v)| {
                let c = self.window.cube(id);
                (c.level, c.index, *v)
            })
            .collect()
    }
}

/// Values attached to window cubes; evaluating at `x` sums them along the
/// chain of cubes containing `x`.
#[derive(Clone, Debug)]
pub struct NodeField {
    values: Vec<f64>,
}

impl NodeField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum over the chain above `leaf`, accumulated fine to coarse.
    pub fn chain_sum(&self, window: &LatticeWindow, leaf: NodeId) -> f64 {
        window.ancestors_of(leaf).map(|id| self.values[id]).sum()
    }

    pub fn eval(&self, window: &LatticeWindow, x: &[f64]) -> Result<f64> {
        let leaf = window.leaf_id(x).ok_or_else(|| Error::OutOfWindow { point: x.to_vec() })?;
        Ok(self.chain_sum(window, leaf))
    }
}

/// Diagonal-case Carleson constant with the cube where it is attained.
#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    pub bound: f64,
    pub argmax: Option<DyadicCube>,
    pub status: CarlesonStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlesonStatus {
    Finite,
    /// No cube carries `mu` mass: the condition is `0 <= B * 0`, `B = 0`.
    Vacuous,
    /// Some cube has `mu(P) = 0` but a positive Carleson sum.
    Infeasible,
}

/// The deflated measure `d mu_1 = d mu / W[mu]^(p-1)`.
#[derive(Clone, Debug)]
pub struct Mu1 {
    pub measure: AtomicMeasure,
    /// Indices into the original `mu` of the atoms kept in `measure`.
    pub kept: Vec<usize>,
    /// Positive atoms where `W[mu]` vanishes.
    pub dropped: Vec<usize>,
    /// `W[mu]` at every atom of the original `mu`.
    pub wolff: Vec<f64>,
}

impl Mu1 {
    pub fn is_degenerate(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// A kernel paired with its reference measure `sigma`, with every
/// sigma-dependent per-cube quantity precomputed.
#[derive(Clone, Debug)]
pub struct DyadicModel {
    kernel: DyadicKernel,
    sigma: AtomicMeasure,
    sigma_tree: MeasureTree,
    /// `K(Q) sigma(Q)`.
    weighted: Vec<f64>,
    kbar_inf: Vec<f64>,
    kbar_sup: Vec<f64>,
    dlbo: f64,
}

impl DyadicModel {
    pub fn new(kernel: DyadicKernel, sigma: AtomicMeasure) -> Result<Self> {
        let tree = MeasureTree::build(kernel.window(), &sigma)?;
        DyadicModel::with_tree(kernel, sigma, tree)
    }

    /// Model over a precomputed sigma tree (built by either aggregation path).
    pub fn with_tree(kernel: DyadicKernel, sigma: AtomicMeasure, sigma_tree: MeasureTree) -> Result<Self> {
        let window = kernel.window();
        check_dim(window, &sigma)?;
        let n = window.cube_count();
        if sigma_tree.masses().len() != n {
            return Err(Error::InvalidArgument("sigma tree does not match the window".into()));
        }
        let weighted: Vec<f64> = (0..n).map(|id| kernel.node_value(id) * sigma_tree.mass(id)).collect();

        // Since K vanishes below the finest level, K̄(Q)(.) is constant on
        // finest cells; its extremes over Q are extremes of chain sums of
        // K sigma from Q down to a finest cell.
        let mut below_max = vec![f64::NEG_INFINITY; n];
        let mut below_min = vec![f64::INFINITY; n];
        let mut sum_max = vec![0.0; n];
        let mut sum_min = vec![0.0; n];
        for id in (0..n).rev() {
            let (hi, lo) = if window.is_finest(id) {
                (weighted[id], weighted[id])
            } else {
                (weighted[id] + below_max[id], weighted[id] + below_min[id])
            };
            sum_max[id] = hi;
            sum_min[id] = lo;
            if let Some(p) = window.parent(id) {
                below_max[p] = below_max[p].max(hi);
                below_min[p] = below_min[p].min(lo);
            }
        }

        let mut kbar_inf = vec![0.0; n];
        let mut kbar_sup = vec![0.0; n];
        let mut dlbo = 1.0f64;
        for id in 0..n {
            let s = sigma_tree.mass(id);
            if s > 0.0 {
                kbar_inf[id] = sum_min[id] / s;
                kbar_sup[id] = sum_max[id] / s;
                let ratio = if sum_min[id] > 0.0 {
                    sum_max[id] / sum_min[id]
                } else if sum_max[id] > 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                };
                dlbo = dlbo.max(ratio);
            }
        }

        Ok(DyadicModel { kernel, sigma, sigma_tree, weighted, kbar_inf, kbar_sup, dlbo })
    }

    pub fn kernel(&self) -> &DyadicKernel {
        &self.kernel
    }
    pub fn window(&self) -> &LatticeWindow {
        self.kernel.window()
    }
    pub fn sigma(&self) -> &AtomicMeasure {
        &self.sigma
    }
    pub fn sigma_tree(&self) -> &MeasureTree {
        &self.sigma_tree
    }

    /// Smallest `A` with `sup_Q K̄(Q)(.) <= A inf_Q K̄(Q)(.)` over window
    /// cubes of positive sigma mass; `+inf` if some such cube has a zero
    /// infimum and a positive supremum.
    pub fn dlbo_constant(&self) -> f64 {
        self.dlbo
    }

    /// `K̄(Q) = inf_{x in Q} K̄(Q)(x)` by node id (0 when `sigma(Q) = 0`).
    pub fn kbar_inf_values(&self) -> &[f64] {
        &self.kbar_inf
    }
    pub fn kbar_sup_values(&self) -> &[f64] {
        &self.kbar_sup
    }

    pub fn kbar_inf(&self, cube: &DyadicCube) -> Result<f64> {
        Ok(self.kbar_inf[self.node_of(cube)?])
    }

    fn node_of(&self, cube: &DyadicCube) -> Result<NodeId> {
        self.window().node_id(cube).ok_or_else(|| Error::CubeOutsideWindow {
            level: cube.level,
            index: cube.index.clone(),
        })
    }

    fn check_measure(&self, m: &AtomicMeasure) -> Result<()> {
        check_dim(self.window(), m)
    }

    /// `K̄(Q)(x) = sigma(Q)^-1 sum_{Q' ⊆ Q, x in Q'} K(Q') sigma(Q')`,
    /// zero when `sigma(Q) = 0`.
    pub fn kbar_at(&self, cube: &DyadicCube, x: &[f64]) -> Result<f64> {
        let q = self.node_of(cube)?;
        if !cube.contains(x) {
            return Err(Error::NotInCube { point: x.to_vec() });
        }
        let s = self.sigma_tree.mass(q);
        if s == 0.0 {
            return Ok(0.0);
        }
        let window = self.window();
        let leaf = window.leaf_id(x).ok_or_else(|| Error::OutOfWindow { point: x.to_vec() })?;
        let mut acc = 0.0;
        for id in window.ancestors_of(leaf) {
            acc += self.weighted[id];
            if id == q {
                break;
            }
        }
        Ok(acc / s)
    }

    /// Field of `K(Q) * int_Q f dm`; `f = None` means `f = 1`.
    pub fn operator_field(&self, measure: &AtomicMeasure, f: Option<&[f64]>) -> Result<NodeField> {
        self.check_measure(measure)?;
        let tree = match f {
            Some(f) => {
                if let Some(v) = f.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("density value {v}")));
                }
                MeasureTree::build_weighted(self.window(), measure, f)?
            }
            None => MeasureTree::build(self.window(), measure)?,
        };
        Ok(self.operator_field_from_tree(&tree))
    }

    pub(crate) fn operator_field_from_tree(&self, tree: &MeasureTree) -> NodeField {
        NodeField {
            values: self
                .kernel
                .values()
                .iter()
                .zip(tree.masses())
                .map(|(k, m)| k * m)
                .collect(),
        }
    }

    /// `T[f dsigma](x) = sum_{Q ∋ x} K(Q) int_Q f dsigma`.
    pub fn apply_t(&self, f: &[f64], x: &[f64]) -> Result<f64> {
        self.operator_field(&self.sigma, Some(f))?.eval(self.window(), x)
    }

    /// Field of the general Wolff potential terms
    /// `K(Q) [int_Q K̄(Q)(y) dnu(y)]^(p'-1) sigma(Q)`.
    pub fn wolff_general_field(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<NodeField> {
        self.check_measure(nu)?;
        let window = self.window();
        let mut inner = vec![0.0; window.cube_count()];
        for a in nu.atoms() {
            let Some(leaf) = window.leaf_id(&a.x) else { continue };
            let mut acc = 0.0;
            for id in window.ancestors_of(leaf) {
                acc += self.weighted[id];
                let s = self.sigma_tree.mass(id);
                if s > 0.0 {
                    inner[id] += a.w * (acc / s);
                }
            }
        }
        let e = exps.p_prime() - 1.0;
        let values = (0..window.cube_count())
            .map(|id| self.kernel.node_value(id) * pow_pos(inner[id], e) * self.sigma_tree.mass(id))
            .collect();
        Ok(NodeField { values })
    }

    /// Field of the DLBO-form terms `K(Q) K̄(Q)^(p'-1) nu(Q)^(p'-1) sigma(Q)`.
    pub fn wolff_dlbo_field(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<NodeField> {
        self.check_measure(nu)?;
        let tree = MeasureTree::build(self.window(), nu)?;
        Ok(self.wolff_dlbo_field_from_tree(&tree, exps))
    }

    pub(crate) fn wolff_dlbo_field_from_tree(&self, nu_tree: &MeasureTree, exps: &Exponents) -> NodeField {
        let e = exps.p_prime() - 1.0;
        let values = (0..self.window().cube_count())
            .map(|id| {
                self.kernel.node_value(id)
                    * pow_pos(self.kbar_inf[id], e)
                    * pow_pos(nu_tree.mass(id), e)
                    * self.sigma_tree.mass(id)
            })
            .collect();
        NodeField { values }
    }

    pub fn wolff_general(&self, nu: &AtomicMeasure, exps: &Exponents, x: &[f64]) -> Result<f64> {
        self.wolff_general_field(nu, exps)?.eval(self.window(), x)
    }

    pub fn wolff_dlbo(&self, nu: &AtomicMeasure, exps: &Exponents, x: &[f64]) -> Result<f64> {
        self.wolff_dlbo_field(nu, exps)?.eval(self.window(), x)
    }

    /// DLBO-form potential at each atom of `nu` (0 for atoms off the window).
    pub fn wolff_at_atoms(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<Vec<f64>> {
        let tree = MeasureTree::build(self.window(), nu)?;
        let field = self.wolff_dlbo_field_from_tree(&tree, exps);
        Ok(tree
            .leaves()
            .iter()
            .map(|leaf| leaf.map_or(0.0, |l| field.chain_sum(self.window(), l)))
            .collect())
    }

    /// `int (T[nu])^p' dsigma`.
    pub fn energy(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<f64> {
        let field = self.operator_field(nu, None)?;
        let pp = exps.p_prime();
        let mut total = 0.0;
        for (a, leaf) in self.sigma.atoms().iter().zip(self.sigma_tree.leaves()) {
            if let Some(leaf) = leaf {
                total += a.w * pow_pos(field.chain_sum(self.window(), *leaf), pp);
            }
        }
        Ok(total)
    }

    /// `int W[nu] dnu = sum_Q K(Q) sigma(Q) K̄(Q)^(p'-1) nu(Q)^p'`.
    pub fn wolff_energy(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<f64> {
        self.check_measure(nu)?;
        let tree = MeasureTree::build(self.window(), nu)?;
        let (e, pp) = (exps.p_prime() - 1.0, exps.p_prime());
        let mut total = 0.0;
        for id in 0..self.window().cube_count() {
            total += self.weighted[id] * pow_pos(self.kbar_inf[id], e) * pow_pos(tree.mass(id), pp);
        }
        Ok(total)
    }

    /// `sum_j w_j W[nu](x_j)`, the same quantity as [`Self::wolff_energy`]
    /// summed atom by atom.
    pub fn wolff_energy_by_atoms(&self, nu: &AtomicMeasure, exps: &Exponents) -> Result<f64> {
        let w = self.wolff_at_atoms(nu, exps)?;
        Ok(nu.atoms().iter().zip(w).map(|(a, v)| a.w * v).sum())
    }

    /// Least `B` with
    /// `sum_{Q ⊆ P} K(Q) K̄(Q)^(p'-1) mu(Q)^p' sigma(Q) <= B mu(P)`
    /// over window cubes `P`. Ties go to the coarser cube, then the
    /// lexicographically smaller index.
    pub fn carleson_constant(&self, mu: &AtomicMeasure, exps: &Exponents) -> Result<CarlesonReport> {
        self.check_measure(mu)?;
        let window = self.window();
        let n = window.cube_count();
        let tree = MeasureTree::build(window, mu)?;
        let (e, pp) = (exps.p_prime() - 1.0, exps.p_prime());
        let mut sub: Vec<f64> = (0..n)
            .map(|id| self.weighted[id] * pow_pos(self.kbar_inf[id], e) * pow_pos(tree.mass(id), pp))
            .collect();
        for id in (0..n).rev() {
            if let Some(p) = window.parent(id) {
                sub[p] += sub[id];
            }
        }

        let mut best: Option<(f64, NodeId)> = None;
        let mut infeasible: Option<NodeId> = None;
        for id in 0..n {
            let m = tree.mass(id);
            if m > 0.0 {
                let ratio = sub[id] / m;
                let better = match best {
                    None => true,
                    Some((b, bid)) => ratio > b || (ratio == b && tie_break(window, id, bid)),
                };
                if better {
                    best = Some((ratio, id));
                }
            } else if sub[id] > 0.0 && infeasible.is_none() {
                infeasible = Some(id);
            }
        }

        Ok(match (infeasible, best) {
            (Some(id), _) => CarlesonReport {
                bound: f64::INFINITY,
                argmax: Some(window.cube(id)),
                status: CarlesonStatus::Infeasible,
            },
            (None, None) => CarlesonReport { bound: 0.0, argmax: None, status: CarlesonStatus::Vacuous },
            (None, Some((b, id))) => CarlesonReport {
                bound: b,
                argmax: Some(window.cube(id)),
                status: CarlesonStatus::Finite,
            },
        })
    }

    /// `mu_1` with masses `w_j / W[mu](x_j)^(p-1)`. Positive atoms with
    /// `W[mu](x_j) = 0` are dropped: their whole chain carries no Wolff mass.
    pub fn make_mu1(&self, mu: &AtomicMeasure, exps: &Exponents) -> Result<Mu1> {
        let wolff = self.wolff_at_atoms(mu, exps)?;
        let mut kept = Vec::with_capacity(mu.len());
        let mut dropped = Vec::new();
        let mut atoms = Vec::with_capacity(mu.len());
        for (j, (a, &w)) in mu.atoms().iter().zip(&wolff).enumerate() {
            if w > 0.0 {
                atoms.push((a.x.clone(), a.w / pow_pos(w, exps.p() - 1.0)));
                kept.push(j);
            } else if a.w > 0.0 {
                dropped.push(j);
            } else {
                atoms.push((a.x.clone(), 0.0));
                kept.push(j);
            }
        }
        if !dropped.is_empty() {
            warn!("mu_1: dropped {} atom(s) where the Wolff potential vanishes", dropped.len());
        }
        Ok(Mu1 { measure: AtomicMeasure::from_pairs(mu.dim(), atoms)?, kept, dropped, wolff })
    }
}

fn tie_break(window: &LatticeWindow, candidate: NodeId, incumbent: NodeId) -> bool {
    let (lc, li) = (window.node_level(candidate), window.node_level(incumbent));
    if lc != li {
        return lc > li;
    }
    window.cube(candidate).index < window.cube(incumbent).index
}
