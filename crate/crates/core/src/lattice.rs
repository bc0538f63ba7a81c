// SPDX-License-Identifier: Apache-2.0

//! Dyadic geometry: cubes `2^i (k + [0,1)^n) + z`, finite lattice windows,
//! atomic measures, and the aggregation tree that sums atom masses over every
//! window cube in `O(atoms * depth)`.
//!
//! Cube membership is decided by `floor((x - z) * 2^-i)`, with the scaling by
//! a power of two exact in binary floating point. Every routine in the crate
//! goes through [`cell_index`], so a point is assigned to the same cube no
//! matter which path asks.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Index of the dyadic node inside a [`LatticeWindow`].
pub type NodeId = usize;

/// Windows larger than this many cubes are rejected.
pub const MAX_WINDOW_CUBES: usize = 1 << 24;

/// `2^level`, exact for every level a window can hold.
#[inline]
pub fn pow2(level: i32) -> f64 {
    2f64.powi(level)
}

/// Integer index of the level-`level` cell containing the (already shifted)
/// coordinate `offset`.
#[inline]
pub fn cell_index(offset: f64, level: i32) -> i64 {
    (offset * pow2(-level)).floor() as i64
}

/// The half-open box `2^level (index + [0,1)^n) + shift`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
    pub shift: Vec<f64>,
}

impl DyadicCube {
    pub fn new(level: i32, index: Vec<i64>, shift: Vec<f64>) -> Self {
        assert_eq!(index.len(), shift.len(), "index and shift must share a dimension");
        DyadicCube { level, index, shift }
    }

    /// Cube of the standard (unshifted) lattice.
    pub fn standard(level: i32, index: Vec<i64>) -> Self {
        let shift = vec![0.0; index.len()];
        DyadicCube { level, index, shift }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Side length `r_Q = 2^level`.
    pub fn side(&self) -> f64 {
        pow2(self.level)
    }

    pub fn lower_corner(&self) -> Vec<f64> {
        let side = self.side();
        self.index
            .iter()
            .zip(&self.shift)
            .map(|(&k, &z)| k as f64 * side + z)
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let side = self.side();
        self.index
            .iter()
            .zip(&self.shift)
            .map(|(&k, &z)| (k as f64 + 0.5) * side + z)
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(&self.shift)
                .zip(&self.index)
                .all(|((&xi, &zi), &ki)| cell_index(xi - zi, self.level) == ki)
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube {
            level: self.level + 1,
            index: self.index.iter().map(|k| k.div_euclid(2)).collect(),
            shift: self.shift.clone(),
        }
    }

    /// Child number `selector`: bit `j` of the selector picks the upper half
    /// along axis `j`.
    pub fn child(&self, selector: usize) -> DyadicCube {
        debug_assert!(selector < 1 << self.dim());
        DyadicCube {
            level: self.level - 1,
            index: self
                .index
                .iter()
                .enumerate()
                .map(|(j, k)| 2 * k + ((selector >> j) & 1) as i64)
                .collect(),
            shift: self.shift.clone(),
        }
    }

    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..1usize << self.dim()).map(move |s| self.child(s))
    }

    /// The ancestor at `level`, or `None` if `level` is finer than this cube.
    pub fn ancestor(&self, level: i32) -> Option<DyadicCube> {
        if level < self.level {
            return None;
        }
        let up = (level - self.level) as u32;
        Some(DyadicCube {
            level,
            index: self.index.iter().map(|k| k >> up).collect(),
            shift: self.shift.clone(),
        })
    }

    /// `self ⊆ other` (both on the same shifted lattice).
    pub fn is_within(&self, other: &DyadicCube) -> bool {
        self.shift == other.shift
            && self.dim() == other.dim()
            && self.ancestor(other.level).is_some_and(|a| a.index == other.index)
    }
}

/// The cube of level `level` in the lattice `D + shift` that contains `x`.
pub fn cube_at(x: &[f64], level: i32, shift: &[f64]) -> DyadicCube {
    assert_eq!(x.len(), shift.len(), "point and shift must share a dimension");
    DyadicCube {
        level,
        index: x
            .iter()
            .zip(shift)
            .map(|(&xi, &zi)| cell_index(xi - zi, level))
            .collect(),
        shift: shift.to_vec(),
    }
}

/// The finite family of dyadic cubes between `level_min` and `level_max`
/// descending from a set of roots. Outside of it every kernel vanishes.
///
/// Nodes are laid out densely: one block per root, and inside a block one
/// run per depth (coarse to fine). Within a run the local coordinates are
/// packed `d` bits per axis. Children therefore always have larger ids than
/// their parent, so a reverse sweep over ids visits every subtree bottom-up.
#[derive(Clone, Debug)]
pub struct LatticeWindow {
    dim: usize,
    shift: Vec<f64>,
    level_min: i32,
    level_max: i32,
    roots: Vec<Vec<i64>>,
    root_lookup: HashMap<Vec<i64>, usize>,
    level_offsets: Vec<usize>,
    per_root: usize,
    parent: Vec<u32>,
    depth_of: Vec<u8>,
}

impl PartialEq for LatticeWindow {
    fn eq(&self, other: &Self) -> bool {
        self.shift == other.shift
            && self.level_min == other.level_min
            && self.level_max == other.level_max
            && self.roots == other.roots
    }
}

impl LatticeWindow {
    pub fn new(shift: Vec<f64>, level_min: i32, level_max: i32, roots: Vec<Vec<i64>>) -> Result<Self> {
        let dim = shift.len();
        if dim == 0 {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if shift.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidWindow("shift must be finite".into()));
        }
        if level_min > level_max {
            return Err(Error::InvalidWindow(format!(
                "level_min {level_min} exceeds level_max {level_max}"
            )));
        }
        if level_min < -1000 || level_max > 1000 {
            return Err(Error::InvalidWindow("levels must lie in [-1000, 1000]".into()));
        }
        if roots.is_empty() {
            return Err(Error::InvalidWindow("window needs at least one root".into()));
        }
        let depth = (level_max - level_min) as usize;
        if depth * dim >= 63 {
            return Err(Error::InvalidWindow("window too deep".into()));
        }
        let mut level_offsets = Vec::with_capacity(depth + 2);
        let mut acc = 0usize;
        for d in 0..=depth {
            level_offsets.push(acc);
            acc = acc.saturating_add(1usize << (dim * d));
        }
        level_offsets.push(acc);
        let per_root = acc;
        let total = per_root.saturating_mul(roots.len());
        if total > MAX_WINDOW_CUBES {
            return Err(Error::InvalidWindow(format!(
                "window holds {total} cubes, limit is {MAX_WINDOW_CUBES}"
            )));
        }
        let mut root_lookup = HashMap::with_capacity(roots.len());
        for (i, r) in roots.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            if root_lookup.insert(r.clone(), i).is_some() {
                return Err(Error::InvalidWindow(format!("duplicate root {r:?}")));
            }
        }

        let mut parent = vec![u32::MAX; total];
        let mut depth_of = vec![0u8; total];
        for root in 0..roots.len() {
            let block = root * per_root;
            for d in 0..=depth {
                let width = 1usize << (dim * d);
                for local in 0..width {
                    let id = block + level_offsets[d] + local;
                    depth_of[id] = d as u8;
                    if d > 0 {
                        let mut up = 0usize;
                        for j in 0..dim {
                            let c = (local >> (d * j)) & ((1 << d) - 1);
                            up |= (c >> 1) << ((d - 1) * j);
                        }
                        parent[id] = (block + level_offsets[d - 1] + up) as u32;
                    }
                }
            }
        }

        Ok(LatticeWindow {
            dim,
            shift,
            level_min,
            level_max,
            roots,
            root_lookup,
            level_offsets,
            per_root,
            parent,
            depth_of,
        })
    }

    /// Window on the standard lattice whose roots are every level-`level_max`
    /// cube with index in `0..per_axis` along each axis.
    pub fn grid(dim: usize, level_min: i32, level_max: i32, per_axis: i64) -> Result<Self> {
        let mut roots = vec![vec![]];
        for _ in 0..dim {
            roots = roots
                .into_iter()
                .flat_map(|prefix: Vec<i64>| {
                    (0..per_axis).map(move |k| {
                        let mut v = prefix.clone();
                        v.push(k);
                        v
                    })
                })
                .collect();
        }
        LatticeWindow::new(vec![0.0; dim], level_min, level_max, roots)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }
    pub fn level_min(&self) -> i32 {
        self.level_min
    }
    pub fn level_max(&self) -> i32 {
        self.level_max
    }
    pub fn roots(&self) -> &[Vec<i64>] {
        &self.roots
    }
    /// Number of refinement steps below the roots.
    pub fn depth(&self) -> usize {
        (self.level_max - self.level_min) as usize
    }
    pub fn cube_count(&self) -> usize {
        self.per_root * self.roots.len()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        match self.parent[id] {
            u32::MAX => None,
            p => Some(p as NodeId),
        }
    }

    /// Depth below the root (0 for roots).
    pub fn node_depth(&self, id: NodeId) -> usize {
        self.depth_of[id] as usize
    }

    pub fn node_level(&self, id: NodeId) -> i32 {
        self.level_max - self.depth_of[id] as i32
    }

    pub fn is_finest(&self, id: NodeId) -> bool {
        self.node_depth(id) == self.depth()
    }

    /// Ids of the finest cells (one per root block, in id order).
    pub fn finest_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        let start = self.level_offsets[self.depth()];
        let width = self.per_root - start;
        (0..self.roots.len()).flat_map(move |r| {
            let base = r * self.per_root + start;
            base..base + width
        })
    }

    pub fn cube(&self, id: NodeId) -> DyadicCube {
        let root = id / self.per_root;
        let d = self.node_depth(id);
        let local = id % self.per_root - self.level_offsets[d];
        let mask = (1usize << d) - 1;
        let index = self.roots[root]
            .iter()
            .enumerate()
            .map(|(j, &r)| (r << d) + ((local >> (d * j)) & mask) as i64)
            .collect();
        DyadicCube {
            level: self.level_max - d as i32,
            index,
            shift: self.shift.clone(),
        }
    }

    pub fn node_id(&self, cube: &DyadicCube) -> Option<NodeId> {
        if cube.dim() != self.dim || cube.shift != self.shift {
            return None;
        }
        if cube.level < self.level_min || cube.level > self.level_max {
            return None;
        }
        let d = (self.level_max - cube.level) as usize;
        let root_index: Vec<i64> = cube.index.iter().map(|k| k >> d).collect();
        let root = *self.root_lookup.get(&root_index)?;
        let mut local = 0usize;
        for (j, (&k, &r)) in cube.index.iter().zip(&root_index).enumerate() {
            local |= ((k - (r << d)) as usize) << (d * j);
        }
        Some(root * self.per_root + self.level_offsets[d] + local)
    }

    /// Id of the finest window cell containing `x`, if any.
    pub fn leaf_id(&self, x: &[f64]) -> Option<NodeId> {
        if x.len() != self.dim {
            return None;
        }
        let depth = self.depth();
        let mut fine = [0i64; 8];
        let fine: &mut [i64] = if self.dim <= 8 {
            &mut fine[..self.dim]
        } else {
            return self.leaf_id_slow(x);
        };
        for (j, (&xi, &zi)) in x.iter().zip(&self.shift).enumerate() {
            if !xi.is_finite() {
                return None;
            }
            fine[j] = cell_index(xi - zi, self.level_min);
        }
        let mut root_index = [0i64; 8];
        let root_index = &mut root_index[..self.dim];
        for (r, k) in root_index.iter_mut().zip(fine.iter()) {
            *r = k >> depth;
        }
        let root = *self.root_lookup.get(&*root_index)?;
        let mut local = 0usize;
        for (j, (&k, &r)) in fine.iter().zip(root_index.iter()).enumerate() {
            local |= ((k - (r << depth)) as usize) << (depth * j);
        }
        Some(root * self.per_root + self.level_offsets[depth] + local)
    }

    fn leaf_id_slow(&self, x: &[f64]) -> Option<NodeId> {
        self.node_id(&cube_at(x, self.level_min, &self.shift))
    }

    /// Window cubes containing `x`, as ids ordered fine to coarse.
    pub fn chain_ids_upward(&self, x: &[f64]) -> Result<Vec<NodeId>> {
        let leaf = self.leaf_id(x).ok_or_else(|| Error::OutOfWindow { point: x.to_vec() })?;
        Ok(self.ancestors_of(leaf).collect())
    }

    /// `id` followed by all its ancestors up to the root.
    pub fn ancestors_of(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(Some(id), move |&i| self.parent(i))
    }

    /// All window cubes containing `x`, ordered coarse to fine.
    pub fn chain(&self, x: &[f64]) -> Result<Vec<DyadicCube>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut ids = self.chain_ids_upward(x)?;
        ids.reverse();
        Ok(ids.into_iter().map(|id| self.cube(id)).collect())
    }
}

/// Open balls `|x - y| < r` or closed balls `|x - y| <= r`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BallMode {
    #[default]
    Open,
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub w: f64,
}

/// Finite weighted point set in `R^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl AtomicMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be at least 1".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.x.len() });
            }
            if a.x.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {i} has a non-finite coordinate")));
            }
            if !(a.w.is_finite() && a.w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("atom {i} has mass {}", a.w)));
            }
        }
        Ok(AtomicMeasure { dim, atoms })
    }

    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Result<Self> {
        AtomicMeasure::new(dim, pairs.into_iter().map(|(x, w)| Atom { x, w }).collect())
    }

    pub fn empty(dim: usize) -> Self {
        AtomicMeasure { dim, atoms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// Mass inside `cube` by a direct scan of the atoms.
    pub fn cube_measure(&self, cube: &DyadicCube) -> f64 {
        let mut m = 0.0;
        for a in &self.atoms {
            if cube.contains(&a.x) {
                m += a.w;
            }
        }
        m
    }

    pub fn ball_measure(&self, x: &[f64], r: f64, mode: BallMode) -> f64 {
        let mut m = 0.0;
        for a in &self.atoms {
            let d = distance(&a.x, x);
            let inside = match mode {
                BallMode::Open => d < r,
                BallMode::Closed => d <= r,
            };
            if inside {
                m += a.w;
            }
        }
        m
    }

    /// Every mass multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        AtomicMeasure::new(
            self.dim,
            self.atoms.iter().map(|a| Atom { x: a.x.clone(), w: a.w * t }).collect(),
        )
    }

    /// Same locations with new masses.
    pub fn with_masses(&self, masses: &[f64]) -> Result<Self> {
        if masses.len() != self.len() {
            return Err(Error::InvalidMeasure(format!(
                "expected {} masses, got {}",
                self.len(),
                masses.len()
            )));
        }
        AtomicMeasure::new(
            self.dim,
            self.atoms
                .iter()
                .zip(masses)
                .map(|(a, &w)| Atom { x: a.x.clone(), w })
                .collect(),
        )
    }

    /// Sub-measure made of the listed atoms.
    pub fn restricted(&self, keep: &[usize]) -> AtomicMeasure {
        AtomicMeasure {
            dim: self.dim,
            atoms: keep.iter().map(|&i| self.atoms[i].clone()).collect(),
        }
    }
}

/// Per-cube sums of atom masses over a window, plus the finest cell of each
/// atom. Built once and never mutated.
#[derive(Clone, Debug)]
pub struct MeasureTree {
    mass: Vec<f64>,
    leaves: Vec<Option<NodeId>>,
}

impl MeasureTree {
    pub fn build(window: &LatticeWindow, measure: &AtomicMeasure) -> Result<Self> {
        Self::accumulate(window, measure, |_, w| w)
    }

    /// Tree of `sum f_j w_j` over each cube.
    pub fn build_weighted(window: &LatticeWindow, measure: &AtomicMeasure, f: &[f64]) -> Result<Self> {
        if f.len() != measure.len() {
            return Err(Error::InvalidArgument(format!(
                "density has {} values for {} atoms",
                f.len(),
                measure.len()
            )));
        }
        Self::accumulate(window, measure, |j, w| f[j] * w)
    }

    fn accumulate(
        window: &LatticeWindow,
        measure: &AtomicMeasure,
        weight: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        check_dim(window, measure)?;
        let mut mass = vec![0.0; window.cube_count()];
        let mut leaves = Vec::with_capacity(measure.len());
        for (j, a) in measure.atoms().iter().enumerate() {
            let leaf = window.leaf_id(&a.x);
            if let Some(leaf) = leaf {
                let w = weight(j, a.w);
                let mut id = Some(leaf);
                while let Some(i) = id {
                    mass[i] += w;
                    id = window.parent(i);
                }
            }
            leaves.push(leaf);
        }
        Ok(MeasureTree { mass, leaves })
    }

    /// Reference construction: for every window cube, scan every atom.
    /// Same additions in the same order as [`MeasureTree::build`], hence the
    /// same bits, at `O(cubes * atoms)` cost.
    pub fn build_naive(window: &LatticeWindow, measure: &AtomicMeasure) -> Result<Self> {
        check_dim(window, measure)?;
        let mass = (0..window.cube_count())
            .map(|id| measure.cube_measure(&window.cube(id)))
            .collect();
        let leaves = measure.atoms().iter().map(|a| window.leaf_id(&a.x)).collect();
        Ok(MeasureTree { mass, leaves })
    }

    pub fn mass(&self, id: NodeId) -> f64 {
        self.mass[id]
    }
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }
    /// Finest window cell of atom `j`, `None` when the atom is outside.
    pub fn leaf(&self, j: usize) -> Option<NodeId> {
        self.leaves[j]
    }
    pub fn leaves(&self) -> &[Option<NodeId>] {
        &self.leaves
    }

    /// `m(Q)`: read from the tree for window cubes, scanned otherwise.
    pub fn cube_measure(&self, window: &LatticeWindow, measure: &AtomicMeasure, cube: &DyadicCube) -> f64 {
        match window.node_id(cube) {
            Some(id) => self.mass[id],
            None => measure.cube_measure(cube),
        }
    }
}

pub(crate) fn check_dim(window: &LatticeWindow, measure: &AtomicMeasure) -> Result<()> {
    if window.dim() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: window.dim(), found: measure.dim() });
    }
    Ok(())
}
