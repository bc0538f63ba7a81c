// SPDX-License-Identifier: Apache-2.0

//! Direct-summation reference for the dyadic quantities, written from the
//! definitions against the raw instance file. Shares no code with the
//! library beyond the file types: cubes are enumerated from the roots,
//! `K(Q)` is read off the kernel spec, and every measure of a cube is a scan
//! over the atoms.

use std::collections::HashMap;

use wolff_trace::instance::{InstanceFile, KernelSpec, ProfileSpec};

#[derive(Clone, Debug)]
pub struct Cube {
    pub level: i32,
    pub index: Vec<i64>,
}

pub struct Oracle {
    shift: Vec<f64>,
    level_min: i32,
    pub cubes: Vec<Cube>,
    k: Vec<f64>,
    sigma_x: Vec<Vec<f64>>,
    sigma_w: Vec<f64>,
    sigma_q: Vec<f64>,
    pp: f64,
    p: f64,
}

fn side(level: i32) -> f64 {
    2f64.powi(level)
}

fn profile_value(profile: &ProfileSpec, n: usize, r: f64) -> f64 {
    match profile {
        ProfileSpec::Riesz { alpha } => r.powf(alpha - n as f64),
        ProfileSpec::Table { r: breaks, k } => {
            // k[i] on [r_i, r_(i+1)); below r_1 the first value applies
            let mut v = k[0];
            for (b, kv) in breaks.iter().zip(k).skip(1) {
                if r >= *b {
                    v = *kv;
                }
            }
            v
        }
    }
}

impl Oracle {
    pub fn new(file: &InstanceFile) -> Self {
        let w = &file.window;
        let mut cubes = Vec::new();
        for root in &w.roots {
            let mut stack = vec![Cube { level: w.level_max, index: root.clone() }];
            while let Some(c) = stack.pop() {
                if c.level > w.level_min {
                    for sel in 0..(1usize << file.n) {
                        let index = c.index.iter().enumerate().map(|(j, k)| 2 * k + ((sel >> j) & 1) as i64).collect();
                        stack.push(Cube { level: c.level - 1, index });
                    }
                }
                cubes.push(c);
            }
        }
        let k = match &file.kernel {
            KernelSpec::Table { entries } => {
                let map: HashMap<(i32, Vec<i64>), f64> =
                    entries.iter().map(|(l, i, v)| ((*l, i.clone()), *v)).collect();
                cubes.iter().map(|c| map.get(&(c.level, c.index.clone())).copied().unwrap_or(0.0)).collect()
            }
            KernelSpec::Radial { profile } => cubes.iter().map(|c| profile_value(profile, file.n, side(c.level))).collect(),
        };
        let p = file.p;
        let mut o = Oracle {
            shift: w.shift.clone(),
            level_min: w.level_min,
            cubes,
            k,
            sigma_x: file.sigma.iter().map(|a| a.0.clone()).collect(),
            sigma_w: file.sigma.iter().map(|a| a.1).collect(),
            sigma_q: Vec::new(),
            pp: p / (p - 1.0),
            p,
        };
        o.sigma_q = (0..o.cubes.len()).map(|q| o.measure(q, &o.sigma_x, &o.sigma_w)).collect();
        o
    }

    pub fn contains(&self, q: usize, x: &[f64]) -> bool {
        let c = &self.cubes[q];
        let s = side(c.level);
        c.index.iter().zip(x).zip(&self.shift).all(|((k, xi), zi)| ((xi - zi) / s).floor() as i64 == *k)
    }

    /// `Q' ⊆ Q`.
    fn within(&self, inner: usize, outer: usize) -> bool {
        let (a, b) = (&self.cubes[inner], &self.cubes[outer]);
        a.level <= b.level && a.index.iter().zip(&b.index).all(|(i, j)| i >> (b.level - a.level) == *j)
    }

    pub fn measure(&self, q: usize, xs: &[Vec<f64>], ws: &[f64]) -> f64 {
        xs.iter().zip(ws).filter(|(x, _)| self.contains(q, x)).map(|(_, w)| w).sum()
    }

    pub fn sigma(&self, q: usize) -> f64 {
        self.sigma_q[q]
    }

    /// `sum_{Q' ⊆ Q, x ∈ Q'} K(Q') sigma(Q')`.
    fn chain_sum(&self, q: usize, x: &[f64]) -> f64 {
        (0..self.cubes.len())
            .filter(|&c| self.within(c, q) && self.contains(c, x))
            .map(|c| self.k[c] * self.sigma_q[c])
            .sum()
    }

    /// `K̄(Q)(x)`, zero when `sigma(Q) = 0`.
    pub fn kbar_at(&self, q: usize, x: &[f64]) -> f64 {
        let s = self.sigma_q[q];
        if s == 0.0 {
            0.0
        } else {
            self.chain_sum(q, x) / s
        }
    }

    /// `inf_{x ∈ Q} K̄(Q)(x)` over the centers of the finest cells of `Q`
    /// (K vanishes below the finest level, so the profile is constant there).
    pub fn kbar_inf_all(&self) -> Vec<f64> {
        let mut inf = vec![f64::INFINITY; self.cubes.len()];
        for (f, c) in self.cubes.iter().enumerate() {
            if c.level != self.level_min {
                continue;
            }
            let center = self.center(f);
            for q in 0..self.cubes.len() {
                if self.within(f, q) {
                    inf[q] = inf[q].min(self.kbar_at(q, &center));
                }
            }
        }
        inf
    }

    pub fn center(&self, q: usize) -> Vec<f64> {
        let c = &self.cubes[q];
        let s = side(c.level);
        c.index.iter().zip(&self.shift).map(|(k, z)| z + (*k as f64 + 0.5) * s).collect()
    }

    pub fn finest(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cubes.len()).filter(|&q| self.cubes[q].level == self.level_min)
    }

    /// `T[f dsigma](x) = sum_{Q ∋ x} K(Q) sum_{x_j ∈ Q} f_j sigma_j`.
    pub fn apply_t(&self, f: &[f64], x: &[f64]) -> f64 {
        let fw: Vec<f64> = f.iter().zip(&self.sigma_w).map(|(a, b)| a * b).collect();
        (0..self.cubes.len())
            .filter(|&q| self.contains(q, x))
            .map(|q| self.k[q] * self.measure(q, &self.sigma_x, &fw))
            .sum()
    }

    fn pos_pow(b: f64, e: f64) -> f64 {
        if b == 0.0 {
            0.0
        } else {
            b.powf(e)
        }
    }

    pub fn wolff_general(&self, nu: &[(Vec<f64>, f64)], x: &[f64]) -> f64 {
        let e = self.pp - 1.0;
        (0..self.cubes.len())
            .filter(|&q| self.contains(q, x))
            .map(|q| {
                let inner: f64 =
                    nu.iter().filter(|(y, _)| self.contains(q, y)).map(|(y, w)| w * self.kbar_at(q, y)).sum();
                self.k[q] * Self::pos_pow(inner, e) * self.sigma_q[q]
            })
            .sum()
    }

    pub fn wolff_dlbo(&self, inf: &[f64], nu: &[(Vec<f64>, f64)], x: &[f64]) -> f64 {
        let e = self.pp - 1.0;
        let (xs, ws): (Vec<Vec<f64>>, Vec<f64>) = nu.iter().cloned().unzip();
        (0..self.cubes.len())
            .filter(|&q| self.contains(q, x) && self.sigma_q[q] > 0.0)
            .map(|q| self.k[q] * Self::pos_pow(inf[q], e) * Self::pos_pow(self.measure(q, &xs, &ws), e) * self.sigma_q[q])
            .sum()
    }

    /// `int (T[nu])^p' dsigma`.
    pub fn energy(&self, nu: &[(Vec<f64>, f64)]) -> f64 {
        let (xs, ws): (Vec<Vec<f64>>, Vec<f64>) = nu.iter().cloned().unzip();
        self.sigma_x
            .iter()
            .zip(&self.sigma_w)
            .map(|(x, w)| {
                let t: f64 = (0..self.cubes.len())
                    .filter(|&q| self.contains(q, x))
                    .map(|q| self.k[q] * self.measure(q, &xs, &ws))
                    .sum();
                w * Self::pos_pow(t, self.pp)
            })
            .sum()
    }

    pub fn wolff_energy(&self, inf: &[f64], nu: &[(Vec<f64>, f64)]) -> f64 {
        nu.iter().map(|(x, w)| w * self.wolff_dlbo(inf, nu, x)).sum()
    }

    /// `max_P mu(P)^-1 sum_{Q ⊆ P} K(Q) K̄(Q)^(p'-1) mu(Q)^p' sigma(Q)`.
    pub fn carleson(&self, inf: &[f64], mu: &[(Vec<f64>, f64)]) -> f64 {
        let (xs, ws): (Vec<Vec<f64>>, Vec<f64>) = mu.iter().cloned().unzip();
        let m: Vec<f64> = (0..self.cubes.len()).map(|q| self.measure(q, &xs, &ws)).collect();
        let term: Vec<f64> = (0..self.cubes.len())
            .map(|q| {
                if self.sigma_q[q] == 0.0 {
                    0.0
                } else {
                    self.k[q] * Self::pos_pow(inf[q], self.pp - 1.0) * Self::pos_pow(m[q], self.pp) * self.sigma_q[q]
                }
            })
            .collect();
        let mut best = 0.0f64;
        for p in 0..self.cubes.len() {
            if m[p] > 0.0 {
                let s: f64 = (0..self.cubes.len()).filter(|&q| self.within(q, p)).map(|q| term[q]).sum();
                best = best.max(s / m[p]);
            }
        }
        best
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}
