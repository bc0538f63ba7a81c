// SPDX-License-Identifier: Apache-2.0

//! Continuous energy `int (T_k[mu])^p' dsigma` and its comparison with the
//! supremum over shifted dyadic lattices of the dyadic Wolff energy with
//! `K(Q) = k(r_Q)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{RadialKernel, ReferenceMeasure};
use crate::dyadic::{pow_pos, DyadicKernel, DyadicModel, Exponents};
use crate::error::{Error, Result};
use crate::lattice::{cell_index, distance, pow2, AtomicMeasure, BallMode, LatticeWindow};

/// `T_k[mu](y) = sum_j k(|y - x_j|) w_j`; `None` when `y` sits on a
/// positive atom of a kernel that is infinite at 0.
pub fn potential_at(k: &RadialKernel, mu: &AtomicMeasure, y: &[f64]) -> Option<f64> {
    let mut t = 0.0;
    for a in mu.atoms() {
        if a.w == 0.0 {
            continue;
        }
        let v = k.eval(distance(&a.x, y));
        if v.is_infinite() {
            return None;
        }
        t += v * a.w;
    }
    Some(t)
}

/// Box and sample budget for Lebesgue-sigma energies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Approximate budget; rounded to `2 m^n` (two points in each of `m^n`
    /// strata).
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// Standard error of a Monte Carlo estimate; `None` when exact.
    pub std_error: Option<f64>,
    pub samples: usize,
}

/// `int (T_k[mu])^p' dsigma`: exact over the atoms of an atomic sigma,
/// stratified Monte Carlo over `mc`'s box for Lebesgue sigma.
pub fn energy_continuous(
    k: &RadialKernel,
    sigma: &ReferenceMeasure,
    mu: &AtomicMeasure,
    exps: &Exponents,
    mc: Option<&MonteCarloConfig>,
) -> Result<EnergyEstimate> {
    let pp = exps.p_prime();
    if mu.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: mu.dim() });
    }
    match sigma {
        ReferenceMeasure::Atomic(s) => {
            let mut total = 0.0;
            for (i, a) in s.atoms().iter().enumerate() {
                let t = potential_at(k, mu, &a.x).ok_or(Error::SingularEvaluation { atom: i })?;
                total += a.w * pow_pos(t, pp);
            }
            Ok(EnergyEstimate { value: total, std_error: None, samples: s.len() })
        }
        ReferenceMeasure::Lebesgue { dim } => {
            let mc = mc.ok_or_else(|| {
                Error::InvalidArgument("Lebesgue sigma needs a Monte Carlo box and budget".into())
            })?;
            monte_carlo(k, mu, pp, *dim, mc)
        }
    }
}

fn monte_carlo(k: &RadialKernel, mu: &AtomicMeasure, pp: f64, dim: usize, mc: &MonteCarloConfig) -> Result<EnergyEstimate> {
    if mc.lower.len() != dim || mc.upper.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: mc.lower.len() });
    }
    if mc.lower.iter().zip(&mc.upper).any(|(l, u)| !(l < u && l.is_finite() && u.is_finite())) {
        return Err(Error::InvalidArgument("Monte Carlo box must have finite lower < upper".into()));
    }
    let per_axis = (((mc.samples.max(2) / 2) as f64).powf(1.0 / dim as f64).floor() as usize).max(1);
    let cells = per_axis.pow(dim as u32);
    let widths: Vec<f64> = mc.lower.iter().zip(&mc.upper).map(|(l, u)| (u - l) / per_axis as f64).collect();
    let volume: f64 = widths.iter().product();

    const CHUNK: usize = 1024;
    let chunks = cells.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(c as u64);
            let mut sum = 0.0;
            let mut var = 0.0;
            let mut y = vec![0.0; dim];
            for cell in c * CHUNK..((c + 1) * CHUNK).min(cells) {
                let mut vals = [0.0; 2];
                for v in vals.iter_mut() {
                    let mut rest = cell;
                    for (axis, yi) in y.iter_mut().enumerate() {
                        let idx = rest % per_axis;
                        rest /= per_axis;
                        *yi = mc.lower[axis] + widths[axis] * (idx as f64 + rng.random::<f64>());
                    }
                    *v = potential_at(k, mu, &y).map_or(f64::INFINITY, |t| pow_pos(t, pp));
                }
                sum += volume * 0.5 * (vals[0] + vals[1]);
                var += volume * volume * (vals[0] - vals[1]).powi(2) / 4.0;
            }
            (sum, var)
        })
        .collect();
    let value: f64 = parts.iter().map(|p| p.0).sum();
    let var: f64 = parts.iter().map(|p| p.1).sum();
    Ok(EnergyEstimate { value, std_error: Some(var.sqrt()), samples: 2 * cells })
}

/// `count` shifts, the first one zero, the rest uniform in
/// `[0, 2^level_max)^n` (shifting by a full top-level side gives the same
/// lattice).
pub fn sample_shifts(dim: usize, count: usize, level_max: i32, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = pow2(level_max);
    (0..count)
        .map(|i| if i == 0 { vec![0.0; dim] } else { (0..dim).map(|_| rng.random::<f64>() * side).collect() })
        .collect()
}

/// Window on the lattice shifted by `shift` whose roots are the
/// level-`level_max` cubes meeting any of the given atoms.
pub fn covering_window(
    measures: &[&AtomicMeasure],
    shift: &[f64],
    level_min: i32,
    level_max: i32,
) -> Result<LatticeWindow> {
    let mut roots: Vec<Vec<i64>> = measures
        .iter()
        .flat_map(|m| m.atoms())
        .map(|a| a.x.iter().zip(shift).map(|(x, z)| cell_index(x - z, level_max)).collect())
        .collect();
    roots.sort();
    roots.dedup();
    if roots.is_empty() {
        roots.push(vec![0; shift.len()]);
    }
    LatticeWindow::new(shift.to_vec(), level_min, level_max, roots)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftedEnergy {
    /// `max_z int W^(D+z)[mu] dmu`.
    pub sup: f64,
    pub argmax: usize,
    pub per_shift: Vec<f64>,
}

/// Dyadic Wolff energy with `K(Q) = k(r_Q)` on each shifted lattice,
/// truncated to levels `[level_min, level_max]`; returns the maximum.
pub fn shifted_energy_sup(
    k: &RadialKernel,
    sigma: &AtomicMeasure,
    mu: &AtomicMeasure,
    exps: &Exponents,
    shifts: &[Vec<f64>],
    level_min: i32,
    level_max: i32,
) -> Result<ShiftedEnergy> {
    if shifts.is_empty() {
        return Err(Error::InvalidArgument("at least one shift is required".into()));
    }
    let per_shift: Vec<f64> = shifts
        .par_iter()
        .map(|z| {
            if z.len() != sigma.dim() {
                return Err(Error::DimensionMismatch { expected: sigma.dim(), found: z.len() });
            }
            let window = covering_window(&[sigma, mu], z, level_min, level_max)?;
            let kernel = DyadicKernel::from_radial(window, k)?;
            DyadicModel::new(kernel, sigma.clone())?.wolff_energy(mu, exps)
        })
        .collect::<Result<_>>()?;
    let mut argmax = 0;
    for (i, v) in per_shift.iter().enumerate() {
        if *v > per_shift[argmax] {
            argmax = i;
        }
    }
    Ok(ShiftedEnergy { sup: per_shift[argmax], argmax, per_shift })
}

/// `max sigma(B(x, 2r)) / sigma(B(x, r))` over atom centers `x` and the
/// given radii, skipping empty balls. Metadata only: a sample, not a bound.
pub fn sampled_doubling(sigma: &AtomicMeasure, radii: &[f64]) -> f64 {
    let mut worst = 1.0f64;
    for a in sigma.atoms() {
        for &r in radii {
            let inner = sigma.ball_measure(&a.x, r, BallMode::Open);
            if inner > 0.0 {
                worst = worst.max(sigma.ball_measure(&a.x, 2.0 * r, BallMode::Open) / inner);
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuumComparison {
    pub energy_continuous: f64,
    pub shifted_energy_sup: f64,
    pub ratio: f64,
    pub shifts_used: usize,
    pub seed: u64,
    pub argmax_shift: Vec<f64>,
    pub sampled_doubling: f64,
}

/// Continuous energy against the shifted dyadic supremum over `shifts`
/// sampled lattices.
#[allow(clippy::too_many_arguments)]
pub fn compare_continuum(
    k: &RadialKernel,
    sigma: &AtomicMeasure,
    mu: &AtomicMeasure,
    exps: &Exponents,
    shifts: usize,
    seed: u64,
    level_min: i32,
    level_max: i32,
) -> Result<ContinuumComparison> {
    let z = sample_shifts(sigma.dim(), shifts.max(1), level_max, seed);
    let energy = energy_continuous(k, &ReferenceMeasure::Atomic(sigma.clone()), mu, exps, None)?.value;
    let sup = shifted_energy_sup(k, sigma, mu, exps, &z, level_min, level_max)?;
    let radii: Vec<f64> = (level_min..=level_max).map(pow2).collect();
    Ok(ContinuumComparison {
        energy_continuous: energy,
        shifted_energy_sup: sup.sup,
        ratio: energy / sup.sup,
        shifts_used: z.len(),
        seed,
        argmax_shift: z[sup.argmax].clone(),
        sampled_doubling: sampled_doubling(sigma, &radii),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_energy_closed_form() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        let e = Exponents::new(3.0, 1.0).unwrap();
        let sigma = ReferenceMeasure::Atomic(AtomicMeasure::from_pairs(1, [(vec![0.0], 2.0)]).unwrap());
        let mu = AtomicMeasure::from_pairs(1, [(vec![0.64], 1.5)]).unwrap();
        let v = energy_continuous(&k, &sigma, &mu, &e, None).unwrap().value;
        let want = 2.0 * (0.64f64.powf(-0.5) * 1.5).powf(1.5);
        assert!((v - want).abs() <= 1e-14 * want);
        let v3 = energy_continuous(&k.scaled(3.0), &sigma, &mu, &e, None).unwrap().value;
        assert!((v3 - 3f64.powf(1.5) * v).abs() <= 1e-13 * v3);
        assert_eq!(energy_continuous(&k, &sigma, &AtomicMeasure::empty(1), &e, None).unwrap().value, 0.0);

        let on_atom = AtomicMeasure::from_pairs(1, [(vec![0.0], 1.0)]).unwrap();
        assert!(matches!(
            energy_continuous(&k, &sigma, &on_atom, &e, None),
            Err(Error::SingularEvaluation { atom: 0 })
        ));
    }

    #[test]
    fn lebesgue_energy_monte_carlo() {
        // compactly supported table kernel: T = 1 on (x-1, x+1), energy = 2 for p' = 2
        let k = RadialKernel::table(vec![1.0, 1.0 + 1e-9], vec![1.0, 0.0]).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let mu = AtomicMeasure::from_pairs(1, [(vec![0.0], 1.0)]).unwrap();
        let mc = MonteCarloConfig { lower: vec![-2.0], upper: vec![2.0], samples: 20_000, seed: 7 };
        let est = energy_continuous(&k, &ReferenceMeasure::Lebesgue { dim: 1 }, &mu, &e, Some(&mc)).unwrap();
        assert!((est.value - 2.0).abs() < 1e-3, "{est:?}");
        let again = energy_continuous(&k, &ReferenceMeasure::Lebesgue { dim: 1 }, &mu, &e, Some(&mc)).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn shifts_and_sup() {
        let z = sample_shifts(2, 5, 0, 3);
        assert_eq!(z[0], vec![0.0, 0.0]);
        assert!(z[1..].iter().flatten().all(|v| (0.0..1.0).contains(v)));

        let k = RadialKernel::riesz(0.5, 1).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let sigma = AtomicMeasure::from_pairs(1, [(vec![0.2], 1.0), (vec![0.7], 1.0)]).unwrap();
        let mu = AtomicMeasure::from_pairs(1, [(vec![0.3], 1.0)]).unwrap();
        let z = sample_shifts(1, 8, 0, 11);
        let one = shifted_energy_sup(&k, &sigma, &mu, &e, &z[..1], -4, 0).unwrap();
        let window = covering_window(&[&sigma, &mu], &[0.0], -4, 0).unwrap();
        let plain = DyadicModel::new(DyadicKernel::from_radial(window, &k).unwrap(), sigma.clone())
            .unwrap()
            .wolff_energy(&mu, &e)
            .unwrap();
        assert_eq!(one.sup, plain);
        let mut prev = 0.0;
        for n in 1..=z.len() {
            let s = shifted_energy_sup(&k, &sigma, &mu, &e, &z[..n], -4, 0).unwrap().sup;
            assert!(s >= prev);
            prev = s;
        }
    }
}
