// SPDX-License-Identifier: Apache-2.0

//! Radial averaged kernels `k̄(r)(x)`, the sampled LBO constant, and the
//! continuous Wolff potentials
//!
//! ```text
//! W^R(x)  = int_0^R k(r) sigma(B) k̄(r)(x)^(p'-1) mu(B)^(p'-1) dr/r
//! W_k(x)  = int_0^R k(r) k̄(r)^(p'-1) mu(B)^(p'-1) r^(n-1) dr      (sigma = dx)
//! ```
//!
//! with `B = B(x, r)` open. Divergence at either end is decided
//! analytically before any quadrature runs; Riesz kernels against Lebesgue
//! measure are summed in closed form, one power law per interval between
//! consecutive mu-atom distances.

use serde::Serialize;

use super::kernel::{unit_ball_volume, RadialKernel, ReferenceMeasure};
use super::quadrature::{integrate_log, sum_decades, QuadratureConfig};
use crate::dyadic::{pow_pos, Exponents};
use crate::error::{Endpoint, Error, Result};
use crate::lattice::{distance, AtomicMeasure};

/// Evaluation route for the continuous potentials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WolffMethod {
    /// Closed form where one exists (Riesz kernel, Lebesgue sigma), else
    /// quadrature.
    #[default]
    Auto,
    Quadrature,
}

/// Sorted distances of the positive atoms of a measure from a center, with
/// running masses.
#[derive(Clone, Debug)]
struct RadialMass {
    dist: Vec<f64>,
    cum: Vec<f64>,
}

impl RadialMass {
    fn new(m: &AtomicMeasure, x: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> =
            m.atoms().iter().filter(|a| a.w > 0.0).map(|a| (distance(&a.x, x), a.w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let cum = pairs
            .iter()
            .map(|p| {
                acc += p.1;
                acc
            })
            .collect();
        RadialMass { dist: pairs.iter().map(|p| p.0).collect(), cum }
    }

    /// Number of atoms strictly inside radius `r`.
    fn count(&self, r: f64) -> usize {
        self.dist.partition_point(|d| *d < r)
    }

    /// Open-ball mass.
    fn mass(&self, r: f64) -> f64 {
        match self.count(r) {
            0 => 0.0,
            c => self.cum[c - 1],
        }
    }

    fn at_center(&self) -> bool {
        self.dist.first() == Some(&0.0)
    }
}

/// `sigma(B(x, r))` and `J(r) = int_0^r k(l) sigma(B(x, l)) dl/l` about a
/// fixed center.
#[derive(Clone, Debug)]
enum SigmaProfile {
    Lebesgue { dim: usize },
    Atomic { mass: RadialMass, j_at: Vec<f64> },
}

impl SigmaProfile {
    fn new(k: &RadialKernel, sigma: &ReferenceMeasure, x: &[f64]) -> Result<Self> {
        match sigma {
            ReferenceMeasure::Lebesgue { dim } => Ok(SigmaProfile::Lebesgue { dim: *dim }),
            ReferenceMeasure::Atomic(m) => {
                let mass = RadialMass::new(m, x);
                if mass.at_center() {
                    // sigma(B(x, l)) >= w for all l > 0 and int_0 k(l) dl/l = inf
                    return Err(Error::DivergentTail { end: Endpoint::Zero, exponent: head_exponent(k, 0.0) });
                }
                let mut j_at = Vec::with_capacity(mass.dist.len());
                let mut acc = 0.0;
                for i in 0..mass.dist.len() {
                    if i > 0 {
                        acc += mass.cum[i - 1] * k.power_integral(mass.dist[i - 1], mass.dist[i], 0.0)?;
                    }
                    j_at.push(acc);
                }
                Ok(SigmaProfile::Atomic { mass, j_at })
            }
        }
    }

    fn ball(&self, r: f64) -> f64 {
        match self {
            SigmaProfile::Lebesgue { dim } => unit_ball_volume(*dim) * r.powi(*dim as i32),
            SigmaProfile::Atomic { mass, .. } => mass.mass(r),
        }
    }

    fn j(&self, k: &RadialKernel, r: f64) -> Result<f64> {
        match self {
            SigmaProfile::Lebesgue { dim } => Ok(unit_ball_volume(*dim) * k.power_integral(0.0, r, *dim as f64)?),
            SigmaProfile::Atomic { mass, j_at } => match mass.count(r) {
                0 => Ok(0.0),
                c => Ok(j_at[c - 1] + mass.cum[c - 1] * k.power_integral(mass.dist[c - 1], r, 0.0)?),
            },
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            SigmaProfile::Lebesgue { .. } => &[],
            SigmaProfile::Atomic { mass, .. } => &mass.dist,
        }
    }
}

/// Exponent `gamma` of `k(l) l^(gamma-1)`-type behavior at 0 for the
/// diagnostic in divergence errors.
fn head_exponent(k: &RadialKernel, beta: f64) -> Option<f64> {
    match k {
        RadialKernel::Riesz { alpha, dim, .. } => Some(alpha - *dim as f64 + beta),
        RadialKernel::Table { .. } => Some(beta),
    }
}

/// `k̄(r)(x) = sigma(B(x, r))^-1 int_0^r k(l) sigma(B(x, l)) dl/l`.
pub fn kbar_radial(k: &RadialKernel, sigma: &ReferenceMeasure, x: &[f64], r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive and finite, got {r}")));
    }
    if x.len() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: x.len() });
    }
    let profile = SigmaProfile::new(k, sigma, x)?;
    let b = profile.ball(r);
    if b == 0.0 {
        return Err(Error::EmptyBall);
    }
    Ok(profile.j(k, r)? / b)
}

/// One sampled ball for [`lbo_constant`]: `k̄(radius)(y)` is evaluated at
/// every probe `y` inside `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LboBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub probes: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LboReport {
    /// Largest sampled `sup / inf`; a lower bound on the true constant.
    pub a: f64,
    pub balls_used: usize,
    pub probes_evaluated: usize,
    pub skipped_outside: usize,
    pub skipped_empty: usize,
    pub skipped_divergent: usize,
    pub sampled: bool,
}

/// Sampled LBO constant: the maximum over balls of the ratio of the largest
/// to the smallest `k̄(r)(y)` over the probes. Probes with an empty ball or
/// a divergent average are skipped and counted.
pub fn lbo_constant(k: &RadialKernel, sigma: &ReferenceMeasure, balls: &[LboBall]) -> Result<LboReport> {
    let mut report = LboReport {
        a: 1.0,
        balls_used: 0,
        probes_evaluated: 0,
        skipped_outside: 0,
        skipped_empty: 0,
        skipped_divergent: 0,
        sampled: true,
    };
    for ball in balls {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for y in &ball.probes {
            if distance(y, &ball.center) >= ball.radius {
                report.skipped_outside += 1;
                continue;
            }
            match kbar_radial(k, sigma, y, ball.radius) {
                Ok(v) => {
                    report.probes_evaluated += 1;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Err(Error::EmptyBall) => report.skipped_empty += 1,
                Err(Error::DivergentTail { .. }) => report.skipped_divergent += 1,
                Err(e) => return Err(e),
            }
        }
        if hi > 0.0 || lo == 0.0 {
            report.balls_used += 1;
            let ratio = if lo > 0.0 { hi / lo } else if hi > 0.0 { f64::INFINITY } else { 1.0 };
            report.a = report.a.max(ratio);
        }
    }
    Ok(report)
}

/// Riesz exponent `e = (alpha - n) p' + n` of the Lebesgue integrand
/// `r^(e-1)`, with the prefactor of the Corollary-C form.
fn riesz_lebesgue_parts(k: &RadialKernel, exps: &Exponents) -> Option<(f64, f64)> {
    let RadialKernel::Riesz { alpha, dim, scale } = k else { return None };
    let pp = exps.p_prime();
    let e = (alpha - *dim as f64) * pp + *dim as f64;
    let pref = scale.powf(pp) * alpha.powf(1.0 - pp);
    Some((e, pref))
}

/// `pref * sum_m M_m^(p'-1) int_{d_m}^{d_{m+1} ∧ R} r^(e-1) dr`.
fn riesz_closed_form(mu: &RadialMass, e: f64, pref: f64, pp: f64, upper: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, &d) in mu.dist.iter().enumerate() {
        if d >= upper {
            break;
        }
        let next = mu.dist.get(i + 1).copied().unwrap_or(f64::INFINITY).min(upper);
        if next > d {
            total += pow_pos(mu.cum[i], pp - 1.0) * super::kernel::power_piece(d, next, e)?;
        }
    }
    Ok(pref * total)
}

/// Which integrand the quadrature driver evaluates.
#[derive(Clone, Copy)]
enum Form {
    /// `k sigma(B) k̄^(p'-1) mu(B)^(p'-1)` against `dr/r`.
    General,
    /// `k k̄^(p'-1) mu(B)^(p'-1) r^n` against `dr/r`, Lebesgue `k̄`.
    Convolution,
}

fn check_upper(upper: f64) -> Result<()> {
    if !(upper > 0.0) || upper.is_nan() {
        return Err(Error::InvalidArgument(format!("truncation radius must be positive, got {upper}")));
    }
    Ok(())
}

/// Analytic convergence check at both ends for the quadrature route.
fn check_convergence(k: &RadialKernel, lebesgue: bool, mu: &RadialMass, upper: f64, exps: &Exponents) -> Result<()> {
    let dim = match k {
        RadialKernel::Riesz { dim, .. } => Some(*dim),
        _ => None,
    };
    if let Some((e, _)) = riesz_lebesgue_parts(k, exps).filter(|_| lebesgue) {
        if mu.at_center() && e <= 0.0 {
            return Err(Error::DivergentTail { end: Endpoint::Zero, exponent: Some(e) });
        }
        if upper.is_infinite() && e >= 0.0 {
            return Err(Error::DivergentTail { end: Endpoint::Infinity, exponent: Some(e) });
        }
    }
    let support_end = kernel_support_end(k);
    if upper.is_infinite() && support_end.is_none() && k.tail_value() > 0.0 {
        // constant tail: sigma(B) ~ r^n (Lebesgue) or J ~ log r (atomic)
        let exponent = if lebesgue { dim.map(|d| d as f64).or(Some(1.0)) } else { None };
        return Err(Error::DivergentTail { end: Endpoint::Infinity, exponent });
    }
    Ok(())
}

/// First radius where a table profile drops to zero for good.
fn kernel_support_end(k: &RadialKernel) -> Option<f64> {
    match k {
        RadialKernel::Table { breaks, values } => values.iter().position(|v| *v == 0.0).map(|i| breaks[i]),
        RadialKernel::Riesz { .. } => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn quadrature(
    k: &RadialKernel,
    sigma: &SigmaProfile,
    mu: &RadialMass,
    exps: &Exponents,
    upper: f64,
    form: Form,
    dim: usize,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let pp = exps.p_prime();
    let upper = kernel_support_end(k).map_or(upper, |s| s.min(upper));
    let leb = SigmaProfile::Lebesgue { dim };
    let g = |r: f64| -> f64 {
        let m = mu.mass(r);
        if m == 0.0 {
            return 0.0;
        }
        let kr = k.eval(r);
        match form {
            Form::General => {
                let b = sigma.ball(r);
                if b == 0.0 {
                    return 0.0;
                }
                let j = sigma.j(k, r).unwrap_or(f64::INFINITY);
                kr * b * pow_pos(j / b, pp - 1.0) * pow_pos(m, pp - 1.0)
            }
            Form::Convolution => {
                let kbar = leb.j(k, r).unwrap_or(f64::INFINITY) / leb.ball(r);
                kr * pow_pos(kbar, pp - 1.0) * pow_pos(m, pp - 1.0) * r.powi(dim as i32)
            }
        }
    };

    // the integrand vanishes until both balls carry mass
    let sigma_start = match sigma {
        SigmaProfile::Lebesgue { .. } => 0.0,
        SigmaProfile::Atomic { mass, .. } => mass.dist.first().copied().unwrap_or(f64::INFINITY),
    };
    let start = match form {
        Form::General => mu.dist[0].max(sigma_start),
        Form::Convolution => mu.dist[0],
    };
    if start >= upper {
        return Ok(0.0);
    }

    let mut points: Vec<f64> = mu
        .dist
        .iter()
        .chain(sigma.breakpoints())
        .chain(k.breakpoints())
        .copied()
        .filter(|r| *r > start && *r < upper)
        .collect();
    if start > 0.0 {
        points.push(start);
    }
    if upper.is_finite() {
        points.push(upper);
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    if points.is_empty() {
        points.push(1.0);
    }

    let mut total = 0.0;
    if start == 0.0 {
        let first = points[0];
        total += sum_decades(
            |d| {
                let b = first * 10f64.powi(-(d as i32));
                integrate_log(g, b / 10.0, b, cfg)
            },
            cfg,
        );
    }
    for w in points.windows(2) {
        total += integrate_log(g, w[0], w[1], cfg);
    }
    if upper.is_infinite() {
        let last = *points.last().unwrap();
        total += sum_decades(
            |d| {
                let a = last * 10f64.powi(d as i32);
                integrate_log(g, a, a * 10.0, cfg)
            },
            cfg,
        );
    }
    Ok(total)
}

/// Continuous Wolff potential truncated at `upper` (`f64::INFINITY` for
/// the full potential).
pub fn wolff_continuous(
    k: &RadialKernel,
    sigma: &ReferenceMeasure,
    mu: &AtomicMeasure,
    exps: &Exponents,
    x: &[f64],
    upper: f64,
    method: WolffMethod,
) -> Result<f64> {
    wolff_continuous_with(k, sigma, mu, exps, x, upper, method, &QuadratureConfig::default())
}

#[allow(clippy::too_many_arguments)]
pub fn wolff_continuous_with(
    k: &RadialKernel,
    sigma: &ReferenceMeasure,
    mu: &AtomicMeasure,
    exps: &Exponents,
    x: &[f64],
    upper: f64,
    method: WolffMethod,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_upper(upper)?;
    let dim = sigma.dim();
    if x.len() != dim || mu.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: if x.len() != dim { x.len() } else { mu.dim() } });
    }
    let mu_r = RadialMass::new(mu, x);
    if mu_r.dist.is_empty() {
        return Ok(0.0);
    }
    let lebesgue = matches!(sigma, ReferenceMeasure::Lebesgue { .. });
    if method == WolffMethod::Auto && lebesgue {
        if let Some((e, pref)) = riesz_lebesgue_parts(k, exps) {
            return riesz_closed_form(&mu_r, e, unit_ball_volume(dim) * pref, exps.p_prime(), upper);
        }
    }
    let profile = SigmaProfile::new(k, sigma, x)?;
    check_convergence(k, lebesgue, &mu_r, upper, exps)?;
    quadrature(k, &profile, &mu_r, exps, upper, Form::General, dim, cfg)
}

/// Convolution-form potential with `sigma = dx`:
/// `int_0^R k(r) k̄(r)^(p'-1) mu(B(x, r))^(p'-1) r^(n-1) dr`. Equals
/// `wolff_continuous` against Lebesgue measure divided by the unit-ball
/// volume.
pub fn wolff_convolution(
    k: &RadialKernel,
    mu: &AtomicMeasure,
    exps: &Exponents,
    x: &[f64],
    upper: f64,
    method: WolffMethod,
) -> Result<f64> {
    check_upper(upper)?;
    let dim = mu.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: x.len() });
    }
    if let RadialKernel::Riesz { dim: kd, .. } = k {
        if *kd != dim {
            return Err(Error::DimensionMismatch { expected: *kd, found: dim });
        }
    }
    let mu_r = RadialMass::new(mu, x);
    if mu_r.dist.is_empty() {
        return Ok(0.0);
    }
    if method == WolffMethod::Auto {
        if let Some((e, pref)) = riesz_lebesgue_parts(k, exps) {
            return riesz_closed_form(&mu_r, e, pref, exps.p_prime(), upper);
        }
    }
    check_convergence(k, true, &mu_r, upper, exps)?;
    let leb = SigmaProfile::Lebesgue { dim };
    quadrature(k, &leb, &mu_r, exps, upper, Form::Convolution, dim, &QuadratureConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn kbar_riesz_lebesgue() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: 1 };
        assert!(rel(kbar_radial(&k, &leb, &[0.0], 4.0).unwrap(), 1.0) < 1e-14);
        let k3 = RadialKernel::riesz(1.3, 3).unwrap();
        let leb3 = ReferenceMeasure::Lebesgue { dim: 3 };
        for r in [0.1, 1.0, 17.0] {
            let v = kbar_radial(&k3, &leb3, &[0.3, -1.0, 2.0], r).unwrap();
            assert!(rel(v, k3.eval(r) / 1.3) < 1e-13);
        }
    }

    #[test]
    fn kbar_atomic() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        // atom at distance d: J(r) = w int_d^r l^(-3/2) dl = 2w (d^-1/2 - r^-1/2)
        let sigma = ReferenceMeasure::Atomic(AtomicMeasure::from_pairs(1, [(vec![0.25], 3.0)]).unwrap());
        let v = kbar_radial(&k, &sigma, &[0.0], 4.0).unwrap();
        assert!(rel(v, 2.0 * (2.0 - 0.5)) < 1e-14);
        assert!(matches!(kbar_radial(&k, &sigma, &[0.0], 0.2), Err(Error::EmptyBall)));
        assert!(matches!(
            kbar_radial(&k, &sigma, &[0.25], 1.0),
            Err(Error::DivergentTail { end: Endpoint::Zero, .. })
        ));
    }

    #[test]
    fn lbo_lebesgue_is_one() {
        let k = RadialKernel::table(vec![1.0, 2.0], vec![2.0, 1.0]).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: 2 };
        let ball = LboBall {
            center: vec![0.0, 0.0],
            radius: 3.0,
            probes: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![-2.0, 0.5]],
        };
        let r = lbo_constant(&k, &leb, &[ball]).unwrap();
        assert!(rel(r.a, 1.0) < 1e-14);
        assert_eq!(r.probes_evaluated, 3);
    }

    #[test]
    fn wolff_riesz_single_atom() {
        // p = 2, atom at distance d, mass m: m w_n a^-1 d^(2a-n) / (n - 2a)
        let (alpha, d, m) = (0.3, 0.7, 2.5);
        let k = RadialKernel::riesz(alpha, 1).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let mu = AtomicMeasure::from_pairs(1, [(vec![d], m)]).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: 1 };
        let want = m * 2.0 / alpha * d.powf(2.0 * alpha - 1.0) / (1.0 - 2.0 * alpha);
        let closed = wolff_continuous(&k, &leb, &mu, &e, &[0.0], f64::INFINITY, WolffMethod::Auto).unwrap();
        assert!(rel(closed, want) < 1e-13);
        let quad = wolff_continuous(&k, &leb, &mu, &e, &[0.0], f64::INFINITY, WolffMethod::Quadrature).unwrap();
        assert!(rel(quad, want) < 1e-6, "{quad} vs {want}");
    }

    #[test]
    fn convolution_example_is_eight() {
        let k = RadialKernel::riesz(0.25, 1).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let mu = AtomicMeasure::from_pairs(1, [(vec![1.0], 1.0)]).unwrap();
        for method in [WolffMethod::Auto, WolffMethod::Quadrature] {
            let v = wolff_convolution(&k, &mu, &e, &[0.0], f64::INFINITY, method).unwrap();
            assert!(rel(v, 8.0) < 1e-8, "{method:?}: {v}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let k = RadialKernel::riesz(0.75, 1).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let mu = AtomicMeasure::from_pairs(1, [(vec![1.0], 1.0)]).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: 1 };
        for method in [WolffMethod::Auto, WolffMethod::Quadrature] {
            let r = wolff_continuous(&k, &leb, &mu, &e, &[0.0], f64::INFINITY, method);
            assert!(matches!(r, Err(Error::DivergentTail { end: Endpoint::Infinity, .. })), "{r:?}");
        }
        // truncated version is finite
        assert!(wolff_continuous(&k, &leb, &mu, &e, &[0.0], 4.0, WolffMethod::Auto).unwrap() > 0.0);
        // atom at the center: the head diverges when (alpha - n) p' + n <= 0
        let k = RadialKernel::riesz(0.25, 1).unwrap();
        let r = wolff_continuous(&k, &leb, &mu, &e, &[1.0], 2.0, WolffMethod::Quadrature);
        assert!(matches!(r, Err(Error::DivergentTail { end: Endpoint::Zero, .. })));
    }

    #[test]
    fn empty_mu_is_zero() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        let e = Exponents::new(2.0, 1.0).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: 1 };
        let empty = AtomicMeasure::empty(1);
        assert_eq!(wolff_continuous(&k, &leb, &empty, &e, &[0.0], 1.0, WolffMethod::Auto).unwrap(), 0.0);
        assert_eq!(wolff_convolution(&k, &empty, &e, &[0.0], 1.0, WolffMethod::Auto).unwrap(), 0.0);
    }
}
