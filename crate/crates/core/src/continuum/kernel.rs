// SPDX-License-Identifier: Apache-2.0

//! Radial profiles `r -> k(r)` and the reference measures they act against.

use crate::error::{Endpoint, Error, Result};
use crate::lattice::{AtomicMeasure, BallMode};

/// Nonincreasing profile on `(0, inf)`.
///
/// `Riesz` is `scale * r^(alpha - n)`; dilations fold into `scale`.
/// `Table` is a right-continuous step function: `k(r) = values[i]` for
/// `breaks[i] <= r < breaks[i + 1]`, `values[0]` below the first break and
/// the last value beyond the last break. A trailing zero value gives the
/// profile compact support.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialKernel {
    Riesz { alpha: f64, dim: usize, scale: f64 },
    Table { breaks: Vec<f64>, values: Vec<f64> },
}

impl RadialKernel {
    pub fn riesz(alpha: f64, dim: usize) -> Result<Self> {
        if dim == 0 || !(alpha > 0.0 && alpha < dim as f64) {
            return Err(Error::InvalidKernel(format!(
                "Riesz kernel needs 0 < alpha < n, got alpha = {alpha}, n = {dim}"
            )));
        }
        Ok(RadialKernel::Riesz { alpha, dim, scale: 1.0 })
    }

    pub fn table(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::InvalidKernel(
                "table needs matching, nonempty breakpoint and value lists".into(),
            ));
        }
        if !(breaks[0] > 0.0) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidKernel("breakpoints must be finite and positive".into()));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidKernel("breakpoints must be strictly ascending".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(values[0] > 0.0) {
            return Err(Error::InvalidKernel("values must be finite, nonnegative, first positive".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidKernel("values must be nonincreasing".into()));
        }
        Ok(RadialKernel::Table { breaks, values })
    }

    /// `k(r)`; at `r = 0` this is `lim k(0+)`, infinite for Riesz.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialKernel::Riesz { alpha, dim, scale } => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    scale * r.powf(alpha - *dim as f64)
                }
            }
            RadialKernel::Table { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= r);
                values[i.saturating_sub(1)]
            }
        }
    }

    /// `k_c(r) = k(c r)`.
    pub fn dilate(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("dilation must be positive, got {c}")));
        }
        Ok(match self {
            RadialKernel::Riesz { alpha, dim, scale } => RadialKernel::Riesz {
                alpha: *alpha,
                dim: *dim,
                scale: scale * c.powf(alpha - *dim as f64),
            },
            RadialKernel::Table { breaks, values } => RadialKernel::Table {
                breaks: breaks.iter().map(|b| b / c).collect(),
                values: values.clone(),
            },
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            RadialKernel::Riesz { alpha, dim, scale } => RadialKernel::Riesz {
                alpha: *alpha,
                dim: *dim,
                scale: scale * c,
            },
            RadialKernel::Table { breaks, values } => RadialKernel::Table {
                breaks: breaks.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
        }
    }

    /// Radii where the profile jumps.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            RadialKernel::Riesz { .. } => &[],
            RadialKernel::Table { breaks, .. } => &breaks[1..],
        }
    }

    /// `lim_{r -> inf} k(r)`.
    pub fn tail_value(&self) -> f64 {
        match self {
            RadialKernel::Riesz { .. } => 0.0,
            RadialKernel::Table { values, .. } => *values.last().unwrap(),
        }
    }

    /// `int_a^b k(l) l^(beta - 1) dl` in closed form, `0 <= a <= b <= inf`.
    pub fn power_integral(&self, a: f64, b: f64, beta: f64) -> Result<f64> {
        debug_assert!(a >= 0.0 && a <= b);
        if a == b {
            return Ok(0.0);
        }
        match self {
            RadialKernel::Riesz { alpha, dim, scale } => {
                let gamma = alpha - *dim as f64 + beta;
                Ok(scale * power_piece(a, b, gamma)?)
            }
            RadialKernel::Table { breaks, values } => {
                let mut total = 0.0;
                let m = breaks.len();
                for i in 0..m {
                    let lo = if i == 0 { 0.0 } else { breaks[i] };
                    let hi = if i + 1 < m { breaks[i + 1] } else { f64::INFINITY };
                    let (pa, pb) = (a.max(lo), b.min(hi));
                    if pa >= pb || values[i] == 0.0 {
                        continue;
                    }
                    total += values[i] * power_piece(pa, pb, beta)?;
                }
                Ok(total)
            }
        }
    }
}

/// `int_a^b l^(gamma - 1) dl`.
pub(crate) fn power_piece(a: f64, b: f64, gamma: f64) -> Result<f64> {
    if a == 0.0 && gamma <= 0.0 {
        return Err(Error::DivergentTail { end: Endpoint::Zero, exponent: Some(gamma) });
    }
    if b.is_infinite() && gamma >= 0.0 {
        return Err(Error::DivergentTail { end: Endpoint::Infinity, exponent: Some(gamma) });
    }
    if gamma == 0.0 {
        return Ok((b / a).ln());
    }
    let bp = if b.is_infinite() { 0.0 } else { b.powf(gamma) };
    let ap = if a == 0.0 { 0.0 } else { a.powf(gamma) };
    Ok((bp - ap) / gamma)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    let (mut v, start) = if n % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Reference measure `sigma` of the continuous theory.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceMeasure {
    Atomic(AtomicMeasure),
    Lebesgue { dim: usize },
}

impl ReferenceMeasure {
    pub fn dim(&self) -> usize {
        match self {
            ReferenceMeasure::Atomic(m) => m.dim(),
            ReferenceMeasure::Lebesgue { dim } => *dim,
        }
    }

    /// Open-ball mass `sigma(B(x, r))`.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        match self {
            ReferenceMeasure::Atomic(m) => m.ball_measure(x, r, BallMode::Open),
            ReferenceMeasure::Lebesgue { dim } => unit_ball_volume(*dim) * r.powi(*dim as i32),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn table_eval_is_right_continuous() {
        let k = RadialKernel::table(vec![1.0, 2.0, 3.0], vec![4.0, 2.0, 0.0]).unwrap();
        assert_eq!(k.eval(0.5), 4.0);
        assert_eq!(k.eval(1.999), 4.0);
        assert_eq!(k.eval(2.0), 2.0);
        assert_eq!(k.eval(3.0), 0.0);
        assert_eq!(k.eval(0.0), 4.0);
    }

    #[test]
    fn table_rejects_increasing_values() {
        assert!(RadialKernel::table(vec![1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(RadialKernel::table(vec![2.0, 1.0], vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn dilation_examples() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        assert_eq!(k.dilate(1.0).unwrap(), k);
        let k2 = k.dilate(2.0).unwrap();
        for r in [0.1, 1.0, 7.0] {
            let want = 2f64.powf(-0.5) * k.eval(r);
            assert!((k2.eval(r) - want).abs() <= 1e-15 * want);
            assert!((k2.eval(r) - k.eval(2.0 * r)).abs() <= 1e-14 * want);
        }
        let a = k.dilate(2.0).unwrap().dilate(3.0).unwrap();
        let b = k.dilate(6.0).unwrap();
        assert!((a.eval(1.3) - b.eval(1.3)).abs() < 1e-14);

        let t = RadialKernel::table(vec![1.0, 2.0], vec![3.0, 1.0]).unwrap();
        let td = t.dilate(2.0).unwrap();
        for r in [0.2, 0.6, 0.99, 1.0, 1.5] {
            assert_eq!(td.eval(r), t.eval(2.0 * r));
        }
    }

    #[test]
    fn power_integrals() {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        // int_0^4 l^{-1/2} l^{0} dl = 2 * 4^{1/2}
        assert!((k.power_integral(0.0, 4.0, 1.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(
            k.power_integral(0.0, 1.0, 0.0),
            Err(Error::DivergentTail { end: Endpoint::Zero, .. })
        ));
        // int_1^inf l^{-3/2} dl = 2
        assert!((k.power_integral(1.0, f64::INFINITY, 0.0).unwrap() - 2.0).abs() < 1e-14);

        let t = RadialKernel::table(vec![1.0, 2.0], vec![3.0, 0.0]).unwrap();
        // int_0^inf k(l) l dl = 3 * 2^2 / 2
        assert_eq!(t.power_integral(0.0, f64::INFINITY, 2.0).unwrap(), 6.0);
        assert!(t.power_integral(0.0, 1.0, 0.0).is_err());
    }
}
