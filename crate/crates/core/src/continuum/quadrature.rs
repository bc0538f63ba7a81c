// SPDX-License-Identifier: Apache-2.0

//! Composite Simpson rule in `u = ln r` for integrals `int g(r) dr / r`,
//! with decade-by-decade extension towards `0` and `inf`.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Initial Simpson intervals per decade of `r`.
    pub nodes_per_decade: usize,
    /// Refinement stops when successive doublings differ by less than this,
    /// relative.
    pub rel_tol: f64,
    /// Cap on decades walked by an extension before extrapolating.
    pub max_decades: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { nodes_per_decade: 64, rel_tol: 1e-8, max_decades: 200 }
    }
}

const MAX_INTERVALS: usize = 1 << 22;
/// Endpoint nodes are pulled this far (relative) into the open interval so
/// one-sided limits at jump points are respected.
const EDGE: f64 = 1e-13;

fn simpson(g: &impl Fn(f64) -> f64, ua: f64, ub: f64, n: usize) -> f64 {
    let h = (ub - ua) / n as f64;
    let at = |k: usize| {
        let u = if k == 0 {
            ua + EDGE * (ub - ua)
        } else if k == n {
            ub - EDGE * (ub - ua)
        } else {
            ua + h * k as f64
        };
        g(u.exp())
    };
    let mut s = at(0) + at(n);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 * at(k) } else { 2.0 * at(k) };
    }
    s * h / 3.0
}

/// `int_a^b g(r) dr / r` for `0 < a < b < inf`, `g` smooth on `(a, b)`.
pub fn integrate_log(g: impl Fn(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> f64 {
    if !(a < b) {
        return 0.0;
    }
    let (ua, ub) = (a.ln(), b.ln());
    let decades = (ub - ua) / std::f64::consts::LN_10;
    let mut n = ((decades * cfg.nodes_per_decade as f64).ceil() as usize).max(4);
    n += n % 2;
    let mut prev = simpson(&g, ua, ub, n);
    loop {
        n *= 2;
        let cur = simpson(&g, ua, ub, n);
        if (cur - prev).abs() <= cfg.rel_tol * cur.abs() || cur == prev || n >= MAX_INTERVALS {
            return cur;
        }
        prev = cur;
    }
}

/// Sum of the decade integrals `I_1, I_2, ...` produced by `piece(k)`,
/// stopping when a term is negligible. If the terms settle into a geometric
/// progression with ratio `rho < 1` (power-law integrand), the remainder is
/// added in closed form `I_k rho / (1 - rho)`.
pub fn sum_decades(mut piece: impl FnMut(usize) -> f64, cfg: &QuadratureConfig) -> f64 {
    let mut total = 0.0;
    let mut last: Option<f64> = None;
    let mut last_rho: Option<f64> = None;
    for k in 0..cfg.max_decades {
        let ik = piece(k);
        total += ik;
        if ik == 0.0 && k > 0 && last == Some(0.0) {
            return total;
        }
        if ik.abs() <= 1e-15 * total.abs() {
            return total;
        }
        if let Some(prev) = last {
            if prev > 0.0 {
                let rho = ik / prev;
                if let Some(r0) = last_rho {
                    if rho < 1.0 && (rho - r0).abs() <= 1e-7 * rho.abs() {
                        return total + ik * rho / (1.0 - rho);
                    }
                }
                last_rho = Some(rho);
            }
        }
        last = Some(ik);
    }
    // no clean geometric regime within the cap; extrapolate from the tail
    match (last, last_rho) {
        (Some(ik), Some(rho)) if rho < 1.0 => total + ik * rho / (1.0 - rho),
        _ => total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_pieces() {
        let cfg = QuadratureConfig::default();
        // int_1^8 r^2 dr/r = (64 - 1)/2
        let v = integrate_log(|r| r * r, 1.0, 8.0, &cfg);
        assert!((v - 31.5).abs() < 1e-9 * 31.5, "{v}");
        // int_1^inf r^-1/2 dr/r = 2, by decades
        let tail = sum_decades(
            |k| {
                let a = 10f64.powi(k as i32);
                integrate_log(|r| r.powf(-0.5), a, 10.0 * a, &cfg)
            },
            &cfg,
        );
        assert!((tail - 2.0).abs() < 1e-9, "{tail}");
    }
}
