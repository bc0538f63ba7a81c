// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use wolff_trace::continuum::{
    compare_continuum, energy_continuous, kbar_radial, lbo_constant, potential_at, shifted_energy_sup,
    sample_shifts, unit_ball_volume, wolff_continuous, wolff_convolution, LboBall, MonteCarloConfig, RadialKernel,
    ReferenceMeasure, WolffMethod,
};
use wolff_trace::{AtomicMeasure, Error, Exponents};

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Riesz potential against Lebesgue measure written out directly:
/// `omega_n alpha^(1-p') sum_i M_i^(p'-1) int_{d_i}^{d_{i+1}} r^(e-1) dr`
/// with `e = (alpha - n) p' + n` and `M_i` the mass within `d_i`.
fn riesz_oracle(alpha: f64, n: usize, mu: &[(Vec<f64>, f64)], pp: f64, x: &[f64], upper: f64) -> f64 {
    let e = (alpha - n as f64) * pp + n as f64;
    let mut d: Vec<(f64, f64)> = mu
        .iter()
        .map(|(y, w)| (y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), *w))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut mass = 0.0;
    for i in 0..d.len() {
        mass += d[i].1;
        let lo = d[i].0.min(upper);
        let hi = if i + 1 < d.len() { d[i + 1].0 } else { f64::INFINITY }.min(upper);
        let hp = if hi.is_infinite() { 0.0 } else { hi.powf(e) };
        total += mass.powf(pp - 1.0) * (hp - lo.powf(e)) / e;
    }
    unit_ball_volume(n) * alpha.powf(1.0 - pp) * total
}

fn atoms_strategy() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, f64)>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((prop::collection::vec(-1.0f64..1.0, n), 0.1f64..2.0), 1..5),
            prop::collection::vec(-1.0f64..1.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn riesz_closed_form_matches_oracle_and_quadrature(
        (n, mu, x) in atoms_strategy(),
        t in 0.1f64..0.4,
        p in 1.6f64..2.5,
    ) {
        let alpha = t * n as f64;
        let k = RadialKernel::riesz(alpha, n).unwrap();
        let e = Exponents::new(p, 1.0).unwrap();
        let m = AtomicMeasure::from_pairs(n, mu.clone()).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: n };
        prop_assume!(mu.iter().all(|(y, _)| y != &x));
        let closed = wolff_continuous(&k, &leb, &m, &e, &x, f64::INFINITY, WolffMethod::Auto).unwrap();
        let oracle = riesz_oracle(alpha, n, &mu, e.p_prime(), &x, f64::INFINITY);
        prop_assert!(close(closed, oracle, 1e-12), "{closed} vs {oracle}");
        let quad = wolff_continuous(&k, &leb, &m, &e, &x, f64::INFINITY, WolffMethod::Quadrature).unwrap();
        prop_assert!(close(closed, quad, 1e-6), "{closed} vs {quad}");
    }

    #[test]
    fn convolution_form_is_lebesgue_form_over_ball_volume(
        (n, mu, x) in atoms_strategy(),
        t in 0.1f64..0.4,
        p in 1.6f64..2.5,
        upper in prop::sample::select(vec![0.5, 2.0, f64::INFINITY]),
    ) {
        let alpha = t * n as f64;
        let k = RadialKernel::riesz(alpha, n).unwrap();
        let e = Exponents::new(p, 1.0).unwrap();
        let m = AtomicMeasure::from_pairs(n, mu.clone()).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: n };
        prop_assume!(mu.iter().all(|(y, _)| y != &x));
        for method in [WolffMethod::Auto, WolffMethod::Quadrature] {
            let conv = wolff_convolution(&k, &m, &e, &x, upper, method).unwrap();
            let full = wolff_continuous(&k, &leb, &m, &e, &x, upper, method).unwrap();
            prop_assert!(close(unit_ball_volume(n) * conv, full, 1e-10), "{method:?}: {conv} vs {full}");
        }
    }

    #[test]
    fn truncations_increase_to_the_full_potential(
        (n, mu, x) in atoms_strategy(),
        t in 0.1f64..0.4,
        p in 1.6f64..2.5,
    ) {
        let alpha = t * n as f64;
        let k = RadialKernel::riesz(alpha, n).unwrap();
        let e = Exponents::new(p, 1.0).unwrap();
        let pp = e.p_prime();
        let m = AtomicMeasure::from_pairs(n, mu.clone()).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: n };
        prop_assume!(mu.iter().all(|(y, _)| y != &x));
        let full = wolff_continuous(&k, &leb, &m, &e, &x, f64::INFINITY, WolffMethod::Auto).unwrap();
        let mut prev = 0.0;
        for r in [0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 16.0] {
            let w = wolff_continuous(&k, &leb, &m, &e, &x, r, WolffMethod::Auto).unwrap();
            prop_assert!(w >= prev && w <= full * (1.0 + 1e-12));
            prop_assert!(close(w, riesz_oracle(alpha, n, &mu, pp, &x, r), 1e-12));
            prev = w;
        }
        // beyond every atom, the remainder is the pure power tail
        let big = 16.0f64;
        let expo = (alpha - n as f64) * pp + n as f64;
        let total: f64 = mu.iter().map(|(_, w)| w).sum();
        let tail = unit_ball_volume(n) * alpha.powf(1.0 - pp) * total.powf(pp - 1.0) * big.powf(expo) / -expo;
        let w_big = wolff_continuous(&k, &leb, &m, &e, &x, big, WolffMethod::Quadrature).unwrap();
        let remainder = full - wolff_continuous(&k, &leb, &m, &e, &x, big, WolffMethod::Auto).unwrap();
        prop_assert!(close(remainder, tail, 1e-8), "{remainder} vs {tail}");
        prop_assert!(close(w_big, full - tail, 1e-6));
    }

    #[test]
    fn lbo_estimate_grows_with_probes(
        sigma in prop::collection::vec((-1.0f64..1.0, 0.1f64..2.0), 2..8),
        probes in prop::collection::vec(-0.5f64..0.5, 2..12),
        radius in 0.2f64..1.5,
    ) {
        let k = RadialKernel::riesz(0.5, 1).unwrap();
        let s = ReferenceMeasure::Atomic(AtomicMeasure::from_pairs(1, sigma.iter().map(|(x, w)| (vec![*x], *w))).unwrap());
        let mut prev = 1.0;
        for m in 1..=probes.len() {
            let ball = LboBall { center: vec![0.0], radius, probes: probes[..m].iter().map(|y| vec![*y]).collect() };
            let a = lbo_constant(&k, &s, &[ball]).unwrap().a;
            prop_assert!(a >= prev);
            prev = a;
        }
    }

    #[test]
    fn riesz_dilations_compose(c1 in 0.1f64..10.0, c2 in 0.1f64..10.0, r in 0.01f64..10.0, alpha in 0.1f64..0.9) {
        let k = RadialKernel::riesz(alpha, 1).unwrap();
        let twice = k.dilate(c1).unwrap().dilate(c2).unwrap();
        let once = k.dilate(c1 * c2).unwrap();
        prop_assert!(close(twice.eval(r), once.eval(r), 1e-12));
        prop_assert!(close(once.eval(r), k.eval(c1 * c2 * r), 1e-12));
    }
}

#[test]
fn table_dilation_is_exact_off_the_breaks() {
    let k = RadialKernel::table(vec![0.25, 0.5, 1.0, 3.0], vec![4.0, 2.0, 1.0, 0.0]).unwrap();
    for c in [0.25, 0.5, 2.0, 3.0] {
        let kc = k.dilate(c).unwrap();
        for r in [0.05, 0.3, 0.7, 1.2, 2.9, 5.0] {
            // skip radii within rounding of a break
            if [0.5, 1.0, 3.0].iter().any(|b| (c * r - b).abs() < 1e-9) {
                continue;
            }
            assert_eq!(kc.eval(r), k.eval(c * r));
        }
    }
}

#[test]
fn riesz_lebesgue_average_is_profile_over_alpha() {
    for n in 1..=3 {
        let alpha = 0.5 * n as f64;
        let k = RadialKernel::riesz(alpha, n).unwrap();
        let leb = ReferenceMeasure::Lebesgue { dim: n };
        for r in [0.01, 0.3, 1.0, 7.0] {
            let v = kbar_radial(&k, &leb, &vec![0.2; n], r).unwrap();
            assert!(close(v, k.eval(r) / alpha, 1e-12));
        }
        let ball = LboBall { center: vec![0.0; n], radius: 1.0, probes: vec![vec![0.0; n], vec![0.3; n], vec![-0.2; n]] };
        let a = lbo_constant(&k, &leb, &[ball]).unwrap().a;
        assert!(close(a, 1.0, 1e-12));
    }
}

#[test]
fn atomic_energy_is_a_finite_sum() {
    let k = RadialKernel::riesz(0.5, 1).unwrap();
    let e = Exponents::new(2.0, 1.0).unwrap();
    let mu = AtomicMeasure::from_pairs(1, [(vec![0.0], 1.0), (vec![1.0], 2.0)]).unwrap();
    let sigma = AtomicMeasure::from_pairs(1, [(vec![0.25], 0.5), (vec![4.0], 1.5)]).unwrap();
    let t = |y: f64| y.abs().powf(-0.5) + 2.0 * (y - 1.0).abs().powf(-0.5);
    let want = 0.5 * t(0.25).powi(2) + 1.5 * t(4.0).powi(2);
    let got = energy_continuous(&k, &ReferenceMeasure::Atomic(sigma), &mu, &e, None).unwrap();
    assert!(close(got.value, want, 1e-14) && got.std_error.is_none());
    assert_eq!(potential_at(&k, &mu, &[1.0]), None);
    let hit = AtomicMeasure::from_pairs(1, [(vec![1.0], 1.0)]).unwrap();
    assert!(matches!(
        energy_continuous(&k, &ReferenceMeasure::Atomic(hit), &mu, &e, None),
        Err(Error::SingularEvaluation { atom: 0 })
    ));
}

#[test]
fn monte_carlo_is_exact_for_constant_potentials() {
    // k = 1 on [0, 10): T[mu] = total mass on the unit square
    let k = RadialKernel::table(vec![1.0, 10.0], vec![1.0, 0.0]).unwrap();
    let e = Exponents::new(3.0, 1.0).unwrap();
    let mu = AtomicMeasure::from_pairs(2, [(vec![0.5, 0.5], 0.75), (vec![0.1, 0.9], 1.25)]).unwrap();
    let mc = MonteCarloConfig { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0], samples: 2_000, seed: 3 };
    let got = energy_continuous(&k, &ReferenceMeasure::Lebesgue { dim: 2 }, &mu, &e, Some(&mc)).unwrap();
    assert!(close(got.value, 2f64.powf(1.5), 1e-12), "{got:?}");
    assert!(got.std_error.unwrap() <= 1e-12);
}

#[test]
fn shifted_supremum_is_deterministic_and_dominates_each_shift() {
    let k = RadialKernel::riesz(0.5, 1).unwrap();
    let e = Exponents::new(2.0, 1.0).unwrap();
    let sigma = AtomicMeasure::from_pairs(1, (0..16).map(|i| (vec![(i as f64 + 0.5) / 16.0], 1.0 / 16.0))).unwrap();
    let mu = AtomicMeasure::from_pairs(1, [(vec![0.3], 1.0), (vec![0.71], 0.5)]).unwrap();
    let z = sample_shifts(1, 8, 0, 9);
    assert_eq!(z[0], vec![0.0]);
    let s = shifted_energy_sup(&k, &sigma, &mu, &e, &z, -5, 0).unwrap();
    assert!(s.per_shift.iter().all(|v| *v <= s.sup));
    let a = compare_continuum(&k, &sigma, &mu, &e, 8, 9, -5, 0).unwrap();
    let b = compare_continuum(&k, &sigma, &mu, &e, 8, 9, -5, 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.shifted_energy_sup, s.sup);
    assert!(close(a.ratio, a.energy_continuous / a.shifted_energy_sup, 0.0));
}
