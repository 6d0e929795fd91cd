use heatlab_core::heatdet::*;
use heatlab_core::models::ModelOperator;
use heatlab_core::series::{expansion_fit, powers};
use num_complex::Complex64;
use num_rational::Rational64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn torus(g: [[f64; 2]; 2], twist: Vec<f64>) -> ModelOperator {
    ModelOperator::FlatTorus { inverse_metric: vec![g[0].to_vec(), g[1].to_vec()], twist, mass2: 0.0 }
}

#[test]
fn defining_integral_matches_spectral_on_circles() {
    let models = [
        ModelOperator::circle(1.0),
        ModelOperator::Circle { radius: 0.7, twist: 0.5, mass2: 0.3 },
        ModelOperator::Circle { radius: 1.6, twist: 0.2, mass2: 0.0 },
    ];
    for m in &models {
        for &t in &[0.1, 0.5, 1.0] {
            let s = heat_det(m, t, HeatDetOptions::default()).unwrap().value;
            let d = heat_det_defining(m, t, 40).unwrap().value;
            assert!((s - d).abs() <= 1e-8 * s, "{m:?} {t} {s} {d}");
        }
    }
}

#[test]
fn defining_integral_matches_spectral_on_a_torus() {
    let m = torus([[1.0, 0.3], [0.3, 1.5]], vec![0.25, 0.0]);
    let s = heat_det(&m, 0.5, HeatDetOptions::default()).unwrap().value;
    let d = heat_det_defining(&m, 0.5, 9).unwrap().value;
    assert!((s - d).abs() <= 1e-8 * s, "{s} {d}");
}

/// Independent oracle: ∫ Φ^{k₁}_{l₁} ∧ Φ^{k₂}_{l₂} by a midpoint rule on the unit-metric torus.
fn two_form_oracle(k1: [i64; 2], k2: [i64; 2], l1: [i64; 2], l2: [i64; 2]) -> Complex64 {
    let m = 32;
    let h = 2.0 * PI / m as f64;
    let vol = 4.0 * PI * PI;
    let phi = |k: [i64; 2], x: f64, y: f64| Complex64::from_polar(1.0 / vol.sqrt(), k[0] as f64 * x + k[1] as f64 * y);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            // components of Φ^k_l = φ_k* ∂_μ φ_l dx^μ
            let f = |k: [i64; 2], l: [i64; 2], mu: usize| {
                phi(k, x, y).conj() * phi(l, x, y) * Complex64::new(0.0, l[mu] as f64)
            };
            acc += f(k1, l1, 0) * f(k2, l2, 1) - f(k1, l1, 1) * f(k2, l2, 0);
        }
    }
    acc * h * h
}

#[test]
fn torus_correlators_against_two_form_integral() {
    let set = correlators(&torus([[1.0, 0.0], [0.0, 1.0]], vec![]), 2).unwrap();
    let cases = [
        ([1, 0], [0, 1], [1, 0], [0, 1]),
        ([1, 1], [0, 0], [1, 0], [0, 1]),
        ([2, -1], [0, 1], [1, 1], [1, -1]),
        ([1, 0], [1, 0], [1, 0], [0, 1]),
    ];
    for (k1, k2, l1, l2) in cases {
        let want = two_form_oracle(k1, k2, l1, l2);
        let got = set.get(&[k1.to_vec(), k2.to_vec()], &[l1.to_vec(), l2.to_vec()]);
        assert!((got - want).norm() < 1e-12, "{k1:?}{k2:?}{l1:?}{l2:?} {got} {want}");
    }
}

#[test]
fn torus_correlators_are_antisymmetric() {
    let set = correlators(&torus([[1.0, 0.2], [0.2, 2.0]], vec![0.5, 0.0]), 2).unwrap();
    assert!(!set.entries.is_empty());
    for e in &set.entries {
        let k: Vec<Vec<i64>> = vec![e.k[1].clone(), e.k[0].clone()];
        let l: Vec<Vec<i64>> = vec![e.l[1].clone(), e.l[0].clone()];
        assert_eq!(set.get(&k, &l), -e.value);
        let sk: Vec<i64> = (0..2).map(|i| e.k[0][i] + e.k[1][i]).collect();
        let sl: Vec<i64> = (0..2).map(|i| e.l[0][i] + e.l[1][i]).collect();
        assert_eq!(sk, sl);
    }
}

#[test]
fn circle_leading_fit_and_odd_coefficient() {
    let c = ModelOperator::circle(1.0);
    let samples: Vec<(f64, f64)> = (0..10)
        .map(|i| {
            let t = 1e-4 * 10f64.powf(i as f64 / 9.0);
            (t, heat_det(&c, t, HeatDetOptions::default()).unwrap().value)
        })
        .collect();
    let r = |n, d| Rational64::new(n, d);
    let fit = expansion_fit(&samples, &powers(&[r(-3, 2), r(-1, 1), r(-1, 2), r(0, 1)])).unwrap();
    let lead = fit.series.coefficient(r(-3, 2), 0).unwrap();
    let odd = fit.series.coefficient(r(-1, 1), 0).unwrap();
    let want = heat_det_leading(1, 1, 2.0 * PI);
    // independent Gaussian-moment value √π/(2·2^{3/2})
    assert!((want - PI.sqrt() / (2.0 * 2f64.powf(1.5))).abs() < 1e-15);
    assert!((lead / want - 1.0).abs() < 5e-3, "{lead} {want}");
    assert!(odd.abs() <= 1e-6 * lead, "{odd}");
}

#[test]
fn torus_leading_coefficient() {
    let g = [[1.0, 0.3], [0.3, 1.5]];
    let m = torus(g, vec![]);
    let t = 0.06;
    let k = heat_det(&m, t, HeatDetOptions::default()).unwrap().value;
    let want = heat_det_leading(2, 1, m.volume());
    // independent Gaussian-moment evaluation for G = I gives 1/(512π)
    assert!((heat_det_leading(2, 1, 4.0 * PI * PI) - 1.0 / (512.0 * PI)).abs() < 1e-15);
    assert!((k * t.powi(5) / want - 1.0).abs() < 1e-6, "{} {want}", k * t.powi(5));
}

#[test]
fn leading_is_linear_in_fiber_power() {
    assert!((heat_det_leading(1, 2, 2.0 * PI) - 2.0 * heat_det_leading(1, 1, 2.0 * PI)).abs() < 1e-15);
    assert!((heat_det_leading(2, 2, 1.0) - 4.0 * heat_det_leading(2, 1, 1.0)).abs() < 1e-15);
}

#[test]
fn budget_gates_the_torus() {
    let m = torus([[1.0, 0.0], [0.0, 1.0]], vec![]);
    let opts = HeatDetOptions { budget: 1000, ..Default::default() };
    assert!(matches!(heat_det(&m, 0.01, opts), Err(heatlab_core::error::Error::BudgetExceeded { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_and_decreasing(t in 0.001f64..5.0, r in 0.3f64..3.0, dt in 0.01f64..1.0) {
        let c = ModelOperator::Circle { radius: r, twist: 0.0, mass2: 0.0 };
        let a = heat_det(&c, t, HeatDetOptions::default()).unwrap().value;
        let b = heat_det(&c, t + dt, HeatDetOptions::default()).unwrap().value;
        prop_assert!(a > 0.0 && b > 0.0 && b < a);
    }
}
