use heatlab_core::mellin::{a_q, standard_coefficient, zeta, ZetaMethod};
use heatlab_core::models::ModelOperator;
use heatlab_core::traces::HeatSource;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn circle(radius: f64, mass2: f64) -> HeatSource {
    ModelOperator::Circle { radius, twist: 0.0, mass2 }.into()
}

fn torus(g11: f64, g22: f64, off: f64, mass2: f64) -> HeatSource {
    ModelOperator::FlatTorus { inverse_metric: vec![vec![g11, off], vec![off, g22]], twist: vec![], mass2 }.into()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn aq_is_smooth_across_half_dimension(m2 in 0.2f64..2.0, h in 0.01f64..0.05) {
        let src = circle(1.0, m2);
        let f = |re: f64, im: f64| a_q(&src, Complex64::new(re, im), 6).unwrap().value;
        for im in [-h, 0.0, h] {
            let (l, c, r) = (f(0.5 - h, im), f(0.5, im), f(0.5 + h, im));
            prop_assert!(l.norm().is_finite() && c.norm().is_finite() && r.norm().is_finite());
            // second difference of an entire function is O(h²)
            let d2 = (l - c * 2.0 + r).norm();
            prop_assert!(d2 <= 50.0 * h * h, "second difference {d2} at h = {h}");
        }
    }

    #[test]
    fn standard_coefficients_of_massive_circle(m2 in 0.1f64..2.0) {
        let src = circle(1.0, m2);
        let mut fact = 1.0;
        for k in 0..=3u32 {
            if k > 0 {
                fact *= f64::from(k);
            }
            let exact = 2.0 * PI * (-m2).powi(k as i32) / fact;
            let got = standard_coefficient(&src, k).unwrap();
            prop_assert!((got - exact).abs() <= 1e-6 * exact.abs().max(1.0), "k = {k}: {got} vs {exact}");
        }
    }

    #[test]
    fn zeta_direct_and_continued_agree_on_circle(s in 0.55f64..1.45, r in 0.5f64..2.0, m2 in 0.1f64..2.0) {
        let src = circle(r, m2);
        let d = zeta(&src, Complex64::new(s, 0.0), 0.0, false, ZetaMethod::Direct).unwrap().value;
        let c = zeta(&src, Complex64::new(s, 0.0), 0.0, false, ZetaMethod::Continued).unwrap().value;
        prop_assert!((d - c).norm() <= 1e-8 * d.norm(), "{d} vs {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn zeta_direct_and_continued_agree_on_torus(
        s in 1.1f64..1.9,
        g11 in 0.7f64..1.5,
        g22 in 0.7f64..1.5,
        off in -0.2f64..0.2,
        m2 in 0.5f64..2.0,
    ) {
        let src = torus(g11, g22, off, m2);
        let d = zeta(&src, Complex64::new(s, 0.0), 0.0, false, ZetaMethod::Direct).unwrap().value;
        let c = zeta(&src, Complex64::new(s, 0.0), 0.0, false, ZetaMethod::Continued).unwrap().value;
        prop_assert!((d - c).norm() <= 1e-8 * d.norm(), "{d} vs {c}");
    }
}
