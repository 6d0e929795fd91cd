use heatlab_core::magnetic::{landau_check, u0_kernel, MagneticModel};
use heatlab_core::numeric::quad::gauss_legendre;
use heatlab_core::series::expansion_fit;
use heatlab_core::weyl::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_model(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> WeylModel {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5));
    let g = &a * a.transpose() + DMatrix::identity(n, n);
    let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut curv: DMatrix<f64> = &r - r.transpose();
    let norm = (curv.transpose() * &curv).symmetric_eigen().eigenvalues.max().sqrt().max(1e-12);
    curv *= rng.gen_range(0.2..radius) / norm;
    WeylModel::new(g, curv).unwrap()
}

/// Single kernel from d_matrix and omega_single, evaluated without the library formula.
struct Single {
    d: DMatrix<f64>,
    curv: DMatrix<f64>,
    pref: f64,
}

impl Single {
    fn new(m: &WeylModel, t: f64) -> Self {
        let n = m.n as f64;
        Self { d: d_matrix(m, t).unwrap(), curv: m.curv.clone(), pref: (4.0 * PI).powf(-n / 2.0) * omega_single(m, t).unwrap() }
    }

    fn eval(&self, x: &DVector<f64>, xp: &DVector<f64>) -> Complex64 {
        let u = xp - x;
        Complex64::new(-0.25 * u.dot(&(&self.d * &u)), -0.5 * xp.dot(&(&self.curv * x))).exp() * self.pref
    }
}

#[test]
fn semigroup_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..20 {
        let n = 1 + i % 3;
        let m = random_model(&mut rng, n, 2.0);
        let p = WeylPair::new(m.clone(), m.clone()).unwrap();
        let (t, s) = (rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pair = convolution_kernel(&p, t, s, &x, &y).unwrap();
        let single = single_kernel(&m, t + s, &x, &y).unwrap();
        assert!((pair - single).norm() <= 1e-12 * single.norm(), "{pair} {single}");
    }
}

fn numeric_convolution(p: &WeylPair, t: f64, s: f64, x: &[f64], xp: &[f64]) -> Complex64 {
    let up = Single::new(&p.plus, t);
    let um = Single::new(&p.minus, s);
    let xv = DVector::from_column_slice(x);
    let xpv = DVector::from_column_slice(xp);
    let (gx, gw) = gauss_legendre(16);
    let (lo, hi, panels) = (-14.0, 14.0, 56);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::new();
    for k in 0..panels {
        let a = lo + k as f64 * h;
        for (xi, wi) in gx.iter().zip(&gw) {
            nodes.push((a + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &(y1, w1) in &nodes {
        for &(y2, w2) in &nodes {
            let y = DVector::from_vec(vec![y1, y2]);
            acc += up.eval(&xv, &y) * um.eval(&y, &xpv) * (w1 * w2);
        }
    }
    acc
}

#[test]
fn closed_kernel_matches_numeric_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let p = WeylPair::new(random_model(&mut rng, 2, 2.0), random_model(&mut rng, 2, 2.0)).unwrap();
        let (t, s) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let closed = convolution_kernel(&p, t, s, &x, &y).unwrap();
        let numeric = numeric_convolution(&p, t, s, &x, &y);
        assert!((closed - numeric).norm() <= 1e-6 * numeric.norm(), "{closed} {numeric}");
    }
}

#[test]
fn equal_curvature_pair_is_symmetric() {
    let m = WeylModel::new(DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
    let p = WeylPair::new(m.clone(), m).unwrap();
    let pm = pair_matrices(&p, 0.5, 0.5).unwrap();
    assert!((&pm.a_plus - &pm.a_minus).iter().all(|z| z.norm() < 1e-14));
    let closed = convolution_kernel(&p, 0.5, 0.5, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    let numeric = numeric_convolution(&p, 0.5, 0.5, &[0.0, 0.0], &[0.0, 0.0]);
    assert!((closed - numeric).norm() <= 1e-6 * numeric.norm());
}

#[test]
fn small_s_limit_is_single_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = WeylPair::new(random_model(&mut rng, 2, 1.5), random_model(&mut rng, 2, 1.5)).unwrap();
    let x = [0.3, -0.2];
    let y = [0.1, 0.4];
    let pair = convolution_kernel(&p, 0.6, 1e-6, &x, &y).unwrap();
    let single = single_kernel(&p.plus, 0.6, &x, &y).unwrap();
    assert!((pair - single).norm() <= 1e-4 * single.norm(), "{pair} {single}");
}

#[test]
fn commuting_gaussian_b_matrix() {
    let g1 = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 1.0]);
    let g2 = DMatrix::from_row_slice(2, 2, &[0.8, -0.1, -0.1, 1.2]);
    let p = WeylPair::new(WeylModel::new(g1.clone(), DMatrix::zeros(2, 2)).unwrap(), WeylModel::new(g2.clone(), DMatrix::zeros(2, 2)).unwrap())
        .unwrap();
    let (t, s) = (0.4, 0.9);
    let m = pair_matrices(&p, t, s).unwrap();
    let gp = &g1 / t;
    let gm = &g2 / s;
    let want = &gp * (&gp + &gm).try_inverse().unwrap() * &gm;
    assert!((m.b.map(|z| z.re) - want).amax() < 1e-13);
    assert!(m.b.iter().all(|z| z.im.abs() < 1e-15));
}

#[test]
fn translation_is_an_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = random_model(&mut rng, 2, 2.0);
    let f = |x: &[f64]| Complex64::new(-(x[0] - 0.3).powi(2) - 0.5 * x[1] * x[1], 0.2 * x[0]).exp();
    let xi = [0.7, -1.1];
    let (gx, gw) = gauss_legendre(80);
    let (l, mut a, mut b) = (10.0, 0.0, 0.0);
    for (x1, w1) in gx.iter().zip(&gw) {
        for (x2, w2) in gx.iter().zip(&gw) {
            let x = [l * x1, l * x2];
            let shifted = [x[0] + xi[0], x[1] + xi[1]];
            let tf = translation_phase(&m, &xi, &x) * f(&shifted);
            a += tf.norm_sqr() * w1 * w2 * l * l;
            b += f(&x).norm_sqr() * w1 * w2 * l * l;
        }
    }
    assert!((a - b).abs() <= 1e-8 * b);
}

#[test]
fn small_t_gaussian_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = random_model(&mut rng, 3, 2.0);
    for &t in &[1e-3, 5e-4, 1e-4] {
        let err = (d_matrix(&m, t).unwrap() * t - &m.g).amax();
        assert!(err <= 10.0 * t * t, "{t} {err}");
    }
}

#[test]
fn magnetic_kernel_matches_weyl_single_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let n = 2 * rng.gen_range(1..=2);
        let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let f = &r - r.transpose();
        let w = WeylModel::new(DMatrix::identity(n, n), f.clone()).unwrap();
        let mm = MagneticModel { n, f, bundle_curv: None };
        let t = rng.gen_range(0.1..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u0 = u0_kernel(&mm, t, &x, &y).unwrap();
        let weyl = single_kernel(&w, t, &x, &y).unwrap();
        assert!((u0 - weyl.norm()).abs() <= 1e-10 * u0);
        let zero = vec![0.0; n];
        let weyl0 = single_kernel(&w, t, &zero, &y).unwrap();
        assert!((u0_kernel(&mm, t, &zero, &y).unwrap() - weyl0).norm() <= 1e-10 * weyl0.norm());
    }
}

#[test]
fn landau_identity_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let b = rng.gen_range(0.05..5.0);
        let t = rng.gen_range(0.01..3.0);
        let c = landau_check(b, t).unwrap();
        assert!(c.difference <= 1e-12, "{b} {t} {c:?}");
        let want = b / (4.0 * PI * (t * b).sinh());
        assert!((c.diagonal_value - want).abs() <= 1e-13 * want);
    }
}

#[test]
fn diagonal_ratio_has_no_odd_coefficients() {
    let b = 1.3;
    let samples: Vec<(f64, f64)> = (0..12)
        .map(|i| {
            let t = 0.02 * 1.25f64.powi(i);
            let c = landau_check(b, t).unwrap();
            let u0 = u0_kernel(&MagneticModel::planar(b), t, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
            (t, c.level_sum / u0 - 1.0)
        })
        .collect();
    let template: Vec<(Rational64, u8)> = (1..=6).map(|k| (Rational64::new(k, 2), 0)).collect();
    let fit = expansion_fit(&samples, &template).unwrap();
    for k in [1, 3] {
        let c = fit.series.coefficient(Rational64::new(k, 2), 0).unwrap();
        assert!(c.abs() <= 1e-10, "t^{k}/2 coefficient {c}");
    }
}

#[test]
fn magnetic_pair_trace_density() {
    let b = 0.8;
    let m = WeylModel::new(DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, b, -b, 0.0])).unwrap();
    let p = WeylPair::new(m.clone(), m).unwrap();
    let (t, s) = (0.4, 0.7);
    let d = trace_density(&p, t, s).unwrap();
    assert!(d.per_unit_volume);
    assert!(matches!(integrated_trace(&p, t, s), Err(heatlab_core::error::Error::NonIntegrableDiagonal)));
    let want = b / (4.0 * PI * ((t + s) * b).sinh());
    assert!((d.value.re - want).abs() < 1e-13 * want);
}

#[test]
fn scaled_density_tends_to_leading_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = WeylPair::new(random_model(&mut rng, 2, 1.5), random_model(&mut rng, 2, 1.5)).unwrap();
    let (t, s) = (0.7, 1.3);
    let gp = p.plus.g.clone().try_inverse().unwrap();
    let gm = p.minus.g.clone().try_inverse().unwrap();
    let want = (gp * t + gm * s).determinant().powf(-0.5);
    let eps = 1e-4;
    let d = trace_density(&p, eps * t, eps * s).unwrap();
    let got = d.origin_value * 4.0 * PI * eps;
    assert!((got - want).abs() <= 1e-2 * want, "{got} {want}");
}

#[test]
fn library_quadrature_matches_closed_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for n in [1, 2] {
        for _ in 0..4 {
            let p = WeylPair::new(random_model(&mut rng, n, 2.0), random_model(&mut rng, n, 2.0)).unwrap();
            let (t, s) = (rng.gen_range(0.05..1.5), rng.gen_range(0.05..1.5));
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let closed = convolution_kernel(&p, t, s, &x, &y).unwrap();
            let quad = quadrature_convolution(&p, t, s, &x, &y).unwrap();
            assert!((closed - quad).norm() <= 1e-9 * closed.norm(), "{n} {t} {s} {closed} {quad}");
        }
    }
    let p = WeylPair::new(random_model(&mut rng, 3, 1.0), random_model(&mut rng, 3, 1.0)).unwrap();
    assert!(quadrature_convolution(&p, 0.5, 0.5, &[0.0; 3], &[0.0; 3]).is_err());
}

mod properties {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn equal_members_compose_to_single_kernel(seed in any::<u64>(), n in 1usize..=3, t in 0.1f64..1.0, s in 0.1f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n, 2.0);
            let p = WeylPair::new(m.clone(), m.clone()).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pair = convolution_kernel(&p, t, s, &x, &y).unwrap();
            let single = single_kernel(&m, t + s, &x, &y).unwrap();
            prop_assert!((pair - single).norm() <= 1e-12 * single.norm(), "{pair} {single}");
        }

        #[test]
        fn kernel_at_origin_is_real(seed in any::<u64>(), t in 0.1f64..1.0, s in 0.1f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = WeylPair::new(random_model(&mut rng, 2, 2.0), random_model(&mut rng, 2, 2.0)).unwrap();
            let v = convolution_kernel(&p, t, s, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
            prop_assert!(v.re > 0.0);
            prop_assert!(v.im.abs() <= 1e-12 * v.re, "{v}");
        }
    }
}
