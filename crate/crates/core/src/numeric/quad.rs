//! Quadrature rules: adaptive Gauss–Kronrod, Gauss–Legendre and Gauss–Hermite.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;
use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
}

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).norm())
}

/// Globally adaptive G7K15 quadrature of a complex integrand on [a, b].
///
/// Stops when the summed error estimate is below max(abs_tol, rel_tol·|I|).
pub fn integrate_complex(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Quad<Complex64> {
    let mut segs: Vec<(f64, f64, Complex64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    segs.push((a, b, v, e));
    let max_segs = 4000;
    loop {
        let total: Complex64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        let target = abs_tol.max(rel_tol * total.norm());
        if err <= target || segs.len() >= max_segs {
            // sum in interval order for reproducibility
            segs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let value: Complex64 = segs.iter().map(|s| s.2).sum();
            return Quad { value, error: err, converged: err <= target };
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            segs.push((lo, hi, Complex64::new(0.0, 0.0), 0.0));
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
}

/// Globally adaptive G7K15 quadrature of a real integrand on [a, b].
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Quad<f64> {
    let q = integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, abs_tol, rel_tol);
    Quad { value: q.value.re, error: q.error, converged: q.converged }
}

/// Integral over [a, ∞) by adaptive quadrature on panels of doubling width.
///
/// Stops after two consecutive panels contribute less than the tolerance.
pub fn integrate_to_infinity(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    first_width: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Quad<f64> {
    let mut lo = a;
    let mut width = first_width;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut small = 0;
    let mut converged = true;
    for _ in 0..200 {
        let hi = lo + width;
        let q = integrate(&mut f, lo, hi, abs_tol * 1e-2, rel_tol * 1e-1);
        total += q.value;
        err += q.error;
        converged &= q.converged;
        if q.value.abs() <= abs_tol.max(rel_tol * total.abs()) * 1e-2 {
            small += 1;
            if small >= 2 {
                return Quad { value: total, error: err + q.value.abs(), converged };
            }
        } else {
            small = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Quad { value: total, error: err, converged: false }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite nodes and weights for the weight e^{−x²} on ℝ.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

/// Gaussian average π^{−d/2}∫ e^{−|u|²} f(u) du on an m^d tensor Gauss–Hermite grid.
///
/// Nodes are evaluated in parallel and summed in index order.
pub fn gauss_hermite_mean<F>(d: usize, m: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    let (x, w) = gauss_hermite(m);
    let total = m.pow(d as u32);
    let vals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut u = vec![0.0; d];
            let mut weight = 1.0;
            for ui in u.iter_mut() {
                let k = idx % m;
                idx /= m;
                *ui = x[k];
                weight *= w[k];
            }
            weight * f(&u)
        })
        .collect();
    let mut acc = crate::numeric::sum::Neumaier::new();
    for v in vals {
        acc.add(v);
    }
    acc.value() / PI.powf(d as f64 / 2.0)
}
