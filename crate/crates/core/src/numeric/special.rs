//! Gamma-family special functions on the real line and the complex plane.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// ln Γ(z) for Re z ≥ 1/2 by the Lanczos approximation.
fn ln_gamma_lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut a = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// sin(πz) with exact integer argument reduction.
pub fn sinpi(z: Complex64) -> Complex64 {
    let n = z.re.round();
    let r = Complex64::new(z.re - n, z.im);
    let s = (r * PI).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// sin(πw)/(πw), analytic at w = 0.
pub fn sinc_pi(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        let x2 = (w * PI) * (w * PI);
        1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    } else {
        sinpi(w) / (w * PI)
    }
}

/// Complex Γ(z). Poles return infinity.
pub fn gamma(z: Complex64) -> Complex64 {
    let r = rgamma(z);
    if r == Complex64::new(0.0, 0.0) {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        1.0 / r
    }
}

/// Reciprocal gamma 1/Γ(z), an entire function. Exactly zero at the poles of Γ.
pub fn rgamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Complex64::new(0.0, 0.0);
    }
    if z.re >= 0.5 {
        (-ln_gamma_lanczos(z)).exp()
    } else {
        // 1/Γ(z) = Γ(1−z) sin(πz)/π
        ln_gamma_lanczos(1.0 - z).exp() * sinpi(z) / PI
    }
}

/// 1/(Γ(z)·(z+m)) for a non-negative integer m, continuous through z = −m.
pub fn rgamma_over(z: Complex64, m: u32) -> Complex64 {
    let w = z + m as f64;
    if w.norm() < 0.25 {
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        ln_gamma_lanczos(1.0 - z).exp() * sinc_pi(w) * sign
    } else {
        rgamma(z) / w
    }
}

/// Real ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    if x >= 0.5 {
        ln_gamma_lanczos(Complex64::new(x, 0.0)).re
    } else {
        (PI / sinpi(Complex64::new(x, 0.0)).re.abs()).ln() - ln_gamma(1.0 - x)
    }
}

/// Real Γ(x).
pub fn gamma_real(x: f64) -> f64 {
    gamma(Complex64::new(x, 0.0)).re
}

/// Real 1/Γ(x).
pub fn rgamma_real(x: f64) -> f64 {
    rgamma(Complex64::new(x, 0.0)).re
}

/// Upper bound on the upper incomplete gamma function Γ(a, x) for x > max(a−1, 0).
///
/// Returns infinity where the bound does not apply.
pub fn upper_incomplete_gamma_bound(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let base = ((a - 1.0) * x.ln() - x).exp();
    if a <= 1.0 {
        base
    } else if x > a - 1.0 {
        base * x / (x - (a - 1.0))
    } else {
        f64::INFINITY
    }
}

/// e^{-x} minus its Taylor polynomial of degree j−1, computed without cancellation for small |x|.
pub fn exp_neg_tail(x: f64, j: usize) -> f64 {
    if x.abs() < 2.0 + j as f64 {
        let mut term = 1.0;
        for i in 1..=j {
            term *= -x / i as f64;
        }
        let mut sum = 0.0;
        let mut i = j;
        loop {
            sum += term;
            i += 1;
            term *= -x / i as f64;
            if term.abs() <= 1e-18 * sum.abs() || term == 0.0 {
                break;
            }
            if i > j + 400 {
                break;
            }
        }
        sum
    } else {
        let mut poly = 0.0;
        let mut term = 1.0;
        for i in 0..j {
            if i > 0 {
                term *= -x / i as f64;
            }
            poly += term;
        }
        (-x).exp() - poly
    }
}

/// Riemann zeta at real s > 1 by direct summation with an Euler–Maclaurin tail.
pub fn riemann_zeta(s: f64) -> f64 {
    let n = 20usize;
    let mut sum = 0.0;
    for k in 1..n {
        sum += (k as f64).powf(-s);
    }
    let nf = n as f64;
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Bernoulli corrections B_{2j}/(2j)! · s(s+1)…(s+2j−2) n^{-s-2j+1}
    let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0];
    let mut fact = 1.0;
    let mut rising = s;
    for (j, &bj) in b.iter().enumerate() {
        let k = 2 * (j + 1);
        fact *= ((k - 1) * k) as f64;
        sum += bj / fact * rising * nf.powf(-s - k as f64 + 1.0);
        rising *= (s + k as f64 - 1.0) * (s + k as f64);
    }
    sum
}

/// Modified Bessel function K_ν(x) for real ν and x > 0, by quadrature of
/// K_ν(x) = ∫₀^∞ e^{−x cosh u} cosh(νu) du.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let upper = {
        let mut u: f64 = 1.0;
        while x * u.cosh() - nu.abs() * u < 50.0 {
            u += 1.0;
        }
        u
    };
    let f = |u: f64| (-x * u.cosh()).exp() * (nu * u).cosh();
    crate::numeric::quad::integrate(f, 0.0, upper, 1e-15, 1e-14).value
}

fn series_or(s: f64, exact: impl Fn(f64) -> f64, series: [f64; 3]) -> f64 {
    if s.abs() < 1e-8 {
        series[0] + s * (series[1] + s * series[2])
    } else {
        exact(s.max(0.0).sqrt())
    }
}

/// x coth x as a function of s = x².
pub fn x_coth_x(s: f64) -> f64 {
    series_or(s, |x| x / x.tanh(), [1.0, 1.0 / 3.0, -1.0 / 45.0])
}

/// ln(x / sinh x) as a function of s = x².
pub fn ln_x_over_sinh(s: f64) -> f64 {
    series_or(
        s,
        |x| {
            // ln(x/sinh x) = ln(2x) − x − ln(1 − e^{−2x})
            if x > 20.0 {
                (2.0 * x).ln() - x - (-(-2.0 * x).exp()).ln_1p()
            } else {
                (x / x.sinh()).ln()
            }
        },
        [0.0, -1.0 / 6.0, 1.0 / 180.0],
    )
}

/// (coth x − 1/x)/x as a function of s = x².
pub fn coth_minus_inv_over_x(s: f64) -> f64 {
    series_or(s, |x| (1.0 / x.tanh() - 1.0 / x) / x, [1.0 / 3.0, -1.0 / 45.0, 2.0 / 945.0])
}
