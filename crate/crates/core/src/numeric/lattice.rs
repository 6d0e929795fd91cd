//! Gaussian sums over shifted integer lattices and their Poisson duals.
//!
//! Σ_{k∈ℤⁿ} e^{−t(k+θ)ᵀG(k+θ)} = π^{n/2}(tⁿ det G)^{−1/2} Σ_{m∈ℤⁿ} e^{−π² mᵀG⁻¹m/t} cos(2π m·θ)

use super::sum::Neumaier;
use crate::error::{invalid, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

/// Exponent beyond which Gaussian terms are dropped (e^{-45} ≈ 2.9e-20).
pub const CUT: f64 = 45.0;

/// Which side of the Poisson transform evaluated a sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Direct,
    Dual,
}

/// A quadratic form G on ℤⁿ with shift θ.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    theta: DVector<f64>,
    det_g: f64,
    lmin: f64,
    lmax: f64,
}

impl Lattice {
    pub fn new(g: DMatrix<f64>, theta: DVector<f64>) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n || theta.len() != n {
            return invalid("lattice form must be square and match the twist length");
        }
        if (&g - g.transpose()).amax() > 1e-12 * g.amax() {
            return invalid("lattice form must be symmetric");
        }
        let eig = SymmetricEigen::new(g.clone());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if !(lmin > 0.0) || !theta.iter().all(|x| x.is_finite()) {
            return invalid("lattice form must be positive definite");
        }
        let ginv = g.clone().try_inverse().expect("positive definite");
        let det_g = eig.eigenvalues.product();
        Ok(Self { g, ginv, theta, det_g, lmin, lmax })
    }

    pub fn scalar(g: f64, theta: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, g), DVector::from_element(1, theta))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
    pub fn form(&self) -> &DMatrix<f64> {
        &self.g
    }
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }
    pub fn det(&self) -> f64 {
        self.det_g
    }
    pub fn lambda_min(&self) -> f64 {
        self.lmin
    }
    pub fn lambda_max(&self) -> f64 {
        self.lmax
    }

    /// (k+θ)ᵀG(k+θ).
    pub fn value(&self, k: &[i64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let yi = k[i] as f64 + self.theta[i];
            for j in 0..n {
                s += yi * self.g[(i, j)] * (k[j] as f64 + self.theta[j]);
            }
        }
        s
    }

    /// Visit every k with (k+θ)ᵀG(k+θ) ≤ r2, in lexicographic order.
    pub fn for_each_point(&self, r2: f64, mut f: impl FnMut(&[i64], f64)) {
        let n = self.dim();
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        for i in 0..n {
            let half = (r2.max(0.0) * self.ginv[(i, i)]).sqrt();
            lo[i] = (-half - self.theta[i]).floor() as i64;
            hi[i] = (half - self.theta[i]).ceil() as i64;
        }
        odometer(&lo, &hi, |k| {
            let v = self.value(k);
            if v <= r2 {
                f(k, v);
            }
        });
    }

    /// Σ e^{−t(k+θ)ᵀG(k+θ)} by direct summation.
    pub fn sum_direct(&self, t: f64) -> f64 {
        let mut acc = Neumaier::new();
        self.for_each_point(CUT / t, |_, v| acc.add((-t * v).exp()));
        acc.value()
    }

    /// π^{n/2}(tⁿ det G)^{−1/2}.
    pub fn dual_prefactor(&self, t: f64) -> f64 {
        let n = self.dim() as f64;
        PI.powf(0.5 * n) / (t.powf(n) * self.det_g).sqrt()
    }

    /// Σ_{m≠0} e^{−π² mᵀG⁻¹m/t} cos(2π m·θ).
    pub fn dual_correction(&self, t: f64) -> f64 {
        let n = self.dim();
        let r2 = CUT * t / (PI * PI);
        let mut lo = vec![0i64; n];
        let mut hi = vec![0i64; n];
        for i in 0..n {
            let half = (r2 * self.g[(i, i)]).sqrt();
            lo[i] = -(half.floor() as i64);
            hi[i] = half.floor() as i64;
        }
        let mut acc = Neumaier::new();
        odometer(&lo, &hi, |m| {
            if m.iter().all(|&x| x == 0) {
                return;
            }
            let mut q = 0.0;
            let mut phase = 0.0;
            for i in 0..n {
                phase += m[i] as f64 * self.theta[i];
                for j in 0..n {
                    q += m[i] as f64 * self.ginv[(i, j)] * m[j] as f64;
                }
            }
            if q <= r2 {
                acc.add((-PI * PI * q / t).exp() * (2.0 * PI * phase).cos());
            }
        });
        acc.value()
    }

    /// Σ e^{−t(k+θ)ᵀG(k+θ)} by the Poisson-dual series.
    pub fn sum_dual(&self, t: f64) -> f64 {
        self.dual_prefactor(t) * (1.0 + self.dual_correction(t))
    }

    /// The path with fewer terms at this t.
    pub fn preferred_path(&self, t: f64) -> Path {
        let n = self.dim() as f64;
        if t * self.det_g.powf(1.0 / n) >= PI {
            Path::Direct
        } else {
            Path::Dual
        }
    }

    pub fn sum(&self, t: f64) -> (f64, Path) {
        match self.preferred_path(t) {
            Path::Direct => (self.sum_direct(t), Path::Direct),
            Path::Dual => (self.sum_dual(t), Path::Dual),
        }
    }
}

/// Visit every integer vector in the box lo..=hi in lexicographic order.
pub fn odometer(lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
    let n = lo.len();
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return;
    }
    let mut k = lo.to_vec();
    loop {
        f(&k);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if k[i] < hi[i] {
                k[i] += 1;
                k[i + 1..n].copy_from_slice(&lo[i + 1..n]);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_paths_agree() {
        let l = Lattice::scalar(1.0, 0.0).unwrap();
        for &t in &[0.05, 0.3, 1.0, 3.0] {
            let d = l.sum_direct(t);
            let p = l.sum_dual(t);
            assert!((d - p).abs() < 1e-13 * d, "t={t}: {d} vs {p}");
        }
    }

    #[test]
    fn twisted_torus_paths_agree() {
        let g = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.8]);
        let l = Lattice::new(g, DVector::from_vec(vec![0.3, 0.7])).unwrap();
        for &t in &[0.2, 0.9, 2.5] {
            let d = l.sum_direct(t);
            let p = l.sum_dual(t);
            assert!((d - p).abs() < 1e-12 * d, "t={t}: {d} vs {p}");
        }
    }

    #[test]
    fn odometer_visits_box() {
        let mut n = 0;
        odometer(&[-1, 0], &[1, 2], |_| n += 1);
        assert_eq!(n, 9);
    }
}
