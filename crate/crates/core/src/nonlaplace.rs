//! Gaussian symbol integrals for operators with a matrix-valued leading symbol.

use crate::error::{invalid, Error, Result};
use crate::invariants::sphere_mesh;
use crate::numeric::linalg::{camax, herm_eigenvalues, CMatrix};
use crate::numeric::quad::{gauss_hermite_mean, integrate_complex};
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// L = −∂_μ a^{μν} ∂_ν + Q with constant coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSymbol {
    pub n: usize,
    /// a[μ][ν] is the N×N matrix a^{μν}.
    pub a: Vec<Vec<CMatrix>>,
    pub q: CMatrix,
}

/// Bounds h_min|ξ|² ≤ H(ξ) ≤ h_max|ξ|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolBounds {
    pub h_min: f64,
    pub h_max: f64,
}

impl SymbolBounds {
    /// Gauss–Hermite scale σ balancing the slowest and fastest decaying channels.
    fn sigma(&self) -> f64 {
        (self.h_min * self.h_max).sqrt().min(self.h_min / 0.3).sqrt()
    }
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn is_hermitian(m: &CMatrix) -> bool {
    camax(&(m - m.adjoint())) <= 1e-12 * camax(m).max(1.0)
}

impl ConstantSymbol {
    /// a^{μν} = diag(h)·δ^{μν} on every channel, Q = 0.
    pub fn diagonal(n: usize, h: &[f64]) -> Self {
        let nf = h.len();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(nf, h.iter().map(|&x| cr(x))));
        let a = (0..n)
            .map(|mu| (0..n).map(|nu| if mu == nu { d.clone() } else { CMatrix::zeros(nf, nf) }).collect())
            .collect();
        Self { n, a, q: CMatrix::zeros(nf, nf) }
    }

    pub fn fiber_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.fiber_dim();
        if self.n == 0 || nf == 0 || self.q.ncols() != nf {
            return invalid("need n ≥ 1 and a square non-empty Q");
        }
        if self.a.len() != self.n || self.a.iter().any(|r| r.len() != self.n) {
            return invalid("a must be an n×n array of matrices");
        }
        for mu in 0..self.n {
            for nu in 0..self.n {
                let m = &self.a[mu][nu];
                if m.nrows() != nf || m.ncols() != nf {
                    return invalid("a^{μν} must be N×N");
                }
                if !is_hermitian(m) || camax(&(m - &self.a[nu][mu])) > 1e-12 * camax(m).max(1.0) {
                    return invalid("a^{μν} must be self-adjoint and symmetric in μν");
                }
            }
        }
        if !is_hermitian(&self.q) {
            return invalid("Q must be self-adjoint");
        }
        Ok(())
    }

    /// H(ξ) = a^{μν}ξ_μξ_ν.
    pub fn leading(&self, xi: &[f64]) -> CMatrix {
        let nf = self.fiber_dim();
        let mut h = CMatrix::zeros(nf, nf);
        for mu in 0..self.n {
            for nu in 0..self.n {
                let c = xi[mu] * xi[nu];
                if c != 0.0 {
                    h += &self.a[mu][nu] * cr(c);
                }
            }
        }
        h
    }

    /// Certify positivity of H on the unit sphere by mesh sampling with a Lipschitz margin.
    pub fn certify(&self) -> Result<SymbolBounds> {
        self.validate()?;
        let anorm = self
            .a
            .iter()
            .flatten()
            .map(|m| herm_eigenvalues(m).iter().fold(0.0f64, |x, v| x.max(v.abs())).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut delta = 0.05;
        loop {
            let mesh = sphere_mesh(self.n, delta);
            let ev: Vec<(f64, f64)> = mesh
                .par_iter()
                .map(|x| {
                    let e = herm_eigenvalues(&self.leading(x));
                    (e[0], *e.last().unwrap())
                })
                .collect();
            let lo = ev.iter().fold(f64::INFINITY, |m, e| m.min(e.0));
            let hi = ev.iter().fold(0.0f64, |m, e| m.max(e.1));
            let lip = if self.n == 1 { 0.0 } else { 2.0 * anorm * delta };
            if lo - lip > 0.0 {
                return Ok(SymbolBounds { h_min: lo - lip, h_max: hi + lip });
            }
            if lo <= 0.0 || delta < 0.05 / 8.0 + 1e-12 {
                return Err(Error::NotElliptic { margin: lo - lip });
            }
            delta /= 2.0;
        }
    }
}

/// Gaussian average of g over ξ ∈ ℝ^d with the substitution ξ = u/σ, doubling the
/// node count until successive results agree to rel_tol.
fn gaussian_integral(d: usize, sigma: f64, rel_tol: f64, g: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64> {
    if d == 0 {
        return Ok(g(&[]));
    }
    let max_nodes = match d {
        1 => 512,
        2 => 128,
        3 => 64,
        _ => 24,
    };
    let eval = |m: usize| {
        gauss_hermite_mean(d, m, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let xi: Vec<f64> = x.iter().map(|v| v / sigma).collect();
            r2.exp() * g(&xi)
        }) / sigma.powi(d as i32)
    };
    let mut m = 8;
    let mut prev = eval(m);
    loop {
        m *= 2;
        let cur = eval(m);
        let diff = (cur - prev).abs();
        if diff <= rel_tol * cur.abs() || diff <= 1e-15 {
            return Ok(cur);
        }
        if m >= max_nodes {
            return Err(Error::QuadratureFailure { achieved: diff / cur.abs().max(1e-300), target: rel_tol });
        }
        prev = cur;
    }
}

/// ∫ dξ π^{−n/2} tr e^{−H(ξ)}.
pub fn a0_density(sym: &ConstantSymbol) -> Result<f64> {
    let b = sym.certify()?;
    gaussian_integral(sym.n, b.sigma(), 1e-10, |xi| {
        herm_eigenvalues(&sym.leading(xi)).iter().map(|h| (-h).exp()).sum()
    })
}

fn dd_exp(hi: f64, hj: f64) -> f64 {
    let delta = hj - hi;
    if delta.abs() < 1e-6 {
        (-hi).exp() * (1.0 - delta / 2.0 + delta * delta / 6.0)
    } else {
        ((-hi).exp() - (-hj).exp()) / delta
    }
}

/// ∫₀¹ e^{−(1−τ)H} X e^{−τH} dτ through the divided differences of e^{−h}.
pub fn volterra_first_order(h: &CMatrix, x: &CMatrix) -> CMatrix {
    let herm = (h + h.adjoint()) * cr(0.5);
    let eig = SymmetricEigen::new(herm);
    let u = &eig.eigenvectors;
    let xt = u.adjoint() * x * u;
    let ev = &eig.eigenvalues;
    let m = CMatrix::from_fn(xt.nrows(), xt.ncols(), |i, j| xt[(i, j)] * cr(dd_exp(ev[i], ev[j])));
    u * m * u.adjoint()
}

/// −∫ dξ π^{−n/2} tr ∫₀¹ e^{−(1−τ)H} Q e^{−τH} dτ.
pub fn a2_density(sym: &ConstantSymbol) -> Result<f64> {
    let b = sym.certify()?;
    gaussian_integral(sym.n, b.sigma(), 1e-10, |xi| {
        -volterra_first_order(&sym.leading(xi), &sym.q).trace().re
    })
}

/// −∫ dξ π^{−n/2} tr ∫₀¹ e^{−(1−τ)H} K(ξ) e^{−τH} dτ with K(ξ) = ξ_μ k^μ.
pub fn volterra_half_order_density(sym: &ConstantSymbol, k: &[CMatrix]) -> Result<f64> {
    let b = sym.certify()?;
    let nf = sym.fiber_dim();
    if k.len() != sym.n || k.iter().any(|m| m.nrows() != nf || m.ncols() != nf) {
        return invalid("need n matrices k^μ of size N×N");
    }
    let d = sym.n;
    let sigma = b.sigma();
    let m = match d {
        1 => 64,
        2 => 32,
        _ => 16,
    };
    Ok(gauss_hermite_mean(d, m, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let xi: Vec<f64> = x.iter().map(|v| v / sigma).collect();
        let mut kx = CMatrix::zeros(nf, nf);
        for (km, &c) in k.iter().zip(&xi) {
            kx += km * cr(c);
        }
        -r2.exp() * volterra_first_order(&sym.leading(&xi), &kx).trace().re
    }) / sigma.powi(d as i32))
}

/// H(ω, ξ̂) = Aω² + Bω + C with ω the normal covector component.
struct NormalPencil {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
    /// Joint eigen-channels (a, b, c) when A, B, C commute.
    channels: Option<Vec<(f64, f64, f64)>>,
    scale_a: f64,
    scale_c: f64,
}

impl NormalPencil {
    fn new(sym: &ConstantSymbol, xi_hat: &[f64]) -> Self {
        let nf = sym.fiber_dim();
        let a = sym.a[0][0].clone();
        let mut b = CMatrix::zeros(nf, nf);
        let mut c = CMatrix::zeros(nf, nf);
        for i in 1..sym.n {
            b += (&sym.a[0][i] + &sym.a[i][0]) * cr(xi_hat[i - 1]);
            for j in 1..sym.n {
                c += &sym.a[i][j] * cr(xi_hat[i - 1] * xi_hat[j - 1]);
            }
        }
        let tol = 1e-12 * (camax(&a) + camax(&b) + camax(&c)).max(1e-300).powi(2);
        let commute = |x: &CMatrix, y: &CMatrix| camax(&(x * y - y * x)) <= tol;
        let channels = if commute(&a, &b) && commute(&a, &c) && commute(&b, &c) {
            // a generic real combination separates the joint eigenspaces
            let mix = &a + &b * cr(0.371_390_676) + &c * cr(0.577_215_664);
            let eig = SymmetricEigen::new((&mix + mix.adjoint()) * cr(0.5));
            let u = eig.eigenvectors;
            let diag = |m: &CMatrix, i: usize| (u.column(i).adjoint() * m * u.column(i))[(0, 0)].re;
            Some((0..nf).map(|i| (diag(&a, i), diag(&b, i), diag(&c, i))).collect())
        } else {
            None
        };
        let norm = |m: &CMatrix| herm_eigenvalues(m).iter().fold(0.0f64, |x, v| x.max(v.abs()));
        let scale_a = norm(&a);
        let scale_c = norm(&c);
        Self { a, b, c, channels, scale_a, scale_c }
    }

    /// tr(Φ(λ)^{−1} Φ′(λ)) = ∂_λ log det Φ(λ).
    fn log_det_derivative(&self, lambda: Complex64) -> Result<Complex64> {
        if let Some(ch) = &self.channels {
            // ∫dω/2π (aω²+bω+c−λ)^{−1} = ½D^{−1/2}, D = a(c−λ) − b²/4
            return Ok(ch.iter().map(|&(a, b, c)| cr(a) / ((cr(c) - lambda) * a - b * b / 4.0) / 2.0).sum());
        }
        let (phi, dphi) = self.phi(lambda)?;
        let inv = phi.try_inverse().ok_or(Error::NotElliptic { margin: 0.0 })?;
        Ok((inv * dphi).trace())
    }

    /// Φ(λ) and Φ′(λ) by the trapezoidal rule in θ with ω = s·tan θ.
    ///
    /// cos²θ·(H − λ) is analytic and π-periodic in θ, so the rule converges geometrically.
    fn phi(&self, lambda: Complex64) -> Result<(CMatrix, CMatrix)> {
        let nf = self.a.nrows();
        let s = ((self.scale_c + lambda.norm() + 1e-300) / self.scale_a).sqrt().max(1e-8);
        let eval = |m: usize| -> Option<(CMatrix, CMatrix)> {
            let mut phi = CMatrix::zeros(nf, nf);
            let mut dphi = CMatrix::zeros(nf, nf);
            for k in 0..m {
                let th = -PI / 2.0 + PI * (k as f64 + 0.5) / m as f64;
                let (sn, cs) = th.sin_cos();
                let mut p = &self.a * cr(s * s * sn * sn) + &self.b * cr(s * sn * cs) + &self.c * cr(cs * cs);
                for i in 0..nf {
                    p[(i, i)] -= lambda * cs * cs;
                }
                let inv = p.try_inverse()?;
                dphi += &inv * &inv * cr(cs * cs);
                phi += inv;
            }
            let w = cr(s / (2.0 * m as f64));
            Some((phi * w, dphi * w))
        };
        let mut m = 32;
        let mut prev = eval(m).ok_or(Error::NotElliptic { margin: 0.0 })?;
        loop {
            m *= 2;
            let cur = eval(m).ok_or(Error::NotElliptic { margin: 0.0 })?;
            let scale = camax(&cur.0).max(camax(&cur.1) * lambda.norm().max(1.0));
            if camax(&(&cur.0 - &prev.0)).max(camax(&(&cur.1 - &prev.1))) <= 1e-14 * scale {
                return Ok(cur);
            }
            if m >= 8192 {
                return Err(Error::QuadratureFailure { achieved: camax(&(&cur.0 - &prev.0)) / scale, target: 1e-14 });
            }
            prev = cur;
        }
    }
}

const ARM_WIDTH: f64 = 4.0;
const ARM_DECAY: f64 = 40.0;

fn psi_with(sym: &ConstantSymbol, bounds: SymbolBounds, xi_hat: &[f64]) -> Result<f64> {
    let pencil = NormalPencil::new(sym, xi_hat);
    let xi2: f64 = xi_hat.iter().map(|v| v * v).sum();
    // singularities of Φ lie on [h_min|ξ̂|², ∞); the parabola passes to their left
    let c0 = bounds.h_min * xi2 - 1.0;
    let y_max = (ARM_WIDTH * ARM_DECAY).sqrt();
    let lam = |y: f64| Complex64::new(c0 + y * y / ARM_WIDTH, y);
    let mut failure = None;
    let q = integrate_complex(
        |y| {
            let l = lam(y);
            let dl = Complex64::new(2.0 * y / ARM_WIDTH, 1.0);
            match pencil.log_det_derivative(l) {
                Ok(g) => (-l).exp() * g * dl / Complex64::new(0.0, 2.0 * PI),
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        -y_max,
        y_max,
        1e-16 * (-c0).exp(),
        1e-12,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    // on the arms |∂ log det Φ| ≤ N/dist(λ, spectrum) ≤ N/|y|
    let nf = sym.fiber_dim() as f64;
    let tail = (-c0 - ARM_DECAY).exp() * nf * ARM_WIDTH / y_max;
    let value = q.value.re;
    if tail > (1e-10 * value.abs()).max(1e-16 * (-c0).exp()) || !q.converged {
        return Err(Error::ContourTooShort { bound: tail.max(q.error) });
    }
    Ok(value)
}

/// Ψ(ξ̂) = ∫ dλ/2πi e^{−λ} ∂_λ log det Φ(λ; ξ̂) along a contour left of the spectrum.
///
/// The first coordinate is normal to the boundary; xi_hat has n−1 components.
pub fn dirichlet_psi(sym: &ConstantSymbol, xi_hat: &[f64]) -> Result<f64> {
    let b = sym.certify()?;
    if xi_hat.len() + 1 != sym.n {
        return invalid("xi_hat must have n−1 components");
    }
    if sym.n > 1 && xi_hat.iter().all(|&v| v == 0.0) {
        return invalid("xi_hat must be non-zero");
    }
    psi_with(sym, b, xi_hat)
}

/// Dirichlet A₁ per unit boundary volume: −√π ∫ dξ̂ π^{−(n−1)/2} Ψ(ξ̂).
pub fn dirichlet_a1_density(sym: &ConstantSymbol) -> Result<f64> {
    let b = sym.certify()?;
    let failure = std::sync::Mutex::new(None);
    let v = gaussian_integral(sym.n - 1, b.sigma(), 1e-9, |xi| match psi_with(sym, b, xi) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            0.0
        }
    })?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(-PI.sqrt() * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_densities() {
        for n in 1..=3 {
            let mut s = ConstantSymbol::diagonal(n, &[1.0, 1.0]);
            s.q = CMatrix::identity(2, 2) * cr(0.7);
            assert!((a0_density(&s).unwrap() - 2.0).abs() < 1e-12);
            assert!((a2_density(&s).unwrap() + 1.4).abs() < 1e-12);
        }
    }

    #[test]
    fn block_diagonal_a0() {
        let s = ConstantSymbol::diagonal(2, &[1.0, 2.0]);
        assert!((a0_density(&s).unwrap() - 1.5).abs() < 1e-10);
    }

    #[test]
    fn scalar_psi_closed_form() {
        let s = ConstantSymbol::diagonal(2, &[1.0]);
        for &x in &[0.3, 1.0, 2.5] {
            let p = dirichlet_psi(&s, &[x]).unwrap();
            assert!((p - (-x * x).exp() / 2.0).abs() < 1e-12 * (-x * x).exp(), "{x} {p}");
        }
    }

    #[test]
    fn scalar_dirichlet_a1() {
        for n in 1..=3 {
            let s = ConstantSymbol::diagonal(n, &[1.0]);
            let a1 = dirichlet_a1_density(&s).unwrap();
            assert!((a1 + PI.sqrt() / 2.0).abs() < 1e-9, "n={n} {a1}");
        }
    }

    #[test]
    fn quadrature_phi_matches_channel_closed_form() {
        let mut s = ConstantSymbol::diagonal(2, &[1.0, 2.0]);
        s.a[0][1] = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(0.3), cr(-0.2)]));
        s.a[1][0] = s.a[0][1].clone();
        let closed = NormalPencil::new(&s, &[0.8]);
        assert!(closed.channels.is_some());
        let mut quad = NormalPencil::new(&s, &[0.8]);
        quad.channels = None;
        for &l in &[Complex64::new(-1.0, 0.0), Complex64::new(0.2, 3.0), Complex64::new(5.0, -7.0)] {
            let a = closed.log_det_derivative(l).unwrap();
            let b = quad.log_det_derivative(l).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm(), "{a} {b}");
        }
    }
}
