//! Closed-form heat invariants for boundary value problems and the
//! Grubb–Gilkey–Smith γ integral.

use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::{camax, herm_eigenvalues, herm_fn, sym_fn, CMatrix};
use crate::numeric::quad::gauss_hermite_mean;
use crate::numeric::sum::Neumaier;
use crate::series::{AsymptoticSeries, Provenance, SeriesTerm};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Kind of a boundary component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Mixed Dirichlet/Robin split by the projector Π.
    Mixed,
    /// Dirichlet part Σ₁ of a Zaremba problem.
    ZarembaDirichlet,
    /// Robin part Σ₂ of a Zaremba problem.
    ZarembaRobin,
}

/// Integrated data of one boundary component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub vol: f64,
    #[serde(default)]
    pub tr_pi: f64,
    #[serde(default)]
    pub int_k: f64,
    #[serde(default)]
    pub int_tr_pi_s: f64,
    pub kind: BoundaryKind,
}

/// Integrated geometric data entering A₀, A₁, A₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryData {
    pub n: usize,
    pub fiber_dim: usize,
    pub vol_m: f64,
    #[serde(default)]
    pub int_r: f64,
    #[serde(default)]
    pub int_tr_q: f64,
    #[serde(default)]
    pub boundary: Vec<BoundaryData>,
    #[serde(default)]
    pub sigma0_vol: f64,
    #[serde(default = "default_alpha")]
    pub zaremba_alpha: f64,
}

fn default_alpha() -> f64 {
    -1.0
}

impl GeometryData {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.fiber_dim == 0 {
            return invalid("n and fiber_dim must be at least 1");
        }
        if !(self.vol_m > 0.0) {
            return invalid("vol_m must be positive");
        }
        if self.zaremba_alpha != -1.0 && self.zaremba_alpha != 7.0 {
            return invalid("zaremba_alpha must be -1 or 7");
        }
        let nf = self.fiber_dim as f64;
        for b in &self.boundary {
            if !(b.vol >= 0.0) || !(0.0..=nf).contains(&b.tr_pi) {
                return invalid("boundary volume must be non-negative and 0 ≤ tr_pi ≤ N");
            }
        }
        if !(self.sigma0_vol >= 0.0) {
            return invalid("sigma0_vol must be non-negative");
        }
        Ok(())
    }
}

/// Heat invariants A₀, A₁, A₂ of a Laplace-type operator.
pub fn heat_coefficients(geom: &GeometryData) -> Result<[f64; 3]> {
    geom.validate()?;
    let nf = geom.fiber_dim as f64;
    let sp = PI.sqrt() / 2.0;
    let a0 = nf * geom.vol_m;
    let mut a1 = Neumaier::new();
    let mut a2 = Neumaier::new();
    a2.add(nf * geom.int_r / 6.0 - geom.int_tr_q);
    for b in &geom.boundary {
        match b.kind {
            BoundaryKind::Mixed => {
                a1.add(sp * (2.0 * b.tr_pi - nf) * b.vol);
                a2.add(nf * b.int_k / 3.0 + 2.0 * b.int_tr_pi_s);
            }
            BoundaryKind::ZarembaDirichlet => {
                a1.add(-nf * sp * b.vol);
                a2.add(nf * b.int_k / 3.0);
            }
            BoundaryKind::ZarembaRobin => {
                a1.add(nf * sp * b.vol);
                a2.add(nf * b.int_k / 3.0 + 2.0 * b.int_tr_pi_s);
            }
        }
    }
    a2.add(geom.zaremba_alpha * PI / 4.0 * nf * geom.sigma0_vol);
    Ok([a0, a1.value(), a2.value()])
}

/// Θ(t) ≈ (4πt)^{−n/2}(A₀ + t^{1/2}A₁ + tA₂) as a series in t.
pub fn predicted_trace_coeffs(geom: &GeometryData) -> Result<AsymptoticSeries> {
    let a = heat_coefficients(geom)?;
    let n = geom.n as i64;
    let pref = (4.0 * PI).powf(-(geom.n as f64) / 2.0);
    let terms = (0..3)
        .map(|k| SeriesTerm {
            power: Rational64::new(k as i64 - n, 2),
            log_power: 0,
            coefficient: pref * a[k],
            provenance: Provenance::ClosedForm,
        })
        .collect();
    AsymptoticSeries::new("t", terms)
}

/// Oblique boundary symbol: Γ^i anti-self-adjoint, boundary metric ĝ_{ij}, projector Π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueSymbol {
    pub n: usize,
    pub gammas: Vec<CMatrix>,
    pub boundary_metric: DMatrix<f64>,
    pub pi: CMatrix,
}

/// Evaluation path for γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    Quadrature,
    Commuting,
    Clifford,
}

/// Result of the ellipticity certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    /// Certified lower bound on min eig(|ξ̂|²I + T²(ξ̂)) over the unit sphere.
    pub margin: f64,
    /// Largest sampled eigenvalue of −T²(ξ̂) on the unit sphere.
    pub kappa_max: f64,
    pub mesh_points: usize,
}

impl ObliqueSymbol {
    pub fn fiber_dim(&self) -> usize {
        self.pi.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.n.checked_sub(1).ok_or(Error::InvalidInput("n must be at least 1".into()))?;
        if self.gammas.len() != d {
            return invalid("need n−1 matrices Γ^i");
        }
        if self.boundary_metric.nrows() != d || self.boundary_metric.ncols() != d {
            return invalid("boundary_metric must be (n−1)×(n−1)");
        }
        let nf = self.fiber_dim();
        if nf == 0 || self.pi.ncols() != nf {
            return invalid("Π must be a non-empty square matrix");
        }
        let scale = camax(&self.pi).max(1.0);
        if camax(&(&self.pi - self.pi.adjoint())) > 1e-12 * scale || camax(&(&self.pi * &self.pi - &self.pi)) > 1e-10 * scale {
            return invalid("Π must be a self-adjoint projector");
        }
        for g in &self.gammas {
            if g.nrows() != nf || g.ncols() != nf {
                return invalid("Γ^i must be N×N");
            }
            if camax(&(g + g.adjoint())) > 1e-12 * camax(g).max(1.0) {
                return invalid("Γ^i must be anti-self-adjoint");
            }
        }
        if d > 0 {
            let ev = crate::numeric::linalg::sym_eigenvalues(&self.boundary_metric);
            if !(ev[0] > 0.0) || (&self.boundary_metric - self.boundary_metric.transpose()).amax() > 1e-12 {
                return invalid("boundary_metric must be symmetric positive definite");
            }
        }
        Ok(())
    }

    /// Γ̃^a in coordinates where |ξ̂|² is Euclidean: Γ̃^a = Σ_i Γ^i (ĝ^{1/2})_{ia}.
    fn whitened(&self) -> Vec<CMatrix> {
        let d = self.gammas.len();
        let nf = self.fiber_dim();
        // ĝ_{ij} = (ĝ^{1/2})²; ξ_i = (ĝ^{1/2}η)_i gives |ξ|² = ηᵀη.
        let root = sym_fn(&self.boundary_metric, f64::sqrt);
        (0..d)
            .map(|a| {
                let mut m = CMatrix::zeros(nf, nf);
                for i in 0..d {
                    m += &self.gammas[i] * Complex64::new(root[(i, a)], 0.0);
                }
                m
            })
            .collect()
    }
}

fn t_of(gw: &[CMatrix], eta: &[f64]) -> CMatrix {
    let nf = gw[0].nrows();
    let mut t = CMatrix::zeros(nf, nf);
    for (g, &e) in gw.iter().zip(eta) {
        t += g * Complex64::new(e, 0.0);
    }
    t
}

/// Points covering the unit sphere in ℝ^d to within chord distance delta.
pub(crate) fn sphere_mesh(d: usize, delta: f64) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let h = 2.0 * delta / ((d - 1) as f64).sqrt();
    let m = (2.0 / h).ceil() as usize;
    let mut out = Vec::new();
    for axis in 0..d {
        for &sgn in &[1.0, -1.0] {
            let lo = vec![0i64; d - 1];
            let hi = vec![m as i64; d - 1];
            crate::numeric::lattice::odometer(&lo, &hi, |k| {
                let mut x = Vec::with_capacity(d);
                let mut j = 0;
                for i in 0..d {
                    if i == axis {
                        x.push(sgn);
                    } else {
                        x.push(-1.0 + 2.0 * k[j] as f64 / m as f64);
                        j += 1;
                    }
                }
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                out.push(x.into_iter().map(|v| v / r).collect());
            });
        }
    }
    out
}

/// Certify min eig(I + T²(η̂)) > 0 on the unit sphere by mesh sampling plus a
/// Lipschitz margin 2‖Γ‖²·δ, refining the mesh while the bound is inconclusive.
pub fn certify_ellipticity(symbol: &ObliqueSymbol) -> Result<Ellipticity> {
    symbol.validate()?;
    let d = symbol.n - 1;
    if d == 0 {
        return Ok(Ellipticity { margin: 1.0, kappa_max: 0.0, mesh_points: 0 });
    }
    let gw = symbol.whitened();
    let gnorm2: f64 = gw.iter().map(|g| herm_eigenvalues(&(g.adjoint() * g)).last().copied().unwrap_or(0.0)).sum();
    let mut delta = 0.05;
    loop {
        let mesh = sphere_mesh(d, delta);
        let kappas: Vec<f64> = mesh
            .par_iter()
            .map(|eta| {
                let t = t_of(&gw, eta);
                let neg_t2 = -(&t * &t);
                herm_eigenvalues(&neg_t2).last().copied().unwrap_or(0.0)
            })
            .collect();
        let kappa_max = kappas.iter().fold(f64::NEG_INFINITY, |m, &k| m.max(k));
        let lip = if d == 1 { 0.0 } else { 2.0 * gnorm2 * delta };
        let margin = 1.0 - kappa_max - lip;
        if margin > 0.0 {
            return Ok(Ellipticity { margin, kappa_max, mesh_points: mesh.len() });
        }
        if 1.0 - kappa_max <= 0.0 || delta < 0.05 / 8.0 + 1e-12 || (d >= 3 && delta < 0.05 / 4.0 + 1e-12) {
            return Err(Error::NotElliptic { margin });
        }
        delta /= 2.0;
    }
}

/// γ = ∫ dξ̂ π^{−(n−1)/2} tr exp(−|ξ̂|² − T²(ξ̂)).
pub fn ggs_gamma(symbol: &ObliqueSymbol, method: GammaMethod) -> Result<f64> {
    let ell = certify_ellipticity(symbol)?;
    let d = symbol.n - 1;
    let nf = symbol.fiber_dim();
    if d == 0 {
        return Ok(nf as f64);
    }
    let gw = symbol.whitened();
    let scale = gw.iter().map(camax).fold(0.0, f64::max).max(1.0);
    match method {
        GammaMethod::Commuting => {
            for a in 0..d {
                for b in 0..a {
                    let comm = &gw[a] * &gw[b] - &gw[b] * &gw[a];
                    if camax(&comm) > 1e-12 * scale * scale {
                        return Err(Error::WrongAlgebraicStructure("Γ^i do not commute".into()));
                    }
                }
            }
            let mut m = CMatrix::identity(nf, nf);
            for g in &gw {
                m += g * g;
            }
            Ok(herm_fn(&m, |x| x.powf(-0.5)).trace().re)
        }
        GammaMethod::Clifford => {
            let tr_pi = symbol.pi.trace().re;
            if tr_pi <= 0.5 {
                return Err(Error::WrongAlgebraicStructure("Clifford form needs Π ≠ 0".into()));
            }
            let kappa = -(&gw[0] * &gw[0]).trace().re / tr_pi;
            for a in 0..d {
                for b in 0..=a {
                    let anti = &gw[a] * &gw[b] + &gw[b] * &gw[a];
                    let target = if a == b { &symbol.pi * Complex64::new(-2.0 * kappa, 0.0) } else { CMatrix::zeros(nf, nf) };
                    if camax(&(anti - target)) > 1e-12 * scale * scale {
                        return Err(Error::WrongAlgebraicStructure("Γ^i do not satisfy the Clifford relation".into()));
                    }
                }
            }
            if !(kappa < 1.0) {
                return Err(Error::NotElliptic { margin: 1.0 - kappa });
            }
            Ok((nf as f64 - tr_pi) + (1.0 - kappa).powf(-(d as f64) / 2.0) * tr_pi)
        }
        GammaMethod::Quadrature => gamma_quadrature(&gw, d, nf, ell.kappa_max),
    }
}

fn gamma_quadrature(gw: &[CMatrix], d: usize, nf: usize, kappa_max: f64) -> Result<f64> {
    // channels decay like e^{−c|η|²} with c ∈ [1 − κ_max, 1]; η = u/σ with σ² between
    // the two rates keeps every channel's residual Gaussian mild for Gauss–Hermite
    let c_min = (1.0 - kappa_max.max(0.0)).max(1e-3);
    let sigma2 = c_min.sqrt().min(c_min / 0.3);
    let sigma = sigma2.sqrt();
    let eval = |m: usize| -> f64 {
        gauss_hermite_mean(d, m, |x| {
            let u: Vec<f64> = x.iter().map(|v| v / sigma).collect();
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let t = t_of(gw, &u);
            let eta2: f64 = u.iter().map(|v| v * v).sum();
            let mut a = &t * &t;
            for i in 0..nf {
                a[(i, i)] += Complex64::new(eta2, 0.0);
            }
            herm_eigenvalues(&a).iter().map(|&l| (r2 - l).exp()).sum::<f64>()
        }) / sigma.powi(d as i32)
    };
    let max_nodes = match d {
        1 => 320,
        2 => 160,
        _ => 80,
    };
    // geometric convergence: the gap between successive levels bounds the coarser error
    let mut m = 16;
    let mut prev = eval(m);
    loop {
        m = (m * 3).div_ceil(2);
        let cur = eval(m);
        let diff = (cur - prev).abs();
        if diff <= 1e-10 * cur.abs() {
            return Ok(cur);
        }
        if m >= max_nodes {
            if diff <= 1e-8 * cur.abs() {
                return Ok(cur);
            }
            return Err(Error::QuadratureFailure { achieved: diff / cur.abs(), target: 1e-8 });
        }
        prev = cur;
    }
}

/// A₁ = vol·√π/2·(2 tr Π − 3N + 2γ) for oblique boundary conditions.
pub fn ggs_a1(symbol: &ObliqueSymbol, method: GammaMethod, fiber_dim: usize, boundary_vol: f64, tr_pi: f64) -> Result<f64> {
    if fiber_dim != symbol.fiber_dim() {
        return invalid("fiber_dim does not match the symbol");
    }
    if !(0.0..=fiber_dim as f64).contains(&tr_pi) || !(boundary_vol >= 0.0) {
        return invalid("need 0 ≤ tr_pi ≤ N and boundary_vol ≥ 0");
    }
    let g = ggs_gamma(symbol, method)?;
    Ok(boundary_vol * PI.sqrt() / 2.0 * (2.0 * tr_pi - 3.0 * fiber_dim as f64 + 2.0 * g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(x: f64) -> Complex64 {
        Complex64::new(0.0, x)
    }

    #[test]
    fn one_dimensional_commuting_example() {
        let s = ObliqueSymbol {
            n: 2,
            gammas: vec![CMatrix::from_element(1, 1, ci(0.6))],
            boundary_metric: DMatrix::identity(1, 1),
            pi: CMatrix::identity(1, 1),
        };
        let c = ggs_gamma(&s, GammaMethod::Commuting).unwrap();
        let q = ggs_gamma(&s, GammaMethod::Quadrature).unwrap();
        assert!((c - 1.25).abs() < 1e-14);
        assert!((q - 1.25).abs() < 1e-8, "{q}");
    }

    #[test]
    fn clifford_pauli_example() {
        let k = 0.5f64.sqrt();
        let o = Complex64::new(0.0, 0.0);
        let sx = CMatrix::from_row_slice(2, 2, &[o, ci(k), ci(k), o]);
        let sy = CMatrix::from_row_slice(2, 2, &[o, Complex64::new(k, 0.0), Complex64::new(-k, 0.0), o]);
        let s = ObliqueSymbol { n: 3, gammas: vec![sx, sy], boundary_metric: DMatrix::identity(2, 2), pi: CMatrix::identity(2, 2) };
        let c = ggs_gamma(&s, GammaMethod::Clifford).unwrap();
        let q = ggs_gamma(&s, GammaMethod::Quadrature).unwrap();
        assert!((c - 4.0).abs() < 1e-13);
        assert!((q - 4.0).abs() < 4e-8, "{q}");
    }

    #[test]
    fn non_elliptic_rejected() {
        let s = ObliqueSymbol {
            n: 2,
            gammas: vec![CMatrix::from_element(1, 1, ci(1.2))],
            boundary_metric: DMatrix::identity(1, 1),
            pi: CMatrix::identity(1, 1),
        };
        assert!(matches!(ggs_gamma(&s, GammaMethod::Quadrature), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn dirichlet_interval_constant_term() {
        let g = GeometryData {
            n: 1,
            fiber_dim: 1,
            vol_m: PI,
            int_r: 0.0,
            int_tr_q: 0.0,
            boundary: vec![BoundaryData { vol: 2.0, tr_pi: 0.0, int_k: 0.0, int_tr_pi_s: 0.0, kind: BoundaryKind::Mixed }],
            sigma0_vol: 0.0,
            zaremba_alpha: -1.0,
        };
        let s = predicted_trace_coeffs(&g).unwrap();
        assert!((s.coefficient(Rational64::new(0, 1), 0).unwrap() + 0.5).abs() < 1e-15);
    }
}
