//! Heat semigroups of quadratic elements of the Weyl algebra: [∇_k, ∇_j] = i𝓡_{kj}.

use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::{cdet, sym_eigenvalues, sym_fn, to_complex, CMatrix};
use crate::numeric::special::{ln_x_over_sinh, x_coth_x};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Δ_g = g^{ij}∇_i∇_j with constant metric g and curvature 𝓡.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylModel {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub curv: DMatrix<f64>,
}

impl WeylModel {
    pub fn new(g: DMatrix<f64>, curv: DMatrix<f64>) -> Result<Self> {
        let m = Self { n: g.nrows(), g, curv };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || self.g.shape() != (n, n) || self.curv.shape() != (n, n) {
            return invalid("g and curv must be n×n");
        }
        if !self.g.iter().chain(self.curv.iter()).all(|v| v.is_finite()) {
            return invalid("g and curv must be finite");
        }
        if (&self.g - self.g.transpose()).amax() > 1e-14 * self.g.amax() || !(sym_eigenvalues(&self.g)[0] > 0.0) {
            return invalid("g must be symmetric positive definite");
        }
        if (&self.curv + self.curv.transpose()).amax() > 1e-14 * self.curv.amax().max(1.0) {
            return invalid("curv must be antisymmetric");
        }
        Ok(())
    }

    /// g^{1/2} and −S² = SᵀS with S = g^{−1/2}𝓡g^{−1/2}, so that g^{−1}i𝓡 ∼ iS.
    fn pencil(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let root = sym_fn(&self.g, f64::sqrt);
        let inv_root = sym_fn(&self.g, |x| 1.0 / x.sqrt());
        let s = &inv_root * &self.curv * &inv_root;
        (root, s.transpose() * s)
    }
}

/// D(t) = i𝓡 coth(t g^{−1} i𝓡) = g^{1/2}·[iS coth(t iS)]·g^{1/2}.
pub fn d_matrix(model: &WeylModel, t: f64) -> Result<DMatrix<f64>> {
    model.validate()?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let (root, neg_s2) = model.pencil();
    let inner = sym_fn(&(neg_s2 * (t * t)), x_coth_x) / t;
    let d = &root * inner * &root;
    Ok((&d + d.transpose()) * 0.5)
}

fn ln_omega(model: &WeylModel, t: f64) -> f64 {
    let (_, neg_s2) = model.pencil();
    let n = model.n as f64;
    let ln_det_g: f64 = sym_eigenvalues(&model.g).iter().map(|v| v.ln()).sum();
    // ln det(sinh(tiS)/(tiS))^{−1/2} = ½Σ ln(x/sinh x)
    let shape: f64 = sym_eigenvalues(&(neg_s2 * (t * t))).iter().map(|&s| ln_x_over_sinh(s)).sum();
    0.5 * ln_det_g - 0.5 * n * t.ln() + 0.5 * shape
}

/// Ω(t) = det(g^{−1} sinh(t g^{−1}i𝓡)/(g^{−1}i𝓡))^{−1/2}.
pub fn omega_single(model: &WeylModel, t: f64) -> Result<f64> {
    model.validate()?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    Ok(ln_omega(model, t).exp())
}

/// Kernel of e^{tΔ_g}: (4π)^{−n/2}Ω(t) exp(−¼⟨u, D u⟩ − (i/2)⟨x′, 𝓡x⟩), u = x′ − x.
pub fn single_kernel(model: &WeylModel, t: f64, x: &[f64], x_prime: &[f64]) -> Result<Complex64> {
    if x.len() != model.n || x_prime.len() != model.n {
        return invalid("points must have n coordinates");
    }
    let d = d_matrix(model, t)?;
    let xv = DVector::from_column_slice(x);
    let xp = DVector::from_column_slice(x_prime);
    let u = &xp - &xv;
    let re = -0.25 * u.dot(&(&d * &u));
    let im = -0.5 * xp.dot(&(&model.curv * &xv));
    let pref = (4.0 * PI).powf(-(model.n as f64) / 2.0) * omega_single(model, t)?;
    Ok(Complex64::new(re, im).exp() * pref)
}

/// Phase of the translation (e^{⟨ξ,∇⟩}f)(x) = e^{−½⟨ξ, i𝓡x⟩} f(x + ξ).
pub fn translation_phase(model: &WeylModel, xi: &[f64], x: &[f64]) -> Complex64 {
    let q = DVector::from_column_slice(xi).dot(&(&model.curv * DVector::from_column_slice(x)));
    Complex64::new(0.0, -0.5 * q).exp()
}

/// Two Weyl models on the same ℝ^n with cross curvature (𝓡₊ + 𝓡₋)/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylPair {
    pub plus: WeylModel,
    pub minus: WeylModel,
    pub cross_curv: DMatrix<f64>,
}

impl WeylPair {
    pub fn new(plus: WeylModel, minus: WeylModel) -> Result<Self> {
        let cross_curv = (&plus.curv + &minus.curv) * 0.5;
        let p = Self { plus, minus, cross_curv };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.plus.validate()?;
        self.minus.validate()?;
        if self.plus.n != self.minus.n {
            return invalid("pair members must share n");
        }
        let want = (&self.plus.curv + &self.minus.curv) * 0.5;
        if (&want - &self.cross_curv).amax() > 1e-14 * want.amax().max(1.0) {
            return invalid("cross_curv must equal (𝓡₊ + 𝓡₋)/2");
        }
        Ok(())
    }
}

/// Matrices of the product e^{tΔ₊}e^{sΔ₋}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrices {
    /// D₊(t) + i𝓡₊.
    pub t_plus: CMatrix,
    /// D₋(s) + i𝓡₋.
    pub t_minus: CMatrix,
    pub d: DMatrix<f64>,
    /// D₊ − D₋ − 2i𝓡₋.
    pub z: CMatrix,
    /// ¼(D − ZᵀD^{−1}Z).
    pub h: CMatrix,
    pub a_plus: CMatrix,
    pub a_minus: CMatrix,
    pub b: CMatrix,
    /// (det T₊ det T₋ / det D)^{1/2} = Ω₊(t)Ω₋(s)(det D)^{−1/2}.
    pub omega: f64,
    /// Smallest eigenvalue of the real part of the kernel form (A₊, −B; −Bᵀ, A₋).
    pub form_min_eigenvalue: f64,
}

/// Build the pair matrices; rejects unbounded kernels.
pub fn pair_matrices(pair: &WeylPair, t: f64, s: f64) -> Result<PairMatrices> {
    pair.validate()?;
    if !(t > 0.0) || !(s > 0.0) {
        return invalid("t and s must be positive");
    }
    let n = pair.plus.n;
    let dp = d_matrix(&pair.plus, t)?;
    let dm = d_matrix(&pair.minus, s)?;
    let d = &dp + &dm;
    let det_d = d.determinant();
    if !(det_d > 1e-14 * d.amax().powi(n as i32)) {
        return Err(Error::SingularD { det: det_d });
    }
    let i = Complex64::new(0.0, 1.0);
    let t_plus = to_complex(&dp) + to_complex(&pair.plus.curv) * i;
    let t_minus = to_complex(&dm) + to_complex(&pair.minus.curv) * i;
    let d_inv = to_complex(&d.clone().try_inverse().ok_or(Error::SingularD { det: det_d })?);
    let z = to_complex(&(&dp - &dm)) - to_complex(&pair.minus.curv) * (i * 2.0);
    let h = (to_complex(&d) - z.transpose() * &d_inv * &z) * Complex64::new(0.25, 0.0);
    let a_plus = to_complex(&dp) - &t_plus * &d_inv * t_plus.transpose();
    let a_minus = to_complex(&dm) - t_minus.transpose() * &d_inv * &t_minus;
    let b = &t_plus * &d_inv * &t_minus;
    let ln_omega = ln_omega(&pair.plus, t) + ln_omega(&pair.minus, s) - 0.5 * det_d.ln();
    let mut form = DMatrix::zeros(2 * n, 2 * n);
    form.view_mut((0, 0), (n, n)).copy_from(&a_plus.map(|z| z.re));
    form.view_mut((n, n), (n, n)).copy_from(&a_minus.map(|z| z.re));
    form.view_mut((0, n), (n, n)).copy_from(&(-b.map(|z| z.re)));
    form.view_mut((n, 0), (n, n)).copy_from(&(-b.transpose().map(|z| z.re)));
    let form_min_eigenvalue = sym_eigenvalues(&form)[0];
    let scale = form.amax().max(1e-300);
    if form_min_eigenvalue < -1e-10 * scale {
        return Err(Error::KernelNotBounded { min_eigenvalue: form_min_eigenvalue });
    }
    Ok(PairMatrices { t_plus, t_minus, d, z, h, a_plus, a_minus, b, omega: ln_omega.exp(), form_min_eigenvalue })
}

/// U(t,s; x, x′) = (4π)^{−n/2}Ω exp{−¼⟨x,A₊x⟩ − ¼⟨x′,A₋x′⟩ + ½⟨x,Bx′⟩}.
pub fn convolution_kernel(pair: &WeylPair, t: f64, s: f64, x: &[f64], x_prime: &[f64]) -> Result<Complex64> {
    let n = pair.plus.n;
    if x.len() != n || x_prime.len() != n {
        return invalid("points must have n coordinates");
    }
    let m = pair_matrices(pair, t, s)?;
    Ok(kernel_from(&m, n, x, x_prime))
}

fn kernel_from(m: &PairMatrices, n: usize, x: &[f64], x_prime: &[f64]) -> Complex64 {
    let xv = to_complex(&DMatrix::from_column_slice(n, 1, x));
    let xp = to_complex(&DMatrix::from_column_slice(n, 1, x_prime));
    let q = (xv.transpose() * &m.a_plus * &xv)[(0, 0)] * -0.25 + (xp.transpose() * &m.a_minus * &xp)[(0, 0)] * -0.25
        + (xv.transpose() * &m.b * &xp)[(0, 0)] * 0.5;
    q.exp() * ((4.0 * PI).powf(-(n as f64) / 2.0) * m.omega)
}

/// Diagonal of the pair kernel: integrated when A₊ + A₋ − B − Bᵀ is positive,
/// otherwise the per-unit-volume value at x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDensity {
    pub value: Complex64,
    pub per_unit_volume: bool,
    /// Diagonal value at x = x′ = 0.
    pub origin_value: f64,
}

pub fn trace_density(pair: &WeylPair, t: f64, s: f64) -> Result<TraceDensity> {
    let n = pair.plus.n;
    let m = pair_matrices(pair, t, s)?;
    let diag = &m.a_plus + &m.a_minus - &m.b - m.b.transpose();
    let re = diag.map(|z| z.re);
    let ev = sym_eigenvalues(&((&re + re.transpose()) * 0.5));
    let pref = (4.0 * PI).powf(-(n as f64) / 2.0) * m.omega;
    if ev[0] > 1e-10 * re.amax().max(1e-300) {
        let det = cdet(&(diag * Complex64::new(0.25, 0.0)));
        let value = Complex64::new(pref * PI.powf(n as f64 / 2.0), 0.0) / det.sqrt();
        return Ok(TraceDensity { value, per_unit_volume: false, origin_value: pref });
    }
    Ok(TraceDensity { value: Complex64::new(pref, 0.0), per_unit_volume: true, origin_value: pref })
}

/// Like trace_density but raising NonIntegrableDiagonal instead of falling back.
pub fn integrated_trace(pair: &WeylPair, t: f64, s: f64) -> Result<Complex64> {
    let d = trace_density(pair, t, s)?;
    if d.per_unit_volume {
        return Err(Error::NonIntegrableDiagonal);
    }
    Ok(d.value)
}

/// ∫ U₊(t; x, y) U₋(s; y, x′) dy by a Gauss–Legendre product rule, for n ≤ 2.
///
/// The box and panel width follow the extreme eigenvalues of D₊(t) and D₋(s).
pub fn quadrature_convolution(pair: &WeylPair, t: f64, s: f64, x: &[f64], x_prime: &[f64]) -> Result<Complex64> {
    pair.validate()?;
    let n = pair.plus.n;
    if n > 2 {
        return invalid("quadrature convolution supports n ≤ 2");
    }
    if x.len() != n || x_prime.len() != n {
        return invalid("points must have n coordinates");
    }
    let single = |m: &WeylModel, tau: f64| -> Result<_> {
        let d = d_matrix(m, tau)?;
        let pref = (4.0 * PI).powf(-(n as f64) / 2.0) * omega_single(m, tau)?;
        let ev = sym_eigenvalues(&d);
        Ok((d, m.curv.clone(), pref, ev[0], ev[n - 1]))
    };
    let (dp, cp, pp, lo_p, hi_p) = single(&pair.plus, t)?;
    let (dm, cm, pm, lo_m, hi_m) = single(&pair.minus, s)?;
    let d_min = lo_p.min(lo_m);
    let d_max = hi_p.max(hi_m);
    let reach = x.iter().chain(x_prime).fold(0.0f64, |a, v| a.max(v.abs()));
    let half = (160.0 / d_min).sqrt() + reach;
    let width = (2.0 / d_max).sqrt();
    let panels = ((2.0 * half / width).ceil() as usize).clamp(4, 250);
    let h = 2.0 * half / panels as f64;
    let (gx, gw) = crate::numeric::quad::gauss_legendre(16);
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|k| {
            let a = -half + k as f64 * h;
            gx.iter().zip(&gw).map(move |(xi, wi)| (a + 0.5 * h * (xi + 1.0), 0.5 * h * wi)).collect::<Vec<_>>()
        })
        .collect();
    let xv = DVector::from_column_slice(x);
    let xp = DVector::from_column_slice(x_prime);
    let kernel = |d: &DMatrix<f64>, c: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>| {
        let u = b - a;
        Complex64::new(-0.25 * u.dot(&(d * &u)), -0.5 * b.dot(&(c * a))).exp()
    };
    let point = |y: DVector<f64>| kernel(&dp, &cp, &xv, &y) * kernel(&dm, &cm, &y, &xp);
    let mut acc = Complex64::new(0.0, 0.0);
    if n == 1 {
        for &(y, w) in &nodes {
            acc += point(DVector::from_element(1, y)) * w;
        }
    } else {
        for &(y1, w1) in &nodes {
            for &(y2, w2) in &nodes {
                acc += point(DVector::from_vec(vec![y1, y2])) * (w1 * w2);
            }
        }
    }
    Ok(acc * (pp * pm))
}
