//! Resummed heat kernel for a covariantly constant U(1) field strength on flat space.

use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::{sym_eigenvalues, sym_fn, CMatrix};
use crate::numeric::special::{coth_minus_inv_over_x, ln_x_over_sinh, x_coth_x};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Constant field strength F and optional bundle curvature 𝓡_{μν} (N×N each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticModel {
    pub n: usize,
    pub f: DMatrix<f64>,
    #[serde(default)]
    pub bundle_curv: Option<Vec<Vec<CMatrix>>>,
}

impl MagneticModel {
    /// n = 2 with F = B·ε, ε₁₂ = 1.
    pub fn planar(b: f64) -> Self {
        Self { n: 2, f: DMatrix::from_row_slice(2, 2, &[0.0, b, -b, 0.0]), bundle_curv: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.f.nrows() != self.n || self.f.ncols() != self.n {
            return invalid("F must be n×n");
        }
        if !self.f.iter().all(|v| v.is_finite()) {
            return invalid("F must be finite");
        }
        if (&self.f + self.f.transpose()).amax() > 1e-14 * self.f.amax().max(1.0) {
            return invalid("F must be antisymmetric");
        }
        if let Some(r) = &self.bundle_curv {
            if r.len() != self.n || r.iter().any(|row| row.len() != self.n) {
                return invalid("bundle curvature must be an n×n array");
            }
            let nf = r[0][0].nrows();
            #[allow(clippy::needless_range_loop)]
            for mu in 0..self.n {
                for nu in 0..self.n {
                    let m = &r[mu][nu];
                    if m.nrows() != nf || m.ncols() != nf {
                        return invalid("bundle curvature blocks must be N×N");
                    }
                    let sum = m + &r[nu][mu];
                    if sum.iter().any(|z| z.norm() > 1e-14 * m.iter().fold(1.0f64, |a, z| a.max(z.norm()))) {
                        return invalid("bundle curvature must be antisymmetric in μν");
                    }
                }
            }
        }
        Ok(())
    }

    /// −F² = FᵀF, whose eigenvalues are the squared block frequencies b².
    fn neg_f2(&self) -> DMatrix<f64> {
        self.f.transpose() * &self.f
    }
}

/// U₀(t; x, x′) = (4πt)^{−n/2} det(tiF/sinh tiF)^{1/2} exp(−⟨u, tiF coth(tiF) u⟩/4t).
///
/// The value multiplies the identity on the fiber.
pub fn u0_kernel(model: &MagneticModel, t: f64, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    model.validate()?;
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    if x.len() != model.n || x_prime.len() != model.n {
        return invalid("points must have n coordinates");
    }
    let nf2 = model.neg_f2() * (t * t);
    // each block frequency appears twice among the eigenvalues, hence the factor ½·½
    let log_det: f64 = sym_eigenvalues(&nf2).iter().map(|&s| ln_x_over_sinh(s)).sum::<f64>() / 2.0;
    let m = sym_fn(&nf2, x_coth_x);
    let u = nalgebra::DVector::from_iterator(model.n, x.iter().zip(x_prime).map(|(a, b)| a - b));
    let quad = u.dot(&(&m * &u));
    Ok((4.0 * PI * t).powf(-(model.n as f64) / 2.0) * (log_det - quad / (4.0 * t)).exp())
}

/// Real antisymmetric h(t) with H(t) = coth(tiF) − 1/(itF) = i·h(t).
pub fn h_tensor(model: &MagneticModel, t: f64) -> Result<DMatrix<f64>> {
    model.validate()?;
    if !(t >= 0.0) {
        return invalid("t must be non-negative");
    }
    let phi = sym_fn(&(model.neg_f2() * (t * t)), coth_minus_inv_over_x);
    Ok(&model.f * phi * t)
}

/// Diagonal of the planar Landau kernel versus its level sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauCheck {
    pub diagonal_value: f64,
    pub level_sum: f64,
    pub difference: f64,
}

/// B/(4π sinh tB) against (B/2π)Σ_k e^{−tB(2k+1)}.
pub fn landau_check(b: f64, t: f64) -> Result<LandauCheck> {
    if !(b > 0.0) || !(t > 0.0) || !b.is_finite() || !t.is_finite() {
        return invalid("B and t must be positive and finite");
    }
    let diagonal_value = u0_kernel(&MagneticModel::planar(b), t, &[0.0, 0.0], &[0.0, 0.0])?;
    let q = (-2.0 * t * b).exp();
    let first = (-t * b).exp();
    // explicit levels until the geometric remainder is below 1e-18 of the first level
    let k_max = ((18.0 * 10f64.ln()) / (2.0 * t * b)).ceil().clamp(1.0, 1e6) as usize;
    let mut acc = crate::numeric::sum::Neumaier::new();
    let mut term = first;
    for _ in 0..k_max {
        acc.add(term);
        term *= q;
    }
    acc.add(term / (1.0 - q));
    let level_sum = b / (2.0 * PI) * acc.value();
    Ok(LandauCheck { diagonal_value, level_sum, difference: (diagonal_value - level_sum).abs() / level_sum })
}

/// ½H^{μν}(t)𝓡_{μν} on flat space; at t = 0 the curvature term J(0)·Riemann = R/6.
pub fn b2_leading(model: &MagneticModel, scalar_curv: f64, t: f64) -> Result<CMatrix> {
    model.validate()?;
    let nf = model.bundle_curv.as_ref().map_or(1, |r| r[0][0].nrows());
    if scalar_curv != 0.0 && t != 0.0 {
        return Err(Error::CurvedScopeUnsupported);
    }
    let mut out = CMatrix::identity(nf, nf) * Complex64::new(scalar_curv / 6.0, 0.0);
    if let Some(r) = &model.bundle_curv {
        let h = h_tensor(model, t)?;
        for mu in 0..model.n {
            for nu in 0..model.n {
                out += &r[mu][nu] * Complex64::new(0.0, 0.5 * h[(mu, nu)]);
            }
        }
    }
    Ok(out)
}
