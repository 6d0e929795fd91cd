//! Mellin transforms of heat traces: A_q, spectral zeta functions and determinants.
//!
//! I(z) = ∫₀^∞ t^{z−1} Θ(t) dt is split at t = 1. On [0, 1] the small-t
//! expansion Σ c_j t^{e_j} is subtracted and its integrals Σ c_j/(z+e_j) are
//! added back analytically.

use crate::error::{invalid, Error, Result};
use crate::models::{LatticeForm, ModelOperator, Spectrum};
use crate::numeric::quad::{gauss_legendre, integrate_complex};
use crate::numeric::special::{exp_neg_tail, gamma, gamma_real, rgamma, rgamma_over};
use crate::numeric::sum::Neumaier;
use crate::series::{AsymptoticSeries, Provenance, SeriesTerm};
use crate::traces::{HeatSource, Method};
use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A_q with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AqResult {
    pub q: Complex64,
    pub value: Complex64,
    pub error: f64,
    pub split_point: f64,
}

/// A complex value with error estimate and method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub value: Complex64,
    pub error_bound: f64,
    pub method: Method,
}

/// Evaluation path for zeta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMethod {
    /// Direct summation when Re s > n/2, continuation otherwise.
    Auto,
    Direct,
    Continued,
}

/// c·t^{p}·e^{−t·rate}.
#[derive(Debug, Clone, Copy)]
struct ExpTerm {
    coef: f64,
    power: f64,
    rate: f64,
}

/// Θ(t) = e^{−t·a}(w·S(t) + c) − Z·e^{t·shift} for a lattice model with
/// a = mass2 − shift and S the lattice theta sum.
struct MellinSplit {
    n: usize,
    lf: LatticeForm,
    a: f64,
    shift: f64,
    zero: f64,
    /// Coefficient of t^{−n/2} in the bulk: w·π^{n/2}/√det G.
    bulk: f64,
    comps: Vec<ExpTerm>,
    /// Smallest exponent rate at large t (lowest included eigenvalue minus shift).
    gap: f64,
}

impl MellinSplit {
    fn new(model: &ModelOperator, shift: f64, exclude_zero: bool) -> Result<Self> {
        Self::build(model, shift, exclude_zero, true)
    }

    fn build(model: &ModelOperator, shift: f64, exclude_zero: bool, check: bool) -> Result<Self> {
        model.validate()?;
        let lf = match model.lattice_form() {
            Some(lf) => lf?,
            None => {
                return Err(Error::UnsupportedModel(
                    "Mellin operations need a model with a lattice heat trace".into(),
                ))
            }
        };
        let n = lf.lattice.dim();
        let src = HeatSource::Model(model.clone());
        let (l1, z) = src.lowest_nonzero()?;
        let zero = if exclude_zero { z } else { 0.0 };
        let lmin = if z > 0.0 && !exclude_zero { 0.0 } else { l1 };
        if check && !(shift < lmin) {
            return Err(Error::NonPositiveShiftedOperator { shift, min_eigenvalue: lmin });
        }
        let a = lf.mass2 - shift;
        let bulk = lf.weight * PI.powf(n as f64 / 2.0) / lf.lattice.det().sqrt();
        let mut comps = vec![ExpTerm { coef: bulk, power: -(n as f64) / 2.0, rate: a }];
        if lf.constant != 0.0 {
            comps.push(ExpTerm { coef: lf.constant, power: 0.0, rate: a });
        }
        if zero > 0.0 {
            comps.push(ExpTerm { coef: -zero, power: 0.0, rate: -shift });
        }
        Ok(Self { n, lf, a, shift, zero, bulk, comps, gap: lmin - shift })
    }

    /// Number of expansion terms per component so that the remainder is O(t^{1−Re z}).
    fn order_for(&self, power: f64, re_z: f64) -> usize {
        ((1.5 - re_z - power).ceil().max(0.0) as usize) + 2
    }

    /// (exponent, coefficient) pairs of the subtracted expansion.
    fn expansion(&self, re_z: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for c in &self.comps {
            let j = self.order_for(c.power, re_z);
            let mut coef = c.coef;
            for i in 0..j {
                if i > 0 {
                    coef *= -c.rate / i as f64;
                }
                out.push((c.power + i as f64, coef));
            }
        }
        out
    }

    /// Θ(t) minus the expansion, for t ≤ 1.
    fn remainder(&self, t: f64, re_z: f64) -> f64 {
        let mut acc = Neumaier::new();
        for c in &self.comps {
            let j = self.order_for(c.power, re_z);
            acc.add(c.coef * t.powf(c.power) * exp_neg_tail(t * c.rate, j));
        }
        let e = self.lf.lattice.dual_correction(t);
        if e != 0.0 {
            acc.add((-t * self.a).exp() * self.bulk * t.powf(-(self.n as f64) / 2.0) * e);
        }
        acc.value()
    }

    /// Full Θ(t).
    fn theta(&self, t: f64) -> f64 {
        let (s, _) = self.lf.lattice.sum(t);
        (-t * self.a).exp() * (self.lf.weight * s + self.lf.constant) - self.zero * (t * self.shift).exp()
    }

    /// ∫₀¹ t^{z−1}R(t)dt + ∫₁^∞ t^{z−1}Θ(t)dt.
    fn integrals(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let re_z = z.re;
        // ∫₀¹ via t = e^{−v}; t^z R(t) decays at least like e^{−3v/2}
        let vmax = 45.0;
        let lo = integrate_complex(
            |v| {
                let t = (-v).exp();
                (-(z * v)).exp() * self.remainder(t, re_z)
            },
            0.0,
            vmax,
            1e-300,
            1e-13,
        );
        let gap = self.gap;
        let mut t_hi: f64 = 2.0;
        for _ in 0..60 {
            let theta_scale = self.theta(1.0).abs().max(1.0);
            if gap * (t_hi - 1.0) - (re_z - 1.0).max(0.0) * t_hi.ln() > 50.0 + theta_scale.ln() {
                break;
            }
            t_hi = 1.0 + 2.0 * (t_hi - 1.0);
        }
        let hi = integrate_complex(
            |x| {
                let t = 1.0 + x;
                (z - 1.0).scale(t.ln()).exp() * self.theta(t)
            },
            0.0,
            t_hi - 1.0,
            1e-300,
            1e-13,
        );
        let err = lo.error + hi.error;
        let target = 1e-9 * (lo.value + hi.value).norm().max(1e-300);
        if (!lo.converged || !hi.converged) && err > target {
            return Err(Error::QuadratureFailure { achieved: err, target });
        }
        Ok((lo.value + hi.value, err))
    }

    /// rgamma(w)·I(w + delta), with pole terms handled through rgamma_over.
    fn gamma_weighted(&self, w: Complex64, delta: f64) -> Result<(Complex64, f64)> {
        let z = w + delta;
        let (integrals, err) = self.integrals(z)?;
        let rg = rgamma(w);
        let mut total = rg * integrals;
        for (e, c) in self.expansion(z.re) {
            let shifted = delta + e;
            let m = shifted.round();
            let term = if (shifted - m).abs() < 1e-12 && m >= 0.0 {
                rgamma_over(w, m as u32) * c
            } else {
                let den = z + e;
                if den.norm() < 1e-12 {
                    if c.abs() > 0.0 {
                        return Err(Error::PoleOfZeta { s: w.re });
                    }
                    Complex64::new(0.0, 0.0)
                } else {
                    rg * c / den
                }
            };
            total += term;
        }
        Ok((total, err * rg.norm().max(1e-16)))
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A_q = (4π)^{n/2}/Γ(−q) ∫₀^∞ t^{−q−1+n/2} Θ(t) dt, continued to all q.
///
/// series_order counts the heat coefficients A_k (k < series_order, in the
/// t^{(k−n)/2} indexing) whose subtraction the caller asserts; it must exceed
/// 2·Re q.
pub fn a_q(src: &HeatSource, q: Complex64, series_order: usize) -> Result<AqResult> {
    src.validate()?;
    if !q.re.is_finite() || !q.im.is_finite() {
        return invalid("q must be finite");
    }
    if (series_order as f64) <= 2.0 * q.re {
        return Err(Error::InsufficientOrder { order: series_order, q: q.re });
    }
    let lmin = src.min_eigenvalue()?;
    if !(lmin > 0.0) {
        return Err(Error::NonPositiveOperator { min_eigenvalue: lmin });
    }
    match src {
        HeatSource::Spectrum(s) => {
            let n = src.dim() as f64;
            finite_guard(s)?;
            let pref = (4.0 * PI).powf(n / 2.0);
            let mut v = c(0.0);
            for &(l, m) in &s.entries {
                v += gamma(c(n / 2.0) - q) * rgamma(-q) * (q - n / 2.0).scale(l.ln()).exp() * m;
            }
            Ok(AqResult { q, value: v * pref, error: 1e-15 * v.norm() * pref, split_point: 1.0 })
        }
        HeatSource::Model(m) => {
            let split = MellinSplit::new(m, 0.0, false)?;
            let n = split.n as f64;
            let (v, err) = split.gamma_weighted(-q, n / 2.0)?;
            let pref = (4.0 * PI).powf(n / 2.0);
            Ok(AqResult { q, value: v * pref, error: err * pref, split_point: 1.0 })
        }
    }
}

/// dA_q/dq at real q by complex-step differentiation.
pub fn a_q_derivative(src: &HeatSource, q: f64, series_order: usize) -> Result<f64> {
    let h = 1e-20;
    let r = a_q(src, Complex64::new(q, h), series_order)?;
    Ok(r.value.im / h)
}

/// Normalized heat coefficient A_k^{std} = (−1)^k/k!·A_q|_{q=k}.
pub fn standard_coefficient(src: &HeatSource, k: u32) -> Result<f64> {
    let r = a_q(src, c(k as f64), 2 * k as usize + 2)?;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * r.value.re / fact)
}

fn finite_guard(s: &Spectrum) -> Result<()> {
    if s.tail != crate::models::CountingBound::Finite {
        return Err(Error::UnsupportedModel(
            "Mellin operations on a truncated spectrum need the model itself".into(),
        ));
    }
    Ok(())
}

/// ζ(s) = Σ mult·(λ − shift)^{−s}.
pub fn zeta(
    src: &HeatSource,
    s: Complex64,
    lambda_shift: f64,
    exclude_zero_modes: bool,
    method: ZetaMethod,
) -> Result<ComplexValue> {
    src.validate()?;
    if !s.re.is_finite() || !s.im.is_finite() || !lambda_shift.is_finite() {
        return invalid("s and lambda_shift must be finite");
    }
    match src {
        HeatSource::Spectrum(spec) => {
            finite_guard(spec)?;
            let spec = if exclude_zero_modes { spec.without_zero_modes() } else { spec.clone() };
            let lmin = spec.min_eigenvalue();
            if !(lambda_shift < lmin) {
                return Err(Error::NonPositiveShiftedOperator { shift: lambda_shift, min_eigenvalue: lmin });
            }
            let mut v = c(0.0);
            for &(l, m) in &spec.entries {
                v += (-s).scale((l - lambda_shift).ln()).exp() * m;
            }
            Ok(ComplexValue { value: v, error_bound: 1e-15 * v.norm(), method: Method::ClosedForm })
        }
        HeatSource::Model(m) => {
            let split = MellinSplit::new(m, lambda_shift, exclude_zero_modes)?;
            let n = split.n as f64;
            let direct_ok = s.re > n / 2.0;
            let use_direct = match method {
                ZetaMethod::Auto => direct_ok,
                ZetaMethod::Direct => {
                    if !direct_ok {
                        return invalid("direct zeta summation needs Re s > n/2");
                    }
                    true
                }
                ZetaMethod::Continued => false,
            };
            if use_direct {
                let (v, e) = zeta_direct(&split, s)?;
                return Ok(ComplexValue { value: v, error_bound: e, method: Method::Direct });
            }
            let (v, e) = split.gamma_weighted(s, 0.0)?;
            Ok(ComplexValue { value: v, error_bound: e, method: Method::Quadrature })
        }
    }
}

/// Truncated lattice sum plus the tail of the smoothed lattice-point density.
fn zeta_direct(split: &MellinSplit, s: Complex64) -> Result<(Complex64, f64)> {
    let n = split.n as f64;
    let budget = if split.n == 1 { 4000.0 } else { 1.5e5 };
    let v_target = (budget * gamma_real(n / 2.0 + 1.0) / (split.bulk / split.lf.weight)).powf(2.0 / n)
        .max(16.0 * split.a.abs());
    let full = zeta_direct_at(split, s, v_target)?;
    let coarse = zeta_direct_at(split, s, v_target / 4.0)?;
    let err = (full - coarse).norm() + 1e-14 * full.norm();
    Ok((full, err))
}

/// C^∞ cutoff: 1 below ρ = ½, 0 above ρ = 1.
fn smooth_cutoff(rho: f64) -> f64 {
    let u = ((rho - 0.5) / 0.5).clamp(0.0, 1.0);
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let (p, q) = ((-1.0 / u).exp(), (-1.0 / (1.0 - u)).exp());
    q / (p + q)
}

/// Lattice sum weighted by a smooth radial cutoff, plus the smoothed-away part
/// as an integral over the lattice-point density. The smooth weight removes the
/// boundary fluctuation of a sharp cutoff.
fn zeta_direct_at(split: &MellinSplit, s: Complex64, cut: f64) -> Result<Complex64> {
    let lat = &split.lf.lattice;
    let n = split.n as f64;
    let w = split.lf.weight;
    let mass2 = split.lf.mass2;
    let a = split.a;
    let r = cut.sqrt();
    let mut acc_re = Neumaier::new();
    let mut acc_im = Neumaier::new();
    let mut saw_origin = false;
    lat.for_each_point(cut, |_, v| {
        let mut weight = w;
        if v == 0.0 {
            saw_origin = true;
            weight += split.lf.constant;
        }
        if weight == 0.0 || (split.zero > 0.0 && v + mass2 == 0.0) {
            return;
        }
        let chi = smooth_cutoff(v.sqrt() / r);
        if chi == 0.0 {
            return;
        }
        let term = (-s).scale((v + a).ln()).exp() * (weight * chi);
        acc_re.add(term.re);
        acc_im.add(term.im);
    });
    let mut total = Complex64::new(acc_re.value(), acc_im.value());
    if !saw_origin && split.lf.constant != 0.0 {
        total += (-s).scale(a.ln()).exp() * split.lf.constant;
    }
    let dens = split.bulk / gamma_real(n / 2.0);
    // transition band: 2∫ u^{n−1}(u²+a)^{−s}(1−χ(u/R)) du over [R/2, R]
    let (x, wx) = gauss_legendre(24);
    let panels = 16;
    let mut band = c(0.0);
    for p in 0..panels {
        let lo = 0.5 * r + 0.5 * r * p as f64 / panels as f64;
        let h = 0.5 * r / panels as f64;
        for (xi, wi) in x.iter().zip(&wx) {
            let u = lo + 0.5 * h * (xi + 1.0);
            let f = (-s).scale((u * u + a).ln()).exp() * (2.0 * u.powf(n - 1.0) * (1.0 - smooth_cutoff(u / r)));
            band += f * (0.5 * h * wi);
        }
    }
    // beyond the cutoff: ∫_cut^∞ v^{n/2−1}(v+a)^{−s} dv by the binomial series in a/v
    let mut tail = c(0.0);
    let mut binom = c(1.0);
    for j in 0..200 {
        if j > 0 {
            binom = binom * (-s - (j as f64 - 1.0)) / j as f64;
        }
        let ex = c(n / 2.0) - s - j as f64;
        let term = binom * a.powi(j) * (ex.scale(cut.ln()).exp()) / (-ex);
        tail += term;
        if term.norm() < 1e-18 * tail.norm() {
            break;
        }
    }
    Ok(total + (band + tail) * dens)
}

/// log Det = −ζ′(0) by central differences with one Richardson step.
pub fn log_det(src: &HeatSource, lambda_shift: f64, exclude_zero_modes: bool) -> Result<ComplexValue> {
    if let HeatSource::Spectrum(spec) = src {
        finite_guard(spec)?;
        let spec = if exclude_zero_modes { spec.without_zero_modes() } else { spec.clone() };
        let lmin = spec.min_eigenvalue();
        if !(lambda_shift < lmin) {
            return Err(Error::NonPositiveShiftedOperator { shift: lambda_shift, min_eigenvalue: lmin });
        }
        let v: f64 = spec.entries.iter().map(|&(l, m)| m * (l - lambda_shift).ln()).sum();
        return Ok(ComplexValue { value: c(v), error_bound: 1e-15 * v.abs(), method: Method::ClosedForm });
    }
    let h = 1e-4;
    let z = |x: f64| zeta(src, c(x), lambda_shift, exclude_zero_modes, ZetaMethod::Continued);
    let d = |h: f64| -> Result<(Complex64, f64)> {
        let p = z(h)?;
        let m = z(-h)?;
        Ok(((p.value - m.value) / (2.0 * h), (p.error_bound + m.error_bound) / (2.0 * h)))
    };
    let (d1, e1) = d(h)?;
    let (d2, e2) = d(h / 2.0)?;
    let rich = (d2 * 4.0 - d1) / 3.0;
    let err = (rich - d2).norm() + e1 + e2;
    Ok(ComplexValue { value: -rich, error_bound: err, method: Method::Quadrature })
}

/// Small-t expansion of Θ(t) as a series in t, from the lattice representation.
pub fn small_t_series(model: &ModelOperator, terms: usize) -> Result<AsymptoticSeries> {
    let split = MellinSplit::build(model, 0.0, false, false)?;
    let mut out: Vec<SeriesTerm> = Vec::new();
    for cpt in &split.comps {
        let mut coef = cpt.coef;
        for i in 0..terms {
            if i > 0 {
                coef *= -cpt.rate / i as f64;
            }
            let p2 = (2.0 * cpt.power).round() as i64 + 2 * i as i64;
            let power = Rational64::new(p2, 2);
            if let Some(t) = out.iter_mut().find(|t| t.power == power) {
                t.coefficient += coef;
            } else {
                out.push(SeriesTerm { power, log_power: 0, coefficient: coef, provenance: Provenance::ClosedForm });
            }
        }
    }
    AsymptoticSeries::new("t", out)
}

/// Singular small-β part of the relativistic trace: terms β^{2e} with e < 0,
/// coefficient c·(4π)^{−1/2}·4^{1/2−e}·Γ(1/2−e) for each t^{e} term of Θ.
pub fn relativistic_singular_part(model: &ModelOperator) -> Result<AsymptoticSeries> {
    let theta = small_t_series(model, 2 + model.dim())?;
    let terms = theta
        .terms
        .iter()
        .filter(|t| t.power < Rational64::from_integer(0) && t.coefficient != 0.0)
        .map(|t| {
            let e = crate::series::to_f64(t.power);
            SeriesTerm {
                power: t.power * 2,
                log_power: 0,
                coefficient: t.coefficient * (4.0 * PI).powf(-0.5) * 4.0f64.powf(0.5 - e) * gamma_real(0.5 - e),
                provenance: Provenance::Residue,
            }
        })
        .collect();
    AsymptoticSeries::new("beta", terms)
}
