//! Combined heat traces of commuting operator pairs, relative invariants and
//! Bogolyubov invariants.
//!
//! Pairs live on the same torus ℝⁿ/(2πℤ)ⁿ and share the Fourier basis
//! e^{i(k+θ)·x}, so every trace is a sum over joint modes k. For DiracCircle
//! pairs the chiral involution is the parity map, which anticommutes with D
//! when the spectrum is symmetric (θ ∈ {0, ½}).

use crate::error::{invalid, Error, Result};
use crate::models::ModelOperator;
use crate::numeric::lattice::{Lattice, CUT};
use crate::numeric::quad::integrate;
use crate::numeric::sum::Neumaier;
use crate::series::{expansion_fit, powers};
use crate::traces::{kernel_eval, Kernel, Method, Statistics, TraceValue};
use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Two operators diagonal in the same Fourier basis, plus the field mass m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub plus: ModelOperator,
    pub minus: ModelOperator,
    #[serde(default)]
    pub mass: f64,
}

/// One side of a pair in lattice form: H(k) = (k+θ)ᵀG(k+θ) + mass2, D(k) = e(k+θ).
#[derive(Debug, Clone)]
struct Side {
    lattice: Lattice,
    mass2: f64,
    frame: Option<f64>,
}

impl Side {
    fn h(&self, k: &[i64]) -> f64 {
        self.lattice.value(k) + self.mass2
    }
    fn d(&self, k: &[i64]) -> f64 {
        self.frame.unwrap_or(0.0) * (k[0] as f64 + self.lattice.theta()[0])
    }
    fn form(&self) -> &DMatrix<f64> {
        self.lattice.form()
    }
}

impl TracePair {
    pub fn new(plus: ModelOperator, minus: ModelOperator, mass: f64) -> Self {
        Self { plus, minus, mass }
    }

    pub fn validate(&self) -> Result<()> {
        self.sides().map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.plus.dim()
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.plus, ModelOperator::DiracCircle { .. })
    }

    fn sides(&self) -> Result<(Side, Side)> {
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return invalid("mass must be non-negative and finite");
        }
        let side = |m: &ModelOperator| -> Result<Side> {
            m.validate()?;
            let frame = match m {
                ModelOperator::Circle { .. } | ModelOperator::FlatTorus { .. } => None,
                ModelOperator::DiracCircle { frame, .. } => Some(*frame),
                _ => {
                    return Err(Error::UnsupportedModel(
                        "pairs need Circle, FlatTorus or DiracCircle operators".into(),
                    ))
                }
            };
            let lf = m.lattice_form().expect("lattice model")?;
            Ok(Side { lattice: lf.lattice, mass2: lf.mass2, frame })
        };
        let (p, q) = (side(&self.plus)?, side(&self.minus)?);
        if p.frame.is_some() != q.frame.is_some() {
            return Err(Error::NonCommutingPair("a Dirac operator can only pair with a Dirac operator".into()));
        }
        if p.lattice.dim() != q.lattice.dim() {
            return Err(Error::NonCommutingPair("operators act on tori of different dimension".into()));
        }
        if p.lattice.theta() != q.lattice.theta() {
            return Err(Error::NonCommutingPair("different twists give different Fourier bases".into()));
        }
        Ok((p, q))
    }
}

fn check_times(t: f64, s: f64) -> Result<()> {
    if t > 0.0 && s > 0.0 && t.is_finite() && s.is_finite() {
        Ok(())
    } else {
        invalid("t and s must be positive and finite")
    }
}

/// Tr e^{−tH_a} e^{−sH_b} as one lattice sum with form tG_a + sG_b.
fn x_ab(a: &Side, b: &Side, t: f64, s: f64) -> f64 {
    let g = a.form() * t + b.form() * s;
    let lat = Lattice::new(g, a.lattice.theta().clone()).expect("positive combination");
    lat.sum(1.0).0 * (-t * a.mass2 - s * b.mass2).exp()
}

/// Σ_k (k+θ)² e^{−A(k+θ)²} in one dimension.
fn second_moment(a: f64, theta: f64) -> f64 {
    let mut acc = Neumaier::new();
    if a >= PI {
        let kmax = (CUT / a).sqrt().ceil() as i64 + 2;
        for k in -kmax..=kmax {
            let y = k as f64 + theta;
            acc.add(y * y * (-a * y * y).exp());
        }
        acc.value()
    } else {
        // derivative in A of the Poisson-dual sum
        let mmax = (CUT * a / (PI * PI)).sqrt().floor() as i64 + 1;
        for m in -mmax..=mmax {
            let mf = m as f64;
            let q = PI * PI * mf * mf / a;
            acc.add((0.5 / a - q / a) * (-q).exp() * (2.0 * PI * mf * theta).cos());
        }
        (PI / a).sqrt() * acc.value()
    }
}

/// Tr D_a e^{−tD_a²} D_b e^{−sD_b²} for DiracCircle sides.
fn y_ab(a: &Side, b: &Side, t: f64, s: f64) -> f64 {
    let (ea, eb) = (a.frame.unwrap(), b.frame.unwrap());
    ea * eb * second_moment(t * ea * ea + s * eb * eb, a.lattice.theta()[0])
}

/// Lattice with form Λ·I that dominates both sides, for enumerating joint modes.
fn envelope(p: &Side, q: &Side) -> Lattice {
    let n = p.lattice.dim();
    let lam = p.lattice.lambda_min().min(q.lattice.lambda_min());
    Lattice::new(DMatrix::identity(n, n) * lam, p.lattice.theta().clone()).unwrap()
}

/// X(t,s) = Tr e^{−tL₊} e^{−sL₋}.
pub fn combined_trace_x(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    check_times(t, s)?;
    let (p, q) = pair.sides()?;
    Ok(x_ab(&p, &q, t, s))
}

/// Y(t,s) = Tr D₊e^{−tD₊²} D₋e^{−sD₋²} for a DiracCircle pair.
pub fn combined_trace_y(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    check_times(t, s)?;
    let (p, q) = pair.sides()?;
    if p.frame.is_none() {
        return Err(Error::UnsupportedModel("Y needs a DiracCircle pair".into()));
    }
    Ok(y_ab(&p, &q, t, s))
}

/// Σ over joint modes of f(k) with |f(k)| ≤ e^{−(t+s)Λ|k+θ|²}·poly.
fn mode_sum(p: &Side, q: &Side, width: f64, f: impl Fn(&[i64]) -> f64) -> f64 {
    let env = envelope(p, q);
    let mut acc = Neumaier::new();
    env.for_each_point((CUT + 10.0) / width, |k, _| acc.add(f(k)));
    acc.value()
}

fn direct_regime(p: &Side, q: &Side, t: f64, s: f64) -> bool {
    let lam = p.lattice.lambda_min().min(q.lattice.lambda_min());
    let n = p.lattice.dim() as f64;
    (t + s) * lam >= PI && (CUT / ((t + s) * lam)).powf(n / 2.0) < 1e6
}

/// Ψ(t,s) = Tr(e^{−tL₊} − e^{−tL₋})(e^{−sL₊} − e^{−sL₋}).
pub fn relative_psi(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    check_times(t, s)?;
    let (p, q) = pair.sides()?;
    Ok(psi_sides(&p, &q, t, s))
}

fn psi_sides(p: &Side, q: &Side, t: f64, s: f64) -> f64 {
    if direct_regime(p, q, t, s) {
        mode_sum(p, q, t + s, |k| {
            let (hp, hq) = (p.h(k), q.h(k));
            ((-t * hp).exp() - (-t * hq).exp()) * ((-s * hp).exp() - (-s * hq).exp())
        })
    } else {
        x_ab(p, p, t, s) - x_ab(p, q, t, s) - x_ab(q, p, t, s) + x_ab(q, q, t, s)
    }
}

/// Φ(t,s) = Tr(D₊e^{−tD₊²} − D₋e^{−tD₋²})(D₊e^{−sD₊²} − D₋e^{−sD₋²}).
pub fn relative_phi(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    check_times(t, s)?;
    let (p, q) = pair.sides()?;
    if p.frame.is_none() {
        return Err(Error::UnsupportedModel("Φ needs a DiracCircle pair".into()));
    }
    Ok(phi_sides(&p, &q, t, s))
}

fn phi_sides(p: &Side, q: &Side, t: f64, s: f64) -> f64 {
    if direct_regime(p, q, t, s) {
        mode_sum(p, q, t + s, |k| {
            let (dp, dq) = (p.d(k), q.d(k));
            let g = |x: f64| dp * (-x * dp * dp).exp() - dq * (-x * dq * dq).exp();
            g(t) * g(s)
        })
    } else {
        y_ab(p, p, t, s) - y_ab(p, q, t, s) - y_ab(q, p, t, s) + y_ab(q, q, t, s)
    }
}

/// The metric g_{ij}(t,s) whose inverse is t·g₊^{ij} + s·g₋^{ij}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveMetric {
    pub t: f64,
    pub s: f64,
    pub g_inv: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// det(g_{ij})^{1/2}.
    pub sqrt_det: f64,
    /// Connection terms 𝓒^±_i, zero for constant twists.
    pub connection_plus: DVector<f64>,
    pub connection_minus: DVector<f64>,
}

pub fn effective_metric(pair: &TracePair, t: f64, s: f64) -> Result<EffectiveMetric> {
    check_times(t, s)?;
    let (p, q) = pair.sides()?;
    let g_inv = p.form() * t + q.form() * s;
    let g = g_inv.clone().try_inverse().expect("positive definite");
    let sqrt_det = 1.0 / g_inv.determinant().sqrt();
    let n = g.nrows();
    Ok(EffectiveMetric { t, s, g_inv, g, sqrt_det, connection_plus: DVector::zeros(n), connection_minus: DVector::zeros(n) })
}

/// B₀(t,s) = N ∫ g^{1/2}(t,s) over the torus (2π)ⁿ.
pub fn b0_predicted(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    let em = effective_metric(pair, t, s)?;
    Ok((2.0 * PI).powi(em.g.nrows() as i32) * em.sqrt_det)
}

/// C₀(t,s) = ∫ g^{1/2} (N/2) e₊ᵢ g_{ij} e₋ⱼ for a DiracCircle pair.
pub fn c0_predicted(pair: &TracePair, t: f64, s: f64) -> Result<f64> {
    let em = effective_metric(pair, t, s)?;
    let (p, q) = pair.sides()?;
    let (Some(ep), Some(eq)) = (p.frame, q.frame) else {
        return Err(Error::UnsupportedModel("C₀ needs a DiracCircle pair".into()));
    };
    Ok(2.0 * PI * em.sqrt_det * 0.5 * ep * em.g[(0, 0)] * eq)
}

/// A fitted leading coefficient against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub fitted: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub condition: f64,
}

fn leading_fit(samples: Vec<(f64, f64)>, predicted: f64) -> Result<LeadingFit> {
    let terms = (samples.len() - 2).min(3) as i64;
    let template: Vec<Rational64> = (0..terms).map(Rational64::from_integer).collect();
    let fit = expansion_fit(&samples, &powers(&template))?;
    let fitted = fit.series.coefficient(Rational64::from_integer(0), 0).unwrap();
    Ok(LeadingFit { fitted, predicted, relative_error: (fitted / predicted - 1.0).abs(), condition: fit.condition })
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.len() < 4 {
        return invalid("need at least 4 epsilon samples");
    }
    if eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return invalid("epsilons must be positive and finite");
    }
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return invalid("epsilons must span at least a decade");
    }
    Ok(())
}

/// Fit X(εt, εs)(4πε)^{n/2} by a polynomial in ε and compare its constant term with B₀.
pub fn theorem1_leading_fit(pair: &TracePair, t: f64, s: f64, epsilons: &[f64]) -> Result<LeadingFit> {
    check_epsilons(epsilons)?;
    let n = pair.dim() as f64;
    let samples = epsilons
        .iter()
        .map(|&e| Ok((e, combined_trace_x(pair, e * t, e * s)? * (4.0 * PI * e).powf(n / 2.0))))
        .collect::<Result<Vec<_>>>()?;
    leading_fit(samples, b0_predicted(pair, t, s)?)
}

/// Fit Y(εt, εs)(4πε)^{1/2}ε by a polynomial in ε and compare its constant term with C₀.
pub fn dirac_leading_fit(pair: &TracePair, t: f64, s: f64, epsilons: &[f64]) -> Result<LeadingFit> {
    check_epsilons(epsilons)?;
    let samples = epsilons
        .iter()
        .map(|&e| Ok((e, combined_trace_y(pair, e * t, e * s)? * (4.0 * PI * e).sqrt() * e)))
        .collect::<Result<Vec<_>>>()?;
    leading_fit(samples, c0_predicted(pair, t, s)?)
}

/// How a Bogolyubov invariant is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BogolyubovMethod {
    /// Direct sum over joint modes.
    Spectral,
    /// Double kernel integral over the relative invariants.
    Kernel,
}

const MODE_BUDGET: f64 = 2e7;

fn chiral_check(p: &Side) -> Result<()> {
    let th = p.lattice.theta()[0];
    if th.rem_euclid(0.5) != 0.0 {
        return Err(Error::NoChiralInvolution { twist: th });
    }
    Ok(())
}

/// Bosonic B_b or fermionic B_f Bogolyubov invariant at inverse temperature β.
pub fn bogolyubov(
    pair: &TracePair,
    beta: f64,
    statistics: Statistics,
    method: BogolyubovMethod,
) -> Result<TraceValue> {
    let (p, q) = pair.sides()?;
    let m = pair.mass;
    if !(m > 0.0) {
        return invalid("Bogolyubov invariants need a positive mass");
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return invalid("beta must be positive and finite");
    }
    if statistics == Statistics::Fermi {
        if p.frame.is_none() {
            return Err(Error::UnsupportedModel("the fermionic invariant needs a DiracCircle pair".into()));
        }
        chiral_check(&p)?;
    }
    match method {
        BogolyubovMethod::Spectral => spectral(&p, &q, m, beta, statistics),
        BogolyubovMethod::Kernel => kernel(&p, &q, m, beta, statistics),
    }
}

fn spectral(p: &Side, q: &Side, m: f64, beta: f64, stats: Statistics) -> Result<TraceValue> {
    let env = envelope(p, q);
    // every term carries at least e^{−2β√(Λ|k+θ|²)}
    let r2 = (30.0 / beta).powi(2);
    let n = env.dim() as f64;
    let needed = (2.0 * (r2 / env.lambda_min()).sqrt() + 3.0).powf(n);
    if needed > MODE_BUDGET {
        return Err(Error::BudgetExceeded { budget: MODE_BUDGET as usize, needed: needed as usize });
    }
    let mut acc = Neumaier::new();
    env.for_each_point(r2, |k, _| {
        let wp = (p.h(k) + m * m).sqrt() * beta;
        let wq = (q.h(k) + m * m).sqrt() * beta;
        let v = match stats {
            Statistics::Bose => {
                let f = 1.0 / (wp.exp() + 1.0) - 1.0 / (wq.exp() + 1.0);
                let b = 1.0 / wp.exp_m1() - 1.0 / wq.exp_m1();
                f * b
            }
            Statistics::Fermi => {
                let (sp, sq) = (1.0 / wp.sinh(), 1.0 / wq.sinh());
                let a = p.d(k) * sp - q.d(k) * sq;
                let c = sp - sq;
                beta * beta * (a * a + m * m * c * c)
            }
        };
        acc.add(v);
    });
    let value = acc.value();
    Ok(TraceValue { value, error_bound: 1e-14 * acc.abs_sum(), method: Method::Spectral })
}

fn kernel(p: &Side, q: &Side, m: f64, beta: f64, stats: Statistics) -> Result<TraceValue> {
    let b2 = beta * beta;
    let (k1, k2, pref) = match stats {
        Statistics::Bose => (Kernel::Hf, Kernel::Hb, 1.0),
        Statistics::Fermi => (Kernel::H0, Kernel::H0, 4.0 * b2),
    };
    let inner_val = |t: f64, s: f64| match stats {
        Statistics::Bose => psi_sides(p, q, b2 * t, b2 * s),
        Statistics::Fermi => phi_sides(p, q, b2 * t, b2 * s) + m * m * psi_sides(p, q, b2 * t, b2 * s),
    };
    // h(t) ≲ t^{−3/2}e^{−1/4t} below, e^{−m²β²t} above
    let lo = (1.0f64 / 260.0).ln();
    let hi = (70.0 / (m * m * b2)).max(2.0).ln();
    let run = |rel: f64, abs: f64| -> (f64, f64, bool) {
        let mut err = 0.0;
        let mut ok = true;
        let outer = |u: f64| {
            let t = u.exp();
            let wt = t * kernel_eval(k1, t, 0.0) * (-m * m * b2 * t).exp();
            if wt == 0.0 {
                return (0.0, 0.0, true);
            }
            let f = |v: f64| {
                let s = v.exp();
                s * kernel_eval(k2, s, 0.0) * (-m * m * b2 * s).exp() * inner_val(t, s)
            };
            let a = integrate(f, lo, 0.0, abs * 1e-2 / wt.abs(), rel * 0.1);
            let b = integrate(f, 0.0, hi, abs * 1e-2 / wt.abs(), rel * 0.1);
            (wt * (a.value + b.value), wt.abs() * (a.error + b.error), a.converged && b.converged)
        };
        let mut total = 0.0;
        for (x0, x1) in [(lo, 0.0), (0.0, hi)] {
            let qd = integrate(
                |u| {
                    let (v, e, c) = outer(u);
                    err += e * (x1 - x0);
                    ok &= c;
                    v
                },
                x0,
                x1,
                abs,
                rel,
            );
            total += qd.value;
            err += qd.error;
            ok &= qd.converged;
        }
        (total, err, ok)
    };
    let (coarse, _, _) = run(1e-4, 0.0);
    let target = 1e-9 * coarse.abs();
    if coarse == 0.0 {
        return Ok(TraceValue { value: 0.0, error_bound: 0.0, method: Method::Kernel });
    }
    let (value, error, ok) = run(1e-9, target);
    let value = pref * value;
    let error_bound = pref * error;
    if !ok && error_bound > 1e-7 * value.abs() {
        return Err(Error::QuadratureFailure { achieved: error_bound, target: 1e-7 * value.abs() });
    }
    Ok(TraceValue { value, error_bound, method: Method::Kernel })
}

/// Fitted leading small-β exponent of a Bogolyubov invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// p in ln B = p ln β + ln c + γβ, i.e. B ≈ cβ^p(1 + γβ).
    pub exponent: f64,
    pub expected: f64,
    /// Plain least-squares slope of ln B against ln β, for reference.
    pub loglog_slope: f64,
}

/// Leading exponent from spectral values. The first correction of the
/// small-β expansion is a β⁰ term next to β^{−n}, which the γβ column absorbs.
pub fn small_beta_exponent(pair: &TracePair, statistics: Statistics, betas: &[f64]) -> Result<ExponentFit> {
    if betas.len() < 4 {
        return invalid("need at least 4 beta samples");
    }
    let pts = betas
        .iter()
        .map(|&b| {
            let v = bogolyubov(pair, b, statistics, BogolyubovMethod::Spectral)?.value;
            if !(v > 0.0) || !(b > 0.0) {
                return invalid("invariant must be positive for an exponent fit");
            }
            Ok((b, v.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = pts.len();
    let y = DVector::from_iterator(k, pts.iter().map(|p| p.1));
    let solve = |cols: usize| -> Result<DVector<f64>> {
        let a = DMatrix::from_fn(k, cols, |i, j| match j {
            0 => pts[i].0.ln(),
            1 => 1.0,
            _ => pts[i].0,
        });
        let svd = a.svd(true, true);
        if !(svd.singular_values.min() > 1e-12 * svd.singular_values.max()) {
            return Err(Error::RankDeficient);
        }
        svd.solve(&y, 0.0).map_err(|_| Error::RankDeficient)
    };
    let exponent = solve(3)?[0];
    let loglog_slope = solve(2)?[0];
    Ok(ExponentFit { exponent, expected: -(pair.dim() as f64), loglog_slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_pair() -> TracePair {
        TracePair::new(ModelOperator::circle(1.0), ModelOperator::circle(0.5), 1.0)
    }

    #[test]
    fn psi_matches_mode_sum_at_one() {
        let v = relative_psi(&circle_pair(), 1.0, 1.0).unwrap();
        assert!((v - 0.245_060_651).abs() < 1e-9, "{v}");
    }

    #[test]
    fn identical_pair_vanishes() {
        let pair = TracePair::new(ModelOperator::circle(1.0), ModelOperator::circle(1.0), 1.0);
        for &(t, s) in &[(0.01, 0.02), (1.0, 3.0), (10.0, 0.1)] {
            assert_eq!(relative_psi(&pair, t, s).unwrap(), 0.0);
        }
        for m in [BogolyubovMethod::Spectral, BogolyubovMethod::Kernel] {
            assert_eq!(bogolyubov(&pair, 1.0, Statistics::Bose, m).unwrap().value, 0.0);
        }
    }

    #[test]
    fn twisted_pairs_do_not_commute() {
        let pair = TracePair::new(
            ModelOperator::circle(1.0),
            ModelOperator::Circle { radius: 1.0, twist: 0.25, mass2: 0.0 },
            1.0,
        );
        assert!(matches!(relative_psi(&pair, 1.0, 1.0), Err(Error::NonCommutingPair(_))));
    }

    #[test]
    fn generic_twist_has_no_chiral_involution() {
        let d = |e| ModelOperator::DiracCircle { frame: e, twist: 0.3 };
        let pair = TracePair::new(d(1.0), d(2.0), 1.0);
        let r = bogolyubov(&pair, 1.0, Statistics::Fermi, BogolyubovMethod::Spectral);
        assert!(matches!(r, Err(Error::NoChiralInvolution { .. })));
    }
}
