//! Classical, relativistic and quantum heat traces.

use crate::error::{invalid, Error, Result};
use crate::models::{eigenvalues, CountingBound, ModelOperator, Spectrum};
use crate::numeric::lattice::Path;
use crate::numeric::quad::{integrate, integrate_to_infinity};
use crate::numeric::special::riemann_zeta;
use crate::numeric::sum::Neumaier;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How a trace value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Theta,
    ClosedForm,
    Subordination,
    Kernel,
    Spectral,
    Quadrature,
    Fit,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Theta => "theta",
            Method::ClosedForm => "closed_form",
            Method::Subordination => "subordination",
            Method::Kernel => "kernel",
            Method::Spectral => "spectral",
            Method::Quadrature => "quadrature",
            Method::Fit => "fit",
        }
    }
}

/// A computed value with an error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub value: f64,
    pub error_bound: f64,
    pub method: Method,
}

/// Particle statistics for quantum traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Bose,
    Fermi,
}

/// Evaluation path for relativistic and quantum traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    Direct,
    /// Subordination integral for relativistic traces, kernel integral for quantum traces.
    Integral,
}

/// Where heat-trace values come from: a model (with exact lattice or closed
/// forms where available) or an explicit spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum HeatSource {
    Model(ModelOperator),
    Spectrum(Spectrum),
}

impl From<ModelOperator> for HeatSource {
    fn from(m: ModelOperator) -> Self {
        HeatSource::Model(m)
    }
}

impl From<Spectrum> for HeatSource {
    fn from(s: Spectrum) -> Self {
        HeatSource::Spectrum(s)
    }
}

const AUTO_CUTOFF_MAX: f64 = 1e9;

impl HeatSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            HeatSource::Model(m) => m.validate(),
            HeatSource::Spectrum(s) => {
                if s.entries.is_empty() {
                    return Err(Error::CutoffTooSmall { cutoff: s.cutoff });
                }
                Ok(())
            }
        }
    }

    /// Spatial dimension entering (4πt)^{-n/2}; 0 for finite spectra.
    pub fn dim(&self) -> usize {
        match self {
            HeatSource::Model(m) => m.dim(),
            HeatSource::Spectrum(s) => match s.tail {
                CountingBound::Finite => 0,
                CountingBound::Power { d, .. } => (2.0 * d).round() as usize,
                CountingBound::Ball { n, .. } => n as usize,
            },
        }
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.low_spectrum()?.min_eigenvalue())
    }

    /// Smallest eigenvalue that is not a zero mode, and the zero-mode multiplicity.
    pub fn lowest_nonzero(&self) -> Result<(f64, f64)> {
        let s = self.low_spectrum()?;
        let z = s.zero_modes();
        let nz = s.without_zero_modes();
        Ok((nz.entries.first().map(|e| e.0).unwrap_or(f64::INFINITY), z))
    }

    /// A spectrum containing at least the lowest levels.
    fn low_spectrum(&self) -> Result<Spectrum> {
        match self {
            HeatSource::Spectrum(s) => Ok(s.clone()),
            HeatSource::Model(m) => {
                let mut cutoff = 16.0;
                loop {
                    match eigenvalues(m, cutoff) {
                        Ok(s) if s.without_zero_modes().entries.len() >= 2 => return Ok(s),
                        Ok(_) | Err(Error::CutoffTooSmall { .. }) if cutoff < AUTO_CUTOFF_MAX => cutoff *= 4.0,
                        Ok(s) => return Ok(s),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }

    /// Classical heat trace Θ(t), using the cheapest exact path.
    pub fn theta(&self, t: f64) -> Result<TraceValue> {
        self.theta_with(t, None)
    }

    /// Θ(t) forcing the lattice path (Direct or Dual) when the model has one.
    pub fn theta_with(&self, t: f64, path: Option<Path>) -> Result<TraceValue> {
        if !(t > 0.0) || !t.is_finite() {
            return invalid("t must be positive and finite");
        }
        match self {
            HeatSource::Spectrum(s) => classical_trace(s, t, 1e-12),
            HeatSource::Model(m) => {
                m.validate()?;
                if let Some(lf) = m.lattice_form() {
                    let lf = lf?;
                    let p = path.unwrap_or_else(|| lf.lattice.preferred_path(t));
                    let (s, method) = match p {
                        Path::Direct => (lf.lattice.sum_direct(t), Method::Direct),
                        Path::Dual => (lf.lattice.sum_dual(t), Method::Theta),
                    };
                    let value = (-t * lf.mass2).exp() * (lf.weight * s + lf.constant);
                    let scale = (-t * lf.mass2).exp() * (lf.weight * s.abs() + lf.constant.abs());
                    return Ok(TraceValue { value, error_bound: 1e-15 * scale, method });
                }
                if let ModelOperator::Landau { field, mass2, .. } = m {
                    let value = field / (2.0 * PI) * (-t * mass2).exp() / (2.0 * (t * field).sinh());
                    return Ok(TraceValue { value, error_bound: 1e-15 * value, method: Method::ClosedForm });
                }
                let f = |l: f64| (-t * l).exp();
                let df = |l: f64| t * (-t * l).exp();
                auto_spectral_sum(m, &f, &df, 1.0 / t, 1e-13)
            }
        }
    }

    /// Direct spectral sum Σ mult·f(λ) with an automatically chosen cutoff.
    pub(crate) fn spectral_sum(
        &self,
        f: &dyn Fn(f64) -> f64,
        neg_df: &dyn Fn(f64) -> f64,
        width: f64,
        rel_tol: f64,
    ) -> Result<TraceValue> {
        match self {
            HeatSource::Spectrum(s) => bounded_sum(s, f, neg_df, width),
            HeatSource::Model(m) => auto_spectral_sum(m, f, neg_df, width, rel_tol),
        }
    }
}

/// Σ mult·f(λ) over the spectrum plus a bound on the omitted tail.
fn bounded_sum(
    spec: &Spectrum,
    f: &dyn Fn(f64) -> f64,
    neg_df: &dyn Fn(f64) -> f64,
    width: f64,
) -> Result<TraceValue> {
    let mut acc = Neumaier::new();
    for &(l, m) in &spec.entries {
        acc.add(m * f(l));
    }
    let value = acc.value();
    let tail = tail_bound(&spec.tail, spec.cutoff, neg_df, width);
    Ok(TraceValue { value, error_bound: tail + 4e-16 * acc.abs_sum(), method: Method::Direct })
}

/// Upper bound on Σ_{λ > cutoff} mult·f(λ) from ∫_Λ^∞ N_up(λ)(−f′(λ)) dλ.
pub fn tail_bound(bound: &CountingBound, cutoff: f64, neg_df: &dyn Fn(f64) -> f64, width: f64) -> f64 {
    if *bound == CountingBound::Finite {
        return 0.0;
    }
    let q = integrate_to_infinity(|l| bound.upper(l) * neg_df(l), cutoff, width.max(1e-12), 1e-300, 1e-8);
    (q.value + q.error) * (1.0 + 1e-6)
}

fn auto_spectral_sum(
    m: &ModelOperator,
    f: &dyn Fn(f64) -> f64,
    neg_df: &dyn Fn(f64) -> f64,
    width: f64,
    rel_tol: f64,
) -> Result<TraceValue> {
    let mut cutoff = 16.0f64.max(8.0 * width);
    loop {
        let spec = match eigenvalues(m, cutoff) {
            Err(Error::CutoffTooSmall { .. }) if cutoff < AUTO_CUTOFF_MAX => {
                cutoff *= 2.0;
                continue;
            }
            r => r?,
        };
        let tv = bounded_sum(&spec, f, neg_df, width)?;
        if tv.error_bound <= rel_tol * tv.value.abs() {
            return Ok(tv);
        }
        if cutoff >= AUTO_CUTOFF_MAX {
            return Err(Error::TailTooLarge { bound: tv.error_bound, tolerance: rel_tol * tv.value.abs() });
        }
        cutoff *= 2.0;
    }
}

/// Θ(t) = Σ mult·e^{−tλ} with a truncation bound; fails when the bound exceeds rel_tol·Θ.
pub fn classical_trace(spec: &Spectrum, t: f64, rel_tol: f64) -> Result<TraceValue> {
    if !(t > 0.0) {
        return invalid("t must be positive");
    }
    let tv = bounded_sum(spec, &|l| (-t * l).exp(), &|l| t * (-t * l).exp(), 1.0 / t)?;
    if tv.error_bound > rel_tol * tv.value.abs() && tv.error_bound > 1e-300 {
        return Err(Error::TailTooLarge { bound: tv.error_bound, tolerance: rel_tol * tv.value.abs() });
    }
    Ok(tv)
}

/// Θ_r(β) = Tr e^{−β√L}.
///
/// Zero modes contribute 1 each on both paths. The integral path is the
/// subordination identity applied to Θ(tβ²).
pub fn relativistic_trace(src: &HeatSource, beta: f64, method: TraceMethod) -> Result<TraceValue> {
    src.validate()?;
    if !(beta > 0.0) || !beta.is_finite() {
        return invalid("beta must be positive and finite");
    }
    let lmin = src.min_eigenvalue()?;
    if lmin < 0.0 {
        return Err(Error::NonPositiveOperator { min_eigenvalue: lmin });
    }
    match method {
        TraceMethod::Direct => {
            let f = move |l: f64| (-beta * l.max(0.0).sqrt()).exp();
            let df = move |l: f64| {
                let r = l.max(1e-300).sqrt();
                beta / (2.0 * r) * (-beta * r).exp()
            };
            let width = 4.0 / (beta * beta);
            let mut tv = src.spectral_sum(&f, &df, width, 1e-13)?;
            tv.method = Method::Direct;
            Ok(tv)
        }
        TraceMethod::Integral => {
            let (l1, zero) = src.lowest_nonzero()?;
            let weight = |t: f64| (4.0 * PI).powf(-0.5) * t.powf(-1.5) * (-0.25 / t).exp();
            let (value, err) = log_time_integral(src, beta, l1, 0.0, &weight, zero, 1e-11)?;
            Ok(TraceValue { value: value + zero, error_bound: err, method: Method::Subordination })
        }
    }
}

/// Quantum trace Tr 1/(e^{β(√L−μ)} ∓ 1).
pub fn quantum_trace(
    src: &HeatSource,
    beta: f64,
    mu: f64,
    stats: Statistics,
    method: TraceMethod,
) -> Result<TraceValue> {
    src.validate()?;
    if !(beta > 0.0) || !beta.is_finite() || !mu.is_finite() {
        return invalid("beta must be positive and mu finite");
    }
    let lmin = src.min_eigenvalue()?;
    if !(lmin > 0.0) {
        return Err(Error::NonPositiveOperator { min_eigenvalue: lmin });
    }
    let threshold = lmin.sqrt();
    if stats == Statistics::Bose && mu >= threshold {
        return Err(Error::BoseDivergence { mu, threshold });
    }
    let sign = match stats {
        Statistics::Bose => -1.0,
        Statistics::Fermi => 1.0,
    };
    match method {
        TraceMethod::Direct => {
            let f = move |l: f64| 1.0 / ((beta * (l.sqrt() - mu)).exp() + sign);
            let df = move |l: f64| {
                let r = l.max(1e-300).sqrt();
                let y = beta * (r - mu);
                // derivative of 1/(e^y ± 1) written with e^{-y} to avoid overflow
                let e = (-y).exp();
                beta / (2.0 * r) * e / (1.0 + sign * e).powi(2)
            };
            let width = 4.0 * (threshold.max(mu.abs()) + 1.0 / beta) / beta;
            let mut tv = src.spectral_sum(&f, &df, width, 1e-13)?;
            tv.method = Method::Direct;
            Ok(tv)
        }
        TraceMethod::Integral => {
            if mu >= threshold {
                return invalid("kernel path needs mu below sqrt(lambda_min)");
            }
            let x = beta * mu;
            let family = match stats {
                Statistics::Bose => Kernel::Hb,
                Statistics::Fermi => Kernel::Hf,
            };
            let weight = move |t: f64| kernel_eval(family, t, x);
            let (value, err) = log_time_integral(src, beta, lmin, mu.max(0.0), &weight, 0.0, 1e-11)?;
            Ok(TraceValue { value, error_bound: err, method: Method::Kernel })
        }
    }
}

/// ∫₀^∞ w(t)·(Θ(tβ²) − zero) dt by adaptive quadrature in u = ln t.
fn log_time_integral(
    src: &HeatSource,
    beta: f64,
    l1: f64,
    mu_plus: f64,
    weight: &dyn Fn(f64) -> f64,
    zero: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let n = src.dim() as f64;
    // lower end: e^{−1/4t} beats t^{−(n+1)/2}·β^{−n}
    let mut t_lo: f64 = 1.0 / 200.0;
    for _ in 0..8 {
        let l = 50.0 + (0.5 * n + 0.5) * (1.0 / t_lo).ln() + n * (1.0 / beta).ln().max(0.0);
        t_lo = 1.0 / (4.0 * l);
    }
    let gap = beta * beta * (l1 - mu_plus * mu_plus);
    let t_hi = if gap.is_finite() && gap > 0.0 { (70.0 / gap).max(10.0 * t_lo) } else { 10.0 * t_lo };
    let mut failure: Option<Error> = None;
    let integrand = |u: f64| {
        let t = u.exp();
        let w = weight(t);
        if w == 0.0 {
            return 0.0;
        }
        match src.theta(t * beta * beta) {
            Ok(tv) => w * (tv.value - zero) * t,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let q = integrate(integrand, t_lo.ln(), t_hi.ln(), 1e-300, rel_tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let target = 1e3 * rel_tol * q.value.abs();
    if !q.converged && q.error > target {
        return Err(Error::QuadratureFailure { achieved: q.error, target });
    }
    Ok((q.value, q.error))
}

/// Kernels turning heat traces into quantum traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Hf,
    Hb,
    H0,
}

/// h(t, x) for the Fermi (h_f), Bose (h_b) or odd (h_0) kernel family.
///
/// h_f(t,x) = (4π)^{-1/2} t^{-3/2} Σ_{k≥1} (−1)^{k+1} k e^{−k²/4t + kx},
/// h_b without the sign and h_0 summed over odd k with x ignored. The
/// alternating series at x = 0 and large t is replaced by its exponentially
/// accurate expansion in 1/t.
pub fn kernel_eval(family: Kernel, t: f64, x: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let pref = (4.0 * PI).powf(-0.5) * t.powf(-1.5);
    if family == Kernel::Hf && x == 0.0 && t > 25.0 {
        return pref * hf_large_t_series(t);
    }
    let (step, start, alt, xx) = match family {
        Kernel::Hf => (1u64, 1u64, true, x),
        Kernel::Hb => (1, 1, false, x),
        Kernel::H0 => (2, 1, false, 0.0),
    };
    let mut acc = Neumaier::new();
    let peak = (2.0 * t * xx).max(0.0);
    let mut k = start;
    let mut sign = 1.0;
    loop {
        let kf = k as f64;
        let e = -kf * kf / (4.0 * t) + kf * xx;
        acc.add(sign * kf * e.exp());
        if kf > peak && e < -45.0 + (kf.ln()).min(0.0) - 2.0 {
            break;
        }
        if kf > 1e9 {
            break;
        }
        k += step;
        if alt {
            sign = -sign;
        }
    }
    pref * acc.value()
}

/// Σ_{k≥1} (−1)^{k+1} k e^{−k²/4t} = Σ_n c_n with
/// c_n = (2^{2n+2}−1)·2·(2n+1)!·ζ(2n+2)/((2π)^{2n+2} n! (4t)^n).
fn hf_large_t_series(t: f64) -> f64 {
    let mut c = 0.25;
    let mut sum = Neumaier::new();
    sum.add(c);
    let mut zeta_prev = riemann_zeta(2.0);
    for n in 1..400u32 {
        let nf = n as f64;
        let zeta = riemann_zeta(2.0 * nf + 2.0);
        let pow_ratio = (4.0f64.powf(nf + 1.0) - 1.0) / (4.0f64.powf(nf) - 1.0);
        let next = c * pow_ratio * (2.0 * nf + 1.0) * (2.0 * nf) / (4.0 * PI * PI * nf * 4.0 * t) * zeta
            / zeta_prev;
        if next >= c || next <= 1e-18 * sum.value() {
            if next < c {
                sum.add(next);
            }
            break;
        }
        sum.add(next);
        c = next;
        zeta_prev = zeta;
    }
    sum.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BoundaryCondition;

    fn direct_hf(t: f64) -> f64 {
        // plain partial sum in extended stepping for moderate t
        let mut s = 0.0;
        for k in 1..20000u64 {
            let kf = k as f64;
            let term = kf * (-kf * kf / (4.0 * t)).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-30 && kf * kf > 4.0 * t {
                break;
            }
        }
        (4.0 * PI).powf(-0.5) * t.powf(-1.5) * s
    }

    #[test]
    fn hf_series_matches_direct_sum_at_switch() {
        for &t in &[25.0, 30.0, 60.0] {
            let series = kernel_eval(Kernel::Hf, t, 0.0);
            let direct = direct_hf(t);
            assert!((series - direct).abs() < 1e-12 * series.abs(), "t={t}: {series} vs {direct}");
        }
    }

    #[test]
    fn hf_laplace_transform_gives_fermi_occupation() {
        let q = integrate(|u| {
            let t = u.exp();
            kernel_eval(Kernel::Hf, t, 0.0) * (-t).exp() * t
        }, -8.0, 5.0, 1e-300, 1e-13);
        let exact = 1.0 / (1.0f64.exp() + 1.0);
        assert!((q.value - exact).abs() < 1e-11);
    }

    #[test]
    fn kernel_split_identities() {
        for &t in &[0.05, 0.3, 0.7, 3.0, 9.0] {
            let hb = kernel_eval(Kernel::Hb, t, 0.0);
            let hf = kernel_eval(Kernel::Hf, t, 0.0);
            let hb4 = kernel_eval(Kernel::Hb, t / 4.0, 0.0);
            let h0 = kernel_eval(Kernel::H0, t, 0.0);
            assert!(((hb - hf) - 0.5 * hb4).abs() < 1e-12 * hb);
            assert!((hb - (h0 + 0.25 * hb4)).abs() < 1e-12 * hb);
        }
    }

    #[test]
    fn circle_trace_value() {
        let src = HeatSource::from(ModelOperator::circle(1.0));
        let d = src.theta_with(1.0, Some(Path::Direct)).unwrap().value;
        let p = src.theta_with(1.0, Some(Path::Dual)).unwrap().value;
        assert!((d - 1.7726372048).abs() < 1e-9);
        assert!((d - p).abs() < 1e-12);
    }

    #[test]
    fn relativistic_circle_both_paths() {
        let src = HeatSource::from(ModelOperator::circle(1.0));
        for &b in &[0.5f64, 1.0, 2.0] {
            let exact = 1.0 / (0.5 * b).tanh();
            let d = relativistic_trace(&src, b, TraceMethod::Direct).unwrap().value;
            let s = relativistic_trace(&src, b, TraceMethod::Integral).unwrap().value;
            assert!((d - exact).abs() < 1e-10 * exact, "direct {b}: {d}");
            assert!((s - exact).abs() < 1e-9 * exact, "subordination {b}: {s} vs {exact}");
        }
    }

    #[test]
    fn quantum_single_mode() {
        let spec = Spectrum::from_levels(vec![(1.0, 1.0)]).unwrap();
        let src = HeatSource::from(spec);
        let b = quantum_trace(&src, 1.0, 0.0, Statistics::Bose, TraceMethod::Direct).unwrap().value;
        assert!((b - 1.0 / (1.0f64.exp() - 1.0)).abs() < 1e-15);
        let k = quantum_trace(&src, 1.0, 0.0, Statistics::Bose, TraceMethod::Integral).unwrap().value;
        assert!((k - b).abs() < 1e-9 * b, "{k} vs {b}");
    }

    #[test]
    fn robin_interval_trace_has_bound() {
        let m = ModelOperator::Interval {
            length: 1.0,
            left: BoundaryCondition::Robin(0.3),
            right: BoundaryCondition::Dirichlet,
        };
        let tv = HeatSource::from(m).theta(0.01).unwrap();
        assert!(tv.error_bound < 1e-12 * tv.value);
    }
}
