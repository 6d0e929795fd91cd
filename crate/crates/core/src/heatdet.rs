//! Heat determinant K(t) on flat circles and tori.
//!
//! With φ_k = e^{i(k+θ)·x}/√vol on ℝⁿ/(2πℤ)ⁿ, the correlators are
//! Ψ^{k₁…kₙ}_{l₁…lₙ} = iⁿ det[p(l₁),…,p(lₙ)]·(2π/vol)ⁿ·δ(Σk − Σl), p(l) = l+θ,
//! and K(t) = (1/n!) Σ e^{−t(λ_{k₁}+λ_{l₁}+⋯)}|Ψ|².

use crate::error::{invalid, Error, Result};
use crate::models::ModelOperator;
use crate::numeric::lattice::{Lattice, CUT};
use crate::numeric::sum::Neumaier;
use crate::traces::{Method, TraceValue};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Default cap on the number of (l₁, l₂) mode pairs visited for n = 2.
pub const DEFAULT_BUDGET: usize = 50_000_000;

/// One non-zero correlator Ψ^{k₁…kₙ}_{l₁…lₙ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub k: Vec<Vec<i64>>,
    pub l: Vec<Vec<i64>>,
    pub value: Complex64,
}

/// All non-zero correlators with every index in the box |k_i| ≤ mode_cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub n: usize,
    pub mode_cutoff: i64,
    pub entries: Vec<Correlator>,
}

impl CorrelatorSet {
    /// Ψ for the given index groups; zero when not stored.
    pub fn get(&self, k: &[Vec<i64>], l: &[Vec<i64>]) -> Complex64 {
        self.entries
            .iter()
            .find(|e| e.k == k && e.l == l)
            .map_or(Complex64::new(0.0, 0.0), |e| e.value)
    }
}

/// Torus data: λ(k) = p·Gp + mass2 and the correlator scale (2π/vol)ⁿ.
struct Torus {
    lattice: Lattice,
    mass2: f64,
    scale: f64,
}

impl Torus {
    fn new(model: &ModelOperator) -> Result<Self> {
        model.validate()?;
        match model {
            ModelOperator::Circle { .. } | ModelOperator::FlatTorus { .. } => {}
            _ => return Err(Error::UnsupportedModel("heat determinant needs a Circle or FlatTorus".into())),
        }
        let lf = model.lattice_form().expect("lattice model")?;
        let n = lf.lattice.dim();
        if n > 2 {
            return Err(Error::UnsupportedModel("heat determinant is implemented for n ≤ 2".into()));
        }
        let scale = (2.0 * PI / model.volume()).powi(n as i32);
        Ok(Self { lattice: lf.lattice, mass2: lf.mass2, scale })
    }
    fn dim(&self) -> usize {
        self.lattice.dim()
    }
    fn p(&self, k: &[i64]) -> [f64; 2] {
        let th = self.lattice.theta();
        let mut out = [0.0; 2];
        for i in 0..k.len() {
            out[i] = k[i] as f64 + th[i];
        }
        out
    }
    fn lambda(&self, k: &[i64]) -> f64 {
        self.lattice.value(k) + self.mass2
    }
    /// Modes with p·Gp ≤ r2.
    fn modes(&self, r2: f64) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        self.lattice.for_each_point(r2, |k, _| out.push(k.to_vec()));
        out
    }
}

fn det_p(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Correlators of the Fourier eigenbasis with all indices in |k_i| ≤ cutoff.
pub fn correlators(model: &ModelOperator, cutoff: i64) -> Result<CorrelatorSet> {
    let tor = Torus::new(model)?;
    if !(0..=12).contains(&cutoff) {
        return invalid("correlator cutoff must lie in 0..=12");
    }
    let n = tor.dim();
    let range: Vec<i64> = (-cutoff..=cutoff).collect();
    let mut entries = Vec::new();
    if n == 1 {
        for &l in &range {
            let v = tor.p(&[l])[0] * tor.scale;
            if v != 0.0 {
                entries.push(Correlator { k: vec![vec![l]], l: vec![vec![l]], value: Complex64::new(0.0, v) });
            }
        }
    } else {
        let modes: Vec<Vec<i64>> = range.iter().flat_map(|&a| range.iter().map(move |&b| vec![a, b])).collect();
        for l1 in &modes {
            for l2 in &modes {
                let d = det_p(tor.p(l1), tor.p(l2));
                if d == 0.0 {
                    continue;
                }
                for k1 in &modes {
                    let k2 = vec![l1[0] + l2[0] - k1[0], l1[1] + l2[1] - k1[1]];
                    if k2.iter().any(|x| x.abs() > cutoff) {
                        continue;
                    }
                    entries.push(Correlator {
                        k: vec![k1.clone(), k2],
                        l: vec![l1.clone(), l2.clone()],
                        value: Complex64::new(-d * tor.scale, 0.0),
                    });
                }
            }
        }
    }
    Ok(CorrelatorSet { n, mode_cutoff: cutoff, entries })
}

/// Options for the spectral sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatDetOptions {
    /// Largest p·Gp included; automatic (Gaussian tail below e^{−45}) when None.
    pub cutoff: Option<f64>,
    /// Cap on the number of mode pairs visited for n = 2.
    pub budget: usize,
    /// Relative tolerance for the truncation tail.
    pub tolerance: f64,
}

impl Default for HeatDetOptions {
    fn default() -> Self {
        Self { cutoff: None, budget: DEFAULT_BUDGET, tolerance: 1e-10 }
    }
}

/// K(t) from the spectral representation.
pub fn heat_det(model: &ModelOperator, t: f64, opts: HeatDetOptions) -> Result<TraceValue> {
    let tor = Torus::new(model)?;
    if !(t > 0.0) || !t.is_finite() {
        return invalid("t must be positive and finite");
    }
    let n = tor.dim();
    // the first shell around the origin is always included
    let auto = ((CUT + 10.0) / (2.0 * t)).max(4.0 * tor.lattice.lambda_max());
    let r2 = opts.cutoff.unwrap_or(auto);
    if !(r2 > 0.0) {
        return invalid("cutoff must be positive");
    }
    // every discarded term carries e^{−2t·r2} or less, times a polynomial count
    let tail = if r2 >= auto { 0.0 } else { (-2.0 * t * r2).exp() * (1.0 + r2).powf(n as f64 + 1.0) };
    let modes = tor.modes(r2);
    let value = if n == 1 {
        let mut acc = Neumaier::new();
        for k in &modes {
            let v = tor.p(k)[0] * tor.scale;
            acc.add(v * v * (-2.0 * t * tor.lambda(k)).exp());
        }
        acc.value()
    } else {
        let needed = modes.len().saturating_mul(modes.len());
        if needed > opts.budget {
            return Err(Error::BudgetExceeded { budget: opts.budget, needed });
        }
        torus2(&tor, t, &modes)
    };
    if tail > opts.tolerance * value.abs() {
        return Err(Error::TailTooLarge { bound: tail, tolerance: opts.tolerance * value.abs() });
    }
    Ok(TraceValue { value, error_bound: tail + 1e-14 * value.abs(), method: Method::Spectral })
}

/// ½ Σ_{l₁,l₂} e^{−t(λ₁+λ₂)} det(p₁,p₂)² scale² S(l₁+l₂), S(L) = Σ_k e^{−t(λ_k+λ_{L−k})}.
fn torus2(tor: &Torus, t: f64, modes: &[Vec<i64>]) -> f64 {
    let lo: Vec<i64> = (0..2).map(|i| modes.iter().map(|k| k[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..2).map(|i| modes.iter().map(|k| k[i]).max().unwrap()).collect();
    let w0 = (2 * (hi[0] - lo[0]) + 1) as usize;
    let w1 = (2 * (hi[1] - lo[1]) + 1) as usize;
    let idx = |l: &[i64]| ((l[0] - 2 * lo[0]) as usize) * w1 + (l[1] - 2 * lo[1]) as usize;
    let weights: Vec<f64> = modes.iter().map(|k| (-t * tor.lambda(k)).exp()).collect();
    let s_table: Vec<f64> = (0..w0 * w1)
        .into_par_iter()
        .map(|j| {
            let big = [(j / w1) as i64 + 2 * lo[0], (j % w1) as i64 + 2 * lo[1]];
            let mut acc = Neumaier::new();
            for (k, w) in modes.iter().zip(&weights) {
                let other = [big[0] - k[0], big[1] - k[1]];
                acc.add(w * (-t * tor.lambda(&other)).exp());
            }
            acc.value()
        })
        .collect();
    let partial: Vec<f64> = modes
        .par_iter()
        .zip(&weights)
        .map(|(l1, w1_)| {
            let p1 = tor.p(l1);
            let mut acc = Neumaier::new();
            for (l2, w2) in modes.iter().zip(&weights) {
                let d = det_p(p1, tor.p(l2));
                let sum = [l1[0] + l2[0], l1[1] + l2[1]];
                acc.add(w1_ * w2 * d * d * s_table[idx(&sum)]);
            }
            acc.value()
        })
        .collect();
    let mut acc = Neumaier::new();
    for v in partial {
        acc.add(v);
    }
    0.5 * tor.scale * tor.scale * acc.value()
}

/// ½Nⁿ(4π)^{−n²}(π/2n)^{n/2}·vol(M), the coefficient of t^{−n(n+½)}.
pub fn heat_det_leading(n: usize, fiber_dim: usize, vol: f64) -> f64 {
    let nf = n as f64;
    0.5 * (fiber_dim as f64).powi(n as i32) * (4.0 * PI).powf(-nf * nf) * (PI / (2.0 * nf)).powf(nf / 2.0) * vol
}

/// K(t) from its defining double integral ∫∫dx dx′ det tr(U*∇_μ∇_ν′U).
///
/// The integrand depends on x − x′ only; the remaining integral of a
/// trigonometric polynomial is evaluated exactly by the trapezoidal rule.
pub fn heat_det_defining(model: &ModelOperator, t: f64, mode_cutoff: i64) -> Result<TraceValue> {
    let tor = Torus::new(model)?;
    if !(t > 0.0) || !t.is_finite() {
        return invalid("t must be positive and finite");
    }
    if !(1..=40).contains(&mode_cutoff) {
        return invalid("mode cutoff must lie in 1..=40");
    }
    let n = tor.dim();
    let c = mode_cutoff;
    let modes: Vec<Vec<i64>> = if n == 1 {
        (-c..=c).map(|a| vec![a]).collect()
    } else {
        (-c..=c).flat_map(|a| (-c..=c).map(move |b| vec![a, b])).collect()
    };
    // products of n+n Fourier series reach frequency 2n·c
    let m = (2 * n as i64 * c + 1) as usize + 1;
    let h = 2.0 * PI / m as f64;
    let vol = model.volume();
    let grid: Vec<Vec<f64>> = if n == 1 {
        (0..m).map(|i| vec![i as f64 * h]).collect()
    } else {
        (0..m * m).map(|j| vec![(j / m) as f64 * h, (j % m) as f64 * h]).collect()
    };
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|u| {
            let mut uu = Complex64::new(0.0, 0.0);
            let mut w = [[Complex64::new(0.0, 0.0); 2]; 2];
            for k in &modes {
                let p = tor.p(k);
                let phase = (0..n).map(|i| p[i] * u[i]).sum::<f64>();
                let e = Complex64::from_polar((-t * tor.lambda(k)).exp(), phase);
                uu += e;
                for a in 0..n {
                    for b in 0..n {
                        w[a][b] += e * p[a] * p[b];
                    }
                }
            }
            let cu = uu.conj() / vol;
            let tm = |a: usize, b: usize| cu * w[a][b] / vol;
            let det = if n == 1 { tm(0, 0) } else { tm(0, 0) * tm(1, 1) - tm(0, 1) * tm(1, 0) };
            det.re
        })
        .collect();
    let mut acc = Neumaier::new();
    for v in vals {
        acc.add(v);
    }
    // ∫dx over the torus times the mean of the integrand in u
    let value = (2.0 * PI).powi(n as i32) * (2.0 * PI).powi(n as i32) * acc.value() / (grid.len() as f64);
    let kmin = c as f64 + 1.0 - tor.lattice.theta().amax();
    let tail = (-2.0 * t * tor.lattice.lambda_min() * kmin * kmin).exp() * value.abs().max(1.0);
    Ok(TraceValue { value, error_bound: tail, method: Method::Quadrature })
}
