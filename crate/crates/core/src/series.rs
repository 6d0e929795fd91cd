//! Finite asymptotic expansions and least-squares coefficient extraction.

use crate::error::{invalid, Error, Result};
use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

/// Where a coefficient came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fitted,
    ClosedForm,
    Residue,
}

/// One term c·ε^p·(ln ε)^l.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub power: Rational64,
    pub log_power: u8,
    pub coefficient: f64,
    pub provenance: Provenance,
}

/// Σ c_k ε^{p_k} (ln ε)^{l_k}, sorted by (power, log_power).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSeries {
    pub variable: String,
    pub terms: Vec<SeriesTerm>,
}

impl AsymptoticSeries {
    pub fn new(variable: impl Into<String>, mut terms: Vec<SeriesTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.log_power > 1) {
            return invalid("log_power must be 0 or 1");
        }
        terms.sort_by_key(|a| (a.power, a.log_power));
        if terms.windows(2).any(|w| (w[0].power, w[0].log_power) == (w[1].power, w[1].log_power)) {
            return invalid("duplicate (power, log_power) term");
        }
        Ok(Self { variable: variable.into(), terms })
    }

    pub fn evaluate(&self, eps: f64) -> f64 {
        self.terms.iter().map(|t| t.coefficient * basis(eps, t.power, t.log_power)).sum()
    }

    pub fn coefficient(&self, power: Rational64, log_power: u8) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.power == power && t.log_power == log_power)
            .map(|t| t.coefficient)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("series serializes")
    }
}

pub(crate) fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn basis(eps: f64, p: Rational64, l: u8) -> f64 {
    let v = eps.powf(to_f64(p));
    if l == 1 {
        v * eps.ln()
    } else {
        v
    }
}

/// A fitted series with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub series: AsymptoticSeries,
    pub condition: f64,
    pub residual_norm: f64,
}

const MAX_CONDITION: f64 = 1e12;

/// Least-squares fit of samples (ε, value) to Σ c_j ε^{p_j}(ln ε)^{l_j}.
///
/// Columns are scaled to unit norm before the SVD; the condition number
/// reported is that of the scaled design matrix.
pub fn expansion_fit(samples: &[(f64, f64)], template: &[(Rational64, u8)]) -> Result<FitReport> {
    let m = template.len();
    if m == 0 {
        return invalid("template must not be empty");
    }
    if samples.len() < m + 2 {
        return invalid(format!("need at least {} samples for {} template terms", m + 2, m));
    }
    if samples.iter().any(|&(e, v)| !(e > 0.0) || !e.is_finite() || !v.is_finite()) {
        return invalid("samples need positive finite epsilon and finite values");
    }
    let mut eps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return invalid("epsilon values must be distinct");
    }
    let probe = AsymptoticSeries::new(
        "eps",
        template
            .iter()
            .map(|&(p, l)| SeriesTerm { power: p, log_power: l, coefficient: 0.0, provenance: Provenance::Fitted })
            .collect(),
    )?;
    let n = samples.len();
    let mut a = DMatrix::from_fn(n, m, |i, j| basis(samples[i].0, template[j].0, template[j].1));
    let mut scale = vec![0.0; m];
    #[allow(clippy::needless_range_loop)]
    for j in 0..m {
        let s = a.column(j).norm();
        if s == 0.0 || !s.is_finite() {
            return Err(Error::RankDeficient);
        }
        scale[j] = s;
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-15) {
        return Err(Error::RankDeficient);
    }
    let condition = smax / smin;
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let x = svd.solve(&b, 0.0).map_err(|_| Error::RankDeficient)?;
    let residual_norm = (&a * &x - &b).norm();
    let mut terms = probe.terms;
    for t in terms.iter_mut() {
        let j = template.iter().position(|&(p, l)| p == t.power && l == t.log_power).unwrap();
        t.coefficient = x[j] / scale[j];
    }
    Ok(FitReport { series: AsymptoticSeries { variable: "eps".into(), terms }, condition, residual_norm })
}

/// Convenience: template of powers without logarithms.
pub fn powers(ps: &[Rational64]) -> Vec<(Rational64, u8)> {
    ps.iter().map(|&p| (p, 0)).collect()
}
