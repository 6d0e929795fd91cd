//! Job files: one command, its inputs, a parameter grid, tolerances and output settings.

use heatlab_core::invariants::GeometryData;
use heatlab_core::models::ModelOperator;
use heatlab_core::relative::TracePair;
use heatlab_core::traces::Statistics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandId {
    Spectrum,
    Trace,
    Rtrace,
    Qtrace,
    Aq,
    Zeta,
    Logdet,
    Coeffs,
    GgsGamma,
    Nonlaplace,
    Magnetic,
    Relative,
    Bogolyubov,
    Heatdet,
    Weyl,
    Fit,
}

impl CommandId {
    pub fn name(&self) -> &'static str {
        match self {
            CommandId::Spectrum => "spectrum",
            CommandId::Trace => "trace",
            CommandId::Rtrace => "rtrace",
            CommandId::Qtrace => "qtrace",
            CommandId::Aq => "aq",
            CommandId::Zeta => "zeta",
            CommandId::Logdet => "logdet",
            CommandId::Coeffs => "coeffs",
            CommandId::GgsGamma => "ggs-gamma",
            CommandId::Nonlaplace => "nonlaplace",
            CommandId::Magnetic => "magnetic",
            CommandId::Relative => "relative",
            CommandId::Bogolyubov => "bogolyubov",
            CommandId::Heatdet => "heatdet",
            CommandId::Weyl => "weyl",
            CommandId::Fit => "fit",
        }
    }
}

/// Real matrix as rows.
pub type Rows = Vec<Vec<f64>>;

/// Complex matrix as real and imaginary rows; a missing imaginary part is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexRows {
    pub re: Rows,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub im: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylModelSpec {
    pub g: Rows,
    pub curv: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylPairSpec {
    pub plus: WeylModelSpec,
    pub minus: WeylModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObliqueSpec {
    pub n: usize,
    pub gammas: Vec<ComplexRows>,
    pub boundary_metric: Rows,
    pub pi: ComplexRows,
}

/// Constant-coefficient symbol: either `diagonal` (a^{μν} = diag(h)δ^{μν}, Q = 0)
/// or the full `a` blocks with optional `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<ComplexRows>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<ComplexRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticSpec {
    pub f: Rows,
}

/// Sweep-and-fit settings: the swept operation and the powers of the template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub op: FitOp,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitOp {
    /// Θ(t) over grid.t.
    Trace,
    /// K(t) over grid.t.
    Heatdet,
    /// Leading term of X(εt, εs) over grid.eps.
    Relative,
    /// Leading term of Y(εt, εs) over grid.eps.
    DiracRelative,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Statistics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_zero_modes: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_cutoff: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_prime: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_quadrature: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Truncation tolerance of spectral sums.
    #[serde(default = "default_sum")]
    pub sum: f64,
    /// Largest accepted discrepancy of a cross-check.
    #[serde(default = "default_check")]
    pub check: f64,
}

fn default_sum() -> f64 {
    1e-10
}

fn default_check() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sum: default_sum(), check: default_check() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: CommandId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<TracePair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylPairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oblique: Option<ObliqueSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<MagneticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
}

impl JobSpec {
    pub fn new(command: CommandId) -> Self {
        Self {
            command,
            model: None,
            pair: None,
            weyl: None,
            geometry: None,
            oblique: None,
            symbol: None,
            magnetic: None,
            fit: None,
            options: Options::default(),
            grid: Grid::default(),
            tolerances: Tolerances::default(),
            output: Output::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    /// Checks that do not need a computation: required grids present and positive, sane tolerances.
    pub fn validate(&self) -> Result<(), String> {
        for (name, tol) in [("sum", self.tolerances.sum), ("check", self.tolerances.check)] {
            if !(tol >= 1e-14) || !tol.is_finite() {
                return Err(format!("tolerance {name} must be finite and at least 1e-14"));
            }
        }
        let g = &self.grid;
        // zeta takes any real s; everywhere else s is a time
        let s_positive = self.command != CommandId::Zeta;
        for (name, v, positive) in [("t", &g.t, true), ("s", &g.s, s_positive), ("beta", &g.beta, true), ("eps", &g.eps, true), ("q", &g.q, false)] {
            if v.iter().any(|&x| !x.is_finite() || (positive && !(x > 0.0))) {
                let what = if positive { "positive and finite" } else { "finite" };
                return Err(format!("grid.{name} entries must be {what}"));
            }
        }
        let need = |name: &str, v: &Vec<f64>| if v.is_empty() { Err(format!("grid.{name} must be non-empty")) } else { Ok(()) };
        use CommandId::*;
        match self.command {
            Trace | Magnetic => need("t", &g.t)?,
            Heatdet if self.options.quantity.as_deref() != Some("leading") => need("t", &g.t)?,
            Heatdet => {}
            Rtrace | Qtrace | Bogolyubov => need("beta", &g.beta)?,
            Aq => need("q", &g.q)?,
            Zeta => need("s", &g.s)?,
            Relative | Weyl => {
                need("t", &g.t)?;
                need("s", &g.s)?;
            }
            Fit => {
                let fit = self.fit.as_ref().ok_or("fit jobs need a [fit] section")?;
                match fit.op {
                    FitOp::Trace | FitOp::Heatdet => {
                        need("t", &g.t)?;
                        spans_decade("t", &g.t)?;
                    }
                    FitOp::Relative | FitOp::DiracRelative => {
                        need("eps", &g.eps)?;
                        spans_decade("eps", &g.eps)?;
                        need("t", &g.t)?;
                        need("s", &g.s)?;
                    }
                }
            }
            Spectrum | Logdet | Coeffs | GgsGamma | Nonlaplace => {}
        }
        Ok(())
    }
}

fn spans_decade(name: &str, v: &[f64]) -> Result<(), String> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(format!("grid.{name} must span at least a decade for a fit"));
    }
    Ok(())
}

/// n log-spaced points from lo to hi inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}
