//! Exactly solvable model operators and their spectra.

use crate::error::{invalid, Error, Result};
use crate::numeric::lattice::Lattice;
use crate::numeric::special::gamma_real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Boundary condition at one end of an interval.
///
/// Robin(S) means (∂_N + S)φ = 0 with N the inward unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Robin(f64),
}

impl BoundaryCondition {
    /// Robin parameter, with Neumann as S = 0. None for Dirichlet.
    pub fn robin_s(&self) -> Option<f64> {
        match *self {
            BoundaryCondition::Dirichlet => None,
            BoundaryCondition::Neumann => Some(0.0),
            BoundaryCondition::Robin(s) => Some(s),
        }
    }
}

/// An exactly solvable operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelOperator {
    /// −d²/dx² + m² on a circle of radius r with a constant connection θ.
    Circle {
        radius: f64,
        #[serde(default)]
        twist: f64,
        #[serde(default)]
        mass2: f64,
    },
    /// Flat torus ℝⁿ/(2πℤ)ⁿ with constant inverse metric g^{ij}, twist θ and mass.
    FlatTorus {
        inverse_metric: Vec<Vec<f64>>,
        #[serde(default)]
        twist: Vec<f64>,
        #[serde(default)]
        mass2: f64,
    },
    /// −d²/dx² on [0, L].
    Interval { length: f64, left: BoundaryCondition, right: BoundaryCondition },
    /// Laplacian on the round two-sphere.
    Sphere2 { radius: f64 },
    /// Magnetic Laplacian on the plane with constant field B.
    Landau {
        field: f64,
        #[serde(default = "default_true")]
        per_unit_area: bool,
        #[serde(default)]
        mass2: f64,
    },
    /// First-order operator with eigenvalues e(k+θ) on the circle.
    DiracCircle {
        frame: f64,
        #[serde(default)]
        twist: f64,
    },
}

fn default_true() -> bool {
    true
}

/// Upper bound N(λ) ≤ bound(λ) on the eigenvalue counting function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountingBound {
    /// The spectrum has no eigenvalues beyond its entries.
    Finite,
    /// a·(λ−offset)^d + b.
    Power { a: f64, d: f64, b: f64, offset: f64 },
    /// c·(√(λ−offset) + ρ)ⁿ, the lattice-ball bound.
    Ball { n: f64, c: f64, rho: f64, offset: f64 },
}

impl CountingBound {
    pub fn upper(&self, lambda: f64) -> f64 {
        match *self {
            CountingBound::Finite => 0.0,
            CountingBound::Power { a, d, b, offset } => {
                let x = (lambda - offset).max(0.0);
                a * x.powf(d) + b
            }
            CountingBound::Ball { n, c, rho, offset } => {
                let x = (lambda - offset).max(0.0);
                c * (x.sqrt() + rho).powf(n)
            }
        }
    }
}

/// Sorted eigenvalues with multiplicities, complete below the cutoff.
///
/// Multiplicities are integers for compact models and densities per unit
/// volume for the Landau model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub entries: Vec<(f64, f64)>,
    pub cutoff: f64,
    pub complete_below_cutoff: bool,
    #[serde(default)]
    pub per_unit_volume: bool,
    #[serde(default = "finite_bound")]
    pub tail: CountingBound,
}

fn finite_bound() -> CountingBound {
    CountingBound::Finite
}

impl Spectrum {
    /// A spectrum consisting of exactly these levels and nothing else.
    pub fn from_levels(mut levels: Vec<(f64, f64)>) -> Result<Self> {
        if levels.is_empty() {
            return invalid("spectrum needs at least one level");
        }
        if levels.iter().any(|&(l, m)| !l.is_finite() || !(m > 0.0)) {
            return invalid("levels need finite eigenvalues and positive multiplicities");
        }
        levels.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let entries = merge_levels(levels.into_iter());
        let cutoff = entries.last().unwrap().0;
        Ok(Self {
            entries,
            cutoff,
            complete_below_cutoff: true,
            per_unit_volume: false,
            tail: CountingBound::Finite,
        })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries.first().map(|e| e.0).unwrap_or(f64::INFINITY)
    }

    /// True when the smallest eigenvalue is ≤ 0.
    pub fn non_positive(&self) -> bool {
        self.min_eigenvalue() <= 0.0
    }

    /// Total multiplicity of eigenvalues equal to zero.
    pub fn zero_modes(&self) -> f64 {
        let scale = self.cutoff.abs().max(1.0);
        self.entries.iter().filter(|e| e.0.abs() <= 1e-13 * scale).map(|e| e.1).sum()
    }

    /// The spectrum with zero modes removed.
    pub fn without_zero_modes(&self) -> Self {
        let scale = self.cutoff.abs().max(1.0);
        let mut s = self.clone();
        s.entries.retain(|e| e.0.abs() > 1e-13 * scale);
        s
    }

    /// Σ multiplicities with eigenvalue ≤ lambda.
    pub fn counting_function(&self, lambda: f64) -> Result<f64> {
        if lambda > self.cutoff && self.tail != CountingBound::Finite {
            return Err(Error::AboveCutoff { lambda, cutoff: self.cutoff });
        }
        Ok(self.entries.iter().take_while(|e| e.0 <= lambda).map(|e| e.1).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum serializes")
    }
}

fn merge_levels(levels: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (l, m) in levels {
        if let Some(last) = out.last_mut() {
            if (l - last.0).abs() <= 1e-12 * l.abs().max(last.0.abs()).max(1e-300) {
                last.1 += m;
                continue;
            }
        }
        out.push((l, m));
    }
    out
}

/// A lattice heat-trace representation: Θ(t) = e^{−t·mass2}(w·Σ_k e^{−t(k+θ)ᵀG(k+θ)} + c).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeForm {
    pub lattice: Lattice,
    pub weight: f64,
    pub constant: f64,
    pub mass2: f64,
}

impl ModelOperator {
    pub fn circle(radius: f64) -> Self {
        ModelOperator::Circle { radius, twist: 0.0, mass2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be positive and finite"))
            }
        };
        let nonneg = |x: f64, name: &str| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be non-negative and finite"))
            }
        };
        match self {
            ModelOperator::Circle { radius, twist, mass2 } => {
                pos(*radius, "radius")?;
                nonneg(*mass2, "mass2")?;
                if !twist.is_finite() {
                    return invalid("twist must be finite");
                }
            }
            ModelOperator::FlatTorus { inverse_metric, twist, mass2 } => {
                nonneg(*mass2, "mass2")?;
                let n = inverse_metric.len();
                if n == 0 || inverse_metric.iter().any(|r| r.len() != n) {
                    return invalid("inverse_metric must be a non-empty square matrix");
                }
                if !twist.is_empty() && twist.len() != n {
                    return invalid("twist length must match the dimension");
                }
                self.lattice_form().transpose()?;
            }
            ModelOperator::Interval { length, left, right } => {
                pos(*length, "length")?;
                for bc in [left, right] {
                    if let BoundaryCondition::Robin(s) = bc {
                        if !s.is_finite() {
                            return invalid("Robin parameter must be finite");
                        }
                    }
                }
            }
            ModelOperator::Sphere2 { radius } => pos(*radius, "radius")?,
            ModelOperator::Landau { field, mass2, .. } => {
                pos(*field, "field")?;
                nonneg(*mass2, "mass2")?;
            }
            ModelOperator::DiracCircle { frame, twist } => {
                if !(frame.abs() > 0.0) || !frame.is_finite() || !twist.is_finite() {
                    return invalid("frame must be non-zero and finite");
                }
            }
        }
        Ok(())
    }

    /// Dimension of the underlying manifold.
    pub fn dim(&self) -> usize {
        match self {
            ModelOperator::FlatTorus { inverse_metric, .. } => inverse_metric.len(),
            ModelOperator::Sphere2 { .. } | ModelOperator::Landau { .. } => 2,
            _ => 1,
        }
    }

    /// Riemannian volume; 1 for the per-unit-area Landau model.
    pub fn volume(&self) -> f64 {
        match self {
            ModelOperator::Circle { radius, .. } => 2.0 * PI * radius,
            ModelOperator::FlatTorus { .. } => {
                let lf = self.lattice_form().unwrap().unwrap();
                (2.0 * PI).powi(self.dim() as i32) / lf.lattice.det().sqrt()
            }
            ModelOperator::Interval { length, .. } => *length,
            ModelOperator::Sphere2 { radius } => 4.0 * PI * radius * radius,
            ModelOperator::Landau { .. } => 1.0,
            ModelOperator::DiracCircle { frame, .. } => 2.0 * PI / frame.abs(),
        }
    }

    /// Lattice representation of the heat trace, for models that have one.
    ///
    /// DiracCircle is represented through its square D².
    pub fn lattice_form(&self) -> Option<Result<LatticeForm>> {
        let lf = |g: DMatrix<f64>, th: DVector<f64>, w: f64, c: f64, m2: f64| {
            Lattice::new(g, th).map(|lattice| LatticeForm { lattice, weight: w, constant: c, mass2: m2 })
        };
        match self {
            ModelOperator::Circle { radius, twist, mass2 } => Some(lf(
                DMatrix::from_element(1, 1, 1.0 / (radius * radius)),
                DVector::from_element(1, *twist),
                1.0,
                0.0,
                *mass2,
            )),
            ModelOperator::FlatTorus { inverse_metric, twist, mass2 } => {
                let n = inverse_metric.len();
                let g = DMatrix::from_fn(n, n, |i, j| inverse_metric[i][j]);
                let th = if twist.is_empty() {
                    DVector::zeros(n)
                } else {
                    DVector::from_column_slice(twist)
                };
                Some(lf(g, th, 1.0, 0.0, *mass2))
            }
            ModelOperator::Interval { length, left, right } => {
                let g = DMatrix::from_element(1, 1, (PI / length).powi(2));
                use BoundaryCondition::*;
                match (left, right) {
                    (Dirichlet, Dirichlet) => Some(lf(g, DVector::zeros(1), 0.5, -0.5, 0.0)),
                    (Neumann, Neumann) => Some(lf(g, DVector::zeros(1), 0.5, 0.5, 0.0)),
                    (Dirichlet, Neumann) | (Neumann, Dirichlet) => {
                        Some(lf(g, DVector::from_element(1, 0.5), 0.5, 0.0, 0.0))
                    }
                    _ => None,
                }
            }
            ModelOperator::DiracCircle { frame, twist } => Some(lf(
                DMatrix::from_element(1, 1, frame * frame),
                DVector::from_element(1, *twist),
                1.0,
                0.0,
                0.0,
            )),
            _ => None,
        }
    }

    /// Upper bound on the counting function.
    pub fn counting_bound(&self) -> CountingBound {
        match self {
            ModelOperator::Circle { radius, mass2, .. } => {
                CountingBound::Power { a: 2.0 * radius, d: 0.5, b: 1.0, offset: *mass2 }
            }
            ModelOperator::FlatTorus { mass2, .. } => {
                let lf = self.lattice_form().unwrap().unwrap();
                let n = self.dim() as f64;
                let omega = PI.powf(n / 2.0) / gamma_real(n / 2.0 + 1.0);
                CountingBound::Ball {
                    n,
                    c: omega / lf.lattice.det().sqrt(),
                    rho: 0.5 * (n * lf.lattice.lambda_max()).sqrt(),
                    offset: *mass2,
                }
            }
            ModelOperator::Interval { length, left, right } => {
                // Robin ends may push up to one level per end below zero.
                let mut offset = 0.0;
                for bc in [left, right] {
                    if let BoundaryCondition::Robin(s) = bc {
                        if *s > 0.0 {
                            offset -= (2.0 * s + 2.0 / length).powi(2);
                        }
                    }
                }
                CountingBound::Power { a: length / PI, d: 0.5, b: 3.0, offset }
            }
            ModelOperator::Sphere2 { radius } => {
                CountingBound::Power { a: 2.0 * radius * radius, d: 1.0, b: 3.0, offset: 0.0 }
            }
            ModelOperator::Landau { field, mass2, .. } => CountingBound::Power {
                a: 1.0 / (4.0 * PI),
                d: 1.0,
                b: field / (2.0 * PI),
                offset: *mass2,
            },
            ModelOperator::DiracCircle { frame, .. } => {
                CountingBound::Power { a: 2.0 / frame.abs(), d: 0.5, b: 1.0, offset: 0.0 }
            }
        }
    }
}

/// All eigenvalues ≤ cutoff with multiplicities.
///
/// DiracCircle returns the spectrum of D² here; see [`dirac_eigenvalues`] for
/// the signed spectrum.
pub fn eigenvalues(model: &ModelOperator, cutoff: f64) -> Result<Spectrum> {
    model.validate()?;
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return invalid("cutoff must be positive and finite");
    }
    let mut per_unit_volume = false;
    let levels: Vec<(f64, f64)> = match model {
        ModelOperator::Circle { .. } | ModelOperator::FlatTorus { .. } | ModelOperator::DiracCircle { .. } => {
            let lf = model.lattice_form().unwrap()?;
            let mut vals = Vec::new();
            lf.lattice.for_each_point(cutoff - lf.mass2, |_, v| vals.push(v + lf.mass2));
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.into_iter().map(|v| (v, 1.0)).collect()
        }
        ModelOperator::Interval { length, left, right } => interval_levels(*length, *left, *right, cutoff),
        ModelOperator::Sphere2 { radius } => {
            let r2 = radius * radius;
            (0..)
                .map(|l: u64| ((l * (l + 1)) as f64 / r2, (2 * l + 1) as f64))
                .take_while(|&(v, _)| v <= cutoff)
                .collect()
        }
        ModelOperator::Landau { field, per_unit_area, mass2 } => {
            per_unit_volume = *per_unit_area;
            let mult = field / (2.0 * PI);
            (0..)
                .map(|k: u64| (field * (2 * k + 1) as f64 + mass2, mult))
                .take_while(|&(v, _)| v <= cutoff)
                .collect()
        }
    };
    let entries = merge_levels(levels.into_iter());
    if entries.is_empty() {
        return Err(Error::CutoffTooSmall { cutoff });
    }
    Ok(Spectrum {
        entries,
        cutoff,
        complete_below_cutoff: true,
        per_unit_volume,
        tail: model.counting_bound(),
    })
}

/// Signed eigenvalues e(k+θ) of a DiracCircle with |e(k+θ)| ≤ cutoff.
pub fn dirac_eigenvalues(model: &ModelOperator, cutoff: f64) -> Result<Spectrum> {
    let ModelOperator::DiracCircle { frame, twist } = *model else {
        return Err(Error::UnsupportedModel("dirac_eigenvalues needs a DiracCircle".into()));
    };
    model.validate()?;
    if !(cutoff > 0.0) {
        return invalid("cutoff must be positive");
    }
    let kmax = (cutoff / frame.abs()).ceil() as i64 + 1;
    let mut vals: Vec<f64> = (-kmax - 1..=kmax + 1)
        .map(|k| frame * (k as f64 + twist))
        .filter(|v| v.abs() <= cutoff * (1.0 + 1e-15))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if vals.is_empty() {
        return Err(Error::CutoffTooSmall { cutoff });
    }
    Ok(Spectrum {
        entries: merge_levels(vals.into_iter().map(|v| (v, 1.0))),
        cutoff,
        complete_below_cutoff: true,
        per_unit_volume: false,
        tail: CountingBound::Power { a: 2.0 / frame.abs(), d: 1.0, b: 1.0, offset: 0.0 },
    })
}

/// Σ multiplicities with eigenvalue ≤ lambda.
pub fn counting_function(spec: &Spectrum, lambda: f64) -> Result<f64> {
    spec.counting_function(lambda)
}

/// Coefficients (α, β) of αφ + βφ' = 0 at the left (x = 0) and right (x = L) ends.
fn bc_coeffs(bc: BoundaryCondition, right: bool) -> (f64, f64) {
    let sgn = if right { -1.0 } else { 1.0 };
    match bc.robin_s() {
        None => (1.0, 0.0),
        Some(s) => (s, sgn),
    }
}

fn interval_levels(l: f64, left: BoundaryCondition, right: BoundaryCondition, cutoff: f64) -> Vec<(f64, f64)> {
    use BoundaryCondition::*;
    let kmax = cutoff.sqrt();
    let step = PI / l;
    let exact = |shift: f64, start: u64| -> Vec<(f64, f64)> {
        (start..)
            .map(|k| (((k as f64 + shift) * step).powi(2), 1.0))
            .take_while(|&(v, _)| v <= cutoff)
            .collect()
    };
    match (left, right) {
        (Dirichlet, Dirichlet) => return exact(0.0, 1),
        (Neumann, Neumann) => return exact(0.0, 0),
        (Dirichlet, Neumann) | (Neumann, Dirichlet) => return exact(0.5, 0),
        _ => {}
    }
    let (a0, b0) = bc_coeffs(left, false);
    let (a1, b1) = bc_coeffs(right, true);
    let c1 = a1 * b0 - b1 * a0;
    // g(k) = f(k)/k with f the secular function; λ = k².
    let g = |k: f64| {
        let s = if k == 0.0 { l } else { (k * l).sin() / k };
        (k * l).cos() * c1 - s * (a1 * a0 + b1 * b0 * k * k)
    };
    // continuation to λ = −κ², divided by cosh(κL)
    let gneg = |kappa: f64| {
        let th = if kappa == 0.0 { l } else { (kappa * l).tanh() / kappa };
        c1 - th * (a1 * a0 - b1 * b0 * kappa * kappa)
    };
    let mut levels = Vec::new();
    let scale = cutoff.max(1.0);
    if g(0.0).abs() <= 1e-13 * (c1.abs() + l * (a1 * a0).abs()).max(1e-300) {
        levels.push((0.0, 1.0));
    }
    let smax: f64 = [left, right].iter().filter_map(|b| b.robin_s()).fold(0.0, |m, s| m.max(s.abs()));
    let kappa_max = 2.0 * smax + 4.0 / l + 1.0;
    let nscan = 800;
    let mut prev = gneg(kappa_max * 1e-9);
    for i in 1..=nscan {
        let b = kappa_max * i as f64 / nscan as f64;
        let a = kappa_max * (i - 1) as f64 / nscan as f64;
        let cur = gneg(b);
        if prev * cur < 0.0 {
            let r = bisect(&gneg, a.max(kappa_max * 1e-9), b, 1e-15);
            levels.push((-r * r, 1.0));
        }
        prev = cur;
    }
    let sub = 16;
    let nbr = (kmax / step).ceil() as usize + 1;
    let mut prev = g(step * 1e-9);
    let mut lo = step * 1e-9;
    for j in 0..nbr {
        for i in 1..=sub {
            let hi = step * (j as f64 + i as f64 / sub as f64);
            let cur = g(hi);
            if prev == 0.0 || prev * cur < 0.0 {
                let r = bisect(&g, lo, hi, 1e-15);
                if r * r <= cutoff {
                    levels.push((r * r, 1.0));
                }
            }
            prev = cur;
            lo = hi;
        }
    }
    let _ = scale;
    levels.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    levels
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= rel * m.abs() || m <= a || m >= b {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_levels() {
        let s = eigenvalues(&ModelOperator::circle(1.0), 10.0).unwrap();
        assert_eq!(s.entries, vec![(0.0, 1.0), (1.0, 2.0), (4.0, 2.0), (9.0, 2.0)]);
    }

    #[test]
    fn dirichlet_interval_levels() {
        let m = ModelOperator::Interval {
            length: PI,
            left: BoundaryCondition::Dirichlet,
            right: BoundaryCondition::Dirichlet,
        };
        let s = eigenvalues(&m, 10.0).unwrap();
        assert_eq!(s.entries.len(), 3);
        for (i, e) in s.entries.iter().enumerate() {
            assert!((e.0 - ((i + 1) * (i + 1)) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn robin_solver_reproduces_dirichlet_neumann() {
        // Robin with S = 0 on both ends must match Neumann exactly.
        let m = ModelOperator::Interval {
            length: 2.0,
            left: BoundaryCondition::Robin(0.0),
            right: BoundaryCondition::Robin(0.0),
        };
        let s = eigenvalues(&m, 50.0).unwrap();
        for (k, e) in s.entries.iter().enumerate() {
            let exact = (k as f64 * PI / 2.0).powi(2);
            assert!((e.0 - exact).abs() < 1e-11 * 50.0, "{k}: {} vs {exact}", e.0);
        }
    }

    #[test]
    fn robin_negative_level_detected() {
        let m = ModelOperator::Interval {
            length: PI,
            left: BoundaryCondition::Robin(0.3),
            right: BoundaryCondition::Robin(0.3),
        };
        let s = eigenvalues(&m, 20.0).unwrap();
        assert!(s.non_positive());
        // lowest level for small S·L: λ ≈ −2S/L
        assert!((s.min_eigenvalue() + 2.0 * 0.3 / PI).abs() < 0.05);
    }

    #[test]
    fn dirac_signed() {
        let m = ModelOperator::DiracCircle { frame: 1.0, twist: 0.25 };
        let s = dirac_eigenvalues(&m, 2.0).unwrap();
        let v: Vec<f64> = s.entries.iter().map(|e| e.0).collect();
        assert_eq!(v, vec![-1.75, -0.75, 0.25, 1.25]);
    }
}
