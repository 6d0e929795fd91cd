//! Runs a validated job and collects its rows.

use crate::job::{CommandId, ComplexRows, FitOp, JobSpec, Rows, WeylModelSpec};
use crate::output::{complex, num, nums, Row};
use heatlab_core::heatdet::{heat_det, heat_det_defining, heat_det_leading, HeatDetOptions};
use heatlab_core::invariants::{ggs_gamma, heat_coefficients, GammaMethod, ObliqueSymbol};
use heatlab_core::magnetic::{landau_check, u0_kernel, MagneticModel};
use heatlab_core::mellin::{a_q, log_det, small_t_series, zeta, ZetaMethod};
use heatlab_core::models::{dirac_eigenvalues, eigenvalues, ModelOperator};
use heatlab_core::nonlaplace::{a0_density, a2_density, dirichlet_a1_density, ConstantSymbol};
use heatlab_core::numeric::lattice::Path;
use heatlab_core::numeric::linalg::CMatrix;
use heatlab_core::relative::*;
use heatlab_core::series::{expansion_fit, powers};
use heatlab_core::traces::{quantum_trace, relativistic_trace, HeatSource, Statistics, TraceMethod};
use heatlab_core::weyl::{convolution_kernel, quadrature_convolution, single_kernel, trace_density, WeylModel, WeylPair};
use heatlab_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde_json::{Map, Value};

/// A failed job: validation failures exit with 2, numerical failures with 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub validation: bool,
    pub inputs: Option<Box<Map<String, Value>>>,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { kind: "InvalidInput".into(), message: message.into(), validation: true, inputs: None }
    }

    pub fn exit_code(&self) -> i32 {
        if self.validation {
            2
        } else {
            3
        }
    }

    pub fn to_json(&self, command: &str) -> Value {
        let mut m = Map::new();
        m.insert("error".into(), Value::String(self.kind.clone()));
        m.insert("class".into(), Value::String(if self.validation { "validation" } else { "numerical" }.into()));
        m.insert("message".into(), Value::String(self.message.clone()));
        m.insert("command".into(), Value::String(command.into()));
        if let Some(i) = &self.inputs {
            m.insert("inputs".into(), Value::Object((**i).clone()));
        }
        Value::Object(m)
    }

    fn at(mut self, inputs: &Map<String, Value>) -> Self {
        self.inputs = Some(Box::new(inputs.clone()));
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { kind: e.kind().into(), message: e.to_string(), validation: e.is_validation(), inputs: None }
    }
}

type Out = Result<Vec<Row>, Failure>;
type RelativeFn = fn(&TracePair, f64, f64) -> heatlab_core::Result<f64>;

fn inputs(pairs: Vec<(&str, Value)>) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Evaluates every grid point in parallel and keeps grid order; the first failure in grid order wins.
fn par_rows<P: Sync>(points: &[P], f: impl Fn(&P) -> Result<Row, Failure> + Sync + Send) -> Out {
    points.par_iter().map(f).collect::<Vec<_>>().into_iter().collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

fn choice<'a>(given: &'a Option<String>, default: &'a str, allowed: &[&str], what: &str) -> Result<&'a str, Failure> {
    let v = given.as_deref().unwrap_or(default);
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(Failure::invalid(format!("{what} must be one of {}, got {v:?}", allowed.join(", "))))
    }
}

fn need<'a, T>(x: &'a Option<T>, what: &str) -> Result<&'a T, Failure> {
    x.as_ref().ok_or_else(|| Failure::invalid(format!("this command needs {what}")))
}

fn check(r: Result<Row, Error>, at: &Map<String, Value>) -> Result<Row, Failure> {
    r.map_err(|e| Failure::from(e).at(at))
}

fn real_matrix(rows: &Rows, what: &str) -> Result<DMatrix<f64>, Failure> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Failure::invalid(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn complex_matrix(c: &ComplexRows, what: &str) -> Result<CMatrix, Failure> {
    let re = real_matrix(&c.re, what)?;
    let im = if c.im.is_empty() { DMatrix::zeros(re.nrows(), re.ncols()) } else { real_matrix(&c.im, what)? };
    if im.shape() != re.shape() {
        return Err(Failure::invalid(format!("{what}: re and im shapes differ")));
    }
    Ok(CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
}

fn weyl_model(w: &WeylModelSpec, what: &str) -> Result<WeylModel, Failure> {
    Ok(WeylModel::new(real_matrix(&w.g, what)?, real_matrix(&w.curv, what)?)?)
}

fn stats_name(s: Statistics) -> &'static str {
    match s {
        Statistics::Bose => "bose",
        Statistics::Fermi => "fermi",
    }
}

fn trace_method(job: &JobSpec) -> Result<TraceMethod, Failure> {
    Ok(match choice(&job.options.method, "direct", &["direct", "integral"], "method")? {
        "direct" => TraceMethod::Direct,
        _ => TraceMethod::Integral,
    })
}

fn point_or_origin(v: &Option<Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>, Failure> {
    match v {
        None => Ok(vec![0.0; n]),
        Some(x) if x.len() == n && x.iter().all(|c| c.is_finite()) => Ok(x.clone()),
        Some(_) => Err(Failure::invalid(format!("{what} must have {n} finite coordinates"))),
    }
}

pub fn execute(job: &JobSpec) -> Out {
    job.validate().map_err(Failure::invalid)?;
    match job.command {
        CommandId::Spectrum => spectrum(job),
        CommandId::Trace => trace(job),
        CommandId::Rtrace => rtrace(job),
        CommandId::Qtrace => qtrace(job),
        CommandId::Aq => aq(job),
        CommandId::Zeta => zeta_rows(job),
        CommandId::Logdet => logdet(job),
        CommandId::Coeffs => coeffs(job),
        CommandId::GgsGamma => ggs(job),
        CommandId::Nonlaplace => nonlaplace(job),
        CommandId::Magnetic => magnetic(job),
        CommandId::Relative => relative(job),
        CommandId::Bogolyubov => bogolyubov_rows(job),
        CommandId::Heatdet => heatdet(job),
        CommandId::Weyl => weyl(job),
        CommandId::Fit => fit(job),
    }
}

fn source(job: &JobSpec) -> Result<HeatSource, Failure> {
    let m = need(&job.model, "a [model] section")?;
    m.validate()?;
    Ok(m.clone().into())
}

fn spectrum(job: &JobSpec) -> Out {
    let m = need(&job.model, "a [model] section")?;
    let cutoff = *need(&job.options.cutoff, "options.cutoff")?;
    let spec = match m {
        ModelOperator::DiracCircle { .. } => dirac_eigenvalues(m, cutoff)?,
        _ => eigenvalues(m, cutoff)?,
    };
    Ok(spec
        .entries
        .iter()
        .enumerate()
        .map(|(i, &(lambda, mult))| {
            Row::new(inputs(vec![("index", Value::from(i)), ("cutoff", num(cutoff))]), num(lambda), num(0.0), "direct", "λ_k")
                .with("multiplicity", num(mult))
        })
        .collect())
}

fn trace(job: &JobSpec) -> Out {
    let src = source(job)?;
    let path = match choice(&job.options.method, "auto", &["auto", "direct", "dual"], "method")? {
        "direct" => Some(Path::Direct),
        "dual" => Some(Path::Dual),
        _ => None,
    };
    par_rows(&job.grid.t, |&t| {
        let at = inputs(vec![("t", num(t))]);
        check(src.theta_with(t, path).map(|v| Row::from_trace(at.clone(), v, "Θ(t) = Σ_k e^{−tλ_k}")), &at)
    })
}

fn rtrace(job: &JobSpec) -> Out {
    let src = source(job)?;
    let method = trace_method(job)?;
    par_rows(&job.grid.beta, |&beta| {
        let at = inputs(vec![("beta", num(beta))]);
        check(relativistic_trace(&src, beta, method).map(|v| Row::from_trace(at.clone(), v, "Tr e^{−β√L}")), &at)
    })
}

fn qtrace(job: &JobSpec) -> Out {
    let src = source(job)?;
    let method = trace_method(job)?;
    let stats = job.options.statistics.unwrap_or(Statistics::Bose);
    let mu = job.options.mu.unwrap_or(0.0);
    let formula = match stats {
        Statistics::Bose => "Tr (e^{β(√L−μ)} − 1)^{−1}",
        Statistics::Fermi => "Tr (e^{β(√L−μ)} + 1)^{−1}",
    };
    par_rows(&job.grid.beta, |&beta| {
        let at = inputs(vec![("beta", num(beta)), ("mu", num(mu)), ("statistics", Value::from(stats_name(stats)))]);
        check(quantum_trace(&src, beta, mu, stats, method).map(|v| Row::from_trace(at.clone(), v, formula)), &at)
    })
}

fn aq(job: &JobSpec) -> Out {
    let src = source(job)?;
    let q_im = job.options.q_im.unwrap_or(0.0);
    let order = job.options.series_order.unwrap_or(6);
    par_rows(&job.grid.q, |&q| {
        let at = inputs(vec![("q", complex(Complex64::new(q, q_im))), ("series_order", Value::from(order))]);
        let r = a_q(&src, Complex64::new(q, q_im), order).map(|a| {
            Row::new(
                at.clone(),
                complex(a.value),
                num(a.error),
                "quadrature",
                "A_q = (4π)^{n/2} Γ(−q)^{−1} ∫₀^∞ t^{−q−1+n/2} Θ(t) dt",
            )
            .with("split_point", num(a.split_point))
        });
        check(r, &at)
    })
}

fn zeta_rows(job: &JobSpec) -> Out {
    let src = source(job)?;
    let shift = job.options.shift.unwrap_or(0.0);
    let exclude = job.options.exclude_zero_modes.unwrap_or(false);
    let method = match choice(&job.options.method, "auto", &["auto", "direct", "continued"], "method")? {
        "direct" => ZetaMethod::Direct,
        "continued" => ZetaMethod::Continued,
        _ => ZetaMethod::Auto,
    };
    par_rows(&job.grid.s, |&s| {
        let at = inputs(vec![("s", num(s)), ("shift", num(shift)), ("exclude_zero_modes", Value::from(exclude))]);
        let r = zeta(&src, Complex64::new(s, 0.0), shift, exclude, method)
            .map(|z| Row::new(at.clone(), complex(z.value), num(z.error_bound), z.method.name(), "ζ(s) = Σ_k (λ_k − shift)^{−s}"));
        check(r, &at)
    })
}

fn logdet(job: &JobSpec) -> Out {
    let src = source(job)?;
    let shift = job.options.shift.unwrap_or(0.0);
    let exclude = job.options.exclude_zero_modes.unwrap_or(false);
    let at = inputs(vec![("shift", num(shift)), ("exclude_zero_modes", Value::from(exclude))]);
    let r = log_det(&src, shift, exclude).map(|v| {
        Row::new(at.clone(), complex(v.value), num(v.error_bound), v.method.name(), "ln Det = −ζ′(0)")
            .with("det", complex(v.value.exp()))
    });
    Ok(vec![check(r, &at)?])
}

fn coeffs(job: &JobSpec) -> Out {
    if let Some(geom) = &job.geometry {
        let a = heat_coefficients(geom)?;
        return Ok((0..3)
            .map(|k| {
                Row::new(inputs(vec![("k", Value::from(k))]), num(a[k]), Value::Null, "closed_form", "A_k from integrated geometric data")
            })
            .collect());
    }
    let m = need(&job.model, "a [geometry] or [model] section")?;
    let series = small_t_series(m, job.options.terms.unwrap_or(4))?;
    Ok(series
        .terms
        .iter()
        .map(|term| {
            Row::new(
                inputs(vec![("power", Value::from(term.power.to_string())), ("log_power", Value::from(term.log_power))]),
                num(term.coefficient),
                Value::Null,
                "closed_form",
                "Θ(t) ~ Σ_p c_p t^p",
            )
        })
        .collect())
}

fn ggs(job: &JobSpec) -> Out {
    let o = need(&job.oblique, "an [oblique] section")?;
    let gammas = o.gammas.iter().map(|g| complex_matrix(g, "oblique.gammas")).collect::<Result<Vec<_>, _>>()?;
    let symbol = ObliqueSymbol {
        n: o.n,
        gammas,
        boundary_metric: real_matrix(&o.boundary_metric, "oblique.boundary_metric")?,
        pi: complex_matrix(&o.pi, "oblique.pi")?,
    };
    let name = choice(&job.options.method, "quadrature", &["quadrature", "commuting", "clifford"], "method")?;
    let method = match name {
        "commuting" => GammaMethod::Commuting,
        "clifford" => GammaMethod::Clifford,
        _ => GammaMethod::Quadrature,
    };
    let v = ggs_gamma(&symbol, method)?;
    let bound = if name == "quadrature" { Value::Null } else { num(0.0) };
    Ok(vec![Row::new(
        inputs(vec![("n", Value::from(o.n)), ("fiber_dim", Value::from(symbol.fiber_dim()))]),
        num(v),
        bound,
        name,
        "γ = ∫ dξ̂ π^{−(n−1)/2} tr exp(−|ξ̂|² − T²(ξ̂))",
    )])
}

fn nonlaplace(job: &JobSpec) -> Out {
    let s = need(&job.symbol, "a [symbol] section")?;
    let sym = match (&s.diagonal, &s.a) {
        (Some(h), None) if s.q.is_none() => ConstantSymbol::diagonal(s.n, h),
        (None, Some(a)) => {
            let a = a
                .iter()
                .map(|row| row.iter().map(|m| complex_matrix(m, "symbol.a")).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            let nf = a.first().and_then(|r| r.first()).map_or(0, |m| m.nrows());
            let q = match &s.q {
                Some(q) => complex_matrix(q, "symbol.q")?,
                None => CMatrix::zeros(nf, nf),
            };
            ConstantSymbol { n: s.n, a, q }
        }
        _ => return Err(Failure::invalid("symbol needs either diagonal alone or a (with optional q)")),
    };
    let quantity = choice(&job.options.quantity, "a0", &["a0", "a2", "a1-dirichlet"], "quantity")?;
    let (v, formula) = match quantity {
        "a0" => (a0_density(&sym)?, "A₀ density = ∫ dξ π^{−n/2} tr e^{−H(ξ)}"),
        "a2" => (a2_density(&sym)?, "A₂ density = −∫ dξ π^{−n/2} tr ∫₀¹ e^{−(1−τ)H} Q e^{−τH} dτ"),
        _ => (dirichlet_a1_density(&sym)?, "Dirichlet A₁ density = −√π ∫ dξ̂ π^{−(n−1)/2} Ψ(ξ̂)"),
    };
    Ok(vec![Row::new(inputs(vec![("quantity", Value::from(quantity)), ("n", Value::from(s.n))]), num(v), Value::Null, "quadrature", formula)])
}

fn magnetic(job: &JobSpec) -> Out {
    let spec = need(&job.magnetic, "a [magnetic] section")?;
    let f = real_matrix(&spec.f, "magnetic.f")?;
    let n = f.nrows();
    let model = MagneticModel { n, f, bundle_curv: None };
    model.validate()?;
    match choice(&job.options.quantity, "kernel", &["kernel", "landau-check"], "quantity")? {
        "kernel" => {
            let x = point_or_origin(&job.options.x, n, "x")?;
            let xp = point_or_origin(&job.options.x_prime, n, "x_prime")?;
            par_rows(&job.grid.t, |&t| {
                let at = inputs(vec![("t", num(t)), ("x", nums(&x)), ("x_prime", nums(&xp))]);
                let r = u0_kernel(&model, t, &x, &xp).map(|v| {
                    Row::new(
                        at.clone(),
                        num(v),
                        Value::Null,
                        "closed_form",
                        "U₀ = (4πt)^{−n/2} det(tiF/sinh tiF)^{1/2} exp(−⟨u, tiF coth(tiF) u⟩/4t)",
                    )
                });
                check(r, &at)
            })
        }
        _ => {
            if n != 2 || model.f[(0, 1)] != -model.f[(1, 0)] {
                return Err(Failure::invalid("landau-check needs a planar field F = B·ε"));
            }
            let b = model.f[(0, 1)];
            par_rows(&job.grid.t, |&t| {
                let at = inputs(vec![("b", num(b)), ("t", num(t))]);
                let r = landau_check(b, t).map(|c| {
                    Row::new(at.clone(), num(c.diagonal_value), Value::Null, "closed_form", "B/(4π sinh tB) = (B/2π) Σ_k e^{−tB(2k+1)}")
                        .with("level_sum", num(c.level_sum))
                        .with("difference", num(c.difference))
                });
                check(r, &at)
            })
        }
    }
}

fn relative(job: &JobSpec) -> Out {
    let pair = need(&job.pair, "a [pair] section")?;
    pair.validate()?;
    let quantity = choice(&job.options.quantity, "x", &["x", "y", "psi", "phi", "b0", "c0"], "quantity")?;
    let (f, formula): (RelativeFn, &str) = match quantity {
        "x" => (combined_trace_x, "X(t,s) = Tr e^{−tL₊} e^{−sL₋}"),
        "y" => (combined_trace_y, "Y(t,s) = Tr D₊e^{−tD₊²} D₋e^{−sD₋²}"),
        "psi" => (relative_psi, "Ψ(t,s) = Tr(e^{−tL₊} − e^{−tL₋})(e^{−sL₊} − e^{−sL₋})"),
        "phi" => (relative_phi, "Φ(t,s) = Tr(D₊e^{−tD₊²} − D₋e^{−tD₋²})(D₊e^{−sD₊²} − D₋e^{−sD₋²})"),
        "b0" => (b0_predicted, "B₀(t,s) = N ∫ g^{1/2}(t,s)"),
        _ => (c0_predicted, "C₀(t,s) = ∫ g^{1/2} (N/2) e₊ᵢ g_{ij} e₋ⱼ"),
    };
    let method = if matches!(quantity, "b0" | "c0") { "closed_form" } else { "spectral" };
    par_rows(&product(&job.grid.t, &job.grid.s), |&(t, s)| {
        let at = inputs(vec![("t", num(t)), ("s", num(s)), ("quantity", Value::from(quantity))]);
        check(f(pair, t, s).map(|v| Row::new(at.clone(), num(v), Value::Null, method, formula)), &at)
    })
}

fn bogolyubov_rows(job: &JobSpec) -> Out {
    let pair = need(&job.pair, "a [pair] section")?;
    let stats = job.options.statistics.unwrap_or(Statistics::Bose);
    let formula = match stats {
        Statistics::Bose => "B_b(β) = ∫∫ h_f(t) h_b(s) e^{−m²β²(t+s)} Ψ(β²t, β²s) dt ds",
        Statistics::Fermi => "B_f(β) = 4β² ∫∫ h₀(t) h₀(s) e^{−m²β²(t+s)} (Φ + m²Ψ)(β²t, β²s) dt ds",
    };
    if choice(&job.options.quantity, "value", &["value", "exponent"], "quantity")? == "exponent" {
        let f = small_beta_exponent(pair, stats, &job.grid.beta)?;
        return Ok(vec![Row::new(
            inputs(vec![("beta", nums(&job.grid.beta)), ("statistics", Value::from(stats_name(stats)))]),
            num(f.exponent),
            Value::Null,
            "fit",
            "ln B = p ln β + ln c + γβ",
        )
        .with("expected", num(f.expected))
        .with("loglog_slope", num(f.loglog_slope))]);
    }
    let method = match choice(&job.options.method, "spectral", &["spectral", "kernel"], "method")? {
        "kernel" => BogolyubovMethod::Kernel,
        _ => BogolyubovMethod::Spectral,
    };
    par_rows(&job.grid.beta, |&beta| {
        let at = inputs(vec![("beta", num(beta)), ("statistics", Value::from(stats_name(stats)))]);
        check(bogolyubov(pair, beta, stats, method).map(|v| Row::from_trace(at.clone(), v, formula)), &at)
    })
}

fn heatdet(job: &JobSpec) -> Out {
    let m = need(&job.model, "a [model] section")?;
    m.validate()?;
    match choice(&job.options.quantity, "value", &["value", "defining", "leading"], "quantity")? {
        "value" => {
            let opts = HeatDetOptions {
                cutoff: job.options.cutoff,
                budget: job.options.budget.unwrap_or(heatlab_core::heatdet::DEFAULT_BUDGET),
                tolerance: job.tolerances.sum,
            };
            par_rows(&job.grid.t, |&t| {
                let at = inputs(vec![("t", num(t))]);
                check(heat_det(m, t, opts).map(|v| Row::from_trace(at.clone(), v, "K(t) = ∫ det(Tr-correlators of e^{−tL})")), &at)
            })
        }
        "defining" => {
            let c = job.options.mode_cutoff.unwrap_or(20);
            par_rows(&job.grid.t, |&t| {
                let at = inputs(vec![("t", num(t)), ("mode_cutoff", Value::from(c))]);
                check(heat_det_defining(m, t, c).map(|v| Row::from_trace(at.clone(), v, "K(t) by the defining integral")), &at)
            })
        }
        _ => {
            let fiber = job.options.fiber.unwrap_or(1);
            let (n, vol) = (m.dim(), m.volume());
            Ok(vec![Row::new(
                inputs(vec![("n", Value::from(n)), ("fiber_dim", Value::from(fiber)), ("volume", num(vol))]),
                num(heat_det_leading(n, fiber, vol)),
                Value::Null,
                "closed_form",
                "½Nⁿ(4π)^{−n²}(π/2n)^{n/2} vol",
            )])
        }
    }
}

fn weyl(job: &JobSpec) -> Out {
    let w = need(&job.weyl, "a [weyl] section")?;
    let pair = WeylPair::new(weyl_model(&w.plus, "weyl.plus")?, weyl_model(&w.minus, "weyl.minus")?)?;
    let n = pair.plus.n;
    let x = point_or_origin(&job.options.x, n, "x")?;
    let xp = point_or_origin(&job.options.x_prime, n, "x_prime")?;
    let quantity = choice(&job.options.quantity, "convolve", &["convolve", "single", "density"], "quantity")?;
    let check_quad = job.options.check_quadrature.unwrap_or(false);
    let limit = job.tolerances.check;
    match quantity {
        "single" => par_rows(&job.grid.t, |&t| {
            let at = inputs(vec![("t", num(t)), ("x", nums(&x)), ("x_prime", nums(&xp))]);
            let r = single_kernel(&pair.plus, t, &x, &xp).map(|v| {
                Row::new(at.clone(), complex(v), Value::Null, "closed_form", "U(t) = (4π)^{−n/2}Ω(t) exp(−¼⟨u, D u⟩ − (i/2)⟨x′, 𝓡x⟩)")
            });
            check(r, &at)
        }),
        "density" => par_rows(&product(&job.grid.t, &job.grid.s), |&(t, s)| {
            let at = inputs(vec![("t", num(t)), ("s", num(s))]);
            let r = trace_density(&pair, t, s).map(|d| {
                Row::new(at.clone(), complex(d.value), Value::Null, "closed_form", "Tr e^{tΔ₊}e^{sΔ₋} from the pair kernel diagonal")
                    .with("per_unit_volume", Value::from(d.per_unit_volume))
                    .with("origin_value", num(d.origin_value))
            });
            check(r, &at)
        }),
        _ => par_rows(&product(&job.grid.t, &job.grid.s), |&(t, s)| {
            let at = inputs(vec![("t", num(t)), ("s", num(s)), ("x", nums(&x)), ("x_prime", nums(&xp))]);
            let v = convolution_kernel(&pair, t, s, &x, &xp).map_err(|e| Failure::from(e).at(&at))?;
            let mut row = Row::new(
                at.clone(),
                complex(v),
                Value::Null,
                "closed_form",
                "U(t,s) = (4π)^{−n/2}Ω exp{−¼⟨x,A₊x⟩ − ¼⟨x′,A₋x′⟩ + ½⟨x,Bx′⟩}",
            );
            if check_quad {
                let q = quadrature_convolution(&pair, t, s, &x, &xp).map_err(|e| Failure::from(e).at(&at))?;
                let d = (v - q).norm() / v.norm();
                if !(d <= limit) {
                    return Err(Failure {
                        kind: "CheckFailed".into(),
                        message: format!("closed kernel and quadrature differ by {d:e} (limit {limit:e})"),
                        validation: false,
                        inputs: Some(Box::new(at)),
                    });
                }
                row = row.with("quadrature", complex(q)).with("discrepancy", num(d));
            }
            Ok(row)
        }),
    }
}

fn parse_powers(p: &[String]) -> Result<Vec<Rational64>, Failure> {
    p.iter().map(|s| s.trim().parse::<Rational64>().map_err(|_| Failure::invalid(format!("bad power {s:?}")))).collect()
}

fn fit(job: &JobSpec) -> Out {
    let spec = need(&job.fit, "a [fit] section")?;
    match spec.op {
        FitOp::Trace | FitOp::Heatdet => {
            let m = need(&job.model, "a [model] section")?;
            m.validate()?;
            let n = m.dim() as i64;
            let ps = if !spec.powers.is_empty() {
                parse_powers(&spec.powers)?
            } else if spec.op == FitOp::Trace {
                (0..5).map(|k| Rational64::new(k - n, 2)).collect()
            } else if n == 1 {
                [(-3, 2), (-1, 1), (-1, 2), (0, 1)].iter().map(|&(a, b)| Rational64::new(a, b)).collect()
            } else {
                return Err(Failure::invalid("fit.powers is required for this model"));
            };
            let src: HeatSource = m.clone().into();
            let opts = HeatDetOptions { tolerance: job.tolerances.sum, ..Default::default() };
            let samples = job
                .grid
                .t
                .par_iter()
                .map(|&t| {
                    let v = match spec.op {
                        FitOp::Trace => src.theta(t)?.value,
                        _ => heat_det(m, t, opts)?.value,
                    };
                    Ok((t, v))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let report = expansion_fit(&samples, &powers(&ps))?;
            let formula = if spec.op == FitOp::Trace { "Θ(t) ≈ Σ_p c_p t^p" } else { "K(t) ≈ Σ_p c_p t^p" };
            Ok(report
                .series
                .terms
                .iter()
                .map(|term| {
                    Row::new(
                        inputs(vec![
                            ("power", Value::from(term.power.to_string())),
                            ("log_power", Value::from(term.log_power)),
                            ("t", nums(&job.grid.t)),
                        ]),
                        num(term.coefficient),
                        Value::Null,
                        "fit",
                        formula,
                    )
                    .with("condition", num(report.condition))
                    .with("residual_norm", num(report.residual_norm))
                })
                .collect())
        }
        FitOp::Relative | FitOp::DiracRelative => {
            let pair = need(&job.pair, "a [pair] section")?;
            let (t, s) = (job.grid.t[0], job.grid.s[0]);
            let (f, formula) = if spec.op == FitOp::Relative {
                (theorem1_leading_fit(pair, t, s, &job.grid.eps)?, "X(εt,εs)(4πε)^{n/2} → B₀(t,s) as ε → 0")
            } else {
                (dirac_leading_fit(pair, t, s, &job.grid.eps)?, "leading ε-term of Y(εt,εs) → C₀(t,s)")
            };
            Ok(vec![Row::new(inputs(vec![("t", num(t)), ("s", num(s)), ("eps", nums(&job.grid.eps))]), num(f.fitted), Value::Null, "fit", formula)
                .with("predicted", num(f.predicted))
                .with("relative_error", num(f.relative_error))
                .with("condition", num(f.condition))])
        }
    }
}
