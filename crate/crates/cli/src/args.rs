//! Command-line arguments and their translation into job specs.

use crate::job::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use heatlab_core::models::{BoundaryCondition, ModelOperator};
use heatlab_core::relative::TracePair;
use heatlab_core::traces::Statistics;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "heatlab", version, about = "Heat traces, zeta functions and heat invariants of exactly solvable operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Run a job file (TOML).
    Run {
        job: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Eigenvalues below a cutoff.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        cutoff: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Heat trace Θ(t).
    Trace {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// auto, direct or dual
        #[arg(long)]
        path: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Relativistic trace Tr e^{−β√L}.
    Rtrace {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, value_enum, default_value = "direct")]
        method: PathArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bose or Fermi quantum trace.
    Qtrace {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, value_enum, default_value = "bose")]
        statistics: StatArg,
        #[arg(long, value_enum, default_value = "direct")]
        method: PathArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// The entire function A_q.
    Aq {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        q: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        q_im: f64,
        #[arg(long, default_value_t = 6)]
        series_order: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Spectral zeta function.
    Zeta {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        s: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long)]
        exclude_zero_modes: bool,
        /// auto, direct or continued
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Logarithm of the zeta-regularized determinant.
    Logdet {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        shift: f64,
        #[arg(long)]
        exclude_zero_modes: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Small-t coefficients of a model, or A₀, A₁, A₂ from a geometry file.
    Coeffs {
        #[command(flatten)]
        model: ModelArgs,
        /// TOML file with integrated geometric data
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        terms: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Oblique boundary invariant γ for a Clifford-type symbol.
    GgsGamma {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 2)]
        fiber: usize,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        /// quadrature, commuting or clifford
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Densities of a diagonal non-Laplace operator.
    Nonlaplace {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        h: Vec<f64>,
        /// a0, a2 or a1-dirichlet
        #[arg(long)]
        quantity: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Planar constant-field heat kernel.
    Magnetic {
        #[arg(long)]
        b: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x_prime: Option<Vec<f64>>,
        #[arg(long)]
        landau_check: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Combined and relative traces of an operator pair.
    Relative {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        /// x, y, psi, phi, b0 or c0
        #[arg(long)]
        quantity: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bogolyubov invariants of an operator pair.
    Bogolyubov {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        #[arg(long, value_enum, default_value = "bose")]
        statistics: StatArg,
        /// spectral or kernel
        #[arg(long)]
        method: Option<String>,
        /// Fit the small-β exponent over the β list.
        #[arg(long)]
        exponent: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Heat determinant K(t).
    Heatdet {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        /// value, defining or leading
        #[arg(long)]
        quantity: Option<String>,
        #[arg(long)]
        mode_cutoff: Option<i64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        fiber: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Heat kernels of quadratic Weyl-algebra elements.
    Weyl {
        #[arg(value_enum, default_value = "convolve")]
        action: WeylAction,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Field of the first operator in the (0, 1) plane.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        b_minus: f64,
        /// Scale of the second operator's metric.
        #[arg(long, default_value_t = 1.0)]
        g_minus: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        s: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x_prime: Option<Vec<f64>>,
        #[arg(long)]
        check_quadrature: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep an operation over a log grid and fit its expansion.
    Fit {
        #[arg(long, value_enum)]
        op: FitOp,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Template powers such as -1/2,0,1/2
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        powers: Vec<String>,
        /// Fixed t for the relative fits.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Fixed s for the relative fits.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Print the job as TOML instead of running it.
    #[arg(long)]
    pub emit_job: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ModelKind {
    Circle,
    Torus,
    Interval,
    Sphere,
    Landau,
    DiracCircle,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "circle")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub twist: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub mass2: f64,
    /// Inverse metric rows, e.g. "1,0.3;0.3,1.5"
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub length: f64,
    /// dirichlet, neumann or robin:S
    #[arg(long, default_value = "dirichlet")]
    pub left: String,
    #[arg(long, default_value = "dirichlet")]
    pub right: String,
    #[arg(long, default_value_t = 1.0)]
    pub field: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub frame: f64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum PairKind {
    Circle,
    Dirac,
}

#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    #[arg(long, value_enum, default_value = "circle")]
    pub pair: PairKind,
    #[arg(long, default_value_t = 1.0)]
    pub plus: f64,
    #[arg(long, default_value_t = 0.5)]
    pub minus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pair_twist: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum PathArg {
    Direct,
    Integral,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StatArg {
    Bose,
    Fermi,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum WeylAction {
    Convolve,
    Single,
    Density,
}

impl From<StatArg> for Statistics {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Bose => Statistics::Bose,
            StatArg::Fermi => Statistics::Fermi,
        }
    }
}

impl PathArg {
    fn name(self) -> String {
        match self {
            PathArg::Direct => "direct".into(),
            PathArg::Integral => "integral".into(),
        }
    }
}

fn boundary(s: &str) -> Result<BoundaryCondition, String> {
    match s {
        "dirichlet" => Ok(BoundaryCondition::Dirichlet),
        "neumann" => Ok(BoundaryCondition::Neumann),
        _ => match s.strip_prefix("robin:").map(str::parse::<f64>) {
            Some(Ok(v)) => Ok(BoundaryCondition::Robin(v)),
            _ => Err(format!("bad boundary condition {s:?}; use dirichlet, neumann or robin:S")),
        },
    }
}

fn matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';')
        .map(|row| row.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad matrix entry {v:?}"))).collect())
        .collect()
}

impl ModelArgs {
    pub fn build(&self) -> Result<ModelOperator, String> {
        let twist1 = || match self.twist.as_slice() {
            [] => Ok(0.0),
            [x] => Ok(*x),
            _ => Err("this model takes a single twist".to_string()),
        };
        Ok(match self.model {
            ModelKind::Circle => ModelOperator::Circle { radius: self.radius, twist: twist1()?, mass2: self.mass2 },
            ModelKind::Torus => ModelOperator::FlatTorus {
                inverse_metric: matrix(self.metric.as_deref().ok_or("a torus needs --metric")?)?,
                twist: self.twist.clone(),
                mass2: self.mass2,
            },
            ModelKind::Interval => {
                ModelOperator::Interval { length: self.length, left: boundary(&self.left)?, right: boundary(&self.right)? }
            }
            ModelKind::Sphere => ModelOperator::Sphere2 { radius: self.radius },
            ModelKind::Landau => ModelOperator::Landau { field: self.field, per_unit_area: true, mass2: self.mass2 },
            ModelKind::DiracCircle => ModelOperator::DiracCircle { frame: self.frame, twist: twist1()? },
        })
    }
}

impl PairArgs {
    pub fn build(&self) -> TracePair {
        let side = |x: f64| match self.pair {
            PairKind::Circle => ModelOperator::Circle { radius: x, twist: self.pair_twist, mass2: 0.0 },
            PairKind::Dirac => ModelOperator::DiracCircle { frame: x, twist: self.pair_twist },
        };
        TracePair::new(side(self.plus), side(self.minus), self.mass)
    }
}

fn identity(n: usize, scale: f64) -> Rows {
    (0..n).map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect()).collect()
}

fn planar(n: usize, b: f64) -> Result<Rows, String> {
    let mut m = identity(n, 0.0);
    if b != 0.0 {
        if n < 2 {
            return Err("a field needs n ≥ 2".into());
        }
        m[0][1] = b;
        m[1][0] = -b;
    }
    Ok(m)
}

fn real(m: Rows) -> ComplexRows {
    ComplexRows { re: m, im: Vec::new() }
}

fn imag(m: Rows) -> ComplexRows {
    let zeros = identity(m.len(), 0.0);
    ComplexRows { re: zeros, im: m }
}

/// Γ^a = i√κ·σ_a on the first two channels (d ≥ 2), or i√κ on the first `rank` channels (d = 1), with Π the matching projector.
fn clifford_symbol(n: usize, kappa: f64, fiber: usize, rank: usize) -> Result<ObliqueSpec, String> {
    let d = n.checked_sub(1).filter(|&d| (1..=3).contains(&d)).ok_or("--n must be 2, 3 or 4")?;
    if rank > fiber || fiber == 0 {
        return Err("need 1 ≤ fiber and rank ≤ fiber".into());
    }
    let k = kappa.sqrt();
    let mut pi = identity(fiber, 0.0);
    let gammas = if d == 1 {
        let mut g = identity(fiber, 0.0);
        for i in 0..rank {
            g[i][i] = k;
            pi[i][i] = 1.0;
        }
        vec![imag(g)]
    } else {
        if fiber < 2 || rank != 2 {
            return Err("for n ≥ 3 the Clifford symbol needs fiber ≥ 2 and rank 2".into());
        }
        pi[0][0] = 1.0;
        pi[1][1] = 1.0;
        // i√κ σ_x, i√κ σ_y, i√κ σ_z on the first two channels
        let mut out = Vec::new();
        for a in 0..d {
            let mut re = identity(fiber, 0.0);
            let mut im = identity(fiber, 0.0);
            match a {
                0 => {
                    im[0][1] = k;
                    im[1][0] = k;
                }
                1 => {
                    re[0][1] = k;
                    re[1][0] = -k;
                }
                _ => {
                    im[0][0] = k;
                    im[1][1] = -k;
                }
            }
            out.push(ComplexRows { re, im });
        }
        out
    };
    Ok(ObliqueSpec { n, gammas, boundary_metric: identity(d, 1.0), pi: real(pi) })
}

/// Translates parsed arguments into a job and its output settings.
pub fn to_job(cmd: &Cmd) -> Result<(JobSpec, OutArgs), String> {
    use Cmd::*;
    let (job, out) = match cmd {
        Run { job, out } => {
            let text = std::fs::read_to_string(job).map_err(|e| format!("cannot read {}: {e}", job.display()))?;
            (JobSpec::from_toml(&text)?, out)
        }
        Spectrum { model, cutoff, out } => {
            let mut j = JobSpec::new(CommandId::Spectrum);
            j.model = Some(model.build()?);
            j.options.cutoff = Some(*cutoff);
            (j, out)
        }
        Trace { model, t, path, out } => {
            let mut j = JobSpec::new(CommandId::Trace);
            j.model = Some(model.build()?);
            j.grid.t = t.clone();
            j.options.method = path.clone();
            (j, out)
        }
        Rtrace { model, beta, method, out } => {
            let mut j = JobSpec::new(CommandId::Rtrace);
            j.model = Some(model.build()?);
            j.grid.beta = beta.clone();
            j.options.method = Some(method.name());
            (j, out)
        }
        Qtrace { model, beta, mu, statistics, method, out } => {
            let mut j = JobSpec::new(CommandId::Qtrace);
            j.model = Some(model.build()?);
            j.grid.beta = beta.clone();
            j.options.mu = Some(*mu);
            j.options.statistics = Some((*statistics).into());
            j.options.method = Some(method.name());
            (j, out)
        }
        Aq { model, q, q_im, series_order, out } => {
            let mut j = JobSpec::new(CommandId::Aq);
            j.model = Some(model.build()?);
            j.grid.q = q.clone();
            j.options.q_im = Some(*q_im);
            j.options.series_order = Some(*series_order);
            (j, out)
        }
        Zeta { model, s, shift, exclude_zero_modes, method, out } => {
            let mut j = JobSpec::new(CommandId::Zeta);
            j.model = Some(model.build()?);
            j.grid.s = s.clone();
            j.options.shift = Some(*shift);
            j.options.exclude_zero_modes = Some(*exclude_zero_modes);
            j.options.method = method.clone();
            (j, out)
        }
        Logdet { model, shift, exclude_zero_modes, out } => {
            let mut j = JobSpec::new(CommandId::Logdet);
            j.model = Some(model.build()?);
            j.options.shift = Some(*shift);
            j.options.exclude_zero_modes = Some(*exclude_zero_modes);
            (j, out)
        }
        Coeffs { model, geometry, terms, out } => {
            let mut j = JobSpec::new(CommandId::Coeffs);
            match geometry {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                    j.geometry = Some(toml::from_str(&text).map_err(|e| e.to_string())?);
                }
                None => j.model = Some(model.build()?),
            }
            j.options.terms = Some(*terms);
            (j, out)
        }
        GgsGamma { n, kappa, fiber, rank, method, out } => {
            let mut j = JobSpec::new(CommandId::GgsGamma);
            j.oblique = Some(clifford_symbol(*n, *kappa, *fiber, *rank)?);
            j.options.method = method.clone();
            (j, out)
        }
        Nonlaplace { n, h, quantity, out } => {
            let mut j = JobSpec::new(CommandId::Nonlaplace);
            j.symbol = Some(SymbolSpec { n: *n, diagonal: Some(h.clone()), a: None, q: None });
            j.options.quantity = quantity.clone();
            (j, out)
        }
        Magnetic { b, t, x, x_prime, landau_check, out } => {
            let mut j = JobSpec::new(CommandId::Magnetic);
            j.magnetic = Some(MagneticSpec { f: planar(2, *b)? });
            j.grid.t = t.clone();
            j.options.x = x.clone();
            j.options.x_prime = x_prime.clone();
            if *landau_check {
                j.options.quantity = Some("landau-check".into());
            }
            (j, out)
        }
        Relative { pair, t, s, quantity, out } => {
            let mut j = JobSpec::new(CommandId::Relative);
            j.pair = Some(pair.build());
            j.grid.t = t.clone();
            j.grid.s = s.clone();
            j.options.quantity = quantity.clone();
            (j, out)
        }
        Bogolyubov { pair, beta, statistics, method, exponent, out } => {
            let mut j = JobSpec::new(CommandId::Bogolyubov);
            j.pair = Some(pair.build());
            j.grid.beta = beta.clone();
            j.options.statistics = Some((*statistics).into());
            j.options.method = method.clone();
            if *exponent {
                j.options.quantity = Some("exponent".into());
            }
            (j, out)
        }
        Heatdet { model, t, quantity, mode_cutoff, budget, fiber, out } => {
            let mut j = JobSpec::new(CommandId::Heatdet);
            j.model = Some(model.build()?);
            j.grid.t = t.clone();
            j.options.quantity = quantity.clone();
            j.options.mode_cutoff = *mode_cutoff;
            j.options.budget = *budget;
            j.options.fiber = *fiber;
            (j, out)
        }
        Weyl { action, n, b, b_minus, g_minus, t, s, x, x_prime, check_quadrature, out } => {
            let mut j = JobSpec::new(CommandId::Weyl);
            j.weyl = Some(WeylPairSpec {
                plus: WeylModelSpec { g: identity(*n, 1.0), curv: planar(*n, *b)? },
                minus: WeylModelSpec { g: identity(*n, *g_minus), curv: planar(*n, *b_minus)? },
            });
            j.grid.t = t.clone();
            j.grid.s = s.clone();
            j.options.x = x.clone();
            j.options.x_prime = x_prime.clone();
            j.options.quantity = Some(
                match action {
                    WeylAction::Convolve => "convolve",
                    WeylAction::Single => "single",
                    WeylAction::Density => "density",
                }
                .into(),
            );
            if *check_quadrature {
                j.options.check_quadrature = Some(true);
            }
            (j, out)
        }
        Fit { op, model, pair, min, max, points, powers, t, s, out } => {
            let mut j = JobSpec::new(CommandId::Fit);
            if !(*min > 0.0 && max > min && *points >= 2) {
                return Err("need 0 < min < max and at least 2 points".into());
            }
            let grid = log_grid(*min, *max, *points);
            match op {
                FitOp::Trace | FitOp::Heatdet => {
                    j.model = Some(model.build()?);
                    j.grid.t = grid;
                }
                FitOp::Relative | FitOp::DiracRelative => {
                    j.pair = Some(pair.build());
                    j.grid.eps = grid;
                    j.grid.t = vec![*t];
                    j.grid.s = vec![*s];
                }
            }
            j.fit = Some(FitSpec { op: *op, powers: powers.clone() });
            (j, out)
        }
    };
    let mut job = job;
    if let Some(f) = out.format {
        job.output.format = f;
    }
    if let Some(p) = &out.output {
        job.output.path = Some(p.display().to_string());
    }
    Ok((job, out.clone()))
}
