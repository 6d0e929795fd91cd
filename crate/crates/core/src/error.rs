use thiserror::Error;

/// Errors raised by heatlab operations.
///
/// Variants split into validation failures (bad input, violated
/// preconditions) and numerical failures (a computation could not reach its
/// tolerance). [`Error::is_validation`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("operator is not strictly positive (smallest eigenvalue {min_eigenvalue})")]
    NonPositiveOperator { min_eigenvalue: f64 },
    #[error("shifted operator is not positive: shift {shift} is not below smallest eigenvalue {min_eigenvalue}")]
    NonPositiveShiftedOperator { shift: f64, min_eigenvalue: f64 },
    #[error("no eigenvalue lies below the cutoff {cutoff}")]
    CutoffTooSmall { cutoff: f64 },
    #[error("lambda {lambda} exceeds the spectrum cutoff {cutoff}")]
    AboveCutoff { lambda: f64, cutoff: f64 },
    #[error("truncation tail bound {bound} exceeds tolerance {tolerance}")]
    TailTooLarge { bound: f64, tolerance: f64 },
    #[error("quadrature failed: achieved error {achieved} above target {target}")]
    QuadratureFailure { achieved: f64, target: f64 },
    #[error("Bose trace diverges: mu {mu} is not below sqrt(lambda_min) = {threshold}")]
    BoseDivergence { mu: f64, threshold: f64 },
    #[error("series order {order} is too low for q = {q}")]
    InsufficientOrder { order: usize, q: f64 },
    #[error("zeta function has a pole at s = {s}")]
    PoleOfZeta { s: f64 },
    #[error("fit is ill-conditioned (condition number {condition})")]
    IllConditioned { condition: f64 },
    #[error("fit design matrix is rank deficient")]
    RankDeficient,
    #[error("symbol is not elliptic (certified margin {margin})")]
    NotElliptic { margin: f64 },
    #[error("closed form does not apply: {0}")]
    WrongAlgebraicStructure(String),
    #[error("contour truncation insufficient: tail bound {bound}")]
    ContourTooShort { bound: f64 },
    #[error("curved-space coefficient requested outside the flat scope")]
    CurvedScopeUnsupported,
    #[error("operators do not share an eigenbasis: {0}")]
    NonCommutingPair(String),
    #[error("Dirac spectrum has no chiral involution for twist {twist}")]
    NoChiralInvolution { twist: f64 },
    #[error("model not supported here: {0}")]
    UnsupportedModel(String),
    #[error("matrix D is singular (determinant {det})")]
    SingularD { det: f64 },
    #[error("kernel quadratic form is not bounded (min eigenvalue {min_eigenvalue})")]
    KernelNotBounded { min_eigenvalue: f64 },
    #[error("diagonal is not integrable over space")]
    NonIntegrableDiagonal,
    #[error("mode budget {budget} exceeded (needs {needed})")]
    BudgetExceeded { budget: usize, needed: usize },
}

impl Error {
    /// True for input and precondition errors, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::TailTooLarge { .. }
                | Error::QuadratureFailure { .. }
                | Error::IllConditioned { .. }
                | Error::RankDeficient
                | Error::ContourTooShort { .. }
                | Error::SingularD { .. }
                | Error::KernelNotBounded { .. }
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NonPositiveOperator { .. } => "NonPositiveOperator",
            Error::NonPositiveShiftedOperator { .. } => "NonPositiveShiftedOperator",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::AboveCutoff { .. } => "AboveCutoff",
            Error::TailTooLarge { .. } => "TailTooLarge",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::BoseDivergence { .. } => "BoseDivergence",
            Error::InsufficientOrder { .. } => "InsufficientOrder",
            Error::PoleOfZeta { .. } => "PoleOfZeta",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::RankDeficient => "RankDeficient",
            Error::NotElliptic { .. } => "NotElliptic",
            Error::WrongAlgebraicStructure(_) => "WrongAlgebraicStructure",
            Error::ContourTooShort { .. } => "ContourTooShort",
            Error::CurvedScopeUnsupported => "CurvedScopeUnsupported",
            Error::NonCommutingPair(_) => "NonCommutingPair",
            Error::NoChiralInvolution { .. } => "NoChiralInvolution",
            Error::UnsupportedModel(_) => "UnsupportedModel",
            Error::SingularD { .. } => "SingularD",
            Error::KernelNotBounded { .. } => "KernelNotBounded",
            Error::NonIntegrableDiagonal => "NonIntegrableDiagonal",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
