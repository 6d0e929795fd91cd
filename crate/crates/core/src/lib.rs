//! Heat traces, spectral functions and heat invariants of exactly solvable operators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod heatdet;
pub mod invariants;
pub mod magnetic;
pub mod mellin;
pub mod models;
pub mod nonlaplace;
pub mod numeric;
pub mod relative;
pub mod series;
pub mod traces;
pub mod weyl;

pub use error::{Error, Result};
pub use heatdet::{heat_det, heat_det_defining, heat_det_leading, CorrelatorSet, HeatDetOptions};
pub use invariants::{ggs_gamma, heat_coefficients, GammaMethod, GeometryData, ObliqueSymbol};
pub use magnetic::{landau_check, u0_kernel, MagneticModel};
pub use mellin::{a_q, log_det, zeta, AqResult, ComplexValue, ZetaMethod};
pub use models::{eigenvalues, BoundaryCondition, ModelOperator, Spectrum};
pub use nonlaplace::{a0_density, dirichlet_a1_density, ConstantSymbol};
pub use numeric::linalg::CMatrix;
pub use relative::{bogolyubov, BogolyubovMethod, TracePair};
pub use series::{expansion_fit, AsymptoticSeries, FitReport};
pub use traces::{classical_trace, quantum_trace, relativistic_trace, HeatSource, Method, Statistics, TraceMethod, TraceValue};
pub use weyl::{convolution_kernel, single_kernel, WeylModel, WeylPair};
