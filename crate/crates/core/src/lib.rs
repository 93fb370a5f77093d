//! Simulation and maximum-likelihood inference for controlled branching
//! processes with power-series control laws.
//!
//! - [`model`]: offspring laws, control families, samples and simulation.
//! - [`mle`]: closed-form estimators from the entire family tree.
//! - [`trees`]: enumeration and counting of offspring configurations.
//! - [`em`]: EM algorithms for progenitor and sizes-only samples.
//! - [`likelihood`]: exact observed-data log-likelihoods, AIC, model scan.
//! - [`bootstrap`]: parametric bootstrap of the EM estimators.
//! - [`io`]: CSV layout of the samples.

pub mod bootstrap;
pub mod em;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod mle;
pub mod model;
pub mod rng;
pub mod trees;

pub use bootstrap::{bootstrap, efficiency, BootstrapConfig, BootstrapSummary, ParameterVector, Scheme};
pub use em::{
    e_step_progenitors, e_step_sizes, em_fit_progenitors, em_fit_sizes, m_step, multi_start, EStepKernel, EmConfig,
    EmFit, MultiStart,
};
pub use error::{Error, ErrorClass, Result};
pub use likelihood::{
    aic, convolution_powers, loglik_progenitors, loglik_sizes, scan, ConvolutionPowers, IncompleteSample,
    InformationCriterion, LogLikelihood, ScanConfig, ScanResult,
};
pub use mle::{confidence_intervals, estimate, CompleteMle, ConfidenceIntervals, Interval};
pub use model::{
    control_pmf, project_progenitors, project_sizes, simulate, ControlFamily, ControlKind, FullTreeSample,
    OffspringDistribution, ProgenitorSample, SizesSample,
};
pub use trees::{b_max, b_star_max, count_b, count_b_star, enumerate_fixed, enumerate_ranged, Configuration};
