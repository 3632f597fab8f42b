//! Exact finite-sample risk analysis for kernel estimators of the
//! cumulative distribution function under finite normal mixtures, with
//! bandwidth and kernel-order selection and a simulation harness.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] — special functions and adaptive quadrature the rest of
//!   the crate is built on;
//! * [`mixture`] — finite normal mixtures, reference distributions, the
//!   distribution catalog, and the pairwise Gaussian functionals;
//! * [`kernels`] — Gaussian-based kernels of arbitrary even order and the
//!   sinc kernel;
//! * [`mise`] — exact, asymptotic, and lower-bound risk computations;
//! * [`bandwidth`] — bandwidth/order selection (exact oracle, mixture
//!   plug-in, cross-validation, reference rules);
//! * [`emfit`] — EM fitting of normal mixtures with AIC/BIC model choice;
//! * [`estimator`] — the estimator itself on data, and its integrated
//!   squared error against a known truth;
//! * [`sim`] — reproducible simulation experiments and their summaries.

pub mod error;
pub mod specfun;
pub mod mixture;
pub mod kernels;
pub mod mise;
pub mod emfit;
pub mod bandwidth;
pub mod estimator;
pub mod sim;

/// Library version, recorded in simulation manifests for reproducibility.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bandwidth::{BandwidthChoice, ComponentRule, SelectionMethod};
pub use estimator::FittedCdf;
pub use emfit::{MixtureFit, ModelCriterion};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, MAX_ORDER};
pub use mise::{CrValue, MiseBreakdown};
pub use mixture::{catalog, NormalMixture, ReferenceDistribution, CATALOG_IDS};
pub use sim::{ExperimentConfig, MethodSpec, MethodSummary, ReplicationRecord};
