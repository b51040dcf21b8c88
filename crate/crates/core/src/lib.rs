//! Multi-source redundancy for linear Gaussian factor graphs.
//!
//! The crate covers four layers:
//!
//! * [`gauss`]: symmetric matrices, Cholesky-based PD checks and
//!   information-form Gaussians.
//! * [`graph`]: linear factors and supplemented factor graphs (a full-rank
//!   base subgraph defining the prior, plus supplemental factors).
//! * [`lattice`]: sources, antichains and their order.
//! * [`redundancy`]: the information-theoretic (WB) and Wasserstein (WASS)
//!   specific-quality functions, their qualities and the Monte Carlo and
//!   quadrature estimators of antichain redundancy.

pub mod error;
pub mod gauss;
pub mod graph;
pub mod lattice;
pub mod redundancy;

pub use error::{Error, Result};
pub use gauss::{logdet_pd, mahalanobis_sq, Cholesky, GaussianBelief, SymMatrix};
pub use graph::{IndexSet, LinearFactor, SubgraphInfo, SupplementedGraph};
pub use lattice::{Antichain, BivariateAtoms, SourceSet};
pub use redundancy::{QualityKind, RedundancyEstimate, ReportRecord, SpecificQuality};
