//! Numerical laboratory for heat and Poisson semigroups on weighted,
//! possibly infinite-dimensional tori, truncated to finite frequency boxes.

pub mod error;
pub mod geometry;
pub mod heat;
pub mod lattice;
pub mod lipschitz;
pub mod poisson;
pub mod quadrature;
pub mod random;
pub mod report;
pub mod riesz;
pub mod stochastic;
pub mod suite;
pub mod torus;
pub mod trials;
pub mod weights;

pub use error::{LabError, Result};
pub use lattice::{FrequencyLattice, GridField, SpectralField};
pub use quadrature::{NormEstimate, Quadrature};
pub use report::ExperimentReport;
pub use torus::Torus;
pub use weights::WeightModel;
