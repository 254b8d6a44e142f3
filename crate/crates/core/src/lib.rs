//! Copulae generated by Brownian motions and their running maxima.
//!
//! Layers, bottom up: [`quad`] (adaptive Gauss–Kronrod), [`gauss`]
//! (univariate to quadrivariate normal CDFs), [`bm_joint`] (joint laws of a
//! motion, its maximum and a correlated partner), [`copula`] (the copula
//! family with quantiles, densities and samplers) and [`oracle`] (Monte
//! Carlo and quadrature cross-checks).

pub mod bm_joint;
pub mod copula;
pub mod error;
pub mod gauss;
pub mod oracle;
pub mod quad;
pub mod stats;

pub use bm_joint::{BmParams, CorrBmParams, JointPoint};
pub use copula::{Copula, CopulaKind, QuantileCache, SampleBatch, UnitSquarePoint};
pub use error::{Error, Result};
pub use gauss::{CorrelationMatrix2, CorrelationMatrix3, CorrelationMatrix4};
pub use oracle::{EmpiricalJoint, IdentityVariant, IntegralSpec, PathConfig, RStarIndexing, SimTarget};
