//! Early-stopped mirror descent over convex bodies.
//!
//! The crate provides:
//! - a regression model with seeded, splittable randomness ([`model`], [`rng`]);
//! - convex constraint bodies with gauge / LMO / membership / projection
//!   oracles ([`bodies`]);
//! - a zoo of mirror-descent potentials with certified constants and an
//!   executable checker for the design conditions ([`potentials`]);
//! - discrete- and continuous-time mirror descent with the step-size rule
//!   and stopping horizon ([`mirror`]);
//! - a Frank-Wolfe solver for the constrained least squares baseline ([`lse`]);
//! - Monte Carlo estimation of Gaussian widths and critical radii ([`width`]);
//! - the simulation harness behind the `esmd` command-line tool
//!   ([`experiments`]).

pub mod bodies;
pub mod error;
pub mod experiments;
pub mod lse;
pub mod mirror;
pub mod model;
pub mod numeric;
pub mod potentials;
pub mod rng;
pub mod solvers;
pub mod width;

pub use bodies::{BodyKind, BodyPoint, ConvexBody};
pub use error::{EsmdError, Result};
pub use model::{
    empirical_risk, empirical_risk_gradient, in_sample_risk, sample_gaussian_design,
    sample_instance, sample_instance_scaled, smoothness_constant, DesignMatrix, NormTag,
    RegressionInstance,
};
pub use potentials::{
    check_assumption, AssumptionReport, Caps, Potential, PotentialKind, Table1Name,
    Table1Overrides,
};
pub use rng::RngStream;
