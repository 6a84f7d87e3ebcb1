//! Multi-dimensional Heine laws and the finite-n radial Coulomb gas
//! machinery for particle counts near outposts of a droplet.
//!
//! * [`heine`] and [`count_law`]: exact pmf tables, moments, sampling and
//!   mapped convolutions of multi-dimensional Heine vectors.
//! * [`radial`]: radial potentials, obstacle-problem diagnostics and the
//!   case-1 / case-2 example builders.
//! * [`engine`]: weighted-norm integrals, joint moment generating functions,
//!   exact finite-n count laws and moduli sampling.
//! * [`limits`]: the limiting Heine parameters for both outpost cases.
//! * [`experiment`]: JSON configs, convergence studies and potential validation.

pub mod count_law;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod heine;
pub mod limits;
pub mod qseries;
pub mod quadrature;
pub mod radial;

pub use count_law::{convolve_mapped, tv_distance, CoordinateMap, CountLaw, TvInterval};
pub use error::{Error, Result};
pub use heine::{validate_params, HeineParams, HeineSamples, PointProbability, SiteDistribution};
