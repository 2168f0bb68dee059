//! Random-matrix realization of non-commutative fractional Brownian motion.
//!
//! The crate samples the symmetric matrix fractional Brownian motion
//! `B⁽ⁿ⁾(t) = B(t)/√n`, tracks its eigenvalue process and empirical spectral
//! measure, solves the limiting measure-valued evolution (moment hierarchy and
//! complex Burgers characteristics for the Stieltjes transform), and provides
//! Monte Carlo checks that confront finite-`n` simulations with the
//! semicircle limit of variance `t^{2H}`.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod fgn;
pub mod limitlaw;
pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use fgn::{HurstParameter, TimeGrid};
pub use matrix::SymMatrix;
pub use rng::SeedSpec;
