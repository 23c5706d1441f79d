// index-based loops are the clearer idiom in the matrix-heavy numerics here
#![allow(clippy::needless_range_loop)]

//! Numerical machinery for the planetary (1+N)-body problem: Laplace
//! coefficients, canonical coordinate charts (Delaunay-Poincaré, Deprit),
//! closed-form secular expansions to fourth order, Birkhoff normal forms
//! with torsion and non-resonance certificates, quantitative KAM-condition
//! arithmetic, and a direct N-body integration oracle.
//!
//! Every closed-form expansion in this crate is cross-checked against an
//! independent route (quadrature, finite differences, or direct
//! integration); the [`acceptance`] module bundles those checks into a
//! battery that both `cargo test` and the `planet verify` subcommand run.

pub mod acceptance;
pub mod birkhoff;
pub mod cli;
pub mod deprit;
pub mod kamcheck;
pub mod kepler;
pub mod laplace;
pub mod nbody;
pub mod oracle;
pub mod poly;
pub mod secular;

pub use secular::MassConfig;
