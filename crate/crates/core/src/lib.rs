//! Arbitrary-precision real M-th roots of positive rationals by iterating a
//! fixed-point polynomial whose order of convergence is selectable.

pub mod analysis;
pub mod cli;
pub mod coeffs;
pub mod engine;
pub mod exactpoly;
