//! Numerical toolkit for pairs of planar mappings whose gradients deform the
//! unit disc to similar ellipses: exact conformal/anticonformal 2x2 algebra,
//! a spectral principal-solution Beltrami solver, the factorization pipeline
//! `u = phi_u o w`, `v = phi_v o w` with its rigidity and energy diagnostics,
//! and the piecewise counterexample showing integrable dilatation is the
//! boundary of that theory.

pub mod beltrami;
pub mod cli;
pub mod fields;
pub mod gridio;
pub mod matalg;
pub mod stoilow;
