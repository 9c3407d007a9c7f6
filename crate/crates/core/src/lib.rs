//! Winding number statistics of chiral random matrix fields.
//!
//! A one-parameter matrix field `K(p) = a(p) K1 + b(p) K2` built from a pair of
//! Ginibre matrices (complex for class AIII, real quaternion for class CII)
//! models a gapped chiral Bloch Hamiltonian `H(p) = [[0, K(p)], [K(p)^+, 0]]`.
//! The topological content of a realization is the winding number of
//! `det K(p)` around the origin; its statistics are generated by ensemble
//! averages of ratios of determinants of `K` at distinct parameter points.
//!
//! This crate provides
//!
//! * [`numerics`] — dense complex linear algebra: overflow-safe log
//!   determinants, general complex eigenvalues, Pfaffians of skew-symmetric
//!   matrices;
//! * [`specfun`] — log-Beta, a truncated Lerch transcendent and the
//!   skew-orthogonal polynomials of the quaternion spherical ensemble;
//! * [`ensembles`] — Ginibre and spherical samplers plus eigenvalue density
//!   evaluators;
//! * [`field`] — the coefficient field `(a(p), b(p))`, the matrix field and
//!   its chiral Hamiltonian;
//! * [`winding`] — winding number density, integer winding numbers by phase
//!   tracking and contour integration, and winding-number sampling;
//! * [`analytic`] — the closed-form determinant (AIII) and Pfaffian (CII)
//!   expressions for the determinant-ratio averages;
//! * [`montecarlo`] — stochastic estimators for the same averages with
//!   reproducible streams and heavy-tail-aware aggregation;
//! * [`oracles`] — slow independent references (adaptive quadrature) used by
//!   the verification suites.
//!
//! The crate is `no_std` (with `alloc`); all I/O, file formats and the command
//! line live in the companion `chiralwind-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod ensembles;
pub mod field;
pub mod montecarlo;
pub mod numerics;
pub mod oracles;
pub mod specfun;
pub mod winding;

pub use num_complex::Complex64;

/// Symmetry class of the chiral ensemble.
///
/// AIII is the chiral unitary class (`K` is an `N x N` complex Ginibre
/// combination, Dyson index 2); CII is the chiral symplectic class (`K` is a
/// `2N x 2N` real quaternion Ginibre combination, Dyson index 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymmetryClass {
    Aiii,
    Cii,
}

impl SymmetryClass {
    /// Complex dimension of `K` for matrix-size parameter `n`.
    pub fn matrix_dim(self, n: usize) -> usize {
        match self {
            SymmetryClass::Aiii => n,
            SymmetryClass::Cii => 2 * n,
        }
    }
}

impl core::fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SymmetryClass::Aiii => write!(f, "AIII"),
            SymmetryClass::Cii => write!(f, "CII"),
        }
    }
}
