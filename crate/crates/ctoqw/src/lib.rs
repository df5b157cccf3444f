//! Spectral methods for continuous-time open quantum walks (CTOQWs) on
//! nearest-neighbour chains: finite segments, the half-line and the integer line.
//!
//! The generator of a walk is stored in its vec representation as a block
//! tridiagonal matrix with `d² × d²` blocks. From it the crate builds matrix
//! valued orthogonal polynomials and spectral weight matrices, evaluates
//! Stieltjes transforms, classifies site recurrence and computes transition
//! probabilities with the Karlin–McGregor formula, cross-checked against
//! direct matrix exponentials.

pub mod catalog;
pub mod dynamics;
pub mod lindblad;
pub mod matcore;
pub mod modelfile;
pub mod orthopoly;
pub mod spectral;
pub mod stieltjes;

pub use matcore::{CMat, CVec, C64};
