//! Proptest strategies shared by the property suite and the acceptance run.

use proptest::prelude::*;

use ctoqw::dynamics::DensityOperator;
use ctoqw::lindblad::SiteOperators;
use ctoqw::matcore::{c64, diag_real, CMat};
use ctoqw::C64;

pub fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| c64(re, im))
}

pub fn matrix(d: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec(complex(), d * d).prop_map(move |v| CMat::from_row_slice(d, d, &v))
}

pub fn hermitian(d: usize) -> impl Strategy<Value = CMat> {
    matrix(d).prop_map(|m| (&m + m.adjoint()) * c64(0.5, 0.0))
}

/// A unitary from the QR factor of a random matrix.
pub fn unitary(d: usize) -> impl Strategy<Value = CMat> {
    matrix(d).prop_map(move |m| (m + CMat::identity(d, d) * c64(2.0, 0.0)).qr().q())
}

pub fn state(d: usize) -> impl Strategy<Value = DensityOperator> {
    matrix(d).prop_map(|m| {
        let p = &m * m.adjoint() + CMat::identity(m.nrows(), m.nrows()) * c64(1e-3, 0.0);
        let tr = p.trace();
        DensityOperator::new(p / tr).unwrap()
    })
}

pub fn rates() -> impl Strategy<Value = [f64; 2]> {
    (0.4..2.5f64, 0.4..2.5f64).prop_map(|(x, y)| [x, y])
}

/// Rates of comparable size with `c/a` within 1.25 per component. Far sites of
/// drifted or badly scaled chains make the Karlin–McGregor sums cancel
/// catastrophically, since `Q_n` grows like `(x / (a_i a_j))^n`.
pub fn well_scaled() -> impl Strategy<Value = ([f64; 2], [f64; 2])> {
    (0.7..1.6f64, 0.7..1.6f64, 0.8..1.25f64, 0.8..1.25f64).prop_map(|(a0, a1, f0, f1)| ([a0, a1], [a0 * f0, a1 * f1]))
}

pub fn commuting_ops(u: &CMat, a: [f64; 2], c: [f64; 2]) -> SiteOperators {
    SiteOperators::transitions(u * diag_real(&a) * u.adjoint(), u * diag_real(&c) * u.adjoint())
}
