//! Ready-made models with known closed forms, used by the tests and the
//! `reproduce-all` command.

use crate::lindblad::{Boundary, Model, SiteOperators, SiteOverride, VertexSet};
use crate::matcore::{c64, diag_real, from_real_rows, CMat, C64};

fn diagonal_ops(a: [f64; 2], c: [f64; 2]) -> SiteOperators {
    SiteOperators::transitions(diag_real(&a), diag_real(&c))
}

/// Diagonal transitions `A = diag(a)`, `C = diag(c)` on `sites` sites.
pub fn diagonal_finite(a: [f64; 2], c: [f64; 2], sites: usize, boundary: Boundary) -> Model {
    Model::new(VertexSet::Finite { sites, boundary }, diagonal_ops(a, c)).expect("valid model")
}

pub fn diagonal_half_line(a: [f64; 2], c: [f64; 2]) -> Model {
    Model::new(VertexSet::HalfLine, diagonal_ops(a, c)).expect("valid model")
}

pub fn diagonal_line(a: [f64; 2], c: [f64; 2]) -> Model {
    Model::new(VertexSet::Line, diagonal_ops(a, c)).expect("valid model")
}

/// The unitary used by the rotated examples.
pub fn rotation() -> CMat {
    let (th, ph): (f64, f64) = (0.4, 0.3);
    let e = c64(ph.cos(), ph.sin());
    CMat::from_row_slice(2, 2, &[c64(th.cos(), 0.0), -e * th.sin(), e.conj() * th.sin(), c64(th.cos(), 0.0)])
}

fn rotate(u: &CMat, m: &CMat) -> CMat {
    u * m * u.adjoint()
}

/// `A = U diag(a) U*`, `C = U diag(c) U*` on the half-line.
pub fn rotated_half_line(u: &CMat, a: [f64; 2], c: [f64; 2]) -> Model {
    let ops = SiteOperators::transitions(rotate(u, &diag_real(&a)), rotate(u, &diag_real(&c)));
    Model::new(VertexSet::HalfLine, ops).expect("valid model")
}

fn perturbation(h1: C64, h2: f64) -> SiteOverride {
    let u = rotation();
    let i = c64(0.0, 1.0);
    let b0 = CMat::from_row_slice(2, 2, &[c64(1.0, 0.0), h1 * i, h1.conj() * i, c64(1.0, 0.0)]);
    let h0 = CMat::from_row_slice(2, 2, &[c64(h2, 0.0), h1, h1.conj(), c64(h2, 0.0)]);
    SiteOverride { stay: Some(rotate(&u, &b0)), hamiltonian: Some(rotate(&u, &h0)), ..Default::default() }
}

fn rotated_equal_ops() -> SiteOperators {
    let a = rotate(&rotation(), &diag_real(&[2.0, 1.0]));
    SiteOperators::transitions(a.clone(), a)
}

/// `A = C = U diag(2, 1) U*` with a self-loop and a Hamiltonian at site 0.
pub fn perturbed_half_line(h1: C64, h2: f64) -> Model {
    Model::new(VertexSet::HalfLine, rotated_equal_ops())
        .and_then(|m| m.with_override(0, perturbation(h1, h2)))
        .expect("valid model")
}

/// Line version of [`perturbed_half_line`].
pub fn perturbed_line(h1: C64, h2: f64) -> Model {
    Model::new(VertexSet::Line, rotated_equal_ops()).and_then(|m| m.with_override(0, perturbation(h1, h2))).expect("valid model")
}

/// Four reflecting sites with `A = [[1, 0], [1, −1]]`, `C = [[1, 1], [0, −1]]`.
pub fn noncommuting_finite() -> Model {
    let a = from_real_rows(&[&[1.0, 0.0], &[1.0, -1.0]]);
    let c = from_real_rows(&[&[1.0, 1.0], &[0.0, -1.0]]);
    Model::new(VertexSet::Finite { sites: 4, boundary: Boundary::Reflecting }, SiteOperators::transitions(a, c)).expect("valid model")
}

/// Distinct eigenvalues of `−L̂` for [`noncommuting_finite`], ascending.
pub fn noncommuting_eigenvalues() -> Vec<f64> {
    let (r5, r7, r17, r41) = (5f64.sqrt(), 7f64.sqrt(), 17f64.sqrt(), 41f64.sqrt());
    let mut v = vec![0.0, 3.0 - r5, 3.0 + r5, 3.0 - r7, 3.0 + r7, (7.0 - r17) / 4.0, (7.0 + r17) / 4.0, (11.0 - r41) / 4.0, (11.0 + r41) / 4.0];
    v.sort_by(f64::total_cmp);
    v
}

/// Weight of the eigenvalue `0` for [`noncommuting_finite`].
pub fn noncommuting_w1() -> CMat {
    from_real_rows(&[&[3.0, -1.0, -1.0, 2.0], &[-1.0, 2.0, 2.0, 1.0], &[-1.0, 2.0, 2.0, 1.0], &[2.0, 1.0, 1.0, 3.0]]) / c64(20.0, 0.0)
}

/// Closed form of `p_{00;ρ}(t)` for [`noncommuting_finite`] and `ρ = [[a, b], [b*, 1 − a]]`.
pub fn noncommuting_p00(a: f64, b: C64, t: f64) -> f64 {
    let (r5, r7) = (5f64.sqrt(), 7f64.sqrt());
    let (l2, l3, l4, l5) = (3.0 - r5, 3.0 + r5, 3.0 - r7, 3.0 + r7);
    let v1 = r5 / 40.0 * (1.0 - 2.0 * a + 4.0 * b.re);
    let v2 = r7 / 28.0 * (2.0 - a + 2.0 * b.re);
    let e = |l: f64| (-l * t).exp();
    0.25 + (e(l2) - e(l3)) * v1 + (e(l2) + e(l3)) / 8.0 + (e(l4) - e(l5)) * v2 + (e(l4) + e(l5)) / 4.0
}

/// Antidiagonal transitions `A = [[0, a₁], [a₂, 0]]`, `C = [[0, c₁], [c₂, 0]]` on the half-line.
pub fn antidiagonal_half_line(a1: f64, a2: f64, c1: f64, c2: f64) -> Model {
    let a = from_real_rows(&[&[0.0, a1], &[a2, 0.0]]);
    let c = from_real_rows(&[&[0.0, c1], &[c2, 0.0]]);
    Model::new(VertexSet::HalfLine, SiteOperators::transitions(a, c)).expect("valid model")
}

/// The claimed recurrence boundary `a₁(a₂, c₁, c₂)` of the antidiagonal walk.
pub fn antidiagonal_locus(a2: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * c2.powi(4) - a2 * a2 * c1 * c1 + a2.powi(4) + 3.0 * a2 * a2 * c2 * c2) / (a2 * a2 + 2.0 * c2 * c2)).sqrt()
}
