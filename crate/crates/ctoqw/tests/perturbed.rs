//! Equal transitions `A = C = U diag(2, 1) U*` with a self-loop and a
//! Hamiltonian at site 0: closed-form transforms and recurrence of 0 and −1.

use std::sync::Arc;

use ctoqw::catalog::{perturbed_half_line, perturbed_line, rotation};
use ctoqw::dynamics::{line_fold_transforms, DensityOperator};
use ctoqw::lindblad::{half_line_blocks, line_restriction_minus, line_restriction_plus};
use ctoqw::matcore::{c64, conj, diag_real, inverse, kron, max_abs, CMat};
use ctoqw::orthopoly::compute_symmetrizers;
use ctoqw::stieltjes::{classify_recurrence, HalfLineResolvent, Transform, Verdict};
use ctoqw::C64;

const H1: [C64; 3] = [C64::new(0.0, 0.0), C64::new(0.3, 0.2), C64::new(-1.1, 0.7)];
const H2: [f64; 2] = [0.0, -0.8];

fn big_u() -> CMat {
    let u = rotation();
    kron(&u, &conj(&u))
}

/// `√(z² − bz + c)` for real `z < 0`, where the radicand is positive.
fn root(z: f64, b: f64, c: f64) -> f64 {
    (z * z - b * z + c).sqrt()
}

/// `𝒰 M(z)^{-1} 𝒰*` with `M` carrying `s_k(z) + offset_k − |h₁|²` on its diagonal.
fn closed_form(z: f64, h1: C64, offsets: [f64; 3]) -> CMat {
    let n = h1.norm_sqr();
    let s1 = 32.0 / (z - 8.0 + root(z, 16.0, 0.0)) + offsets[0] - n;
    let s2 = 8.0 / (z - 5.0 + root(z, 10.0, 9.0)) + offsets[1] - n;
    let s3 = 2.0 / (z - 2.0 + root(z, 4.0, 0.0)) + offsets[2] - n;
    let o = c64(0.0, 0.0);
    let r = |x: f64| c64(x, 0.0);
    #[rustfmt::skip]
    let m = CMat::from_row_slice(4, 4, &[
        r(s1), o, o, r(n),
        o, r(s2), h1 * h1, o,
        o, (h1 * h1).conj(), r(s2), o,
        r(n), o, o, r(s3),
    ]);
    let u = big_u();
    &u * inverse(&m).unwrap() * u.adjoint()
}

fn states() -> Vec<DensityOperator> {
    vec![DensityOperator::pure(2, 0), DensityOperator::pure(2, 1), DensityOperator::maximally_mixed(2), DensityOperator::qubit(0.3, c64(0.1, 0.4)).unwrap()]
}

#[test]
fn half_line_transform_matches_closed_form() {
    for h1 in H1 {
        for h2 in H2 {
            let ev = HalfLineResolvent::new(half_line_blocks(&perturbed_half_line(h1, h2)).unwrap());
            for z in [-0.05, -0.7, -3.0, -12.0] {
                let got = ev.eval(c64(z, 0.0)).unwrap();
                assert!(max_abs(&(got - closed_form(z, h1, [4.0, 2.5, 1.0]))) < 1e-10, "h1 = {h1}, z = {z}");
            }
        }
    }
}

#[test]
fn unperturbed_tail_is_diagonal_in_the_rotated_basis() {
    let ev = HalfLineResolvent::new(line_restriction_minus(&perturbed_line(c64(0.4, 0.1), 0.2)).unwrap());
    let u = big_u();
    for z in [-0.2f64, -1.5, -6.0] {
        let w1 = 8.0 - z - (z * (z - 16.0)).sqrt();
        let w2 = 20.0 - 4.0 * z - 4.0 * root(z, 10.0, 9.0);
        let w4 = 32.0 - 16.0 * z - 16.0 * root(z, 4.0, 0.0);
        // the displayed w_k are positive for z < 0, where a transform of a measure on [0, ∞) is negative
        let want = -(&u * diag_real(&[w1, w2, w2, w4]) * u.adjoint()) / c64(32.0, 0.0);
        let got = ev.eval(c64(z, 0.0)).unwrap();
        assert!(max_abs(&(got - want)) < 1e-10, "z = {z}");
    }
}

#[test]
fn line_plus_transform_matches_closed_form() {
    for h1 in H1 {
        let ev = HalfLineResolvent::new(line_restriction_plus(&perturbed_line(h1, 0.5)).unwrap());
        for z in [-0.1, -2.0, -9.0] {
            let got = ev.eval(c64(z, 0.0)).unwrap();
            assert!(max_abs(&(got - closed_form(z, h1, [0.0, 0.0, 0.0]))) < 1e-10, "h1 = {h1}, z = {z}");
        }
    }
}

#[test]
fn site_zero_of_the_half_line_is_recurrent() {
    for h1 in H1 {
        for h2 in H2 {
            let ev = HalfLineResolvent::new(half_line_blocks(&perturbed_half_line(h1, h2)).unwrap());
            for rho in states() {
                let v = classify_recurrence(&ev, &CMat::identity(4, 4), &rho).unwrap();
                assert_eq!(v.verdict, Verdict::Recurrent, "h1 = {h1}, h2 = {h2}, slope {}", v.slope);
            }
        }
    }
}

#[test]
fn sites_zero_and_minus_one_of_the_line_are_recurrent() {
    for h1 in H1 {
        let model = Arc::new(perturbed_line(h1, 0.5));
        let chain = compute_symmetrizers(model.as_ref(), -2, 1).unwrap();
        let ft = line_fold_transforms(&model, &chain).unwrap();
        let km_m1 = chain.km_norm(-1).unwrap();
        for rho in states() {
            let v0 = classify_recurrence(ft.w11.as_ref(), &CMat::identity(4, 4), &rho).unwrap();
            let v1 = classify_recurrence(ft.w22.as_ref(), &km_m1, &rho).unwrap();
            assert_eq!(v0.verdict, Verdict::Recurrent, "site 0, h1 = {h1}");
            assert_eq!(v1.verdict, Verdict::Recurrent, "site -1, h1 = {h1}");
        }
    }
}
