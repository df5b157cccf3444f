//! Four-site chain with non-commuting `A` and `C`, where every quantity has a closed form.

mod common;

use std::sync::Arc;

use ctoqw::catalog::{noncommuting_eigenvalues, noncommuting_finite, noncommuting_p00, noncommuting_w1};
use ctoqw::dynamics::{half_line_spectral, km_matrix, p_direct, p_km, DensityOperator, MeasureMethod};
use ctoqw::lindblad::assemble;
use ctoqw::matcore::{c64, eig_hermitian, identity, inverse, max_abs, CMat};
use ctoqw::orthopoly::{compute_symmetrizers, symmetrized_dense};
use ctoqw::stieltjes::laplace_transition;

#[test]
fn spectrum_and_multiplicities() {
    let model = noncommuting_finite();
    let chain = compute_symmetrizers(&model, 0, 3).unwrap();
    let bt = assemble(&model, 0, 3).unwrap();
    let j = symmetrized_dense(&bt, &chain).unwrap();
    let (mut vals, _) = eig_hermitian(&j).unwrap();
    vals.sort_by(f64::total_cmp);
    let r5 = 5f64.sqrt();
    let mut want = Vec::new();
    for l in noncommuting_eigenvalues() {
        let simple = (l - (3.0 - r5)).abs() < 1e-12 || (l - (3.0 + r5)).abs() < 1e-12;
        want.extend(std::iter::repeat(l).take(if simple { 1 } else { 2 }));
    }
    assert_eq!(want.len(), 16);
    for (got, w) in vals.iter().zip(&want) {
        assert!((got - w).abs() < 1e-10, "{got} vs {w}");
    }
}

#[test]
fn atom_positions_and_weight_at_zero() {
    let model = Arc::new(noncommuting_finite());
    let spec = half_line_spectral(&model).unwrap();
    assert_eq!(spec.method, MeasureMethod::Finite);
    let xs: Vec<f64> = spec.measure.atoms.iter().map(|a| a.x).collect();
    let want = noncommuting_eigenvalues();
    assert_eq!(xs.len(), want.len(), "{xs:?}");
    for (x, w) in xs.iter().zip(&want) {
        assert!((x - w).abs() < 1e-10);
    }
    let w0 = &spec.measure.atoms[0].weight;
    assert!(max_abs(&(w0 - noncommuting_w1())) < 1e-10);
    assert!(max_abs(&(spec.measure.mass().unwrap() - identity(4))) < 1e-10);
}

#[test]
fn return_probability_closed_form() {
    let model = Arc::new(noncommuting_finite());
    let spec = half_line_spectral(&model).unwrap();
    for a in [0.2, 0.5, 0.8] {
        for b_re in [-0.3, 0.0, 0.3] {
            let b = c64(b_re, 0.1);
            if a * (1.0 - a) < b.norm_sqr() {
                continue;
            }
            let rho = DensityOperator::qubit(a, b).unwrap();
            for t in [0.25, 1.0, 4.0] {
                let want = noncommuting_p00(a, b, t);
                let km = p_km(&spec.measure, &spec.polys, &spec.chain, 0, 0, &rho, t).unwrap();
                let direct = p_direct(&model, 0, 0, &rho, t).unwrap().value;
                assert!((km - want).abs() < 1e-8, "a = {a}, b = {b}, t = {t}: {km} vs {want}");
                assert!((direct - want).abs() < 1e-8, "a = {a}, b = {b}, t = {t}: {direct} vs {want}");
            }
        }
    }
}

#[test]
fn karlin_mcgregor_matches_direct_for_all_pairs() {
    let model = Arc::new(noncommuting_finite());
    let spec = half_line_spectral(&model).unwrap();
    let rho = DensityOperator::qubit(0.7, c64(0.2, -0.1)).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64).collect();
    for j in 0..4 {
        for i in 0..4 {
            for &t in &times {
                let km = p_km(&spec.measure, &spec.polys, &spec.chain, j, i, &rho, t).unwrap();
                let direct = p_direct(&model, j as i64, i as i64, &rho, t).unwrap().value;
                assert!((km - direct).abs() < 1e-7, "({j}, {i}) t = {t}: {km} vs {direct}");
            }
        }
    }
}

#[test]
fn laplace_transform_is_the_resolvent() {
    let model = Arc::new(noncommuting_finite());
    let spec = half_line_spectral(&model).unwrap();
    let dense = assemble(&model, 0, 3).unwrap().to_dense();
    for s in [0.5, 2.0] {
        let res = inverse(&(identity(16) * c64(s, 0.0) - &dense)).unwrap();
        for (j, i) in [(0, 0), (2, 1), (3, 0)] {
            let km = spec.chain.km_norm(j as i64).unwrap();
            let lt = laplace_transition(&spec.measure, &spec.polys, &km, j, i, s).unwrap();
            let block: CMat = res.view((4 * j, 4 * i), (4, 4)).into_owned();
            assert!(max_abs(&(lt - block)) < 1e-10);
        }
    }
}

#[test]
fn transition_matrices_form_a_semigroup() {
    let model = Arc::new(noncommuting_finite());
    let spec = half_line_spectral(&model).unwrap();
    let lam = |j, i, t| km_matrix(&spec.measure, &spec.polys, &spec.chain, j, i, t).unwrap();
    let (t, s) = (0.4, 0.9);
    for (j, i) in [(0, 0), (1, 3), (3, 2)] {
        let mut sum = CMat::zeros(4, 4);
        for k in 0..4 {
            sum += lam(j, k, t) * lam(k, i, s);
        }
        assert!(max_abs(&(sum - lam(j, i, t + s))) < 1e-8);
    }
}
