//! Diagonal transitions on the half-line and the line against closed forms
//! and truncated-generator oracles.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::{branch_root, density_at, linspace, truncated_resolvent};
use ctoqw::catalog::{diagonal_half_line, diagonal_line};
use ctoqw::dynamics::{
    fold_block_identity, half_line_spectral, line_fold_transforms, line_spectral, p_direct, p_km, p_line_km, DensityOperator,
    MeasureMethod,
};
use ctoqw::lindblad::half_line_blocks;
use ctoqw::matcore::{c64, diag_real, max_abs, CMat};
use ctoqw::orthopoly::{compute_symmetrizers, PolynomialEvaluator};
use ctoqw::spectral::{duran_weight, orthogonality_check};
use ctoqw::stieltjes::{classify_recurrence, perron_stieltjes_invert, Evaluator, HalfLineResolvent, Transform, Verdict};

fn duran_blocks(a: [f64; 2], c: [f64; 2]) -> (CMat, CMat) {
    let mid = (a[0] * c[0] * a[1] * c[1]).sqrt();
    let avg = (a[0] * a[0] + c[0] * c[0] + a[1] * a[1] + c[1] * c[1]) / 2.0;
    let k = diag_real(&[a[0] * c[0], mid, mid, a[1] * c[1]]);
    let b = diag_real(&[a[0] * a[0] + c[0] * c[0], avg, avg, a[1] * a[1] + c[1] * c[1]]);
    (k, b)
}

fn semicircle(x: f64, b: f64, k: f64) -> f64 {
    let r = 4.0 * k * k - (x - b) * (x - b);
    if r > 0.0 {
        r.sqrt() / (k * k)
    } else {
        0.0
    }
}

#[test]
fn duran_densities_match_closed_form() {
    let (a, c) = ([1.0, 1.5], [2.0, 0.7]);
    let (k, b) = duran_blocks(a, c);
    let w = duran_weight(&k, &b).unwrap();
    for x in linspace(-1.0, 10.0, 100) {
        let d = density_at(&w, x);
        let d1 = semicircle(x, a[0] * a[0] + c[0] * c[0], a[0] * c[0]) / (2.0 * PI);
        let d4 = semicircle(x, a[1] * a[1] + c[1] * c[1], a[1] * c[1]) / (2.0 * PI);
        assert!((d[(0, 0)].re - d1).abs() < 1e-9, "x = {x}");
        assert!((d[(3, 3)].re - d4).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn duran_weight_orthonormalizes_the_jacobi_polynomials() {
    let (k, b) = duran_blocks([1.0, 1.5], [2.0, 0.7]);
    let w = duran_weight(&k, &b).unwrap();
    let polys = PolynomialEvaluator::jacobi(k, b);
    let gram = orthogonality_check(&w, &|x| polys.sequence(x, 4).unwrap(), 4).unwrap();
    for (j, row) in gram.blocks.iter().enumerate() {
        for (i, g) in row.iter().enumerate() {
            let want = if i == j { CMat::identity(4, 4) } else { CMat::zeros(4, 4) };
            assert!(max_abs(&(g - want)) < 1e-7, "block ({j}, {i})");
        }
    }
}

fn sigma(z: ctoqw::C64, a: f64, c: f64) -> ctoqw::C64 {
    let s = branch_root(z, a * a + c * c, a * c);
    (z - a * a + c * c - s) / (2.0 * c * c * z)
}

#[test]
fn half_line_transform_matches_closed_form_and_truncation() {
    let (a, c) = ([1.0, 1.3], [1.6, 0.8]);
    let model = diagonal_half_line(a, c);
    let ev = HalfLineResolvent::new(half_line_blocks(&model).unwrap());
    for z in [c64(-0.5, 0.0), c64(-2.0, 0.0), c64(0.7, 0.4), c64(3.0, -1.0)] {
        let b = ev.eval(z).unwrap();
        assert!((b[(0, 0)] - sigma(z, a[0], c[0])).norm() < 1e-10, "z = {z}");
        assert!((b[(3, 3)] - sigma(z, a[1], c[1])).norm() < 1e-10, "z = {z}");
    }
    let z = c64(-1.0, 0.0);
    let oracle = &truncated_resolvent(&model, 0, 150, z, &[0], 0)[0];
    assert!(max_abs(&(ev.eval(z).unwrap() - oracle)) < 1e-10);
}

#[test]
fn half_line_measure_has_atom_at_zero_when_drift_points_home() {
    let model = Arc::new(diagonal_half_line([1.0, 1.0], [2.0, 2.0]));
    let spec = half_line_spectral(&model).unwrap();
    assert_eq!(spec.method, MeasureMethod::PerturbedTail);
    let atom = spec.measure.atoms.iter().find(|a| a.x.abs() < 1e-8).expect("atom at 0");
    assert!((atom.weight[(0, 0)].re - 0.75).abs() < 1e-8);
    assert!((atom.weight[(3, 3)].re - 0.75).abs() < 1e-8);
    let mass = spec.measure.mass().unwrap();
    assert!(max_abs(&(mass - CMat::identity(4, 4))) < 1e-8);
    for x in linspace(1.05, 8.95, 40) {
        let want = semicircle(x, 5.0, 2.0) * 4.0 / (2.0 * 4.0 * x) / PI;
        assert!((density_at(&spec.measure, x)[(0, 0)].re - want).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn inversion_recovers_the_half_line_density() {
    let model = diagonal_half_line([1.0, 1.0], [2.0, 2.0]);
    let ev: Evaluator = Arc::new(HalfLineResolvent::new(half_line_blocks(&model).unwrap()));
    let measure = perron_stieltjes_invert(ev.clone(), -0.5, 10.0, 2000, &[4e-3, 2e-3, 1e-3, 5e-4]).unwrap();
    let atom = measure.atoms.iter().find(|a| a.x.abs() < 1e-3).expect("atom at 0");
    assert!((atom.weight[(0, 0)].re - 0.75).abs() < 1e-5);
    for x in linspace(1.1, 8.9, 60) {
        let want = semicircle(x, 5.0, 2.0) * 4.0 / (2.0 * 4.0 * x) / PI;
        assert!((density_at(&measure, x)[(0, 0)].re - want).abs() < 1e-5, "x = {x}");
    }
    let round = ctoqw::stieltjes::MeasureTransform::new(measure);
    for z in [c64(-1.0, 0.0), c64(4.0, 2.0), c64(12.0, 0.0)] {
        assert!(max_abs(&(round.eval(z).unwrap() - ev.eval(z).unwrap())) < 1e-5, "z = {z}");
    }
}

#[test]
fn equal_rates_give_the_off_diagonal_atom() {
    let (r, s) = (1.0f64, 2.0f64);
    let model = Arc::new(diagonal_half_line([r, s], [r, s]));
    let spec = half_line_spectral(&model).unwrap();
    let x0 = (r * r - s * s).powi(2) / (2.0 * (r * r + s * s));
    let mass = ((r * r - s * s) / (r * r + s * s)).powi(2);
    let atom = spec.measure.atoms.iter().find(|a| (a.x - x0).abs() < 1e-8).expect("atom at x0");
    assert!((atom.weight[(1, 1)].re - mass).abs() < 1e-8);
    assert!((atom.weight[(2, 2)].re - mass).abs() < 1e-8);
    let lo = (r - s).powi(2) + 1e-3;
    let hi = (r + s).powi(2) - 1e-3;
    for x in linspace(lo, hi, 50) {
        let num = 2.0 * (((r + s).powi(2) - x) * (x - (r - s).powi(2))).sqrt();
        let want = num / (2.0 * (r * r + s * s) * x - (r * r - s * s).powi(2)) / PI;
        assert!((density_at(&spec.measure, x)[(1, 1)].re - want).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn half_line_karlin_mcgregor_matches_direct() {
    let model = Arc::new(diagonal_half_line([1.0, 1.0], [2.0, 2.0]));
    let spec = half_line_spectral(&model).unwrap();
    let rho = DensityOperator::qubit(0.3, c64(0.2, 0.1)).unwrap();
    for (j, i) in [(0, 0), (1, 0), (0, 2), (2, 1)] {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let direct = p_direct(&model, j, i, &rho, t).unwrap();
            assert!(direct.converged);
            let km = p_km(&spec.measure, &spec.polys, &spec.chain, j as usize, i as usize, &rho, t).unwrap();
            assert!((direct.value - km).abs() < 1e-6, "({j}, {i}) t = {t}: {} vs {km}", direct.value);
        }
    }
}

#[test]
fn half_line_classification_table() {
    let cases = [
        ([1.0, 1.0], [2.0, 2.0], [Verdict::Recurrent, Verdict::Recurrent, Verdict::Recurrent]),
        ([2.0, 1.0], [1.0, 2.0], [Verdict::Transient, Verdict::Recurrent, Verdict::Recurrent]),
        ([1.0, 2.0], [2.0, 1.0], [Verdict::Recurrent, Verdict::Transient, Verdict::Recurrent]),
        ([2.0, 2.0], [1.0, 1.0], [Verdict::Transient, Verdict::Transient, Verdict::Transient]),
        ([1.0, 1.0], [1.0, 1.0], [Verdict::Recurrent, Verdict::Recurrent, Verdict::Recurrent]),
    ];
    let states = [DensityOperator::pure(2, 0), DensityOperator::pure(2, 1), DensityOperator::maximally_mixed(2)];
    for (a, c, want) in cases {
        let model = diagonal_half_line(a, c);
        let ev = HalfLineResolvent::new(half_line_blocks(&model).unwrap());
        for (rho, w) in states.iter().zip(want) {
            let v = classify_recurrence(&ev, &CMat::identity(4, 4), rho).unwrap();
            assert_eq!(v.verdict, w, "a = {a:?}, c = {c:?}, rho = {:?}", rho.matrix());
        }
    }
}

#[test]
fn line_w11_matches_closed_form() {
    let (a, c) = ([1.0, 1.3], [1.6, 0.8]);
    let model = diagonal_line(a, c);
    let chain = compute_symmetrizers(&model, -2, 1).unwrap();
    let ft = line_fold_transforms(&model, &chain).unwrap();
    for z in [c64(-0.5, 0.0), c64(-3.0, 0.0), c64(1.0, 0.5), c64(6.0, -2.0)] {
        let w = ft.w11.eval(z).unwrap();
        for (k, idx) in [(0usize, 0usize), (1, 3)] {
            let s = branch_root(z, a[k] * a[k] + c[k] * c[k], a[k] * c[k]);
            assert!((w[(idx, idx)] - s / (s * s)).norm() < 1e-8, "z = {z}");
        }
    }
}

#[test]
fn fold_identities_match_truncated_line() {
    let model = diagonal_line([1.0, 1.3], [1.6, 0.8]);
    let chain = compute_symmetrizers(&model, -2, 1).unwrap();
    let ft = line_fold_transforms(&model, &chain).unwrap();
    let pi_m1 = chain.pi(-1).unwrap();
    for z in [-0.3, -1.0, -2.5] {
        let z = c64(z, 0.0);
        let col0 = truncated_resolvent(&model, -100, 99, z, &[0, -1], 0);
        let col1 = truncated_resolvent(&model, -100, 99, z, &[0, -1], -1);
        assert!(max_abs(&(ft.w11.eval(z).unwrap() - &col0[0])) < 1e-6);
        assert!(max_abs(&(ft.w22.eval(z).unwrap() - pi_m1 * &col1[1])) < 1e-6);
        assert!(max_abs(&(ft.w12.eval(z).unwrap() - &col1[0])) < 1e-6);
        assert!(max_abs(&(ft.w21.eval(z).unwrap() - pi_m1 * &col0[1])) < 1e-6);
    }
}

#[test]
fn folded_semigroup_is_the_rearranged_line_semigroup() {
    let model = diagonal_line([1.0, 1.3], [1.6, 0.8]);
    assert!(fold_block_identity(&model, 30, 0.8).unwrap() < 1e-8);
}

#[test]
fn line_karlin_mcgregor_matches_direct() {
    let model = Arc::new(diagonal_line([1.0, 1.3], [1.6, 0.8]));
    let spec = line_spectral(&model).unwrap();
    assert_eq!(spec.method, MeasureMethod::PerturbedTail);
    let rho = DensityOperator::qubit(0.6, c64(0.1, -0.2)).unwrap();
    for (j, i) in [(0, 0), (-1, 0), (2, -1), (-2, -2)] {
        for t in [0.1, 1.0, 2.0] {
            let direct = p_direct(&model, j, i, &rho, t).unwrap().value;
            let km = p_line_km(&spec.measure, &spec.folded, &spec.chain, j, i, &rho, t).unwrap();
            assert!((direct - km).abs() < 1e-6, "({j}, {i}) t = {t}: {direct} vs {km}");
        }
    }
}

#[test]
fn line_classification_table() {
    let cases = [
        ([1.0, 2.0], [1.0, 2.0], [Verdict::Recurrent, Verdict::Recurrent, Verdict::Recurrent]),
        ([1.0, 2.0], [1.5, 1.0], [Verdict::Transient, Verdict::Transient, Verdict::Transient]),
        ([1.0, 2.0], [1.0, 1.0], [Verdict::Recurrent, Verdict::Transient, Verdict::Recurrent]),
        ([1.0, 2.0], [1.5, 2.0], [Verdict::Transient, Verdict::Recurrent, Verdict::Recurrent]),
    ];
    let states = [DensityOperator::pure(2, 0), DensityOperator::pure(2, 1), DensityOperator::maximally_mixed(2)];
    for (a, c, want) in cases {
        let model = diagonal_line(a, c);
        let chain = compute_symmetrizers(&model, -2, 1).unwrap();
        let ft = line_fold_transforms(&model, &chain).unwrap();
        for (rho, w) in states.iter().zip(want) {
            let v = classify_recurrence(ft.w11.as_ref(), &CMat::identity(4, 4), rho).unwrap();
            assert_eq!(v.verdict, w, "a = {a:?}, c = {c:?}, rho = {:?}", rho.matrix());
        }
    }
}
