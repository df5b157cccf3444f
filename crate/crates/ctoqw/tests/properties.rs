//! Randomized invariants, 100 cases each.

use std::sync::Arc;

mod common;

use proptest::prelude::*;

use common::strategies::{commuting_ops, hermitian, matrix, rates, state, unitary, well_scaled};
use ctoqw::dynamics::{half_line_spectral, km_matrix};
use ctoqw::lindblad::{half_line_blocks, validate_trace_dynamics, Boundary, Model, SiteOperators, VertexSet};
use ctoqw::matcore::{c64, kron, max_abs, sandwich, unvec, vec, CMat};
use ctoqw::orthopoly::{Family, PolynomialEvaluator};
use ctoqw::stieltjes::{classify_recurrence, herglotz_excess, HalfLineResolvent};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 100, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn vec_turns_sandwich_into_kronecker(b in matrix(3), x in matrix(3)) {
        let lhs = vec(&(&b * &x * b.adjoint())).unwrap();
        let rhs = sandwich(&b).unwrap() * vec(&x).unwrap();
        prop_assert!(max_abs(&CMat::from_column_slice(9, 1, (lhs - rhs).as_slice())) < 1e-12);
        prop_assert!(max_abs(&(unvec(&vec(&x).unwrap(), 3).unwrap() - &x)) < 1e-15);
        let y = kron(&b, &x);
        prop_assert!((y[(4, 5)] - b[(1, 1)] * x[(1, 2)]).norm() < 1e-15);
    }

    #[test]
    fn finite_reflecting_chain_conserves_trace(
        up in matrix(2), down in matrix(2), stay in matrix(2), h in hermitian(2),
        rho in state(2), site in 0i64..5, t in 0.05..2.0f64,
    ) {
        let ops = SiteOperators { up, down, stay, hamiltonian: h };
        let model = Model::new(VertexSet::Finite { sites: 5, boundary: Boundary::Reflecting }, ops).unwrap();
        let report = validate_trace_dynamics(&model, 0, 4, &rho, site, t).unwrap();
        prop_assert!((report.total_trace - 1.0).abs() < 1e-10, "trace {}", report.total_trace);
        prop_assert!(report.min_eigenvalue > -1e-10);
    }

    #[test]
    fn half_line_transform_is_herglotz(u in unitary(2), a in rates(), c in rates(), seed in prop::collection::vec((-10.0..10.0f64, 1e-3..5.0f64), 50)) {
        let model = Model::new(VertexSet::HalfLine, commuting_ops(&u, a, c)).unwrap();
        let ev = HalfLineResolvent::new(half_line_blocks(&model).unwrap());
        for (re, im) in seed {
            let excess = herglotz_excess(&ev, c64(re, im)).unwrap();
            prop_assert!(excess <= 1e-10, "z = {re} + {im}i: {excess}");
        }
    }

    #[test]
    fn measure_has_unit_mass(a in rates(), c in rates()) {
        let model = Arc::new(Model::new(VertexSet::HalfLine, commuting_ops(&CMat::identity(2, 2), a, c)).unwrap());
        let spec = half_line_spectral(&model).unwrap();
        let mass = spec.measure.mass().unwrap();
        prop_assert!(max_abs(&(mass - CMat::identity(4, 4))) < 1e-8);
    }

    #[test]
    fn polynomials_satisfy_their_recurrence(u in unitary(2), a in rates(), c in rates(), x in 0.0..12.0f64, n in 0i64..12) {
        let model = Arc::new(Model::new(VertexSet::HalfLine, commuting_ops(&u, a, c)).unwrap());
        let ev = PolynomialEvaluator::new(model.clone(), Family::HalfLine);
        prop_assert!(ev.recurrence_residual(n, x).unwrap() < 1e-9);
        let line = Arc::new(Model::new(VertexSet::Line, commuting_ops(&u, a, c)).unwrap());
        for family in [Family::Line1, Family::Line2] {
            let ev = PolynomialEvaluator::new(line.clone(), family);
            prop_assert!(ev.recurrence_residual(n - 6, x).unwrap() < 1e-9);
        }
    }

    #[test]
    fn karlin_mcgregor_matrices_form_a_semigroup(u in unitary(2), (a, c) in well_scaled(), t in 0.05..1.5f64, s in 0.05..1.5f64, j in 0usize..4, i in 0usize..4) {
        let model = Arc::new(Model::new(VertexSet::Finite { sites: 4, boundary: Boundary::Reflecting }, commuting_ops(&u, a, c)).unwrap());
        let spec = half_line_spectral(&model).unwrap();
        let lam = |j, i, t| km_matrix(&spec.measure, &spec.polys, &spec.chain, j, i, t).unwrap();
        let mut sum = CMat::zeros(4, 4);
        for k in 0..4 {
            sum += lam(j, k, t) * lam(k, i, s);
        }
        prop_assert!(max_abs(&(sum - lam(j, i, t + s))) < 1e-8);
    }

    #[test]
    fn classification_is_invariant_under_time_rescaling(a in rates(), c in rates(), scale in 0.25..4.0f64, rho in state(2)) {
        prop_assume!((0..2).all(|k| (a[k] - c[k]).abs() > 0.15));
        let verdict = |f: f64| {
            let r = f.sqrt();
            let model = Model::new(VertexSet::HalfLine, commuting_ops(&CMat::identity(2, 2), [a[0] * r, a[1] * r], [c[0] * r, c[1] * r])).unwrap();
            let ev = HalfLineResolvent::new(half_line_blocks(&model).unwrap());
            classify_recurrence(&ev, &CMat::identity(4, 4), &rho).unwrap().verdict
        };
        prop_assert_eq!(verdict(1.0), verdict(scale));
    }
}
