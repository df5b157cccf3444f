//! Antidiagonal transitions on the half-line.

use ctoqw::catalog::{antidiagonal_half_line, antidiagonal_locus};
use ctoqw::dynamics::DensityOperator;
use ctoqw::lindblad::half_line_blocks;
use ctoqw::matcore::{c64, CMat};
use ctoqw::stieltjes::{classify_recurrence, HalfLineResolvent, TwoPeriodicDiagonal, Verdict};

/// Auxiliary scalar fixed points for component `k` (0 or 3) of the alternating chain.
fn auxiliary(a1: f64, a2: f64, c1: f64, c2: f64, k: usize) -> TwoPeriodicDiagonal {
    let (p0, p1) = if k == 0 { ((a2 * c1).sqrt(), (a1 * c2).sqrt()) } else { ((a1 * c2).sqrt(), (a2 * c1).sqrt()) };
    let g = if k == 0 { -(a2 * a2 + c2 * c2) } else { -(a1 * a1 + c1 * c1) };
    TwoPeriodicDiagonal { g0: g, g1: g, m0: p0 * p0, m1: p1 * p1 }
}

#[test]
fn auxiliary_fixed_point_solves_its_quadratic() {
    for (a1, a2, c1, c2) in [(1.0, 1.0, 1.0, 1.0), (1.3, 0.7, 1.1, 2.0), (2.0, 1.5, 0.5, 0.8)] {
        for k in [0, 3] {
            let aux = auxiliary(a1, a2, c1, c2, k);
            for z in [c64(-0.5, 0.0), c64(-3.0, 0.2), c64(1.5, 0.7), c64(-0.01, -0.3)] {
                let f = aux.eval(z).unwrap();
                assert!(aux.quadratic_residual(z, f) < 1e-10, "z = {z}");
            }
        }
    }
}

fn verdict(a1: f64, a2: f64, c1: f64, c2: f64, rho: &DensityOperator) -> Verdict {
    let ev = HalfLineResolvent::new(half_line_blocks(&antidiagonal_half_line(a1, a2, c1, c2)).unwrap());
    classify_recurrence(&ev, &CMat::identity(4, 4), rho).unwrap().verdict
}

#[test]
fn generator_is_recurrent_exactly_when_downward_rates_dominate() {
    let states = [DensityOperator::pure(2, 0), DensityOperator::pure(2, 1), DensityOperator::maximally_mixed(2)];
    for (a1, a2, c1, c2) in [(1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 2.0, 2.0), (2.0, 2.0, 1.0, 1.0), (1.5, 0.5, 1.0, 1.0), (2.0, 1.0, 1.0, 1.0)] {
        let want = if a1 * a2 <= c1 * c2 { Verdict::Recurrent } else { Verdict::Transient };
        for rho in &states {
            assert_eq!(verdict(a1, a2, c1, c2, rho), want, "({a1}, {a2}, {c1}, {c2})");
        }
    }
}

#[test]
fn verdict_does_not_change_across_the_displayed_locus() {
    let a1 = antidiagonal_locus(1.0, 1.0, 1.0);
    let rho = DensityOperator::pure(2, 0);
    let below = verdict(a1 - 1e-3, 1.0, 1.0, 1.0, &rho);
    let above = verdict(a1 + 1e-3, 1.0, 1.0, 1.0, &rho);
    assert_eq!(below, Verdict::Transient);
    assert_eq!(above, Verdict::Transient);
}
