#![allow(dead_code)]

pub mod strategies;

use ctoqw::lindblad::{assemble, Model};
use ctoqw::matcore::{c64, CMat};
use ctoqw::spectral::SpectralMeasure;
use ctoqw::C64;

/// Blocks `[(z + L̂_trunc)^{-1}]_{r, col}` of a truncated generator, by dense LU.
pub fn truncated_resolvent(model: &Model, lo: i64, hi: i64, z: C64, rows: &[i64], col: i64) -> Vec<CMat> {
    let bt = assemble(model, lo, hi).unwrap();
    let m = bt.block_dim;
    let n = bt.dim();
    let mat = bt.to_dense() + CMat::identity(n, n) * z;
    let mut rhs = CMat::zeros(n, m);
    let c0 = ((col - lo) as usize) * m;
    for k in 0..m {
        rhs[(c0 + k, k)] = c64(1.0, 0.0);
    }
    let x = mat.lu().solve(&rhs).expect("invertible");
    rows.iter().map(|&r| x.view((((r - lo) as usize) * m, 0), (m, m)).into_owned()).collect()
}

/// Density of a measure at `x` (zero outside the pieces).
pub fn density_at(measure: &SpectralMeasure, x: f64) -> CMat {
    for p in &measure.pieces {
        if x >= p.lo && x <= p.hi {
            return (p.density)(x);
        }
    }
    CMat::zeros(measure.dim, measure.dim)
}

/// `√((z − b)² − 4k²)` on the branch that behaves like `z − b` at infinity.
pub fn branch_root(z: C64, b: f64, k: f64) -> C64 {
    let w = z - b;
    w * (c64(1.0, 0.0) - 4.0 * k * k / (w * w)).sqrt()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}
