//! Matrix valued polynomials of a block tridiagonal generator and the
//! symmetrizers that turn it into a Hermitian block Jacobi matrix.
//!
//! The polynomials are row vectors of the generator:
//! `s·x·Q_n = Q_{n+1} A_n + Q_n B_n + Q_{n−1} C_n` with `s = −1` for generators
//! (eigenvalue `−x` of `L̂`) and `s = +1` for Jacobi matrices.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::lindblad::{BlockSource, BlockTridiagonal, HalfLineBlocks, ModelError, SiteBlocks};
use crate::matcore::{self, c64, CMat, MatError, C64};

/// Largest degree the evaluator will recurse to.
pub const DEGREE_CAP: i64 = 200;
/// Condition number above which a coefficient counts as singular.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("coefficient {which} at site {site} is singular (condition number {cond:.3e})")]
    Singular { which: &'static str, site: i64, cond: f64 },
    #[error("degree {0} is beyond the cap {DEGREE_CAP}")]
    DegreeCap(i64),
    #[error("negative index {0} requested from a half-line family")]
    NegativeIndex(i64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `Q₀ = I`, `Q₋₁ = 0`, non-negative indices only.
    HalfLine,
    /// `Q₀ = I`, `Q₋₁ = 0`, both directions.
    Line1,
    /// `Q₀ = 0`, `Q₋₁ = I`, both directions.
    Line2,
}

struct Coeff {
    blocks: SiteBlocks,
    a_inv: Option<Result<CMat, PolyError>>,
    c_inv: Option<Result<CMat, PolyError>>,
}

fn checked_inverse(m: &CMat, which: &'static str, site: i64) -> Result<CMat, PolyError> {
    let cond = matcore::condition_number(m);
    if cond > CONDITION_CAP {
        return Err(PolyError::Singular { which, site, cond });
    }
    matcore::inverse(m).map_err(|_| PolyError::Singular { which, site, cond })
}

/// Evaluates one polynomial family by the three-term recurrence.
///
/// Coefficient blocks and their inverses are cached per site.
pub struct PolynomialEvaluator {
    source: Arc<dyn BlockSource>,
    family: Family,
    sign: f64,
    cache: Mutex<BTreeMap<i64, Coeff>>,
}

impl std::fmt::Debug for PolynomialEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolynomialEvaluator").field("family", &self.family).field("sign", &self.sign).finish()
    }
}

impl PolynomialEvaluator {
    /// Polynomials of a generator: `−x Q_n = Q_{n+1}A_n + Q_nB_n + Q_{n−1}C_n`.
    pub fn new(source: Arc<dyn BlockSource>, family: Family) -> Self {
        PolynomialEvaluator { source, family, sign: -1.0, cache: Mutex::new(BTreeMap::new()) }
    }

    /// Polynomials of the constant Jacobi matrix with off-diagonal `a` and diagonal `b`:
    /// `x Q_n = Q_{n+1} a + Q_n b + Q_{n−1} a`.
    pub fn jacobi(a: CMat, b: CMat) -> Self {
        let tail = SiteBlocks { a: a.clone(), b, c: a };
        let source = Arc::new(HalfLineBlocks { head: Vec::new(), tail });
        PolynomialEvaluator { source, family: Family::HalfLine, sign: 1.0, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn block_dim(&self) -> usize {
        self.source.block_dim()
    }

    /// Same coefficients, another family.
    pub fn with_family(&self, family: Family) -> Self {
        PolynomialEvaluator { source: self.source.clone(), family, sign: self.sign, cache: Mutex::new(BTreeMap::new()) }
    }

    fn with_coeff<T>(&self, n: i64, f: impl FnOnce(&mut Coeff) -> T) -> Result<T, PolyError> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if !cache.contains_key(&n) {
            let blocks = self.source.blocks(n)?;
            cache.insert(n, Coeff { blocks, a_inv: None, c_inv: None });
        }
        Ok(f(cache.get_mut(&n).expect("inserted")))
    }

    fn blocks(&self, n: i64) -> Result<SiteBlocks, PolyError> {
        self.with_coeff(n, |c| c.blocks.clone())
    }

    fn a_inv(&self, n: i64) -> Result<CMat, PolyError> {
        self.with_coeff(n, |c| c.a_inv.get_or_insert_with(|| checked_inverse(&c.blocks.a, "A", n)).clone())?
    }

    fn c_inv(&self, n: i64) -> Result<CMat, PolyError> {
        self.with_coeff(n, |c| c.c_inv.get_or_insert_with(|| checked_inverse(&c.blocks.c, "C", n)).clone())?
    }

    fn initial(&self) -> (CMat, CMat) {
        let m = self.block_dim();
        match self.family {
            Family::HalfLine | Family::Line1 => (matcore::zeros(m), matcore::identity(m)),
            Family::Line2 => (matcore::identity(m), matcore::zeros(m)),
        }
    }

    /// `Q_lo, …, Q_hi` at a possibly complex argument; `lo ≤ 0 ≤ hi` is not required.
    pub fn sequence_at(&self, x: C64, lo: i64, hi: i64) -> Result<BTreeMap<i64, CMat>, PolyError> {
        if lo < 0 && self.family == Family::HalfLine {
            return Err(PolyError::NegativeIndex(lo));
        }
        for n in [lo, hi] {
            if n.abs() > DEGREE_CAP {
                return Err(PolyError::DegreeCap(n));
            }
        }
        let (qm1, q0) = self.initial();
        let sx = x * self.sign;
        let mut out = BTreeMap::new();
        let (mut prev, mut cur) = (qm1.clone(), q0.clone());
        for n in 0..hi.max(0) {
            let b = self.blocks(n)?;
            let next = (&cur * sx - &cur * &b.b - &prev * &b.c) * self.a_inv(n)?;
            if n >= lo {
                out.insert(n, cur.clone());
            }
            prev = std::mem::replace(&mut cur, next);
        }
        if hi >= 0 && hi >= lo {
            out.insert(hi, cur);
        }
        if lo < 0 {
            // backward: Q_{n−1} = (s x Q_n − Q_n B_n − Q_{n+1} A_n) C_n^{-1}
            let (mut next, mut cur) = (q0, qm1);
            if hi >= -1 {
                out.insert(-1, cur.clone());
            }
            let mut n = -1;
            while n > lo {
                let b = self.blocks(n)?;
                let below = (&cur * sx - &cur * &b.b - &next * &b.a) * self.c_inv(n)?;
                next = std::mem::replace(&mut cur, below);
                n -= 1;
                if n <= hi {
                    out.insert(n, cur.clone());
                }
            }
        }
        out.retain(|&k, _| k >= lo && k <= hi);
        Ok(out)
    }

    /// `Q_0, …, Q_n` at real `x`.
    pub fn sequence(&self, x: f64, n: usize) -> Result<Vec<CMat>, PolyError> {
        Ok(self.sequence_at(c64(x, 0.0), 0, n as i64)?.into_values().collect())
    }

    pub fn eval_poly(&self, n: i64, x: f64) -> Result<CMat, PolyError> {
        let lo = n.min(0);
        let hi = n.max(0);
        Ok(self.sequence_at(c64(x, 0.0), lo, hi)?.remove(&n).expect("index in range"))
    }

    /// Relative residual of the recurrence at `(n, x)`.
    pub fn recurrence_residual(&self, n: i64, x: f64) -> Result<f64, PolyError> {
        let lo = (n - 1).min(0);
        let hi = (n + 1).max(0);
        let lo = if self.family == Family::HalfLine { lo.max(0) } else { lo };
        let q = self.sequence_at(c64(x, 0.0), lo, hi)?;
        let b = self.blocks(n)?;
        let m = self.block_dim();
        let zero = matcore::zeros(m);
        let prev = q.get(&(n - 1)).cloned().unwrap_or_else(|| match (self.family, n) {
            (Family::Line2, 0) => matcore::identity(m),
            _ => zero.clone(),
        });
        let cur = &q[&n];
        let next = &q[&(n + 1)];
        let r = cur * c64(x * self.sign, 0.0) - next * &b.a - cur * &b.b - prev * &b.c;
        Ok(matcore::max_abs(&r) / (1.0 + matcore::max_abs(next)))
    }
}

/// Both line families at once, arranged in the folded layout.
pub struct FoldedEvaluator {
    first: PolynomialEvaluator,
    second: PolynomialEvaluator,
}

impl FoldedEvaluator {
    pub fn new(source: Arc<dyn BlockSource>) -> Self {
        FoldedEvaluator {
            first: PolynomialEvaluator::new(source.clone(), Family::Line1),
            second: PolynomialEvaluator::new(source, Family::Line2),
        }
    }

    pub fn families(&self) -> (&PolynomialEvaluator, &PolynomialEvaluator) {
        (&self.first, &self.second)
    }

    /// `𝒬_n(x) = [[Q¹_n, Q¹_{−n−1}], [Q²_n, Q²_{−n−1}]]`.
    pub fn eval_folded(&self, n: usize, x: f64) -> Result<CMat, PolyError> {
        Ok(self.folded_sequence(x, n)?.pop().expect("non-empty"))
    }

    pub fn folded_sequence(&self, x: f64, n: usize) -> Result<Vec<CMat>, PolyError> {
        let n = n as i64;
        let z = c64(x, 0.0);
        let q1 = self.first.sequence_at(z, -n - 1, n)?;
        let q2 = self.second.sequence_at(z, -n - 1, n)?;
        let m = self.first.block_dim();
        Ok((0..=n)
            .map(|k| {
                let mut out = CMat::zeros(2 * m, 2 * m);
                out.view_mut((0, 0), (m, m)).copy_from(&q1[&k]);
                out.view_mut((0, m), (m, m)).copy_from(&q1[&(-k - 1)]);
                out.view_mut((m, 0), (m, m)).copy_from(&q2[&k]);
                out.view_mut((m, m), (m, m)).copy_from(&q2[&(-k - 1)]);
                out
            })
            .collect())
    }

    /// `S_n = [Q¹_n; Q²_n]`, the stacked values at a line site `n`.
    pub fn stacked(&self, x: f64, lo: i64, hi: i64) -> Result<BTreeMap<i64, CMat>, PolyError> {
        let z = c64(x, 0.0);
        let q1 = self.first.sequence_at(z, lo, hi)?;
        let q2 = self.second.sequence_at(z, lo, hi)?;
        let m = self.first.block_dim();
        Ok(q1
            .into_iter()
            .map(|(k, a)| {
                let mut s = CMat::zeros(2 * m, m);
                s.view_mut((0, 0), (m, m)).copy_from(&a);
                s.view_mut((m, 0), (m, m)).copy_from(&q2[&k]);
                (k, s)
            })
            .collect())
    }
}

/// Largest relative residual of `−x𝒬_n = 𝒬_{n+1}M_n + 𝒬_nD_n + 𝒬_{n−1}N_n` for `n < len−1`.
pub fn folded_recurrence_residual(folded: &BlockTridiagonal, q: &[CMat], x: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..q.len().saturating_sub(1).min(folded.sites().saturating_sub(1)) {
        let mut r = &q[n] * c64(-x, 0.0) - &q[n + 1] * &folded.lower[n] - &q[n] * &folded.diag[n];
        if n > 0 {
            r -= &q[n - 1] * &folded.upper[n - 1];
        }
        worst = worst.max(matcore::max_abs(&r) / (1.0 + matcore::max_abs(&q[n + 1])));
    }
    worst
}

/// Why a symmetrizer chain could not be certified.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetrizerError {
    #[error("no weight matrix certified: coefficient {which} at site {site} is singular")]
    Singular { which: &'static str, site: i64 },
    #[error("no weight matrix certified: Pi at site {site} is not Hermitian (deviation {deviation:.3e})")]
    PiNotHermitian { site: i64, deviation: f64 },
    #[error("no weight matrix certified: Pi at site {site} is not positive definite (eigenvalue {eigenvalue:.3e})")]
    PiNotPositive { site: i64, eigenvalue: f64 },
    #[error("no weight matrix certified: R B R^-1 at site {site} is not Hermitian (deviation {deviation:.3e})")]
    DiagonalNotHermitian { site: i64, deviation: f64 },
    #[error("no weight matrix certified: R B R^-1 at site {site} has positive eigenvalue {eigenvalue:.3e}")]
    DiagonalNotNegative { site: i64, eigenvalue: f64 },
    #[error("empty window {0}..={1}")]
    EmptyWindow(i64, i64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

impl SymmetrizerError {
    pub fn site(&self) -> Option<i64> {
        match self {
            SymmetrizerError::Singular { site, .. }
            | SymmetrizerError::PiNotHermitian { site, .. }
            | SymmetrizerError::PiNotPositive { site, .. }
            | SymmetrizerError::DiagonalNotHermitian { site, .. }
            | SymmetrizerError::DiagonalNotNegative { site, .. } => Some(*site),
            _ => None,
        }
    }
}

/// `Π(n) = R_n*R_n` over a window, anchored by `R_0 = I`.
///
/// `pi(n)` is the product formula value and equals the Gram block
/// `∫ Q_n* dΣ Q_n`; the Karlin–McGregor prefactor is `km_norm(n) = pi(n)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizerChain {
    first: i64,
    pi: Vec<CMat>,
    r: Vec<CMat>,
    r_inv: Vec<CMat>,
    e: Vec<CMat>,
}

impl SymmetrizerChain {
    pub fn first_site(&self) -> i64 {
        self.first
    }

    pub fn last_site(&self) -> i64 {
        self.first + self.pi.len() as i64 - 1
    }

    fn idx(&self, n: i64) -> Option<usize> {
        let k = n - self.first;
        (k >= 0 && (k as usize) < self.pi.len()).then_some(k as usize)
    }

    pub fn pi(&self, n: i64) -> Option<&CMat> {
        self.idx(n).map(|k| &self.pi[k])
    }

    pub fn r(&self, n: i64) -> Option<&CMat> {
        self.idx(n).map(|k| &self.r[k])
    }

    pub fn r_inv(&self, n: i64) -> Option<&CMat> {
        self.idx(n).map(|k| &self.r_inv[k])
    }

    /// `R_n B_n R_n^{-1}`, Hermitian by certification.
    pub fn e(&self, n: i64) -> Option<&CMat> {
        self.idx(n).map(|k| &self.e[k])
    }

    pub fn km_norm(&self, n: i64) -> Option<CMat> {
        self.pi(n).map(|p| matcore::inverse(p).expect("certified positive definite"))
    }
}

fn anchor_of(lo: i64, hi: i64) -> i64 {
    if lo <= 0 && 0 <= hi {
        0
    } else {
        lo
    }
}

fn inv_or(m: &CMat, which: &'static str, site: i64) -> Result<CMat, SymmetrizerError> {
    checked_inverse(m, which, site).map_err(|_| SymmetrizerError::Singular { which, site })
}

/// `Π(n)` by the product formulas
/// `Π(n) = (A_0*⋯A_{n−1}*)^{-1} C_1⋯C_n` and
/// `Π(−m) = (A_{−m}*⋯A_{−1}*) (C_{−m+1}⋯C_0)^{-1}`, relative to the anchor.
pub fn pi_product(source: &dyn BlockSource, lo: i64, hi: i64) -> Result<Vec<CMat>, SymmetrizerError> {
    if hi < lo {
        return Err(SymmetrizerError::EmptyWindow(lo, hi));
    }
    let m = source.block_dim();
    let anchor = anchor_of(lo, hi);
    let mut out = BTreeMap::new();
    out.insert(anchor, matcore::identity(m));
    let mut pa = matcore::identity(m);
    let mut pc = matcore::identity(m);
    for n in anchor + 1..=hi {
        pa = pa * source.blocks(n - 1)?.a.adjoint();
        pc *= source.blocks(n)?.c;
        out.insert(n, inv_or(&pa, "A", n - 1)? * &pc);
    }
    let mut pa = matcore::identity(m);
    let mut pc = matcore::identity(m);
    for n in (lo..anchor).rev() {
        pa = source.blocks(n)?.a.adjoint() * pa;
        pc = source.blocks(n + 1)?.c * pc;
        out.insert(n, &pa * inv_or(&pc, "C", n + 1)?);
    }
    Ok(out.into_values().collect())
}

/// `Π(n)` by enforcing `A_n* Π(n+1) = Π(n) C_{n+1}` one step at a time.
pub fn pi_recursive(source: &dyn BlockSource, lo: i64, hi: i64) -> Result<Vec<CMat>, SymmetrizerError> {
    if hi < lo {
        return Err(SymmetrizerError::EmptyWindow(lo, hi));
    }
    let m = source.block_dim();
    let anchor = anchor_of(lo, hi);
    let mut out = BTreeMap::new();
    out.insert(anchor, matcore::identity(m));
    for n in anchor..hi {
        let a = source.blocks(n)?.a;
        let c = source.blocks(n + 1)?.c;
        let p = inv_or(&a.adjoint(), "A", n)? * &out[&n] * c;
        out.insert(n + 1, p);
    }
    for n in (lo..anchor).rev() {
        let a = source.blocks(n)?.a;
        let c = source.blocks(n + 1)?.c;
        let p = a.adjoint() * &out[&(n + 1)] * inv_or(&c, "C", n + 1)?;
        out.insert(n, p);
    }
    Ok(out.into_values().collect())
}

/// Symmetrizers on `lo..=hi` with `R_n` the positive square root of `Π(n)`.
pub fn compute_symmetrizers(source: &dyn BlockSource, lo: i64, hi: i64) -> Result<SymmetrizerChain, SymmetrizerError> {
    let raw = pi_product(source, lo, hi)?;
    let mut chain = SymmetrizerChain { first: lo, pi: Vec::new(), r: Vec::new(), r_inv: Vec::new(), e: Vec::new() };
    for (k, p) in raw.into_iter().enumerate() {
        let site = lo + k as i64;
        let scale = matcore::max_abs(&p).max(1e-300);
        let deviation = matcore::hermitian_deviation(&p);
        if deviation > 1e-9 * scale {
            return Err(SymmetrizerError::PiNotHermitian { site, deviation });
        }
        let p = matcore::hermitian_part(&p);
        let (vals, _) = matcore::eig_hermitian(&p)?;
        if vals[0] < 1e-12 * scale {
            return Err(SymmetrizerError::PiNotPositive { site, eigenvalue: vals[0] });
        }
        let r = matcore::sqrt_psd(&p)?;
        let r_inv = matcore::inv_sqrt_pd(&p)?;
        let b = source.blocks(site)?.b;
        let e = &r * b * &r_inv;
        let escale = matcore::max_abs(&e).max(1.0);
        let deviation = matcore::hermitian_deviation(&e);
        if deviation > 1e-9 * escale {
            return Err(SymmetrizerError::DiagonalNotHermitian { site, deviation });
        }
        let e = matcore::hermitian_part(&e);
        let (evals, _) = matcore::eig_hermitian(&e)?;
        let top = *evals.last().expect("non-empty");
        if top > 1e-10 * escale {
            return Err(SymmetrizerError::DiagonalNotNegative { site, eigenvalue: top });
        }
        chain.pi.push(p);
        chain.r.push(r);
        chain.r_inv.push(r_inv);
        chain.e.push(e);
    }
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetteReport {
    pub certified: bool,
    pub failure: Option<SymmetrizerError>,
}

/// Whether a weight matrix is certified on the window, with the first failure.
pub fn check_dette(source: &dyn BlockSource, lo: i64, hi: i64) -> DetteReport {
    match compute_symmetrizers(source, lo, hi) {
        Ok(_) => DetteReport { certified: true, failure: None },
        Err(e) => DetteReport { certified: false, failure: Some(e) },
    }
}

/// Dense `J = −R L̂ R^{-1}` on the window of `bt`, Hermitian up to rounding.
pub fn symmetrized_dense(bt: &BlockTridiagonal, chain: &SymmetrizerChain) -> Result<CMat, SymmetrizerError> {
    let m = bt.block_dim;
    let n = bt.sites();
    let mut r = CMat::zeros(bt.dim(), bt.dim());
    let mut r_inv = CMat::zeros(bt.dim(), bt.dim());
    for k in 0..n {
        let site = bt.first_site + k as i64;
        let (rk, rik) = chain
            .r(site)
            .zip(chain.r_inv(site))
            .ok_or(SymmetrizerError::EmptyWindow(chain.first_site(), chain.last_site()))?;
        r.view_mut((k * m, k * m), (m, m)).copy_from(rk);
        r_inv.view_mut((k * m, k * m), (m, m)).copy_from(rik);
    }
    let j = -(r * bt.to_dense() * r_inv);
    Ok(matcore::hermitian_part(&j))
}

/// Blocks of `J = −R L̂ R^{-1}`: diagonal `J_nn` and sub-diagonal `J_{n+1,n}`.
pub fn symmetrized_blocks(source: &dyn BlockSource, chain: &SymmetrizerChain, n: i64) -> Result<(CMat, CMat), SymmetrizerError> {
    let missing = || SymmetrizerError::EmptyWindow(chain.first_site(), chain.last_site());
    let e = chain.e(n).ok_or_else(missing)?;
    let a = source.blocks(n)?.a;
    let off = -(chain.r(n + 1).ok_or_else(missing)? * a * chain.r_inv(n).ok_or_else(missing)?);
    Ok((-e.clone(), off))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{Model, SiteOperators, VertexSet};
    use crate::matcore::{diag_real, from_real_rows, identity, max_abs};

    fn scalar_half_line(a: f64, c: f64) -> Arc<Model> {
        let ops = SiteOperators::transitions(diag_real(&[a]), diag_real(&[c]));
        Arc::new(Model::new(VertexSet::HalfLine, ops).unwrap())
    }

    #[test]
    fn degree_zero_is_identity() {
        let ev = PolynomialEvaluator::new(scalar_half_line(1.0, 2.0), Family::HalfLine);
        assert_eq!(ev.eval_poly(0, 0.3).unwrap(), identity(1));
    }

    #[test]
    fn scalar_recursion_oracle() {
        // d = 1, A = C = 1: blocks A = C = 1, B = −2 (interior) and −1 at site 0
        let ev = PolynomialEvaluator::new(scalar_half_line(1.0, 1.0), Family::HalfLine);
        let x = 0.7;
        let mut q = vec![1.0, 0.0];
        q[1] = -x * q[0] + q[0];
        for n in 1..8 {
            let next = -x * q[n] + 2.0 * q[n] - q[n - 1];
            q.push(next);
        }
        for (n, want) in q.iter().enumerate() {
            let got = ev.eval_poly(n as i64, x).unwrap()[(0, 0)];
            assert!((got.re - want).abs() < 1e-12 && got.im == 0.0, "n={n}");
        }
        assert!(ev.recurrence_residual(5, x).unwrap() < 1e-12);
    }

    #[test]
    fn line_families_initial_values() {
        let ops = SiteOperators::transitions(diag_real(&[1.0, 0.5]), diag_real(&[0.8, 1.2]));
        let model: Arc<dyn BlockSource> = Arc::new(Model::new(VertexSet::Line, ops).unwrap());
        let f = FoldedEvaluator::new(model);
        assert!(max_abs(&(f.eval_folded(0, 1.3).unwrap() - identity(8))) == 0.0);
        let (q1, q2) = f.families();
        for n in -4..4 {
            assert!(q1.recurrence_residual(n, 1.3).unwrap() < 1e-9);
            assert!(q2.recurrence_residual(n, 1.3).unwrap() < 1e-9);
        }
    }

    #[test]
    fn half_line_rejects_negative_index() {
        let ev = PolynomialEvaluator::new(scalar_half_line(1.0, 1.0), Family::HalfLine);
        assert!(matches!(ev.eval_poly(-1, 0.0), Err(PolyError::NegativeIndex(-1))));
    }

    #[test]
    fn singular_coefficient_names_site() {
        let ops = SiteOperators::transitions(diag_real(&[1.0, 0.0]), diag_real(&[1.0, 1.0]));
        let model = Arc::new(Model::new(VertexSet::HalfLine, ops).unwrap());
        let ev = PolynomialEvaluator::new(model, Family::HalfLine);
        assert!(matches!(ev.eval_poly(2, 0.5), Err(PolyError::Singular { which: "A", site: 0, .. })));
    }

    #[test]
    fn scalar_birth_death_potential_coefficients() {
        // up rates λ_n = a², down rates μ_n = c²
        let model = scalar_half_line(1.0, 2.0);
        let chain = compute_symmetrizers(model.as_ref(), 0, 4).unwrap();
        for n in 0..=4 {
            let potential = (1.0f64 / 4.0).powi(n as i32);
            assert!((chain.km_norm(n).unwrap()[(0, 0)].re - potential).abs() < 1e-12);
            assert!((chain.pi(n).unwrap()[(0, 0)].re - 1.0 / potential).abs() < 1e-9);
        }
    }

    #[test]
    fn adjoint_coefficients_give_identity_pi() {
        let a = from_real_rows(&[&[1.0, 0.0], &[1.0, -1.0]]);
        let ops = SiteOperators::transitions(a.clone(), a.adjoint());
        let model = Model::new(VertexSet::HalfLine, ops).unwrap();
        let chain = compute_symmetrizers(&model, 0, 5).unwrap();
        for n in 0..=5 {
            assert!(max_abs(&(chain.pi(n).unwrap() - identity(4))) < 1e-12);
        }
    }

    #[test]
    fn product_and_recursive_pi_agree_on_line() {
        let ops = SiteOperators::transitions(diag_real(&[1.0, 0.5]), diag_real(&[0.8, 1.2]));
        let model = Model::new(VertexSet::Line, ops).unwrap();
        let p = pi_product(&model, -3, 3).unwrap();
        let r = pi_recursive(&model, -3, 3).unwrap();
        for (x, y) in p.iter().zip(&r) {
            assert!(max_abs(&(x - y)) < 1e-9 * max_abs(x).max(1.0));
        }
    }

    #[test]
    fn single_site_without_transitions_is_certified() {
        let model = Model::new(VertexSet::Finite { sites: 1, boundary: crate::lindblad::Boundary::Reflecting }, SiteOperators::zero(2)).unwrap();
        assert!(check_dette(&model, 0, 0).certified);
    }
}
