//! Matrix valued spectral measures: atoms plus absolutely continuous pieces.
//!
//! Every density piece is integrated with the substitution
//! `x = mid + rad·cos θ` followed by Gauss–Legendre in `θ`. Densities that vanish
//! like a square root, stay finite, or blow up like an inverse square root at the
//! endpoints all become analytic in `θ`, so doubling the node count converges
//! geometrically.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::matcore::{self, c64, CMat, CVec, MatError, C64};
use crate::stieltjes::{self, StieltjesError, Transform};

const MIN_NODES: usize = 16;
const MAX_NODES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("quadrature did not converge: achieved {achieved:.3e} with {nodes} nodes")]
    Quadrature { achieved: f64, nodes: usize },
    #[error("eigenvalues {0} and {1} are too close to decide whether they coincide")]
    AmbiguousCluster(f64, f64),
    #[error("off-diagonal coefficient is not Hermitian positive definite")]
    NotPositiveDefinite,
    #[error("Jacobi tail is not constant: {0}")]
    NotToeplitz(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Stieltjes(#[from] Box<StieltjesError>),
}

impl From<StieltjesError> for SpectralError {
    fn from(e: StieltjesError) -> Self {
        SpectralError::Stieltjes(Box::new(e))
    }
}

fn gl_cache() -> &'static Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    if let Some(hit) = gl_cache().lock().unwrap_or_else(|e| e.into_inner()).get(&n) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        dp = if n > 0 { n as f64 * (x * p1 - p0) / (x * x - 1.0) } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let out = Arc::new((nodes, weights));
    gl_cache().lock().unwrap_or_else(|e| e.into_inner()).insert(n, out.clone());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointExponent {
    MinusHalf,
    Zero,
    PlusHalf,
}

impl EndpointExponent {
    pub fn value(self) -> f64 {
        match self {
            EndpointExponent::MinusHalf => -0.5,
            EndpointExponent::Zero => 0.0,
            EndpointExponent::PlusHalf => 0.5,
        }
    }

    fn nearest(e: f64) -> Self {
        if e < -0.25 {
            EndpointExponent::MinusHalf
        } else if e < 0.25 {
            EndpointExponent::Zero
        } else {
            EndpointExponent::PlusHalf
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub weight: CMat,
}

pub type DensityFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

#[derive(Clone)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub lo_exponent: EndpointExponent,
    pub hi_exponent: EndpointExponent,
    pub density: DensityFn,
}

impl std::fmt::Debug for DensityPiece {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityPiece")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("lo_exponent", &self.lo_exponent)
            .field("hi_exponent", &self.hi_exponent)
            .finish()
    }
}

impl DensityPiece {
    /// Piece with endpoint exponents estimated from the density near each end.
    pub fn with_estimated_exponents(lo: f64, hi: f64, density: DensityFn) -> Self {
        let h = (hi - lo) * 1e-6;
        let est = |a: f64, b: f64| {
            let na = matcore::max_abs(&density(a));
            let nb = matcore::max_abs(&density(b));
            if na <= 1e-300 || nb <= 1e-300 {
                EndpointExponent::PlusHalf
            } else {
                EndpointExponent::nearest((nb / na).ln() / 2f64.ln())
            }
        };
        let lo_exponent = est(lo + h, lo + 2.0 * h);
        let hi_exponent = est(hi - h, hi - 2.0 * h);
        DensityPiece { lo, hi, lo_exponent, hi_exponent, density }
    }
}

/// A `dim × dim` matrix valued measure on the real line.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    pub dim: usize,
    pub atoms: Vec<Atom>,
    pub pieces: Vec<DensityPiece>,
    /// Accepted quadrature error, relative to the scale of the integral.
    pub tolerance: f64,
}

impl SpectralMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>, pieces: Vec<DensityPiece>) -> Self {
        SpectralMeasure { dim, atoms, pieces, tolerance: 1e-8 }
    }

    pub fn single_atom(x: f64, weight: CMat) -> Self {
        SpectralMeasure::new(weight.nrows(), vec![Atom { x, weight }], Vec::new())
    }

    pub fn support_lower_bound(&self) -> Option<f64> {
        self.atoms.iter().map(|a| a.x).chain(self.pieces.iter().map(|p| p.lo)).reduce(f64::min)
    }

    pub fn support_upper_bound(&self) -> Option<f64> {
        self.atoms.iter().map(|a| a.x).chain(self.pieces.iter().map(|p| p.hi)).reduce(f64::max)
    }

    /// `Σ_atoms f(x_k, W_k) + Σ_pieces ∫ f(x, w(x)) dx`.
    pub fn quadrature(&self, f: impl Fn(f64, &CMat) -> CMat) -> Result<CMat, SpectralError> {
        let mut total: Option<CMat> = None;
        let mut add = |m: CMat| match total.as_mut() {
            Some(t) => *t += m,
            None => total = Some(m),
        };
        for a in &self.atoms {
            add(f(a.x, &a.weight));
        }
        for p in &self.pieces {
            add(self.integrate_piece(p, &f)?);
        }
        Ok(total.unwrap_or_else(|| CMat::zeros(self.dim, self.dim)))
    }

    fn piece_rule(p: &DensityPiece, n: usize, f: &dyn Fn(f64, &CMat) -> CMat) -> Option<CMat> {
        let rule = gauss_legendre(n);
        let (mid, rad) = ((p.hi + p.lo) / 2.0, (p.hi - p.lo) / 2.0);
        let mut acc: Option<CMat> = None;
        for (xi, wi) in rule.0.iter().zip(&rule.1) {
            let theta = PI * (1.0 + xi) / 2.0;
            let x = mid + rad * theta.cos();
            let jac = wi * PI / 2.0 * rad * theta.sin();
            let term = f(x, &(p.density)(x)) * c64(jac, 0.0);
            match acc.as_mut() {
                Some(a) => *a += term,
                None => acc = Some(term),
            }
        }
        acc
    }

    fn integrate_piece(&self, p: &DensityPiece, f: &dyn Fn(f64, &CMat) -> CMat) -> Result<CMat, SpectralError> {
        let mut n = MIN_NODES;
        let mut prev = Self::piece_rule(p, n, f).unwrap_or_else(|| CMat::zeros(self.dim, self.dim));
        let mut err = f64::INFINITY;
        while n < MAX_NODES {
            n *= 2;
            let cur = Self::piece_rule(p, n, f).expect("non-empty rule");
            err = matcore::max_abs(&(&cur - &prev));
            let scale = 1.0 + matcore::max_abs(&cur);
            prev = cur;
            if err <= 1e-13 * scale {
                return Ok(prev);
            }
        }
        // an inverse square root edge known only to rounding carries mass of order
        // √(u·|x|) that no rule can resolve
        let singular_edge = p.lo_exponent == EndpointExponent::MinusHalf || p.hi_exponent == EndpointExponent::MinusHalf;
        let tolerance = if singular_edge { self.tolerance.max(1e-7) } else { self.tolerance };
        if err <= tolerance * (1.0 + matcore::max_abs(&prev)) {
            Ok(prev)
        } else {
            Err(SpectralError::Quadrature { achieved: err, nodes: n })
        }
    }

    /// `∫ dΣ`.
    pub fn mass(&self) -> Result<CMat, SpectralError> {
        self.quadrature(|_, w| w.clone())
    }

    /// `∫ x^k dΣ`.
    pub fn moment(&self, k: i32) -> Result<CMat, SpectralError> {
        self.quadrature(|x, w| w * c64(x.powi(k), 0.0))
    }

    /// The measure `R* dΣ R`.
    pub fn congruence(&self, r: &CMat) -> SpectralMeasure {
        let atoms = self.atoms.iter().map(|a| Atom { x: a.x, weight: r.adjoint() * &a.weight * r }).collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let inner = p.density.clone();
                let r = r.clone();
                DensityPiece { density: Arc::new(move |x| r.adjoint() * inner(x) * &r), ..p.clone() }
            })
            .collect();
        SpectralMeasure { dim: r.ncols(), atoms, pieces, tolerance: self.tolerance }
    }

    /// Sub-block `rows × cols` of the measure, starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> SpectralMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { x: a.x, weight: a.weight.view((r0, c0), (rows, cols)).into_owned() })
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| {
                let inner = p.density.clone();
                DensityPiece { density: Arc::new(move |x| inner(x).view((r0, c0), (rows, cols)).into_owned()), ..p.clone() }
            })
            .collect();
        SpectralMeasure { dim: rows, atoms, pieces, tolerance: self.tolerance }
    }

    /// Smallest eigenvalue over atom weights and density samples (9 per piece).
    pub fn min_psd_eigenvalue(&self) -> Result<f64, SpectralError> {
        let mut worst = f64::INFINITY;
        let mut check = |m: &CMat| -> Result<(), SpectralError> {
            let (vals, _) = matcore::eig_hermitian(&matcore::hermitian_part(m))?;
            worst = worst.min(vals[0]);
            Ok(())
        };
        for a in &self.atoms {
            check(&a.weight)?;
        }
        for p in &self.pieces {
            for k in 1..10 {
                let x = p.lo + (p.hi - p.lo) * k as f64 / 10.0;
                check(&(p.density)(x))?;
            }
        }
        Ok(worst)
    }
}

/// Atomic spectral measure of the `(0,0)` block of a finite Hermitian matrix.
///
/// Eigenvalues closer than `1e-8` (relative to `max(1, |λ|)`) are merged into one
/// atom; gaps between `1e-8` and `1e-7` are reported as ambiguous.
pub fn finite_spectral_measure(j: &CMat, block: usize) -> Result<SpectralMeasure, SpectralError> {
    let (vals, vecs) = matcore::eig_hermitian(j)?;
    let mut atoms: Vec<Atom> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if let Some(&prev) = k.checked_sub(1).map(|p| &vals[p]) {
            let gap = (lam - prev) / prev.abs().max(lam.abs()).max(1.0);
            if gap <= 1e-8 {
                members.last_mut().expect("previous cluster").push(k);
                continue;
            }
            if gap <= 1e-7 {
                return Err(SpectralError::AmbiguousCluster(prev, lam));
            }
        }
        members.push(vec![k]);
    }
    for group in members {
        let x = group.iter().map(|&k| vals[k]).sum::<f64>() / group.len() as f64;
        let mut w = CMat::zeros(block, block);
        for &k in &group {
            let v = vecs.column(k).rows(0, block).into_owned();
            w += &v * v.adjoint();
        }
        atoms.push(Atom { x, weight: matcore::hermitian_part(&w) });
    }
    Ok(SpectralMeasure::new(block, atoms, Vec::new()))
}

/// `χ(τ)`, the boundary value `(τ − √(τ²−4))/2` from above the real axis.
fn chi(tau: f64) -> C64 {
    if tau.abs() > 2.0 {
        c64((tau - tau.signum() * (tau * tau - 4.0).sqrt()) / 2.0, 0.0)
    } else {
        c64(tau / 2.0, -(4.0 - tau * tau).max(0.0).sqrt() / 2.0)
    }
}

/// `1/χ(τ)` for `|τ| ≥ 2`.
fn chi_inv(tau: f64) -> f64 {
    (tau + tau.signum() * (tau * tau - 4.0).max(0.0).sqrt()) / 2.0
}

fn chi_inv_derivative(tau: f64) -> f64 {
    let s = (tau * tau - 4.0).max(1e-300).sqrt();
    (1.0 + tau.abs() / s) / 2.0
}

/// Constant block Jacobi matrix on the half-line with off-diagonal `K > 0` and
/// diagonal `b = b*`; its spectral measure is the Durán weight.
#[derive(Debug, Clone)]
pub struct DuranHalfLine {
    k: CMat,
    b: CMat,
    k_half: CMat,
    k_inv_half: CMat,
    breakpoints: Vec<f64>,
}

impl DuranHalfLine {
    pub fn new(k: CMat, b: CMat) -> Result<Self, SpectralError> {
        if !matcore::is_hermitian(&k, 1e-10) || !matcore::is_hermitian(&b, 1e-10) {
            return Err(SpectralError::NotPositiveDefinite);
        }
        let k = matcore::hermitian_part(&k);
        let b = matcore::hermitian_part(&b);
        let k_inv_half = matcore::inv_sqrt_pd(&k).map_err(|_| SpectralError::NotPositiveDefinite)?;
        let k_half = matcore::sqrt_psd(&k)?;
        let (lo, _) = matcore::eig_hermitian(&(&b - k.scale(2.0)))?;
        let (hi, _) = matcore::eig_hermitian(&(&b + k.scale(2.0)))?;
        let mut breakpoints: Vec<f64> = lo.into_iter().chain(hi).collect();
        breakpoints.sort_by(f64::total_cmp);
        let scale = matcore::max_abs(&k).max(matcore::max_abs(&b)).max(1.0);
        breakpoints.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);
        Ok(DuranHalfLine { k, b, k_half, k_inv_half, breakpoints })
    }

    pub fn k(&self) -> &CMat {
        &self.k
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    /// Sorted eigenvalues of `b − 2K` and `b + 2K`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `T(x) = K^{-1/2}(x − b)K^{-1/2}` with its eigendecomposition.
    fn t_eig(&self, x: f64) -> (Vec<f64>, CMat) {
        let m = self.dim();
        let t = &self.k_inv_half * (matcore::identity(m) * c64(x, 0.0) - &self.b) * &self.k_inv_half;
        matcore::eig_hermitian(&matcore::hermitian_part(&t)).expect("Hermitian by construction")
    }

    /// Whether `x` lies where every eigenvalue of `T(x)` has modulus above 2.
    pub fn in_gap(&self, x: f64) -> bool {
        self.t_eig(x).0.iter().all(|t| t.abs() > 2.0)
    }

    /// Boundary value `B(x + i0) = K^{-1/2} χ(T(x)) K^{-1/2}`.
    pub fn boundary(&self, x: f64) -> CMat {
        let (tau, v) = self.t_eig(x);
        let d = CVec::from_iterator(tau.len(), tau.iter().map(|&t| chi(t)));
        &self.k_inv_half * &v * CMat::from_diagonal(&d) * v.adjoint() * &self.k_inv_half
    }

    /// `B(x)^{-1}` and its derivative in a gap of the support.
    pub fn inverse_and_derivative_in_gap(&self, x: f64) -> (CMat, CMat) {
        let (tau, v) = self.t_eig(x);
        let n = tau.len();
        let phi: Vec<f64> = tau.iter().map(|&t| chi_inv(t)).collect();
        let inv = &self.k_half * &v * matcore::diag_real(&phi) * v.adjoint() * &self.k_half;
        // dT/dx = K^{-1}; Daleckii–Krein in the eigenbasis of T
        let tp = v.adjoint() * matcore::inverse(&self.k).expect("positive definite") * &v;
        let dd = CMat::from_fn(n, n, |i, j| {
            let q = if (tau[i] - tau[j]).abs() > 1e-9 * (1.0 + tau[i].abs()) {
                (phi[i] - phi[j]) / (tau[i] - tau[j])
            } else {
                chi_inv_derivative((tau[i] + tau[j]) / 2.0)
            };
            tp[(i, j)] * q
        });
        let der = &self.k_half * &v * dd * v.adjoint() * &self.k_half;
        (inv, der)
    }

    /// `B(z)` at complex `z` off the support.
    pub fn transform(&self, z: C64) -> Result<CMat, StieltjesError> {
        let m = self.dim();
        if z.im == 0.0 {
            if self.in_gap(z.re) {
                return Ok(self.boundary(z.re));
            }
            return Err(StieltjesError::OnSupport { re: z.re, im: z.im });
        }
        let d = matcore::identity(m) * z - &self.b;
        stieltjes::tail_resolvent(&d, &self.k, &self.k)
    }

    /// Density `(1/2π) K^{-1/2} V diag(√(4−τ²)₊) V* K^{-1/2}`.
    pub fn density(&self, x: f64) -> CMat {
        let (tau, v) = self.t_eig(x);
        let d: Vec<f64> = tau
            .iter()
            .map(|&t| {
                // rounding of τ at a band edge would otherwise leave a density of order 1e-8
                let gap = 2.0 - t.abs();
                if gap <= 1e-14 {
                    0.0
                } else {
                    (gap * (2.0 + t.abs())).sqrt() / (2.0 * PI)
                }
            })
            .collect();
        &self.k_inv_half * &v * matcore::diag_real(&d) * v.adjoint() * &self.k_inv_half
    }

    /// Intervals between consecutive breakpoints that carry density.
    pub fn bands(&self) -> Vec<(f64, f64)> {
        self.breakpoints
            .windows(2)
            .filter(|w| !self.in_gap((w[0] + w[1]) / 2.0))
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Gaps between bands, with unbounded ends truncated to `±bound`.
    fn gaps(&self, bound: f64) -> Vec<(f64, f64)> {
        let mut edges = vec![-bound];
        for (lo, hi) in self.bands() {
            edges.push(lo);
            edges.push(hi);
        }
        edges.push(bound);
        edges.chunks(2).filter(|c| c[1] > c[0]).map(|c| (c[0], c[1])).collect()
    }

    pub fn measure(&self) -> SpectralMeasure {
        let pieces = self
            .bands()
            .into_iter()
            .map(|(lo, hi)| {
                let me = self.clone();
                DensityPiece {
                    lo,
                    hi,
                    lo_exponent: EndpointExponent::PlusHalf,
                    hi_exponent: EndpointExponent::PlusHalf,
                    density: Arc::new(move |x| me.density(x)),
                }
            })
            .collect();
        SpectralMeasure::new(self.dim(), Vec::new(), pieces)
    }
}

/// Durán weight of the constant Jacobi matrix with off-diagonal `a > 0` and diagonal `b`.
pub fn duran_weight(a: &CMat, b: &CMat) -> Result<SpectralMeasure, SpectralError> {
    Ok(DuranHalfLine::new(a.clone(), b.clone())?.measure())
}

/// Constant Jacobi tail with its first diagonal block changed:
/// `B(z) = (B̃(z)^{-1} + shift)^{-1}`, where `shift = b − J₀₀`.
#[derive(Debug, Clone)]
pub struct PerturbedDuran {
    base: DuranHalfLine,
    shift: CMat,
}

impl PerturbedDuran {
    /// First diagonal block `j00`, constant tail `(k, b)` from the first off-diagonal on.
    pub fn new(j00: &CMat, k: CMat, b: CMat) -> Result<Self, SpectralError> {
        let base = DuranHalfLine::new(k, b)?;
        let shift = matcore::hermitian_part(&(base.b() - j00));
        Ok(PerturbedDuran { base, shift })
    }

    pub fn base(&self) -> &DuranHalfLine {
        &self.base
    }

    pub fn shift(&self) -> &CMat {
        &self.shift
    }

    pub fn transform(&self, z: C64) -> Result<CMat, StieltjesError> {
        let bt = self.base.transform(z)?;
        let inv = matcore::inverse(&bt).map_err(|_| StieltjesError::Singular { re: z.re, im: z.im })?;
        matcore::inverse(&(inv + &self.shift)).map_err(|_| StieltjesError::Singular { re: z.re, im: z.im })
    }

    /// `B(x + i0)` on the support of the base measure.
    pub fn boundary(&self, x: f64) -> Option<CMat> {
        let inv = matcore::inverse(&self.base.boundary(x)).ok()?;
        matcore::inverse(&(inv + &self.shift)).ok()
    }

    /// `−(1/π) Im B(x + i0)` on the bands, zero where the boundary value is singular.
    pub fn density(&self, x: f64) -> CMat {
        match self.boundary(x) {
            Some(b) => matcore::anti_hermitian_part(&b) * c64(-1.0 / PI, 0.0),
            None => CMat::zeros(self.base.dim(), self.base.dim()),
        }
    }

    fn gap_matrix(&self, x: f64) -> (Vec<f64>, CMat, CMat) {
        let (inv, der) = self.base.inverse_and_derivative_in_gap(x);
        let f = matcore::hermitian_part(&(inv + &self.shift));
        let (vals, vecs) = matcore::eig_hermitian(&f).expect("Hermitian");
        (vals, vecs, matcore::hermitian_part(&der))
    }

    /// `F(x) = B̃(x + i0)^{-1} + shift`.
    fn boundary_inverse(&self, x: f64) -> CMat {
        let (tau, v) = self.base.t_eig(x);
        let d = CVec::from_iterator(tau.len(), tau.iter().map(|&t| c64(1.0, 0.0) / chi(t)));
        &self.base.k_half * &v * CMat::from_diagonal(&d) * v.adjoint() * &self.base.k_half + &self.shift
    }

    /// `dF/dx` by the Daleckii–Krein formula, with `d(1/χ)/dτ = 1 − χ/(2χ − τ)`.
    fn boundary_inverse_derivative(&self, x: f64) -> CMat {
        let (tau, v) = self.base.t_eig(x);
        let n = tau.len();
        let phi: Vec<C64> = tau.iter().map(|&t| c64(1.0, 0.0) / chi(t)).collect();
        let dphi = |t: f64| {
            let c = chi(t);
            c64(1.0, 0.0) - c / (c * 2.0 - t)
        };
        let tp = v.adjoint() * matcore::inverse(self.base.k()).expect("positive definite") * &v;
        let dd = CMat::from_fn(n, n, |i, j| {
            let q = if (tau[i] - tau[j]).abs() > 1e-9 * (1.0 + tau[i].abs()) {
                (phi[i] - phi[j]) / (tau[i] - tau[j])
            } else {
                dphi((tau[i] + tau[j]) / 2.0)
            };
            tp[(i, j)] * q
        });
        &self.base.k_half * &v * dd * v.adjoint() * &self.base.k_half
    }

    fn min_singular_value(&self, x: f64) -> f64 {
        let sv = self.boundary_inverse(x).svd(false, false).singular_values;
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Atoms inside bands of other components: points where `F(x)` is singular
    /// although part of `T(x)` lies in the continuous spectrum.
    fn embedded_atoms(&self, scale: f64) -> Vec<Atom> {
        let m = self.base.dim();
        let mut out = Vec::new();
        for (lo, hi) in self.base.bands() {
            let (tau, _) = self.base.t_eig(0.5 * (lo + hi));
            if tau.iter().all(|t| t.abs() <= 2.0) {
                continue;
            }
            // Chebyshev points include the edges and crowd near them, where atoms
            // split off a band tend to sit
            let n = 400;
            let (mid, rad) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
            let xs: Vec<f64> = (0..=n).map(|k| mid - rad * (PI * k as f64 / n as f64).cos()).collect();
            let sv: Vec<f64> = xs.iter().map(|&x| self.min_singular_value(x)).collect();
            for k in 0..xs.len() {
                let left = k == 0 || sv[k] <= sv[k - 1];
                let right = k + 1 == xs.len() || sv[k] <= sv[k + 1];
                if !(left && right) {
                    continue;
                }
                let (mut a, mut b) = (xs[k.saturating_sub(1)], xs[(k + 1).min(n)]);
                let r = (5f64.sqrt() - 1.0) / 2.0;
                let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
                let (mut fc, mut fd) = (self.min_singular_value(c), self.min_singular_value(d));
                while b - a > 1e-14 * (1.0 + a.abs()) {
                    if fc < fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - r * (b - a);
                        fc = self.min_singular_value(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + r * (b - a);
                        fd = self.min_singular_value(d);
                    }
                }
                let x0 = 0.5 * (a + b);
                let f = self.boundary_inverse(x0);
                let svd = f.clone().svd(true, true);
                let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
                let cols: Vec<usize> = (0..m).filter(|&i| svd.singular_values[i] <= 1e-7 * scale).collect();
                if cols.is_empty() || svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-9 * scale {
                    continue;
                }
                let fp = self.boundary_inverse_derivative(x0);
                let uk = CMat::from_fn(m, cols.len(), |r, c| u[(r, cols[c])]);
                let vk = CMat::from_fn(m, cols.len(), |r, c| vt[(cols[c], r)].conj());
                let inner = uk.adjoint() * fp * &vk;
                if let Ok(inv) = matcore::inverse(&inner) {
                    let w = &vk * inv * uk.adjoint();
                    out.push(Atom { x: x0, weight: matcore::hermitian_part(&w) });
                }
            }
        }
        out
    }

    /// Atoms: zeros of the increasing Hermitian function `B̃(x)^{-1} + shift` in the gaps,
    /// and singular points of `B̃(x + i0)^{-1} + shift` inside partially filled bands.
    pub fn atoms(&self) -> Vec<Atom> {
        let m = self.base.dim();
        let scale = matcore::max_abs(self.base.k()) + matcore::max_abs(self.base.b()) + matcore::max_abs(&self.shift) + 1.0;
        let bound = 4.0 * scale * m as f64;
        let tol = 1e-9 * scale;
        let mut roots: Vec<f64> = Vec::new();
        for (alpha, beta) in self.base.gaps(bound) {
            let (va, _, _) = self.gap_matrix(alpha);
            let (vb, _, _) = self.gap_matrix(beta);
            for k in 0..m {
                if !(va[k] < -tol && vb[k] > tol) {
                    continue;
                }
                let (mut lo, mut hi) = (alpha, beta);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.gap_matrix(mid).0[k] < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * scale);
        let embedded = self.embedded_atoms(scale);
        let mut atoms: Vec<Atom> = roots
            .into_iter()
            .map(|x| {
                let (vals, vecs, der) = self.gap_matrix(x);
                let fscale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
                let cols: Vec<usize> = (0..m).filter(|&i| vals[i].abs() <= 1e-7 * fscale).collect();
                let v = CMat::from_fn(m, cols.len(), |r, c| vecs[(r, cols[c])]);
                let inner = v.adjoint() * der * &v;
                let w = &v * matcore::inverse(&inner).expect("positive derivative") * v.adjoint();
                Atom { x, weight: matcore::hermitian_part(&w) }
            })
            .collect();
        atoms.extend(embedded);
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        atoms
    }

    pub fn measure(&self) -> SpectralMeasure {
        let pieces = self
            .base
            .bands()
            .into_iter()
            .map(|(lo, hi)| {
                let me = self.clone();
                DensityPiece::with_estimated_exponents(lo, hi, Arc::new(move |x| me.density(x)))
            })
            .collect();
        SpectralMeasure::new(self.base.dim(), self.atoms(), pieces)
    }
}

struct PerturbedTransform {
    base: Arc<dyn Transform>,
    shift: CMat,
}

impl Transform for PerturbedTransform {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        let b = self.base.eval(z)?;
        let inv = matcore::inverse(&b).map_err(|_| StieltjesError::Singular { re: z.re, im: z.im })?;
        matcore::inverse(&(inv + &self.shift)).map_err(|_| StieltjesError::Singular { re: z.re, im: z.im })
    }
}

/// `B(z) = (B̃(z)^{-1} + S₀^{-1} δ)^{-1}`, with `δ` the change of the first
/// diagonal block of the generator.
pub fn perturb_first_block(base: Arc<dyn Transform>, delta_b0: &CMat, s0: &CMat) -> Result<Arc<dyn Transform>, SpectralError> {
    let shift = matcore::inverse(s0)? * delta_b0;
    Ok(Arc::new(PerturbedTransform { base, shift }))
}

/// Gram blocks `∫ Q_j* dΣ Q_i` up to a degree.
#[derive(Debug, Clone)]
pub struct GramTable {
    pub blocks: Vec<Vec<CMat>>,
    /// Largest `‖G_ji‖ / ‖G_ii‖` over `j ≠ i`.
    pub max_offdiagonal: f64,
    /// Smallest singular value over the diagonal blocks.
    pub min_diagonal_singular_value: f64,
}

pub fn orthogonality_check(
    measure: &SpectralMeasure,
    polys: &dyn Fn(f64) -> Vec<CMat>,
    max_degree: usize,
) -> Result<GramTable, SpectralError> {
    let m = measure.dim;
    let n = max_degree + 1;
    let big = measure.quadrature(|x, w| {
        let q = polys(x);
        let mut out = CMat::zeros(n * m, n * m);
        for j in 0..n {
            let left = q[j].adjoint() * w;
            for i in 0..n {
                out.view_mut((j * m, i * m), (m, m)).copy_from(&(&left * &q[i]));
            }
        }
        out
    })?;
    let blocks: Vec<Vec<CMat>> =
        (0..n).map(|j| (0..n).map(|i| big.view((j * m, i * m), (m, m)).into_owned()).collect()).collect();
    let mut max_off: f64 = 0.0;
    let mut min_sv = f64::INFINITY;
    for j in 0..n {
        let sv = blocks[j][j].clone().svd(false, false).singular_values;
        min_sv = min_sv.min(sv.iter().cloned().fold(f64::INFINITY, f64::min));
        for i in 0..n {
            if i != j {
                let denom = matcore::max_abs(&blocks[i][i]).min(matcore::max_abs(&blocks[j][j])).max(1e-300);
                max_off = max_off.max(matcore::max_abs(&blocks[j][i]) / denom);
            }
        }
    }
    Ok(GramTable { blocks, max_offdiagonal: max_off, min_diagonal_singular_value: min_sv })
}

#[derive(Debug, Clone)]
pub struct HankelCheck {
    pub moments: Vec<CMat>,
    /// Minimal eigenvalue of the block Hankel matrix `(S_{i+j})_{i,j ≤ k}` for each `k`.
    pub min_eigenvalues: Vec<f64>,
    pub positive_definite: Vec<bool>,
}

pub fn hankel_check(measure: &SpectralMeasure, order: usize) -> Result<HankelCheck, SpectralError> {
    let moments = (0..=2 * order).map(|k| measure.moment(k as i32)).collect::<Result<Vec<_>, _>>()?;
    let m = measure.dim;
    let mut min_eigenvalues = Vec::new();
    let mut positive_definite = Vec::new();
    for k in 0..=order {
        let n = k + 1;
        let h = CMat::from_fn(n * m, n * m, |r, c| moments[r / m + c / m][(r % m, c % m)]);
        let (vals, _) = matcore::eig_hermitian(&matcore::hermitian_part(&h))?;
        let scale = matcore::max_abs(&h).max(1.0);
        min_eigenvalues.push(vals[0]);
        positive_definite.push(vals[0] > 1e-12 * scale);
    }
    Ok(HankelCheck { moments, min_eigenvalues, positive_definite })
}
