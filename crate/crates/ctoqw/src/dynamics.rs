//! Transition probabilities of a walk.
//!
//! `p_direct` evolves `ρ ⊗ |i⟩⟨i|` with the matrix exponential of a truncated
//! generator and serves as the ground truth. `p_km` and `p_line_km` evaluate
//! the Karlin–McGregor integrals against a spectral measure.

use std::sync::Arc;

use thiserror::Error;

use crate::lindblad::{self, line_restriction_minus, line_restriction_plus, Model, ModelError, VertexSet};
use crate::matcore::{self, c64, CMat, CVec, MatError, C64};
use crate::orthopoly::{
    compute_symmetrizers, symmetrized_blocks, symmetrized_dense, Family, FoldedEvaluator, PolyError, PolynomialEvaluator,
    SymmetrizerChain, SymmetrizerError,
};
use crate::spectral::{finite_spectral_measure, PerturbedDuran, SpectralError, SpectralMeasure};
use crate::stieltjes::{self, Evaluator, HalfLineResolvent, StieltjesError, Transform};

/// Largest window `p_direct` grows to, in sites.
pub const WINDOW_CAP: usize = 4096;
/// Stabilization threshold of window doubling.
pub const WINDOW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid density operator: {0}")]
    InvalidState(String),
    #[error("site {0} is not in the window of the measure")]
    SiteOutside(i64),
    #[error("no spectral measure available: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Symmetrizer(#[from] SymmetrizerError),
    #[error(transparent)]
    Stieltjes(#[from] StieltjesError),
    #[error("{0}")]
    Spectral(String),
}

impl From<SpectralError> for DynamicsError {
    fn from(e: SpectralError) -> Self {
        DynamicsError::Spectral(e.to_string())
    }
}

/// A `d × d` density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(CMat);

impl DensityOperator {
    pub fn new(m: CMat) -> Result<Self, DynamicsError> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(DynamicsError::InvalidState(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DynamicsError::InvalidState("non-finite entry".into()));
        }
        let dev = matcore::hermitian_deviation(&m);
        if dev > 1e-12 {
            return Err(DynamicsError::InvalidState(format!("not Hermitian (deviation {dev:.3e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(DynamicsError::InvalidState(format!("trace is {} + {}i", tr.re, tr.im)));
        }
        let (vals, _) = matcore::eig_hermitian(&matcore::hermitian_part(&m))?;
        if vals[0] < -1e-12 {
            return Err(DynamicsError::InvalidState(format!("negative eigenvalue {:.3e}", vals[0])));
        }
        Ok(DensityOperator(m))
    }

    /// `|e_k⟩⟨e_k|`.
    pub fn pure(d: usize, k: usize) -> Self {
        let mut m = CMat::zeros(d, d);
        m[(k, k)] = c64(1.0, 0.0);
        DensityOperator(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator(matcore::identity(d) / c64(d as f64, 0.0))
    }

    /// `[[a, b], [b*, 1 − a]]`.
    pub fn qubit(a: f64, b: C64) -> Result<Self, DynamicsError> {
        DensityOperator::new(CMat::from_row_slice(2, 2, &[c64(a, 0.0), b, b.conj(), c64(1.0 - a, 0.0)]))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn vec(&self) -> CVec {
        matcore::vec(&self.0).expect("square")
    }
}

fn check_state(model: &Model, rho: &DensityOperator) -> Result<(), DynamicsError> {
    if rho.dim() != model.d() {
        return Err(DynamicsError::InvalidState(format!("state is {}x{}, model has d = {}", rho.dim(), rho.dim(), model.d())));
    }
    Ok(())
}

/// `Tr unvec(M vec ρ)`.
pub fn trace_against(m: &CMat, rho: &DensityOperator) -> Result<f64, DynamicsError> {
    Ok(matcore::unvec(&(m * rho.vec()), rho.dim())?.trace().re)
}

/// `p_{ji;ρ}(t)` on the fixed window `lo..=hi`.
pub fn p_window(model: &Model, lo: i64, hi: i64, j: i64, i: i64, rho: &DensityOperator, t: f64) -> Result<f64, DynamicsError> {
    check_state(model, rho)?;
    let bt = lindblad::assemble(model, lo, hi)?;
    let v0 = bt.embed(i, &rho.vec()).ok_or(DynamicsError::SiteOutside(i))?;
    let v = bt.expm_action(&v0, t)?;
    let blk = bt.block_of(&v, j).ok_or(DynamicsError::SiteOutside(j))?;
    Ok(matcore::unvec(&blk, rho.dim())?.trace().re)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub value: f64,
    /// Change between the last two windows (zero for finite chains).
    pub delta: f64,
    pub window: (i64, i64),
    pub converged: bool,
}

/// `p_{ji;ρ}(t)` by the matrix exponential, doubling the window on infinite
/// vertex sets until successive values differ by less than `1e-8`.
pub fn p_direct(model: &Model, j: i64, i: i64, rho: &DensityOperator, t: f64) -> Result<ProbabilityEstimate, DynamicsError> {
    for n in [i, j] {
        if !model.contains(n) {
            return Err(ModelError::SiteOutside(n).into());
        }
    }
    if let VertexSet::Finite { sites, .. } = model.vertices() {
        let hi = sites as i64 - 1;
        let value = p_window(model, 0, hi, j, i, rho, t)?;
        return Ok(ProbabilityEstimate { value, delta: 0.0, window: (0, hi), converged: true });
    }
    let probe = lindblad::assemble(model, i.min(j) - 1, i.max(j) + 1).or_else(|_| lindblad::assemble(model, 0, i.max(j) + 1))?;
    let mut half = ((2.0 * probe.norm_bound() * t).ceil() as i64).max(8);
    let window = |half: i64| {
        let lo = i.min(j) - half;
        let lo = if model.first_site() == Some(0) { lo.max(0) } else { lo };
        (lo, i.max(j) + half)
    };
    let mut w = window(half);
    let mut prev = p_window(model, w.0, w.1, j, i, rho, t)?;
    loop {
        half *= 2;
        let next = window(half);
        if (next.1 - next.0 + 1) as usize > WINDOW_CAP {
            return Ok(ProbabilityEstimate { value: prev, delta: f64::NAN, window: w, converged: false });
        }
        let value = p_window(model, next.0, next.1, j, i, rho, t)?;
        let delta = (value - prev).abs();
        w = next;
        if delta < WINDOW_TOL {
            return Ok(ProbabilityEstimate { value, delta, window: w, converged: true });
        }
        prev = value;
        if (2 * (w.1 - w.0 + 1)) as usize > WINDOW_CAP {
            return Ok(ProbabilityEstimate { value, delta, window: w, converged: false });
        }
    }
}

/// `Λ_ji(t) = Π_j^{-1} ∫ e^{−xt} Q_j* dΣ Q_i`, with `Π_j` the Gram block of the chain.
pub fn km_matrix(
    measure: &SpectralMeasure,
    polys: &PolynomialEvaluator,
    chain: &SymmetrizerChain,
    j: usize,
    i: usize,
    t: f64,
) -> Result<CMat, DynamicsError> {
    let km = chain.km_norm(j as i64).ok_or(DynamicsError::SiteOutside(j as i64))?;
    let top = j.max(i);
    let failure = std::sync::Mutex::new(None);
    let integral = measure.quadrature(|x, w| match polys.sequence(x, top) {
        Ok(q) => q[j].adjoint() * w * &q[i] * c64((-x * t).exp(), 0.0),
        Err(e) => {
            *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
            CMat::zeros(w.nrows(), w.ncols())
        }
    })?;
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e.into());
    }
    Ok(km * integral)
}

/// Karlin–McGregor probability `Tr unvec(Λ_ji(t) vec ρ)`.
pub fn p_km(
    measure: &SpectralMeasure,
    polys: &PolynomialEvaluator,
    chain: &SymmetrizerChain,
    j: usize,
    i: usize,
    rho: &DensityOperator,
    t: f64,
) -> Result<f64, DynamicsError> {
    trace_against(&km_matrix(measure, polys, chain, j, i, t)?, rho)
}

/// `Λ_ji(t) = Π_j^{-1} ∫ e^{−xt} S_j* dW S_i` on the line, `S_n = [Q¹_n; Q²_n]`.
pub fn line_km_matrix(
    measure: &SpectralMeasure,
    folded: &FoldedEvaluator,
    chain: &SymmetrizerChain,
    j: i64,
    i: i64,
    t: f64,
) -> Result<CMat, DynamicsError> {
    let km = chain.km_norm(j).ok_or(DynamicsError::SiteOutside(j))?;
    let (lo, hi) = (i.min(j).min(-1), i.max(j).max(0));
    let failure = std::sync::Mutex::new(None);
    let m = folded.families().0.block_dim();
    let integral = measure.quadrature(|x, w| match folded.stacked(x, lo, hi) {
        Ok(s) => s[&j].adjoint() * w * &s[&i] * c64((-x * t).exp(), 0.0),
        Err(e) => {
            *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
            CMat::zeros(m, m)
        }
    })?;
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e.into());
    }
    Ok(km * integral)
}

pub fn p_line_km(
    measure: &SpectralMeasure,
    folded: &FoldedEvaluator,
    chain: &SymmetrizerChain,
    j: i64,
    i: i64,
    rho: &DensityOperator,
    t: f64,
) -> Result<f64, DynamicsError> {
    if measure.dim != 2 * folded.families().0.block_dim() {
        return Err(DynamicsError::Unsupported("the line formula needs the full 2x2 block measure".into()));
    }
    trace_against(&line_km_matrix(measure, folded, chain, j, i, t)?, rho)
}

/// How a spectral measure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMethod {
    /// Eigen-decomposition of a finite symmetrized generator.
    Finite,
    /// Constant Jacobi tail with a perturbed first block.
    PerturbedTail,
    /// Numerical inversion of the Stieltjes transform.
    Inversion,
}

/// Spectral data of a finite or half-line model at site 0.
pub struct HalfLineSpectral {
    pub measure: SpectralMeasure,
    pub chain: SymmetrizerChain,
    pub polys: PolynomialEvaluator,
    pub method: MeasureMethod,
}

fn tail_gauge(k: &CMat) -> Option<CMat> {
    if !matcore::is_hermitian(k, 1e-10) {
        return None;
    }
    let h = matcore::hermitian_part(k);
    let (vals, _) = matcore::eig_hermitian(&h).ok()?;
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if vals[0] > 1e-12 * scale {
        Some(h)
    } else if *vals.last().expect("non-empty") < -1e-12 * scale {
        Some(-h)
    } else {
        None
    }
}

fn close(a: &CMat, b: &CMat) -> bool {
    matcore::max_abs(&(a - b)) <= 1e-10 * (1.0 + matcore::max_abs(a))
}

/// Resolution and `ε` ladder used when a measure has to be recovered by inversion.
const INVERSION_RESOLUTION: usize = 2000;
const INVERSION_EPS: [f64; 4] = [4e-3, 2e-3, 1e-3, 5e-4];

/// Spectral measure at site 0 for finite and half-line models.
pub fn half_line_spectral(model: &Arc<Model>) -> Result<HalfLineSpectral, DynamicsError> {
    let polys = PolynomialEvaluator::new(model.clone(), Family::HalfLine);
    match model.vertices() {
        VertexSet::Finite { sites, .. } => {
            let hi = sites as i64 - 1;
            let chain = compute_symmetrizers(model.as_ref(), 0, hi)?;
            let bt = lindblad::assemble(model, 0, hi)?;
            let j = symmetrized_dense(&bt, &chain)?;
            let measure = finite_spectral_measure(&j, model.block_dim())?;
            Ok(HalfLineSpectral { measure, chain, polys, method: MeasureMethod::Finite })
        }
        VertexSet::HalfLine => {
            let blocks = lindblad::half_line_blocks(model)?;
            let h = blocks.head.len() as i64;
            let chain = compute_symmetrizers(model.as_ref(), 0, h + 3)?;
            let jb = (0..=h + 2).map(|n| symmetrized_blocks(model.as_ref(), &chain, n)).collect::<Result<Vec<_>, _>>()?;
            let homogeneous = jb[1..].iter().all(|(d, o)| close(d, &jb[1].0) && close(o, &jb[1].1));
            if homogeneous {
                if let Some(k) = tail_gauge(&jb[1].1) {
                    let pd = PerturbedDuran::new(&jb[0].0, k, matcore::hermitian_part(&jb[1].0))?;
                    return Ok(HalfLineSpectral { measure: pd.measure(), chain, polys, method: MeasureMethod::PerturbedTail });
                }
            }
            let bound = lindblad::assemble(model, 0, h + 2)?.norm_bound() * 1.05;
            let ev: Evaluator = Arc::new(HalfLineResolvent::new(blocks));
            let measure = stieltjes::perron_stieltjes_invert(ev, -0.01 * bound, bound, INVERSION_RESOLUTION, &INVERSION_EPS)?;
            Ok(HalfLineSpectral { measure, chain, polys, method: MeasureMethod::Inversion })
        }
        VertexSet::Line => Err(DynamicsError::Unsupported("use line_spectral for line models".into())),
    }
}

/// Spectral data of a line model: the `2m × 2m` measure `W` at sites `{0, −1}`.
pub struct LineSpectral {
    pub measure: SpectralMeasure,
    pub chain: SymmetrizerChain,
    pub folded: FoldedEvaluator,
    pub method: MeasureMethod,
}

fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let m = a.nrows();
    let mut out = CMat::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (m, m)).copy_from(b);
    out
}

/// Line measure `W = R̆₀* μ̆ R̆₀` with `R̆₀ = diag(I, R₋₁)` and `μ̆` the measure of
/// the folded symmetrized generator at its first block.
pub fn line_spectral(model: &Arc<Model>) -> Result<LineSpectral, DynamicsError> {
    if model.vertices() != VertexSet::Line {
        return Err(ModelError::WrongVertexSet { expected: "line" }.into());
    }
    let (olo, ohi) = model.override_range().unwrap_or((0, 0));
    let (lo, hi) = (olo.min(-1) - 3, ohi.max(0) + 3);
    let chain = compute_symmetrizers(model.as_ref(), lo, hi)?;
    let folded = FoldedEvaluator::new(model.clone());
    let m = model.block_dim();
    let jb = |n: i64| symmetrized_blocks(model.as_ref(), &chain, n);
    let r_m1 = chain.r(-1).ok_or(DynamicsError::SiteOutside(-1))?.clone();
    let r0 = block_diag(&matcore::identity(m), &r_m1);

    let (j00, j10) = jb(0)?;
    let (jm1, j0m1) = jb(-1)?;
    let (jm2, jm1m2) = jb(-2)?;
    let (j11, j21) = jb(1)?;
    let (jm3, jm2m3) = jb(-3)?;
    let (j22, _) = jb(2)?;
    let mut top = CMat::zeros(2 * m, 2 * m);
    top.view_mut((0, 0), (m, m)).copy_from(&j00);
    top.view_mut((0, m), (m, m)).copy_from(&j0m1);
    top.view_mut((m, 0), (m, m)).copy_from(&j0m1.adjoint());
    top.view_mut((m, m), (m, m)).copy_from(&jm1);
    let tail_ok = olo >= -1 && ohi <= 0 && close(&j11, &j22) && close(&jm2, &jm3) && close(&j10, &j21) && close(&jm1m2, &jm2m3);
    if tail_ok {
        if let (Some(k1), Some(k2)) = (tail_gauge(&j10), tail_gauge(&jm1m2.adjoint())) {
            let k = block_diag(&k1, &k2);
            let b = matcore::hermitian_part(&block_diag(&j11, &jm2));
            let pd = PerturbedDuran::new(&matcore::hermitian_part(&top), k, b)?;
            let measure = pd.measure().congruence(&r0);
            return Ok(LineSpectral { measure, chain, folded, method: MeasureMethod::PerturbedTail });
        }
    }
    let ft = line_fold_transforms(model, &chain)?;
    let bound = lindblad::assemble(model, lo, hi)?.norm_bound() * 1.05;
    let whole: Evaluator = Arc::new(Stacked { blocks: [ft.w11, ft.w12, ft.w21, ft.w22], m });
    let measure = stieltjes::perron_stieltjes_invert(whole, -0.01 * bound, bound, INVERSION_RESOLUTION, &INVERSION_EPS)?;
    Ok(LineSpectral { measure, chain, folded, method: MeasureMethod::Inversion })
}

struct Stacked {
    blocks: [Evaluator; 4],
    m: usize,
}

impl Transform for Stacked {
    fn dim(&self) -> usize {
        2 * self.m
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        let m = self.m;
        let mut out = CMat::zeros(2 * m, 2 * m);
        for (k, ev) in self.blocks.iter().enumerate() {
            out.view_mut(((k / 2) * m, (k % 2) * m), (m, m)).copy_from(&ev.eval(z)?);
        }
        Ok(out)
    }

    fn support_lower_bound(&self) -> Option<f64> {
        self.blocks[0].support_lower_bound()
    }
}

/// The four line transforms `B(z; W_αβ)` of a line model, built by folding the
/// two half-line resolvents.
pub fn line_fold_transforms(model: &Model, chain: &SymmetrizerChain) -> Result<stieltjes::FoldedTransforms, DynamicsError> {
    let plus: Evaluator = Arc::new(HalfLineResolvent::new(line_restriction_plus(model)?));
    let minus: Evaluator = Arc::new(HalfLineResolvent::new(line_restriction_minus(model)?));
    let a_m1 = lindblad::site_blocks(model, -1)?.a;
    let c0 = lindblad::site_blocks(model, 0)?.c;
    let pi0 = chain.pi(0).ok_or(DynamicsError::SiteOutside(0))?;
    let pi_m1 = chain.pi(-1).ok_or(DynamicsError::SiteOutside(-1))?;
    Ok(stieltjes::fold_identities(plus, minus, &a_m1, &c0, pi0, pi_m1)?)
}

/// Largest deviation between the folded semigroup blocks and the 2×2
/// arrangement of the unfolded ones, on the window `−sites..sites−1`.
pub fn fold_block_identity(model: &Model, sites: usize, t: f64) -> Result<f64, DynamicsError> {
    let m = model.block_dim();
    let s = sites as i64;
    let line = lindblad::assemble(model, -s, s - 1)?;
    let folded = lindblad::assemble_folded(model, sites)?;
    let p = matcore::expm(&(line.to_dense() * c64(t, 0.0)))?;
    let pf = matcore::expm(&(folded.to_dense() * c64(t, 0.0)))?;
    let idx = |n: i64| ((n + s) as usize) * m;
    let mut worst: f64 = 0.0;
    for k in 0..s {
        for l in 0..s {
            let rows = [k, -k - 1];
            let cols = [l, -l - 1];
            for (a, &rn) in rows.iter().enumerate() {
                for (b, &cn) in cols.iter().enumerate() {
                    let want = p.view((idx(rn), idx(cn)), (m, m));
                    let got = pf.view(((2 * k as usize + a) * m, (2 * l as usize + b) * m), (m, m));
                    worst = worst.max((want - got).iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedReturn {
    /// `∫₀^T p dt`.
    pub to_horizon: f64,
    /// Fitted `γ` in `p(t) ~ c t^{−γ}` near the horizon, absent when the fit is unreliable.
    pub gamma: Option<f64>,
    /// Tail estimate beyond `T` when `γ > 1`.
    pub tail: Option<f64>,
    /// `Some(true)` when the fit indicates divergence of `∫₀^∞ p dt`.
    pub divergent: Option<bool>,
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// `∫₀^T p dt` by adaptive Simpson plus a power-law fit of the tail.
pub fn integrated_return(p: &dyn Fn(f64) -> f64, horizon: f64) -> IntegratedReturn {
    let (fa, fm, fb) = (p(0.0), p(0.5 * horizon), p(horizon));
    let whole = horizon / 6.0 * (fa + 4.0 * fm + fb);
    let to_horizon = simpson(p, 0.0, horizon, fa, fm, fb, whole, 1e-8, 30);

    let ts: Vec<f64> = (0..8).map(|k| horizon * 0.25 * 4f64.powf(k as f64 / 7.0)).collect();
    let ps: Vec<f64> = ts.iter().map(|&t| p(t)).collect();
    let monotone = ps.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    if !monotone || ps.iter().any(|&v| v <= 0.0) {
        return IntegratedReturn { to_horizon, gamma: None, tail: None, divergent: None };
    }
    let pts: Vec<(f64, f64)> = ts.iter().zip(&ps).map(|(t, v)| (t.ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|q| q.0).sum::<f64>() / n, pts.iter().map(|q| q.1).sum::<f64>() / n);
    let slope = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum::<f64>() / pts.iter().map(|q| (q.0 - mx).powi(2)).sum::<f64>();
    let gamma = -slope;
    let divergent = gamma <= 1.0;
    let tail = (!divergent).then(|| ps[ps.len() - 1] * horizon / (gamma - 1.0));
    IntegratedReturn { to_horizon, gamma: Some(gamma), tail, divergent: Some(divergent) }
}
