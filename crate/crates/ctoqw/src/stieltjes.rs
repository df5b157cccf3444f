//! Matrix Stieltjes transforms `B(z, Σ) = ∫ dΣ(x)/(z − x)`.
//!
//! With the symmetrizer normalized by `R₀ = I`, the transform of the spectral
//! measure at site 0 equals the resolvent block `[(z + L̂)^{-1}]₀₀`, so half-line
//! and line transforms can be evaluated straight from the generator blocks by
//! cyclic reduction, without building the measure.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::dynamics::DensityOperator;
use crate::lindblad::HalfLineBlocks;
use crate::matcore::{self, c64, CMat, MatError, C64};
use crate::orthopoly::{self, PolyError, PolynomialEvaluator};
use crate::spectral::{Atom, DensityPiece, SpectralError, SpectralMeasure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StieltjesError {
    #[error("z = {re} + {im}i lies on the support")]
    OnSupport { re: f64, im: f64 },
    #[error("singular matrix while evaluating at z = {re} + {im}i (pole)")]
    Singular { re: f64, im: f64 },
    #[error("cyclic reduction did not converge at z = {re} + {im}i")]
    NoConvergence { re: f64, im: f64 },
    #[error("support extends below zero (to {0:.3e})")]
    SupportBelowZero(f64),
    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("{0}")]
    Spectral(String),
}

impl From<SpectralError> for StieltjesError {
    fn from(e: SpectralError) -> Self {
        StieltjesError::Spectral(e.to_string())
    }
}

/// A matrix valued Stieltjes transform.
pub trait Transform: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: C64) -> Result<CMat, StieltjesError>;
    /// Known lower bound of the support, if any.
    fn support_lower_bound(&self) -> Option<f64> {
        None
    }
}

pub type Evaluator = Arc<dyn Transform>;

pub fn stieltjes_eval(ev: &dyn Transform, z: C64) -> Result<CMat, StieltjesError> {
    ev.eval(z)
}

/// Largest eigenvalue of `(B − B*)/(2i)`; non-positive in the upper half-plane.
pub fn herglotz_excess(ev: &dyn Transform, z: C64) -> Result<f64, StieltjesError> {
    let b = ev.eval(z)?;
    let (vals, _) = matcore::eig_hermitian(&matcore::anti_hermitian_part(&b))?;
    Ok(*vals.last().expect("non-empty"))
}

/// Transform of an explicit measure, by atoms and density quadrature.
pub struct MeasureTransform {
    measure: SpectralMeasure,
}

impl MeasureTransform {
    pub fn new(measure: SpectralMeasure) -> Self {
        MeasureTransform { measure }
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }
}

impl Transform for MeasureTransform {
    fn dim(&self) -> usize {
        self.measure.dim
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        if z.im.abs() <= 1e-12 {
            let on_atom = self.measure.atoms.iter().any(|a| (a.x - z.re).abs() <= 1e-12);
            let on_piece = self.measure.pieces.iter().any(|p| z.re >= p.lo - 1e-12 && z.re <= p.hi + 1e-12);
            if on_atom || on_piece {
                return Err(StieltjesError::OnSupport { re: z.re, im: z.im });
            }
        }
        Ok(self.measure.quadrature(|x, w| w / (z - x))?)
    }

    fn support_lower_bound(&self) -> Option<f64> {
        self.measure.support_lower_bound()
    }
}

/// Transform given by a closed-form function.
pub struct ClosedForm {
    dim: usize,
    lower: Option<f64>,
    f: Box<dyn Fn(C64) -> Result<CMat, StieltjesError> + Send + Sync>,
}

impl ClosedForm {
    pub fn new(dim: usize, lower: Option<f64>, f: impl Fn(C64) -> Result<CMat, StieltjesError> + Send + Sync + 'static) -> Self {
        ClosedForm { dim, lower, f: Box::new(f) }
    }
}

impl Transform for ClosedForm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        (self.f)(z)
    }

    fn support_lower_bound(&self) -> Option<f64> {
        self.lower
    }
}

fn singular(z: C64) -> StieltjesError {
    StieltjesError::Singular { re: z.re, im: z.im }
}

/// `Y = (d − c Y a)^{-1}` for the decaying solution, via cyclic reduction on
/// `c X² − d X + a = 0` (`X = Y a` is the minimal solvent).
pub fn tail_resolvent(d: &CMat, a: &CMat, c: &CMat) -> Result<CMat, StieltjesError> {
    let z = c64(f64::NAN, f64::NAN);
    let scale = matcore::max_abs(d) + matcore::max_abs(a) + matcore::max_abs(c);
    let mut am = a.clone();
    let mut ap = c.clone();
    let mut a0 = -d.clone();
    let mut ah = -d.clone();
    let residual = |g: &CMat| matcore::max_abs(&(a - d * g + c * g * g));
    for _ in 0..80 {
        let s = matcore::inverse(&a0).map_err(|_| singular(z))?;
        let ams = &am * &s;
        let aps = &ap * &s;
        let amsap = &ams * &ap;
        let apsam = &aps * &am;
        let am_next = -(&ams * &am);
        let ap_next = -(&aps * &ap);
        a0 = a0 - amsap - &apsam;
        ah -= apsam;
        am = am_next;
        ap = ap_next;
        if matcore::max_abs(&am) <= 1e-15 * scale || matcore::max_abs(&ap) * matcore::max_abs(&am) <= 1e-30 * scale * scale {
            break;
        }
    }
    let mut g = -(matcore::inverse(&ah).map_err(|_| singular(z))? * a);
    // near the support the solvent is ill-conditioned; polish with Newton steps on
    // F(G) = cG² − dG + a, whose derivative H ↦ cGH + cHG − dH is a Kronecker system
    let m = g.nrows();
    let eye = matcore::identity(m);
    for _ in 0..4 {
        let r = a - d * &g + c * &g * &g;
        if matcore::max_abs(&r) <= 1e-14 * scale.max(1.0) * (1.0 + matcore::max_abs(&g)).powi(2) {
            break;
        }
        let jac = matcore::kron(&g.transpose(), c) + matcore::kron(&eye, &(c * &g)) - matcore::kron(&eye, d);
        let rhs = crate::CVec::from_column_slice(r.as_slice());
        let Some(h) = jac.lu().solve(&rhs) else { break };
        let step = CMat::from_column_slice(m, m, h.as_slice());
        let next = &g - step;
        if residual(&next) >= matcore::max_abs(&r) {
            break;
        }
        g = next;
    }
    if residual(&g) > 1e-9 * scale.max(1.0) {
        return Err(StieltjesError::NoConvergence { re: f64::NAN, im: f64::NAN });
    }
    matcore::inverse(&(d - c * g)).map_err(|_| singular(z))
}

fn locate(e: StieltjesError, z: C64) -> StieltjesError {
    match e {
        StieltjesError::NoConvergence { .. } => StieltjesError::NoConvergence { re: z.re, im: z.im },
        StieltjesError::Singular { .. } => singular(z),
        other => other,
    }
}

/// Tail of the symmetrized matrix `J`, grouped into super-sites of `period` sites
/// so that it is constant. Cyclic reduction on the Hermitian form always picks
/// the root that decays in the weighted space, which the raw blocks do not
/// guarantee when `A` and `C` have different magnitudes.
struct SymTail {
    start: usize,
    diag: CMat,
    lower: CMat,
    r: CMat,
    r_inv: CMat,
}

impl SymTail {
    fn build(blocks: &HalfLineBlocks) -> Option<SymTail> {
        let m = blocks.tail.b.nrows();
        let start = blocks.head.len().max(1);
        for p in [1usize, 2] {
            // sites start..start+2p−1 need R up to start+2p
            let hi = start + 2 * p;
            let raw = orthopoly::pi_product(blocks, 0, hi as i64).ok()?;
            let mut r = Vec::with_capacity(hi + 1);
            let mut r_inv = Vec::with_capacity(hi + 1);
            for pi in &raw[start..=hi] {
                let pi = matcore::hermitian_part(pi);
                r.push(matcore::sqrt_psd(&pi).ok()?);
                r_inv.push(matcore::inv_sqrt_pd(&pi).ok()?);
            }
            let mut jb = Vec::with_capacity(2 * p);
            for k in 0..2 * p {
                let here = blocks.at(start + k);
                let next = blocks.at(start + k + 1);
                let d = -(&r[k] * &here.b * &r_inv[k]);
                let lower = -(&r[k + 1] * &here.a * &r_inv[k]);
                let upper = -(&r[k] * &next.c * &r_inv[k + 1]);
                jb.push((d, lower, upper));
            }
            let scale = jb.iter().map(|(d, o, _)| matcore::max_abs(d) + matcore::max_abs(o)).fold(0.0, f64::max).max(1e-300);
            let symmetric = jb
                .iter()
                .all(|(d, lo, up)| matcore::hermitian_deviation(d) <= 1e-8 * scale && matcore::max_abs(&(lo.adjoint() - up)) <= 1e-8 * scale);
            if !symmetric {
                return None;
            }
            let periodic = (0..p).all(|k| {
                let (d0, o0, _) = &jb[k];
                let (d1, o1, _) = &jb[k + p];
                matcore::max_abs(&(d0 - d1)) <= 1e-8 * scale && matcore::max_abs(&(o0 - o1)) <= 1e-8 * scale
            });
            if !periodic {
                continue;
            }
            let pm = p * m;
            let mut diag = CMat::zeros(pm, pm);
            for k in 0..p {
                let (d, o, _) = &jb[k];
                diag.view_mut((k * m, k * m), (m, m)).copy_from(&matcore::hermitian_part(d));
                if k + 1 < p {
                    diag.view_mut(((k + 1) * m, k * m), (m, m)).copy_from(o);
                    diag.view_mut((k * m, (k + 1) * m), (m, m)).copy_from(&o.adjoint());
                }
            }
            let mut lower = CMat::zeros(pm, pm);
            lower.view_mut((0, (p - 1) * m), (m, m)).copy_from(&jb[p - 1].1);
            return Some(SymTail { start, diag, lower, r: r[0].clone(), r_inv: r_inv[0].clone() });
        }
        None
    }

    /// `[(z + L̂)^{-1}]` restricted to the tail, at its first site.
    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        let pm = self.diag.nrows();
        let m = self.r.nrows();
        let d = matcore::identity(pm) * z - &self.diag;
        let y = tail_resolvent(&d, &self.lower, &self.lower.adjoint())?;
        let y00 = y.view((0, 0), (m, m)).into_owned();
        Ok(&self.r_inv * y00 * &self.r)
    }
}

/// `[(z + L̂)^{-1}]₀₀` for a half-line generator that is constant beyond its head.
pub struct HalfLineResolvent {
    blocks: HalfLineBlocks,
    sym: Option<SymTail>,
    lower: Option<f64>,
}

impl HalfLineResolvent {
    pub fn new(blocks: HalfLineBlocks) -> Self {
        let sym = SymTail::build(&blocks);
        HalfLineResolvent { blocks, sym, lower: Some(0.0) }
    }

    /// Declares a different support lower bound (`None` when unknown).
    pub fn with_lower_bound(mut self, lower: Option<f64>) -> Self {
        self.lower = lower;
        self
    }

    pub fn blocks(&self) -> &HalfLineBlocks {
        &self.blocks
    }
}

impl Transform for HalfLineResolvent {
    fn dim(&self) -> usize {
        self.blocks.tail.b.nrows()
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        let m = self.dim();
        let zi = matcore::identity(m) * z;
        let (mut y, start) = match &self.sym {
            Some(t) => (t.eval(z).map_err(|e| locate(e, z))?, t.start),
            None => {
                let tail = &self.blocks.tail;
                let y = tail_resolvent(&(&zi + &tail.b), &tail.a, &tail.c).map_err(|e| locate(e, z))?;
                (y, self.blocks.head.len())
            }
        };
        for n in (0..start).rev() {
            let here = self.blocks.at(n);
            let c_next = &self.blocks.at(n + 1).c;
            let inner = &zi + &here.b - c_next * &y * &here.a;
            y = matcore::inverse(&inner).map_err(|_| singular(z))?;
        }
        Ok(y)
    }

    fn support_lower_bound(&self) -> Option<f64> {
        self.lower
    }
}

/// The four blocks of the line transform obtained by folding.
#[derive(Clone)]
pub struct FoldedTransforms {
    pub w11: Evaluator,
    pub w22: Evaluator,
    pub w12: Evaluator,
    pub w21: Evaluator,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum FoldBlock {
    W11,
    W22,
    W12,
    W21,
}

struct Fold {
    plus: Evaluator,
    minus: Evaluator,
    a_m1: CMat,
    c0: CMat,
    pi_plus0: CMat,
    pi_minus1: CMat,
    which: FoldBlock,
}

impl Transform for Fold {
    fn dim(&self) -> usize {
        self.plus.dim()
    }

    fn eval(&self, z: C64) -> Result<CMat, StieltjesError> {
        let m = self.dim();
        let i = matcore::identity(m);
        let xp = self.plus.eval(z)?;
        let xm = self.minus.eval(z)?;
        let pole = |e: MatError| match e {
            MatError::Singular => singular(z),
            other => other.into(),
        };
        Ok(match self.which {
            FoldBlock::W11 => &self.pi_plus0 * &xp * matcore::inverse(&(&i - &self.a_m1 * &xm * &self.c0 * &xp)).map_err(pole)?,
            FoldBlock::W22 => &self.pi_minus1 * &xm * matcore::inverse(&(&i - &self.c0 * &xp * &self.a_m1 * &xm)).map_err(pole)?,
            FoldBlock::W12 => {
                -(&self.pi_plus0 * &xp * matcore::inverse(&(&i - &self.a_m1 * &xm * &self.c0 * &xp)).map_err(pole)? * &self.a_m1 * &xm)
            }
            FoldBlock::W21 => {
                -(&self.pi_minus1 * &xm * matcore::inverse(&(&i - &self.c0 * &xp * &self.a_m1 * &xm)).map_err(pole)? * &self.c0 * &xp)
            }
        })
    }

    fn support_lower_bound(&self) -> Option<f64> {
        match (self.plus.support_lower_bound(), self.minus.support_lower_bound()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            _ => None,
        }
    }
}

/// Line transforms from the two half-line resolvent blocks `b_plus` (sites `0, 1, …`)
/// and `b_minus` (sites `−1, −2, …`), coupled through `⌈A₋₁⌉` and `⌈C₀⌉`.
///
/// `W₁₁ = Π₀ X⁺(I − ⌈A₋₁⌉X⁻⌈C₀⌉X⁺)^{-1}` and
/// `W₁₂ = −Π₀ X⁺(I − ⌈A₋₁⌉X⁻⌈C₀⌉X⁺)^{-1}⌈A₋₁⌉X⁻`, symmetrically for `W₂₂`, `W₂₁`,
/// where `Π₀ = pi_plus0`, `Π₋₁ = pi_minus1` are the Gram blocks of the line chain.
pub fn fold_identities(
    b_plus: Evaluator,
    b_minus: Evaluator,
    a_minus1: &CMat,
    c0: &CMat,
    pi_plus0: &CMat,
    pi_minus1: &CMat,
) -> Result<FoldedTransforms, StieltjesError> {
    let m = b_plus.dim();
    for (name, mat) in [("A_-1", a_minus1), ("C_0", c0), ("pi_plus0", pi_plus0), ("pi_minus1", pi_minus1)] {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(StieltjesError::Dimension(format!("{name} is {}x{}, expected {m}x{m}", mat.nrows(), mat.ncols())));
        }
    }
    if b_minus.dim() != m {
        return Err(StieltjesError::Dimension("half-line transforms differ in size".into()));
    }
    let make = |which| -> Evaluator {
        Arc::new(Fold {
            plus: b_plus.clone(),
            minus: b_minus.clone(),
            a_m1: a_minus1.clone(),
            c0: c0.clone(),
            pi_plus0: pi_plus0.clone(),
            pi_minus1: pi_minus1.clone(),
            which,
        })
    };
    Ok(FoldedTransforms { w11: make(FoldBlock::W11), w22: make(FoldBlock::W22), w12: make(FoldBlock::W12), w21: make(FoldBlock::W21) })
}

/// Neville extrapolation of `values[k] ≈ f(eps[k])` to `eps = 0`.
pub fn extrapolate_to_zero(eps: &[f64], values: &[CMat]) -> CMat {
    let mut p: Vec<CMat> = values.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let j = i + level;
            let (xi, xj) = (eps[i], eps[j]);
            p[i] = (&p[i] * c64(-xj, 0.0) - &p[i + 1] * c64(-xi, 0.0)) / c64(xi - xj, 0.0);
        }
    }
    p[0].clone()
}

fn psd_clamp(m: &CMat) -> CMat {
    matcore::hermitian_function(&matcore::hermitian_part(m), |x| c64(x.max(0.0), 0.0)).expect("Hermitian")
}

/// Recovers a measure on `[lo, hi]` from boundary values `B(x + iε)`.
///
/// Densities are `−(1/π)·Im B(x + iε)` extrapolated to `ε → 0` over `eps`;
/// atoms are peaks of `ε·‖Im B(x + iε)‖` whose weight `−ε·Im B(x₀ + iε)`
/// stabilizes as `ε` decreases.
pub fn perron_stieltjes_invert(
    ev: Evaluator,
    lo: f64,
    hi: f64,
    resolution: usize,
    eps: &[f64],
) -> Result<SpectralMeasure, StieltjesError> {
    if eps.len() < 2 || hi <= lo || resolution < 8 {
        return Err(StieltjesError::Extrapolation("need two or more eps values and a non-empty grid".into()));
    }
    let mut eps: Vec<f64> = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let e_min = *eps.last().expect("non-empty");
    let m = ev.dim();
    let h = (hi - lo) / resolution as f64;
    let grid: Vec<f64> = (0..=resolution).map(|k| lo + h * k as f64).collect();
    let im_at = |x: f64, e: f64| -> Result<CMat, StieltjesError> { Ok(matcore::anti_hermitian_part(&ev.eval(c64(x, e))?)) };

    // atoms
    let peak: Vec<f64> = grid.iter().map(|&x| im_at(x, e_min).map(|a| e_min * matcore::max_abs(&a))).collect::<Result<_, _>>()?;
    let mut atoms: Vec<Atom> = Vec::new();
    for k in 0..grid.len() {
        let left = if k > 0 { peak[k - 1] } else { 0.0 };
        let right = if k + 1 < grid.len() { peak[k + 1] } else { 0.0 };
        if peak[k] <= 1e-6 || peak[k] < left || peak[k] < right {
            continue;
        }
        let g = |x: f64| im_at(x, e_min).map(|a| -matcore::max_abs(&a)).unwrap_or(f64::INFINITY);
        let (mut a, mut b) = ((grid[k] - h).max(lo - h), (grid[k] + h).min(hi + h));
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
        let (mut fc, mut fd) = (g(c), g(d));
        for _ in 0..200 {
            if b - a <= 1e-13 * (1.0 + grid[k].abs()) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = g(d);
            }
        }
        let x0 = 0.5 * (a + b);
        let ws: Vec<CMat> = eps.iter().map(|&e| im_at(x0, e).map(|a| a * c64(-e, 0.0))).collect::<Result<_, _>>()?;
        let n = ws.len();
        let last = matcore::max_abs(&ws[n - 1]);
        let change = matcore::max_abs(&(&ws[n - 1] - &ws[n - 2]));
        if last <= 1e-6 || change > 0.05 * last {
            continue;
        }
        let w = psd_clamp(&extrapolate_to_zero(&eps, &ws));
        if atoms.iter().any(|at| (at.x - x0).abs() <= 2.0 * h) {
            continue;
        }
        atoms.push(Atom { x: x0, weight: w });
    }

    // densities, with the atoms' contributions removed
    let atoms_for_density = atoms.clone();
    let ev_density = ev.clone();
    let eps_density = eps.clone();
    let density = Arc::new(move |x: f64| -> CMat {
        let vals: Vec<CMat> = eps_density
            .iter()
            .map(|&e| {
                let z = c64(x, e);
                let mut b = ev_density.eval(z).unwrap_or_else(|_| CMat::zeros(m, m));
                for a in &atoms_for_density {
                    b -= &a.weight / (z - a.x);
                }
                matcore::anti_hermitian_part(&b) * c64(-1.0 / PI, 0.0)
            })
            .collect();
        psd_clamp(&extrapolate_to_zero(&eps_density, &vals))
    });
    let norms: Vec<f64> = grid.iter().map(|&x| matcore::max_abs(&density(x))).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let mut pieces = Vec::new();
    if top > 1e-10 {
        let thr = 1e-4 * top;
        let inside = |x: f64| matcore::max_abs(&density(x)) > thr;
        let refine = |mut a: f64, mut b: f64, a_in: bool| {
            for _ in 0..40 {
                let mid = 0.5 * (a + b);
                if inside(mid) == a_in {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        let mut k = 0;
        while k < grid.len() {
            if norms[k] <= thr {
                k += 1;
                continue;
            }
            let start = k;
            while k + 1 < grid.len() && norms[k + 1] > thr {
                k += 1;
            }
            let a = if start == 0 { lo } else { refine(grid[start - 1], grid[start], false) };
            let b = if k + 1 == grid.len() { hi } else { refine(grid[k], grid[k + 1], true) };
            if b > a {
                pieces.push(DensityPiece::with_estimated_exponents(a, b, density.clone()));
            }
            k += 1;
        }
    }
    let mut out = SpectralMeasure::new(m, atoms, pieces);
    out.tolerance = 1e-6;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Recurrent,
    Transient,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Recurrent => "recurrent",
            Verdict::Transient => "transient",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceVerdict {
    pub verdict: Verdict,
    /// `(ε, s(ε))` with `s(ε) = −Tr[unvec(Π₀ B(−ε) vec ρ)]`.
    pub samples: Vec<(f64, f64)>,
    /// Slope of `log s` against `log ε` over the last two decades.
    pub slope: f64,
}

/// The `ε` grid of the recurrence classifier: `10^{-2}, 10^{-2.5}, …, 10^{-8}`.
pub fn classifier_eps() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powf(-2.0 - 0.5 * k as f64)).collect()
}

/// Decides whether `−Tr[unvec(Π₀ B(z) vec ρ)]` diverges as `z ↑ 0`.
pub fn classify_recurrence(ev: &dyn Transform, pi0: &CMat, rho: &DensityOperator) -> Result<RecurrenceVerdict, StieltjesError> {
    if let Some(lb) = ev.support_lower_bound() {
        if lb < -1e-8 {
            return Err(StieltjesError::SupportBelowZero(lb));
        }
    }
    let d = rho.dim();
    if ev.dim() != d * d || pi0.nrows() != d * d {
        return Err(StieltjesError::Dimension(format!("transform of size {} for a {d}x{d} state", ev.dim())));
    }
    let v = matcore::vec(rho.matrix())?;
    let mut samples = Vec::new();
    for e in classifier_eps() {
        let b = ev.eval(c64(-e, 0.0))?;
        let w = matcore::unvec(&(pi0 * b * &v), d)?;
        let s = -w.trace().re;
        if s < -1e-9 * (1.0 + s.abs()) {
            return Err(StieltjesError::SupportBelowZero(-e));
        }
        samples.push((e, s));
    }
    let tail: Vec<(f64, f64)> = samples.iter().filter(|(e, _)| *e <= 1.000001e-6).map(|&(e, s)| (e.ln(), s.max(1e-300).ln())).collect();
    let n = tail.len() as f64;
    let (mx, my) = (tail.iter().map(|p| p.0).sum::<f64>() / n, tail.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let s_last = samples.last().expect("non-empty").1;
    let s_mid = samples.iter().find(|(e, _)| (*e - 1e-6).abs() < 1e-12).expect("1e-6 sample").1;
    let verdict = if slope < -0.1 || s_last > 1e6 {
        Verdict::Recurrent
    } else if (s_last - s_mid).abs() < 1e-3 * s_last.abs() {
        Verdict::Transient
    } else {
        Verdict::Indeterminate
    };
    Ok(RecurrenceVerdict { verdict, samples, slope })
}

/// `Λ̂_{ji}(s) = Π_j ∫ Q_j*(x) dΣ(x) Q_i(x) / (s + x)`.
pub fn laplace_transition(
    measure: &SpectralMeasure,
    polys: &PolynomialEvaluator,
    km_j: &CMat,
    j: usize,
    i: usize,
    s: f64,
) -> Result<CMat, StieltjesError> {
    if let Some(lb) = measure.support_lower_bound() {
        if s + lb <= 1e-12 {
            return Err(StieltjesError::OnSupport { re: -s, im: 0.0 });
        }
    }
    let top = j.max(i);
    let failure = std::sync::Mutex::new(None);
    let integral = measure.quadrature(|x, w| match polys.sequence(x, top) {
        Ok(q) => q[j].adjoint() * w * &q[i] / c64(s + x, 0.0),
        Err(e) => {
            *failure.lock().unwrap_or_else(|p| p.into_inner()) = Some(e);
            CMat::zeros(w.nrows(), w.ncols())
        }
    })?;
    if let Some(e) = failure.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e.into());
    }
    Ok(km_j * integral)
}

/// `f = (w₀ − m₀² (w₁ − m₁² f)^{-1})^{-1}` for a scalar two-periodic Jacobi chain
/// with diagonals `g0, g1` and off-diagonals `m0, m1` (w = z − g).
///
/// With `g0 = g1 = g` the fixed point solves
/// `m₁² w f² + (m₀² − m₁² − w²) f + w = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPeriodicDiagonal {
    pub g0: f64,
    pub g1: f64,
    pub m0: f64,
    pub m1: f64,
}

impl TwoPeriodicDiagonal {
    /// Root of `m₁² w₀ f² + (m₀² − m₁² − w₀w₁) f + w₁ = 0` that behaves like `1/z` at infinity.
    pub fn eval(&self, z: C64) -> Result<C64, StieltjesError> {
        let w0 = z - self.g0;
        let w1 = z - self.g1;
        let a = w0 * self.m1 * self.m1;
        let b = c64(self.m0 * self.m0 - self.m1 * self.m1, 0.0) - w0 * w1;
        if a.norm() == 0.0 {
            return Ok(-w1 / b);
        }
        let disc = (b * b - a * w1 * 4.0).sqrt();
        let r1 = (-b + disc) / (a * 2.0);
        let r2 = (-b - disc) / (a * 2.0);
        // the product of the roots is w₁/(m₁² w₀); the transform is the smaller root
        Ok(if r1.norm() <= r2.norm() { r1 } else { r2 })
    }

    /// Residual of the quadratic at `(z, f)`.
    pub fn quadratic_residual(&self, z: C64, f: C64) -> f64 {
        let w0 = z - self.g0;
        let w1 = z - self.g1;
        let m1 = self.m1 * self.m1;
        (w0 * m1 * f * f + (c64(self.m0 * self.m0 - m1, 0.0) - w0 * w1) * f + w1).norm()
    }
}
