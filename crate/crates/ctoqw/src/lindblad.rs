//! CTOQW models and their block tridiagonal generators.
//!
//! A site `n` carries operators `up(n)` (to `n+1`), `down(n)` (to `n-1`),
//! `stay(n)` and a Hamiltonian `hamiltonian(n)`. In the vec representation the
//! generator acts on the stacked site vectors with
//!
//! * diagonal block `G_n ⊗ I + I ⊗ conj(G_n) + ⌈stay(n)⌉`,
//!   where `G_n = −iH_n − ½ Σ R*R` over the operators leaving site `n`;
//! * lower block `(n+1, n) = ⌈up(n)⌉` and upper block `(n, n+1) = ⌈down(n+1)⌉`.
//!
//! Finite chains have reflecting or absorbing ends. An absorbing end keeps the
//! outward operator in the dissipation sum and drops its coupling.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dynamics::DensityOperator;
use crate::matcore::{self, c64, CMat, CVec, MatError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("operator {name} at site {site} has shape {rows}x{cols}, expected {d}x{d}")]
    Shape { name: &'static str, site: String, rows: usize, cols: usize, d: usize },
    #[error("hamiltonian at site {site} is not Hermitian (deviation {deviation:.3e})")]
    NonHermitianHamiltonian { site: String, deviation: f64 },
    #[error("site {0} is not in the vertex set")]
    SiteOutside(i64),
    #[error("empty or invalid window {0}..={1}")]
    EmptyWindow(i64, i64),
    #[error("internal dimension must be positive")]
    ZeroDimension,
    #[error("operation requires a {expected} model")]
    WrongVertexSet { expected: &'static str },
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Reflecting,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexSet {
    /// Sites `0..sites`.
    Finite { sites: usize, boundary: Boundary },
    /// Sites `0, 1, 2, …`.
    HalfLine,
    /// All integers.
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperators {
    pub up: CMat,
    pub down: CMat,
    pub stay: CMat,
    pub hamiltonian: CMat,
}

impl SiteOperators {
    pub fn zero(d: usize) -> Self {
        let z = matcore::zeros(d);
        SiteOperators { up: z.clone(), down: z.clone(), stay: z.clone(), hamiltonian: z }
    }

    /// Pure transitions `up`, `down`, no stay operator and no Hamiltonian.
    pub fn transitions(up: CMat, down: CMat) -> Self {
        let d = up.nrows();
        SiteOperators { up, down, stay: matcore::zeros(d), hamiltonian: matcore::zeros(d) }
    }
}

/// Per-site replacement of some of the bulk operators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteOverride {
    pub up: Option<CMat>,
    pub down: Option<CMat>,
    pub stay: Option<CMat>,
    pub hamiltonian: Option<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    d: usize,
    vertices: VertexSet,
    bulk: SiteOperators,
    overrides: BTreeMap<i64, SiteOverride>,
}

fn check_shape(name: &'static str, site: String, m: &CMat, d: usize) -> Result<(), ModelError> {
    if m.nrows() != d || m.ncols() != d {
        return Err(ModelError::Shape { name, site, rows: m.nrows(), cols: m.ncols(), d });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MatError::NonFinite.into());
    }
    Ok(())
}

fn check_hamiltonian(site: String, h: &CMat) -> Result<(), ModelError> {
    let deviation = matcore::hermitian_deviation(h);
    if deviation > 1e-12 * matcore::max_abs(h).max(1.0) {
        return Err(ModelError::NonHermitianHamiltonian { site, deviation });
    }
    Ok(())
}

impl Model {
    pub fn new(vertices: VertexSet, bulk: SiteOperators) -> Result<Self, ModelError> {
        let d = bulk.up.nrows();
        if d == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if let VertexSet::Finite { sites: 0, .. } = vertices {
            return Err(ModelError::EmptyWindow(0, -1));
        }
        for (name, m) in [("up", &bulk.up), ("down", &bulk.down), ("stay", &bulk.stay), ("hamiltonian", &bulk.hamiltonian)] {
            check_shape(name, "bulk".into(), m, d)?;
        }
        check_hamiltonian("bulk".into(), &bulk.hamiltonian)?;
        Ok(Model { d, vertices, bulk, overrides: BTreeMap::new() })
    }

    pub fn with_override(mut self, site: i64, o: SiteOverride) -> Result<Self, ModelError> {
        if !self.contains(site) {
            return Err(ModelError::SiteOutside(site));
        }
        let label = site.to_string();
        for (name, m) in [("up", &o.up), ("down", &o.down), ("stay", &o.stay), ("hamiltonian", &o.hamiltonian)] {
            if let Some(m) = m {
                check_shape(name, label.clone(), m, self.d)?;
            }
        }
        if let Some(h) = &o.hamiltonian {
            check_hamiltonian(label, h)?;
        }
        self.overrides.insert(site, o);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Block size `d²` of the vec representation.
    pub fn block_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn vertices(&self) -> VertexSet {
        self.vertices
    }

    pub fn bulk(&self) -> &SiteOperators {
        &self.bulk
    }

    pub fn overrides(&self) -> &BTreeMap<i64, SiteOverride> {
        &self.overrides
    }

    pub fn contains(&self, n: i64) -> bool {
        match self.vertices {
            VertexSet::Finite { sites, .. } => n >= 0 && (n as usize) < sites,
            VertexSet::HalfLine => n >= 0,
            VertexSet::Line => true,
        }
    }

    pub fn first_site(&self) -> Option<i64> {
        match self.vertices {
            VertexSet::Line => None,
            _ => Some(0),
        }
    }

    pub fn last_site(&self) -> Option<i64> {
        match self.vertices {
            VertexSet::Finite { sites, .. } => Some(sites as i64 - 1),
            _ => None,
        }
    }

    fn pick<'a>(&'a self, n: i64, f: impl Fn(&'a SiteOverride) -> &'a Option<CMat>, bulk: &'a CMat) -> &'a CMat {
        self.overrides.get(&n).and_then(|o| f(o).as_ref()).unwrap_or(bulk)
    }

    pub fn up(&self, n: i64) -> &CMat {
        self.pick(n, |o| &o.up, &self.bulk.up)
    }

    pub fn down(&self, n: i64) -> &CMat {
        self.pick(n, |o| &o.down, &self.bulk.down)
    }

    pub fn stay(&self, n: i64) -> &CMat {
        self.pick(n, |o| &o.stay, &self.bulk.stay)
    }

    pub fn hamiltonian(&self, n: i64) -> &CMat {
        self.pick(n, |o| &o.hamiltonian, &self.bulk.hamiltonian)
    }

    fn absorbing(&self) -> bool {
        matches!(self.vertices, VertexSet::Finite { boundary: Boundary::Absorbing, .. })
    }

    /// Whether `up(n)` contributes to the dissipation at site `n`.
    pub fn dissipates_up(&self, n: i64) -> bool {
        self.contains(n + 1) || (self.absorbing() && self.contains(n))
    }

    /// Whether `down(n)` contributes to the dissipation at site `n`.
    pub fn dissipates_down(&self, n: i64) -> bool {
        self.contains(n - 1) || (self.absorbing() && self.contains(n))
    }

    /// `G_n = −iH_n − ½ Σ R*R` over the operators acting at site `n`.
    pub fn effective_hamiltonian(&self, n: i64) -> Result<CMat, ModelError> {
        if !self.contains(n) {
            return Err(ModelError::SiteOutside(n));
        }
        let mut s = self.stay(n).adjoint() * self.stay(n);
        if self.dissipates_up(n) {
            s += self.up(n).adjoint() * self.up(n);
        }
        if self.dissipates_down(n) {
            s += self.down(n).adjoint() * self.down(n);
        }
        Ok(self.hamiltonian(n) * c64(0.0, -1.0) - s.scale(0.5))
    }

    /// Smallest and largest overridden sites.
    pub fn override_range(&self) -> Option<(i64, i64)> {
        Some((*self.overrides.keys().next()?, *self.overrides.keys().next_back()?))
    }
}

/// `G ⊗ I + I ⊗ conj(G)`.
pub fn g_alpha(g: &CMat) -> CMat {
    let i = matcore::identity(g.nrows());
    matcore::kron(g, &i) + matcore::kron(&i, &matcore::conj(g))
}

/// The three blocks of the generator associated with one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteBlocks {
    /// Coupling to site `n+1`, zero when that site is absent.
    pub a: CMat,
    /// Diagonal block.
    pub b: CMat,
    /// Coupling to site `n−1`, zero when that site is absent.
    pub c: CMat,
}

pub fn site_blocks(model: &Model, n: i64) -> Result<SiteBlocks, ModelError> {
    let g = model.effective_hamiltonian(n)?;
    let d2 = model.block_dim();
    let b = g_alpha(&g) + matcore::sandwich(model.stay(n))?;
    let a = if model.contains(n + 1) { matcore::sandwich(model.up(n))? } else { matcore::zeros(d2) };
    let c = if model.contains(n - 1) { matcore::sandwich(model.down(n))? } else { matcore::zeros(d2) };
    Ok(SiteBlocks { a, b, c })
}

/// Anything that yields the recurrence blocks `(A_n, B_n, C_n)` by site.
pub trait BlockSource: Send + Sync {
    fn block_dim(&self) -> usize;
    fn blocks(&self, n: i64) -> Result<SiteBlocks, ModelError>;
}

impl BlockSource for Model {
    fn block_dim(&self) -> usize {
        Model::block_dim(self)
    }

    fn blocks(&self, n: i64) -> Result<SiteBlocks, ModelError> {
        site_blocks(self, n)
    }
}

/// Half-line coefficients given by explicit head blocks and a constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineBlocks {
    pub head: Vec<SiteBlocks>,
    pub tail: SiteBlocks,
}

impl HalfLineBlocks {
    pub fn at(&self, n: usize) -> &SiteBlocks {
        self.head.get(n).unwrap_or(&self.tail)
    }
}

impl BlockSource for HalfLineBlocks {
    fn block_dim(&self) -> usize {
        self.tail.b.nrows()
    }

    fn blocks(&self, n: i64) -> Result<SiteBlocks, ModelError> {
        if n < 0 {
            return Err(ModelError::SiteOutside(n));
        }
        let mut s = self.at(n as usize).clone();
        if n == 0 {
            s.c = matcore::zeros(s.c.nrows());
        }
        Ok(s)
    }
}

fn interior_tail(model: &Model) -> Result<SiteBlocks, ModelError> {
    let far = match model.vertices {
        VertexSet::Line => model.override_range().map_or(0, |(_, hi)| hi.max(0)) + 2,
        _ => model.override_range().map_or(0, |(_, hi)| hi.max(0)) + 2,
    };
    site_blocks(model, far)
}

/// Coefficients of a half-line model, homogeneous beyond its overrides.
pub fn half_line_blocks(model: &Model) -> Result<HalfLineBlocks, ModelError> {
    if model.vertices != VertexSet::HalfLine {
        return Err(ModelError::WrongVertexSet { expected: "half-line" });
    }
    let last = model.override_range().map_or(0, |(_, hi)| hi.max(0));
    let head = (0..=last).map(|n| site_blocks(model, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(HalfLineBlocks { head, tail: interior_tail(model)? })
}

/// The sites `0, 1, 2, …` of a line model with their line diagonal blocks.
pub fn line_restriction_plus(model: &Model) -> Result<HalfLineBlocks, ModelError> {
    if model.vertices != VertexSet::Line {
        return Err(ModelError::WrongVertexSet { expected: "line" });
    }
    let last = model.override_range().map_or(0, |(_, hi)| hi.max(0));
    let head = (0..=last).map(|n| site_blocks(model, n)).collect::<Result<Vec<_>, _>>()?;
    Ok(HalfLineBlocks { head, tail: interior_tail(model)? })
}

/// The sites `−1, −2, …` of a line model relabelled `k = −1 − n`.
///
/// Moving up in `k` is moving down on the line, so the roles of the
/// couplings swap: `A'_k = C_{−1−k}` and `C'_k = A_{−1−k}`.
pub fn line_restriction_minus(model: &Model) -> Result<HalfLineBlocks, ModelError> {
    if model.vertices != VertexSet::Line {
        return Err(ModelError::WrongVertexSet { expected: "line" });
    }
    let last = model.override_range().map_or(0, |(lo, _)| (-1 - lo).max(0));
    let mirror = |k: i64| -> Result<SiteBlocks, ModelError> {
        let s = site_blocks(model, -1 - k)?;
        Ok(SiteBlocks { a: s.c, b: s.b, c: s.a })
    };
    let head = (0..=last).map(mirror).collect::<Result<Vec<_>, _>>()?;
    let far = model.override_range().map_or(0, |(lo, _)| lo.min(0)) - 2;
    let s = site_blocks(model, far)?;
    Ok(HalfLineBlocks { head, tail: SiteBlocks { a: s.c, b: s.b, c: s.a } })
}

/// Block tridiagonal matrix over consecutive sites `first_site, first_site+1, …`.
///
/// `lower[k]` is the block at `(k+1, k)` and `upper[k]` the block at `(k, k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub block_dim: usize,
    pub first_site: i64,
    pub diag: Vec<CMat>,
    pub lower: Vec<CMat>,
    pub upper: Vec<CMat>,
}

impl BlockTridiagonal {
    pub fn sites(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.sites()
    }

    pub fn last_site(&self) -> i64 {
        self.first_site + self.sites() as i64 - 1
    }

    /// Position of `site` inside the window.
    pub fn local(&self, site: i64) -> Option<usize> {
        let k = site - self.first_site;
        (k >= 0 && (k as usize) < self.sites()).then_some(k as usize)
    }

    pub fn to_dense(&self) -> CMat {
        let m = self.block_dim;
        let mut out = CMat::zeros(self.dim(), self.dim());
        for (k, d) in self.diag.iter().enumerate() {
            out.view_mut((k * m, k * m), (m, m)).copy_from(d);
        }
        for (k, l) in self.lower.iter().enumerate() {
            out.view_mut(((k + 1) * m, k * m), (m, m)).copy_from(l);
        }
        for (k, u) in self.upper.iter().enumerate() {
            out.view_mut((k * m, (k + 1) * m), (m, m)).copy_from(u);
        }
        out
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let m = self.block_dim;
        let n = self.sites();
        let mut y = CVec::zeros(self.dim());
        for k in 0..n {
            let mut acc = &self.diag[k] * x.rows(k * m, m);
            if k > 0 {
                acc += &self.lower[k - 1] * x.rows((k - 1) * m, m);
            }
            if k + 1 < n {
                acc += &self.upper[k] * x.rows((k + 1) * m, m);
            }
            y.rows_mut(k * m, m).copy_from(&acc);
        }
        y
    }

    /// Upper bound for the spectral norm, `max(‖·‖₁, ‖·‖∞)` computed blockwise.
    pub fn norm_bound(&self) -> f64 {
        let m = self.block_dim;
        let n = self.sites();
        let mut rows = vec![0.0; self.dim()];
        let mut cols = vec![0.0; self.dim()];
        let mut add = |blk: &CMat, r0: usize, c0: usize| {
            for i in 0..m {
                for j in 0..m {
                    let v = blk[(i, j)].norm();
                    rows[r0 + i] += v;
                    cols[c0 + j] += v;
                }
            }
        };
        for k in 0..n {
            add(&self.diag[k], k * m, k * m);
            if k + 1 < n {
                add(&self.lower[k], (k + 1) * m, k * m);
                add(&self.upper[k], k * m, (k + 1) * m);
            }
        }
        rows.iter().chain(cols.iter()).cloned().fold(0.0, f64::max)
    }

    /// Vector that equals `v` on `site` and vanishes elsewhere.
    pub fn embed(&self, site: i64, v: &CVec) -> Option<CVec> {
        let k = self.local(site)?;
        let mut out = CVec::zeros(self.dim());
        out.rows_mut(k * self.block_dim, self.block_dim).copy_from(v);
        Some(out)
    }

    pub fn block_of(&self, x: &CVec, site: i64) -> Option<CVec> {
        let k = self.local(site)?;
        Some(x.rows(k * self.block_dim, self.block_dim).into_owned())
    }

    /// `e^{tL} x` through the sparse block action.
    pub fn expm_action(&self, x: &CVec, t: f64) -> Result<CVec, MatError> {
        matcore::expm_action_op(|v| self.apply(v), self.norm_bound(), x, t)
    }
}

/// Generator restricted to the sites `lo..=hi`; couplings leaving the window are dropped.
pub fn assemble(model: &Model, lo: i64, hi: i64) -> Result<BlockTridiagonal, ModelError> {
    if hi < lo {
        return Err(ModelError::EmptyWindow(lo, hi));
    }
    for s in [lo, hi] {
        if !model.contains(s) {
            return Err(ModelError::SiteOutside(s));
        }
    }
    let mut diag = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for n in lo..=hi {
        let s = site_blocks(model, n)?;
        diag.push(s.b);
        if n < hi {
            lower.push(s.a);
        }
        if n > lo {
            upper.push(s.c);
        }
    }
    Ok(BlockTridiagonal { block_dim: model.block_dim(), first_site: lo, diag, lower, upper })
}

/// Generator of a line model on the window `−sites..=sites−1`, folded onto
/// `sites` sites whose state is the pair `(x_n, x_{−n−1})`.
pub fn assemble_folded(model: &Model, sites: usize) -> Result<BlockTridiagonal, ModelError> {
    if model.vertices != VertexSet::Line {
        return Err(ModelError::WrongVertexSet { expected: "line" });
    }
    if sites == 0 {
        return Err(ModelError::EmptyWindow(0, -1));
    }
    let m = model.block_dim();
    let z = matcore::zeros(m);
    let pair = |p: &CMat, q: &CMat, r: &CMat, s: &CMat| {
        let mut out = CMat::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(p);
        out.view_mut((0, m), (m, m)).copy_from(q);
        out.view_mut((m, 0), (m, m)).copy_from(r);
        out.view_mut((m, m), (m, m)).copy_from(s);
        out
    };
    let mut diag = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for n in 0..sites as i64 {
        let pos = site_blocks(model, n)?;
        let neg = site_blocks(model, -n - 1)?;
        if n == 0 {
            diag.push(pair(&pos.b, &neg.a, &pos.c, &neg.b));
        } else {
            diag.push(pair(&pos.b, &z, &z, &neg.b));
        }
        if n + 1 < sites as i64 {
            lower.push(pair(&pos.a, &z, &z, &neg.c));
            let pos1 = site_blocks(model, n + 1)?;
            let neg1 = site_blocks(model, -n - 2)?;
            upper.push(pair(&pos1.c, &z, &z, &neg1.a));
        }
    }
    Ok(BlockTridiagonal { block_dim: 2 * m, first_site: 0, diag, lower, upper })
}

/// Outcome of the negativity test for one diagonal block.
#[derive(Debug, Clone, PartialEq)]
pub struct NsdReport {
    pub site: i64,
    pub negative_semidefinite: bool,
    pub max_eigenvalue: f64,
    pub hermitian_deviation: f64,
    /// Largest violation of the Hamiltonian consistency relations.
    pub certificate_residual: f64,
    pub certificate_holds: bool,
}

/// Tests `G_n^α + ⌈B_n⌉ ≤ 0` and evaluates the Hamiltonian consistency relations
/// `h_kk = −b_kk`, `h_jk = −i(s_jk − a_jk − i b_jk)` in an eigenbasis of the block.
pub fn check_negative_semidefinite_diagonal(model: &Model, n: i64) -> Result<NsdReport, ModelError> {
    let t = site_blocks(model, n)?.b;
    let scale = matcore::max_abs(&t).max(1.0);
    let hermitian_deviation = matcore::hermitian_deviation(&t);
    let (values, v) = matcore::eig_hermitian(&matcore::hermitian_part(&t))?;
    let max_eigenvalue = values.last().copied().unwrap_or(0.0);

    let d = model.d();
    let i = matcore::identity(d);
    let h = model.hamiltonian(n);
    let h_alpha = -matcore::kron(h, &i) + matcore::kron(&i, &matcore::conj(h));
    let g = model.effective_hamiltonian(n)?;
    let s_half = -(g.clone() + g.adjoint()).scale(0.5);
    let s_alpha = matcore::kron(&s_half, &i) + matcore::kron(&i, &matcore::conj(&s_half));
    let b_alpha = matcore::sandwich(model.stay(n))?;
    let hv = v.adjoint() * h_alpha * &v;
    let sv = v.adjoint() * s_alpha * &v;
    let bv = v.adjoint() * b_alpha * &v;
    let mut residual: f64 = 0.0;
    for j in 0..hv.nrows() {
        for k in 0..hv.ncols() {
            let (a, b) = (bv[(j, k)].re, bv[(j, k)].im);
            let r = if j == k {
                (hv[(k, k)] + c64(b, 0.0)).norm()
            } else {
                (hv[(j, k)] + c64(0.0, 1.0) * (sv[(j, k)] - c64(a, b))).norm()
            };
            residual = residual.max(r);
        }
    }
    let hermitian = hermitian_deviation <= 1e-10 * scale;
    Ok(NsdReport {
        site: n,
        negative_semidefinite: hermitian && max_eigenvalue <= 1e-10 * scale,
        max_eigenvalue,
        hermitian_deviation,
        certificate_residual: residual,
        certificate_holds: residual <= 1e-10 * scale,
    })
}

/// Sum of `Tr(unvec(x_k))` over the site blocks of `x`.
pub fn total_trace(bt: &BlockTridiagonal, x: &CVec, d: usize) -> f64 {
    (0..bt.sites())
        .map(|k| {
            let blk = x.rows(k * bt.block_dim, bt.block_dim);
            (0..d).map(|i| blk[i * d + i].re).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub total_trace: f64,
    pub site_traces: Vec<(i64, f64)>,
    /// Smallest eigenvalue over all evolved site blocks.
    pub min_eigenvalue: f64,
}

/// Evolves `ρ ⊗ |site⟩⟨site|` on the window and reports traces and positivity.
pub fn validate_trace_dynamics(
    model: &Model,
    lo: i64,
    hi: i64,
    rho: &DensityOperator,
    site: i64,
    t: f64,
) -> Result<TraceReport, ModelError> {
    let bt = assemble(model, lo, hi)?;
    let d = model.d();
    let v0 = bt.embed(site, &matcore::vec(rho.matrix())?).ok_or(ModelError::SiteOutside(site))?;
    let v = bt.expm_action(&v0, t)?;
    let mut site_traces = Vec::new();
    let mut min_eigenvalue = f64::INFINITY;
    for n in lo..=hi {
        let blk = matcore::unvec(&bt.block_of(&v, n).expect("site in window"), d)?;
        site_traces.push((n, blk.trace().re));
        let (vals, _) = matcore::eig_hermitian(&matcore::hermitian_part(&blk))?;
        min_eigenvalue = min_eigenvalue.min(vals[0]);
    }
    Ok(TraceReport { total_trace: site_traces.iter().map(|x| x.1).sum(), site_traces, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag_real, max_abs};

    fn diag_model(vertices: VertexSet, a: [f64; 2], c: [f64; 2]) -> Model {
        Model::new(vertices, SiteOperators::transitions(diag_real(&a), diag_real(&c))).unwrap()
    }

    #[test]
    fn interior_and_first_site_blocks_of_diagonal_half_line() {
        let (a1, a2, c1, c2) = (1.0, 2.0, 3.0, 5.0);
        let m = diag_model(VertexSet::HalfLine, [a1, a2], [c1, c2]);
        let s1 = a1 * a1 + c1 * c1;
        let s2 = a2 * a2 + c2 * c2;
        let b = site_blocks(&m, 3).unwrap().b;
        assert!(max_abs(&(b + diag_real(&[s1, (s1 + s2) / 2.0, (s1 + s2) / 2.0, s2]))) < 1e-14);
        let b0 = site_blocks(&m, 0).unwrap().b;
        let t = a1 * a1 + a2 * a2;
        assert!(max_abs(&(b0 + diag_real(&[a1 * a1, t / 2.0, t / 2.0, a2 * a2]))) < 1e-14);
        assert!(site_blocks(&m, -1).is_err());
    }

    #[test]
    fn zero_model_has_zero_blocks() {
        let m = Model::new(VertexSet::Line, SiteOperators::zero(2)).unwrap();
        let s = site_blocks(&m, 0).unwrap();
        assert_eq!(max_abs(&s.a) + max_abs(&s.b) + max_abs(&s.c), 0.0);
    }

    #[test]
    fn single_site_window() {
        let m = diag_model(VertexSet::Finite { sites: 1, boundary: Boundary::Reflecting }, [1.0, 2.0], [1.0, 1.0]);
        let bt = assemble(&m, 0, 0).unwrap();
        assert_eq!(bt.sites(), 1);
        assert_eq!(max_abs(&bt.diag[0]), 0.0);
        assert!(assemble(&m, 1, 0).is_err());
    }

    #[test]
    fn window_doubling_is_local() {
        let m = diag_model(VertexSet::HalfLine, [1.0, 0.5], [0.7, 1.1]);
        let small = assemble(&m, 0, 5).unwrap().to_dense();
        let big = assemble(&m, 0, 11).unwrap().to_dense();
        assert_eq!(big.view((0, 0), (small.nrows(), small.ncols())).into_owned(), small);
    }

    #[test]
    fn absorbing_ends_leak_reflecting_ends_do_not() {
        let rho = DensityOperator::new(matcore::identity(2).scale(0.5)).unwrap();
        let refl = diag_model(VertexSet::Finite { sites: 3, boundary: Boundary::Reflecting }, [1.0, 2.0], [1.5, 0.5]);
        let abs = diag_model(VertexSet::Finite { sites: 3, boundary: Boundary::Absorbing }, [1.0, 2.0], [1.5, 0.5]);
        let r0 = validate_trace_dynamics(&refl, 0, 2, &rho, 1, 0.0).unwrap();
        assert_eq!(r0.total_trace, 1.0);
        let mut last = 1.0;
        for t in [0.5, 1.0, 2.0] {
            let r = validate_trace_dynamics(&refl, 0, 2, &rho, 1, t).unwrap();
            assert!((r.total_trace - 1.0).abs() < 1e-9);
            assert!(r.min_eigenvalue > -1e-9);
            let a = validate_trace_dynamics(&abs, 0, 2, &rho, 1, t).unwrap();
            assert!(a.total_trace < last);
            last = a.total_trace;
        }
    }

    #[test]
    fn folded_window_matches_line_window() {
        let m = diag_model(VertexSet::Line, [1.0, 0.5], [0.7, 1.1]);
        let f = assemble_folded(&m, 3).unwrap();
        let l = assemble(&m, -3, 2).unwrap();
        let x = CVec::from_fn(l.dim(), |i, _| c64(i as f64 * 0.1, 1.0 - i as f64 * 0.01));
        let y = l.apply(&x);
        let m4 = 4;
        let fold = |v: &CVec| {
            let mut out = CVec::zeros(v.len());
            for n in 0..3usize {
                let p = (n + 3) * m4;
                let q = (2 - n) * m4;
                out.rows_mut(2 * n * m4, m4).copy_from(&v.rows(p, m4));
                out.rows_mut((2 * n + 1) * m4, m4).copy_from(&v.rows(q, m4));
            }
            out
        };
        let diff = f.apply(&fold(&x)) - fold(&y);
        assert!(diff.norm() < 1e-13);
    }

    #[test]
    fn hamiltonian_must_be_hermitian() {
        let mut ops = SiteOperators::zero(2);
        ops.hamiltonian[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(Model::new(VertexSet::Line, ops), Err(ModelError::NonHermitianHamiltonian { .. })));
    }

    #[test]
    fn nsd_for_diagonal_and_trivial_models() {
        let m = diag_model(VertexSet::HalfLine, [1.0, 2.0], [1.5, 0.5]);
        let r = check_negative_semidefinite_diagonal(&m, 2).unwrap();
        assert!(r.negative_semidefinite && r.certificate_holds);
        let z = Model::new(VertexSet::HalfLine, SiteOperators::zero(2)).unwrap();
        let r = check_negative_semidefinite_diagonal(&z, 0).unwrap();
        assert!(r.negative_semidefinite && r.certificate_holds);
    }
}
