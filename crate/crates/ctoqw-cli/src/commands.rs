use std::path::{Path, PathBuf};
use std::sync::Arc;

use ctoqw::dynamics::{half_line_spectral, line_fold_transforms, line_spectral, p_direct, p_km, p_line_km, DensityOperator};
use ctoqw::lindblad::{assemble, half_line_blocks, Model, VertexSet};
use ctoqw::matcore::{c64, eig_hermitian, CMat};
use ctoqw::modelfile::{load_model, load_state};
use ctoqw::orthopoly::{check_dette, compute_symmetrizers, symmetrized_dense, SymmetrizerChain};
use ctoqw::spectral::{finite_spectral_measure, SpectralMeasure};
use ctoqw::stieltjes::{classify_recurrence, Evaluator, HalfLineResolvent, MeasureTransform, RecurrenceVerdict, Verdict};

use crate::{num, sink, Exit, Method};

fn load(path: &Path) -> Result<Arc<Model>, Exit> {
    let file = load_model(path)?;
    if let Some(d) = &file.description {
        eprintln!("model: {d}");
    }
    Ok(Arc::new(file.model))
}

/// Site range of the finite window used for `model`.
fn window_of(model: &Model, window: Option<usize>) -> Result<(i64, i64), Exit> {
    match (model.vertices(), window) {
        (VertexSet::Finite { sites, .. }, w) => Ok((0, w.unwrap_or(sites).min(sites) as i64 - 1)),
        (VertexSet::HalfLine, Some(n)) if n > 0 => Ok((0, n as i64 - 1)),
        (VertexSet::Line, Some(n)) if n > 0 => Ok((-(n as i64), n as i64 - 1)),
        _ => Err(Exit::parse("infinite models need --window N with N > 0")),
    }
}

fn certify(model: &Model, lo: i64, hi: i64) -> Result<(), Exit> {
    let report = check_dette(model, lo, hi);
    match report.failure {
        None => Ok(()),
        Some(e) => {
            let site = e.site().map(|s| format!(" (first failure at site {s})")).unwrap_or_default();
            Err(Exit::uncertified(format!("{e}{site}")))
        }
    }
}

fn window_operator(model: &Model, lo: i64, hi: i64) -> Result<CMat, Exit> {
    certify(model, lo, hi)?;
    let chain = compute_symmetrizers(model, lo, hi)?;
    let bt = assemble(model, lo, hi).map_err(|e| Exit::other(e.to_string()))?;
    Ok(symmetrized_dense(&bt, &chain)?)
}

pub fn spectrum(path: &Path, window: Option<usize>, out: &Option<PathBuf>) -> Result<(), Exit> {
    let model = load(path)?;
    let (lo, hi) = window_of(&model, window)?;
    let j = window_operator(&model, lo, hi)?;
    let (mut vals, _) = eig_hermitian(&j).map_err(|e| Exit::other(e.to_string()))?;
    vals.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for v in vals {
        match groups.last_mut() {
            Some((x, n)) if (v - *x).abs() <= 1e-8 * (1.0 + x.abs()) => {
                *x = (*x * *n as f64 + v) / (*n + 1) as f64;
                *n += 1;
            }
            _ => groups.push((v, 1)),
        }
    }
    let mut w = sink(out)?;
    w.write_record(["eigenvalue", "multiplicity"])?;
    for (x, n) in &groups {
        w.write_record([num(*x), n.to_string()])?;
    }
    w.flush()?;
    eprintln!("sites {lo}..={hi}: {} distinct eigenvalues of -L", groups.len());
    Ok(())
}

fn interior_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..n).map(|k| mid - rad * (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()).collect()
}

fn write_measure(measure: &SpectralMeasure, grid: usize, out: &Option<PathBuf>) -> Result<(), Exit> {
    let mut w = sink(out)?;
    w.write_record(["kind", "index", "x", "row", "col", "re", "im"])?;
    let mut entry = |kind: &str, index: usize, x: f64, m: &CMat| -> Result<(), Exit> {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                w.write_record([kind.to_string(), index.to_string(), num(x), r.to_string(), c.to_string(), num(z.re), num(z.im)])?;
            }
        }
        Ok(())
    };
    for (k, a) in measure.atoms.iter().enumerate() {
        entry("atom", k, a.x, &a.weight)?;
    }
    for (k, p) in measure.pieces.iter().enumerate() {
        eprintln!("density {k}: [{}, {}], endpoint exponents {} and {}", p.lo, p.hi, p.lo_exponent.value(), p.hi_exponent.value());
        for x in interior_grid(p.lo, p.hi, grid) {
            entry("density", k, x, &(p.density)(x))?;
        }
    }
    w.flush()?;
    eprintln!("{} atoms, {} density intervals", measure.atoms.len(), measure.pieces.len());
    Ok(())
}

pub fn weights(path: &Path, window: Option<usize>, grid: usize, out: &Option<PathBuf>) -> Result<(), Exit> {
    let model = load(path)?;
    let measure = match (model.vertices(), window) {
        (VertexSet::Finite { .. }, _) | (_, Some(_)) => {
            let (lo, hi) = window_of(&model, window)?;
            if lo != 0 {
                eprintln!("weights at the first site of the window, {lo}");
            }
            let j = window_operator(&model, lo, hi)?;
            finite_spectral_measure(&j, model.block_dim()).map_err(|e| Exit::other(e.to_string()))?
        }
        (VertexSet::HalfLine, None) => {
            certify(&model, 0, half_line_head(&model)? + 3)?;
            half_line_spectral(&model)?.measure
        }
        (VertexSet::Line, None) => line_spectral(&model)?.measure,
    };
    write_measure(&measure, grid, out)
}

fn half_line_head(model: &Model) -> Result<i64, Exit> {
    Ok(half_line_blocks(model).map_err(|e| Exit::other(e.to_string()))?.head.len() as i64)
}

pub fn probability(
    path: &Path,
    from: i64,
    to: i64,
    rho: &Path,
    times: &[f64],
    method: Method,
    out: &Option<PathBuf>,
) -> Result<(), Exit> {
    let model = load(path)?;
    let rho = load_state(rho).map_err(|e| Exit::bad_state(e.to_string()))?;
    if rho.dim() != model.d() {
        return Err(Exit::bad_state(format!("rho is {0}x{0} but the model has internal dimension {1}", rho.dim(), model.d())));
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Exit::parse("times must be non-negative"));
    }
    let km: Option<Box<dyn Fn(f64) -> Result<f64, Exit>>> = if method == Method::Direct {
        None
    } else if model.vertices() == VertexSet::Line {
        let spec = line_spectral(&model)?;
        let rho = rho.clone();
        Some(Box::new(move |t| Ok(p_line_km(&spec.measure, &spec.folded, &spec.chain, to, from, &rho, t)?)))
    } else {
        if from < 0 || to < 0 {
            return Err(Exit::other("sites of finite and half-line models are non-negative"));
        }
        if model.vertices() == VertexSet::HalfLine {
            certify(&model, 0, half_line_head(&model)? + 3)?;
        }
        let spec = half_line_spectral(&model)?;
        let rho = rho.clone();
        Some(Box::new(move |t| Ok(p_km(&spec.measure, &spec.polys, &spec.chain, to as usize, from as usize, &rho, t)?)))
    };
    let mut w = sink(out)?;
    let mut header = vec!["t"];
    if km.is_some() {
        header.push("p_km");
    }
    if method != Method::Km {
        header.push("p_direct");
    }
    if method == Method::Both {
        header.push("abs_diff");
    }
    w.write_record(&header)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let mut row = vec![num(t)];
        let k = km.as_ref().map(|f| f(t)).transpose()?;
        if let Some(k) = k {
            row.push(num(k));
        }
        if method != Method::Km {
            let d = p_direct(&model, to, from, &rho, t)?;
            if !d.converged {
                eprintln!("warning: direct window {:?} did not settle at t = {t} (last change {:.1e})", d.window, d.delta);
            }
            row.push(num(d.value));
            if let Some(k) = k {
                let diff = (k - d.value).abs();
                worst = worst.max(diff);
                row.push(num(diff));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    if method == Method::Both {
        eprintln!("max |p_km - p_direct| = {worst:.3e}");
    }
    Ok(())
}

fn line_chain(model: &Model) -> Result<SymmetrizerChain, Exit> {
    let (olo, ohi) = model.override_range().unwrap_or((0, 0));
    let (lo, hi) = (olo.min(-1) - 3, ohi.max(0) + 3);
    certify(model, lo, hi)?;
    Ok(compute_symmetrizers(model, lo, hi)?)
}

/// Transform and Gram block used to classify `site`.
fn recurrence_transform(model: &Arc<Model>, site: i64) -> Result<(Evaluator, CMat), Exit> {
    let m = model.block_dim();
    let identity = CMat::identity(m, m);
    match model.vertices() {
        VertexSet::Line => {
            let chain = line_chain(model)?;
            let ft = line_fold_transforms(model, &chain)?;
            match site {
                0 => Ok((ft.w11, identity)),
                -1 => Ok((ft.w22, chain.km_norm(-1).ok_or_else(|| Exit::other("no Gram block at site -1"))?)),
                _ => Err(Exit::parse("line models are classified at site 0 or -1")),
            }
        }
        _ if site != 0 => Err(Exit::parse("finite and half-line models are classified at site 0")),
        VertexSet::HalfLine => {
            certify(model, 0, half_line_head(model)? + 3)?;
            let blocks = half_line_blocks(model).map_err(|e| Exit::other(e.to_string()))?;
            Ok((Arc::new(HalfLineResolvent::new(blocks)), identity))
        }
        VertexSet::Finite { .. } => Ok((Arc::new(MeasureTransform::new(half_line_spectral(model)?.measure)), identity)),
    }
}

/// The first `k` of: basis states `e0`, `e1`, the maximally mixed state, then
/// states spread over the Bloch ball of the first two levels.
fn scan_states(d: usize, k: usize) -> Vec<(String, DensityOperator)> {
    let mut out = vec![("e0".to_string(), DensityOperator::pure(d, 0))];
    if d > 1 {
        out.push(("e1".to_string(), DensityOperator::pure(d, 1)));
    }
    out.push(("mixed".to_string(), DensityOperator::maximally_mixed(d)));
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rest = k.saturating_sub(out.len());
    for n in 0..rest {
        if d < 2 {
            break;
        }
        let z = 1.0 - 2.0 * (n as f64 + 0.5) / rest as f64;
        let r = if n % 2 == 0 { 1.0 } else { 0.5 };
        let phi = golden * n as f64;
        let s = (1.0 - z * z).sqrt();
        let (x, y, z) = (r * s * phi.cos(), r * s * phi.sin(), r * z);
        let mut m = CMat::zeros(d, d);
        m[(0, 0)] = c64((1.0 + z) / 2.0, 0.0);
        m[(1, 1)] = c64((1.0 - z) / 2.0, 0.0);
        m[(0, 1)] = c64(x / 2.0, -y / 2.0);
        m[(1, 0)] = c64(x / 2.0, y / 2.0);
        if let Ok(rho) = DensityOperator::new(m) {
            out.push((format!("bloch({x:.4} {y:.4} {z:.4})"), rho));
        }
    }
    out.truncate(k);
    out
}

pub fn recurrence(path: &Path, rho: Option<&Path>, scan: Option<usize>, site: i64, out: &Option<PathBuf>) -> Result<(), Exit> {
    let model = load(path)?;
    let d = model.d();
    let states = match (rho, scan) {
        (Some(p), _) => {
            let r = load_state(p).map_err(|e| Exit::bad_state(e.to_string()))?;
            if r.dim() != d {
                return Err(Exit::bad_state(format!("rho is {0}x{0} but the model has internal dimension {d}", r.dim())));
            }
            vec![(p.display().to_string(), r)]
        }
        (None, Some(k)) => scan_states(d, k),
        (None, None) => scan_states(d, 3),
    };
    let (ev, pi0) = recurrence_transform(&model, site)?;
    let mut w = sink(out)?;
    w.write_record(["state", "verdict", "slope", "s_at_smallest_eps"])?;
    let mut verdicts: Vec<(String, RecurrenceVerdict)> = Vec::new();
    for (label, r) in states {
        let v = classify_recurrence(ev.as_ref(), &pi0, &r)?;
        let last = v.samples.last().map(|s| s.1).unwrap_or(f64::NAN);
        w.write_record([label.clone(), v.verdict.to_string(), num(v.slope), num(last)])?;
        verdicts.push((label, v));
    }
    w.flush()?;
    if let [(label, v)] = verdicts.as_slice() {
        eprintln!("{label}: {} (slope {:.3})", v.verdict, v.slope);
        eprintln!("{:>12}  {:>14}", "eps", "s(eps)");
        for (e, s) in &v.samples {
            eprintln!("{e:>12.3e}  {s:>14.6e}");
        }
    } else {
        for verdict in [Verdict::Recurrent, Verdict::Transient, Verdict::Indeterminate] {
            let labels: Vec<&str> = verdicts.iter().filter(|(_, v)| v.verdict == verdict).map(|(l, _)| l.as_str()).collect();
            eprintln!("{verdict}: {} of {}{}", labels.len(), verdicts.len(), canonical(&labels));
        }
    }
    Ok(())
}

fn canonical(labels: &[&str]) -> String {
    let named: Vec<&str> = labels.iter().copied().filter(|l| matches!(*l, "e0" | "e1" | "mixed")).collect();
    if named.is_empty() {
        String::new()
    } else {
        format!(" (including {})", named.join(", "))
    }
}

pub fn fold(path: &Path, grid: &[f64], check: Option<(usize, f64)>, out: &Option<PathBuf>) -> Result<(), Exit> {
    let model = load(path)?;
    if model.vertices() != VertexSet::Line {
        return Err(Exit::parse("fold needs a line model (vertices.kind = \"line\")"));
    }
    if let Some(z) = grid.iter().find(|z| **z >= 0.0) {
        return Err(Exit::parse(format!("fold samples z < 0, got {z}")));
    }
    let chain = line_chain(&model)?;
    let ft = line_fold_transforms(&model, &chain)?;
    let mut w = sink(out)?;
    w.write_record(["z", "block", "row", "col", "re", "im"])?;
    for &z in grid {
        for (name, ev) in [("W11", &ft.w11), ("W12", &ft.w12), ("W21", &ft.w21), ("W22", &ft.w22)] {
            let m = ev.eval(c64(z, 0.0))?;
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let v = m[(r, c)];
                    w.write_record([num(z), name.to_string(), r.to_string(), c.to_string(), num(v.re), num(v.im)])?;
                }
            }
        }
    }
    w.flush()?;
    if let Some((sites, t)) = check {
        let dev = ctoqw::dynamics::fold_block_identity(&model, sites, t)?;
        eprintln!("fold check: max deviation {dev:.3e} on sites -{sites}..{} at t = {t}", sites as i64 - 1);
        if dev > 1e-6 {
            return Err(Exit::check(format!("folded and unfolded semigroups differ by {dev:.3e} > 1e-6")));
        }
    }
    Ok(())
}
