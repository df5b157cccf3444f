//! `reproduce-all`: closed-form regressions on the bundled example models.

use std::sync::Arc;

use ctoqw::catalog;
use ctoqw::dynamics::{fold_block_identity, half_line_spectral, line_fold_transforms, line_spectral, p_direct, p_km, p_line_km, DensityOperator};
use ctoqw::lindblad::{assemble, half_line_blocks, Model};
use ctoqw::matcore::{c64, eig_hermitian, max_abs, CMat};
use ctoqw::modelfile::parse_model;
use ctoqw::orthopoly::{compute_symmetrizers, symmetrized_dense};
use ctoqw::stieltjes::{classify_recurrence, HalfLineResolvent, Transform, TwoPeriodicDiagonal, Verdict};
use ctoqw::C64;

use crate::Exit;

const NONCOMMUTING: &str = include_str!("../../../models/noncommuting_finite.toml");
const DIAGONAL_HALF_LINE: &str = include_str!("../../../models/diagonal_half_line.toml");
const DIAGONAL_LINE: &str = include_str!("../../../models/diagonal_line.toml");
const PERTURBED_HALF_LINE: &str = include_str!("../../../models/perturbed_half_line.toml");
const PERTURBED_LINE: &str = include_str!("../../../models/perturbed_line.toml");
const ANTIDIAGONAL: &str = include_str!("../../../models/antidiagonal_half_line.toml");

type Outcome = Result<String, String>;

fn model(text: &str) -> Result<Arc<Model>, String> {
    Ok(Arc::new(parse_model(text).map_err(|e| e.to_string())?.model))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn within(err: f64, tol: f64, what: &str) -> Outcome {
    let line = format!("{what} {err:.1e} (tolerance {tol:.0e})");
    if err < tol {
        Ok(line)
    } else {
        Err(line)
    }
}

fn states() -> [(&'static str, DensityOperator); 3] {
    [("e0", DensityOperator::pure(2, 0)), ("e1", DensityOperator::pure(2, 1)), ("mixed", DensityOperator::maximally_mixed(2))]
}

fn noncommuting_spectrum() -> Outcome {
    let m = model(NONCOMMUTING)?;
    let chain = compute_symmetrizers(m.as_ref(), 0, 3).map_err(e)?;
    let j = symmetrized_dense(&assemble(&m, 0, 3).map_err(e)?, &chain).map_err(e)?;
    let (mut vals, _) = eig_hermitian(&j).map_err(e)?;
    vals.sort_by(f64::total_cmp);
    let r5 = 5f64.sqrt();
    let mut want = Vec::new();
    for l in catalog::noncommuting_eigenvalues() {
        let simple = (l - (3.0 - r5)).abs() < 1e-12 || (l - (3.0 + r5)).abs() < 1e-12;
        want.extend(std::iter::repeat(l).take(if simple { 1 } else { 2 }));
    }
    let err = vals.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let spec = half_line_spectral(&m).map_err(e)?;
    let w_err = max_abs(&(&spec.measure.atoms[0].weight - catalog::noncommuting_w1()));
    within(err.max(w_err), 1e-8, "eigenvalues with multiplicities and W1, error")
}

fn noncommuting_probability() -> Outcome {
    let m = model(NONCOMMUTING)?;
    let spec = half_line_spectral(&m).map_err(e)?;
    let mut worst: f64 = 0.0;
    for a in [0.2, 0.5, 0.8] {
        for b_re in [-0.3, 0.0, 0.3] {
            let b = c64(b_re, 0.1);
            let rho = DensityOperator::qubit(a, b).map_err(e)?;
            for t in [0.25, 1.0, 4.0] {
                let want = catalog::noncommuting_p00(a, b, t);
                let km = p_km(&spec.measure, &spec.polys, &spec.chain, 0, 0, &rho, t).map_err(e)?;
                let direct = p_direct(&m, 0, 0, &rho, t).map_err(e)?.value;
                worst = worst.max((km - want).abs()).max((direct - want).abs());
            }
        }
    }
    within(worst, 1e-8, "p00 against the closed form, error")
}

fn half_line_measure() -> Outcome {
    let m = model(DIAGONAL_HALF_LINE)?;
    let spec = half_line_spectral(&m).map_err(e)?;
    let atom = spec.measure.atoms.iter().find(|a| a.x.abs() < 1e-8).ok_or("no atom at 0")?;
    let err = (atom.weight[(0, 0)].re - 0.75).abs().max((atom.weight[(3, 3)].re - 0.75).abs());
    let mass = max_abs(&(spec.measure.mass().map_err(e)? - CMat::identity(4, 4)));
    within(err.max(mass), 1e-8, "atom 3/4 at 0 and unit mass, error")
}

fn half_line_km() -> Outcome {
    let m = model(DIAGONAL_HALF_LINE)?;
    let spec = half_line_spectral(&m).map_err(e)?;
    let rho = DensityOperator::qubit(0.3, c64(0.2, 0.1)).map_err(e)?;
    let mut worst: f64 = 0.0;
    for (j, i) in [(0usize, 0usize), (1, 0), (0, 2)] {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let km = p_km(&spec.measure, &spec.polys, &spec.chain, j, i, &rho, t).map_err(e)?;
            worst = worst.max((km - p_direct(&m, j as i64, i as i64, &rho, t).map_err(e)?.value).abs());
        }
    }
    within(worst, 1e-6, "Karlin-McGregor against the matrix exponential, error")
}

fn verdict_table(cases: &[([f64; 2], [f64; 2], [Verdict; 3])], line: bool) -> Outcome {
    let mut misses = Vec::new();
    let mut total = 0;
    for (a, c, want) in cases {
        let ev: Arc<dyn Transform> = if line {
            let m = catalog::diagonal_line(*a, *c);
            let chain = compute_symmetrizers(&m, -2, 1).map_err(e)?;
            line_fold_transforms(&m, &chain).map_err(e)?.w11
        } else {
            Arc::new(HalfLineResolvent::new(half_line_blocks(&catalog::diagonal_half_line(*a, *c)).map_err(e)?))
        };
        for ((name, rho), w) in states().iter().zip(want) {
            total += 1;
            let got = classify_recurrence(ev.as_ref(), &CMat::identity(4, 4), rho).map_err(e)?.verdict;
            if got != *w {
                misses.push(format!("a={a:?} c={c:?} {name}: {got}, expected {w}"));
            }
        }
    }
    if misses.is_empty() {
        Ok(format!("{total}/{total} verdicts"))
    } else {
        Err(misses.join("; "))
    }
}

fn half_line_table() -> Outcome {
    use Verdict::{Recurrent as R, Transient as T};
    verdict_table(
        &[
            ([1.0, 1.0], [2.0, 2.0], [R, R, R]),
            ([2.0, 1.0], [1.0, 2.0], [T, R, R]),
            ([1.0, 2.0], [2.0, 1.0], [R, T, R]),
            ([2.0, 2.0], [1.0, 1.0], [T, T, T]),
        ],
        false,
    )
}

fn line_table() -> Outcome {
    use Verdict::{Recurrent as R, Transient as T};
    verdict_table(
        &[
            ([1.0, 2.0], [1.0, 2.0], [R, R, R]),
            ([1.0, 2.0], [1.5, 1.0], [T, T, T]),
            ([1.0, 2.0], [1.0, 1.0], [R, T, R]),
            ([1.0, 2.0], [1.5, 2.0], [T, R, R]),
        ],
        true,
    )
}

fn branch_root(z: C64, b: f64, k: f64) -> C64 {
    let w = z - b;
    w * (c64(1.0, 0.0) - 4.0 * k * k / (w * w)).sqrt()
}

fn line_fold() -> Outcome {
    let m = model(DIAGONAL_LINE)?;
    let (a, c) = ([m.up(0)[(0, 0)].re, m.up(0)[(1, 1)].re], [m.down(0)[(0, 0)].re, m.down(0)[(1, 1)].re]);
    let chain = compute_symmetrizers(m.as_ref(), -2, 1).map_err(e)?;
    let ft = line_fold_transforms(&m, &chain).map_err(e)?;
    let mut worst: f64 = 0.0;
    for z in [-0.5, -1.0, -3.0] {
        let z = c64(z, 0.0);
        let w = ft.w11.eval(z).map_err(e)?;
        for (k, idx) in [(0usize, 0usize), (1, 3)] {
            let s = branch_root(z, a[k] * a[k] + c[k] * c[k], a[k] * c[k]);
            worst = worst.max((w[(idx, idx)] - c64(1.0, 0.0) / s).norm());
        }
    }
    let block = fold_block_identity(&m, 30, 0.8).map_err(e)?;
    within(worst.max(block), 1e-8, "W11 closed form and folded semigroup, error")
}

fn line_km() -> Outcome {
    let m = model(DIAGONAL_LINE)?;
    let spec = line_spectral(&m).map_err(e)?;
    let rho = DensityOperator::qubit(0.6, c64(0.1, -0.2)).map_err(e)?;
    let mut worst: f64 = 0.0;
    for (j, i) in [(0, 0), (-1, 0), (2, -1)] {
        for t in [0.1, 1.0, 2.0] {
            let km = p_line_km(&spec.measure, &spec.folded, &spec.chain, j, i, &rho, t).map_err(e)?;
            worst = worst.max((km - p_direct(&m, j, i, &rho, t).map_err(e)?.value).abs());
        }
    }
    within(worst, 1e-6, "line Karlin-McGregor against the matrix exponential, error")
}

fn all_recurrent(ev: &dyn Transform, pi0: &CMat) -> Result<usize, String> {
    let mut n = 0;
    for (name, rho) in states() {
        let v = classify_recurrence(ev, pi0, &rho).map_err(e)?;
        if v.verdict != Verdict::Recurrent {
            return Err(format!("{name}: {}", v.verdict));
        }
        n += 1;
    }
    Ok(n)
}

fn perturbed_half_line() -> Outcome {
    let m = model(PERTURBED_HALF_LINE)?;
    let ev = HalfLineResolvent::new(half_line_blocks(&m).map_err(e)?);
    let n = all_recurrent(&ev, &CMat::identity(4, 4))?;
    Ok(format!("site 0 recurrent for {n} states"))
}

fn perturbed_line() -> Outcome {
    let m = model(PERTURBED_LINE)?;
    let chain = compute_symmetrizers(m.as_ref(), -4, 3).map_err(e)?;
    let ft = line_fold_transforms(&m, &chain).map_err(e)?;
    let n0 = all_recurrent(ft.w11.as_ref(), &CMat::identity(4, 4)).map_err(|s| format!("site 0, {s}"))?;
    let km = chain.km_norm(-1).ok_or("no Gram block at -1")?;
    let n1 = all_recurrent(ft.w22.as_ref(), &km).map_err(|s| format!("site -1, {s}"))?;
    Ok(format!("sites 0 and -1 recurrent for {n0} and {n1} states"))
}

fn antidiagonal_parameters() -> Result<(f64, f64, f64, f64), String> {
    let m = model(ANTIDIAGONAL)?;
    let (a, c) = (m.up(0), m.down(0));
    Ok((a[(0, 1)].re, a[(1, 0)].re, c[(0, 1)].re, c[(1, 0)].re))
}

fn antidiagonal_quadratic() -> Outcome {
    let (a1, a2, c1, c2) = antidiagonal_parameters()?;
    let mut worst: f64 = 0.0;
    for k in [0, 3] {
        let (m0, m1) = if k == 0 { (a2 * c1, a1 * c2) } else { (a1 * c2, a2 * c1) };
        let g = if k == 0 { -(a2 * a2 + c2 * c2) } else { -(a1 * a1 + c1 * c1) };
        let aux = TwoPeriodicDiagonal { g0: g, g1: g, m0, m1 };
        for z in [c64(-0.5, 0.0), c64(-3.0, 0.2), c64(1.5, 0.7)] {
            worst = worst.max(aux.quadratic_residual(z, aux.eval(z).map_err(e)?));
        }
    }
    within(worst, 1e-10, "fixed-point quadratic residual")
}

fn antidiagonal_locus() -> Outcome {
    let (_, a2, c1, c2) = antidiagonal_parameters()?;
    let a1 = catalog::antidiagonal_locus(a2, c1, c2);
    let rho = DensityOperator::pure(2, 0);
    let verdict = |a1: f64| -> Result<Verdict, String> {
        let ev = HalfLineResolvent::new(half_line_blocks(&catalog::antidiagonal_half_line(a1, a2, c1, c2)).map_err(e)?);
        Ok(classify_recurrence(&ev, &CMat::identity(4, 4), &rho).map_err(e)?.verdict)
    };
    let (below, above) = (verdict(a1 - 1e-3)?, verdict(a1 + 1e-3)?);
    let line = format!("a1 = {a1:.5}: {below} below, {above} above");
    if below != above {
        Ok(line)
    } else {
        Err(format!("{line}; the generator is recurrent iff a1 a2 <= c1 c2, so no flip occurs at this locus"))
    }
}

pub fn run() -> Result<(), Exit> {
    let checks: [(&str, fn() -> Outcome); 14] = [
        ("noncommuting chain: spectrum", noncommuting_spectrum),
        ("noncommuting chain: return probability", noncommuting_probability),
        ("half-line: spectral measure", half_line_measure),
        ("half-line: Karlin-McGregor", half_line_km),
        ("half-line: classification table", half_line_table),
        ("line: folding", line_fold),
        ("line: Karlin-McGregor", line_km),
        ("line: classification table", line_table),
        ("perturbed half-line: recurrence", perturbed_half_line),
        ("perturbed line: recurrence", perturbed_line),
        ("antidiagonal: fixed point", antidiagonal_quadratic),
        ("antidiagonal: recurrence locus", antidiagonal_locus),
        ("perturbed half-line: model file", || same_model(PERTURBED_HALF_LINE, &catalog::perturbed_half_line(c64(0.3, 0.2), -0.8))),
        ("perturbed line: model file", || same_model(PERTURBED_LINE, &catalog::perturbed_line(c64(0.3, 0.2), 0.5))),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Exit::check(format!("{} of {} regressions failed: {}", failed.len(), checks.len(), failed.join(", "))))
    }
}

/// The model file agrees with the programmatic construction on sites -2..=2.
fn same_model(text: &str, built: &Model) -> Outcome {
    let m = model(text)?;
    let mut worst: f64 = 0.0;
    for n in -2..=2 {
        if !built.contains(n) {
            continue;
        }
        for (x, y) in [(m.up(n), built.up(n)), (m.down(n), built.down(n)), (m.stay(n), built.stay(n)), (m.hamiltonian(n), built.hamiltonian(n))] {
            worst = worst.max(max_abs(&(x - y)));
        }
    }
    within(worst, 1e-14, "operator difference")
}
