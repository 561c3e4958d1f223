//! Regression and property checks shared by the `verify` command and the
//! acceptance suite. Every check yields a named pass/fail line.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::code_model::{LayerPermutation, TannerGraph};
use crate::error::Result;
use crate::fixtures::{five_three, printed};
use crate::lets::{Catalog, Lets};
use crate::spectral::{
    characteristic_polynomial, dominant_eigen, eigenvalues, frobenius_normal_form, layered_eigenvectors,
    spectral_radius,
};
use crate::state_space::{
    build_flooding_model, build_layer_matrices, composite, composite_identity_residual, pair_swap_residual, Labeling,
};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn same(pairs: &[(&DMatrix<f64>, &DMatrix<f64>)]) -> (bool, String) {
    for (k, (a, b)) in pairs.iter().enumerate() {
        if a.shape() != b.shape() {
            return (false, format!("matrix {}: shape {:?} vs {:?}", k + 1, a.shape(), b.shape()));
        }
        if a != b {
            let n = a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
            return (false, format!("matrix {}: {n} entries differ", k + 1));
        }
    }
    (true, format!("{} matrices equal", pairs.len()))
}

/// Reference matrices the fixture checks compare against. The composite
/// can be swapped for a user-supplied one.
pub struct Expected {
    pub composite: DMatrix<f64>,
}

impl Default for Expected {
    fn default() -> Self {
        Expected { composite: printed::composite_transition() }
    }
}

/// Finds `sigma` with `ours[sigma(i), sigma(j)] == theirs[i, j]`.
fn align_core(ours: &DMatrix<f64>, theirs: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = ours.nrows();
    LayerPermutation::all(n)
        .into_iter()
        .map(|p| p.order().to_vec())
        .filter(|s| (0..n).all(|i| (0..n).all(|j| ours[(s[i], s[j])] == theirs[(i, j)])))
        .collect()
}

/// Checks against the printed matrices and eigen-structure of the
/// reference (5,3) set.
pub fn fixture_checks(expected: &Expected) -> Vec<Check> {
    let mut out = Vec::new();
    let fx = five_three();

    let fm = build_flooding_model(&fx.lets, &fx.natural_labeling());
    out.push(match fm {
        Ok(fm) => {
            let [a, b, bex, c, dex] = printed::flooding_natural();
            let (ok, d) = same(&[(&fm.a, &a), (&fm.b, &b), (&fm.b_ex, &bex), (&fm.c, &c), (&fm.d_ex, &dex)]);
            Check::new("flooding model, natural labeling", ok, d)
        }
        Err(e) => Check::new("flooding model, natural labeling", false, e.to_string()),
    });

    let lm = fx.layered_model();
    let [a, b, bex] = printed::flooding_systematic();
    let (ok, d) = same(&[(&lm.flooding.a, &a), (&lm.flooding.b, &b), (&lm.flooding.b_ex, &bex)]);
    out.push(Check::new("flooding model, systematic labeling", ok, d));

    let [a2, b2, prev, cur] = printed::second_layer();
    let (ok, d) = same(&[(&lm.a_layers[1], &a2), (&lm.b_layers[1], &b2), (&lm.b_ex_prev[1], &prev), (&lm.b_ex_cur[1], &cur)]);
    out.push(Check::new("second-layer matrices", ok, d));

    let at = composite(&lm, None).a_tilde;
    let (ok, d) = same(&[(&at, &expected.composite)]);
    out.push(Check::new("composite transition, unit gains", ok, d));

    let eig = match layered_eigenvectors(&at) {
        Ok(e) => e,
        Err(e) => {
            out.push(Check::new("dominant eigenvalue", false, e.to_string()));
            return out;
        }
    };
    let r_ok = (eig.r_tilde - printed::DOMINANT).abs() <= 1e-3;
    out.push(Check::new("dominant eigenvalue", r_ok, format!("r = {:.10}", eig.r_tilde)));
    let sizes = eig.fnf.irreducible_sizes();
    out.push(Check::new(
        "normal form: one irreducible block of 7, five zero columns",
        sizes == vec![7] && eig.fnf.n_z == 5,
        format!("irreducible sizes {sizes:?}, zero columns {}", eig.fnf.n_z),
    ));

    // Eigenvectors, after aligning our normal-form order with the printed one.
    let (core, prime) = printed::normal_form_blocks();
    let nz = eig.fnf.n_z;
    let sigmas = if eig.a_core.shape() == core.shape() { align_core(&eig.a_core, &core) } else { vec![] };
    let (pw, pu) = printed::eigenvectors();
    let mut best = f64::INFINITY;
    for s in &sigmas {
        // upper rows: match printed coupling rows by content
        let cols_perm = DMatrix::from_fn(nz, s.len(), |i, j| eig.a_prime[(i, s[j])]);
        let mut used = vec![false; nz];
        let mut rows = Vec::new();
        for i in 0..prime.nrows() {
            let hit = (0..nz).find(|&k| !used[k] && cols_perm.row(k) == prime.row(i));
            match hit {
                Some(k) => {
                    used[k] = true;
                    rows.push(k);
                }
                None => break,
            }
        }
        if rows.len() != nz {
            continue;
        }
        let order: Vec<usize> = rows
            .iter()
            .map(|&k| eig.fnf.order[k])
            .chain(s.iter().map(|&j| eig.fnf.order[nz + j]))
            .collect();
        let w = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.left[i])).normalize();
        let u = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.right[i])).normalize();
        let err = (w - pw.normalize()).amax().max((u - pu.normalize()).amax());
        best = best.min(err);
    }
    out.push(Check::new(
        "eigenvectors match printed values",
        best <= 1e-3,
        if sigmas.is_empty() { "irreducible block does not match the printed one".into() } else { format!("max deviation {best:.2e}") },
    ));
    let rest = at.nrows() - nz;
    let nu = DVector::from_iterator(rest, (0..rest).map(|p| eig.right[eig.fnf.order[nz + p]]));
    let upper = DVector::from_iterator(nz, (0..nz).map(|p| eig.right[eig.fnf.order[p]]));
    let resid = (upper - &eig.a_prime * &nu / eig.r_tilde).amax();
    out.push(Check::new("right eigenvector upper part", resid <= 1e-6, format!("residual {resid:.2e}")));

    let rho_a = spectral_radius(&lm.flooding.a).unwrap_or(f64::NAN);
    out.push(Check::new(
        "layered radius at least flooding radius",
        eig.r_tilde >= rho_a - 1e-9,
        format!("{:.6} vs {:.6}", eig.r_tilde, rho_a),
    ));
    let id_res = composite_identity_residual(&lm);
    out.push(Check::new("composite identity A + A'(A - I)", id_res == 0.0, format!("residual {id_res}")));
    let swap_res = pair_swap_residual(&lm.flooding);
    out.push(Check::new("pair-swap symmetry of A", swap_res == 0.0, format!("residual {swap_res}")));
    out
}

/// Number of times 1 is a root of the integer polynomial (highest power first).
fn multiplicity_of_one(p: &[i128]) -> usize {
    let mut p = p.to_vec();
    let mut k = 0;
    while p.len() > 1 && p.iter().sum::<i128>() == 0 {
        // synthetic division by (x - 1)
        let mut q = Vec::with_capacity(p.len() - 1);
        let mut acc = 0i128;
        for &c in &p[..p.len() - 1] {
            acc += c;
            q.push(acc);
        }
        p = q;
        k += 1;
    }
    k
}

#[derive(Default)]
struct Tally {
    checked: usize,
    failed: usize,
    examples: Vec<String>,
}

impl Tally {
    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.examples.len() < 3 {
                self.examples.push(what());
            }
        }
    }

    fn into_check(self, name: &str) -> Check {
        let detail = if self.failed == 0 {
            format!("{} cases", self.checked)
        } else {
            format!("{} of {} cases fail, e.g. {:?}", self.failed, self.checked, self.examples)
        };
        Check::new(name, self.failed == 0, detail)
    }
}

/// Theorem and property checks over every set of a catalogue. `perms`
/// are the code-level layer orders whose rotations and reversals are
/// compared.
pub fn catalog_checks(g: &TannerGraph, catalog: &Catalog, perms: &[LayerPermutation]) -> Result<Vec<Check>> {
    if catalog.is_empty() {
        return Ok(vec![Check::new("catalogue", true, "no LETSs")]);
    }
    let mut radius = Tally::default();
    let mut shifts = Tally::default();
    let mut reversal = Tally::default();
    let mut identity_tally = Tally::default();
    let mut swap_tally = Tally::default();
    let mut single_block = Tally::default();
    let mut cycles = Tally::default();
    let ident = LayerPermutation::identity(g.num_layers());
    for lets in &catalog.entries {
        let label = || format!("{:?} {:?}", lets.class(), lets.vns);
        let lm = build_layer_matrices(g, lets, &ident)?;
        let at = composite(&lm, None).a_tilde;
        let a = &lm.flooding.a;

        let id_res = composite_identity_residual(&lm);
        identity_tally.record(id_res == 0.0, || format!("{} residual {id_res}", label()));
        let pairing = Labeling::systematic(lets, |c| g.cn_type(c));
        let swap_res = pair_swap_residual(&build_flooding_model(lets, &pairing)?);
        swap_tally.record(swap_res == 0.0, || format!("{} residual {swap_res}", label()));

        let fnf_a = frobenius_normal_form(a);
        let a_irreducible = fnf_a.irreducible.len() == 1 && fnf_a.irreducible_sizes()[0] == a.nrows();
        let fnf = frobenius_normal_form(&at);
        if lets.is_simple_cycle() {
            let p = characteristic_polynomial(&at);
            let mult = p.as_deref().map(multiplicity_of_one);
            let rho = spectral_radius(&at)?;
            cycles.record(fnf.irreducible.len() == 2 && mult == Some(2) && (rho - 1.0).abs() < 1e-9, || {
                format!("{} blocks {} mult(1) {mult:?} radius {rho}", label(), fnf.irreducible.len())
            });
        } else {
            single_block.record(fnf.irreducible.len() == 1, || format!("{} {} blocks", label(), fnf.irreducible.len()));
        }
        if a_irreducible {
            let rho_a = dominant_eigen(a)?.value;
            let r = layered_eigenvectors(&at)?.r_tilde;
            radius.record(r >= rho_a - 1e-9, || format!("{} {r} < {rho_a}", label()));
        }

        for p in perms {
            let base = poly_for(g, lets, p)?;
            for k in 1..p.len() {
                let q = poly_for(g, lets, &p.rotated(k))?;
                shifts.record(base.is_some() && base == q, || format!("{} {p} shift {k}", label()));
            }
            let q = poly_for(g, lets, &p.reversed())?;
            reversal.record(base.is_some() && base == q, || format!("{} {p} reversed", label()));
        }
    }
    Ok(vec![
        radius.into_check("layered radius at least flooding radius"),
        shifts.into_check("spectrum invariant under cyclic shifts"),
        reversal.into_check("spectrum invariant under reversal"),
        identity_tally.into_check("composite identity A + A'(A - I)"),
        swap_tally.into_check("pair-swap symmetry of A"),
        single_block.into_check("one irreducible block unless a simple cycle"),
        cycles.into_check("simple cycles: two blocks, radius 1 twice"),
    ])
}

fn poly_for(g: &TannerGraph, lets: &Lets, p: &LayerPermutation) -> Result<Option<Vec<i128>>> {
    let lm = build_layer_matrices(g, lets, p)?;
    Ok(characteristic_polynomial(&composite(&lm, None).a_tilde))
}

/// Largest gap between sorted spectra (by real then imaginary part) of two
/// matrices; a numeric companion to the exact polynomial comparison.
pub fn spectrum_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let key = |z: &nalgebra::Complex<f64>| (z.re, z.im);
    let mut x = eigenvalues(a)?;
    let mut y = eigenvalues(b)?;
    x.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    y.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    Ok(x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes;
    use crate::lets::{enumerate_lets, EnumerationConfig};

    #[test]
    fn fixture_checks_pass() {
        let checks = fixture_checks(&Expected::default());
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(checks.len() >= 10);
    }

    #[test]
    fn corrupted_composite_is_reported() {
        let mut exp = Expected::default();
        exp.composite[(0, 0)] = 1.0;
        let checks = fixture_checks(&exp);
        let c = checks.iter().find(|c| c.name.starts_with("composite transition")).unwrap();
        assert!(!c.passed);
        assert!(!all_passed(&checks));
    }

    #[test]
    fn root_one_multiplicity() {
        // (x-1)^2 (x+2) = x^3 - 3x + 2
        assert_eq!(multiplicity_of_one(&[1, 0, -3, 2]), 2);
        assert_eq!(multiplicity_of_one(&[1, 2]), 0);
    }

    #[test]
    fn tanner_catalog_checks() {
        let g = TannerGraph::from_exponents(&codes::tanner_155());
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let perms = LayerPermutation::all(3);
        let checks = catalog_checks(&g, &cat, &perms).unwrap();
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        let empty = catalog_checks(&g, &Catalog::new(vec![]), &perms).unwrap();
        assert_eq!(empty[0].detail, "no LETSs");
    }
}
