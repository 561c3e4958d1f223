//! Perron-Frobenius machinery for layered transition matrices: dominant
//! eigenpairs, Frobenius normal form and schedule-space reports.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::code_model::{LayerPermutation, TannerGraph};
use crate::error::{Error, Result};
use crate::lets::Lets;
use crate::state_space::{build_layer_matrices, layered_transition, LayeredModel};

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 100_000;
/// Largest matrix handed to the dense eigen-solver.
pub const DENSE_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EigenMethod {
    Power,
    Dense,
}

#[derive(Clone, Debug, Serialize)]
pub struct Eigen {
    pub value: f64,
    /// Unit-norm, non-negative right eigenvector.
    pub right: DVector<f64>,
    /// Unit-norm, non-negative left eigenvector.
    pub left: DVector<f64>,
    pub method: EigenMethod,
}

/// Cap on QR sweeps in the Schur decomposition; nalgebra's default has none
/// and can cycle forever on some integer matrices.
pub const SCHUR_MAX_ITERS: usize = 10_000;

/// Full (complex) spectrum. Retries on the transpose and with a looser
/// deflation threshold when the QR sweep stalls.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    for eps in [f64::EPSILON, 1e-13] {
        for cand in [m.clone(), m.transpose()] {
            if let Some(sch) = cand.try_schur(eps, SCHUR_MAX_ITERS) {
                return Ok(sch.complex_eigenvalues().iter().copied().collect());
            }
        }
    }
    Err(Error::EigenConvergence(format!("Schur iteration stalled on a {}x{} matrix", m.nrows(), m.ncols())))
}

/// Coefficients of `det(xI - M)`, highest power first, for an integer
/// matrix (Berkowitz, division free). `None` if an entry is not an integer
/// or a coefficient overflows.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Option<Vec<i128>> {
    let n = m.nrows();
    let mut a = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let x = m[(i, j)];
            if x.fract() != 0.0 || x.abs() > 1e15 {
                return None;
            }
            a[i][j] = x as i128;
        }
    }
    let mut poly = vec![1i128];
    for r in 0..n {
        // First column of the Toeplitz factor: 1, -a_rr, -R C, -R M C, ...
        let mut t = Vec::with_capacity(r + 2);
        t.push(1i128);
        t.push(-a[r][r]);
        let mut col: Vec<i128> = (0..r).map(|i| a[i][r]).collect();
        for _ in 0..r {
            let rc = (0..r).try_fold(0i128, |acc, j| acc.checked_add(a[r][j].checked_mul(col[j])?))?;
            t.push(rc.checked_neg()?);
            let next: Option<Vec<i128>> = (0..r)
                .map(|i| (0..r).try_fold(0i128, |acc, j| acc.checked_add(a[i][j].checked_mul(col[j])?)))
                .collect();
            col = next?;
        }
        let mut next = vec![0i128; r + 2];
        for (i, slot) in next.iter_mut().enumerate() {
            for (j, &p) in poly.iter().enumerate().take(i + 1) {
                *slot = slot.checked_add(t[i - j].checked_mul(p)?)?;
            }
        }
        poly = next;
    }
    Some(poly)
}

/// Spectral radius from the full spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Number of eigenvalues within `tol` of `value`.
pub fn eigenvalue_multiplicity(m: &DMatrix<f64>, value: f64, tol: f64) -> Result<usize> {
    Ok(eigenvalues(m)?.iter().filter(|z| (z.re - value).abs() < tol && z.im.abs() < tol).count())
}

/// Power iteration on `M + I` (same eigenvectors, primitive on irreducible
/// blocks) starting from the all-ones vector. Stops on the eigen-residual.
fn power(m: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    let n = m.nrows();
    let shifted = m + DMatrix::identity(n, n);
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..POWER_MAX_ITERS {
        let y = &shifted * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return None;
        }
        x = y / norm;
        let mx = m * &x;
        let r = x.dot(&mx);
        if (mx - &x * r).norm() < POWER_TOL * r.abs().max(1.0) {
            return Some((r, x));
        }
    }
    None
}

fn null_vector(m: &DMatrix<f64>, value: f64) -> DVector<f64> {
    let n = m.nrows();
    let svd = (m - DMatrix::identity(n, n) * value).svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v: DVector<f64> = vt.row(k).transpose();
    orient(v)
}

/// Flips the sign so the vector is non-negative and normalizes it.
fn orient(mut v: DVector<f64>) -> DVector<f64> {
    if v.sum() < 0.0 {
        v = -v;
    }
    v.iter_mut().for_each(|x| {
        if x.abs() < 1e-14 {
            *x = 0.0
        }
    });
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

fn dense_eigen(m: &DMatrix<f64>) -> Result<Eigen> {
    let value = eigenvalues(m)?
        .iter()
        .filter(|z| z.im.abs() < 1e-9)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(Eigen {
        value,
        right: null_vector(m, value),
        left: null_vector(&m.transpose(), value),
        method: EigenMethod::Dense,
    })
}

/// Dominant eigenvalue and eigenvectors of a non-negative matrix.
pub fn dominant_eigen(m: &DMatrix<f64>) -> Result<Eigen> {
    if let (Some((r, right)), Some((rl, left))) = (power(m), power(&m.transpose())) {
        if (r - rl).abs() < 1e-8 * r.abs().max(1.0) {
            return Ok(Eigen { value: r, right: orient(right), left: orient(left), method: EigenMethod::Power });
        }
    }
    if m.nrows() <= DENSE_LIMIT {
        return dense_eigen(m);
    }
    Err(Error::EigenConvergence(format!(
        "power iteration failed on a {}x{} matrix",
        m.nrows(),
        m.ncols()
    )))
}

/// Frobenius normal form of a non-negative square matrix.
#[derive(Clone, Debug, Serialize)]
pub struct Fnf {
    /// New position -> original index.
    pub order: Vec<usize>,
    /// Diagonal blocks in order, each listing original indices.
    pub blocks: Vec<Vec<usize>>,
    /// Number of all-zero columns (placed first).
    pub n_z: usize,
    /// Indices into `blocks` of the irreducible (non-trivial) blocks.
    pub irreducible: Vec<usize>,
}

impl Fnf {
    pub fn irreducible_sizes(&self) -> Vec<usize> {
        self.irreducible.iter().map(|&b| self.blocks[b].len()).collect()
    }

    pub fn permuted(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.order.len();
        DMatrix::from_fn(n, n, |i, k| m[(self.order[i], self.order[k])])
    }
}

/// Strongly connected components (Tarjan, iterative) of the digraph with
/// an edge `i -> k` whenever `adj[i]` contains `k`.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Dependency digraph of a transition matrix: `i -> k` when `M(i,k) != 0`.
fn dependency_lists(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).filter(|&k| m[(i, k)] != 0.0).collect()).collect()
}

/// Message-flow digraph of a layered transition matrix (adjacency `M^T`):
/// `k -> i` when state `i` is computed from state `k`.
pub fn message_flow_digraph(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    (0..m.ncols()).map(|k| (0..m.nrows()).filter(|&i| m[(i, k)] != 0.0).collect()).collect()
}

/// Block upper-triangular form: zero columns first, then the condensation
/// in topological order of the dependency digraph.
pub fn frobenius_normal_form(m: &DMatrix<f64>) -> Fnf {
    let n = m.nrows();
    let adj = dependency_lists(m);
    let comps = tarjan_scc(&adj);
    let mut comp_of = vec![0; n];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    let zero_col: Vec<bool> = (0..n).map(|k| (0..n).all(|i| m[(i, k)] == 0.0)).collect();
    let nc = comps.len();
    let mut indeg = vec![0usize; nc];
    let mut succ = vec![Vec::new(); nc];
    for i in 0..n {
        for &k in &adj[i] {
            let (a, b) = (comp_of[i], comp_of[k]);
            if a != b {
                succ[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    let key = |c: usize| (!(comps[c].len() == 1 && zero_col[comps[c][0]]), comps[c][0]);
    let mut ready: std::collections::BTreeSet<((bool, usize), usize)> =
        (0..nc).filter(|&c| indeg[c] == 0).map(|c| (key(c), c)).collect();
    let mut blocks = Vec::with_capacity(nc);
    while let Some(first) = ready.pop_first() {
        let c = first.1;
        blocks.push(comps[c].clone());
        for &s in &succ[c] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert((key(s), s));
            }
        }
    }
    let n_z = zero_col.iter().filter(|&&z| z).count();
    let irreducible = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.len() > 1 || m[(b[0], b[0])] != 0.0)
        .map(|(i, _)| i)
        .collect();
    let order = blocks.iter().flatten().copied().collect();
    Fnf { order, blocks, n_z, irreducible }
}

/// Dominant eigen-structure of a layered transition matrix in the block
/// form `[[0, A'], [0, A'']]`.
#[derive(Clone, Debug, Serialize)]
pub struct LayeredEigen {
    pub r_tilde: f64,
    pub fnf: Fnf,
    /// Left eigenvector in the original labeling (unit norm).
    pub left: DVector<f64>,
    /// Right eigenvector in the original labeling, scaled so `left . right = 1`.
    pub right: DVector<f64>,
    /// Zero-column rows against the remaining columns.
    pub a_prime: DMatrix<f64>,
    /// Lower-right block.
    pub a_core: DMatrix<f64>,
}

pub fn layered_eigenvectors(a_tilde: &DMatrix<f64>) -> Result<LayeredEigen> {
    let n = a_tilde.nrows();
    let fnf = frobenius_normal_form(a_tilde);
    let pm = fnf.permuted(a_tilde);
    let nz = fnf.n_z;
    let rest = n - nz;
    let a_prime = pm.view((0, nz), (nz, rest)).into_owned();
    let a_core = pm.view((nz, nz), (rest, rest)).into_owned();
    let core_irreducible = fnf.irreducible.len() == 1 && fnf.blocks[fnf.irreducible[0]].len() == rest;
    let (r, omega, nu) = if rest == 0 {
        (0.0, DVector::zeros(0), DVector::zeros(0))
    } else if core_irreducible {
        let e = dominant_eigen(&a_core)?;
        (e.value, e.left, e.right)
    } else {
        // Several blocks: combine the Perron vectors of the blocks that
        // attain the spectral radius.
        let pos_of = |v: usize| fnf.order.iter().position(|&x| x == v).unwrap() - nz;
        let mut best = 0.0;
        let mut parts = Vec::new();
        for &bi in &fnf.irreducible {
            let idx: Vec<usize> = fnf.blocks[bi].iter().map(|&v| pos_of(v)).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, k| a_core[(idx[i], idx[k])]);
            let e = dominant_eigen(&sub)?;
            if e.value > best + 1e-9 {
                best = e.value;
                parts.clear();
            }
            if (e.value - best).abs() <= 1e-9 {
                parts.push((idx, e));
            }
        }
        let mut omega = DVector::zeros(rest);
        let mut nu = DVector::zeros(rest);
        for (idx, e) in &parts {
            for (k, &i) in idx.iter().enumerate() {
                omega[i] = e.left[k];
                nu[i] = e.right[k];
            }
        }
        (best, omega, nu)
    };
    let omega = if omega.norm() > 0.0 { omega.normalize() } else { omega };
    let scale = omega.dot(&nu);
    let nu = if scale > 0.0 { nu / scale } else { nu };
    let upper = if r > 0.0 { &a_prime * &nu / r } else { DVector::zeros(nz) };
    let mut left = DVector::zeros(n);
    let mut right = DVector::zeros(n);
    for (p, &orig) in fnf.order.iter().enumerate() {
        if p < nz {
            right[orig] = upper[p];
        } else {
            left[orig] = omega[p - nz];
            right[orig] = nu[p - nz];
        }
    }
    Ok(LayeredEigen { r_tilde: r, fnf, left, right, a_prime, a_core })
}

/// `max |(r A_l + A_u) u - r u|` for the dominant right eigenvector.
pub fn split_eigen_residual(model: &LayeredModel) -> Result<f64> {
    let e = layered_eigenvectors(&layered_transition(model))?;
    let r = e.r_tilde;
    let lhs = (model.a_lower() * r + model.a_upper()) * &e.right;
    Ok((lhs - &e.right * r).abs().max())
}

#[derive(Clone, Debug, Serialize)]
pub struct PermRow {
    pub permutation: LayerPermutation,
    pub r_tilde: f64,
    pub n_z: usize,
    pub irreducible_block_size: usize,
}

/// Spectral summary of one LETS under each code-level layer permutation.
pub fn permutation_report(g: &TannerGraph, lets: &Lets, perms: &[LayerPermutation]) -> Result<Vec<PermRow>> {
    use rayon::prelude::*;
    perms
        .par_iter()
        .map(|p| {
            let lm = build_layer_matrices(g, lets, p)?;
            let at = layered_transition(&lm);
            let fnf = frobenius_normal_form(&at);
            Ok(PermRow {
                permutation: p.clone(),
                r_tilde: spectral_radius(&at)?,
                n_z: fnf.n_z,
                irreducible_block_size: fnf.irreducible_sizes().into_iter().max().unwrap_or(0),
            })
        })
        .collect()
}

/// Distinct values after rounding to `tol`.
pub fn distinct_values(values: impl IntoIterator<Item = f64>, tol: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

pub fn write_permutation_csv(rows: &[PermRow], manifest: Option<&str>, mut w: impl Write) -> Result<()> {
    if let Some(m) = manifest {
        writeln!(w, "# manifest: {m}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["permutation", "r_tilde", "n_z", "irreducible_block_size"])?;
    for r in rows {
        csv.write_record([
            r.permutation.to_string(),
            format!("{:.9}", r.r_tilde),
            r.n_z.to_string(),
            r.irreducible_block_size.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::five_three;
    use crate::state_space::layered_transition;
    use proptest::prelude::*;

    #[test]
    fn fixture_spectrum_and_block_structure() {
        let lm = five_three().layered_model();
        let at = layered_transition(&lm);
        let e = layered_eigenvectors(&at).unwrap();
        assert!((e.r_tilde - 2.0136).abs() < 1e-3);
        assert_eq!(e.fnf.n_z, 5);
        assert_eq!(e.fnf.irreducible_sizes(), vec![7]);
        assert_eq!(&e.fnf.order[..5], &[0, 1, 2, 3, 5]);
        assert!((&at * &e.right - &e.right * e.r_tilde).norm() < 1e-9);
        assert!((at.transpose() * &e.left - &e.left * e.r_tilde).norm() < 1e-9);
        assert!((e.left.dot(&e.right) - 1.0).abs() < 1e-12);
        assert!(split_eigen_residual(&lm).unwrap() < 1e-9);
    }

    #[test]
    fn tarjan_on_small_graphs() {
        let adj = vec![vec![1], vec![2], vec![0, 3], vec![]];
        let mut c = tarjan_scc(&adj);
        c.sort();
        assert_eq!(c, vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(tarjan_scc(&[vec![0]]), vec![vec![0]]);
    }

    #[test]
    fn power_and_dense_agree_on_periodic_matrix() {
        // a bipartite 2-cycle is periodic; the shift keeps power iteration stable
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        let e = dominant_eigen(&m).unwrap();
        assert!((e.value - 2.0).abs() < 1e-10);
        assert!((spectral_radius(&m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_value_rounding() {
        assert_eq!(distinct_values([1.0, 1.0 + 1e-12, 2.0], 1e-9), vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn fnf_is_block_upper_triangular(bits in proptest::collection::vec(proptest::bool::weighted(0.2), 64)) {
            let m = DMatrix::from_fn(8, 8, |i, k| if bits[i * 8 + k] { 1.0 } else { 0.0 });
            let f = frobenius_normal_form(&m);
            let pm = f.permuted(&m);
            let mut block_of = [0; 8];
            let mut p = 0;
            for (b, blk) in f.blocks.iter().enumerate() {
                for _ in blk { block_of[p] = b; p += 1; }
            }
            for i in 0..8 {
                for k in 0..8 {
                    if pm[(i, k)] != 0.0 {
                        prop_assert!(block_of[i] <= block_of[k]);
                    }
                }
            }
            for k in 0..f.n_z {
                prop_assert!(pm.column(k).iter().all(|&x| x == 0.0));
            }
        }

        #[test]
        fn dominant_eigen_matches_spectrum(vals in proptest::collection::vec(0.0f64..1.0, 36)) {
            let m = DMatrix::from_fn(6, 6, |i, k| vals[i * 6 + k] + if k == (i + 1) % 6 { 0.5 } else { 0.0 });
            let e = dominant_eigen(&m).unwrap();
            prop_assert!((e.value - spectral_radius(&m).unwrap()).abs() < 1e-8);
            prop_assert!((&m * &e.right - &e.right * e.value).norm() < 1e-7);
            prop_assert!(e.right.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn characteristic_polynomial_small_cases() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(characteristic_polynomial(&m), Some(vec![1, -5, -2]));
        // companion matrix of x^3 - 2x^2 - 5x + 6
        let c = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -6.0, 1.0, 0.0, 5.0, 0.0, 1.0, 2.0]);
        assert_eq!(characteristic_polynomial(&c), Some(vec![1, -2, -5, 6]));
        assert_eq!(characteristic_polynomial(&DMatrix::zeros(0, 0)), Some(vec![1]));
        assert_eq!(characteristic_polynomial(&DMatrix::from_element(1, 1, 0.5)), None);
    }

    proptest! {
        #[test]
        fn characteristic_polynomial_matches_trace_and_determinant(entries in proptest::collection::vec(-3i32..4, 25)) {
            let m = DMatrix::from_iterator(5, 5, entries.iter().map(|&x| x as f64));
            let p = characteristic_polynomial(&m).unwrap();
            prop_assert_eq!(p[1], -(m.trace().round() as i128));
            prop_assert_eq!(p[5], -(m.determinant().round() as i128));
            // similarity by a permutation leaves it unchanged
            let perm = DMatrix::from_fn(5, 5, |i, j| if j == (i + 2) % 5 { 1.0 } else { 0.0 });
            let q = characteristic_polynomial(&(&perm * &m * perm.transpose())).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
