//! Linear state-space models of a LETS under flooding and row-layered
//! decoding.
//!
//! A state variable is the message from a LETS VN to one of its
//! missatisfied CNs. The layered model follows the processing order of the
//! schedule: one update block per layer of the LETS, with external inputs
//! from unsatisfied CNs split by whether their layer precedes the state's.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::code_model::{LayerPermutation, TannerGraph};
use crate::error::{Error, Result};
use crate::lets::Lets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StateLabel {
    /// Global VN index.
    pub vn: usize,
    /// Index into `Lets::misatisfied`.
    pub mis: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Labeling {
    pub states: Vec<StateLabel>,
}

impl Labeling {
    /// States ordered by layer position, then CN index; the two states of a
    /// CN are consecutive (smaller VN first).
    pub fn systematic(lets: &Lets, layer_of: impl Fn(usize) -> usize) -> Self {
        let mut order: Vec<usize> = (0..lets.misatisfied.len()).collect();
        order.sort_by_key(|&k| (layer_of(lets.misatisfied[k].cn), lets.misatisfied[k].cn));
        let states = order
            .into_iter()
            .flat_map(|k| {
                let m = lets.misatisfied[k];
                let (x, y) = (m.vns[0].min(m.vns[1]), m.vns[0].max(m.vns[1]));
                [StateLabel { vn: x, mis: k }, StateLabel { vn: y, mis: k }]
            })
            .collect();
        Self { states }
    }

    /// Custom labeling from `(vn, cn)` pairs in state order.
    pub fn from_pairs(lets: &Lets, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.len() != lets.num_states() {
            return Err(Error::InvalidLabeling(format!(
                "{} states given, the set has {}",
                pairs.len(),
                lets.num_states()
            )));
        }
        let mut seen = BTreeSet::new();
        let mut states = Vec::with_capacity(pairs.len());
        for &(vn, cn) in pairs {
            let mis = lets
                .misatisfied
                .iter()
                .position(|m| m.cn == cn && m.vns.contains(&vn))
                .ok_or_else(|| Error::InvalidLabeling(format!("({vn}, {cn}) is not a missatisfied edge")))?;
            if !seen.insert((vn, cn)) {
                return Err(Error::InvalidLabeling(format!("({vn}, {cn}) labeled twice")));
            }
            states.push(StateLabel { vn, mis });
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the other state on the same CN.
    pub fn partner(&self, i: usize) -> usize {
        let s = self.states[i];
        self.states
            .iter()
            .position(|t| t.mis == s.mis && t.vn != s.vn)
            .expect("both edges of a missatisfied CN are labeled")
    }

    /// Both states of every CN sit at positions `2k, 2k+1`.
    pub fn is_consecutively_paired(&self) -> bool {
        (0..self.len()).all(|i| self.partner(i) == i ^ 1)
    }
}

/// Flooding model `x' = A x + B L + B_ex L_ex`, `L~ = C x + L + D_ex L_ex`.
#[derive(Clone, Debug, Serialize)]
pub struct FloodingModel {
    pub labeling: Labeling,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub b_ex: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d_ex: DMatrix<f64>,
}

pub fn build_flooding_model(lets: &Lets, labeling: &Labeling) -> Result<FloodingModel> {
    let ms = labeling.len();
    if ms != lets.num_states() {
        return Err(Error::InvalidLabeling("labeling does not match the set".into()));
    }
    let a_count = lets.a();
    let b_count = lets.b();
    let local = |v: usize| lets.local_index(v).expect("state VN belongs to the set");
    let mut a = DMatrix::zeros(ms, ms);
    let mut b = DMatrix::zeros(ms, a_count);
    let mut b_ex = DMatrix::zeros(ms, b_count);
    let mut c = DMatrix::zeros(a_count, ms);
    let mut d_ex = DMatrix::zeros(a_count, b_count);
    for (i, si) in labeling.states.iter().enumerate() {
        b[(i, local(si.vn))] = 1.0;
        for (u, uc) in lets.unsatisfied.iter().enumerate() {
            if uc.vn == si.vn {
                b_ex[(i, u)] = 1.0;
            }
        }
        for (k, sk) in labeling.states.iter().enumerate() {
            // x_k flows into si.vn through another missatisfied CN
            let ck = &lets.misatisfied[sk.mis];
            if sk.mis != si.mis && sk.vn != si.vn && ck.vns.contains(&si.vn) {
                a[(i, k)] = 1.0;
            }
        }
    }
    for (k, sk) in labeling.states.iter().enumerate() {
        let ck = &lets.misatisfied[sk.mis];
        let other = if ck.vns[0] == sk.vn { ck.vns[1] } else { ck.vns[0] };
        c[(local(other), k)] = 1.0;
    }
    for (u, uc) in lets.unsatisfied.iter().enumerate() {
        d_ex[(local(uc.vn), u)] = 1.0;
    }
    Ok(FloodingModel { labeling: labeling.clone(), a, b, b_ex, c, d_ex })
}

/// Per-layer update matrices of the layered model.
#[derive(Clone, Debug, Serialize)]
pub struct LayeredModel {
    pub flooding: FloodingModel,
    /// Layer index (0..J) of every state.
    pub state_layer: Vec<usize>,
    /// Schedule position of every LETS layer.
    pub layer_positions: Vec<usize>,
    /// Identity with row block j taken from `A`.
    pub a_layers: Vec<DMatrix<f64>>,
    /// Row block j of `B`.
    pub b_layers: Vec<DMatrix<f64>>,
    /// Unsatisfied inputs of row block j from CNs processed later (previous iteration).
    pub b_ex_prev: Vec<DMatrix<f64>>,
    /// Unsatisfied inputs of row block j from CNs processed earlier (current iteration).
    pub b_ex_cur: Vec<DMatrix<f64>>,
}

impl LayeredModel {
    pub fn num_layers(&self) -> usize {
        self.a_layers.len()
    }
    pub fn num_states(&self) -> usize {
        self.state_layer.len()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.flooding.a
    }

    pub fn layer_states(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.state_layer.iter().enumerate().filter(move |(_, &l)| l == j).map(|(i, _)| i)
    }

    /// Strictly lower block-triangular part of the systematic `A`.
    pub fn a_lower(&self) -> DMatrix<f64> {
        let a = self.a();
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, k| {
            if self.state_layer[k] < self.state_layer[i] { a[(i, k)] } else { 0.0 }
        })
    }

    pub fn a_upper(&self) -> DMatrix<f64> {
        self.a() - self.a_lower()
    }

    /// Layer gain matrix: `gains` on the states of layer `j`, 1 elsewhere.
    pub fn gain_matrix(&self, j: usize, gains: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.num_states(), self.num_states(), |r, c| {
            if r != c {
                0.0
            } else if self.state_layer[r] == j {
                gains[r]
            } else {
                1.0
            }
        })
    }
}

/// Layer position of every CN under `perm`.
pub fn schedule_layer_fn<'a>(g: &'a TannerGraph, perm: &'a LayerPermutation) -> impl Fn(usize) -> usize + 'a {
    let pos = perm.positions();
    move |cn| pos[g.cn_type(cn)]
}

/// Builds the layered model with the systematic labeling for `perm`.
pub fn build_layer_matrices(g: &TannerGraph, lets: &Lets, perm: &LayerPermutation) -> Result<LayeredModel> {
    perm.check_len(g.num_layers())?;
    let layer_of = schedule_layer_fn(g, perm);
    let labeling = Labeling::systematic(lets, &layer_of);
    build_layer_matrices_with(lets, &labeling, layer_of)
}

/// Builds the layered model from an explicit labeling and CN layer map.
/// The labeling must list states in non-decreasing layer order.
pub fn build_layer_matrices_with(
    lets: &Lets,
    labeling: &Labeling,
    layer_of: impl Fn(usize) -> usize,
) -> Result<LayeredModel> {
    let fm = build_flooding_model(lets, labeling)?;
    let ms = labeling.len();
    let positions: Vec<usize> = labeling.states.iter().map(|s| layer_of(lets.misatisfied[s.mis].cn)).collect();
    if positions.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidLabeling("states are not ordered by layer".into()));
    }
    let layer_positions: Vec<usize> = positions.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let state_layer: Vec<usize> = positions
        .iter()
        .map(|p| layer_positions.binary_search(p).unwrap())
        .collect();
    for m in &lets.misatisfied {
        if m.vns.iter().any(|&v| {
            lets.misatisfied.iter().any(|m2| m2.cn != m.cn && m2.vns.contains(&v) && layer_of(m2.cn) == layer_of(m.cn))
        }) {
            return Err(Error::InvalidLabeling("a VN has two CNs in one layer".into()));
        }
    }
    let jn = layer_positions.len();
    let (a_n, b_n) = (lets.a(), lets.b());
    let mut a_layers = Vec::with_capacity(jn);
    let mut b_layers = Vec::with_capacity(jn);
    let mut b_ex_prev = Vec::with_capacity(jn);
    let mut b_ex_cur = Vec::with_capacity(jn);
    for j in 0..jn {
        let in_layer = |i: usize| state_layer[i] == j;
        a_layers.push(DMatrix::from_fn(ms, ms, |i, k| {
            if in_layer(i) { fm.a[(i, k)] } else if i == k { 1.0 } else { 0.0 }
        }));
        b_layers.push(DMatrix::from_fn(ms, a_n, |i, v| if in_layer(i) { fm.b[(i, v)] } else { 0.0 }));
        let mut prev = DMatrix::zeros(ms, b_n);
        let mut cur = DMatrix::zeros(ms, b_n);
        for i in (0..ms).filter(|&i| in_layer(i)) {
            for (u, uc) in lets.unsatisfied.iter().enumerate() {
                if fm.b_ex[(i, u)] != 0.0 {
                    if layer_of(uc.cn) < layer_positions[j] {
                        cur[(i, u)] = 1.0;
                    } else {
                        prev[(i, u)] = 1.0;
                    }
                }
            }
        }
        b_ex_prev.push(prev);
        b_ex_cur.push(cur);
    }
    Ok(LayeredModel {
        flooding: fm,
        state_layer,
        layer_positions,
        a_layers,
        b_layers,
        b_ex_prev,
        b_ex_cur,
    })
}

/// One-iteration composite matrices.
#[derive(Clone, Debug, Serialize)]
pub struct Composite {
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    pub b_ex_prev: DMatrix<f64>,
    pub b_ex_cur: DMatrix<f64>,
}

/// Folds the layers of one iteration into composite matrices. `gains`
/// holds one gain per state; `None` means unit gains.
pub fn composite(model: &LayeredModel, gains: Option<&[f64]>) -> Composite {
    let ms = model.num_states();
    let ones = vec![1.0; ms];
    let g = gains.unwrap_or(&ones);
    let (a_n, b_n) = (model.flooding.b.ncols(), model.flooding.b_ex.ncols());
    let mut a_tilde = DMatrix::identity(ms, ms);
    let mut b_tilde = DMatrix::zeros(ms, a_n);
    let mut prev = DMatrix::zeros(ms, b_n);
    let mut cur = DMatrix::zeros(ms, b_n);
    // Forward accumulation: after layer j every term has been multiplied by
    // all later layer maps applied so far.
    for j in 0..model.num_layers() {
        let gj = model.gain_matrix(j, g);
        let step = &gj * &model.a_layers[j];
        a_tilde = &step * a_tilde;
        b_tilde = &step * b_tilde + &gj * &model.b_layers[j];
        prev = &step * prev + &gj * &model.b_ex_prev[j];
        cur = &step * cur + &gj * &model.b_ex_cur[j];
    }
    Composite { a_tilde, b_tilde, b_ex_prev: prev, b_ex_cur: cur }
}

/// Layered transition matrix without gains.
pub fn layered_transition(model: &LayeredModel) -> DMatrix<f64> {
    composite(model, None).a_tilde
}

/// Transition matrix for an explicit order of the LETS layers (indices
/// into `0..J`), without gains.
pub fn transition_for_order(model: &LayeredModel, order: &[usize]) -> DMatrix<f64> {
    let ms = model.num_states();
    let mut t = DMatrix::identity(ms, ms);
    for &j in order {
        t = &model.a_layers[j] * t;
    }
    t
}

/// Runs the layer-by-layer recursion literally. `ex[l]` is the unsatisfied
/// CN input of iteration `l + 1`; `gains[l]` holds the per-state gains of
/// iteration `l + 1`. Returns the state after each full iteration.
pub fn layered_trajectory(
    model: &LayeredModel,
    channel: &DVector<f64>,
    ex: &[DVector<f64>],
    gains: &[Vec<f64>],
) -> Vec<DVector<f64>> {
    let ms = model.num_states();
    let b_n = model.flooding.b_ex.ncols();
    let mut x = DVector::zeros(ms);
    let mut ex_prev = DVector::zeros(b_n);
    let mut out = Vec::with_capacity(ex.len());
    for (l, ex_cur) in ex.iter().enumerate() {
        for j in 0..model.num_layers() {
            let gj = model.gain_matrix(j, &gains[l]);
            let inner = &model.a_layers[j] * &x
                + &model.b_layers[j] * channel
                + &model.b_ex_prev[j] * &ex_prev
                + &model.b_ex_cur[j] * ex_cur;
            x = gj * inner;
        }
        out.push(x.clone());
        ex_prev = ex_cur.clone();
    }
    out
}

/// The same state computed from per-iteration composite matrices as a sum
/// over past iterations.
pub fn non_recursive_state(
    model: &LayeredModel,
    channel: &DVector<f64>,
    ex: &[DVector<f64>],
    gains: &[Vec<f64>],
) -> DVector<f64> {
    let comps: Vec<Composite> = gains.iter().take(ex.len()).map(|g| composite(model, Some(g))).collect();
    let ms = model.num_states();
    let b_n = model.flooding.b_ex.ncols();
    let lmax = ex.len();
    let mut x = DVector::zeros(ms);
    for i in 0..lmax {
        let ex_prev = if i == 0 { DVector::zeros(b_n) } else { ex[i - 1].clone() };
        let mut term = &comps[i].b_tilde * channel + &comps[i].b_ex_prev * ex_prev + &comps[i].b_ex_cur * &ex[i];
        for comp in comps.iter().take(lmax).skip(i + 1) {
            term = &comp.a_tilde * term;
        }
        x += term;
    }
    x
}

/// Checks `A~ = A + A'(A - I)` with `A' = A_l + ... + A_l^(J-1)`.
pub fn composite_identity_residual(model: &LayeredModel) -> f64 {
    let a = model.a();
    let ms = a.nrows();
    let al = model.a_lower();
    let mut power = DMatrix::identity(ms, ms);
    let mut a_prime = DMatrix::zeros(ms, ms);
    for _ in 1..model.num_layers() {
        power = &power * &al;
        a_prime += &power;
    }
    let rhs = a + a_prime * (a - DMatrix::identity(ms, ms));
    (layered_transition(model) - rhs).abs().max()
}

/// Pair-swap permutation matrix for consecutively paired labelings.
pub fn pair_swap(ms: usize) -> DMatrix<f64> {
    DMatrix::from_fn(ms, ms, |i, k| if k == i ^ 1 { 1.0 } else { 0.0 })
}

/// Max entry of `|A^T - P A P|`.
pub fn pair_swap_residual(fm: &FloodingModel) -> f64 {
    let p = pair_swap(fm.a.nrows());
    (fm.a.transpose() - &p * &fm.a * &p).abs().max()
}

/// Renders a matrix as CSV with 0/1 entries printed as integers.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|k| {
                let x = m[(i, k)];
                if x.fract() == 0.0 { format!("{}", x as i64) } else { format!("{x}") }
            })
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
