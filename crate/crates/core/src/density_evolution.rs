//! Quantized density evolution on the base graph, edge by edge, under a
//! row-layered schedule or flooding. All-zero codeword throughout.
//!
//! Densities live on a symmetric grid `k * step`, `|k| <= half`, whose end
//! bins double as the saturation masses. The VN side is an FFT sum
//! convolution folded onto the end bins; the CN side is a table-driven
//! box-plus convolution over bin pairs.

use std::collections::HashMap;
use std::sync::Mutex;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::channel::ChannelSpec;
use crate::code_model::{ExponentMatrix, TannerGraph};
use crate::decoder::{box_plus, Schedule};
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 0.05;
/// Coarse step offered for the schedule-search inner loop.
pub const COARSE_STEP: f64 = 0.25;
/// Masses below this are treated as empty in pair loops and FFT output.
const NEGLIGIBLE: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub step: f64,
    pub half: usize,
}

impl Grid {
    /// The saturation level must be a whole number of steps.
    pub fn new(step: f64, saturation: f64) -> Result<Self> {
        if !(step > 0.0 && saturation > 0.0) {
            return Err(Error::GridRange(format!("step {step}, saturation {saturation}")));
        }
        let ratio = saturation / step;
        let half = ratio.round();
        if (ratio - half).abs() > 1e-6 || half < 1.0 || half > u16::MAX as f64 {
            return Err(Error::GridRange(format!(
                "saturation {saturation} is not a multiple of step {step}"
            )));
        }
        Ok(Grid { step, half: half as usize })
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn saturation(&self) -> f64 {
        self.half as f64 * self.step
    }
    pub fn value(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.step
    }
    /// Nearest bin, saturating at the ends.
    pub fn index(&self, x: f64) -> usize {
        let k = (x / self.step).round().clamp(-(self.half as f64), self.half as f64);
        (k as i64 + self.half as i64) as usize
    }
}

/// Probability masses on a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Grid,
    pub mass: Vec<f64>,
}

impl Density {
    pub fn point(grid: Grid, x: f64) -> Self {
        let mut mass = vec![0.0; grid.len()];
        mass[grid.index(x)] = 1.0;
        Density { grid, mass }
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(grid: Grid, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} masses for {} bins", mass.len(), grid.len())));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || mass.iter().any(|&m| m < 0.0 || !m.is_finite()) {
            return Err(Error::DeDivergence("weights must be finite, non-negative, not all zero".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Density { grid, mass })
    }

    /// Histogram of samples, each rounded to its nearest bin.
    pub fn from_samples(grid: Grid, samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut mass = vec![0.0; grid.len()];
        for x in samples {
            mass[grid.index(x)] += 1.0;
        }
        Self::from_weights(grid, mass)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, m)| m * self.grid.value(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| m * (self.grid.value(i) - mu).powi(2))
            .sum()
    }

    /// Mass on negative values; a mass at exactly zero counts half.
    pub fn negative_mass(&self) -> f64 {
        let h = self.grid.half;
        self.mass[..h].iter().sum::<f64>() + 0.5 * self.mass[h]
    }

    /// Expectation of `tanh(x / 2)`.
    pub fn tanh_mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, m)| m * (0.5 * self.grid.value(i)).tanh())
            .sum()
    }

    pub fn total_variation(&self, other: &Density) -> f64 {
        0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Uniform mixture.
    pub fn average(parts: &[&Density]) -> Result<Density> {
        let first = parts.first().ok_or_else(|| Error::DimensionMismatch("empty average".into()))?;
        let mut mass = vec![0.0; first.mass.len()];
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::DimensionMismatch("densities on different grids".into()));
            }
            mass.iter_mut().zip(&p.mass).for_each(|(a, b)| *a += b);
        }
        let w = 1.0 / parts.len() as f64;
        mass.iter_mut().for_each(|m| *m *= w);
        Ok(Density { grid: first.grid, mass })
    }

    fn renormalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            self.mass.iter_mut().for_each(|m| *m /= t);
        }
    }
}

/// Gaussian channel LLR density `N(2/s^2, 4/s^2)` binned on the grid; the
/// tails fold onto the end bins.
pub fn channel_density(grid: Grid, ch: &ChannelSpec) -> Result<Density> {
    ch.validate()?;
    let (mu, var) = (ch.llr_mean(), ch.llr_variance());
    let sd = var.sqrt();
    if !(sd.is_finite() && sd > 0.0 && mu.is_finite()) {
        return Ok(Density::point(grid, grid.saturation()));
    }
    let normal = Normal::new(mu, sd).map_err(|e| Error::InvalidChannel(e.to_string()))?;
    // Probability of (lo, hi], computed on the side away from the mean so
    // that small tails keep their precision.
    let interval = |lo: f64, hi: f64| {
        if lo >= mu {
            normal.sf(lo) - normal.sf(hi)
        } else {
            normal.cdf(hi) - normal.cdf(lo)
        }
    };
    let half_step = 0.5 * grid.step;
    let n = grid.len();
    let mass: Vec<f64> = (0..n)
        .map(|i| {
            let v = grid.value(i);
            let lo = if i == 0 { f64::NEG_INFINITY } else { v - half_step };
            let hi = if i == n - 1 { f64::INFINITY } else { v + half_step };
            interval(lo, hi).max(0.0)
        })
        .collect();
    Density::from_weights(grid, mass)
}

/// Bin index of `|a| box-plus |b|` for every pair of magnitudes.
#[derive(Clone, Debug)]
pub struct BoxPlusTable {
    grid: Grid,
    idx: Vec<u16>,
}

impl BoxPlusTable {
    pub fn new(grid: Grid) -> Self {
        let w = grid.half + 1;
        let mut idx = vec![0u16; w * w];
        for a in 0..w {
            for b in a..w {
                let v = box_plus(a as f64 * grid.step, b as f64 * grid.step);
                let k = ((v / grid.step).round() as usize).min(a);
                idx[a * w + b] = k as u16;
                idx[b * w + a] = k as u16;
            }
        }
        BoxPlusTable { grid, idx }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Density of `X box-plus Y` for independent `X ~ p`, `Y ~ q`.
    pub fn combine(&self, p: &Density, q: &Density) -> Density {
        let h = self.grid.half;
        let w = h + 1;
        let support = |d: &Density| -> Vec<(usize, bool, f64)> {
            d.mass
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > NEGLIGIBLE)
                .map(|(i, &m)| if i >= h { (i - h, false, m) } else { (h - i, true, m) })
                .collect()
        };
        let (sp, sq) = (support(p), support(q));
        let mut out = vec![0.0; self.grid.len()];
        for &(a, na, ma) in &sp {
            let row = &self.idx[a * w..(a + 1) * w];
            for &(b, nb, mb) in &sq {
                let k = row[b] as usize;
                let bin = if na != nb { h - k } else { h + k };
                out[bin] += ma * mb;
            }
        }
        let mut d = Density { grid: self.grid, mass: out };
        d.renormalize();
        d
    }

    /// Box-plus of all inputs; the empty combination is the identity, a
    /// point mass at `+S_max`.
    pub fn fold(&self, inputs: &[&Density]) -> Density {
        let mut acc = Density::point(self.grid, self.grid.saturation());
        for (k, d) in inputs.iter().enumerate() {
            acc = if k == 0 { (*d).clone() } else { self.combine(&acc, d) };
        }
        acc
    }

    /// For every position, the box-plus of all other inputs.
    pub fn exclusive(&self, inputs: &[&Density]) -> Vec<Density> {
        let n = inputs.len();
        let identity = Density::point(self.grid, self.grid.saturation());
        if n <= 1 {
            return vec![identity; n];
        }
        // prefix[i] covers inputs[..i], suffix[i] covers inputs[i..].
        let mut prefix: Vec<Option<Density>> = vec![None; n];
        for i in 1..n {
            prefix[i] = Some(match &prefix[i - 1] {
                None => inputs[0].clone(),
                Some(p) => self.combine(p, inputs[i - 1]),
            });
        }
        let mut suffix: Vec<Option<Density>> = vec![None; n + 1];
        for i in (1..n).rev() {
            suffix[i] = Some(match &suffix[i + 1] {
                None => inputs[n - 1].clone(),
                Some(s) => self.combine(inputs[i], s),
            });
        }
        (0..n)
            .map(|i| match (&prefix[i], &suffix[i + 1]) {
                (Some(p), Some(s)) => self.combine(p, s),
                (Some(p), None) => p.clone(),
                (None, Some(s)) => s.clone(),
                (None, None) => identity.clone(),
            })
            .collect()
    }
}

/// Sums of independent grid variables with the result clipped to the grid.
pub struct SumConvolver {
    planner: FftPlanner<f64>,
}

impl Default for SumConvolver {
    fn default() -> Self {
        SumConvolver { planner: FftPlanner::new() }
    }
}

impl SumConvolver {
    pub fn sum(&mut self, inputs: &[&Density]) -> Density {
        let grid = inputs[0].grid;
        if inputs.len() == 1 {
            return inputs[0].clone();
        }
        let n = grid.len();
        let m = inputs.len();
        let linear = m * (n - 1) + 1;
        let len = linear.next_power_of_two();
        let fwd = self.planner.plan_fft_forward(len);
        let inv = self.planner.plan_fft_inverse(len);
        let mut acc: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0); len];
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for d in inputs {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (b, &x) in buf.iter_mut().zip(&d.mass) {
                b.re = x;
            }
            fwd.process(&mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a *= b);
        }
        inv.process(&mut acc);
        let scale = 1.0 / len as f64;
        // Linear index s carries the value (s - m*half) * step.
        let offset = (m * grid.half) as i64;
        let h = grid.half as i64;
        let mut out = vec![0.0; n];
        for (s, c) in acc.iter().take(linear).enumerate() {
            let x = c.re * scale;
            if x <= NEGLIGIBLE {
                continue;
            }
            let k = (s as i64 - offset).clamp(-h, h);
            out[(k + h) as usize] += x;
        }
        let mut d = Density { grid, mass: out };
        d.renormalize();
        d
    }
}

/// Type-level graph: rows are CN types (layers), columns VN types.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseGraph {
    pub rows: usize,
    pub cols: usize,
    /// (row, col) per base edge, row-major.
    pub edges: Vec<(usize, usize)>,
    row_edges: Vec<Vec<usize>>,
    col_edges: Vec<Vec<usize>>,
}

impl BaseGraph {
    pub fn new(rows: usize, cols: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        if edges.iter().any(|&(r, c)| r >= rows || c >= cols) {
            return Err(Error::DimensionMismatch("base edge outside the base matrix".into()));
        }
        let mut row_edges = vec![Vec::new(); rows];
        let mut col_edges = vec![Vec::new(); cols];
        for (e, &(r, c)) in edges.iter().enumerate() {
            row_edges[r].push(e);
            col_edges[c].push(e);
        }
        Ok(BaseGraph { rows, cols, edges, row_edges, col_edges })
    }

    pub fn from_exponents(e: &ExponentMatrix) -> Self {
        let edges = (0..e.base_rows())
            .flat_map(|r| (0..e.base_cols()).filter(move |&c| e.shift(r, c).is_some()).map(move |c| (r, c)))
            .collect();
        Self::new(e.base_rows(), e.base_cols(), edges).unwrap()
    }

    /// Collapses a graph onto its CN/VN types.
    pub fn from_tanner(g: &TannerGraph) -> Self {
        let mut edges = Vec::with_capacity(g.num_edges());
        for c in 0..g.m() {
            for &v in g.cn_vns(c) {
                edges.push((g.cn_type(c), g.vn_type(v)));
            }
        }
        Self::new(g.num_layers(), g.num_vn_types(), edges).unwrap()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn edge(&self, row: usize, col: usize) -> Option<usize> {
        self.edges.binary_search(&(row, col)).ok()
    }
    pub fn row_edges(&self, row: usize) -> &[usize] {
        &self.row_edges[row]
    }
    pub fn col_edges(&self, col: usize) -> &[usize] {
        &self.col_edges[col]
    }
    pub fn row_degree(&self, row: usize) -> usize {
        self.row_edges[row].len()
    }
    pub fn col_degree(&self, col: usize) -> usize {
        self.col_edges[col].len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub step: f64,
    pub saturation: f64,
    pub iterations: usize,
    pub schedule: Schedule,
    /// Stop once an iteration moves no density by more than this (TV).
    pub tolerance: f64,
}

impl DeConfig {
    pub fn new(schedule: Schedule, saturation: f64, iterations: usize) -> Self {
        DeConfig { step: DEFAULT_STEP, saturation, iterations, schedule, tolerance: 1e-13 }
    }
}

/// Missatisfied-CN gain summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    /// Mean of `tanh(x/2)`.
    pub mean_tanh: f64,
    pub p_inv: f64,
    /// `(1 - p_inv) * mean_tanh`.
    pub effective: f64,
}

pub fn gain_and_inversion(d: &Density) -> Gain {
    let mean_tanh = d.tanh_mean();
    let p_inv = d.negative_mass();
    Gain { mean_tanh, p_inv, effective: (1.0 - p_inv) * mean_tanh }
}

type GainKey = (usize, usize, Vec<usize>);

/// Per-edge densities of every iteration.
pub struct DeTrace {
    pub grid: Grid,
    pub base: BaseGraph,
    pub schedule: Schedule,
    pub channel: Density,
    /// `to_cn[l][e]`: VN-to-CN density on edge `e` used at iteration `l+1`.
    to_cn: Vec<Vec<Density>>,
    /// `to_vn[l][e]`: CN-to-VN density produced at iteration `l+1`.
    to_vn: Vec<Vec<Density>>,
    zero: Density,
    /// Iteration after which nothing moved any more.
    pub fixed_point: Option<usize>,
    pub requested: usize,
    table: BoxPlusTable,
    gains: Mutex<HashMap<GainKey, Gain>>,
}

impl std::fmt::Debug for DeTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DeTrace")
            .field("grid", &self.grid)
            .field("schedule", &self.schedule)
            .field("stored", &self.to_cn.len())
            .field("fixed_point", &self.fixed_point)
            .finish()
    }
}

pub fn run_de(base: &BaseGraph, ch: &ChannelSpec, cfg: &DeConfig) -> Result<DeTrace> {
    let grid = Grid::new(cfg.step, cfg.saturation)?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidConfig("density evolution needs at least one iteration".into()));
    }
    let order: Option<Vec<usize>> = match &cfg.schedule {
        Schedule::Flooding => None,
        Schedule::Layered(p) => {
            p.check_len(base.rows)?;
            Some(p.order().to_vec())
        }
    };
    let table = BoxPlusTable::new(grid);
    let channel = channel_density(grid, ch)?;
    let zero = Density::point(grid, 0.0);
    let ne = base.num_edges();
    let mut conv = SumConvolver::default();
    let mut latest: Vec<Density> = vec![zero.clone(); ne];
    let mut to_cn_all: Vec<Vec<Density>> = Vec::new();
    let mut to_vn_all: Vec<Vec<Density>> = Vec::new();
    let mut fixed_point = None;

    let vn_message = |conv: &mut SumConvolver, latest: &[Density], e: usize| {
        let col = base.edges[e].1;
        let mut inputs: Vec<&Density> = vec![&channel];
        inputs.extend(base.col_edges(col).iter().filter(|&&f| f != e).map(|&f| &latest[f]));
        conv.sum(&inputs)
    };
    let cn_update = |to_cn: &[Density], latest: &mut [Density], row: usize| {
        let edges = base.row_edges(row);
        let ins: Vec<&Density> = edges.iter().map(|&e| &to_cn[e]).collect();
        for (&e, d) in edges.iter().zip(table.exclusive(&ins)) {
            latest[e] = d;
        }
    };

    for l in 0..cfg.iterations {
        let mut to_cn = vec![zero.clone(); ne];
        match &order {
            None => {
                for (e, slot) in to_cn.iter_mut().enumerate() {
                    *slot = vn_message(&mut conv, &latest, e);
                }
                for row in 0..base.rows {
                    cn_update(&to_cn, &mut latest, row);
                }
            }
            Some(order) => {
                for &row in order {
                    for &e in base.row_edges(row) {
                        to_cn[e] = vn_message(&mut conv, &latest, e);
                    }
                    cn_update(&to_cn, &mut latest, row);
                }
            }
        }
        if latest.iter().chain(&to_cn).any(|d| !d.total().is_finite()) {
            return Err(Error::DeDivergence(format!("non-finite mass at iteration {}", l + 1)));
        }
        let moved = match (to_cn_all.last(), to_vn_all.last()) {
            (Some(pc), Some(pv)) => to_cn
                .iter()
                .zip(pc)
                .chain(latest.iter().zip(pv))
                .map(|(a, b)| a.total_variation(b))
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        };
        to_cn_all.push(to_cn);
        to_vn_all.push(latest.clone());
        if moved < cfg.tolerance {
            fixed_point = Some(l + 1);
            break;
        }
    }
    Ok(DeTrace {
        grid,
        base: base.clone(),
        schedule: cfg.schedule.clone(),
        channel,
        to_cn: to_cn_all,
        to_vn: to_vn_all,
        zero,
        fixed_point,
        requested: cfg.iterations,
        table,
        gains: Mutex::new(HashMap::new()),
    })
}

impl DeTrace {
    /// Iterations actually computed; later ones repeat the last.
    pub fn stored(&self) -> usize {
        self.to_cn.len()
    }

    fn slot(&self, l: usize) -> usize {
        l.min(self.stored()) - 1
    }

    fn pick<'a>(&'a self, store: &'a [Vec<Density>], l: usize, e: usize) -> &'a Density {
        if l == 0 { &self.zero } else { &store[self.slot(l)][e] }
    }

    fn edge(&self, row: usize, col: usize) -> Result<usize> {
        self.base
            .edge(row, col)
            .ok_or_else(|| Error::DimensionMismatch(format!("no base edge ({row}, {col})")))
    }

    pub fn table(&self) -> &BoxPlusTable {
        &self.table
    }

    /// VN-to-CN density on base edge (row, col) at iteration `l >= 1`, as
    /// seen by the CN update. Iteration 0 has no messages.
    pub fn to_cn(&self, l: usize, row: usize, col: usize) -> Result<&Density> {
        let e = self.edge(row, col)?;
        Ok(if l == 0 { &self.zero } else { &self.to_cn[self.slot(l)][e] })
    }

    /// CN-to-VN density on base edge (row, col) after iteration `l`.
    pub fn to_vn(&self, l: usize, row: usize, col: usize) -> Result<&Density> {
        let e = self.edge(row, col)?;
        Ok(if l == 0 { &self.zero } else { &self.to_vn[self.slot(l)][e] })
    }

    /// Density of the combined external inputs of a CN of type `row` whose
    /// neighbours of types `internal` belong to the set.
    pub fn virtual_vn(&self, l: usize, row: usize, internal: &[usize]) -> Result<Density> {
        let mut ins = Vec::new();
        for &e in self.base.row_edges(row) {
            let col = self.base.edges[e].1;
            if !internal.contains(&col) {
                ins.push(self.to_cn(l, row, col)?);
            }
        }
        Ok(self.table.fold(&ins))
    }

    /// Cached gain of [`Self::virtual_vn`].
    pub fn mis_gain(&self, l: usize, row: usize, internal: &[usize]) -> Result<Gain> {
        let l_eff = if l == 0 { 0 } else { l.min(self.stored()) };
        let mut key_cols = internal.to_vec();
        key_cols.sort_unstable();
        let key = (l_eff, row, key_cols);
        if let Some(g) = self.gains.lock().unwrap().get(&key) {
            return Ok(*g);
        }
        let g = gain_and_inversion(&self.virtual_vn(l_eff, row, internal)?);
        self.gains.lock().unwrap().insert(key, g);
        Ok(g)
    }

    /// Mean and variance of the message from an unsatisfied CN of type
    /// `row` to its VN of type `col`.
    pub fn unsat_stats(&self, l: usize, row: usize, col: usize) -> Result<(f64, f64)> {
        let d = self.to_vn(l, row, col)?;
        Ok((d.mean(), d.variance()))
    }

    /// Averages over the edges of `row`: (CN-to-VN, VN-to-CN).
    pub fn layer_average(&self, l: usize, row: usize) -> Result<(Density, Density)> {
        let edges = self.base.row_edges(row);
        if edges.is_empty() {
            return Err(Error::DimensionMismatch(format!("row {row} has no edges")));
        }
        let to_vn: Vec<&Density> = edges.iter().map(|&e| self.pick(&self.to_vn, l, e)).collect();
        let to_cn: Vec<&Density> = edges.iter().map(|&e| self.pick(&self.to_cn, l, e)).collect();
        Ok((Density::average(&to_vn)?, Density::average(&to_cn)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::LayerPermutation;
    use rand::distr::weighted::WeightedIndex;
    use rand::distr::Distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(step: f64, sat: f64) -> Grid {
        Grid::new(step, sat).unwrap()
    }

    #[test]
    fn grid_must_hit_saturation() {
        assert!(Grid::new(0.05, 31.75).is_ok());
        assert!(Grid::new(0.3, 1.0).is_err());
        let g = grid(0.5, 2.0);
        assert_eq!(g.len(), 9);
        assert_eq!(g.index(100.0), 8);
        assert_eq!(g.index(-0.2), 4);
    }

    #[test]
    fn gain_examples() {
        let g = grid(0.05, 31.75);
        let top = gain_and_inversion(&Density::point(g, 31.75));
        assert!((top.mean_tanh - 1.0).abs() < 1e-12 && top.p_inv == 0.0);
        let two = gain_and_inversion(&Density::point(g, 2.0));
        assert!((two.mean_tanh - 1f64.tanh()).abs() < 1e-12 && two.p_inv == 0.0);
        let mut m = vec![0.0; g.len()];
        m[g.index(-1.5)] = 0.25;
        m[g.index(1.5)] = 0.25;
        m[g.index(-4.0)] = 0.25;
        m[g.index(4.0)] = 0.25;
        let sym = gain_and_inversion(&Density::from_weights(g, m).unwrap());
        assert!(sym.mean_tanh.abs() < 1e-12);
        assert!((sym.p_inv - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moments_of_simple_densities() {
        let g = grid(0.5, 5.0);
        let top = Density::point(g, 5.0);
        assert_eq!((top.mean(), top.variance()), (5.0, 0.0));
        let mut m = vec![0.0; g.len()];
        m[g.index(1.0)] = 0.5;
        m[g.index(-1.0)] = 0.5;
        let d = Density::from_weights(g, m).unwrap();
        assert!(d.mean().abs() < 1e-15 && (d.variance() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fold_identities() {
        let g = grid(0.25, 40.0);
        let t = BoxPlusTable::new(g);
        let id = t.fold(&[]);
        assert_eq!(id, Density::point(g, 40.0));
        let ch = channel_density(g, &ChannelSpec::new(2.0, 0.5).unwrap()).unwrap();
        assert_eq!(t.fold(&[&ch]), ch);
        // Combining with the saturated point mass is nearly the identity.
        let near = t.combine(&ch, &id);
        assert!(near.total_variation(&ch) < 1e-3);
    }

    #[test]
    fn box_plus_density_matches_sampling() {
        let g = grid(0.1, 8.0);
        let t = BoxPlusTable::new(g);
        let p = channel_density(g, &ChannelSpec::new(1.0, 0.5).unwrap()).unwrap();
        let q = channel_density(g, &ChannelSpec::new(3.0, 0.5).unwrap()).unwrap();
        let exact = t.combine(&p, &q);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let wp = WeightedIndex::new(&p.mass).unwrap();
        let wq = WeightedIndex::new(&q.mass).unwrap();
        let samples =
            (0..1_000_000).map(|_| box_plus(g.value(wp.sample(&mut rng)), g.value(wq.sample(&mut rng))));
        let emp = Density::from_samples(g, samples).unwrap();
        let tv = emp.total_variation(&exact);
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn exclusive_matches_direct_folds() {
        let g = grid(0.25, 6.0);
        let t = BoxPlusTable::new(g);
        let ds: Vec<Density> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&db| channel_density(g, &ChannelSpec::new(db, 0.5).unwrap()).unwrap())
            .collect();
        let refs: Vec<&Density> = ds.iter().collect();
        let ex = t.exclusive(&refs);
        for i in 0..4 {
            let others: Vec<&Density> = (0..4).filter(|&k| k != i).map(|k| &ds[k]).collect();
            // Quantized box-plus is only approximately associative.
            let tv = ex[i].total_variation(&t.fold(&others));
            assert!(tv < 0.02, "{i}: {tv}");
        }
    }

    #[test]
    fn sum_convolution_against_direct() {
        let g = grid(0.5, 4.0);
        let a = Density::from_weights(g, (0..g.len()).map(|i| 1.0 + i as f64).collect()).unwrap();
        let b = Density::from_weights(g, (0..g.len()).map(|i| ((i * 7) % 5) as f64 + 0.5).collect()).unwrap();
        let mut direct = vec![0.0; g.len()];
        for i in 0..g.len() {
            for k in 0..g.len() {
                direct[g.index(g.value(i) + g.value(k))] += a.mass[i] * b.mass[k];
            }
        }
        let s = SumConvolver::default().sum(&[&a, &b]);
        for (x, y) in s.mass.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_moments_within_standard_errors() {
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let g = grid(0.05, 60.0);
        let d = channel_density(g, &ch).unwrap();
        let (mu, var) = (ch.llr_mean(), ch.llr_variance());
        let n = 1e6_f64;
        // Binning adds step^2/12 to the variance.
        assert!((d.mean() - mu).abs() < 3.0 * (var / n).sqrt());
        assert!((d.variance() - var).abs() < 3.0 * var * (2.0 / n).sqrt());
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_channel_saturates_at_once() {
        let base = BaseGraph::from_exponents(&crate::codes::toy_base());
        let ch = ChannelSpec::new(80.0, 0.5).unwrap();
        let tr = run_de(&base, &ch, &DeConfig::new(Schedule::Flooding, 20.0, 3)).unwrap();
        // VN-to-CN messages sit at +S_max; a CN output of saturated inputs
        // lands one box-plus correction below it.
        for l in 1..=2 {
            for &(r, c) in &base.edges {
                assert!((tr.to_cn(l, r, c).unwrap().mass[tr.grid.len() - 1] - 1.0).abs() < 1e-9);
                let out = tr.to_vn(l, r, c).unwrap();
                assert!(out.variance() < 1e-9 && out.mean() > 20.0 - 2f64.ln() - 0.1);
            }
        }
    }

    #[test]
    fn single_layer_layered_equals_flooding() {
        let e = ExponentMatrix::new(1, vec![vec![0, 0, 0, 0]]).unwrap();
        let base = BaseGraph::from_exponents(&e);
        let ch = ChannelSpec::new(1.0, 0.5).unwrap();
        let mut cfg = DeConfig::new(Schedule::Flooding, 12.0, 5);
        cfg.tolerance = 0.0;
        let fl = run_de(&base, &ch, &cfg).unwrap();
        cfg.schedule = Schedule::Layered(LayerPermutation::identity(1));
        let la = run_de(&base, &ch, &cfg).unwrap();
        for l in 1..=5 {
            for c in 0..4 {
                assert!(fl.to_vn(l, 0, c).unwrap().total_variation(la.to_vn(l, 0, c).unwrap()) <= 1e-9);
            }
        }
    }

    #[test]
    fn layered_freshness_on_toy_graph() {
        // With rows processed in order, row 1 already sees iteration-1
        // messages from row 0 on column 0, while flooding does not.
        let base = BaseGraph::from_exponents(&crate::codes::toy_base());
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let la = run_de(&base, &ch, &DeConfig::new(Schedule::Layered(LayerPermutation::identity(3)), 15.0, 2)).unwrap();
        let fl = run_de(&base, &ch, &DeConfig::new(Schedule::Flooding, 15.0, 2)).unwrap();
        let first_row_la = la.to_cn(1, 0, 0).unwrap();
        assert!(first_row_la.total_variation(&la.channel) < 1e-12);
        let second_row = la.to_cn(1, 1, 0).unwrap();
        assert!(second_row.total_variation(&la.channel) > 1e-3);
        assert!(fl.to_cn(1, 1, 0).unwrap().total_variation(&fl.channel) < 1e-12);
    }

    #[test]
    fn vn_means_grow_above_threshold() {
        let base = BaseGraph::from_exponents(&crate::codes::rate03_640());
        let ch = ChannelSpec::new(3.0, 0.3).unwrap();
        let mut cfg = DeConfig::new(Schedule::Layered(LayerPermutation::identity(7)), 20.0, 10);
        cfg.step = COARSE_STEP;
        let tr = run_de(&base, &ch, &cfg).unwrap();
        let avg = |l: usize| {
            base.edges.iter().map(|&(r, c)| tr.to_cn(l, r, c).unwrap().mean()).sum::<f64>() / base.num_edges() as f64
        };
        for l in 1..10 {
            assert!(avg(l + 1) >= avg(l) - 1e-9, "iteration {l}");
        }
    }

    #[test]
    fn virtual_vn_cases() {
        let base = BaseGraph::new(1, 4, vec![(0, 0), (0, 1), (0, 2), (0, 3)]).unwrap();
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let tr = run_de(&base, &ch, &DeConfig::new(Schedule::Flooding, 10.0, 2)).unwrap();
        let one = tr.virtual_vn(1, 0, &[0, 1, 2]).unwrap();
        assert_eq!(&one, tr.to_cn(1, 0, 3).unwrap());
        let none = tr.virtual_vn(1, 0, &[0, 1, 2, 3]).unwrap();
        assert!((gain_and_inversion(&none).mean_tanh - (5f64).tanh()).abs() < 1e-12);
        let g = tr.mis_gain(1, 0, &[1, 0]).unwrap();
        assert_eq!(g, tr.mis_gain(1, 0, &[0, 1]).unwrap());
    }

    #[test]
    fn regular_gain_power_law() {
        // For a CN-regular graph with degree-1 VNs the VN-to-CN messages are
        // the channel density, so the mean tanh of the two-input virtual VN
        // equals the square of the per-message mean tanh up to quantization.
        let base = BaseGraph::new(1, 4, vec![(0, 0), (0, 1), (0, 2), (0, 3)]).unwrap();
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let mut cfg = DeConfig::new(Schedule::Flooding, 20.0, 1);
        cfg.step = 0.01;
        let tr = run_de(&base, &ch, &cfg).unwrap();
        let single = tr.channel.tanh_mean();
        let g = tr.mis_gain(1, 0, &[0, 1]).unwrap();
        assert!((g.mean_tanh - single * single).abs() < 1e-3, "{} vs {}", g.mean_tanh, single * single);
    }

    #[test]
    fn layer_average_of_single_edge_row() {
        let base = BaseGraph::from_exponents(&crate::codes::toy_base());
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let tr = run_de(&base, &ch, &DeConfig::new(Schedule::Flooding, 10.0, 2)).unwrap();
        let (to_vn, to_cn) = tr.layer_average(2, 2).unwrap();
        let e0 = tr.to_vn(2, 2, 1).unwrap();
        let e2 = tr.to_vn(2, 2, 3).unwrap();
        let manual = Density::average(&[e0, e2]).unwrap();
        assert!(to_vn.total_variation(&manual) < 1e-15);
        assert!((to_cn.total() - 1.0).abs() < 1e-12);
    }
}
