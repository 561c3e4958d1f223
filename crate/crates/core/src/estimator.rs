//! Failure probability of a LETS from its linear model: project the state
//! onto the dominant left eigenvector, treat the projection as Gaussian and
//! read off `Q(mean / sd)`. Union-bound aggregation over TSLP groups.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::channel::ChannelSpec;
use crate::code_model::{LayerPermutation, TannerGraph};
use crate::decoder::Schedule;
use crate::density_evolution::{gain_and_inversion, run_de, BaseGraph, DeConfig, DeTrace, Density, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::lets::{group_by_tslp_with, structure_ids, Catalog, Lets};
use crate::spectral::{dominant_eigen, layered_eigenvectors};
use crate::state_space::{build_flooding_model, build_layer_matrices, composite, Composite, Labeling, LayeredModel};

/// Gaussian tail `P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// Cap on model iterations.
    pub max_iters: usize,
    /// Stop when the Q argument moves less than this.
    pub tolerance: f64,
    /// Density-evolution grid step.
    pub step: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { max_iters: 50, tolerance: 1e-4, step: DEFAULT_STEP }
    }
}

/// Message statistics that feed the model: missatisfied-CN gains and the
/// moments of unsatisfied-CN inputs.
pub trait MessageStats: Sync {
    /// Effective gain at iteration `l` of missatisfied CN `cn` whose set
    /// neighbours are `vns`.
    fn mis_gain(&self, g: &TannerGraph, l: usize, cn: usize, vns: [usize; 2]) -> Result<f64>;
    /// Mean and variance of the message from unsatisfied CN `cn` to `vn`
    /// after iteration `l` (zero for `l = 0`).
    fn unsat_moments(&self, g: &TannerGraph, l: usize, cn: usize, vn: usize) -> Result<(f64, f64)>;
}

impl MessageStats for DeTrace {
    fn mis_gain(&self, g: &TannerGraph, l: usize, cn: usize, vns: [usize; 2]) -> Result<f64> {
        Ok(DeTrace::mis_gain(self, l, g.cn_type(cn), &[g.vn_type(vns[0]), g.vn_type(vns[1])])?.effective)
    }
    fn unsat_moments(&self, g: &TannerGraph, l: usize, cn: usize, vn: usize) -> Result<(f64, f64)> {
        if l == 0 {
            return Ok((0.0, 0.0));
        }
        self.unsat_stats(l, g.cn_type(cn), g.vn_type(vn))
    }
}

/// Layer-averaged statistics of a reference run. A CN processed at
/// schedule position `p` is described by the averages of the row the
/// reference schedule processes at `p`, whatever schedule is evaluated.
pub struct AveragedStats {
    reference_rows: Vec<usize>,
    stored: usize,
    /// `[l-1][position]` VN-to-CN average.
    to_cn: Vec<Vec<Density>>,
    /// `[l-1][position]` mean and variance of the CN-to-VN average.
    moments: Vec<Vec<(f64, f64)>>,
    trace: DeTrace,
    gains: Mutex<HashMap<(usize, usize, usize), f64>>,
}

impl AveragedStats {
    pub fn new(trace: DeTrace) -> Result<Self> {
        let reference_rows = match &trace.schedule {
            Schedule::Layered(p) => p.order().to_vec(),
            Schedule::Flooding => (0..trace.base.rows).collect(),
        };
        let mut to_cn = Vec::new();
        let mut moments = Vec::new();
        for l in 1..=trace.stored() {
            let mut cn_l = Vec::new();
            let mut mo_l = Vec::new();
            for &row in &reference_rows {
                let (vn_avg, cn_avg) = trace.layer_average(l, row)?;
                mo_l.push((vn_avg.mean(), vn_avg.variance()));
                cn_l.push(cn_avg);
            }
            to_cn.push(cn_l);
            moments.push(mo_l);
        }
        Ok(AveragedStats {
            reference_rows,
            stored: trace.stored(),
            to_cn,
            moments,
            trace,
            gains: Mutex::new(HashMap::new()),
        })
    }

    pub fn trace(&self) -> &DeTrace {
        &self.trace
    }

    pub fn reference_rows(&self) -> &[usize] {
        &self.reference_rows
    }

    /// View for one evaluated schedule.
    pub fn view<'a>(&'a self, perm: &LayerPermutation) -> AveragedView<'a> {
        AveragedView { avg: self, positions: perm.positions() }
    }

    fn gain(&self, l: usize, pos: usize, externals: usize) -> f64 {
        let l = l.clamp(1, self.stored);
        let key = (l, pos, externals);
        if let Some(&g) = self.gains.lock().unwrap().get(&key) {
            return g;
        }
        let d = &self.to_cn[l - 1][pos];
        let parts: Vec<&Density> = std::iter::repeat_n(d, externals).collect();
        let g = gain_and_inversion(&self.trace.table().fold(&parts)).effective;
        self.gains.lock().unwrap().insert(key, g);
        g
    }
}

pub struct AveragedView<'a> {
    avg: &'a AveragedStats,
    positions: Vec<usize>,
}

impl MessageStats for AveragedView<'_> {
    fn mis_gain(&self, g: &TannerGraph, l: usize, cn: usize, _vns: [usize; 2]) -> Result<f64> {
        let pos = self.positions[g.cn_type(cn)];
        Ok(self.avg.gain(l, pos, g.cn_degree(cn).saturating_sub(2)))
    }
    fn unsat_moments(&self, g: &TannerGraph, l: usize, cn: usize, _vn: usize) -> Result<(f64, f64)> {
        if l == 0 {
            return Ok((0.0, 0.0));
        }
        let pos = self.positions[g.cn_type(cn)];
        Ok(self.avg.moments[l.min(self.avg.stored) - 1][pos])
    }
}

/// Coefficient vectors of the projected state after a run of steps:
/// `beta = channel . L + sum_k (prev[k] . e_(k-1) + cur[k] . e_k)`, with
/// `e_k` the unsatisfied inputs of step `k + 1` (0-based steps).
#[derive(Clone, Debug)]
pub struct GammaExpansion {
    pub channel: DVector<f64>,
    pub prev: Vec<DVector<f64>>,
    pub cur: Vec<DVector<f64>>,
}

/// Backward sweep of `w^T` through the step matrices; no products of
/// matrices are formed.
pub fn gamma_expansion(steps: &[Composite], w: &DVector<f64>) -> GammaExpansion {
    let a_n = steps.first().map_or(0, |s| s.b_tilde.ncols());
    let mut row = w.transpose();
    let mut channel = DVector::zeros(a_n);
    let mut prev = vec![DVector::zeros(0); steps.len()];
    let mut cur = vec![DVector::zeros(0); steps.len()];
    for (k, s) in steps.iter().enumerate().rev() {
        channel += (&row * &s.b_tilde).transpose();
        prev[k] = (&row * &s.b_ex_prev).transpose();
        cur[k] = (&row * &s.b_ex_cur).transpose();
        row = &row * &s.a_tilde;
    }
    GammaExpansion { channel, prev, cur }
}

impl GammaExpansion {
    /// Coefficient of the unsatisfied inputs of step `k` (0-based), which
    /// enter step `k` as current and step `k + 1` as previous inputs.
    pub fn ex_coefficient(&self, k: usize) -> DVector<f64> {
        let mut c = self.cur[k].clone();
        if k + 1 < self.prev.len() {
            c += &self.prev[k + 1];
        }
        c
    }

    /// Indicator for concrete inputs; `ex[k]` are the inputs of step `k`.
    pub fn evaluate(&self, channel: &DVector<f64>, ex: &[DVector<f64>]) -> f64 {
        let mut beta = self.channel.dot(channel);
        for k in 0..self.cur.len() {
            beta += self.ex_coefficient(k).dot(&ex[k]);
        }
        beta
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IndicatorStep {
    pub iteration: usize,
    pub mean: f64,
    pub variance: f64,
}

impl IndicatorStep {
    pub fn q_argument(&self) -> f64 {
        self.mean / self.variance.sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LetsEstimate {
    pub p_e: f64,
    pub q_argument: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dominant eigenvalue of the transition matrix used for projection.
    pub dominant: f64,
    pub history: Vec<IndicatorStep>,
}

/// Per-step model for the estimator: `steps[k]` maps the state of step
/// `k` to step `k + 1` and `inputs(k)` gives the mean and variance of
/// every unsatisfied input of step `k`.
struct StepModel<'a> {
    step: Box<dyn Fn(usize) -> Result<Composite> + 'a>,
    inputs: Box<dyn Fn(usize) -> Result<Vec<(f64, f64)>> + 'a>,
    w: DVector<f64>,
    dominant: f64,
}

fn run_indicator(model: StepModel<'_>, ch_mean: f64, ch_var: f64, cfg: &EstimatorConfig) -> Result<LetsEstimate> {
    let mut steps: Vec<Composite> = Vec::new();
    let mut inputs: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut history = Vec::new();
    let mut last_q: Option<f64> = None;
    for horizon in 1..=cfg.max_iters.max(1) {
        steps.push((model.step)(horizon - 1)?);
        inputs.push((model.inputs)(horizon - 1)?);
        let gx = gamma_expansion(&steps, &model.w);
        let mut mean = ch_mean * gx.channel.sum();
        let mut variance = ch_var * gx.channel.norm_squared();
        for (k, inp) in inputs.iter().enumerate() {
            let c = gx.ex_coefficient(k);
            for (u, &(m, v)) in inp.iter().enumerate() {
                mean += c[u] * m;
                variance += c[u] * c[u] * v;
            }
        }
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::DeDivergence(format!(
                "indicator has mean {mean}, variance {variance} at iteration {horizon}"
            )));
        }
        let st = IndicatorStep { iteration: horizon, mean, variance };
        let q = st.q_argument();
        history.push(st);
        if let Some(prev) = last_q {
            if (q - prev).abs() < cfg.tolerance {
                return Ok(LetsEstimate {
                    p_e: q_function(q),
                    q_argument: q,
                    iterations: horizon,
                    converged: true,
                    dominant: model.dominant,
                    history,
                });
            }
        }
        last_q = Some(q);
    }
    let q = last_q.unwrap();
    Ok(LetsEstimate {
        p_e: q_function(q),
        q_argument: q,
        iterations: history.len(),
        converged: false,
        dominant: model.dominant,
        history,
    })
}

/// Per-state gains at iteration `l`: each state takes the gain of its
/// missatisfied CN.
fn state_gains(g: &TannerGraph, lets: &Lets, labeling: &Labeling, stats: &dyn MessageStats, l: usize) -> Result<Vec<f64>> {
    let mut per_cn = vec![f64::NAN; lets.misatisfied.len()];
    for (k, m) in lets.misatisfied.iter().enumerate() {
        per_cn[k] = stats.mis_gain(g, l, m.cn, m.vns)?;
    }
    Ok(labeling.states.iter().map(|s| per_cn[s.mis]).collect())
}

fn unsat_inputs(g: &TannerGraph, lets: &Lets, stats: &dyn MessageStats, l: usize) -> Result<Vec<(f64, f64)>> {
    lets.unsatisfied.iter().map(|u| stats.unsat_moments(g, l, u.cn, u.vn)).collect()
}

/// Left vector used for the projection of a layered model.
pub fn layered_projection(model: &LayeredModel) -> Result<(f64, DVector<f64>)> {
    let e = layered_eigenvectors(&composite(model, None).a_tilde)?;
    Ok((e.r_tilde, e.left))
}

/// Failure probability of `lets` under a row-layered schedule.
pub fn layered_failure_probability(
    g: &TannerGraph,
    lets: &Lets,
    perm: &LayerPermutation,
    stats: &dyn MessageStats,
    ch: &ChannelSpec,
    cfg: &EstimatorConfig,
) -> Result<LetsEstimate> {
    let model = build_layer_matrices(g, lets, perm)?;
    let (r, w) = layered_projection(&model)?;
    let labeling = &model.flooding.labeling;
    let m = &model;
    let sm = StepModel {
        step: Box::new(move |k| Ok(composite(m, Some(&state_gains(g, lets, labeling, stats, k + 1)?)))),
        inputs: Box::new(move |k| unsat_inputs(g, lets, stats, k + 1)),
        w,
        dominant: r,
    };
    run_indicator(sm, ch.llr_mean(), ch.llr_variance(), cfg)
}

/// Failure probability of `lets` under flooding with one scalar gain per
/// iteration (the mean of the set's missatisfied-CN gains). Step 1 is the
/// channel-only first iteration; later steps use the CN outputs of the
/// previous iteration.
pub fn flooding_failure_probability(
    g: &TannerGraph,
    lets: &Lets,
    stats: &dyn MessageStats,
    ch: &ChannelSpec,
    cfg: &EstimatorConfig,
) -> Result<LetsEstimate> {
    let labeling = Labeling::systematic(lets, |c| g.cn_type(c));
    let fm = build_flooding_model(lets, &labeling)?;
    let (r, w) = if lets.is_simple_cycle() {
        (1.0, DVector::from_element(fm.a.nrows(), 1.0))
    } else {
        let e = dominant_eigen(&fm.a)?;
        (e.value, e.left)
    };
    let (ms, b_n) = (fm.a.nrows(), fm.b_ex.ncols());
    let fmr = &fm;
    let step = move |k: usize| -> Result<Composite> {
        if k == 0 {
            return Ok(Composite {
                a_tilde: DMatrix::zeros(ms, ms),
                b_tilde: fmr.b.clone(),
                b_ex_prev: DMatrix::zeros(ms, b_n),
                b_ex_cur: DMatrix::zeros(ms, b_n),
            });
        }
        let gains = state_gains(g, lets, &fmr.labeling, stats, k)?;
        let scalar = gains.iter().sum::<f64>() / gains.len().max(1) as f64;
        Ok(Composite {
            a_tilde: &fmr.a * scalar,
            b_tilde: &fmr.b * scalar,
            b_ex_prev: DMatrix::zeros(ms, b_n),
            b_ex_cur: &fmr.b_ex * scalar,
        })
    };
    let sm = StepModel {
        step: Box::new(step),
        inputs: Box::new(move |k| unsat_inputs(g, lets, stats, k)),
        w,
        dominant: r,
    };
    run_indicator(sm, ch.llr_mean(), ch.llr_variance(), cfg)
}

/// Estimate for a TSLP group: one representative stands for all members.
#[derive(Clone, Debug, Serialize)]
pub struct GroupEstimate {
    pub structure_id: String,
    pub class: (usize, usize),
    pub size: usize,
    /// Catalog indices of the members.
    pub members: Vec<usize>,
    pub p_e: f64,
    pub q_argument: f64,
    pub dominant: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FloorEstimate {
    pub groups: Vec<GroupEstimate>,
    /// Union-bound frame failure probability.
    pub total: f64,
}

impl FloorEstimate {
    pub fn by_class(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for gr in &self.groups {
            *out.entry(gr.class).or_insert(0.0) += gr.size as f64 * gr.p_e;
        }
        out
    }
}

/// `sum size * P_e` over the groups.
pub fn error_floor(groups: Vec<GroupEstimate>) -> FloorEstimate {
    let total = groups.iter().map(|gr| gr.size as f64 * gr.p_e).sum();
    FloorEstimate { groups, total }
}

/// Groups a catalog by TSLP under `perm` and estimates every group with
/// the given statistics. `layered = false` selects the flooding model.
pub fn estimate_groups(
    g: &TannerGraph,
    catalog: &Catalog,
    ids: &[String],
    perm: &LayerPermutation,
    layered: bool,
    stats: &dyn MessageStats,
    ch: &ChannelSpec,
    cfg: &EstimatorConfig,
) -> Result<FloorEstimate> {
    let sets: Vec<&Lets> = catalog.entries.iter().collect();
    let groups = group_by_tslp_with(g, &sets, ids, perm);
    let est: Result<Vec<GroupEstimate>> = groups
        .par_iter()
        .map(|gr| {
            let rep = sets[gr.members[0]];
            let e = if layered {
                layered_failure_probability(g, rep, perm, stats, ch, cfg)?
            } else {
                flooding_failure_probability(g, rep, stats, ch, cfg)?
            };
            Ok(GroupEstimate {
                structure_id: gr.structure_id.clone(),
                class: rep.class(),
                size: gr.members.len(),
                members: gr.members.clone(),
                p_e: e.p_e,
                q_argument: e.q_argument,
                dominant: e.dominant,
                iterations: e.iterations,
                converged: e.converged,
            })
        })
        .collect();
    Ok(error_floor(est?))
}

/// Runs density evolution for `schedule` and estimates the error floor
/// of the catalogued sets at one SNR.
pub fn estimate_error_floor(
    g: &TannerGraph,
    catalog: &Catalog,
    schedule: &Schedule,
    ch: &ChannelSpec,
    saturation: f64,
    cfg: &EstimatorConfig,
) -> Result<FloorEstimate> {
    if catalog.is_empty() {
        return Err(Error::InvalidConfig("the trapping-set catalog is empty".into()));
    }
    let base = BaseGraph::from_tanner(g);
    let mut de_cfg = DeConfig::new(schedule.clone(), saturation, cfg.max_iters.max(1));
    de_cfg.step = cfg.step;
    let trace = run_de(&base, ch, &de_cfg)?;
    let sets: Vec<&Lets> = catalog.entries.iter().collect();
    let ids = structure_ids(g, &sets);
    match schedule {
        Schedule::Layered(p) => estimate_groups(g, catalog, &ids, p, true, &trace, ch, cfg),
        Schedule::Flooding => {
            let ident = LayerPermutation::identity(g.num_layers());
            estimate_groups(g, catalog, &ids, &ident, false, &trace, ch, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes;
    use crate::fixtures::five_three;
    use crate::lets::{enumerate_lets, EnumerationConfig};
    use crate::state_space::layered_trajectory;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Constant statistics for model-level tests.
    struct Fixed {
        gain: f64,
        unsat: (f64, f64),
    }
    impl MessageStats for Fixed {
        fn mis_gain(&self, _: &TannerGraph, _: usize, _: usize, _: [usize; 2]) -> Result<f64> {
            Ok(self.gain)
        }
        fn unsat_moments(&self, _: &TannerGraph, l: usize, _: usize, _: usize) -> Result<(f64, f64)> {
            Ok(if l == 0 { (0.0, 0.0) } else { self.unsat })
        }
    }

    #[test]
    fn q_function_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        let q1 = q_function(1.0);
        assert!((q1 - 0.158_655_253_931_457_07).abs() < 1e-9, "{q1}");
        assert!((q_function(6.0) / 9.865_876_450_376_946e-10 - 1.0).abs() < 1e-8);
        assert_eq!(q_function(f64::INFINITY), 0.0);
    }

    #[test]
    fn error_floor_arithmetic() {
        assert_eq!(error_floor(Vec::new()).total, 0.0);
        let gr = GroupEstimate {
            structure_id: "x".into(),
            class: (5, 5),
            size: 64,
            members: (0..64).collect(),
            p_e: 1e-8,
            q_argument: 5.6,
            dominant: 12.4,
            iterations: 3,
            converged: true,
        };
        let f = error_floor(vec![gr]);
        assert!((f.total - 6.4e-7).abs() < 1e-20);
        assert!((f.by_class()[&(5, 5)] - 6.4e-7).abs() < 1e-20);
    }

    #[test]
    fn gamma_expansion_matches_trajectory() {
        let fx = five_three();
        let model = fx.layered_model();
        let (_, w) = layered_projection(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let steps = 6;
        let ms = model.num_states();
        for _ in 0..20 {
            let ch = DVector::from_fn(5, |_, _| rng.random_range(-3.0..3.0));
            let ex: Vec<DVector<f64>> = (0..steps).map(|_| DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0))).collect();
            let gains: Vec<Vec<f64>> = (0..steps).map(|_| (0..ms).map(|_| rng.random_range(0.2..1.0)).collect()).collect();
            let traj = layered_trajectory(&model, &ch, &ex, &gains);
            let comps: Vec<Composite> = gains.iter().map(|g| composite(&model, Some(g))).collect();
            for l in 1..=steps {
                let gx = gamma_expansion(&comps[..l], &w);
                let direct = w.dot(&traj[l - 1]);
                let via = gx.evaluate(&ch, &ex[..l]);
                assert!((direct - via).abs() <= 1e-9 * direct.abs().max(1.0), "{direct} vs {via}");
            }
        }
    }

    #[test]
    fn zero_weight_positions_do_not_matter() {
        let fx = five_three();
        let model = fx.layered_model();
        let e = layered_eigenvectors(&composite(&model, None).a_tilde).unwrap();
        for &i in &e.fnf.order[..e.fnf.n_z] {
            assert_eq!(e.left[i], 0.0);
        }
    }

    #[test]
    fn degenerate_and_extreme_inputs() {
        let g = TannerGraph::from_exponents(&codes::tanner_155());
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let lets = cat.of_class(5, 3)[0].clone();
        let perm = LayerPermutation::identity(3);
        let cfg = EstimatorConfig::default();
        // Unit gains, saturated unsatisfied inputs, strong channel.
        let strong = Fixed { gain: 1.0, unsat: (31.0, 0.0) };
        let ch = ChannelSpec::new(12.0, g.rate()).unwrap();
        let e = layered_failure_probability(&g, &lets, &perm, &strong, &ch, &cfg).unwrap();
        assert!(e.p_e < 1e-12, "{}", e.p_e);
        // Zero-mean symmetric inputs everywhere give one half.
        let weak = Fixed { gain: 0.5, unsat: (0.0, 1.0) };
        let model = build_layer_matrices(&g, &lets, &perm).unwrap();
        let (r, w) = layered_projection(&model).unwrap();
        let mref = &model;
        let sm = StepModel {
            step: Box::new(move |_| Ok(composite(mref, None))),
            inputs: Box::new(|_| Ok(vec![(0.0, 1.0); 3])),
            w,
            dominant: r,
        };
        let half = run_indicator(sm, 0.0, 1.0, &cfg).unwrap();
        assert!((half.p_e - 0.5).abs() < 1e-12);
        let fl = flooding_failure_probability(&g, &lets, &weak, &ch, &cfg).unwrap();
        assert!(fl.p_e < 0.5 && fl.dominant > 1.0);
    }

    #[test]
    fn higher_saturation_lowers_estimate() {
        let e = codes::rate03_640();
        let g = TannerGraph::from_exponents(&e);
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 5)).unwrap();
        let lets = cat.of_class(5, 5)[0].clone();
        let perm = LayerPermutation::identity(7);
        let ch = ChannelSpec::new(6.0, g.rate()).unwrap();
        let mut cfg = EstimatorConfig::default();
        cfg.step = 0.25;
        let base = BaseGraph::from_tanner(&g);
        let at = |sat: f64| {
            let tr = run_de(&base, &ch, &DeConfig { step: 0.25, ..DeConfig::new(Schedule::Layered(perm.clone()), sat, 50) }).unwrap();
            layered_failure_probability(&g, &lets, &perm, &tr, &ch, &cfg).unwrap().p_e
        };
        let (lo, hi) = (at(15.75), at(31.75));
        assert!(hi < lo, "{hi} vs {lo}");
    }

    #[test]
    fn averaged_view_uses_schedule_positions() {
        let g = TannerGraph::from_exponents(&codes::toy_base());
        let base = BaseGraph::from_tanner(&g);
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let tr = run_de(&base, &ch, &DeConfig::new(Schedule::Layered(LayerPermutation::identity(3)), 10.0, 4)).unwrap();
        let (vn0, _) = tr.layer_average(2, 0).unwrap();
        let avg = AveragedStats::new(tr).unwrap();
        // Under (3,1,2) row 2 is processed first, so it borrows row 0's averages.
        let perm = LayerPermutation::new(vec![2, 0, 1]).unwrap();
        let view = avg.view(&perm);
        let cn_row2 = 2;
        let (m, v) = view.unsat_moments(&g, 2, cn_row2, 1).unwrap();
        assert!((m - vn0.mean()).abs() < 1e-12 && (v - vn0.variance()).abs() < 1e-12);
    }
}
