//! Saturating sum-product decoding with flooding and row-layered schedules.

use serde::{Deserialize, Serialize};

use crate::code_model::{LayerPermutation, TannerGraph};
use crate::error::{Error, Result};

/// Pairwise box-plus: `sign(a) sign(b) min(|a|,|b|) + ln(1+e^-|a+b|) - ln(1+e^-|a-b|)`.
#[inline]
pub fn box_plus(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    let signed = if (a < 0.0) != (b < 0.0) { -m } else { m };
    signed + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

#[inline]
pub fn clip(x: f64, sat: f64) -> f64 {
    x.clamp(-sat, sat)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckRule {
    BoxPlus,
    MinSum,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    Flooding,
    Layered(LayerPermutation),
}

impl Schedule {
    /// `flooding` or a 1-based comma-separated layer order.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("flooding") {
            Ok(Schedule::Flooding)
        } else {
            Ok(Schedule::Layered(LayerPermutation::parse(s)?))
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::Flooding => write!(f, "flooding"),
            Schedule::Layered(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub max_iters: usize,
    pub saturation: f64,
    pub rule: CheckRule,
    pub schedule: Schedule,
}

impl DecoderConfig {
    pub fn layered(perm: LayerPermutation, max_iters: usize, saturation: f64) -> Self {
        Self { max_iters, saturation, rule: CheckRule::BoxPlus, schedule: Schedule::Layered(perm) }
    }

    pub fn flooding(max_iters: usize, saturation: f64) -> Self {
        Self { max_iters, saturation, rule: CheckRule::BoxPlus, schedule: Schedule::Flooding }
    }

    pub fn validate(&self, graph: &TannerGraph) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.saturation.is_finite() && self.saturation > 0.0) {
            return Err(Error::InvalidConfig(format!("saturation {} must be positive", self.saturation)));
        }
        if let Schedule::Layered(p) = &self.schedule {
            p.check_len(graph.num_layers())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    pub hard: Vec<u8>,
    pub total_llr: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Positions of 1s in the hard decision after each of the last iterations
    /// (oldest first), when tracing was requested.
    pub recent_supports: Vec<Vec<usize>>,
}

impl DecodeOutcome {
    pub fn support(&self) -> Vec<usize> {
        self.hard.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect()
    }

    /// The hard-decision support was identical over the whole trace window.
    pub fn is_trapped(&self, window: usize) -> bool {
        self.recent_supports.len() >= window
            && self.recent_supports.windows(2).all(|w| w[0] == w[1])
    }
}

/// Reusable decoder; allocates its message buffers once.
pub struct Decoder<'g> {
    graph: &'g TannerGraph,
    config: DecoderConfig,
    layer_cns: Vec<std::ops::Range<usize>>,
    channel: Vec<f64>,
    c2v: Vec<f64>,
    v2c: Vec<f64>,
    total: Vec<f64>,
    hard: Vec<u8>,
    fwd: Vec<f64>,
    out: Vec<f64>,
}

impl<'g> Decoder<'g> {
    pub fn new(graph: &'g TannerGraph, config: DecoderConfig) -> Result<Self> {
        config.validate(graph)?;
        let rb = graph.matrix().row_block();
        let layer_cns = match &config.schedule {
            Schedule::Layered(p) => p.order().iter().map(|&t| t * rb..(t + 1) * rb).collect(),
            Schedule::Flooding => vec![0..graph.m()],
        };
        let max_dc = (0..graph.m()).map(|c| graph.cn_degree(c)).max().unwrap_or(0);
        Ok(Self {
            graph,
            config,
            layer_cns,
            channel: vec![0.0; graph.n()],
            c2v: vec![0.0; graph.num_edges()],
            v2c: vec![0.0; graph.num_edges()],
            total: vec![0.0; graph.n()],
            hard: vec![0; graph.n()],
            fwd: vec![0.0; max_dc],
            out: vec![0.0; max_dc],
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    /// CN-to-VN messages left by the last decode, in edge order.
    pub fn check_messages(&self) -> &[f64] {
        &self.c2v
    }

    pub fn decode(&mut self, channel: &[f64]) -> Result<DecodeOutcome> {
        self.decode_traced(channel, 0)
    }

    /// Decodes and keeps the hard-decision supports of the last `window` iterations.
    pub fn decode_traced(&mut self, channel: &[f64], window: usize) -> Result<DecodeOutcome> {
        let g = self.graph;
        if channel.len() != g.n() {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} LLRs, code length is {}",
                channel.len(),
                g.n()
            )));
        }
        let sat = self.config.saturation;
        for (dst, &l) in self.channel.iter_mut().zip(channel) {
            *dst = clip(l, sat);
        }
        self.total.copy_from_slice(&self.channel);
        self.c2v.iter_mut().for_each(|x| *x = 0.0);
        let mut recent: std::collections::VecDeque<Vec<usize>> = Default::default();
        let mut iterations = 0;
        let mut converged = false;
        for _ in 0..self.config.max_iters {
            iterations += 1;
            match self.config.schedule {
                Schedule::Layered(_) => self.layered_iteration(),
                Schedule::Flooding => self.flooding_iteration(),
            }
            for (h, &t) in self.hard.iter_mut().zip(&self.total) {
                *h = u8::from(t < 0.0);
            }
            if window > 0 {
                if recent.len() == window {
                    recent.pop_front();
                }
                recent.push_back(
                    self.hard.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect(),
                );
            }
            if g.matrix().syndrome_ok(&self.hard) {
                converged = true;
                break;
            }
        }
        Ok(DecodeOutcome {
            hard: self.hard.clone(),
            total_llr: self.total.clone(),
            iterations,
            converged,
            recent_supports: recent.into_iter().collect(),
        })
    }

    fn layered_iteration(&mut self) {
        for li in 0..self.layer_cns.len() {
            for c in self.layer_cns[li].clone() {
                let edges = self.graph.cn_edges(c);
                for e in edges.clone() {
                    let v = self.graph.edge_vn(e);
                    self.v2c[e] = self.total[v] - self.c2v[e];
                }
                self.check_update(edges.clone());
                for e in edges {
                    let v = self.graph.edge_vn(e);
                    self.total[v] = self.v2c[e] + self.c2v[e];
                }
            }
        }
    }

    fn flooding_iteration(&mut self) {
        let g = self.graph;
        for e in 0..g.num_edges() {
            self.v2c[e] = self.total[g.edge_vn(e)] - self.c2v[e];
        }
        for c in 0..g.m() {
            self.check_update(g.cn_edges(c));
        }
        for v in 0..g.n() {
            let s: f64 = g.vn_edges(v).iter().map(|&e| self.c2v[e]).sum();
            self.total[v] = self.channel[v] + s;
        }
    }

    /// Extrinsic check update over one CN's edges, reading `v2c`, writing `c2v`.
    fn check_update(&mut self, edges: std::ops::Range<usize>) {
        let sat = self.config.saturation;
        let d = edges.len();
        let q = &self.v2c[edges.clone()];
        let out = &mut self.out[..d];
        match self.config.rule {
            CheckRule::BoxPlus => {
                if d == 1 {
                    out[0] = sat;
                } else {
                    let fwd = &mut self.fwd[..d];
                    fwd[0] = q[0];
                    for k in 1..d {
                        fwd[k] = box_plus(fwd[k - 1], q[k]);
                    }
                    let mut bwd = q[d - 1];
                    out[d - 1] = fwd[d - 2];
                    for k in (1..d - 1).rev() {
                        out[k] = box_plus(fwd[k - 1], bwd);
                        bwd = box_plus(q[k], bwd);
                    }
                    out[0] = bwd;
                }
            }
            CheckRule::MinSum => {
                let (mut m1, mut m2, mut arg) = (f64::INFINITY, f64::INFINITY, 0);
                let mut neg = false;
                for (k, &x) in q.iter().enumerate() {
                    let a = x.abs();
                    neg ^= x < 0.0;
                    if a < m1 {
                        m2 = m1;
                        m1 = a;
                        arg = k;
                    } else if a < m2 {
                        m2 = a;
                    }
                }
                for (k, &x) in q.iter().enumerate() {
                    let mag = if k == arg { m2 } else { m1 };
                    let s = neg ^ (x < 0.0);
                    out[k] = if s { -mag } else { mag };
                }
            }
        }
        for (k, e) in edges.enumerate() {
            self.c2v[e] = clip(out[k], sat);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::ExponentMatrix;
    use proptest::prelude::*;

    fn tanh_rule(a: f64, b: f64) -> f64 {
        2.0 * ((a / 2.0).tanh() * (b / 2.0).tanh()).atanh()
    }

    #[test]
    fn box_plus_reference_values() {
        assert!((box_plus(2.0, 2.0) - 1.3250027473578645).abs() < 1e-12);
        assert!((box_plus(2.0, 2.0) - ((1.0 + 4f64.exp()) / (2.0 * 2f64.exp())).ln()).abs() < 1e-12);
        assert!((box_plus(3.0, -1.0) + 0.8912219168748373).abs() < 1e-12);
        assert_eq!(box_plus(5.0, 0.0), 0.0);
        assert_eq!(box_plus(-7.5, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn box_plus_matches_tanh_rule(a in -12.0f64..12.0, b in -12.0f64..12.0) {
            prop_assert!((box_plus(a, b) - tanh_rule(a, b)).abs() < 1e-9);
        }

        #[test]
        fn box_plus_symmetric_and_bounded(a in -40.0f64..40.0, b in -40.0f64..40.0) {
            let x = box_plus(a, b);
            prop_assert_eq!(x, box_plus(b, a));
            prop_assert!(x.abs() <= a.abs().min(b.abs()) + 1e-12);
        }

        #[test]
        fn box_plus_associative(a in -15.0f64..15.0, b in -15.0f64..15.0, c in -15.0f64..15.0) {
            prop_assert!((box_plus(box_plus(a, b), c) - box_plus(a, box_plus(b, c))).abs() < 1e-9);
        }
    }

    fn small_graph() -> TannerGraph {
        TannerGraph::from_exponents(&crate::codes::tanner_155())
    }

    #[test]
    fn clean_channel_decodes_in_one_iteration() {
        let g = small_graph();
        let mut dec = Decoder::new(&g, DecoderConfig::layered(LayerPermutation::identity(3), 10, 20.0)).unwrap();
        let out = dec.decode(&vec![4.0; g.n()]).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn single_error_is_corrected_by_all_schedules() {
        let g = small_graph();
        let mut llr = vec![2.5; g.n()];
        llr[17] = -1.5;
        for sched in ["1,2,3", "3,1,2", "flooding"] {
            for rule in [CheckRule::BoxPlus, CheckRule::MinSum] {
                let cfg = DecoderConfig {
                    max_iters: 20,
                    saturation: 15.75,
                    rule,
                    schedule: Schedule::parse(sched).unwrap(),
                };
                let out = Decoder::new(&g, cfg).unwrap().decode(&llr).unwrap();
                assert!(out.converged, "{sched}");
                assert!(out.hard.iter().all(|&b| b == 0));
            }
        }
    }

    #[test]
    fn config_validation() {
        let g = small_graph();
        assert!(Decoder::new(&g, DecoderConfig::flooding(0, 10.0)).is_err());
        assert!(Decoder::new(&g, DecoderConfig::flooding(5, -1.0)).is_err());
        assert!(Decoder::new(&g, DecoderConfig::layered(LayerPermutation::identity(4), 5, 10.0)).is_err());
    }

    /// A literal transcription of the layered algorithm with per-edge left folds.
    fn reference_layered(g: &TannerGraph, perm: &LayerPermutation, ch: &[f64], iters: usize, sat: f64) -> Vec<f64> {
        let mut total: Vec<f64> = ch.iter().map(|&x| clip(x, sat)).collect();
        let mut c2v = vec![0.0; g.num_edges()];
        let rb = g.matrix().row_block();
        for _ in 0..iters {
            for &t in perm.order() {
                for c in t * rb..(t + 1) * rb {
                    let es: Vec<usize> = g.cn_edges(c).collect();
                    let q: Vec<f64> = es.iter().map(|&e| total[g.edge_vn(e)] - c2v[e]).collect();
                    for (k, &e) in es.iter().enumerate() {
                        let mut acc: Option<f64> = None;
                        for (k2, &x) in q.iter().enumerate() {
                            if k2 != k {
                                acc = Some(acc.map_or(x, |a| box_plus(a, x)));
                            }
                        }
                        c2v[e] = clip(acc.unwrap_or(sat), sat);
                        total[g.edge_vn(e)] = q[k] + c2v[e];
                    }
                }
            }
        }
        total
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn layered_matches_literal_algorithm(noise in proptest::collection::vec(-2.0f64..2.0, 155), perm_idx in 0usize..6) {
            let g = small_graph();
            let perm = LayerPermutation::all(3)[perm_idx].clone();
            let ch: Vec<f64> = noise.iter().map(|n| 1.2 + 2.0 * n).collect();
            let cfg = DecoderConfig::layered(perm.clone(), 3, 9.75);
            let mut dec = Decoder::new(&g, cfg).unwrap();
            let out = dec.decode(&ch).unwrap();
            let reference = reference_layered(&g, &perm, &ch, out.iterations, 9.75);
            for (a, b) in out.total_llr.iter().zip(&reference) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn check_messages_respect_saturation(noise in proptest::collection::vec(-3.0f64..3.0, 155), iters in 1usize..8) {
            let g = small_graph();
            let ch: Vec<f64> = noise.iter().map(|n| 4.0 * (1.0 + n)).collect();
            for sched in ["1,2,3", "flooding"] {
                let cfg = DecoderConfig { max_iters: iters, saturation: 3.75, rule: CheckRule::BoxPlus, schedule: Schedule::parse(sched).unwrap() };
                let mut dec = Decoder::new(&g, cfg).unwrap();
                let out = dec.decode(&ch).unwrap();
                prop_assert!(dec.check_messages().iter().all(|x| x.abs() <= 3.75));
                // channel and every incoming message are clipped, the sum is not
                prop_assert!(out.total_llr.iter().all(|x| x.abs() <= 4.0 * 3.75 + 1e-12));
            }
        }
    }

    #[test]
    fn unit_lift_code_layers_are_rows() {
        let e = ExponentMatrix::parse("1 3 4\n0 0 0 -1\n0 -1 0 0\n-1 0 -1 0\n").unwrap();
        let g = TannerGraph::from_exponents(&e);
        assert_eq!(g.num_layers(), 3);
        let out = Decoder::new(&g, DecoderConfig::layered(LayerPermutation::parse("3,1,2").unwrap(), 5, 10.0))
            .unwrap()
            .decode(&[1.0, 1.0, 1.0, 1.0])
            .unwrap();
        assert!(out.converged);
    }
}
