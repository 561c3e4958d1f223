//! Two-step search over layer orders. Step 1 scores every order with
//! layer-averaged statistics from one reference DE run; step 2 reruns exact
//! DE for a shortlist drawn from the orders with the smallest dominant
//! eigenvalue.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelSpec;
use crate::code_model::{LayerPermutation, TannerGraph};
use crate::decoder::Schedule;
use crate::density_evolution::{run_de, BaseGraph, DeConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_groups, AveragedStats, EstimatorConfig, FloorEstimate};
use crate::lets::{structure_ids, Catalog, Lets};

/// Orders differing by less than this in `r_tilde` share a bucket.
pub const R_TILDE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchConfig {
    pub shortlist: usize,
    /// Evaluate this many random orders instead of all of them.
    pub sample: Option<usize>,
    pub seed: u64,
    /// Largest layer count searched exhaustively without `sample`.
    pub max_exhaustive_layers: usize,
    pub saturation: f64,
    pub estimator: EstimatorConfig,
}

impl SearchConfig {
    pub fn new(saturation: f64) -> Self {
        SearchConfig {
            shortlist: 10,
            sample: None,
            seed: 1,
            max_exhaustive_layers: 8,
            saturation,
            estimator: EstimatorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleRow {
    pub schedule: LayerPermutation,
    /// Largest dominant eigenvalue over the catalogue's groups.
    pub r_tilde: f64,
    pub step1_estimate: f64,
    pub step2_estimate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleReport {
    /// Ranked: shortlisted orders by exact estimate, then the rest by
    /// step-1 estimate.
    pub rows: Vec<ScheduleRow>,
    pub reference: LayerPermutation,
}

impl ScheduleReport {
    pub fn winner(&self) -> &ScheduleRow {
        &self.rows[0]
    }

    pub fn shortlisted(&self) -> impl Iterator<Item = &ScheduleRow> {
        self.rows.iter().filter(|r| r.step2_estimate.is_some())
    }

    pub fn find(&self, p: &LayerPermutation) -> Option<&ScheduleRow> {
        self.rows.iter().find(|r| &r.schedule == p)
    }

    /// Distinct `r_tilde` values across the evaluated orders.
    pub fn distinct_r_tilde(&self, tol: f64) -> Vec<f64> {
        crate::spectral::distinct_values(self.rows.iter().map(|r| r.r_tilde), tol)
    }
}

/// Orders to evaluate: all of them, or a seeded sample that always
/// contains the identity.
pub fn candidate_orders(layers: usize, cfg: &SearchConfig) -> Result<Vec<LayerPermutation>> {
    match cfg.sample {
        None if layers > cfg.max_exhaustive_layers => Err(Error::ScheduleSpaceTooLarge(format!(
            "{layers} layers give {layers}! orders; pass a sample size"
        ))),
        None => Ok(LayerPermutation::all(layers)),
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut out = vec![LayerPermutation::identity(layers)];
            let mut seen: std::collections::HashSet<Vec<usize>> = std::iter::once((0..layers).collect()).collect();
            let total = (1..=layers).try_fold(1usize, |acc, k| acc.checked_mul(k));
            let cap = total.map_or(n, |t| n.min(t));
            let mut order: Vec<usize> = (0..layers).collect();
            while out.len() < cap {
                order.shuffle(&mut rng);
                if seen.insert(order.clone()) {
                    out.push(LayerPermutation::new(order.clone())?);
                }
            }
            Ok(out)
        }
    }
}

fn max_dominant(f: &FloorEstimate) -> f64 {
    f.groups.iter().map(|g| g.dominant).fold(f64::NEG_INFINITY, f64::max)
}

pub fn schedule_search(
    g: &TannerGraph,
    catalog: &Catalog,
    ch: &ChannelSpec,
    cfg: &SearchConfig,
) -> Result<ScheduleReport> {
    if catalog.is_empty() {
        return Err(Error::InvalidConfig("the trapping-set catalog is empty".into()));
    }
    let layers = g.num_layers();
    let orders = candidate_orders(layers, cfg)?;
    let reference = LayerPermutation::identity(layers);
    let base = BaseGraph::from_tanner(g);
    let de = |p: &LayerPermutation| {
        let mut dc = DeConfig::new(Schedule::Layered(p.clone()), cfg.saturation, cfg.estimator.max_iters.max(1));
        dc.step = cfg.estimator.step;
        run_de(&base, ch, &dc)
    };
    let averaged = AveragedStats::new(de(&reference)?)?;
    let sets: Vec<&Lets> = catalog.entries.iter().collect();
    let ids = structure_ids(g, &sets);

    let mut rows: Vec<ScheduleRow> = orders
        .par_iter()
        .map(|p| {
            let view = averaged.view(p);
            let f = estimate_groups(g, catalog, &ids, p, true, &view, ch, &cfg.estimator)?;
            Ok(ScheduleRow { schedule: p.clone(), r_tilde: max_dominant(&f), step1_estimate: f.total, step2_estimate: None })
        })
        .collect::<Result<_>>()?;

    // Shortlist: smallest-r_tilde bucket first, lowest step-1 estimate within.
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (rows[a].r_tilde, rows[b].r_tilde);
        if (ra - rb).abs() > R_TILDE_TOL {
            ra.total_cmp(&rb)
        } else {
            rows[a].step1_estimate.total_cmp(&rows[b].step1_estimate)
        }
    });
    for &i in idx.iter().take(cfg.shortlist.max(1)) {
        let p = rows[i].schedule.clone();
        let trace = de(&p)?;
        let f = estimate_groups(g, catalog, &ids, &p, true, &trace, ch, &cfg.estimator)?;
        rows[i].step2_estimate = Some(f.total);
    }

    rows.sort_by(|a, b| match (a.step2_estimate, b.step2_estimate) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.step1_estimate.total_cmp(&b.step1_estimate),
    });
    Ok(ScheduleReport { rows, reference })
}

pub fn write_schedule_csv(report: &ScheduleReport, manifest: Option<&str>, mut w: impl Write) -> Result<()> {
    if let Some(m) = manifest {
        writeln!(w, "# manifest: {m}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["schedule", "r_tilde", "step1_estimate", "step2_estimate"])?;
    for r in &report.rows {
        csv.write_record([
            r.schedule.to_string(),
            format!("{:.9}", r.r_tilde),
            format!("{:.6e}", r.step1_estimate),
            r.step2_estimate.map(|x| format!("{x:.6e}")).unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
