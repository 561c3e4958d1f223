//! Python bindings: codes, catalogues, the decoder, Monte Carlo,
//! estimates, schedule search and the regression checks.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tsfloor::estimator::{estimate_error_floor, EstimatorConfig};
use tsfloor::mc_harness::{simulate_fer, SimConfig, StopRule};
use tsfloor::scheduler::{schedule_search, SearchConfig};
use tsfloor::state_space::{build_layer_matrices, layered_transition};
use tsfloor::{codes, spectral, verify};
use tsfloor::{ChannelSpec, DecoderConfig, Decoder, EnumerationConfig, ExponentMatrix, LayerPermutation, Lets, Schedule, TannerGraph};

fn py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn schedule_for(g: &TannerGraph, s: Option<&str>) -> PyResult<Schedule> {
    let sch = match s {
        Some(s) => Schedule::parse(s).map_err(py_err)?,
        None => Schedule::Layered(LayerPermutation::identity(g.num_layers())),
    };
    if let Schedule::Layered(p) = &sch {
        p.check_len(g.num_layers()).map_err(py_err)?;
    }
    Ok(sch)
}

fn estimator(step: f64) -> EstimatorConfig {
    EstimatorConfig { step, ..EstimatorConfig::default() }
}

/// A lifted QC-LDPC code.
#[pyclass(frozen)]
pub struct Code {
    graph: TannerGraph,
}

#[pymethods]
impl Code {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        let e = codes::by_name(name)
            .ok_or_else(|| py_err(format!("unknown code '{name}'; known: {}", codes::NAMES.join(", "))))?;
        Ok(Code { graph: TannerGraph::from_exponents(&e) })
    }

    /// Exponent matrix as rows of shifts, -1 for an all-zero block.
    #[staticmethod]
    fn from_exponents(lift: usize, rows: Vec<Vec<i64>>) -> PyResult<Self> {
        let e = ExponentMatrix::new(lift, rows).map_err(py_err)?;
        Ok(Code { graph: TannerGraph::from_exponents(&e) })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let e = ExponentMatrix::from_file(path).map_err(py_err)?;
        Ok(Code { graph: TannerGraph::from_exponents(&e) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.graph.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.graph.m()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.graph.num_layers()
    }

    #[getter]
    fn lift(&self) -> usize {
        self.graph.lift()
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.graph.rate()
    }

    fn __repr__(&self) -> String {
        format!("Code(n={}, m={}, layers={})", self.graph.n(), self.graph.m(), self.graph.num_layers())
    }
}

/// A collection of LETSs of one code.
#[pyclass(frozen)]
pub struct Catalog {
    inner: tsfloor::Catalog,
}

#[pymethods]
impl Catalog {
    #[staticmethod]
    #[pyo3(signature = (code, a_max, b_max, budget = 100_000_000))]
    fn enumerate(code: &Code, a_max: usize, b_max: usize, budget: u64) -> PyResult<Self> {
        let mut cfg = EnumerationConfig::new(a_max, b_max);
        cfg.state_budget = budget;
        Ok(Catalog { inner: tsfloor::enumerate_lets(&code.graph, &cfg).map_err(py_err)? })
    }

    /// Builds a catalogue from 0-based VN sets.
    #[staticmethod]
    fn from_sets(code: &Code, sets: Vec<Vec<usize>>) -> PyResult<Self> {
        let entries = sets.iter().map(|s| Lets::from_vns(&code.graph, s)).collect::<Result<Vec<_>, _>>();
        Ok(Catalog { inner: tsfloor::Catalog::new(entries.map_err(py_err)?) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn class_counts(&self) -> BTreeMap<(usize, usize), usize> {
        self.inner.class_counts()
    }

    /// 0-based VN sets.
    fn sets(&self) -> Vec<Vec<usize>> {
        self.inner.entries.iter().map(|l| l.vns.clone()).collect()
    }

    fn filter_classes(&self, classes: Vec<(usize, usize)>) -> Self {
        let entries = self.inner.entries.iter().filter(|l| classes.contains(&l.class())).cloned().collect();
        Catalog { inner: tsfloor::Catalog::new(entries) }
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }
}

#[pyclass(frozen, get_all)]
pub struct DecodeResult {
    hard: Vec<u8>,
    iterations: usize,
    converged: bool,
}

/// Decodes one block of channel LLRs.
#[pyfunction]
#[pyo3(signature = (code, llrs, saturation, iters = 30, schedule = None))]
fn decode(code: &Code, llrs: Vec<f64>, saturation: f64, iters: usize, schedule: Option<&str>) -> PyResult<DecodeResult> {
    let cfg = DecoderConfig {
        max_iters: iters,
        saturation,
        rule: tsfloor::CheckRule::BoxPlus,
        schedule: schedule_for(&code.graph, schedule)?,
    };
    let mut dec = Decoder::new(&code.graph, cfg).map_err(py_err)?;
    let out = dec.decode(&llrs).map_err(py_err)?;
    Ok(DecodeResult { hard: out.hard, iterations: out.iterations, converged: out.converged })
}

#[pyclass(frozen, get_all)]
pub struct FerPoint {
    ebn0_db: f64,
    frames: u64,
    errors: u64,
    fer: f64,
    ci_low: f64,
    ci_high: f64,
    /// Labels of the failed frames.
    labels: Vec<String>,
}

#[pyfunction]
#[pyo3(signature = (code, ebn0_db, saturation, iters = 30, schedule = None, seed = 1, max_frames = 100_000, min_errors = 100, catalog = None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    code: &Code,
    ebn0_db: f64,
    saturation: f64,
    iters: usize,
    schedule: Option<&str>,
    seed: u64,
    max_frames: u64,
    min_errors: u64,
    catalog: Option<&Catalog>,
) -> PyResult<FerPoint> {
    let g = &code.graph;
    let dec = DecoderConfig { max_iters: iters, saturation, rule: tsfloor::CheckRule::BoxPlus, schedule: schedule_for(g, schedule)? };
    let ch = ChannelSpec::new(ebn0_db, g.rate()).map_err(py_err)?;
    let sim = SimConfig { seed, batch: 1024, stop: StopRule { max_frames, min_errors } };
    let cat = catalog.map(|c| &c.inner);
    let r = py.detach(|| simulate_fer(g, &dec, &ch, &sim, cat)).map_err(py_err)?;
    Ok(FerPoint {
        ebn0_db: r.ebn0_db,
        frames: r.frames,
        errors: r.errors,
        fer: r.fer,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
        labels: r.events.into_iter().map(|e| e.label).collect(),
    })
}

#[pyclass(frozen, get_all)]
pub struct Estimate {
    total: f64,
    by_class: BTreeMap<(usize, usize), f64>,
    /// One `(class, size, p_e, dominant)` tuple per TSLP group.
    groups: Vec<((usize, usize), usize, f64, f64)>,
}

#[pyfunction]
#[pyo3(signature = (code, catalog, ebn0_db, saturation, schedule = None, step = 0.05))]
fn estimate(
    py: Python<'_>,
    code: &Code,
    catalog: &Catalog,
    ebn0_db: f64,
    saturation: f64,
    schedule: Option<&str>,
    step: f64,
) -> PyResult<Estimate> {
    let g = &code.graph;
    let sch = schedule_for(g, schedule)?;
    let ch = ChannelSpec::new(ebn0_db, g.rate()).map_err(py_err)?;
    let cfg = estimator(step);
    let f = py.detach(|| estimate_error_floor(g, &catalog.inner, &sch, &ch, saturation, &cfg)).map_err(py_err)?;
    Ok(Estimate {
        total: f.total,
        by_class: f.by_class(),
        groups: f.groups.iter().map(|gr| (gr.class, gr.size, gr.p_e, gr.dominant)).collect(),
    })
}

/// Ranked `(schedule, r_tilde, step1, step2)` rows, best first.
#[pyfunction]
#[pyo3(signature = (code, catalog, ebn0_db, saturation, shortlist = 10, sample = None, seed = 1, step = 0.05))]
#[allow(clippy::too_many_arguments)]
fn search_schedules(
    py: Python<'_>,
    code: &Code,
    catalog: &Catalog,
    ebn0_db: f64,
    saturation: f64,
    shortlist: usize,
    sample: Option<usize>,
    seed: u64,
    step: f64,
) -> PyResult<Vec<(String, f64, f64, Option<f64>)>> {
    let g = &code.graph;
    let ch = ChannelSpec::new(ebn0_db, g.rate()).map_err(py_err)?;
    let mut cfg = SearchConfig::new(saturation);
    cfg.shortlist = shortlist;
    cfg.sample = sample;
    cfg.seed = seed;
    cfg.estimator = estimator(step);
    let rep = py.detach(|| schedule_search(g, &catalog.inner, &ch, &cfg)).map_err(py_err)?;
    Ok(rep.rows.iter().map(|r| (r.schedule.to_string(), r.r_tilde, r.step1_estimate, r.step2_estimate)).collect())
}

/// Unit-gain one-iteration transition matrix of a LETS (0-based VNs) under
/// a layer order, as nested rows.
#[pyfunction]
#[pyo3(signature = (code, vns, schedule = None))]
fn transition_matrix(code: &Code, vns: Vec<usize>, schedule: Option<&str>) -> PyResult<Vec<Vec<f64>>> {
    let g = &code.graph;
    let perm = match schedule_for(g, schedule)? {
        Schedule::Layered(p) => p,
        Schedule::Flooding => return Err(py_err("transition_matrix needs a layer order")),
    };
    let lets = Lets::from_vns(g, &vns).map_err(py_err)?;
    let lm = build_layer_matrices(g, &lets, &perm).map_err(py_err)?;
    let a = layered_transition(&lm);
    Ok(a.row_iter().map(|r| r.iter().copied().collect()).collect())
}

#[pyfunction]
fn spectral_radius(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(py_err("matrix must be square"));
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    spectral::spectral_radius(&m).map_err(py_err)
}

/// Reference regression checks as `(name, passed, detail)`.
#[pyfunction]
fn verify_fixtures() -> Vec<(String, bool, String)> {
    verify::fixture_checks(&verify::Expected::default())
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

#[pyfunction]
fn box_plus(a: f64, b: f64) -> f64 {
    tsfloor::box_plus(a, b)
}

#[pymodule]
fn tsfloor_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Code>()?;
    m.add_class::<Catalog>()?;
    m.add_class::<DecodeResult>()?;
    m.add_class::<FerPoint>()?;
    m.add_class::<Estimate>()?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(search_schedules, m)?)?;
    m.add_function(wrap_pyfunction!(transition_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(verify_fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(box_plus, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_and_catalog_without_python() {
        let c = Code::builtin("tanner-155").unwrap();
        assert_eq!((c.n(), c.m(), c.num_layers(), c.lift()), (155, 93, 3, 31));
        assert!(Code::builtin("nope").is_err());
        let cat = Catalog::enumerate(&c, 5, 3, 100_000_000).unwrap();
        assert_eq!(cat.__len__(), 155);
        assert_eq!(cat.class_counts().get(&(5, 3)), Some(&155));
        let again = Catalog::from_sets(&c, cat.sets()).unwrap();
        assert_eq!(again.sets(), cat.sets());
        assert_eq!(cat.filter_classes(vec![(4, 4)]).__len__(), 0);
    }

    #[test]
    fn transition_and_radius() {
        let c = Code::builtin("tanner-155").unwrap();
        let cat = Catalog::enumerate(&c, 5, 3, 100_000_000).unwrap();
        let vns = cat.sets()[0].clone();
        let a = transition_matrix(&c, vns.clone(), None).unwrap();
        assert_eq!(a.len(), 12);
        let r = spectral_radius(a).unwrap();
        assert!((r - 2.0136).abs() < 1e-3, "{r}");
        assert!(transition_matrix(&c, vns, Some("flooding")).is_err());
        assert!(spectral_radius(vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn decode_clean_block() {
        let c = Code::builtin("toy").unwrap();
        let out = decode(&c, vec![4.0; c.n()], 15.75, 5, None).unwrap();
        assert!(out.converged && out.hard.iter().all(|&b| b == 0));
        assert!(decode(&c, vec![4.0; c.n() + 1], 15.75, 5, None).is_err());
    }

    #[test]
    fn fixtures_pass() {
        assert!(verify_fixtures().iter().all(|c| c.1));
        assert!((box_plus(2.0, 2.0) - 1.325_002_747_357_864_5).abs() < 1e-12);
    }
}
