mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::json;
use tsfloor::channel::parse_grid;
use tsfloor::estimator::{estimate_error_floor, EstimatorConfig, FloorEstimate};
use tsfloor::mc_harness::{failure_log_json, simulate_fer, write_fer_csv, SimConfig, StopRule};
use tsfloor::scheduler::{candidate_orders, schedule_search, write_schedule_csv, SearchConfig};
use tsfloor::verify::{all_passed, catalog_checks, fixture_checks, Check, Expected};
use tsfloor::{
    codes, enumerate_lets, Catalog, ChannelSpec, CheckRule, DecoderConfig, EnumerationConfig, ExponentMatrix,
    LayerPermutation, Lets, ParityCheckMatrix, Schedule, TannerGraph,
};

use manifest::{InputFile, RunManifest};

/// Exit status when `verify` ran but some check failed.
const CHECKS_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "tsfloor", version, about = "Error-floor analysis of row-layered QC-LDPC decoders")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "TSFLOOR_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo FER of the saturating decoder.
    Simulate(SimulateArgs),
    /// Error-floor estimate from the trapping-set catalogue.
    Estimate(EstimateArgs),
    /// Rank layer orders by estimated error floor.
    SearchSchedules(SearchArgs),
    /// Regression and theorem checks.
    Verify(VerifyArgs),
    /// Enumerate LETSs and write the catalogue.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct CodeArgs {
    /// Exponent matrix file, `.alist` file, or `builtin:NAME`.
    #[arg(long)]
    code: String,
    /// Rows (and columns) per block when reading an alist file.
    #[arg(long, default_value_t = 1)]
    block: usize,
}

#[derive(Args)]
struct CatalogArgs {
    /// Catalogue file: JSON from `enumerate`, or one LETS per line (1-based VNs).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Enumerate LETSs with at most this many VNs.
    #[arg(long)]
    a_max: Option<usize>,
    /// Largest number of unsatisfied CNs; defaults to `--a-max`.
    #[arg(long)]
    b_max: Option<usize>,
    /// Enumeration budget in VN additions.
    #[arg(long, default_value_t = 100_000_000)]
    budget: u64,
    /// Keep only these classes, e.g. `6:1,7:1`.
    #[arg(long)]
    classes: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest JSON path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Spa,
    MinSum,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// 1-based layer order, or `flooding`; identity when absent.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    sat: f64,
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, value_enum, default_value = "spa")]
    rule: RuleArg,
    /// `start:step:stop` in dB, or one value.
    #[arg(long)]
    ebn0: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    #[arg(long, default_value_t = 1024)]
    batch: u64,
    /// Write failure events as JSON.
    #[arg(long)]
    failures: Option<PathBuf>,
    /// Catalogue used to label trapped failures.
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ModelArgs {
    /// Quantization step of density evolution.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Iterations of the model recursion.
    #[arg(long)]
    model_iters: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> EstimatorConfig {
        let mut c = EstimatorConfig { step: self.step, ..EstimatorConfig::default() };
        if let Some(n) = self.model_iters {
            c.max_iters = n;
        }
        c
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    sat: f64,
    #[arg(long)]
    ebn0: String,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Per-group breakdown CSV.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    sat: f64,
    /// Single Eb/N0 in dB.
    #[arg(long)]
    ebn0: f64,
    #[arg(long, default_value_t = 10)]
    shortlist: usize,
    /// Score this many random orders instead of all of them.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Code for the catalogue checks; the Tanner (155,64) code by default.
    #[arg(long, default_value = "builtin:tanner-155")]
    code: String,
    #[arg(long, default_value_t = 1)]
    block: usize,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Replacement for the reference composite matrix (whitespace-separated rows).
    #[arg(long)]
    expected_composite: Option<PathBuf>,
    /// Random layer orders for the invariance checks when the code has
    /// more than 5 layers.
    #[arg(long, default_value_t = 4)]
    perm_sample: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    catalog: CatalogArgs,
    /// Write one LETS per line instead of JSON.
    #[arg(long)]
    ts_list: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn load_code(code: &str, block: usize, m: &mut RunManifest) -> anyhow::Result<TannerGraph> {
    if let Some(name) = code.strip_prefix("builtin:") {
        let e = codes::by_name(name)
            .ok_or_else(|| anyhow!("unknown built-in code '{name}'; known: {}", codes::NAMES.join(", ")))?;
        return Ok(TannerGraph::from_exponents(&e));
    }
    let path = Path::new(code);
    let text = std::fs::read_to_string(path).with_context(|| format!("reading code file {}", path.display()))?;
    m.inputs.push(InputFile::record("code", path)?);
    if path.extension().is_some_and(|e| e == "alist") {
        let h = ParityCheckMatrix::from_alist(&text)?.with_blocks(block, block)?;
        Ok(TannerGraph::new(h))
    } else {
        let e = ExponentMatrix::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(TannerGraph::from_exponents(&e))
    }
}

fn parse_classes(s: &str) -> anyhow::Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|t| {
            let (a, b) = t.trim().split_once(':').ok_or_else(|| anyhow!("class '{t}' is not a:b"))?;
            Ok((a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

fn load_catalog(g: &TannerGraph, args: &CatalogArgs, m: &mut RunManifest) -> anyhow::Result<Option<Catalog>> {
    let cat = if let Some(path) = &args.catalog {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading catalogue {}", path.display()))?;
        m.inputs.push(InputFile::record("catalog", path)?);
        if text.trim_start().starts_with('[') {
            // Rebuild against the graph so a catalogue from another code is rejected.
            let raw = Catalog::from_json(&text)?;
            let entries = raw.entries.iter().map(|l| Lets::from_vns(g, &l.vns)).collect::<Result<Vec<_>, _>>()?;
            Catalog::new(entries)
        } else {
            Catalog::from_ts_list(g, &text)?
        }
    } else if let Some(a_max) = args.a_max {
        let mut cfg = EnumerationConfig::new(a_max, args.b_max.unwrap_or(a_max));
        cfg.state_budget = args.budget;
        enumerate_lets(g, &cfg)?
    } else {
        return Ok(None);
    };
    let cat = match &args.classes {
        Some(s) => {
            let keep = parse_classes(s)?;
            Catalog::new(cat.entries.into_iter().filter(|l| keep.contains(&l.class())).collect())
        }
        None => cat,
    };
    Ok(Some(cat))
}

fn catalog_config(args: &CatalogArgs) -> serde_json::Value {
    json!({
        "catalog": args.catalog.as_ref().map(|p| p.display().to_string()),
        "a_max": args.a_max,
        "b_max": args.b_max,
        "budget": args.budget,
        "classes": args.classes,
    })
}

fn class_counts_line(cat: &Catalog) -> String {
    let parts: Vec<String> = cat.class_counts().iter().map(|((a, b), n)| format!("({a},{b}) {n}")).collect();
    if parts.is_empty() {
        "empty".into()
    } else {
        parts.join(", ")
    }
}

fn parse_schedule(s: Option<&str>, g: &TannerGraph) -> anyhow::Result<Schedule> {
    let sch = match s {
        Some(s) => Schedule::parse(s)?,
        None => Schedule::Layered(LayerPermutation::identity(g.num_layers())),
    };
    if let Schedule::Layered(p) = &sch {
        p.check_len(g.num_layers())?;
    }
    Ok(sch)
}

/// Writes the CSV body and the manifest files.
fn emit(output: &OutputArgs, body: &[u8], m: RunManifest) -> anyhow::Result<()> {
    match &output.out {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(body)?,
    }
    let manifest_path = output.manifest.clone().or_else(|| {
        output.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    m.finish(manifest_path.as_deref())
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::start("simulate");
    let g = load_code(&a.code.code, a.code.block, &mut m)?;
    let schedule = parse_schedule(a.schedule.as_deref(), &g)?;
    let grid = parse_grid(&a.ebn0)?;
    let catalog = load_catalog(&g, &a.catalog, &mut m)?;
    let dec = DecoderConfig {
        max_iters: a.iters,
        saturation: a.sat,
        rule: match a.rule {
            RuleArg::Spa => CheckRule::BoxPlus,
            RuleArg::MinSum => CheckRule::MinSum,
        },
        schedule: schedule.clone(),
    };
    dec.validate(&g)?;
    let sim = SimConfig { seed: a.seed, batch: a.batch, stop: StopRule { max_frames: a.max_frames, min_errors: a.min_errors } };
    m.config = json!({
        "code": a.code.code,
        "schedule": schedule.to_string(),
        "saturation": a.sat,
        "max_iters": a.iters,
        "rule": format!("{:?}", dec.rule),
        "ebn0_db": grid,
        "rate": g.rate(),
        "sim": sim,
        "catalog": catalog_config(&a.catalog),
    });
    m.notes.push(format!(
        "stopping rule is a tool default: stop at {} frame errors or {} frames",
        a.min_errors, a.max_frames
    ));
    let mut rows = Vec::new();
    for &db in &grid {
        let ch = ChannelSpec::new(db, g.rate())?;
        let r = simulate_fer(&g, &dec, &ch, &sim, catalog.as_ref())?;
        eprintln!("{db} dB: {} errors / {} frames, FER {:.3e}", r.errors, r.frames, r.fer);
        rows.push(r);
    }
    let mut body = Vec::new();
    write_fer_csv(&rows, Some(&m.header_line()), &mut body)?;
    if let Some(p) = &a.failures {
        std::fs::write(p, failure_log_json(&rows)?).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(&a.output, &body, m)
}

fn require_catalog(c: Option<Catalog>) -> anyhow::Result<Catalog> {
    let c = c.ok_or_else(|| anyhow!("a catalogue is needed: pass --catalog or --a-max"))?;
    if c.is_empty() {
        bail!("the trapping-set catalogue is empty");
    }
    Ok(c)
}

fn write_groups_csv(points: &[(f64, FloorEstimate)], path: &Path) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ebn0_db", "class", "structure_id", "size", "p_e", "contribution", "dominant", "q_argument", "iterations", "converged"])?;
    for (db, f) in points {
        for gr in &f.groups {
            w.write_record([
                format!("{db}"),
                format!("({},{})", gr.class.0, gr.class.1),
                gr.structure_id.clone(),
                gr.size.to_string(),
                format!("{:.6e}", gr.p_e),
                format!("{:.6e}", gr.size as f64 * gr.p_e),
                format!("{:.9}", gr.dominant),
                format!("{:.6}", gr.q_argument),
                gr.iterations.to_string(),
                gr.converged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn note_three_layers(g: &TannerGraph, m: &mut RunManifest) {
    if g.num_layers() == 3 {
        m.notes.push(
            "three layers: every layer order is a cyclic shift or reversal of the identity, so all orders share one dominant eigenvalue".into(),
        );
    }
}

fn cmd_estimate(a: &EstimateArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::start("estimate");
    let g = load_code(&a.code.code, a.code.block, &mut m)?;
    let schedule = parse_schedule(a.schedule.as_deref(), &g)?;
    let grid = parse_grid(&a.ebn0)?;
    let catalog = require_catalog(load_catalog(&g, &a.catalog, &mut m)?)?;
    let cfg = a.model.config();
    m.config = json!({
        "code": a.code.code,
        "schedule": schedule.to_string(),
        "saturation": a.sat,
        "ebn0_db": grid,
        "rate": g.rate(),
        "estimator": cfg,
        "catalog": catalog_config(&a.catalog),
        "catalog_classes": class_counts_line(&catalog),
    });
    note_three_layers(&g, &mut m);
    let mut points = Vec::new();
    for &db in &grid {
        let ch = ChannelSpec::new(db, g.rate())?;
        let f = estimate_error_floor(&g, &catalog, &schedule, &ch, a.sat, &cfg)?;
        eprintln!("{db} dB: estimate {:.3e}", f.total);
        points.push((db, f));
    }
    let classes: Vec<(usize, usize)> = catalog.class_counts().keys().copied().collect();
    let mut body = Vec::new();
    writeln!(body, "# manifest: {}", m.header_line())?;
    for n in &m.notes {
        writeln!(body, "# note: {n}")?;
        eprintln!("note: {n}");
    }
    {
        let mut w = csv::Writer::from_writer(&mut body);
        let mut header = vec!["ebn0_db".to_string(), "estimate_fer".to_string()];
        header.extend(classes.iter().map(|(x, y)| format!("class_{x}_{y}")));
        w.write_record(&header)?;
        for (db, f) in &points {
            let by = f.by_class();
            let mut rec = vec![format!("{db}"), format!("{:.6e}", f.total)];
            rec.extend(classes.iter().map(|c| format!("{:.6e}", by.get(c).copied().unwrap_or(0.0))));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    if let Some(p) = &a.groups {
        write_groups_csv(&points, p)?;
    }
    emit(&a.output, &body, m)
}

fn cmd_search(a: &SearchArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::start("search-schedules");
    let g = load_code(&a.code.code, a.code.block, &mut m)?;
    let mut cfg = SearchConfig::new(a.sat);
    cfg.shortlist = a.shortlist;
    cfg.sample = a.sample;
    cfg.seed = a.seed;
    cfg.estimator = a.model.config();
    // Fail on an oversized order space before the (possibly long) enumeration.
    candidate_orders(g.num_layers(), &cfg)?;
    let mut body = Vec::new();
    if g.num_layers() <= 1 {
        m.config = json!({ "code": a.code.code, "layers": g.num_layers() });
        m.notes.push("one layer: the only schedule is the identity".into());
        writeln!(body, "# manifest: {}", m.header_line())?;
        writeln!(body, "schedule,r_tilde,step1_estimate,step2_estimate")?;
        writeln!(body, "1,,,")?;
        eprintln!("winner: 1 (only schedule)");
        return emit(&a.output, &body, m);
    }
    let catalog = require_catalog(load_catalog(&g, &a.catalog, &mut m)?)?;
    let ch = ChannelSpec::new(a.ebn0, g.rate())?;
    m.config = json!({
        "code": a.code.code,
        "saturation": a.sat,
        "ebn0_db": a.ebn0,
        "rate": g.rate(),
        "search": cfg,
        "catalog": catalog_config(&a.catalog),
        "catalog_classes": class_counts_line(&catalog),
    });
    note_three_layers(&g, &mut m);
    let report = schedule_search(&g, &catalog, &ch, &cfg)?;
    write_schedule_csv(&report, Some(&m.header_line()), &mut body)?;
    let w = report.winner();
    eprintln!(
        "winner: {} (r_tilde {:.4}, estimate {:.3e}); {} distinct r_tilde over {} orders",
        w.schedule,
        w.r_tilde,
        w.step2_estimate.unwrap_or(w.step1_estimate),
        report.distinct_r_tilde(tsfloor::scheduler::R_TILDE_TOL).len(),
        report.rows.len()
    );
    emit(&a.output, &body, m)
}

fn read_matrix(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|t| t.parse::<f64>()).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("{}: rows have different lengths", path.display());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn cmd_verify(a: &VerifyArgs) -> anyhow::Result<bool> {
    let mut m = RunManifest::start("verify");
    let mut expected = Expected::default();
    if let Some(p) = &a.expected_composite {
        expected.composite = read_matrix(p)?;
        m.inputs.push(InputFile::record("expected_composite", p)?);
    }
    let mut checks: Vec<Check> = fixture_checks(&expected);
    let g = load_code(&a.code, a.block, &mut m)?;
    let catalog = match load_catalog(&g, &a.catalog, &mut m)? {
        Some(c) => c,
        None if a.code == "builtin:tanner-155" => enumerate_lets(&g, &EnumerationConfig::new(5, 3))?,
        None => bail!("pass --catalog or --a-max for the catalogue checks"),
    };
    let layers = g.num_layers();
    let perms = if layers <= 5 {
        LayerPermutation::all(layers)
    } else {
        let mut cfg = SearchConfig::new(1.0);
        cfg.sample = Some(a.perm_sample.max(1));
        cfg.seed = a.seed;
        candidate_orders(layers, &cfg)?
    };
    checks.extend(catalog_checks(&g, &catalog, &perms)?);
    m.config = json!({
        "code": a.code,
        "catalog": catalog_config(&a.catalog),
        "catalog_classes": class_counts_line(&catalog),
        "perms": perms.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });
    let mut body = Vec::new();
    writeln!(body, "# manifest: {}", m.header_line())?;
    {
        let mut w = csv::Writer::from_writer(&mut body);
        w.write_record(["check", "passed", "detail"])?;
        for c in &checks {
            w.write_record([c.name.as_str(), if c.passed { "PASS" } else { "FAIL" }, c.detail.as_str()])?;
            eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        w.flush()?;
    }
    emit(&a.output, &body, m)?;
    Ok(all_passed(&checks))
}

fn cmd_enumerate(a: &EnumerateArgs) -> anyhow::Result<()> {
    let mut m = RunManifest::start("enumerate");
    let g = load_code(&a.code.code, a.code.block, &mut m)?;
    if a.catalog.a_max.is_none() && a.catalog.catalog.is_none() {
        bail!("pass --a-max (or --catalog to filter an existing catalogue)");
    }
    let cat = load_catalog(&g, &a.catalog, &mut m)?.unwrap_or_default();
    eprintln!("{} LETSs: {}", cat.len(), class_counts_line(&cat));
    let body = if a.ts_list { cat.to_ts_list() } else { cat.to_json()? + "\n" };
    m.config = json!({ "code": a.code.code, "catalog": catalog_config(&a.catalog) });
    emit(&a.output, body.as_bytes(), m)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Estimate(a) => cmd_estimate(a)?,
        Command::SearchSchedules(a) => cmd_search(a)?,
        Command::Verify(a) => return cmd_verify(a),
        Command::Enumerate(a) => cmd_enumerate(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(CHECKS_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
