//! Monte Carlo frame-error-rate simulation over BPSK/AWGN with the
//! all-zero codeword, plus classification of trapped failures.
//!
//! Frame `k` draws its noise from its own ChaCha stream derived from the
//! seed, and frames run in fixed-size batches, so results do not depend on
//! the number of worker threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::channel::ChannelSpec;
use crate::code_model::TannerGraph;
use crate::decoder::{Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::lets::Catalog;

/// Iterations over which a failed frame's error set must stay fixed to
/// count as trapped.
pub const TRAP_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_frames: u64,
    pub min_errors: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_frames: 10_000_000, min_errors: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Frames per batch; stopping is checked between batches.
    pub batch: u64,
    pub stop: StopRule,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 1, batch: 1024, stop: StopRule::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub frame: u64,
    /// Erroneous VNs at the end of decoding.
    pub support: Vec<usize>,
    /// The support stayed fixed over the last [`TRAP_WINDOW`] iterations.
    pub trapped: bool,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FerResult {
    pub ebn0_db: f64,
    pub frames: u64,
    pub errors: u64,
    pub fer: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub events: Vec<FailureEvent>,
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Label of the catalogued set equal to `support`, else "unclassified".
pub fn classify_failure(support: &[usize], catalog: Option<&Catalog>) -> String {
    if support.is_empty() {
        return "unclassified".into();
    }
    match catalog.and_then(|c| c.find(support).map(|i| &c.entries[i])) {
        Some(l) => format!("({},{})", l.a(), l.b()),
        None => "unclassified".into(),
    }
}

/// Channel LLRs of frame `frame` for the all-zero codeword.
pub fn frame_llrs(seed: u64, frame: u64, n: usize, ch: &ChannelSpec, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    let sigma2 = ch.noise_variance();
    let sigma = sigma2.sqrt();
    let scale = 2.0 / sigma2;
    for x in out.iter_mut().take(n) {
        let noise: f64 = StandardNormal.sample(&mut rng);
        *x = scale * (1.0 + sigma * noise);
    }
}

pub fn simulate_fer(
    g: &TannerGraph,
    dec: &DecoderConfig,
    ch: &ChannelSpec,
    sim: &SimConfig,
    catalog: Option<&Catalog>,
) -> Result<FerResult> {
    ch.validate()?;
    dec.validate(g)?;
    if sim.batch == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let n = g.n();
    let mut frames = 0u64;
    let mut errors = 0u64;
    let mut events = Vec::new();
    while frames < sim.stop.max_frames && errors < sim.stop.min_errors {
        let count = sim.batch.min(sim.stop.max_frames - frames);
        let start = frames;
        let failures: Vec<FailureEvent> = (start..start + count)
            .into_par_iter()
            .map_init(
                || (Decoder::new(g, dec.clone()).expect("validated"), vec![0.0; n]),
                |(decoder, llr), frame| {
                    frame_llrs(sim.seed, frame, n, ch, llr);
                    let out = decoder.decode_traced(llr, TRAP_WINDOW).expect("length matches");
                    let support = out.support();
                    if support.is_empty() {
                        return None;
                    }
                    let trapped = out.is_trapped(TRAP_WINDOW);
                    let label = if trapped { classify_failure(&support, catalog) } else { "unclassified".into() };
                    Some(FailureEvent { frame, support, trapped, label })
                },
            )
            .flatten()
            .collect();
        frames += count;
        errors += failures.len() as u64;
        events.extend(failures);
    }
    let (ci_low, ci_high) = wilson_interval(errors, frames, 1.959_963_984_540_054);
    Ok(FerResult {
        ebn0_db: ch.ebn0_db,
        frames,
        errors,
        fer: if frames == 0 { 0.0 } else { errors as f64 / frames as f64 },
        ci_low,
        ci_high,
        events,
    })
}

pub fn write_fer_csv(rows: &[FerResult], manifest: Option<&str>, mut w: impl Write) -> Result<()> {
    if let Some(m) = manifest {
        writeln!(w, "# manifest: {m}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["ebn0_db", "frames", "errors", "fer", "ci_low", "ci_high"])?;
    for r in rows {
        csv.write_record([
            format!("{}", r.ebn0_db),
            r.frames.to_string(),
            r.errors.to_string(),
            format!("{:.6e}", r.fer),
            format!("{:.6e}", r.ci_low),
            format!("{:.6e}", r.ci_high),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Failure events of every SNR point as JSON.
pub fn failure_log_json(rows: &[FerResult]) -> Result<String> {
    #[derive(Serialize)]
    struct Point<'a> {
        ebn0_db: f64,
        events: &'a [FailureEvent],
    }
    let pts: Vec<Point> = rows.iter().map(|r| Point { ebn0_db: r.ebn0_db, events: &r.events }).collect();
    Ok(serde_json::to_string_pretty(&pts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::LayerPermutation;
    use crate::codes;
    use crate::lets::{enumerate_lets, EnumerationConfig};

    fn tanner() -> TannerGraph {
        TannerGraph::from_exponents(&codes::tanner_155())
    }

    #[test]
    fn llr_moments_match_channel() {
        let ch = ChannelSpec::new(2.0, 0.4).unwrap();
        let n = 1000;
        let mut buf = vec![0.0; n];
        let (mut s, mut s2, mut cnt) = (0.0, 0.0, 0.0);
        for f in 0..1000 {
            frame_llrs(9, f, n, &ch, &mut buf);
            for &x in &buf {
                s += x;
                s2 += x * x;
                cnt += 1.0;
            }
        }
        let mean = s / cnt;
        let var = s2 / cnt - mean * mean;
        let (mu, v) = (ch.llr_mean(), ch.llr_variance());
        assert!((mean - mu).abs() < 3.0 * (v / cnt).sqrt(), "{mean} vs {mu}");
        assert!((var - v).abs() < 3.0 * v * (2.0 / cnt).sqrt(), "{var} vs {v}");
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_channel_never_fails() {
        let g = tanner();
        let dec = DecoderConfig::layered(LayerPermutation::identity(3), 10, 20.0);
        let ch = ChannelSpec::new(40.0, g.rate()).unwrap();
        let sim = SimConfig { seed: 3, batch: 64, stop: StopRule { max_frames: 500, min_errors: 10 } };
        let r = simulate_fer(&g, &dec, &ch, &sim, None).unwrap();
        assert_eq!((r.frames, r.errors, r.fer), (500, 0, 0.0));
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let g = tanner();
        let dec = DecoderConfig::layered(LayerPermutation::identity(3), 20, 15.0);
        let ch = ChannelSpec::new(1.5, g.rate()).unwrap();
        let sim = SimConfig { seed: 17, batch: 50, stop: StopRule { max_frames: 400, min_errors: 30 } };
        let a = simulate_fer(&g, &dec, &ch, &sim, None).unwrap();
        let b = simulate_fer(&g, &dec, &ch, &sim, None).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_fer(&g, &dec, &ch, &sim, None).unwrap());
        assert_eq!(a, c);
        assert!(a.errors >= 30 && a.frames.is_multiple_of(50));
        assert!(a.ci_low <= a.fer && a.fer <= a.ci_high);
    }

    #[test]
    fn fer_falls_with_snr() {
        let g = tanner();
        let dec = DecoderConfig::layered(LayerPermutation::identity(3), 20, 15.0);
        let sim = SimConfig { seed: 5, batch: 200, stop: StopRule { max_frames: 2000, min_errors: 2000 } };
        let fers: Vec<f64> = [0.5, 1.5, 2.5]
            .iter()
            .map(|&db| simulate_fer(&g, &dec, &ChannelSpec::new(db, g.rate()).unwrap(), &sim, None).unwrap().fer)
            .collect();
        assert!(fers[0] >= fers[1] && fers[1] >= fers[2], "{fers:?}");
    }

    #[test]
    fn classification() {
        let g = tanner();
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
        let l = &cat.of_class(5, 3)[0];
        assert_eq!(classify_failure(&l.vns, Some(&cat)), "(5,3)");
        assert_eq!(classify_failure(&[], Some(&cat)), "unclassified");
        assert_eq!(classify_failure(&[0, 1, 2], Some(&cat)), "unclassified");
        assert_eq!(classify_failure(&l.vns, None), "unclassified");
    }

    #[test]
    fn csv_layout() {
        let r = FerResult {
            ebn0_db: 6.0,
            frames: 1000,
            errors: 2,
            fer: 0.002,
            ci_low: 0.0005,
            ci_high: 0.007,
            events: vec![],
        };
        let mut out = Vec::new();
        write_fer_csv(&[r], Some("{}"), &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# manifest: {}");
        assert_eq!(lines[1], "ebn0_db,frames,errors,fer,ci_low,ci_high");
        assert!(lines[2].starts_with("6,1000,2,"));
    }
}
