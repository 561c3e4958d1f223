use std::sync::OnceLock;

use proptest::prelude::*;

use tsfloor::codes;
use tsfloor::estimator::{estimate_error_floor, EstimatorConfig};
use tsfloor::spectral::permutation_report;
use tsfloor::{
    enumerate_lets, Catalog, ChannelSpec, Decoder, DecoderConfig, EnumerationConfig, ExponentMatrix, LayerPermutation,
    ParityCheckMatrix, Schedule, TannerGraph,
};

fn tanner() -> TannerGraph {
    TannerGraph::from_exponents(&codes::tanner_155())
}

fn c1() -> &'static (TannerGraph, Catalog) {
    static C1: OnceLock<(TannerGraph, Catalog)> = OnceLock::new();
    C1.get_or_init(|| {
        let g = TannerGraph::from_exponents(&codes::rate03_640());
        let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 5)).unwrap();
        (g, cat)
    })
}

fn coarse() -> EstimatorConfig {
    EstimatorConfig { step: 0.25, ..EstimatorConfig::default() }
}

#[test]
fn code_formats_round_trip() {
    for name in codes::NAMES {
        let e = codes::by_name(name).unwrap();
        assert_eq!(ExponentMatrix::parse(&e.to_text()).unwrap(), e, "{name}");
        let h = e.expand();
        let back = ParityCheckMatrix::from_alist(&h.to_alist()).unwrap();
        assert_eq!((back.n(), back.m(), back.nnz()), (h.n(), h.m(), h.nnz()));
        assert!((0..h.m()).all(|c| back.row(c) == h.row(c)), "{name}");
    }
}

#[test]
fn catalog_files_round_trip() {
    let g = tanner();
    let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
    let from_json = Catalog::from_json(&cat.to_json().unwrap()).unwrap();
    let from_list = Catalog::from_ts_list(&g, &cat.to_ts_list()).unwrap();
    assert_eq!(from_json.entries, cat.entries);
    assert_eq!(from_list.entries, cat.entries);
}

#[test]
fn estimate_falls_with_snr_and_is_order_free_for_three_layers() {
    let g = tanner();
    let cat = enumerate_lets(&g, &EnumerationConfig::new(5, 3)).unwrap();
    let at = |db: f64, s: &str| {
        let ch = ChannelSpec::new(db, g.rate()).unwrap();
        estimate_error_floor(&g, &cat, &Schedule::parse(s).unwrap(), &ch, 15.75, &coarse()).unwrap()
    };
    let (lo, hi) = (at(3.0, "1,2,3"), at(5.0, "1,2,3"));
    assert!(lo.total > hi.total && hi.total > 0.0);
    // Every order shares the dominant eigenvalue; the estimates stay close.
    let other = at(3.0, "3,2,1");
    assert_eq!(lo.groups[0].dominant, other.groups[0].dominant);
    let fl = at(3.0, "flooding");
    assert!(fl.total > 0.0 && fl.total < 1.0);
}

#[test]
fn estimate_needs_a_catalog() {
    let g = tanner();
    let ch = ChannelSpec::new(3.0, g.rate()).unwrap();
    let empty = Catalog::new(vec![]);
    assert!(estimate_error_floor(&g, &empty, &Schedule::parse("flooding").unwrap(), &ch, 15.75, &coarse()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn confident_channel_decodes_to_zero(seed in 0u64..1000, flood in any::<bool>()) {
        let g = tanner();
        let perm = LayerPermutation::all(3)[(seed % 6) as usize].clone();
        let cfg = if flood { DecoderConfig::flooding(5, 15.75) } else { DecoderConfig::layered(perm, 5, 15.75) };
        let mut dec = Decoder::new(&g, cfg).unwrap();
        let llr: Vec<f64> = (0..g.n()).map(|i| 0.5 + ((i as u64 * 7919 + seed) % 13) as f64).collect();
        let out = dec.decode(&llr).unwrap();
        prop_assert!(out.converged);
        prop_assert!(out.hard.iter().all(|&b| b == 0));
    }

    #[test]
    fn dominant_eigenvalue_is_shift_and_reversal_invariant(k in 0usize..7, idx in 0usize..5040) {
        let (g, cat) = c1();
        let lets = cat.of_class(5, 5)[0];
        let p = LayerPermutation::all(7)[idx].clone();
        let rows = permutation_report(g, lets, &[p.clone(), p.rotated(k), p.reversed()]).unwrap();
        prop_assert!((rows[0].r_tilde - rows[1].r_tilde).abs() < 1e-9);
        prop_assert!((rows[0].r_tilde - rows[2].r_tilde).abs() < 1e-9);
    }
}
