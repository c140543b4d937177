//! Property tests over randomly generated graphs and factor vectors.

use odin_core::compass::{explain, SignalBreakdown};
use odin_core::eval::{generate, SyntheticSpec};
use odin_core::kg::GraphSnapshot;
use odin_core::ppr::{ppr_exact, ppr_local_push, PprConfig};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::io::Cursor;

fn arb_graph_lines() -> impl Strategy<Value = Vec<(u8, u8, u8, Option<u32>)>> {
    proptest::collection::vec(
        (0u8..20, 0u8..4, 0u8..20, proptest::option::of(0u32..1_000_000)),
        1..80,
    )
}

fn build(lines: &[(u8, u8, u8, Option<u32>)]) -> GraphSnapshot {
    let mut text = String::new();
    for &(s, r, o, t) in lines {
        match t {
            Some(t) => text.push_str(&format!(
                "{{\"s\":\"n{s:02}\",\"r\":\"r{r}\",\"o\":\"n{o:02}\",\"t\":{t}}}\n"
            )),
            None => text.push_str(&format!(
                "{{\"s\":\"n{s:02}\",\"r\":\"r{r}\",\"o\":\"n{o:02}\"}}\n"
            )),
        }
    }
    GraphSnapshot::ingest(Cursor::new(text)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ingest_serialize_round_trips(lines in arb_graph_lines()) {
        let g = build(&lines);
        let mut buf = Vec::new();
        g.serialize(&mut buf).unwrap();
        let g2 = GraphSnapshot::ingest(Cursor::new(buf.clone())).unwrap();
        let mut buf2 = Vec::new();
        g2.serialize(&mut buf2).unwrap();
        prop_assert_eq!(buf, buf2);
        prop_assert_eq!(g.total_triples(), g2.total_triples());
    }

    #[test]
    fn push_matches_exact_within_degree_bound(lines in arb_graph_lines(), seed_pick in 0usize..20) {
        let g = build(&lines);
        let seed = seed_pick % g.entity_count();
        let seeds: BTreeSet<usize> = [seed].into();
        let cfg = PprConfig { epsilon: 1e-4, ..PprConfig::default() };
        let approx = ppr_local_push(&g, &seeds, &cfg).unwrap();
        let exact = ppr_exact(&g, &seeds, cfg.alpha, 100_000).unwrap();
        for e in 0..g.entity_count() {
            let err = (approx.score(e) - exact.score(e)).abs();
            let deg = g.out_degree(e).max(1) as f64;
            prop_assert!(err <= cfg.epsilon * deg, "entity {} err {} deg {}", e, err, deg);
        }
    }

    #[test]
    fn any_zero_factor_vetoes(factors in proptest::array::uniform6(0.0f64..2.0), zero_at in 0usize..6) {
        let mut f = factors;
        f[zero_at] = 0.0;
        let b = SignalBreakdown::from_factors(f);
        prop_assert_eq!(b.compass, 0.0);
        prop_assert!(b.shapley.is_none());
        prop_assert!(explain(&b).is_err());
        prop_assert!(!b.vetoing_signals().is_empty());
    }

    #[test]
    fn shapley_sums_to_log_score(factors in proptest::array::uniform6(0.01f64..3.0)) {
        let b = SignalBreakdown::from_factors(factors);
        let phi = explain(&b).unwrap();
        let total: f64 = phi.iter().map(|&(_, v)| v).sum();
        prop_assert!((total - b.compass.ln()).abs() < 1e-9);
    }
}

#[test]
fn push_is_deterministic_across_runs() {
    let spec = SyntheticSpec {
        num_entities: 120,
        rng_seed: 42,
        ..SyntheticSpec::default()
    };
    let (g, _) = generate(&spec).unwrap();
    let seeds: BTreeSet<usize> = [0, 5, 9].into();
    let cfg = PprConfig::default();
    let a = ppr_local_push(&g, &seeds, &cfg).unwrap();
    let b = ppr_local_push(&g, &seeds, &cfg).unwrap();
    for e in 0..g.entity_count() {
        assert_eq!(a.score(e).to_bits(), b.score(e).to_bits());
    }
}
