//! Deterministic beam search guided by COMPASS, plus the single-step
//! neighbor-scoring surface for agent loops.
//!
//! Candidates at each hop are scored against a per-hop struct normalizer
//! computed before top-b selection. The final answer is the top-k over
//! the union of all hop levels, so a short path may outrank longer ones.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde_json::json;

use crate::compass::{CompassScorer, SignalBreakdown};
use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::path::Path;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub seeds: BTreeSet<usize>,
    pub hops: usize,
    pub beam_width: usize,
    pub top_k: usize,
    pub allow_revisit: bool,
}

impl SearchConfig {
    pub fn new(seeds: BTreeSet<usize>) -> SearchConfig {
        SearchConfig {
            seeds,
            hops: 3,
            beam_width: 64,
            top_k: 50,
            allow_revisit: false,
        }
    }

    pub fn validate(&self, g: &GraphSnapshot) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(OdinError::InvalidParameter(
                "seed set must be non-empty".to_string(),
            ));
        }
        for &s in &self.seeds {
            if s >= g.entity_count() {
                return Err(OdinError::EntityNotFound(format!("seed index {s}")));
            }
        }
        if self.hops == 0 || self.beam_width == 0 || self.top_k == 0 {
            return Err(OdinError::InvalidParameter(
                "hops, beam_width, and top_k must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScoredPath {
    pub path: Path,
    pub breakdown: SignalBreakdown,
    pub hop: usize,
}

/// Total ordering: compass desc, hop asc, entity sequence lexicographic.
/// Entity indices are interned in id order, so index comparison is id
/// comparison. Parallel edges (same entities, different relations) are
/// finally broken by triple index so the order is total over paths.
pub fn ranking_key(a: &ScoredPath, b: &ScoredPath) -> Ordering {
    b.breakdown
        .compass
        .total_cmp(&a.breakdown.compass)
        .then_with(|| a.hop.cmp(&b.hop))
        .then_with(|| a.path.entities.cmp(&b.path.entities))
        .then_with(|| a.path.triples.cmp(&b.path.triples))
}

#[derive(Debug)]
pub struct SearchReport {
    pub results: Vec<ScoredPath>,
    pub score_evaluations: u64,
    pub paths_explored: u64,
    /// Wall-clock time; intentionally excluded from serialized reports so
    /// identical runs emit identical bytes.
    pub elapsed: Duration,
}

impl SearchReport {
    /// Deterministic JSON rendering of the ranked results.
    pub fn results_json(&self, g: &GraphSnapshot) -> serde_json::Value {
        let ranked: Vec<serde_json::Value> = self
            .results
            .iter()
            .enumerate()
            .map(|(i, sp)| scored_path_json(g, sp, i + 1))
            .collect();
        json!({
            "results": ranked,
            "score_evaluations": self.score_evaluations,
            "paths_explored": self.paths_explored,
        })
    }
}

pub fn breakdown_json(b: &SignalBreakdown) -> serde_json::Value {
    let mut out = json!({
        "compass": b.compass,
        "factors": {
            "edge": b.s_edge,
            "struct": b.s_struct,
            "bridge": b.s_bridge,
            "affinity": b.s_affinity,
            "prior": b.s_prior,
            "temp": b.s_temp,
        },
    });
    if let Some(phi) = b.shapley {
        out["shapley"] = json!({
            "edge": phi[0],
            "struct": phi[1],
            "bridge": phi[2],
            "affinity": phi[3],
            "prior": phi[4],
            "temp": phi[5],
        });
    }
    out
}

pub fn scored_path_json(g: &GraphSnapshot, sp: &ScoredPath, rank: usize) -> serde_json::Value {
    let edges: Vec<serde_json::Value> = sp
        .path
        .triples
        .iter()
        .map(|&idx| {
            let t = g.triple(idx);
            json!({
                "s": g.entity_id(t.subject),
                "r": g.relation_id(t.relation),
                "o": g.entity_id(t.object),
                "t": t.timestamp,
                "prov": t.provenance,
            })
        })
        .collect();
    json!({
        "rank": rank,
        "hop": sp.hop,
        "entities": sp.path.entity_ids(g),
        "edges": edges,
        "score": breakdown_json(&sp.breakdown),
    })
}

/// Beam search from the seed set. Each hop expands every out-edge of the
/// previous beam, scores each extension, and keeps the best b; the final
/// result is the top-k over the union of all hop-level beams.
pub fn discover(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    scorer: &CompassScorer,
) -> Result<SearchReport> {
    cfg.validate(g)?;
    let start = Instant::now();
    let mut score_evaluations = 0u64;
    let mut paths_explored = 0u64;
    let mut union: Vec<ScoredPath> = Vec::new();

    // hop 1: expand the seeds themselves
    let mut frontier_paths: Vec<Path> = Vec::new();
    for &seed in &cfg.seeds {
        for &(_, obj, triple_idx) in g.neighbors(seed) {
            if !cfg.allow_revisit && obj == seed {
                continue;
            }
            frontier_paths.push(Path::single(g, triple_idx));
        }
    }

    let mut beam: Vec<ScoredPath> = Vec::new();
    for hop in 1..=cfg.hops {
        let candidates: Vec<Path> = if hop == 1 {
            std::mem::take(&mut frontier_paths)
        } else {
            let mut next = Vec::new();
            for sp in &beam {
                let terminal = sp.path.terminal();
                for &(_, obj, triple_idx) in g.neighbors(terminal) {
                    if !cfg.allow_revisit && sp.path.visits(obj) {
                        continue;
                    }
                    next.push(sp.path.extend(g, triple_idx));
                }
            }
            next
        };
        if candidates.is_empty() {
            break;
        }
        paths_explored += candidates.len() as u64;

        let normalizer =
            scorer.frontier_normalizer(candidates.iter().map(|p| scorer.raw_struct_mean(p)));
        let mut scored: Vec<ScoredPath> = candidates
            .into_iter()
            .map(|path| {
                let breakdown = scorer.score(&path, normalizer)?;
                score_evaluations += 1;
                Ok(ScoredPath {
                    path,
                    breakdown,
                    hop,
                })
            })
            .collect::<Result<_>>()?;
        scored.sort_unstable_by(ranking_key);
        scored.truncate(cfg.beam_width);
        union.extend(scored.iter().cloned());
        beam = scored;
    }

    union.sort_unstable_by(ranking_key);
    union.truncate(cfg.top_k);

    // evaluation-count accounting: the beam expands at most
    // (|seeds| + b*(h-1)) frontier entities, each of bounded degree
    let max_deg = g.max_out_degree() as u64;
    let bound =
        (cfg.seeds.len() as u64 + cfg.beam_width as u64 * (cfg.hops as u64 - 1)) * max_deg;
    assert!(
        score_evaluations <= bound,
        "score evaluations {score_evaluations} exceed bound {bound}"
    );

    Ok(SearchReport {
        results: union,
        score_evaluations,
        paths_explored,
        elapsed: start.elapsed(),
    })
}

/// Scores every out-edge of `entity` as a one-step extension of the
/// context path, returning the best `top_n` in deterministic order.
pub fn score_neighbors(
    g: &GraphSnapshot,
    entity: usize,
    context_path: Option<&Path>,
    scorer: &CompassScorer,
    top_n: usize,
    allow_revisit: bool,
) -> Result<Vec<ScoredPath>> {
    if entity >= g.entity_count() {
        return Err(OdinError::EntityNotFound(format!("entity index {entity}")));
    }
    if let Some(ctx) = context_path {
        if ctx.terminal() != entity {
            return Err(OdinError::InvalidParameter(
                "context path must end at the queried entity".to_string(),
            ));
        }
    }
    let mut candidates = Vec::new();
    for &(_, obj, triple_idx) in g.neighbors(entity) {
        match context_path {
            Some(ctx) => {
                if !allow_revisit && ctx.visits(obj) {
                    continue;
                }
                candidates.push(ctx.extend(g, triple_idx));
            }
            None => {
                if !allow_revisit && obj == entity {
                    continue;
                }
                candidates.push(Path::single(g, triple_idx));
            }
        }
    }
    let normalizer =
        scorer.frontier_normalizer(candidates.iter().map(|p| scorer.raw_struct_mean(p)));
    let hop = candidates.first().map(|p| p.hops()).unwrap_or(1);
    let mut scored: Vec<ScoredPath> = candidates
        .into_iter()
        .map(|path| {
            let breakdown = scorer.score(&path, normalizer)?;
            Ok(ScoredPath {
                path,
                breakdown,
                hop,
            })
        })
        .collect::<Result<_>>()?;
    scored.sort_unstable_by(ranking_key);
    scored.truncate(top_n);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compass::{CompassConfig, CompassScorer, SignalToggles};
    use crate::npll::NpllModel;
    use crate::ppr::{ppr_local_push, PprConfig};
    use std::io::Cursor;

    fn snap(lines: &str) -> GraphSnapshot {
        GraphSnapshot::ingest(Cursor::new(lines)).unwrap()
    }

    fn star_graph(leaves: usize) -> GraphSnapshot {
        let mut lines = String::new();
        for i in 0..leaves {
            lines.push_str(&format!(
                "{{\"s\":\"hub\",\"r\":\"r\",\"o\":\"leaf{i:02}\"}}\n"
            ));
        }
        snap(&lines)
    }

    #[test]
    fn star_one_hop_ranking() {
        let g = star_graph(5);
        let seeds: BTreeSet<usize> = [g.entity_index("hub").unwrap()].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default()).unwrap();
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig::default(),
            toggles: SignalToggles::default(),
        };
        let mut cfg = SearchConfig::new(seeds);
        cfg.hops = 1;
        cfg.beam_width = 3;
        cfg.top_k = 3;
        let report = discover(&g, &cfg, &scorer).unwrap();
        assert_eq!(report.results.len(), 3);
        // identical scores: tie broken by entity sequence
        let terminals: Vec<&str> = report
            .results
            .iter()
            .map(|sp| g.entity_id(sp.path.terminal()))
            .collect();
        assert_eq!(terminals, vec!["leaf00", "leaf01", "leaf02"]);
    }

    #[test]
    fn scores_are_non_increasing_in_rank() {
        let g = star_graph(8);
        let seeds: BTreeSet<usize> = [g.entity_index("hub").unwrap()].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default()).unwrap();
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig::default(),
            toggles: SignalToggles::default(),
        };
        let hub = g.entity_index("hub").unwrap();
        let scored = score_neighbors(&g, hub, None, &scorer, 3, false).unwrap();
        assert_eq!(scored.len(), 3);
        for pair in scored.windows(2) {
            assert!(pair[0].breakdown.compass >= pair[1].breakdown.compass);
        }
    }

    #[test]
    fn revisit_rule_excludes_context_entities() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"a"}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c"}"#,
        ));
        let seeds: BTreeSet<usize> = [g.entity_index("a").unwrap()].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default()).unwrap();
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig::default(),
            toggles: SignalToggles::default(),
        };
        let a = g.entity_index("a").unwrap();
        let b = g.entity_index("b").unwrap();
        let ctx = Path::single(
            &g,
            g.find_edge(a, g.relation_index("r").unwrap(), b).unwrap(),
        );
        let scored = score_neighbors(&g, b, Some(&ctx), &scorer, 10, false).unwrap();
        let terminals: Vec<&str> = scored
            .iter()
            .map(|sp| g.entity_id(sp.path.terminal()))
            .collect();
        assert_eq!(terminals, vec!["c"]);
    }

    #[test]
    fn isolated_entity_scores_empty() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        let seeds: BTreeSet<usize> = [g.entity_index("b").unwrap()].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default()).unwrap();
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig::default(),
            toggles: SignalToggles::default(),
        };
        let b = g.entity_index("b").unwrap();
        assert!(score_neighbors(&g, b, None, &scorer, 5, false)
            .unwrap()
            .is_empty());
        // discover from a dead-end seed is a valid empty result
        let cfg = SearchConfig::new(seeds);
        let report = discover(&g, &cfg, &scorer).unwrap();
        assert!(report.results.is_empty());
    }

    #[test]
    fn union_semantics_keep_short_paths() {
        // a -> b (fresh), b -> c (stale): 1-hop path can outrank 2-hop
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b","t":1000000}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c","t":0}"#,
        ));
        let seeds: BTreeSet<usize> = [g.entity_index("a").unwrap()].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default()).unwrap();
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig {
                lambda_decay: 1e-3,
                ..CompassConfig::default()
            },
            toggles: SignalToggles::default(),
        };
        let mut cfg = SearchConfig::new(seeds);
        cfg.hops = 2;
        let report = discover(&g, &cfg, &scorer).unwrap();
        assert_eq!(report.results.len(), 2);
        assert_eq!(report.results[0].hop, 1);
    }
}
