//! Reference rankers that share the exact scoring code with the beam:
//! an exhaustive enumerator (the oracle) and two cheaper baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::Instant;

use crate::beam::{discover, ranking_key, ScoredPath, SearchConfig, SearchReport};
use crate::compass::{CompassScorer, SignalToggles};
use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::path::Path;

/// Hard cap on the number of paths the oracle will enumerate.
pub const ORACLE_PATH_GUARD: u64 = 10_000_000;

/// Deterministic JSON rendering of a ranked result list, without the
/// search counters. Two rankers agree iff these values are identical.
pub fn results_to_json(g: &GraphSnapshot, results: &[ScoredPath]) -> serde_json::Value {
    serde_json::Value::Array(
        results
            .iter()
            .enumerate()
            .map(|(i, sp)| crate::beam::scored_path_json(g, sp, i + 1))
            .collect(),
    )
}

fn enumerate_paths(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    by_length: &mut Vec<Vec<Path>>,
    guard: u64,
) -> Result<()> {
    let mut total = 0u64;
    // iterative DFS over path prefixes
    let mut stack: Vec<Path> = Vec::new();
    for &seed in &cfg.seeds {
        for &(_, obj, triple_idx) in g.neighbors(seed) {
            if !cfg.allow_revisit && obj == seed {
                continue;
            }
            stack.push(Path::single(g, triple_idx));
        }
    }
    while let Some(path) = stack.pop() {
        total += 1;
        if total > guard {
            return Err(OdinError::SizeGuard(format!(
                "exhaustive enumeration exceeds {guard} paths"
            )));
        }
        if path.hops() < cfg.hops {
            let terminal = path.terminal();
            for &(_, obj, triple_idx) in g.neighbors(terminal) {
                if !cfg.allow_revisit && path.visits(obj) {
                    continue;
                }
                stack.push(path.extend(g, triple_idx));
            }
        }
        by_length[path.hops() - 1].push(path);
    }
    Ok(())
}

/// Scores every simple path of 1..=hops from the seeds and returns the
/// global top-k. Each length level gets its own struct normalizer, the
/// same frontier-max rule the beam applies per hop.
pub fn exhaustive_oracle(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    scorer: &CompassScorer,
) -> Result<SearchReport> {
    exhaustive_oracle_with_guard(g, cfg, scorer, ORACLE_PATH_GUARD)
}

/// As [`exhaustive_oracle`], with an explicit enumeration cap.
pub fn exhaustive_oracle_with_guard(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    scorer: &CompassScorer,
    guard: u64,
) -> Result<SearchReport> {
    cfg.validate(g)?;
    let start = Instant::now();
    let mut by_length: Vec<Vec<Path>> = vec![Vec::new(); cfg.hops];
    enumerate_paths(g, cfg, &mut by_length, guard)?;

    let mut score_evaluations = 0u64;
    let mut paths_explored = 0u64;
    let mut all: Vec<ScoredPath> = Vec::new();
    for (level, candidates) in by_length.into_iter().enumerate() {
        if candidates.is_empty() {
            continue;
        }
        paths_explored += candidates.len() as u64;
        let normalizer =
            scorer.frontier_normalizer(candidates.iter().map(|p| scorer.raw_struct_mean(p)));
        for path in candidates {
            let breakdown = scorer.score(&path, normalizer)?;
            score_evaluations += 1;
            all.push(ScoredPath {
                path,
                breakdown,
                hop: level + 1,
            });
        }
    }
    all.sort_unstable_by(ranking_key);
    all.truncate(cfg.top_k);
    Ok(SearchReport {
        results: all,
        score_evaluations,
        paths_explored,
        elapsed: start.elapsed(),
    })
}

/// Uniform out-edge random walks of length <= hops from the seeds. Every
/// distinct walk prefix becomes a candidate; candidates are scored with
/// the shared scorer and ranked exactly like the beam's output.
pub fn random_walk_baseline(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    scorer: &CompassScorer,
    num_walks: usize,
    rng_seed: u64,
) -> Result<SearchReport> {
    cfg.validate(g)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<usize> = cfg.seeds.iter().copied().collect();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut by_length: Vec<Vec<Path>> = vec![Vec::new(); cfg.hops];

    for _ in 0..num_walks {
        let seed = seeds[rng.gen_range(0..seeds.len())];
        let mut path: Option<Path> = None;
        for _ in 0..cfg.hops {
            let at = path.as_ref().map(|p| p.terminal()).unwrap_or(seed);
            let choices: Vec<usize> = g
                .neighbors(at)
                .iter()
                .filter(|&&(_, obj, _)| {
                    cfg.allow_revisit
                        || match &path {
                            Some(p) => !p.visits(obj),
                            None => obj != seed,
                        }
                })
                .map(|&(_, _, triple_idx)| triple_idx)
                .collect();
            if choices.is_empty() {
                break;
            }
            let triple_idx = choices[rng.gen_range(0..choices.len())];
            let next = match path {
                Some(p) => p.extend(g, triple_idx),
                None => Path::single(g, triple_idx),
            };
            if seen.insert(next.triples.clone()) {
                by_length[next.hops() - 1].push(next.clone());
            }
            path = Some(next);
        }
    }

    let mut score_evaluations = 0u64;
    let mut paths_explored = 0u64;
    let mut all: Vec<ScoredPath> = Vec::new();
    for (level, candidates) in by_length.into_iter().enumerate() {
        if candidates.is_empty() {
            continue;
        }
        paths_explored += candidates.len() as u64;
        let normalizer =
            scorer.frontier_normalizer(candidates.iter().map(|p| scorer.raw_struct_mean(p)));
        for path in candidates {
            let breakdown = scorer.score(&path, normalizer)?;
            score_evaluations += 1;
            all.push(ScoredPath {
                path,
                breakdown,
                hop: level + 1,
            });
        }
    }
    all.sort_unstable_by(ranking_key);
    all.truncate(cfg.top_k);
    Ok(SearchReport {
        results: all,
        score_evaluations,
        paths_explored,
        elapsed: start.elapsed(),
    })
}

/// Beam search with every signal except the structural one forced to 1:
/// pure proximity ranking.
pub fn ppr_only_baseline(
    g: &GraphSnapshot,
    cfg: &SearchConfig,
    scorer: &CompassScorer,
) -> Result<SearchReport> {
    let restricted = CompassScorer {
        graph: scorer.graph,
        model: scorer.model,
        ppr: scorer.ppr,
        metadata: scorer.metadata,
        cfg: scorer.cfg,
        toggles: SignalToggles::struct_only(),
    };
    discover(g, cfg, &restricted)
}
