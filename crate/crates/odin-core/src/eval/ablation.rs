//! Ablation grid, recall-vs-beam-width curves, and link-prediction AUC
//! for the plausibility model. All comparisons key paths by their triple
//! index sequence, which identifies a path uniquely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeSet;

use crate::beam::{discover, ScoredPath, SearchConfig};
use crate::compass::{CompassConfig, CompassScorer, SignalToggles};
use crate::error::Result;
use crate::eval::oracle::exhaustive_oracle;
use crate::eval::synth::{generate, SyntheticSpec};
use crate::kg::GraphSnapshot;
use crate::npll::NpllModel;
use crate::ppr::{ppr_local_push, PprConfig};

/// Fraction of `reference` paths that also appear in `results`.
pub fn coverage(results: &[ScoredPath], reference: &[ScoredPath]) -> f64 {
    if reference.is_empty() {
        return 1.0;
    }
    let got: BTreeSet<&[usize]> = results.iter().map(|sp| sp.path.triples.as_slice()).collect();
    let hit = reference
        .iter()
        .filter(|sp| got.contains(sp.path.triples.as_slice()))
        .count();
    hit as f64 / reference.len() as f64
}

/// Fraction of ranked paths that contain at least one edge whose
/// endpoints live in different communities.
pub fn cross_community_fraction(
    g: &GraphSnapshot,
    results: &[ScoredPath],
    communities: &[usize],
) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let crossing = results
        .iter()
        .filter(|sp| {
            sp.path.triples.iter().any(|&idx| {
                let t = g.triple(idx);
                communities[t.subject] != communities[t.object]
            })
        })
        .count();
    crossing as f64 / results.len() as f64
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub name: String,
    /// Overlap with the full-signal oracle top-k.
    pub coverage: f64,
    pub cross_community_fraction: f64,
    pub results: usize,
    pub paths_explored: u64,
    pub score_evaluations: u64,
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub rows: Vec<AblationRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "ablation": self.rows.iter().map(|r| json!({
                "name": r.name,
                "coverage": r.coverage,
                "cross_community_fraction": r.cross_community_fraction,
                "results": r.results,
                "paths_explored": r.paths_explored,
                "score_evaluations": r.score_evaluations,
            })).collect::<Vec<_>>(),
        })
    }

    /// Fixed-width text table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>9} {:>11} {:>8} {:>9} {:>11}\n",
            "variant", "coverage", "cross-comm", "results", "explored", "evaluations"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<14} {:>9.4} {:>11.4} {:>8} {:>9} {:>11}\n",
                r.name,
                r.coverage,
                r.cross_community_fraction,
                r.results,
                r.paths_explored,
                r.score_evaluations
            ));
        }
        out
    }
}

/// The standard ablation grid. "no-bridge" drops both community-derived
/// signals (bridge and affinity) since they travel together.
pub fn default_ablation_variants() -> Vec<(String, SignalToggles)> {
    let full = SignalToggles::default();
    vec![
        ("full".to_string(), full),
        (
            "no-npll".to_string(),
            SignalToggles {
                edge: false,
                ..full
            },
        ),
        (
            "no-temporal".to_string(),
            SignalToggles {
                temporal: false,
                ..full
            },
        ),
        (
            "no-bridge".to_string(),
            SignalToggles {
                bridge: false,
                affinity: false,
                ..full
            },
        ),
    ]
}

/// Runs beam search once per toggle variant and reports overlap with the
/// exhaustive full-signal oracle plus the cross-community fraction.
pub fn run_ablation(
    g: &GraphSnapshot,
    search_cfg: &SearchConfig,
    base: &CompassScorer,
    communities: &[usize],
    variants: &[(String, SignalToggles)],
) -> Result<EvalReport> {
    let oracle = exhaustive_oracle(g, search_cfg, base)?;
    let mut rows = Vec::new();
    for (name, toggles) in variants {
        let scorer = CompassScorer {
            graph: base.graph,
            model: base.model,
            ppr: base.ppr,
            metadata: base.metadata,
            cfg: base.cfg,
            toggles: *toggles,
        };
        let report = discover(g, search_cfg, &scorer)?;
        rows.push(AblationRow {
            name: name.clone(),
            coverage: coverage(&report.results, &oracle.results),
            cross_community_fraction: cross_community_fraction(g, &report.results, communities),
            results: report.results.len(),
            paths_explored: report.paths_explored,
            score_evaluations: report.score_evaluations,
        });
    }
    Ok(EvalReport { rows })
}

#[derive(Debug, Clone)]
pub struct RecallPoint {
    pub beam_width: usize,
    pub mean_recall: f64,
    /// 1 - exp(-b/d) with d the mean out-degree across the graph family.
    pub bound: f64,
}

/// Seed choice shared by the evaluation harness: the entity with the
/// largest out-degree, lowest index on ties.
pub fn densest_entity(g: &GraphSnapshot) -> usize {
    (0..g.entity_count())
        .max_by(|&a, &b| g.out_degree(a).cmp(&g.out_degree(b)).then(b.cmp(&a)))
        .expect("non-empty graph")
}

/// Mean recall of the oracle top-k as a function of beam width, averaged
/// over a family of generated graphs, with the analytic reference bound.
pub fn recall_curve(
    specs: &[SyntheticSpec],
    beam_widths: &[usize],
    hops: usize,
    top_k: usize,
) -> Result<Vec<RecallPoint>> {
    let mut recall_sum = vec![0.0f64; beam_widths.len()];
    let mut degree_sum = 0.0f64;
    for spec in specs {
        let (g, _) = generate(spec)?;
        degree_sum += g.avg_out_degree();
        let seeds: BTreeSet<usize> = [densest_entity(&g)].into();
        let model = NpllModel::fallback(&g);
        let ppr = ppr_local_push(&g, &seeds, &PprConfig::default())?;
        let scorer = CompassScorer {
            graph: &g,
            model: &model,
            ppr: &ppr,
            metadata: None,
            cfg: CompassConfig::default(),
            toggles: SignalToggles::default(),
        };
        let mut cfg = SearchConfig::new(seeds);
        cfg.hops = hops;
        cfg.top_k = top_k;
        cfg.beam_width = usize::MAX / 2;
        let oracle = exhaustive_oracle(&g, &cfg, &scorer)?;
        for (i, &b) in beam_widths.iter().enumerate() {
            let mut bcfg = cfg.clone();
            bcfg.beam_width = b;
            let report = discover(&g, &bcfg, &scorer)?;
            recall_sum[i] += coverage(&report.results, &oracle.results);
        }
    }
    let n = specs.len().max(1) as f64;
    let d = (degree_sum / n).max(f64::MIN_POSITIVE);
    Ok(beam_widths
        .iter()
        .enumerate()
        .map(|(i, &b)| RecallPoint {
            beam_width: b,
            mean_recall: recall_sum[i] / n,
            bound: 1.0 - (-(b as f64) / d).exp(),
        })
        .collect())
}

/// Link-prediction AUC of the model over observed triples vs corrupted
/// negatives (object replacement, rejecting observed collisions). Ties get
/// the usual half credit via average ranks. `relation` restricts the
/// positives to one relation (e.g. a rule head); `None` uses every triple.
pub fn npll_auc(
    g: &GraphSnapshot,
    model: &NpllModel,
    negatives_per_positive: usize,
    rng_seed: u64,
    relation: Option<usize>,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = g.entity_count();
    let mut scores: Vec<(f64, bool)> = Vec::new();
    for t in g.triples() {
        if relation.is_some_and(|r| r != t.relation) {
            continue;
        }
        scores.push((
            model.score_triple_unchecked(g, t.subject, t.relation, t.object),
            true,
        ));
        for _ in 0..negatives_per_positive {
            let mut obj = rng.gen_range(0..n);
            for _ in 0..10 {
                if obj != t.object && g.find_edge(t.subject, t.relation, obj).is_none() {
                    break;
                }
                obj = rng.gen_range(0..n);
            }
            if obj == t.object || g.find_edge(t.subject, t.relation, obj).is_some() {
                continue;
            }
            scores.push((
                model.score_triple_unchecked(g, t.subject, t.relation, obj),
                false,
            ));
        }
    }
    let pos = scores.iter().filter(|(_, label)| *label).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    // Mann-Whitney U from average ranks
    scores.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < scores.len() {
        let mut j = i;
        while j < scores.len() && scores[j].0 == scores[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1..=j
        for item in &scores[i..j] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    u / (pos as f64 * neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::npll::{mine_rules, train_em, TrainConfig};

    #[test]
    fn coverage_counts_exact_path_matches() {
        // identical triple lists count, disjoint ones do not; checked via
        // full self-coverage on a tiny run
        let spec = SyntheticSpec {
            num_entities: 20,
            rng_seed: 5,
            ..SyntheticSpec::default()
        };
        let (g, _) = generate(&spec).unwrap();
        let seeds: BTreeSet<usize> = [densest_entity(&g)].into();
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
        cfg.top_k = 10;
        cfg.beam_width = 1 << 20;
        let oracle = exhaustive_oracle(&g, &cfg, &scorer).unwrap();
        assert_eq!(coverage(&oracle.results, &oracle.results), 1.0);
        assert_eq!(coverage(&[], &oracle.results), 0.0);
    }

    #[test]
    fn recall_reaches_one_at_exhaustive_width() {
        let specs = vec![SyntheticSpec {
            num_entities: 25,
            rng_seed: 6,
            ..SyntheticSpec::default()
        }];
        let points = recall_curve(&specs, &[1, 1 << 20], 2, 5).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points[0].mean_recall <= points[1].mean_recall);
        assert_eq!(points[1].mean_recall, 1.0);
        assert!(points[1].bound > 0.999);
    }

    #[test]
    fn trained_model_beats_coin_flip_on_planted_rule() {
        let spec = SyntheticSpec {
            num_entities: 60,
            p_in: 0.08,
            p_out: 0.02,
            planted_rule: Some(0.9),
            planted_chains: 120,
            rng_seed: 8,
            ..SyntheticSpec::default()
        };
        let (g, _) = generate(&spec).unwrap();
        let cfg = TrainConfig::default();
        let rules = mine_rules(&g, &cfg);
        assert!(!rules.is_empty(), "planted rule should be mined");
        let model = train_em(&g, rules, &cfg).unwrap();
        let auc = npll_auc(&g, &model, 5, 0, None);
        assert!(auc > 0.55, "auc {auc}");
    }

    #[test]
    fn ablation_report_has_one_row_per_variant() {
        let spec = SyntheticSpec {
            num_entities: 30,
            rng_seed: 10,
            ..SyntheticSpec::default()
        };
        let (g, truth) = generate(&spec).unwrap();
        let seeds: BTreeSet<usize> = [densest_entity(&g)].into();
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
        cfg.top_k = 10;
        // truth communities are indexed in generation order == intern order
        let report =
            run_ablation(&g, &cfg, &scorer, &truth.communities, &default_ablation_variants())
                .unwrap();
        assert_eq!(report.rows.len(), 4);
        let table = report.render_table();
        assert!(table.contains("no-temporal"));
        assert!(report.to_json()["ablation"].as_array().unwrap().len() == 4);
    }
}
