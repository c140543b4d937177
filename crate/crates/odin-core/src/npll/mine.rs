//! AMIE-style mining of length-2 Horn rules with support and confidence.

use std::collections::HashMap;

use crate::kg::GraphSnapshot;
use crate::npll::{Rule, TrainConfig};

/// Enumerates all (r1, r2 ⇒ r3) rules over 2-path groundings
/// x →r1→ y →r2→ z. support = groundings also closed by x →r3→ z,
/// confidence = support / body groundings. Deterministic; the result is
/// sorted by confidence desc, then (r1, r2, r3) id order.
pub fn mine_rules(g: &GraphSnapshot, cfg: &TrainConfig) -> Vec<Rule> {
    // (x, z) -> relations connecting them directly
    let mut direct: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for t in g.triples() {
        direct
            .entry((t.subject, t.object))
            .or_default()
            .push(t.relation);
    }

    let mut body_counts: HashMap<(usize, usize), u64> = HashMap::new();
    let mut supports: HashMap<(usize, usize, usize), u64> = HashMap::new();
    for mid in 0..g.entity_count() {
        for &(r1, x, _) in g.in_neighbors(mid) {
            for &(r2, z, _) in g.neighbors(mid) {
                *body_counts.entry((r1, r2)).or_insert(0) += 1;
                if let Some(heads) = direct.get(&(x, z)) {
                    for &r3 in heads {
                        *supports.entry((r1, r2, r3)).or_insert(0) += 1;
                    }
                }
            }
        }
    }

    let mut rules: Vec<Rule> = supports
        .into_iter()
        .filter_map(|((r1, r2, r3), support)| {
            if support < cfg.min_support {
                return None;
            }
            let confidence = support as f64 / body_counts[&(r1, r2)] as f64;
            if confidence < cfg.min_confidence {
                return None;
            }
            Some(Rule {
                body: (r1, r2),
                head: r3,
                support,
                confidence,
                weight: 0.0,
            })
        })
        .collect();
    rules.sort_unstable_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| (a.body, a.head).cmp(&(b.body, b.head)))
    });
    rules
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn snap(lines: &str) -> GraphSnapshot {
        GraphSnapshot::ingest(Cursor::new(lines)).unwrap()
    }

    /// Chain fixture: n groundings of (p,q), `closed` of them closed by s.
    fn chain_fixture(n: usize, closed: usize) -> String {
        let mut out = String::new();
        for i in 0..n {
            out.push_str(&format!("{{\"s\":\"x{i}\",\"r\":\"p\",\"o\":\"y{i}\"}}\n"));
            out.push_str(&format!("{{\"s\":\"y{i}\",\"r\":\"q\",\"o\":\"z{i}\"}}\n"));
            if i < closed {
                out.push_str(&format!("{{\"s\":\"x{i}\",\"r\":\"s\",\"o\":\"z{i}\"}}\n"));
            }
        }
        out
    }

    #[test]
    fn fully_closed_rule_has_confidence_one() {
        let g = snap(&chain_fixture(12, 12));
        let cfg = TrainConfig::default();
        let rules = mine_rules(&g, &cfg);
        let p = g.relation_index("p").unwrap();
        let q = g.relation_index("q").unwrap();
        let s = g.relation_index("s").unwrap();
        let rule = rules
            .iter()
            .find(|r| r.body == (p, q) && r.head == s)
            .expect("planted rule mined");
        assert_eq!(rule.support, 12);
        assert_eq!(rule.confidence, 1.0);
    }

    #[test]
    fn half_closed_rule_has_confidence_half() {
        let g = snap(&chain_fixture(10, 5));
        let cfg = TrainConfig {
            min_support: 5,
            ..TrainConfig::default()
        };
        let rules = mine_rules(&g, &cfg);
        let p = g.relation_index("p").unwrap();
        let q = g.relation_index("q").unwrap();
        let s = g.relation_index("s").unwrap();
        let rule = rules
            .iter()
            .find(|r| r.body == (p, q) && r.head == s)
            .expect("planted rule mined");
        assert_eq!(rule.support, 5);
        assert_eq!(rule.confidence, 0.5);
    }

    #[test]
    fn sparse_graph_yields_no_rules() {
        // no 2-path repeats often enough to reach min_support 10
        let mut lines = String::new();
        for i in 0..8 {
            lines.push_str(&format!("{{\"s\":\"a{i}\",\"r\":\"r{i}\",\"o\":\"b{i}\"}}\n"));
        }
        let g = snap(&lines);
        assert!(mine_rules(&g, &TrainConfig::default()).is_empty());
    }
}
