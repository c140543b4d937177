//! Model structure and edge scoring.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;

/// A length-2 Horn rule r1(X,Y) ∧ r2(Y,Z) ⇒ r3(X,Z) over interned
/// relation indices, with its mining statistics and learned weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub body: (usize, usize),
    pub head: usize,
    pub support: u64,
    pub confidence: f64,
    pub weight: f64,
}

/// Fixed random feature embeddings, derived deterministically from the
/// stored seed and the snapshot's interning order. They are rebuilt
/// lazily after a weights-only load and are never persisted.
#[derive(Debug)]
pub(crate) struct Embeddings {
    pub dim: usize,
    pub entity: Vec<f64>,
    pub relation: Vec<f64>,
}

impl Embeddings {
    fn build(g: &GraphSnapshot, seed: u64, dim: usize) -> Embeddings {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut entity = Vec::with_capacity(g.entity_count() * dim);
        for _ in 0..g.entity_count() * dim {
            entity.push(rng.gen_range(-1.0..1.0) * scale);
        }
        let mut relation = Vec::with_capacity(g.relation_count() * dim);
        for _ in 0..g.relation_count() * dim {
            relation.push(rng.gen_range(-1.0..1.0) * scale);
        }
        Embeddings {
            dim,
            entity,
            relation,
        }
    }

    /// DistMult-style compatibility ⟨e_s ∘ R_r, e_o⟩.
    pub fn compatibility(&self, s: usize, r: usize, o: usize) -> f64 {
        let d = self.dim;
        let es = &self.entity[s * d..(s + 1) * d];
        let eo = &self.entity[o * d..(o + 1) * d];
        let rr = &self.relation[r * d..(r + 1) * d];
        es.iter()
            .zip(rr.iter())
            .zip(eo.iter())
            .map(|((a, b), c)| a * b * c)
            .sum()
    }
}

/// Trained (or fallback) plausibility model. Immutable after training;
/// safe for concurrent scoring.
#[derive(Debug)]
pub struct NpllModel {
    pub rules: Vec<Rule>,
    /// Indexed by relation index; length equals the snapshot relation count.
    pub relation_bias: Vec<f64>,
    pub embedding_dim: usize,
    pub gamma: f64,
    pub rng_seed: u64,
    pub trained: bool,
    pub epochs: u32,
    /// Per-epoch training loss, for monotonicity checks. Not persisted.
    pub loss_history: Vec<f64>,
    pub(crate) embeddings: OnceLock<Embeddings>,
}

impl NpllModel {
    /// Untrained fallback: scores every observed edge as exactly 1.
    pub fn fallback(g: &GraphSnapshot) -> NpllModel {
        NpllModel {
            rules: Vec::new(),
            relation_bias: vec![0.0; g.relation_count()],
            embedding_dim: 16,
            gamma: 0.0,
            rng_seed: 0,
            trained: false,
            epochs: 0,
            loss_history: Vec::new(),
            embeddings: OnceLock::new(),
        }
    }

    pub(crate) fn embeddings(&self, g: &GraphSnapshot) -> &Embeddings {
        self.embeddings
            .get_or_init(|| Embeddings::build(g, self.rng_seed, self.embedding_dim))
    }

    /// True when some intermediate entity grounds the rule body between
    /// s and o.
    pub(crate) fn body_grounds(
        g: &GraphSnapshot,
        body: (usize, usize),
        s: usize,
        o: usize,
    ) -> bool {
        g.neighbors_by_relation(s, body.0)
            .iter()
            .any(|&(_, mid, _)| g.find_edge(mid, body.1, o).is_some())
    }

    /// Raw discriminative score without the observed-edge guard. Used by
    /// training and evaluation against corrupted negatives; the public
    /// surface goes through [`score_edge`](Self::score_edge).
    pub(crate) fn score_triple_unchecked(
        &self,
        g: &GraphSnapshot,
        s: usize,
        r: usize,
        o: usize,
    ) -> f64 {
        if !self.trained {
            return 1.0;
        }
        let mut z = self.relation_bias[r];
        for rule in &self.rules {
            if rule.head == r && Self::body_grounds(g, rule.body, s, o) {
                z += rule.weight;
            }
        }
        if self.gamma != 0.0 {
            z += self.gamma * self.embeddings(g).compatibility(s, r, o);
        }
        sigmoid(z)
    }

    /// Plausibility of an observed edge, in (0,1). Rejects any triple not
    /// present in the snapshot: the model never contributes edges that are
    /// not evidence.
    pub fn score_edge(&self, g: &GraphSnapshot, s: usize, r: usize, o: usize) -> Result<f64> {
        if g.find_edge(s, r, o).is_none() {
            return Err(OdinError::NotObservedEdge {
                s: g.entity_id(s).to_string(),
                r: g.relation_id(r).to_string(),
                o: g.entity_id(o).to_string(),
            });
        }
        if !self.trained {
            return Ok(1.0);
        }
        Ok(self.score_triple_unchecked(g, s, r, o))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn snap(lines: &str) -> GraphSnapshot {
        GraphSnapshot::ingest(Cursor::new(lines)).unwrap()
    }

    #[test]
    fn fallback_scores_one() {
        let g = snap(r#"{"s":"a","r":"likes","o":"b"}"#);
        let m = NpllModel::fallback(&g);
        let a = g.entity_index("a").unwrap();
        let b = g.entity_index("b").unwrap();
        assert_eq!(m.score_edge(&g, a, 0, b).unwrap(), 1.0);
    }

    #[test]
    fn unobserved_edge_rejected() {
        let g = snap(concat!(
            r#"{"s":"a","r":"likes","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"likes","o":"c"}"#,
        ));
        let m = NpllModel::fallback(&g);
        let a = g.entity_index("a").unwrap();
        let c = g.entity_index("c").unwrap();
        assert!(matches!(
            m.score_edge(&g, a, 0, c),
            Err(OdinError::NotObservedEdge { .. })
        ));
    }

    #[test]
    fn zero_parameters_score_half() {
        let g = snap(r#"{"s":"a","r":"likes","o":"b"}"#);
        let mut m = NpllModel::fallback(&g);
        m.trained = true;
        m.gamma = 0.0;
        let a = g.entity_index("a").unwrap();
        let b = g.entity_index("b").unwrap();
        assert!((m.score_edge(&g, a, 0, b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fired_rule_weight_enters_sigmoid() {
        // a -p-> b -q-> c and a -s-> c: rule (p,q => s) fires on (a,s,c)
        let g = snap(concat!(
            r#"{"s":"a","r":"p","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"q","o":"c"}"#,
            "\n",
            r#"{"s":"a","r":"s","o":"c"}"#,
        ));
        let p = g.relation_index("p").unwrap();
        let q = g.relation_index("q").unwrap();
        let s_rel = g.relation_index("s").unwrap();
        let mut m = NpllModel::fallback(&g);
        m.trained = true;
        m.rules.push(Rule {
            body: (p, q),
            head: s_rel,
            support: 1,
            confidence: 1.0,
            weight: 2.0,
        });
        let a = g.entity_index("a").unwrap();
        let c = g.entity_index("c").unwrap();
        let score = m.score_edge(&g, a, s_rel, c).unwrap();
        assert!((score - sigmoid(2.0)).abs() < 1e-12);
        assert!((score - 0.8808).abs() < 1e-3);
    }
}
