//! Immutable knowledge-graph snapshot: JSONL ingestion, adjacency
//! indexing, global relation statistics, provenance lookup.
//!
//! Entities and relations are interned; internal indices are assigned in
//! lexicographic id order, so comparing indices is equivalent to comparing
//! ids. All query operations on a constructed snapshot are read-only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};

/// One line of the triples file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripleRecord {
    pub s: String,
    pub r: String,
    pub o: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prov: Option<Vec<String>>,
}

/// A directed, typed, optionally timestamped edge with provenance links.
/// Endpoints are stored as interned indices into the snapshot tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
    pub timestamp: Option<u64>,
    pub provenance: Vec<String>,
}

/// Out-edge entry: (relation index, object index, triple index).
pub type OutEdge = (usize, usize, usize);

/// Immutable in-memory knowledge graph with adjacency and statistics.
#[derive(Debug)]
pub struct GraphSnapshot {
    entity_ids: Vec<String>,
    entity_lookup: HashMap<String, usize>,
    relation_ids: Vec<String>,
    relation_lookup: HashMap<String, usize>,
    triples: Vec<Triple>,
    out_adjacency: Vec<Vec<OutEdge>>,
    in_adjacency: Vec<Vec<OutEdge>>, // (relation, subject, triple index)
    edge_lookup: HashMap<(usize, usize, usize), usize>,
    relation_counts: Vec<u64>,
    max_timestamp: Option<u64>,
}

const SNAPSHOT_HEADER_FORMAT: &str = "odin-kg";

#[derive(Deserialize)]
struct HeaderLine {
    format: String,
    version: u32,
}

impl GraphSnapshot {
    /// Builds a snapshot from a line-oriented JSONL stream. A leading
    /// `{"format":"odin-kg","version":1}` header line is accepted and
    /// skipped, so serialized snapshots re-ingest directly.
    pub fn ingest<R: BufRead>(reader: R) -> Result<GraphSnapshot> {
        Self::ingest_with_entities(reader, &[])
    }

    /// Same as [`ingest`](Self::ingest) but registers extra entities that
    /// may not appear in any triple (isolated nodes).
    pub fn ingest_with_entities<R: BufRead>(
        reader: R,
        extra_entities: &[String],
    ) -> Result<GraphSnapshot> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if lineno == 0 {
                if let Ok(header) = serde_json::from_str::<HeaderLine>(trimmed) {
                    if header.format == SNAPSHOT_HEADER_FORMAT {
                        if header.version != 1 {
                            return Err(OdinError::Ingest {
                                line: 1,
                                msg: format!("unsupported snapshot version {}", header.version),
                            });
                        }
                        continue;
                    }
                }
            }
            let rec: TripleRecord =
                serde_json::from_str(trimmed).map_err(|e| OdinError::Ingest {
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
            if rec.s.is_empty() || rec.o.is_empty() {
                return Err(OdinError::Ingest {
                    line: lineno + 1,
                    msg: "subject and object must be non-empty".to_string(),
                });
            }
            if rec.r.is_empty() {
                return Err(OdinError::Ingest {
                    line: lineno + 1,
                    msg: "relation must be non-empty".to_string(),
                });
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(OdinError::EmptyGraph);
        }
        Self::from_records(records, extra_entities)
    }

    fn from_records(records: Vec<TripleRecord>, extra_entities: &[String]) -> Result<GraphSnapshot> {
        // Collapse duplicate (s,r,o): most recent timestamp, provenance unioned.
        let mut merged: BTreeMap<(String, String, String), (Option<u64>, BTreeSet<String>)> =
            BTreeMap::new();
        for rec in records {
            let entry = merged
                .entry((rec.s, rec.r, rec.o))
                .or_insert((None, BTreeSet::new()));
            entry.0 = entry.0.max(rec.t);
            if let Some(prov) = rec.prov {
                entry.1.extend(prov);
            }
        }

        let mut entity_set: BTreeSet<&str> = BTreeSet::new();
        let mut relation_set: BTreeSet<&str> = BTreeSet::new();
        for (s, r, o) in merged.keys() {
            entity_set.insert(s);
            entity_set.insert(o);
            relation_set.insert(r);
        }
        for e in extra_entities {
            if e.is_empty() {
                return Err(OdinError::InvalidParameter(
                    "entity id must be non-empty".to_string(),
                ));
            }
            entity_set.insert(e);
        }

        let entity_ids: Vec<String> = entity_set.iter().map(|s| s.to_string()).collect();
        let relation_ids: Vec<String> = relation_set.iter().map(|s| s.to_string()).collect();
        let entity_lookup: HashMap<String, usize> = entity_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let relation_lookup: HashMap<String, usize> = relation_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let mut triples = Vec::with_capacity(merged.len());
        let mut relation_counts = vec![0u64; relation_ids.len()];
        let mut max_timestamp = None;
        for ((s, r, o), (t, prov)) in merged {
            let triple = Triple {
                subject: entity_lookup[&s],
                relation: relation_lookup[&r],
                object: entity_lookup[&o],
                timestamp: t,
                provenance: prov.into_iter().collect(),
            };
            relation_counts[triple.relation] += 1;
            max_timestamp = max_timestamp.max(t);
            triples.push(triple);
        }

        let mut out_adjacency = vec![Vec::new(); entity_ids.len()];
        let mut in_adjacency = vec![Vec::new(); entity_ids.len()];
        let mut edge_lookup = HashMap::with_capacity(triples.len());
        for (idx, t) in triples.iter().enumerate() {
            out_adjacency[t.subject].push((t.relation, t.object, idx));
            in_adjacency[t.object].push((t.relation, t.subject, idx));
            edge_lookup.insert((t.subject, t.relation, t.object), idx);
        }
        // Canonical neighbor order: relation id asc, then object id asc.
        // Indices are assigned lexicographically, so index order suffices.
        for adj in out_adjacency.iter_mut().chain(in_adjacency.iter_mut()) {
            adj.sort_unstable_by_key(|&(r, e, _)| (r, e));
        }

        Ok(GraphSnapshot {
            entity_ids,
            entity_lookup,
            relation_ids,
            relation_lookup,
            triples,
            out_adjacency,
            in_adjacency,
            edge_lookup,
            relation_counts,
            max_timestamp,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_ids.len()
    }

    pub fn total_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn max_timestamp(&self) -> Option<u64> {
        self.max_timestamp
    }

    pub fn avg_out_degree(&self) -> f64 {
        if self.entity_ids.is_empty() {
            0.0
        } else {
            self.triples.len() as f64 / self.entity_ids.len() as f64
        }
    }

    pub fn entity_id(&self, idx: usize) -> &str {
        &self.entity_ids[idx]
    }

    pub fn relation_id(&self, idx: usize) -> &str {
        &self.relation_ids[idx]
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entity_lookup.get(id).copied()
    }

    pub fn relation_index(&self, id: &str) -> Option<usize> {
        self.relation_lookup.get(id).copied()
    }

    pub fn require_entity(&self, id: &str) -> Result<usize> {
        self.entity_index(id)
            .ok_or_else(|| OdinError::EntityNotFound(id.to_string()))
    }

    pub fn triple(&self, idx: usize) -> &Triple {
        &self.triples[idx]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Out-edges of an entity in canonical order
    /// (relation id asc, object id asc).
    pub fn neighbors(&self, entity: usize) -> &[OutEdge] {
        &self.out_adjacency[entity]
    }

    pub fn neighbors_by_id(&self, id: &str) -> Result<&[OutEdge]> {
        Ok(self.neighbors(self.require_entity(id)?))
    }

    /// In-edges of an entity: (relation index, subject index, triple index).
    pub fn in_neighbors(&self, entity: usize) -> &[OutEdge] {
        &self.in_adjacency[entity]
    }

    pub fn out_degree(&self, entity: usize) -> usize {
        self.out_adjacency[entity].len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Out-edges of `entity` labeled with `relation`, found by binary
    /// search over the canonical adjacency order.
    pub fn neighbors_by_relation(&self, entity: usize, relation: usize) -> &[OutEdge] {
        let adj = &self.out_adjacency[entity];
        let lo = adj.partition_point(|&(r, _, _)| r < relation);
        let hi = adj.partition_point(|&(r, _, _)| r <= relation);
        &adj[lo..hi]
    }

    /// Triple index of an observed (s, r, o) edge, if present.
    pub fn find_edge(&self, s: usize, r: usize, o: usize) -> Option<usize> {
        self.edge_lookup.get(&(s, r, o)).copied()
    }

    pub fn relation_observation_count(&self, relation: usize) -> u64 {
        self.relation_counts[relation]
    }

    /// count(r) / total triples, in (0, 1].
    pub fn relation_frequency(&self, relation: usize) -> Result<f64> {
        let count = self
            .relation_counts
            .get(relation)
            .copied()
            .filter(|&c| c > 0)
            .ok_or_else(|| OdinError::RelationNotFound(format!("#{relation}")))?;
        Ok(count as f64 / self.triples.len() as f64)
    }

    pub fn relation_frequency_by_id(&self, id: &str) -> Result<f64> {
        let r = self
            .relation_index(id)
            .ok_or_else(|| OdinError::RelationNotFound(id.to_string()))?;
        self.relation_frequency(r)
    }

    /// Writes the snapshot as JSONL with a format header line. Re-ingesting
    /// the output reproduces an identical snapshot.
    pub fn serialize<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{{\"format\":\"odin-kg\",\"version\":1}}")?;
        for t in &self.triples {
            let rec = TripleRecord {
                s: self.entity_ids[t.subject].clone(),
                r: self.relation_ids[t.relation].clone(),
                o: self.entity_ids[t.object].clone(),
                t: t.timestamp,
                prov: if t.provenance.is_empty() {
                    None
                } else {
                    Some(t.provenance.clone())
                },
            };
            serde_json::to_writer(&mut w, &rec)
                .map_err(|e| OdinError::Load(e.to_string()))?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn relation_ids(&self) -> &[String] {
        &self.relation_ids
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
    fn single_edge() {
        let g = snap(r#"{"s":"a","r":"likes","o":"b"}"#);
        assert_eq!(g.entity_count(), 2);
        assert_eq!(g.total_triples(), 1);
        assert_eq!(g.relation_frequency_by_id("likes").unwrap(), 1.0);
    }

    #[test]
    fn duplicate_records_collapse() {
        let g = snap(concat!(
            r#"{"s":"a","r":"likes","o":"b","t":10,"prov":["d1"]}"#,
            "\n",
            r#"{"s":"a","r":"likes","o":"b","t":20,"prov":["d2"]}"#,
        ));
        assert_eq!(g.total_triples(), 1);
        let t = g.triple(0);
        assert_eq!(t.timestamp, Some(20));
        assert_eq!(t.provenance, vec!["d1".to_string(), "d2".to_string()]);
    }

    #[test]
    fn cycle_statistics() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c"}"#,
            "\n",
            r#"{"s":"c","r":"r","o":"a"}"#,
        ));
        assert_eq!(g.avg_out_degree(), 1.0);
        assert_eq!(g.relation_observation_count(0), 3);
        assert_eq!(g.max_timestamp(), None);
    }

    #[test]
    fn neighbor_ordering_is_canonical() {
        let g = snap(concat!(
            r#"{"s":"n","r":"r2","o":"x"}"#,
            "\n",
            r#"{"s":"n","r":"r1","o":"y"}"#,
        ));
        let edges = g.neighbors_by_id("n").unwrap();
        let rendered: Vec<(&str, &str)> = edges
            .iter()
            .map(|&(r, o, _)| (g.relation_id(r), g.entity_id(o)))
            .collect();
        assert_eq!(rendered, vec![("r1", "y"), ("r2", "x")]);
    }

    #[test]
    fn object_only_entity_has_no_out_edges() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        assert!(g.neighbors_by_id("b").unwrap().is_empty());
    }

    #[test]
    fn unknown_entity_errors() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        assert!(matches!(
            g.neighbors_by_id("zzz"),
            Err(OdinError::EntityNotFound(_))
        ));
    }

    #[test]
    fn unseen_relation_errors() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        assert!(g.relation_frequency_by_id("nope").is_err());
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = GraphSnapshot::ingest(Cursor::new(concat!(
            r#"{"s":"a","r":"r","o":"b"}"#,
            "\n",
            "not json",
        )))
        .unwrap_err();
        match err {
            OdinError::Ingest { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            GraphSnapshot::ingest(Cursor::new("")),
            Err(OdinError::EmptyGraph)
        ));
    }

    #[test]
    fn relation_frequencies_sum_to_one() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r1","o":"b"}"#,
            "\n",
            r#"{"s":"a","r":"r1","o":"c"}"#,
            "\n",
            r#"{"s":"a","r":"r1","o":"d"}"#,
            "\n",
            r#"{"s":"b","r":"r2","o":"c"}"#,
        ));
        assert_eq!(g.relation_frequency_by_id("r1").unwrap(), 0.75);
        let sum: f64 = (0..g.relation_count())
            .map(|r| g.relation_frequency(r).unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serialize_round_trip() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r1","o":"b","t":5,"prov":["d0"]}"#,
            "\n",
            r#"{"s":"b","r":"r2","o":"c"}"#,
        ));
        let mut buf = Vec::new();
        g.serialize(&mut buf).unwrap();
        let g2 = GraphSnapshot::ingest(Cursor::new(&buf)).unwrap();
        assert_eq!(g.entity_ids(), g2.entity_ids());
        assert_eq!(g.relation_ids(), g2.relation_ids());
        assert_eq!(g.triples(), g2.triples());
        assert_eq!(g.max_timestamp(), g2.max_timestamp());
    }

    #[test]
    fn hand_evaluated_relation_frequency() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r1","o":"b"}"#,
            "\n",
            r#"{"s":"a","r":"r2","o":"c"}"#,
            "\n",
            r#"{"s":"a","r":"r3","o":"d"}"#,
            "\n",
            r#"{"s":"b","r":"r3","o":"c"}"#,
        ));
        assert_eq!(g.relation_frequency_by_id("r3").unwrap(), 0.5);
    }
}
