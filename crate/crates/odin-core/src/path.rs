//! Paths over a snapshot: ordered sequences of connected triples.

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;

/// A path of h hops: triple indices plus the derived entity sequence
/// e0..eh. Consecutive triples share an entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub triples: Vec<usize>,
    pub entities: Vec<usize>,
}

impl Path {
    /// Builds and validates a path from triple indices.
    pub fn from_triples(g: &GraphSnapshot, triples: Vec<usize>) -> Result<Path> {
        if triples.is_empty() {
            return Err(OdinError::InvalidParameter("empty path".to_string()));
        }
        let mut entities = Vec::with_capacity(triples.len() + 1);
        entities.push(g.triple(triples[0]).subject);
        for &idx in &triples {
            let t = g.triple(idx);
            if t.subject != *entities.last().unwrap() {
                return Err(OdinError::InvalidParameter(
                    "path triples are not connected".to_string(),
                ));
            }
            entities.push(t.object);
        }
        Ok(Path { triples, entities })
    }

    /// Starts a fresh single-edge path from a triple index.
    pub fn single(g: &GraphSnapshot, triple_idx: usize) -> Path {
        let t = g.triple(triple_idx);
        Path {
            triples: vec![triple_idx],
            entities: vec![t.subject, t.object],
        }
    }

    /// Extends by one out-edge. Caller guarantees the edge departs from
    /// the path's terminal entity.
    pub fn extend(&self, g: &GraphSnapshot, triple_idx: usize) -> Path {
        let t = g.triple(triple_idx);
        debug_assert_eq!(t.subject, *self.entities.last().unwrap());
        let mut triples = self.triples.clone();
        triples.push(triple_idx);
        let mut entities = self.entities.clone();
        entities.push(t.object);
        Path { triples, entities }
    }

    pub fn hops(&self) -> usize {
        self.triples.len()
    }

    pub fn terminal(&self) -> usize {
        *self.entities.last().unwrap()
    }

    pub fn visits(&self, entity: usize) -> bool {
        self.entities.contains(&entity)
    }

    /// Entity id sequence, for display and lexicographic tie-breaking.
    pub fn entity_ids<'a>(&self, g: &'a GraphSnapshot) -> Vec<&'a str> {
        self.entities.iter().map(|&e| g.entity_id(e)).collect()
    }
}
