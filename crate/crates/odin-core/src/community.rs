//! Offline community metadata: assignments, bridge entities with
//! strengths, and inter-community affinity. The detector is pluggable;
//! downstream scoring consumes only the assignment, strengths, and the
//! affinity table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;

/// Total mapping entity index -> community id in [0, num_communities).
#[derive(Debug, Clone)]
pub struct CommunityAssignment {
    pub communities: Vec<usize>,
    pub num_communities: usize,
}

impl CommunityAssignment {
    pub fn community_of(&self, entity: usize) -> usize {
        self.communities[entity]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_communities];
        for &c in &self.communities {
            sizes[c] += 1;
        }
        sizes
    }
}

/// An entity whose 1-hop neighborhood (own community included) spans at
/// least two communities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeEntry {
    pub entity: usize,
    pub communities: BTreeSet<usize>,
    pub strength: u32,
}

/// Symmetric, max-normalized inter-community edge densities. Keys are
/// stored with ci < cj; within-community pairs are never present.
#[derive(Debug, Clone, Default)]
pub struct AffinityTable {
    entries: BTreeMap<(usize, usize), f64>,
}

impl AffinityTable {
    pub fn get(&self, ci: usize, cj: usize) -> Option<f64> {
        let key = (ci.min(cj), ci.max(cj));
        self.entries.get(&key).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &f64)> {
        self.entries.iter()
    }
}

/// Everything the online engine consumes, bundled.
#[derive(Debug, Clone)]
pub struct CommunityMetadata {
    pub assignment: CommunityAssignment,
    pub bridges: Vec<BridgeEntry>,
    pub affinity: AffinityTable,
    bridge_strength: HashMap<usize, u32>,
}

impl CommunityMetadata {
    pub fn new(
        assignment: CommunityAssignment,
        bridges: Vec<BridgeEntry>,
        affinity: AffinityTable,
    ) -> CommunityMetadata {
        let bridge_strength = bridges.iter().map(|b| (b.entity, b.strength)).collect();
        CommunityMetadata {
            assignment,
            bridges,
            affinity,
            bridge_strength,
        }
    }

    pub fn bridge_strength(&self, entity: usize) -> Option<u32> {
        self.bridge_strength.get(&entity).copied()
    }
}

/// Pluggable community detection strategy.
pub trait CommunityDetector {
    fn detect(&self, g: &GraphSnapshot, rng_seed: u64) -> CommunityAssignment;
}

/// Default strategy: greedy modularity maximization (Louvain-style local
/// moving with aggregation) on the symmetrized graph. Node visit order is
/// shuffled from the seed; everything after that is deterministic with
/// ties broken toward the lowest community id.
pub struct GreedyModularity;

struct SymGraph {
    adj: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    total_weight_2m: f64,
}

impl SymGraph {
    fn from_snapshot(g: &GraphSnapshot) -> SymGraph {
        let n = g.entity_count();
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for t in g.triples() {
            if t.subject == t.object {
                *weights[t.subject].entry(t.subject).or_insert(0.0) += 2.0;
            } else {
                *weights[t.subject].entry(t.object).or_insert(0.0) += 1.0;
                *weights[t.object].entry(t.subject).or_insert(0.0) += 1.0;
            }
        }
        Self::from_weights(weights)
    }

    fn from_weights(weights: Vec<BTreeMap<usize, f64>>) -> SymGraph {
        let adj: Vec<Vec<(usize, f64)>> = weights
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        let degree: Vec<f64> = adj
            .iter()
            .map(|list| list.iter().map(|&(_, w)| w).sum())
            .collect();
        let total_weight_2m = degree.iter().sum();
        SymGraph {
            adj,
            degree,
            total_weight_2m,
        }
    }
}

impl CommunityDetector for GreedyModularity {
    fn detect(&self, g: &GraphSnapshot, rng_seed: u64) -> CommunityAssignment {
        let n = g.entity_count();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut graph = SymGraph::from_snapshot(g);
        // membership[level node] -> community at that level
        let mut node_to_final: Vec<usize> = (0..n).collect();

        loop {
            let labels = local_moving(&graph, &mut rng);
            let (compact, num) = compact_labels(&labels);
            if num == graph.adj.len() {
                break;
            }
            for m in node_to_final.iter_mut() {
                *m = compact[*m];
            }
            if num == 1 {
                break;
            }
            // aggregate
            let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); num];
            for (v, list) in graph.adj.iter().enumerate() {
                for &(u, w) in list {
                    let (cv, cu) = (compact[v], compact[u]);
                    *weights[cv].entry(cu).or_insert(0.0) += w;
                }
            }
            graph = SymGraph::from_weights(weights);
        }

        relabel_by_min_member(node_to_final)
    }
}

fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        out.push(*map.entry(l).or_insert(next));
    }
    let len = map.len();
    (out, len)
}

fn relabel_by_min_member(membership: Vec<usize>) -> CommunityAssignment {
    // community ids ordered by their smallest entity index
    let mut first_seen = BTreeMap::new();
    let mut communities = Vec::with_capacity(membership.len());
    for &c in &membership {
        let next = first_seen.len();
        communities.push(*first_seen.entry(c).or_insert(next));
    }
    let num_communities = first_seen.len().max(1);
    CommunityAssignment {
        communities,
        num_communities,
    }
}

fn local_moving(graph: &SymGraph, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = graph.adj.len();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = graph.degree.clone();
    let m2 = graph.total_weight_2m.max(f64::MIN_POSITIVE);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut improved = true;
    while improved {
        improved = false;
        for &v in &order {
            let current = labels[v];
            tot[current] -= graph.degree[v];

            let mut k_in: BTreeMap<usize, f64> = BTreeMap::new();
            for &(u, w) in &graph.adj[v] {
                if u != v {
                    *k_in.entry(labels[u]).or_insert(0.0) += w;
                }
            }
            // staying in place (possibly alone) scores its own entry too
            k_in.entry(current).or_insert(0.0);

            let mut best = current;
            let mut best_gain = f64::NEG_INFINITY;
            for (&c, &kc) in &k_in {
                let gain = kc - tot[c] * graph.degree[v] / m2;
                if gain > best_gain + 1e-12 || (gain > best_gain - 1e-12 && c < best) {
                    best = c;
                    best_gain = gain;
                }
            }
            if best != current {
                improved = true;
            }
            labels[v] = best;
            tot[best] += graph.degree[v];
        }
    }
    labels
}

/// Deterministic community detection entry point.
pub fn detect_communities(
    g: &GraphSnapshot,
    detector: &dyn CommunityDetector,
    rng_seed: u64,
) -> CommunityAssignment {
    detector.detect(g, rng_seed)
}

/// Entities whose 1-hop neighborhood (own community included) spans at
/// least two communities. Sorted by strength desc, then entity id.
pub fn compute_bridges(g: &GraphSnapshot, assignment: &CommunityAssignment) -> Vec<BridgeEntry> {
    let mut entries = Vec::new();
    for e in 0..g.entity_count() {
        let mut span: BTreeSet<usize> = BTreeSet::new();
        span.insert(assignment.community_of(e));
        for &(_, o, _) in g.neighbors(e) {
            span.insert(assignment.community_of(o));
        }
        for &(_, s, _) in g.in_neighbors(e) {
            span.insert(assignment.community_of(s));
        }
        if span.len() >= 2 {
            entries.push(BridgeEntry {
                entity: e,
                strength: span.len() as u32,
                communities: span,
            });
        }
    }
    entries.sort_by(|a, b| b.strength.cmp(&a.strength).then(a.entity.cmp(&b.entity)));
    entries
}

/// Raw cross-community edge densities cross(ci,cj) / (|ci|·|cj|),
/// max-normalized so the largest entry is exactly 1. Empty when no
/// cross-community edge exists.
pub fn compute_affinity(g: &GraphSnapshot, assignment: &CommunityAssignment) -> AffinityTable {
    let sizes = assignment.sizes();
    let mut cross: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for t in g.triples() {
        let (ci, cj) = (
            assignment.community_of(t.subject),
            assignment.community_of(t.object),
        );
        if ci != cj {
            *cross.entry((ci.min(cj), ci.max(cj))).or_insert(0) += 1;
        }
    }
    let mut entries: BTreeMap<(usize, usize), f64> = cross
        .into_iter()
        .map(|((ci, cj), count)| {
            let density = count as f64 / (sizes[ci] as f64 * sizes[cj] as f64);
            ((ci, cj), density)
        })
        .collect();
    let max = entries.values().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in entries.values_mut() {
            *v /= max;
        }
    }
    AffinityTable { entries }
}

pub fn compute_metadata(
    g: &GraphSnapshot,
    detector: &dyn CommunityDetector,
    rng_seed: u64,
) -> CommunityMetadata {
    let assignment = detect_communities(g, detector, rng_seed);
    let bridges = compute_bridges(g, &assignment);
    let affinity = compute_affinity(g, &assignment);
    CommunityMetadata::new(assignment, bridges, affinity)
}

#[derive(Serialize, Deserialize)]
struct CommunityRecord {
    entity: String,
    community: usize,
}

#[derive(Serialize, Deserialize)]
struct BridgeRecord {
    entity: String,
    communities: Vec<usize>,
    strength: u32,
}

#[derive(Serialize, Deserialize)]
struct AffinityRecord {
    ci: usize,
    cj: usize,
    score: f64,
}

pub const COMMUNITIES_FILE: &str = "communities.jsonl";
pub const BRIDGES_FILE: &str = "bridges.jsonl";
pub const AFFINITY_FILE: &str = "affinity.jsonl";

pub fn save_metadata(meta: &CommunityMetadata, g: &GraphSnapshot, dir: &FsPath) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = std::fs::File::create(dir.join(COMMUNITIES_FILE))?;
    for e in 0..g.entity_count() {
        let rec = CommunityRecord {
            entity: g.entity_id(e).to_string(),
            community: meta.assignment.community_of(e),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| OdinError::Load(e.to_string()))?;
        writeln!(w)?;
    }
    let mut w = std::fs::File::create(dir.join(BRIDGES_FILE))?;
    for b in &meta.bridges {
        let rec = BridgeRecord {
            entity: g.entity_id(b.entity).to_string(),
            communities: b.communities.iter().copied().collect(),
            strength: b.strength,
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| OdinError::Load(e.to_string()))?;
        writeln!(w)?;
    }
    let mut w = std::fs::File::create(dir.join(AFFINITY_FILE))?;
    for (&(ci, cj), &score) in meta.affinity.entries.iter() {
        let rec = AffinityRecord { ci, cj, score };
        serde_json::to_writer(&mut w, &rec).map_err(|e| OdinError::Load(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Loads the three metadata files. Returns Ok(None) when the directory or
/// the communities file is absent; the engine then runs with the bridge
/// and affinity signals fixed at 1.
pub fn load_metadata(g: &GraphSnapshot, dir: &FsPath) -> Result<Option<CommunityMetadata>> {
    let communities_path = dir.join(COMMUNITIES_FILE);
    if !communities_path.exists() {
        return Ok(None);
    }

    let mut communities = vec![usize::MAX; g.entity_count()];
    let mut max_community = 0usize;
    for line in BufReader::new(std::fs::File::open(&communities_path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CommunityRecord =
            serde_json::from_str(&line).map_err(|e| OdinError::Load(e.to_string()))?;
        let e = g
            .entity_index(&rec.entity)
            .ok_or_else(|| OdinError::Load(format!("unknown entity {:?}", rec.entity)))?;
        communities[e] = rec.community;
        max_community = max_community.max(rec.community);
    }
    if communities.iter().any(|&c| c == usize::MAX) {
        return Err(OdinError::Load(
            "community assignment is not total over the snapshot".to_string(),
        ));
    }
    let assignment = CommunityAssignment {
        communities,
        num_communities: max_community + 1,
    };

    let mut bridges = Vec::new();
    let bridges_path = dir.join(BRIDGES_FILE);
    if bridges_path.exists() {
        for line in BufReader::new(std::fs::File::open(&bridges_path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: BridgeRecord =
                serde_json::from_str(&line).map_err(|e| OdinError::Load(e.to_string()))?;
            let entity = g
                .entity_index(&rec.entity)
                .ok_or_else(|| OdinError::Load(format!("unknown entity {:?}", rec.entity)))?;
            if rec.strength < 2 {
                return Err(OdinError::Load(format!(
                    "bridge strength must be >= 2, got {}",
                    rec.strength
                )));
            }
            bridges.push(BridgeEntry {
                entity,
                communities: rec.communities.into_iter().collect(),
                strength: rec.strength,
            });
        }
    }

    let mut entries = BTreeMap::new();
    let affinity_path = dir.join(AFFINITY_FILE);
    if affinity_path.exists() {
        for line in BufReader::new(std::fs::File::open(&affinity_path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AffinityRecord =
                serde_json::from_str(&line).map_err(|e| OdinError::Load(e.to_string()))?;
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(OdinError::Load("affinity out of range".to_string()));
            }
            entries.insert((rec.ci.min(rec.cj), rec.ci.max(rec.cj)), rec.score);
        }
    }

    Ok(Some(CommunityMetadata::new(
        assignment,
        bridges,
        AffinityTable { entries },
    )))
}
