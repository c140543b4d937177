//! Approximate Personalized PageRank from a seed set via local push,
//! with an exact power-iteration oracle for validation.
//!
//! The push follows out-edges of the column-normalized adjacency.
//! Dangling nodes redistribute their walk mass to the seed distribution,
//! keeping the score vector substochastic and testable.

use std::collections::{BTreeSet, HashMap};

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct PprConfig {
    /// Teleport probability back to the seed distribution.
    pub alpha: f64,
    /// Push tolerance; the per-node error bound is epsilon * out_degree.
    pub epsilon: f64,
    /// Walk on the symmetrized graph instead of directed out-edges.
    pub symmetrize: bool,
}

impl Default for PprConfig {
    fn default() -> Self {
        PprConfig {
            alpha: 0.15,
            epsilon: 1e-4,
            symmetrize: false,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(OdinError::InvalidParameter(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(OdinError::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Sparse PPR vector. Entities absent from the map score 0.
#[derive(Debug, Clone)]
pub struct PprVector {
    scores: HashMap<usize, f64>,
    pub seeds: BTreeSet<usize>,
}

impl PprVector {
    pub fn score(&self, entity: usize) -> f64 {
        self.scores.get(&entity).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.scores.values().sum()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries sorted by entity index, for deterministic serialization.
    pub fn sorted_entries(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.scores.iter().map(|(&e, &s)| (e, s)).collect();
        v.sort_unstable_by_key(|&(e, _)| e);
        v
    }
}

/// Flattened walk adjacency; parallel edges count once per edge.
struct WalkGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl WalkGraph {
    fn build(g: &GraphSnapshot, symmetrize: bool) -> WalkGraph {
        let n = g.entity_count();
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, list) in lists.iter_mut().enumerate() {
            for &(_, o, _) in g.neighbors(v) {
                list.push(o);
            }
            if symmetrize {
                for &(_, s, _) in g.in_neighbors(v) {
                    list.push(s);
                }
                list.sort_unstable();
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for list in lists {
            targets.extend(list);
            offsets.push(targets.len());
        }
        WalkGraph { offsets, targets }
    }

    fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    fn targets(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

fn validate_seeds(g: &GraphSnapshot, seeds: &BTreeSet<usize>) -> Result<()> {
    if seeds.is_empty() {
        return Err(OdinError::InvalidParameter(
            "seed set must be non-empty".to_string(),
        ));
    }
    for &s in seeds {
        if s >= g.entity_count() {
            return Err(OdinError::EntityNotFound(format!("seed index {s}")));
        }
    }
    Ok(())
}

/// Approximate PPR by deterministic local push (lowest entity index
/// pushed first). After the push phase, residual sweeps run until the
/// total residual mass drops below epsilon / 2, so every entity satisfies
/// |approx(v) - exact(v)| <= epsilon * out_degree(v) with margin.
pub fn ppr_local_push(
    g: &GraphSnapshot,
    seeds: &BTreeSet<usize>,
    cfg: &PprConfig,
) -> Result<PprVector> {
    cfg.validate()?;
    validate_seeds(g, seeds)?;
    let walk = WalkGraph::build(g, cfg.symmetrize);
    let seed_mass = 1.0 / seeds.len() as f64;

    let mut p: HashMap<usize, f64> = HashMap::new();
    let mut r: HashMap<usize, f64> = HashMap::new();
    let mut active: BTreeSet<usize> = BTreeSet::new();
    for &s in seeds {
        r.insert(s, seed_mass);
        active.insert(s);
    }

    let threshold = |_v: usize, deg: usize| -> f64 {
        if deg == 0 {
            // dangling residual teleports to seeds immediately
            f64::MIN_POSITIVE
        } else {
            cfg.epsilon * deg as f64
        }
    };

    let push = |v: usize,
                p: &mut HashMap<usize, f64>,
                r: &mut HashMap<usize, f64>,
                active: &mut BTreeSet<usize>,
                walk: &WalkGraph| {
        let rv = r.insert(v, 0.0).unwrap_or(0.0);
        if rv <= 0.0 {
            return;
        }
        *p.entry(v).or_insert(0.0) += cfg.alpha * rv;
        let rest = (1.0 - cfg.alpha) * rv;
        let deg = walk.degree(v);
        if deg == 0 {
            for &s in seeds {
                let ru = r.entry(s).or_insert(0.0);
                *ru += rest * seed_mass;
                if *ru > threshold(s, walk.degree(s)) {
                    active.insert(s);
                }
            }
        } else {
            let share = rest / deg as f64;
            for &u in walk.targets(v) {
                let ru = r.entry(u).or_insert(0.0);
                *ru += share;
                if *ru > threshold(u, walk.degree(u)) {
                    active.insert(u);
                }
            }
        }
    };

    // Round-synchronized pushes: drain the current active set in index
    // order before admitting nodes it activates. Symmetric nodes then see
    // identical addition sequences and end up bit-identical.
    while !active.is_empty() {
        let round: Vec<usize> = active.iter().copied().collect();
        active.clear();
        for v in round {
            if r.get(&v).copied().unwrap_or(0.0) > threshold(v, walk.degree(v)) {
                push(v, &mut p, &mut r, &mut active, &walk);
            }
        }
    }

    // Residual sweeps: each pass scales remaining mass by (1 - alpha).
    loop {
        let total: f64 = r.values().sum();
        if total <= cfg.epsilon * 0.5 {
            break;
        }
        let mut pending: Vec<usize> = r
            .iter()
            .filter(|(_, &rv)| rv > 0.0)
            .map(|(&v, _)| v)
            .collect();
        pending.sort_unstable();
        for v in pending {
            push(v, &mut p, &mut r, &mut active, &walk);
        }
        active.clear();
    }

    Ok(PprVector {
        scores: p,
        seeds: seeds.clone(),
    })
}

const EXACT_SIZE_GUARD: usize = 100_000;

/// Exact PPR by dense power iteration; validation oracle for the push.
pub fn ppr_exact(
    g: &GraphSnapshot,
    seeds: &BTreeSet<usize>,
    alpha: f64,
    max_iterations: usize,
) -> Result<PprVector> {
    ppr_exact_cfg(g, seeds, alpha, max_iterations, false)
}

pub fn ppr_exact_cfg(
    g: &GraphSnapshot,
    seeds: &BTreeSet<usize>,
    alpha: f64,
    max_iterations: usize,
    symmetrize: bool,
) -> Result<PprVector> {
    validate_seeds(g, seeds)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(OdinError::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let n = g.entity_count();
    if n > EXACT_SIZE_GUARD {
        return Err(OdinError::SizeGuard(format!(
            "exact PPR limited to {EXACT_SIZE_GUARD} entities, graph has {n}"
        )));
    }
    let walk = WalkGraph::build(g, symmetrize);
    let seed_mass = 1.0 / seeds.len() as f64;
    let mut s = vec![0.0; n];
    for &seed in seeds {
        s[seed] = seed_mass;
    }

    let mut pi = s.clone();
    for _ in 0..max_iterations {
        let mut next = vec![0.0; n];
        let mut dangling_mass = 0.0;
        for v in 0..n {
            let deg = walk.degree(v);
            if deg == 0 {
                dangling_mass += pi[v];
            } else {
                let share = pi[v] / deg as f64;
                for &u in walk.targets(v) {
                    next[u] += share;
                }
            }
        }
        let mut max_delta: f64 = 0.0;
        for v in 0..n {
            let val = alpha * s[v] + (1.0 - alpha) * (next[v] + dangling_mass * s[v]);
            max_delta = max_delta.max((val - pi[v]).abs());
            pi[v] = val;
        }
        if max_delta < 1e-10 {
            break;
        }
    }

    let scores = pi
        .into_iter()
        .enumerate()
        .filter(|&(_, v)| v > 0.0)
        .collect();
    Ok(PprVector {
        scores,
        seeds: seeds.clone(),
    })
}

/// Structural importance of a path: mean PPR over the non-seed entities
/// e1..eh, divided by the supplied normalizer and clamped to [0, 1].
pub fn struct_score(ppr: &PprVector, path: &Path, normalizer: f64) -> f64 {
    debug_assert!(normalizer > 0.0);
    (raw_struct_mean(ppr, path) / normalizer).clamp(0.0, 1.0)
}

/// Unnormalized mean PPR over e1..eh; the search layer takes the frontier
/// max of this as the per-hop normalizer.
pub fn raw_struct_mean(ppr: &PprVector, path: &Path) -> f64 {
    let tail = &path.entities[1..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|&e| ppr.score(e)).sum::<f64>() / tail.len() as f64
}
