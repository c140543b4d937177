//! Discriminative plausibility model: mined Horn rules plus light
//! embedding features, trained by EM, scoring only edges that exist in
//! the snapshot. Persistence stores rule weights and relation biases
//! only; embeddings are reconstructed from the graph and the stored seed.

mod mine;
mod model;
mod persist;
mod train;

pub use mine::mine_rules;
pub use model::{NpllModel, Rule};
pub use persist::{load_weights, save_weights};
pub use train::train_em;

use crate::error::Result;
use crate::kg::GraphSnapshot;

/// Knobs for rule mining and EM training. A fixed `rng_seed` makes the
/// whole pipeline bitwise reproducible.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub min_support: u64,
    pub min_confidence: f64,
    pub negative_ratio: u32,
    pub learning_rate: f64,
    pub epochs: u32,
    pub embedding_dim: usize,
    /// Weight of the embedding compatibility feature.
    pub gamma: f64,
    /// Cap on sampled observed triples per training run.
    pub max_sample: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_support: 10,
            min_confidence: 0.1,
            negative_ratio: 5,
            learning_rate: 0.05,
            epochs: 10,
            embedding_dim: 16,
            gamma: 0.1,
            max_sample: 50_000,
            rng_seed: 0,
        }
    }
}

/// Key-value persistence for the weight blob.
pub trait WeightStore {
    fn get(&self, key: &str) -> Option<Vec<u8>>;
    fn put(&mut self, key: &str, blob: &[u8]) -> std::io::Result<()>;
}

/// In-memory store, mainly for tests and single-process runs.
#[derive(Debug, Default)]
pub struct MemoryStore {
    entries: std::collections::HashMap<String, Vec<u8>>,
}

impl WeightStore for MemoryStore {
    fn get(&self, key: &str) -> Option<Vec<u8>> {
        self.entries.get(key).cloned()
    }
    fn put(&mut self, key: &str, blob: &[u8]) -> std::io::Result<()> {
        self.entries.insert(key.to_string(), blob.to_vec());
        Ok(())
    }
}

/// File-backed store: each key is a file under the root directory.
#[derive(Debug)]
pub struct FileStore {
    root: std::path::PathBuf,
}

impl FileStore {
    pub fn new(root: impl Into<std::path::PathBuf>) -> FileStore {
        FileStore { root: root.into() }
    }

    fn path_for(&self, key: &str) -> std::path::PathBuf {
        self.root.join(key)
    }
}

impl WeightStore for FileStore {
    fn get(&self, key: &str) -> Option<Vec<u8>> {
        std::fs::read(self.path_for(key)).ok()
    }
    fn put(&mut self, key: &str, blob: &[u8]) -> std::io::Result<()> {
        if let Some(parent) = self.path_for(key).parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(self.path_for(key), blob)
    }
}

/// How the model returned by [`ensure_model`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSource {
    Loaded,
    Trained,
    Fallback,
}

#[derive(Debug)]
pub struct EnsureOutcome {
    pub model: NpllModel,
    pub source: ModelSource,
    /// Number of training invocations performed by this call.
    pub train_invocations: u32,
    /// False when a freshly trained model could not be persisted.
    pub persisted: bool,
    pub blob_size: Option<usize>,
}

/// Five-step lifecycle: load if present, otherwise mine + train +
/// persist, and on any failure return the untrained fallback model
/// (which scores every observed edge as 1). Never raises.
pub fn ensure_model(
    store: &mut dyn WeightStore,
    key: &str,
    g: &GraphSnapshot,
    cfg: &TrainConfig,
) -> EnsureOutcome {
    if let Some(blob) = store.get(key) {
        if let Ok(model) = load_weights(&blob, g) {
            return EnsureOutcome {
                model,
                source: ModelSource::Loaded,
                train_invocations: 0,
                persisted: true,
                blob_size: Some(blob.len()),
            };
        }
        // corrupt blob: fall through to retrain
    }
    let rules = mine_rules(g, cfg);
    match train_em(g, rules, cfg) {
        Ok(model) => {
            let (persisted, blob_size) = match save_weights(&model, g) {
                Ok(blob) => (store.put(key, &blob).is_ok(), Some(blob.len())),
                Err(_) => (false, None),
            };
            EnsureOutcome {
                model,
                source: ModelSource::Trained,
                train_invocations: 1,
                persisted,
                blob_size,
            }
        }
        Err(_) => EnsureOutcome {
            model: NpllModel::fallback(g),
            source: ModelSource::Fallback,
            train_invocations: 1,
            persisted: false,
            blob_size: None,
        },
    }
}

/// Product of per-edge plausibility along a path. Any zero-clamped edge
/// vetoes the whole path.
pub fn edge_confidence(m: &NpllModel, g: &GraphSnapshot, path: &crate::path::Path) -> Result<f64> {
    let mut product = 1.0;
    for &idx in &path.triples {
        let t = g.triple(idx);
        product *= m.score_edge(g, t.subject, t.relation, t.object)?;
    }
    Ok(product)
}
