//! Discovery engine for knowledge graphs: ranks multi-hop exploration
//! paths from seed entities with a multiplicative six-signal score found
//! via deterministic beam search. Scoring is evidence-grounded (only
//! observed edges participate), the plausibility model persists weights
//! only, and every score decomposes into per-signal attributions.

pub mod beam;
pub mod community;
pub mod compass;
pub mod error;
pub mod eval;
pub mod kg;
pub mod npll;
pub mod path;
pub mod ppr;

pub use beam::{discover, score_neighbors, ScoredPath, SearchConfig, SearchReport};
pub use community::{
    compute_affinity, compute_bridges, compute_metadata, detect_communities, load_metadata,
    save_metadata, AffinityTable, BridgeEntry, CommunityAssignment, CommunityDetector,
    CommunityMetadata, GreedyModularity,
};
pub use compass::{
    explain, CompassConfig, CompassScorer, PriorMode, SignalBreakdown, SignalToggles,
    StructNormalizerMode,
};
pub use error::{OdinError, Result};
pub use kg::{GraphSnapshot, Triple, TripleRecord};
pub use npll::{
    edge_confidence, ensure_model, load_weights, mine_rules, save_weights, train_em,
    EnsureOutcome, FileStore, MemoryStore, ModelSource, NpllModel, Rule, TrainConfig, WeightStore,
};
pub use path::Path;
pub use ppr::{ppr_exact, ppr_local_push, struct_score, PprConfig, PprVector};
