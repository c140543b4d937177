//! Offline evaluation harness: synthetic graph generation, exhaustive and
//! baseline rankers sharing the production scorer, ablations, recall
//! curves, and link-prediction AUC.

pub mod ablation;
pub mod oracle;
pub mod synth;

pub use ablation::{
    coverage, cross_community_fraction, default_ablation_variants, densest_entity, npll_auc,
    recall_curve, run_ablation, AblationRow, EvalReport, RecallPoint,
};
pub use oracle::{
    exhaustive_oracle, exhaustive_oracle_with_guard, ppr_only_baseline, random_walk_baseline,
    results_to_json,
    ORACLE_PATH_GUARD,
};
pub use synth::{generate, generate_jsonl, GroundTruth, SyntheticSpec};
