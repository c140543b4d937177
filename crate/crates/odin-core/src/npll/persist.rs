//! Weights-only persistence. The blob is a deflate-compressed JSON
//! document carrying rules, weights, biases, and the embedding seed;
//! embeddings themselves are rebuilt from the graph on demand.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::npll::model::{NpllModel, Rule};

#[derive(Serialize, Deserialize)]
struct RuleRecord {
    body: [String; 2],
    head: String,
    weight: f64,
    support: u64,
    confidence: f64,
}

#[derive(Serialize, Deserialize)]
struct WeightBlob {
    format: String,
    version: u32,
    rng_seed: u64,
    embedding_dim: usize,
    gamma: f64,
    relation_bias: BTreeMap<String, f64>,
    rules: Vec<RuleRecord>,
}

const BLOB_FORMAT: &str = "odin-npll";

/// Serializes rules, weights, and biases to a compressed blob. Relation
/// indices are externalized to their string ids so the blob survives
/// re-ingestion of the same triples file.
pub fn save_weights(m: &NpllModel, g: &GraphSnapshot) -> Result<Vec<u8>> {
    if !m.trained {
        return Err(OdinError::InvalidParameter(
            "cannot persist an untrained fallback model".to_string(),
        ));
    }
    let blob = WeightBlob {
        format: BLOB_FORMAT.to_string(),
        version: 1,
        rng_seed: m.rng_seed,
        embedding_dim: m.embedding_dim,
        gamma: m.gamma,
        relation_bias: m
            .relation_bias
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b != 0.0)
            .map(|(i, &b)| (g.relation_id(i).to_string(), b))
            .collect(),
        rules: m
            .rules
            .iter()
            .map(|r| RuleRecord {
                body: [
                    g.relation_id(r.body.0).to_string(),
                    g.relation_id(r.body.1).to_string(),
                ],
                head: g.relation_id(r.head).to_string(),
                weight: r.weight,
                support: r.support,
                confidence: r.confidence,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&blob).map_err(|e| OdinError::Load(e.to_string()))?;
    let mut encoder = DeflateEncoder::new(Vec::new(), Compression::best());
    encoder.write_all(&json)?;
    Ok(encoder.finish()?)
}

/// Parses a weight blob against a snapshot. Unknown relations, a wrong
/// format marker, or out-of-range values are load errors; the lifecycle
/// responds by retraining.
pub fn load_weights(blob: &[u8], g: &GraphSnapshot) -> Result<NpllModel> {
    let mut json = Vec::new();
    let mut decoder = DeflateDecoder::new(blob);
    let text: &[u8] = match decoder.read_to_end(&mut json) {
        Ok(_) => &json,
        Err(_) => blob, // tolerate an uncompressed JSON document
    };
    let parsed: WeightBlob =
        serde_json::from_slice(text).map_err(|e| OdinError::Load(e.to_string()))?;
    if parsed.format != BLOB_FORMAT {
        return Err(OdinError::Load(format!(
            "unexpected blob format {:?}",
            parsed.format
        )));
    }
    if parsed.version != 1 {
        return Err(OdinError::Load(format!(
            "unsupported blob version {}",
            parsed.version
        )));
    }
    if parsed.embedding_dim == 0 {
        return Err(OdinError::Load("embedding_dim must be positive".to_string()));
    }

    let relation = |id: &str| -> Result<usize> {
        g.relation_index(id)
            .ok_or_else(|| OdinError::Load(format!("relation {id:?} not in snapshot")))
    };

    let mut relation_bias = vec![0.0; g.relation_count()];
    for (id, b) in &parsed.relation_bias {
        if !b.is_finite() {
            return Err(OdinError::Load(format!("non-finite bias for {id:?}")));
        }
        relation_bias[relation(id)?] = *b;
    }
    let mut rules = Vec::with_capacity(parsed.rules.len());
    for r in &parsed.rules {
        if !r.weight.is_finite() || !(0.0..=1.0).contains(&r.confidence) {
            return Err(OdinError::Load("rule parameters out of range".to_string()));
        }
        rules.push(Rule {
            body: (relation(&r.body[0])?, relation(&r.body[1])?),
            head: relation(&r.head)?,
            support: r.support,
            confidence: r.confidence,
            weight: r.weight,
        });
    }

    Ok(NpllModel {
        rules,
        relation_bias,
        embedding_dim: parsed.embedding_dim,
        gamma: parsed.gamma,
        rng_seed: parsed.rng_seed,
        trained: true,
        epochs: 0,
        loss_history: Vec::new(),
        embeddings: std::sync::OnceLock::new(),
    })
}
