//! EM training of rule weights and relation biases.
//!
//! E-step: responsibilities over rules sharing a head relation, softmax
//! of weight plus log grounding count. M-step: one full-batch descent
//! step on the negative log-likelihood of observed triples against
//! corrupted negatives, with responsibilities preconditioning the rule
//! gradient and backtracking keeping the loss non-increasing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::npll::model::{sigmoid, NpllModel};
use crate::npll::{Rule, TrainConfig};

struct Example {
    relation: usize,
    fired: Vec<u32>,
    feature: f64,
    label: bool,
}

pub fn train_em(g: &GraphSnapshot, rules: Vec<Rule>, cfg: &TrainConfig) -> Result<NpllModel> {
    let mut model = NpllModel {
        rules,
        relation_bias: vec![0.0; g.relation_count()],
        embedding_dim: cfg.embedding_dim,
        gamma: cfg.gamma,
        rng_seed: cfg.rng_seed,
        trained: true,
        epochs: cfg.epochs,
        loss_history: Vec::new(),
        embeddings: std::sync::OnceLock::new(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..g.total_triples()).collect();
    order.shuffle(&mut rng);
    order.truncate(cfg.max_sample);
    order.sort_unstable();
    if order.is_empty() {
        return Err(OdinError::Training("no training examples".to_string()));
    }

    let fired_rules = |s: usize, r: usize, o: usize| -> Vec<u32> {
        model
            .rules
            .iter()
            .enumerate()
            .filter(|(_, rule)| rule.head == r && NpllModel::body_grounds(g, rule.body, s, o))
            .map(|(i, _)| i as u32)
            .collect()
    };

    let n_entities = g.entity_count();
    let mut examples = Vec::with_capacity(order.len() * (1 + cfg.negative_ratio as usize));
    for &idx in &order {
        let t = g.triple(idx);
        examples.push(Example {
            relation: t.relation,
            fired: fired_rules(t.subject, t.relation, t.object),
            feature: cfg.gamma * model.embeddings(g).compatibility(t.subject, t.relation, t.object),
            label: true,
        });
        for _ in 0..cfg.negative_ratio {
            // corrupt the object; skip accidental positives when possible
            let mut o = rng.gen_range(0..n_entities);
            for _ in 0..10 {
                if o != t.object && g.find_edge(t.subject, t.relation, o).is_none() {
                    break;
                }
                o = rng.gen_range(0..n_entities);
            }
            examples.push(Example {
                relation: t.relation,
                fired: fired_rules(t.subject, t.relation, o),
                feature: cfg.gamma
                    * model.embeddings(g).compatibility(t.subject, t.relation, o),
                label: false,
            });
        }
    }

    let n_rules = model.rules.len();
    let mut weights = vec![0.0f64; n_rules];
    let mut bias = vec![0.0f64; g.relation_count()];

    let loss_of = |weights: &[f64], bias: &[f64]| -> f64 {
        let mut total = 0.0;
        for ex in &examples {
            let z = bias[ex.relation]
                + ex.fired.iter().map(|&i| weights[i as usize]).sum::<f64>()
                + ex.feature;
            // stable -log sigmoid(±z)
            let zz = if ex.label { z } else { -z };
            total += if zz >= 0.0 {
                (-zz).exp().ln_1p()
            } else {
                -zz + zz.exp().ln_1p()
            };
        }
        total / examples.len() as f64
    };

    let mut loss = loss_of(&weights, &bias);
    if !loss.is_finite() {
        return Err(OdinError::Training("non-finite initial loss".to_string()));
    }

    for _epoch in 0..cfg.epochs {
        // E-step: responsibilities among rules sharing a head
        let mut responsibility = vec![1.0f64; n_rules];
        let mut heads: Vec<usize> = model.rules.iter().map(|r| r.head).collect();
        heads.sort_unstable();
        heads.dedup();
        for &head in &heads {
            let members: Vec<usize> = model
                .rules
                .iter()
                .enumerate()
                .filter(|(_, r)| r.head == head)
                .map(|(i, _)| i)
                .collect();
            let logits: Vec<f64> = members
                .iter()
                .map(|&i| weights[i] + (1.0 + model.rules[i].support as f64).ln())
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            for (&i, &l) in members.iter().zip(logits.iter()) {
                // scaled so a single-rule head keeps responsibility 1
                responsibility[i] = (l - max).exp() / sum * members.len() as f64;
            }
        }

        // M-step gradient
        let mut grad_w = vec![0.0f64; n_rules];
        let mut grad_b = vec![0.0f64; bias.len()];
        let inv_n = 1.0 / examples.len() as f64;
        for ex in &examples {
            let z = bias[ex.relation]
                + ex.fired.iter().map(|&i| weights[i as usize]).sum::<f64>()
                + ex.feature;
            let err = (sigmoid(z) - if ex.label { 1.0 } else { 0.0 }) * inv_n;
            grad_b[ex.relation] += err;
            for &i in &ex.fired {
                grad_w[i as usize] += err;
            }
        }
        for i in 0..n_rules {
            grad_w[i] *= responsibility[i];
        }

        // backtracking keeps per-epoch loss non-increasing
        let mut step = cfg.learning_rate;
        let mut accepted = false;
        for _ in 0..40 {
            let cand_w: Vec<f64> = weights
                .iter()
                .zip(grad_w.iter())
                .map(|(w, gradient)| w - step * gradient)
                .collect();
            let cand_b: Vec<f64> = bias
                .iter()
                .zip(grad_b.iter())
                .map(|(b, gradient)| b - step * gradient)
                .collect();
            let cand_loss = loss_of(&cand_w, &cand_b);
            if !cand_loss.is_finite() {
                return Err(OdinError::Training("non-finite loss".to_string()));
            }
            if cand_loss <= loss + 1e-12 {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // stationary within line-search resolution; keep parameters
        }
        model.loss_history.push(loss);
    }

    // quantize for compact weights-only persistence
    for (rule, w) in model.rules.iter_mut().zip(weights.iter()) {
        rule.weight = quantize(*w);
    }
    model.relation_bias = bias.into_iter().map(quantize).collect();
    Ok(model)
}

fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
