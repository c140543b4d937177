//! Command implementations. Shared layout: stdout gets one JSON document
//! embedding the resolved run configuration plus input digests; stderr
//! gets the human-readable rendering.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path as FsPath;

use odin_core::beam::{discover, SearchConfig};
use odin_core::community::{compute_metadata, load_metadata, save_metadata, GreedyModularity};
use odin_core::compass::{CompassConfig, CompassScorer, SignalToggles, SIGNAL_NAMES};
use odin_core::eval::{
    default_ablation_variants, densest_entity, exhaustive_oracle, recall_curve, run_ablation,
    SyntheticSpec,
};
use odin_core::kg::GraphSnapshot;
use odin_core::npll::{ensure_model, load_weights, FileStore, ModelSource, NpllModel, TrainConfig};
use odin_core::ppr::{ppr_local_push, PprConfig};

use crate::config::{file_digest, ConfigFile};
use crate::{DiscoverArgs, EvalArgs};

fn load_snapshot(path: &str) -> Result<GraphSnapshot> {
    let file = File::open(path).with_context(|| format!("cannot open snapshot {path}"))?;
    GraphSnapshot::ingest(BufReader::new(file))
        .map_err(|e| anyhow!("snapshot {path}: {e}"))
}

fn emit(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn cmd_ingest(input: &str, output: &str) -> Result<()> {
    let g = load_snapshot(input)?;
    let mut out =
        File::create(output).with_context(|| format!("cannot create output {output}"))?;
    g.serialize(&mut out)?;
    drop(out);
    eprintln!(
        "ingested {}: {} entities, {} relations, {} triples -> {}",
        input,
        g.entity_count(),
        g.relation_count(),
        g.total_triples(),
        output
    );
    emit(&json!({
        "run_config": { "command": "ingest", "input": input, "output": output },
        "inputs": { "triples": { "path": input, "sha256": file_digest(input)? } },
        "counts": {
            "entities": g.entity_count(),
            "relations": g.relation_count(),
            "triples": g.total_triples(),
        },
    }))
}

pub fn cmd_communities(
    snapshot: &str,
    out_dir: &str,
    cfg_file: &ConfigFile,
    seed: Option<u64>,
) -> Result<()> {
    let g = load_snapshot(snapshot)?;
    let seed = cfg_file.resolve(seed, "seed", 0u64)?;
    let meta = compute_metadata(&g, &GreedyModularity, seed);
    save_metadata(&meta, &g, FsPath::new(out_dir))?;
    eprintln!(
        "{} communities, {} bridges, {} affinity pairs -> {}",
        meta.assignment.num_communities,
        meta.bridges.len(),
        meta.affinity.len(),
        out_dir
    );
    emit(&json!({
        "run_config": { "command": "communities", "snapshot": snapshot, "out_dir": out_dir, "seed": seed },
        "inputs": { "snapshot": { "path": snapshot, "sha256": file_digest(snapshot)? } },
        "summary": {
            "communities": meta.assignment.num_communities,
            "bridges": meta.bridges.len(),
            "affinity_pairs": meta.affinity.len(),
        },
    }))
}

pub fn cmd_train(
    snapshot: &str,
    model_path: &str,
    cfg_file: &ConfigFile,
    epochs: Option<u32>,
    min_support: Option<u64>,
    min_confidence: Option<f64>,
    seed: Option<u64>,
) -> Result<()> {
    let g = load_snapshot(snapshot)?;
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: cfg_file.resolve(epochs, "epochs", defaults.epochs)?,
        min_support: cfg_file.resolve(min_support, "min_support", defaults.min_support)?,
        min_confidence: cfg_file.resolve(
            min_confidence,
            "min_confidence",
            defaults.min_confidence,
        )?,
        rng_seed: cfg_file.resolve(seed, "seed", defaults.rng_seed)?,
        ..defaults
    };
    let path = FsPath::new(model_path);
    let (root, key) = match (path.parent(), path.file_name()) {
        (Some(root), Some(key)) => (root.to_path_buf(), key.to_string_lossy().to_string()),
        _ => bail!("model path {model_path} has no file name"),
    };
    let root = if root.as_os_str().is_empty() {
        std::path::PathBuf::from(".")
    } else {
        root
    };
    let mut store = FileStore::new(root);
    let outcome = ensure_model(&mut store, &key, &g, &train_cfg);
    let source = match outcome.source {
        ModelSource::Loaded => "loaded",
        ModelSource::Trained => "trained",
        ModelSource::Fallback => "fallback",
    };
    eprintln!(
        "model {source}: {} rules, blob {} bytes, persisted={}, training runs={}",
        outcome.model.rules.len(),
        outcome.blob_size.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
        outcome.persisted,
        outcome.train_invocations
    );
    emit(&json!({
        "run_config": {
            "command": "train", "snapshot": snapshot, "model": model_path,
            "epochs": train_cfg.epochs, "min_support": train_cfg.min_support,
            "min_confidence": train_cfg.min_confidence, "negative_ratio": train_cfg.negative_ratio,
            "learning_rate": train_cfg.learning_rate, "embedding_dim": train_cfg.embedding_dim,
            "gamma": train_cfg.gamma, "max_sample": train_cfg.max_sample, "seed": train_cfg.rng_seed,
        },
        "inputs": { "snapshot": { "path": snapshot, "sha256": file_digest(snapshot)? } },
        "model": {
            "source": source,
            "rules": outcome.model.rules.len(),
            "trained": outcome.model.trained,
            "blob_size": outcome.blob_size,
            "persisted": outcome.persisted,
            "train_invocations": outcome.train_invocations,
            "loss_history": outcome.model.loss_history,
        },
    }))
}

pub fn cmd_discover(args: &DiscoverArgs, cfg_file: &ConfigFile) -> Result<()> {
    let g = load_snapshot(&args.snapshot)?;

    let hops = cfg_file.resolve(args.hops, "hops", 3usize)?;
    let beam = cfg_file.resolve(args.beam, "beam", 64usize)?;
    let top = cfg_file.resolve(args.top, "top", 50usize)?;
    let lambda = cfg_file.resolve(args.lambda, "lambda", CompassConfig::default().lambda_decay)?;
    let seed = cfg_file.resolve(args.seed, "seed", 0u64)?;
    let alpha = cfg_file.resolve(None, "alpha", PprConfig::default().alpha)?;
    let epsilon = cfg_file.resolve(None, "epsilon", PprConfig::default().epsilon)?;
    let symmetrize = cfg_file.resolve(None, "symmetrize", false)?;
    let metadata_dir = match &args.metadata {
        Some(d) => Some(d.clone()),
        None => cfg_file.get::<String>("metadata")?,
    };
    let model_path = match &args.model {
        Some(m) => Some(m.clone()),
        None => cfg_file.get::<String>("model")?,
    };

    let mut seeds: BTreeSet<usize> = BTreeSet::new();
    for id in &args.seeds {
        seeds.insert(g.require_entity(id).map_err(|e| anyhow!("{e}"))?);
    }

    let toggles = SignalToggles {
        edge: !args.no_npll,
        bridge: !args.no_bridge,
        affinity: !args.no_bridge,
        temporal: !args.no_temporal,
        ..SignalToggles::default()
    };

    let model = match (&model_path, args.no_npll) {
        (Some(path), false) => {
            let blob =
                std::fs::read(path).with_context(|| format!("cannot read model {path}"))?;
            load_weights(&blob, &g).map_err(|e| anyhow!("model {path}: {e}"))?
        }
        _ => NpllModel::fallback(&g),
    };
    let metadata = match &metadata_dir {
        Some(dir) => load_metadata(&g, FsPath::new(dir)).map_err(|e| anyhow!("metadata {dir}: {e}"))?,
        None => None,
    };

    let ppr_cfg = PprConfig {
        alpha,
        epsilon,
        symmetrize,
    };
    let ppr = ppr_local_push(&g, &seeds, &ppr_cfg).map_err(|e| anyhow!("{e}"))?;
    let compass_cfg = CompassConfig {
        lambda_decay: lambda,
        ..CompassConfig::default()
    };
    let scorer = CompassScorer {
        graph: &g,
        model: &model,
        ppr: &ppr,
        metadata: metadata.as_ref(),
        cfg: compass_cfg,
        toggles,
    };
    let mut search_cfg = SearchConfig::new(seeds);
    search_cfg.hops = hops;
    search_cfg.beam_width = beam;
    search_cfg.top_k = top;
    search_cfg.allow_revisit = args.allow_revisit;

    let report = discover(&g, &search_cfg, &scorer).map_err(|e| anyhow!("{e}"))?;

    // human-readable listing
    for (i, sp) in report.results.iter().enumerate() {
        let hops_text: Vec<String> = sp
            .path
            .triples
            .iter()
            .map(|&idx| {
                let t = g.triple(idx);
                format!(
                    "-[{}]-> {}",
                    g.relation_id(t.relation),
                    g.entity_id(t.object)
                )
            })
            .collect();
        eprintln!(
            "#{:<3} {} {}  compass={:.6}",
            i + 1,
            g.entity_id(sp.path.entities[0]),
            hops_text.join(" "),
            sp.breakdown.compass
        );
        if let Some(phi) = sp.breakdown.shapley {
            let parts: Vec<String> = SIGNAL_NAMES
                .iter()
                .zip(phi.iter())
                .map(|(n, v)| format!("{n}={v:+.4}"))
                .collect();
            eprintln!("     phi: {}", parts.join(" "));
        }
        for &idx in &sp.path.triples {
            let prov = &g.triple(idx).provenance;
            if !prov.is_empty() {
                eprintln!("     prov: {}", prov.join(", "));
            }
        }
    }

    let mut inputs = serde_json::Map::new();
    inputs.insert(
        "snapshot".into(),
        json!({ "path": args.snapshot, "sha256": file_digest(&args.snapshot)? }),
    );
    if let Some(dir) = &metadata_dir {
        let path = FsPath::new(dir).join(odin_core::community::COMMUNITIES_FILE);
        if path.exists() {
            inputs.insert(
                "metadata".into(),
                json!({
                    "path": dir,
                    "sha256": file_digest(path.to_str().unwrap())?,
                }),
            );
        }
    }
    if let Some(path) = &model_path {
        if !args.no_npll {
            inputs.insert(
                "model".into(),
                json!({ "path": path, "sha256": file_digest(path)? }),
            );
        }
    }

    emit(&json!({
        "run_config": {
            "command": "discover",
            "snapshot": args.snapshot,
            "seeds": args.seeds,
            "hops": hops, "beam": beam, "top": top,
            "lambda": lambda, "seed": seed,
            "alpha": alpha, "epsilon": epsilon, "symmetrize": symmetrize,
            "allow_revisit": args.allow_revisit,
            "no_bridge": args.no_bridge, "no_npll": args.no_npll, "no_temporal": args.no_temporal,
            "metadata": metadata_dir, "model": model_path,
        },
        "inputs": serde_json::Value::Object(inputs),
        "report": report.results_json(&g),
    }))
}

pub fn cmd_explain(report_path: &str, rank: usize) -> Result<()> {
    let text = std::fs::read_to_string(report_path)
        .with_context(|| format!("cannot read report {report_path}"))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("report {report_path}: bad JSON"))?;
    let results = doc["report"]["results"]
        .as_array()
        .ok_or_else(|| anyhow!("report {report_path}: missing report.results"))?;
    if rank == 0 || rank > results.len() {
        bail!(
            "rank {rank} out of range: report {report_path} holds {} paths",
            results.len()
        );
    }
    let entry = &results[rank - 1];
    let entities: Vec<&str> = entry["entities"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str()).collect())
        .unwrap_or_default();
    let compass = entry["score"]["compass"].as_f64().unwrap_or(0.0);
    let shapley = entry["score"]["shapley"].as_object();

    println!("path #{rank}: {}", entities.join(" -> "));
    println!("compass score: {compass:.6}");
    match shapley {
        Some(phi) => {
            let mut named: Vec<(&str, f64)> = SIGNAL_NAMES
                .iter()
                .map(|&n| (n, phi.get(n).and_then(|v| v.as_f64()).unwrap_or(0.0)))
                .collect();
            let sum: f64 = named.iter().map(|&(_, v)| v).sum();
            named.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            let (lead_name, lead_phi) = named[0];
            if lead_phi == 0.0 {
                println!("every signal is neutral: all attributions are 0");
            } else {
                let direction = if lead_phi > 0.0 { "boosts" } else { "penalizes" };
                println!(
                    "ranks #{rank} primarily due to the {lead_name} signal \
                     (phi={lead_phi:+.4}, {direction} the score most)"
                );
            }
            println!("log-space attributions (sum {:.6} = ln score):", sum);
            for &(n, v) in &named {
                println!("  {n:<9} phi={v:+.6} (factor {:.6})", v.exp());
            }
        }
        None => {
            let factors = entry["score"]["factors"].as_object();
            let vetoed: Vec<&str> = factors
                .map(|f| {
                    SIGNAL_NAMES
                        .iter()
                        .filter(|&&n| f.get(n).and_then(|v| v.as_f64()) == Some(0.0))
                        .copied()
                        .collect()
                })
                .unwrap_or_default();
            println!("path is vetoed: zero-valued signals: {}", vetoed.join(", "));
        }
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, cfg_file: &ConfigFile) -> Result<()> {
    let seed = cfg_file.resolve(args.seed, "seed", 0u64)?;
    let hops = cfg_file.resolve(args.hops, "hops", 3usize)?;
    match args.mode.as_str() {
        "ablation" | "oracle" => {
            let entities = cfg_file.resolve(args.entities, "entities", 120usize)?;
            let communities = cfg_file.resolve(args.communities, "communities", 3usize)?;
            let bridges = cfg_file.resolve(args.bridges, "bridges", 3usize)?;
            let top = cfg_file.resolve(args.top, "top", 50usize)?;
            let spec = SyntheticSpec {
                num_entities: entities,
                num_communities: communities,
                p_in: 0.2,
                p_out: 0.005,
                planted_bridges: bridges,
                timestamp_range: Some((0, 90 * 86_400)),
                rng_seed: seed,
                ..SyntheticSpec::default()
            };
            let (g, _truth) = odin_core::eval::generate(&spec).map_err(|e| anyhow!("{e}"))?;
            let meta = compute_metadata(&g, &GreedyModularity, seed);
            let seeds: BTreeSet<usize> = [densest_entity(&g)].into();
            let model = NpllModel::fallback(&g);
            let ppr =
                ppr_local_push(&g, &seeds, &PprConfig::default()).map_err(|e| anyhow!("{e}"))?;
            let scorer = CompassScorer {
                graph: &g,
                model: &model,
                ppr: &ppr,
                metadata: Some(&meta),
                cfg: CompassConfig::default(),
                toggles: SignalToggles::default(),
            };
            let mut search_cfg = SearchConfig::new(seeds);
            search_cfg.hops = hops;
            search_cfg.top_k = top;

            let run_config = json!({
                "command": "eval", "mode": args.mode, "entities": entities,
                "communities": communities, "bridges": bridges,
                "hops": hops, "top": top, "seed": seed,
            });
            if args.mode == "oracle" {
                let report =
                    exhaustive_oracle(&g, &search_cfg, &scorer).map_err(|e| anyhow!("{e}"))?;
                eprintln!(
                    "oracle: {} paths enumerated, {} returned",
                    report.paths_explored,
                    report.results.len()
                );
                return emit(&json!({
                    "run_config": run_config,
                    "inputs": {},
                    "report": report.results_json(&g),
                }));
            }
            let report = run_ablation(
                &g,
                &search_cfg,
                &scorer,
                &meta.assignment.communities,
                &default_ablation_variants(),
            )
            .map_err(|e| anyhow!("{e}"))?;
            eprint!("{}", report.render_table());
            emit(&json!({
                "run_config": run_config,
                "inputs": {},
                "eval": report.to_json(),
            }))
        }
        "recall" => {
            let graphs = cfg_file.resolve(args.graphs, "graphs", 20usize)?;
            let entities = cfg_file.resolve(args.entities, "entities", 200usize)?;
            let top = cfg_file.resolve(args.top, "top", 10usize)?;
            let widths = args
                .beam_widths
                .clone()
                .unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32]);
            let specs: Vec<SyntheticSpec> = (0..graphs)
                .map(|i| SyntheticSpec {
                    num_entities: entities,
                    num_communities: 1,
                    p_in: 8.0 / (entities.max(2) - 1) as f64,
                    p_out: 0.0,
                    rng_seed: seed.wrapping_add(i as u64),
                    ..SyntheticSpec::default()
                })
                .collect();
            let points = recall_curve(&specs, &widths, hops, top).map_err(|e| anyhow!("{e}"))?;
            eprintln!("{:>6} {:>12} {:>12}", "b", "mean_recall", "bound");
            for p in &points {
                eprintln!(
                    "{:>6} {:>12.4} {:>12.4}",
                    p.beam_width, p.mean_recall, p.bound
                );
            }
            emit(&json!({
                "run_config": {
                    "command": "eval", "mode": "recall", "graphs": graphs,
                    "entities": entities, "hops": hops, "top": top,
                    "beam_widths": widths, "seed": seed,
                },
                "inputs": {},
                "recall_curve": points.iter().map(|p| json!({
                    "beam_width": p.beam_width,
                    "mean_recall": p.mean_recall,
                    "bound": p.bound,
                })).collect::<Vec<_>>(),
            }))
        }
        other => bail!("unknown eval mode {other:?}: expected ablation, oracle, or recall"),
    }
}
