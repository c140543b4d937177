//! The six-signal multiplicative path score and its log-space Shapley
//! explanation. All scoring here is pure over immutable inputs.

use serde::{Deserialize, Serialize};

use crate::community::CommunityMetadata;
use crate::error::{OdinError, Result};
use crate::kg::GraphSnapshot;
use crate::npll::NpllModel;
use crate::path::Path;
use crate::ppr::{self, PprVector};

pub const SECONDS_PER_90_DAYS: f64 = 90.0 * 86_400.0;

/// Relation prior direction. The frequency form rewards common relations;
/// the inverse form downweights them. Both are exposed because the two
/// readings are observed in practice; frequency is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    Frequency,
    InverseFrequency,
}

/// How the structural signal is normalized before entering the product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructNormalizerMode {
    /// Max raw struct mean over the current candidate frontier.
    FrontierMax,
    /// A fixed value, for cross-run comparability.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompassConfig {
    /// Per-second temporal decay rate.
    pub lambda_decay: f64,
    /// Reference time; defaults to the snapshot max timestamp.
    pub t_now: Option<u64>,
    pub beta_bridge: f64,
    /// Power-mean exponent of the bridge signal.
    pub rho: f64,
    pub beta_affinity: f64,
    pub prior_mode: PriorMode,
    pub struct_normalizer: StructNormalizerMode,
}

impl Default for CompassConfig {
    fn default() -> Self {
        CompassConfig {
            lambda_decay: 1.0 / SECONDS_PER_90_DAYS,
            t_now: None,
            beta_bridge: 0.5,
            rho: 0.5,
            beta_affinity: 0.5,
            prior_mode: PriorMode::Frequency,
            struct_normalizer: StructNormalizerMode::FrontierMax,
        }
    }
}

impl CompassConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_decay", self.lambda_decay),
            ("beta_bridge", self.beta_bridge),
            ("beta_affinity", self.beta_affinity),
        ] {
            if !(v >= 0.0) {
                return Err(OdinError::InvalidParameter(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if let StructNormalizerMode::Fixed(v) = self.struct_normalizer {
            if !(v > 0.0) {
                return Err(OdinError::InvalidParameter(format!(
                    "fixed struct normalizer must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn reference_time(&self, g: &GraphSnapshot) -> Option<u64> {
        self.t_now.or_else(|| g.max_timestamp())
    }
}

/// Signals forced to 1, for ablations and baselines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SignalToggles {
    pub edge: bool,
    pub structural: bool,
    pub bridge: bool,
    pub affinity: bool,
    pub prior: bool,
    pub temporal: bool,
}

impl Default for SignalToggles {
    fn default() -> Self {
        SignalToggles {
            edge: true,
            structural: true,
            bridge: true,
            affinity: true,
            prior: true,
            temporal: true,
        }
    }
}

impl SignalToggles {
    /// Only the structural signal stays live.
    pub fn struct_only() -> Self {
        SignalToggles {
            edge: false,
            structural: true,
            bridge: false,
            affinity: false,
            prior: false,
            temporal: false,
        }
    }
}

pub const SIGNAL_NAMES: [&str; 6] = ["edge", "struct", "bridge", "affinity", "prior", "temp"];

/// The six factors, their product, and the log-space attributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalBreakdown {
    pub s_edge: f64,
    pub s_struct: f64,
    pub s_bridge: f64,
    pub s_affinity: f64,
    pub s_prior: f64,
    pub s_temp: f64,
    pub compass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shapley: Option<[f64; 6]>,
}

impl SignalBreakdown {
    pub fn from_factors(factors: [f64; 6]) -> SignalBreakdown {
        let compass = factors.iter().product();
        let shapley = if compass > 0.0 {
            Some([
                factors[0].ln(),
                factors[1].ln(),
                factors[2].ln(),
                factors[3].ln(),
                factors[4].ln(),
                factors[5].ln(),
            ])
        } else {
            None
        };
        SignalBreakdown {
            s_edge: factors[0],
            s_struct: factors[1],
            s_bridge: factors[2],
            s_affinity: factors[3],
            s_prior: factors[4],
            s_temp: factors[5],
            compass,
            shapley,
        }
    }

    pub fn factors(&self) -> [f64; 6] {
        [
            self.s_edge,
            self.s_struct,
            self.s_bridge,
            self.s_affinity,
            self.s_prior,
            self.s_temp,
        ]
    }

    /// Names of factors that are exactly zero.
    pub fn vetoing_signals(&self) -> Vec<&'static str> {
        self.factors()
            .iter()
            .zip(SIGNAL_NAMES.iter())
            .filter(|(&f, _)| f == 0.0)
            .map(|(_, &n)| n)
            .collect()
    }
}

/// Log-space Shapley attributions. Each signal's marginal contribution to
/// ln(compass) is constant across coalitions, so the Shapley value equals
/// the marginal: phi_i = ln(S_i), and the six sum to ln(compass).
pub fn explain(breakdown: &SignalBreakdown) -> Result<[(&'static str, f64); 6]> {
    match breakdown.shapley {
        Some(phi) => Ok([
            (SIGNAL_NAMES[0], phi[0]),
            (SIGNAL_NAMES[1], phi[1]),
            (SIGNAL_NAMES[2], phi[2]),
            (SIGNAL_NAMES[3], phi[3]),
            (SIGNAL_NAMES[4], phi[4]),
            (SIGNAL_NAMES[5], phi[5]),
        ]),
        None => Err(OdinError::VetoedPath(
            breakdown.vetoing_signals().join(", "),
        )),
    }
}

/// Mean exponential decay over the path's edges. Missing timestamps
/// contribute the neutral value 1; future timestamps clamp age to 0.
pub fn temporal_score(g: &GraphSnapshot, path: &Path, cfg: &CompassConfig) -> f64 {
    let t_now = match cfg.reference_time(g) {
        Some(t) => t,
        None => return 1.0, // no timestamps anywhere in the snapshot
    };
    let mut total = 0.0;
    for &idx in &path.triples {
        total += match g.triple(idx).timestamp {
            Some(t) => {
                let age = t_now.saturating_sub(t) as f64;
                (-cfg.lambda_decay * age).exp()
            }
            None => 1.0,
        };
    }
    total / path.triples.len() as f64
}

/// Mean relation prior over the path's edges.
pub fn prior_score(g: &GraphSnapshot, path: &Path, cfg: &CompassConfig) -> Result<f64> {
    let inv_r = 1.0 / g.relation_count() as f64;
    let mut total = 0.0;
    for &idx in &path.triples {
        let freq = g.relation_frequency(g.triple(idx).relation)?;
        total += match cfg.prior_mode {
            PriorMode::Frequency => freq,
            PriorMode::InverseFrequency => (1.0 - freq + inv_r).clamp(f64::MIN_POSITIVE, 1.0),
        };
    }
    Ok(total / path.triples.len() as f64)
}

/// Power mean of bridge boosts over every entity on the path, seed
/// included. Without metadata the signal is exactly 1.
pub fn bridge_score(path: &Path, meta: Option<&CommunityMetadata>, cfg: &CompassConfig) -> f64 {
    let meta = match meta {
        Some(m) => m,
        None => return 1.0,
    };
    let mut total = 0.0;
    for &e in &path.entities {
        let b = match meta.bridge_strength(e) {
            Some(strength) => 1.0 + cfg.beta_bridge * (1.0 + strength as f64).ln(),
            None => 1.0,
        };
        total += b;
    }
    (total / path.entities.len() as f64).powf(cfg.rho)
}

/// Product of affinity boosts over cross-community edges; within-community
/// edges contribute 1, as do pairs missing from the table. Without
/// metadata the signal is exactly 1.
pub fn affinity_score(
    g: &GraphSnapshot,
    path: &Path,
    meta: Option<&CommunityMetadata>,
    cfg: &CompassConfig,
) -> f64 {
    let meta = match meta {
        Some(m) => m,
        None => return 1.0,
    };
    let mut product = 1.0;
    for &idx in &path.triples {
        let t = g.triple(idx);
        let ci = meta.assignment.community_of(t.subject);
        let cj = meta.assignment.community_of(t.object);
        if ci != cj {
            let a = meta.affinity.get(ci, cj).unwrap_or(0.0);
            product *= 1.0 + cfg.beta_affinity * a;
        }
    }
    product
}

/// Everything a COMPASS evaluation needs, bound to one discovery run.
pub struct CompassScorer<'a> {
    pub graph: &'a GraphSnapshot,
    pub model: &'a NpllModel,
    pub ppr: &'a PprVector,
    pub metadata: Option<&'a CommunityMetadata>,
    pub cfg: CompassConfig,
    pub toggles: SignalToggles,
}

impl<'a> CompassScorer<'a> {
    /// Unnormalized struct mean, used by the search layer to compute the
    /// per-hop frontier normalizer. Returns 0 when the signal is toggled
    /// off so it never influences the normalizer.
    pub fn raw_struct_mean(&self, path: &Path) -> f64 {
        if self.toggles.structural {
            ppr::raw_struct_mean(self.ppr, path)
        } else {
            0.0
        }
    }

    /// Resolves the struct normalizer for a candidate frontier.
    pub fn frontier_normalizer(&self, raw_means: impl Iterator<Item = f64>) -> f64 {
        match self.cfg.struct_normalizer {
            StructNormalizerMode::Fixed(v) => v,
            StructNormalizerMode::FrontierMax => {
                let max = raw_means.fold(0.0f64, f64::max);
                if max > 0.0 {
                    max
                } else {
                    1.0
                }
            }
        }
    }

    /// Full six-signal breakdown of one path.
    pub fn score(&self, path: &Path, struct_normalizer: f64) -> Result<SignalBreakdown> {
        let s_edge = if self.toggles.edge {
            crate::npll::edge_confidence(self.model, self.graph, path)?
        } else {
            1.0
        };
        let s_struct = if self.toggles.structural {
            ppr::struct_score(self.ppr, path, struct_normalizer)
        } else {
            1.0
        };
        let s_bridge = if self.toggles.bridge {
            bridge_score(path, self.metadata, &self.cfg)
        } else {
            1.0
        };
        let s_affinity = if self.toggles.affinity {
            affinity_score(self.graph, path, self.metadata, &self.cfg)
        } else {
            1.0
        };
        let s_prior = if self.toggles.prior {
            prior_score(self.graph, path, &self.cfg)?
        } else {
            1.0
        };
        let s_temp = if self.toggles.temporal {
            temporal_score(self.graph, path, &self.cfg)
        } else {
            1.0
        };
        Ok(SignalBreakdown::from_factors([
            s_edge, s_struct, s_bridge, s_affinity, s_prior, s_temp,
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::{AffinityTable, BridgeEntry, CommunityAssignment};
    use std::collections::BTreeSet;
    use std::io::Cursor;

    fn snap(lines: &str) -> GraphSnapshot {
        GraphSnapshot::ingest(Cursor::new(lines)).unwrap()
    }

    fn path_of(g: &GraphSnapshot, hops: &[(&str, &str, &str)]) -> Path {
        let triples = hops
            .iter()
            .map(|&(s, r, o)| {
                g.find_edge(
                    g.entity_index(s).unwrap(),
                    g.relation_index(r).unwrap(),
                    g.entity_index(o).unwrap(),
                )
                .unwrap()
            })
            .collect();
        Path::from_triples(g, triples).unwrap()
    }

    #[test]
    fn temporal_zero_age_scores_one() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b","t":1000}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c","t":1000}"#,
        ));
        let cfg = CompassConfig::default();
        let p = path_of(&g, &[("a", "r", "b"), ("b", "r", "c")]);
        assert_eq!(temporal_score(&g, &p, &cfg), 1.0);
    }

    #[test]
    fn temporal_one_lambda_age_scores_e_inverse() {
        let lambda = 0.001;
        let age = (1.0 / lambda) as u64; // exactly 1/lambda seconds
        let g = snap(&format!(
            "{{\"s\":\"a\",\"r\":\"r\",\"o\":\"b\",\"t\":0}}\n{{\"s\":\"x\",\"r\":\"r\",\"o\":\"y\",\"t\":{age}}}"
        ));
        let cfg = CompassConfig {
            lambda_decay: lambda,
            ..CompassConfig::default()
        };
        let p = path_of(&g, &[("a", "r", "b")]);
        assert!((temporal_score(&g, &p, &cfg) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn temporal_mean_of_two_ages() {
        let lambda = 0.001;
        let age = (1.0 / lambda) as u64;
        let g = snap(&format!(
            "{{\"s\":\"a\",\"r\":\"r\",\"o\":\"b\",\"t\":0}}\n{{\"s\":\"b\",\"r\":\"r\",\"o\":\"c\",\"t\":{age}}}"
        ));
        let cfg = CompassConfig {
            lambda_decay: lambda,
            ..CompassConfig::default()
        };
        let p = path_of(&g, &[("a", "r", "b"), ("b", "r", "c")]);
        let expected = (1.0 + (-1.0f64).exp()) / 2.0;
        assert!((temporal_score(&g, &p, &cfg) - expected).abs() < 1e-12);
        assert!((expected - 0.683940).abs() < 1e-6);
    }

    #[test]
    fn future_timestamps_clamp_to_zero_age() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b","t":5000}"#,
            "\n",
            r#"{"s":"x","r":"r","o":"y","t":1000}"#,
        ));
        let cfg = CompassConfig {
            t_now: Some(1000),
            ..CompassConfig::default()
        };
        let p = path_of(&g, &[("a", "r", "b")]);
        assert_eq!(temporal_score(&g, &p, &cfg), 1.0);
    }

    #[test]
    fn prior_frequency_hand_cases() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r1","o":"b"}"#,
            "\n",
            r#"{"s":"a","r":"r1","o":"c"}"#,
            "\n",
            r#"{"s":"b","r":"r1","o":"c"}"#,
            "\n",
            r#"{"s":"a","r":"r2","o":"d"}"#,
        ));
        let cfg = CompassConfig::default();
        let one_hop = path_of(&g, &[("a", "r2", "d")]);
        assert_eq!(prior_score(&g, &one_hop, &cfg).unwrap(), 0.25);
        // mean of 0.75 (r1) and 0.25 (r2)
        let g2 = snap(concat!(
            r#"{"s":"a","r":"r1","o":"b"}"#,
            "\n",
            r#"{"s":"x","r":"r1","o":"y"}"#,
            "\n",
            r#"{"s":"w","r":"r1","o":"v"}"#,
            "\n",
            r#"{"s":"b","r":"r2","o":"c"}"#,
        ));
        let two_hop = path_of(&g2, &[("a", "r1", "b"), ("b", "r2", "c")]);
        assert_eq!(prior_score(&g2, &two_hop, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn prior_single_relation_is_one() {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c"}"#,
        ));
        let p = path_of(&g, &[("a", "r", "b"), ("b", "r", "c")]);
        assert_eq!(prior_score(&g, &p, &CompassConfig::default()).unwrap(), 1.0);
    }

    fn meta_with_bridge(g: &GraphSnapshot, bridge: &str, strength: u32) -> CommunityMetadata {
        let assignment = CommunityAssignment {
            communities: vec![0; g.entity_count()],
            num_communities: 1,
        };
        let e = g.entity_index(bridge).unwrap();
        let bridges = vec![BridgeEntry {
            entity: e,
            communities: (0..strength as usize).collect::<BTreeSet<_>>(),
            strength,
        }];
        CommunityMetadata::new(assignment, bridges, AffinityTable::default())
    }

    #[test]
    fn bridge_hand_evaluation() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        let p = path_of(&g, &[("a", "r", "b")]);
        let cfg = CompassConfig::default();
        // no metadata -> exactly 1
        assert_eq!(bridge_score(&p, None, &cfg), 1.0);
        // object is a bridge with strength 3: b = 1 + 0.5 ln 4
        let meta = meta_with_bridge(&g, "b", 3);
        let expected = ((1.0 + (1.0 + 0.5 * 4.0f64.ln())) / 2.0).powf(0.5);
        let got = bridge_score(&p, Some(&meta), &cfg);
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.160420).abs() < 1e-6);
        // no bridges on path -> 1
        let meta_none = CommunityMetadata::new(
            CommunityAssignment {
                communities: vec![0; g.entity_count()],
                num_communities: 1,
            },
            Vec::new(),
            AffinityTable::default(),
        );
        assert_eq!(bridge_score(&p, Some(&meta_none), &cfg), 1.0);
    }

    fn affinity_fixture() -> (GraphSnapshot, CommunityMetadata) {
        let g = snap(concat!(
            r#"{"s":"a","r":"r","o":"b"}"#,
            "\n",
            r#"{"s":"b","r":"r","o":"c"}"#,
        ));
        let mut communities = vec![0usize; g.entity_count()];
        communities[g.entity_index("b").unwrap()] = 1;
        communities[g.entity_index("c").unwrap()] = 2;
        let assignment = CommunityAssignment {
            communities,
            num_communities: 3,
        };
        // build a table with A(0,1)=1.0, A(1,2)=0.5 via direct records
        let dir = std::env::temp_dir().join(format!(
            "odin-compass-aff-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let mut communities_file = String::new();
        for e in 0..g.entity_count() {
            communities_file.push_str(&format!(
                "{{\"entity\":\"{}\",\"community\":{}}}\n",
                g.entity_id(e),
                assignment.community_of(e)
            ));
        }
        std::fs::write(dir.join(crate::community::COMMUNITIES_FILE), communities_file).unwrap();
        std::fs::write(
            dir.join(crate::community::AFFINITY_FILE),
            "{\"ci\":0,\"cj\":1,\"score\":1.0}\n{\"ci\":1,\"cj\":2,\"score\":0.5}\n",
        )
        .unwrap();
        let meta = crate::community::load_metadata(&g, &dir).unwrap().unwrap();
        std::fs::remove_dir_all(&dir).ok();
        (g, meta)
    }

    #[test]
    fn affinity_hand_evaluations() {
        let (g, meta) = affinity_fixture();
        let cfg = CompassConfig::default();
        let one_cross = path_of(&g, &[("a", "r", "b")]);
        assert!((affinity_score(&g, &one_cross, Some(&meta), &cfg) - 1.5).abs() < 1e-12);
        let two_cross = path_of(&g, &[("a", "r", "b"), ("b", "r", "c")]);
        assert!((affinity_score(&g, &two_cross, Some(&meta), &cfg) - 1.875).abs() < 1e-12);
        assert_eq!(affinity_score(&g, &one_cross, None, &cfg), 1.0);
    }

    #[test]
    fn affinity_within_community_is_one() {
        let g = snap(r#"{"s":"a","r":"r","o":"b"}"#);
        let assignment = CommunityAssignment {
            communities: vec![0; g.entity_count()],
            num_communities: 1,
        };
        let meta = CommunityMetadata::new(assignment, Vec::new(), AffinityTable::default());
        let p = path_of(&g, &[("a", "r", "b")]);
        assert_eq!(
            affinity_score(&g, &p, Some(&meta), &CompassConfig::default()),
            1.0
        );
    }

    #[test]
    fn breakdown_product_and_veto() {
        let b = SignalBreakdown::from_factors([1.0; 6]);
        assert_eq!(b.compass, 1.0);
        let b = SignalBreakdown::from_factors([0.5, 0.5, 1.0, 1.0, 1.0, 1.0]);
        assert!((b.compass - 0.25).abs() < 1e-15);
        let b = SignalBreakdown::from_factors([0.0, 0.9, 1.3, 1.1, 0.8, 0.7]);
        assert_eq!(b.compass, 0.0);
        assert_eq!(b.vetoing_signals(), vec!["edge"]);
        assert!(explain(&b).is_err());
    }

    #[test]
    fn shapley_hand_cases() {
        let b = SignalBreakdown::from_factors([1.0; 6]);
        let phi = explain(&b).unwrap();
        assert!(phi.iter().all(|&(_, v)| v == 0.0));

        let b = SignalBreakdown::from_factors([(-1.0f64).exp(), 1.0, 1.0, 1.0, 1.0, 1.0]);
        let phi = explain(&b).unwrap();
        assert!((phi[0].1 + 1.0).abs() < 1e-12);
        assert!(phi[1..].iter().all(|&(_, v)| v == 0.0));

        let b = SignalBreakdown::from_factors([0.5, 0.5, 1.5, 1.0, 1.0, 1.0]);
        let phi = explain(&b).unwrap();
        assert!((phi[0].1 + 2.0f64.ln()).abs() < 1e-12);
        assert!((phi[1].1 + 2.0f64.ln()).abs() < 1e-12);
        assert!((phi[2].1 - 1.5f64.ln()).abs() < 1e-12);
        let total: f64 = phi.iter().map(|&(_, v)| v).sum();
        assert!((total - 0.375f64.ln()).abs() < 1e-9);
    }
}
