//! Study configuration: process parameters, pair/radius tables, kernel
//! lists and RNG pinning. `config init` dumps the full defaults so every
//! free parameter is visible and versioned.

use serde::{Deserialize, Serialize};
use setdist::error::Result;
use setdist::kernels::KernelSpec;
use setdist::pipeline::OriginPolicy;
use setdist::pointproc::{
    sim_boolean, sim_cluster, sim_repulsive, DiscUnion, RadiusLaw, Window,
};
use setdist::rng::RNG_ALGORITHM;
use std::collections::BTreeMap;

/// One of the three disc processes of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "lowercase")]
pub enum ProcessSpec {
    Boolean {
        intensity: f64,
        radius_law: RadiusLaw,
    },
    Cluster {
        parent_intensity: f64,
        mean_children: f64,
        cluster_radius: f64,
        radius_law: RadiusLaw,
    },
    Repulsive {
        proposal_intensity: f64,
        hardcore_distance: f64,
        radius_law: RadiusLaw,
    },
}

/// Grain radii uniform in [8, 16] pixels for all default processes.
fn default_grain_law() -> RadiusLaw {
    RadiusLaw::Uniform { lo: 8.0, hi: 16.0 }
}

impl ProcessSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Boolean { .. } => "boolean",
            ProcessSpec::Cluster { .. } => "cluster",
            ProcessSpec::Repulsive { .. } => "repulsive",
        }
    }

    /// Boolean intensity tuned so the coverage fraction is about 0.3 on
    /// the default window.
    pub fn default_boolean() -> Self {
        ProcessSpec::Boolean {
            intensity: 7.6e-4,
            radius_law: default_grain_law(),
        }
    }

    /// Parent intensity chosen so the cluster tessellation at its
    /// covering radius (13 px) robustly yields at least 100
    /// non-neighbouring cells on the default window.
    pub fn default_cluster() -> Self {
        ProcessSpec::Cluster {
            parent_intensity: 5.0e-4,
            mean_children: 6.0,
            cluster_radius: 40.0,
            radius_law: default_grain_law(),
        }
    }

    pub fn default_repulsive() -> Self {
        ProcessSpec::Repulsive {
            proposal_intensity: 2.0e-3,
            hardcore_distance: 30.0,
            radius_law: default_grain_law(),
        }
    }

    pub fn simulate(&self, window: &Window, seed: u64) -> Result<DiscUnion> {
        match self {
            ProcessSpec::Boolean {
                intensity,
                radius_law,
            } => sim_boolean(window, *intensity, radius_law, seed),
            ProcessSpec::Cluster {
                parent_intensity,
                mean_children,
                cluster_radius,
                radius_law,
            } => sim_cluster(
                window,
                *parent_intensity,
                *mean_children,
                *cluster_radius,
                radius_law,
                seed,
            ),
            ProcessSpec::Repulsive {
                proposal_intensity,
                hardcore_distance,
                radius_law,
            } => sim_repulsive(
                window,
                *proposal_intensity,
                *hardcore_distance,
                radius_law,
                seed,
            ),
        }
    }
}

/// Per-process optimal covering radius in pixels (repulsive 5, Boolean 7,
/// cluster 13).
pub fn optimal_radius(process: &str) -> Option<f64> {
    match process {
        "repulsive" => Some(5.0),
        "boolean" => Some(7.0),
        "cluster" => Some(13.0),
        _ => None,
    }
}

/// Shared covering radius for a pair of processes: the smaller of the two
/// per-process optimal radii.
pub fn pair_radius(p1: &str, p2: &str) -> Option<f64> {
    Some(optimal_radius(p1)?.min(optimal_radius(p2)?))
}

/// The six process pairs of the study, same-process pairs last.
pub fn default_pairs() -> Vec<String> {
    [
        "boolean-cluster",
        "boolean-repulsive",
        "cluster-repulsive",
        "boolean-boolean",
        "cluster-cluster",
        "repulsive-repulsive",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngConfig {
    /// Pinned generator name; results are only comparable across runs
    /// using the same algorithm.
    pub algorithm: String,
    pub master_seed: u64,
}

/// Which test(s) the study runs per pair/kernel/replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMethod {
    Permutation,
    SplitKs,
    SplitAd,
}

impl StudyMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyMethod::Permutation => "permutation",
            StudyMethod::SplitKs => "split_ks",
            StudyMethod::SplitAd => "split_ad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub rng: RngConfig,
    pub window: Window,
    pub processes: Vec<ProcessSpec>,
    /// Pair names of the form `<process>-<process>`.
    pub pairs: Vec<String>,
    /// Covering radius per pair (pixels).
    pub radii: BTreeMap<String, f64>,
    /// Number of support directions.
    pub n: usize,
    /// Sampled cells per realisation for the permutation method.
    pub m: usize,
    /// Sampled cells per realisation for the split methods.
    pub m_split: usize,
    /// Permutation count.
    pub s: usize,
    pub kernels: Vec<KernelSpec>,
    pub methods: Vec<StudyMethod>,
    pub replications: usize,
    pub alpha: f64,
    pub disc_poly_k: usize,
    pub origin_policy: OriginPolicy,
}

impl StudyConfig {
    fn base(replications: usize, s: usize) -> Self {
        let pairs = default_pairs();
        let mut radii = BTreeMap::new();
        for pair in &pairs {
            let (p1, p2) = pair.split_once('-').unwrap();
            radii.insert(pair.clone(), pair_radius(p1, p2).unwrap());
        }
        StudyConfig {
            rng: RngConfig {
                algorithm: RNG_ALGORITHM.to_string(),
                master_seed: 20240001,
            },
            window: Window {
                width: 400.0,
                height: 400.0,
                nx: 400,
                ny: 400,
            },
            processes: vec![
                ProcessSpec::default_boolean(),
                ProcessSpec::default_cluster(),
                ProcessSpec::default_repulsive(),
            ],
            pairs,
            radii,
            n: 10,
            m: 100,
            m_split: 300,
            s,
            kernels: KernelSpec::study_defaults(10),
            methods: vec![StudyMethod::Permutation],
            replications,
            alpha: 0.05,
            disc_poly_k: 64,
            origin_policy: OriginPolicy::Generator,
        }
    }

    /// Desk-scale preset: 50 pairs per combination, s = 199.
    pub fn desk() -> Self {
        StudyConfig::base(50, 199)
    }

    /// Full study preset: 200 pairs per combination, s = 999.
    pub fn full() -> Self {
        StudyConfig::base(200, 999)
    }

    pub fn process(&self, name: &str) -> Option<&ProcessSpec> {
        self.processes.iter().find(|p| p.name() == name)
    }

    /// Validate everything, returning the complete list of problems.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.rng.algorithm != RNG_ALGORITHM {
            errors.push(format!(
                "rng.algorithm must be {RNG_ALGORITHM:?}, got {:?}",
                self.rng.algorithm
            ));
        }
        if self.replications < 1 {
            errors.push("replications must be >= 1".into());
        }
        if self.pairs.is_empty() {
            errors.push("pairs must not be empty".into());
        }
        if self.processes.is_empty() {
            errors.push("processes must not be empty".into());
        }
        {
            let mut seen = std::collections::HashSet::new();
            for p in &self.processes {
                if !seen.insert(p.name()) {
                    errors.push(format!("duplicate process {:?}", p.name()));
                }
            }
        }
        for pair in &self.pairs {
            match pair.split_once('-') {
                Some((p1, p2)) => {
                    for name in [p1, p2] {
                        if self.process(name).is_none() {
                            errors.push(format!(
                                "pair {pair:?} references unknown process {name:?}"
                            ));
                        }
                    }
                    match self.radii.get(pair) {
                        None => errors.push(format!("radii table misses pair {pair:?}")),
                        Some(&r) if !(r >= 1.0 && r.is_finite()) => {
                            errors.push(format!("radius for {pair:?} must be >= 1, got {r}"));
                        }
                        _ => {}
                    }
                }
                None => errors.push(format!(
                    "pair {pair:?} is not of the form <process>-<process>"
                )),
            }
        }
        if self.n < 1 {
            errors.push("n must be >= 1".into());
        }
        if self.m < 2 {
            errors.push("m must be >= 2".into());
        }
        if self.methods.is_empty() {
            errors.push("methods must not be empty".into());
        }
        if self
            .methods
            .iter()
            .any(|m| matches!(m, StudyMethod::SplitKs | StudyMethod::SplitAd))
        {
            if self.m_split % 3 != 0 {
                errors.push(format!(
                    "m_split must be divisible by 3 for split methods, got {}",
                    self.m_split
                ));
            }
            if self.m_split / 3 < 8 {
                errors.push(format!("m_split/3 must be >= 8, got {}", self.m_split));
            }
        }
        if self.methods.contains(&StudyMethod::Permutation) && self.s < 1 {
            errors.push("s must be >= 1 for the permutation method".into());
        }
        if self.kernels.is_empty() {
            errors.push("kernels must not be empty".into());
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if let Err(e) = k.validate(self.n) {
                errors.push(format!("kernel #{i} ({}) invalid: {e}", k.kind_str()));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            errors.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.disc_poly_k < 16 {
            errors.push(format!(
                "disc_poly_k must be >= 16, got {}",
                self.disc_poly_k
            ));
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_table_mirrors_study_rules() {
        // cluster-cluster 13; anything-with-Boolean 7 except
        // Boolean-repulsive 5; anything-with-repulsive 5.
        let cases = [
            ("cluster", "cluster", 13.0),
            ("boolean", "cluster", 7.0),
            ("cluster", "boolean", 7.0),
            ("boolean", "boolean", 7.0),
            ("boolean", "repulsive", 5.0),
            ("repulsive", "boolean", 5.0),
            ("cluster", "repulsive", 5.0),
            ("repulsive", "repulsive", 5.0),
        ];
        for (p1, p2, want) in cases {
            assert_eq!(pair_radius(p1, p2), Some(want), "{p1}-{p2}");
        }
        assert_eq!(pair_radius("boolean", "mystery"), None);
    }

    #[test]
    fn default_config_is_valid_and_mirrors_study() {
        for cfg in [StudyConfig::desk(), StudyConfig::full()] {
            assert!(cfg.validation_errors().is_empty(), "{:?}", cfg.validation_errors());
            assert_eq!(cfg.n, 10);
            assert_eq!(cfg.m, 100);
            assert_eq!(cfg.m_split, 300);
            assert_eq!(cfg.kernels.len(), 5);
            // The five study kernels with their exact parameters.
            assert_eq!(cfg.kernels[0], KernelSpec::EuclideanPower { r: 1.0 });
            assert_eq!(
                cfg.kernels[1],
                KernelSpec::Gaussian {
                    v: setdist::kernels::CovSpec::ScaledIdentity(10.0)
                }
            );
            assert_eq!(
                cfg.kernels[2],
                KernelSpec::Cauchy {
                    v: setdist::kernels::CovSpec::ScaledIdentity(1.0)
                }
            );
            assert_eq!(
                cfg.kernels[3],
                KernelSpec::ExpWeighted {
                    w: vec![1.0; 10],
                    depth: 3
                }
            );
            assert_eq!(cfg.kernels[4], KernelSpec::RadialPower { r: 1.0, depth: 3 });
            assert_eq!(cfg.alpha, 0.05);
            assert_eq!(cfg.rng.algorithm, "chacha8");
            assert_eq!(cfg.pairs.len(), 6);
        }
        assert_eq!(StudyConfig::desk().replications, 50);
        assert_eq!(StudyConfig::desk().s, 199);
        assert_eq!(StudyConfig::full().replications, 200);
        assert_eq!(StudyConfig::full().s, 999);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = StudyConfig::desk();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: StudyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_lists_all_errors() {
        let mut cfg = StudyConfig::desk();
        cfg.rng.algorithm = "mt19937".into();
        cfg.pairs.push("boolean-unicorn".into());
        cfg.pairs.push("malformed".into());
        cfg.alpha = 1.5;
        cfg.replications = 0;
        let errors = cfg.validation_errors();
        assert!(errors.len() >= 5, "{errors:?}");
        assert!(errors.iter().any(|e| e.contains("mt19937")));
        assert!(errors.iter().any(|e| e.contains("unicorn")));
        assert!(errors.iter().any(|e| e.contains("malformed")));
        assert!(errors.iter().any(|e| e.contains("alpha")));
        assert!(errors.iter().any(|e| e.contains("replications")));
    }
}
