//! Scenario configuration and validation.

use std::fmt;

use avgnet::graph::GraphSnapshot;
use avgnet::rng::RNG_ALGORITHM;
use avgnet::weights::WeightMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Explicit periodic matrices, or seeded random Birkhoff matrices.
    MatrixSequence,
    EqualNeighbor,
    Balancing,
    Circulant,
    Converse,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::MatrixSequence => "matrix-sequence",
            Protocol::EqualNeighbor => "equal-neighbor",
            Protocol::Balancing => "balancing",
            Protocol::Circulant => "circulant",
            Protocol::Converse => "converse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Explicit {
        values: Vec<f64>,
    },
    /// Uniform on `[0, 1)`, or uniform multiples of `1/Q` in `[0, 1]` for
    /// quantized runs.
    Uniform,
    /// `cos(2πi/n)`.
    Eigenvector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologySpec {
    RandomUndirected {
        edge_probability: f64,
    },
    RandomDirected {
        edge_probability: f64,
    },
    /// Snapshots repeated cyclically.
    Periodic {
        snapshots: Vec<GraphSnapshot>,
    },
}

impl TopologySpec {
    fn is_random(&self) -> bool {
        !matches!(self, TopologySpec::Periodic { .. })
    }
}

fn default_window() -> usize {
    1
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_max_rounds() -> usize {
    100_000
}

fn default_stride() -> usize {
    1
}

fn default_rng() -> String {
    RNG_ALGORITHM.to_string()
}

fn default_num_permutations() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub n: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Circulant weight, or the coefficient floor of random Birkhoff matrices.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub quantized: bool,
    #[serde(default)]
    pub q: Option<i64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_rng")]
    pub rng: String,
    #[serde(default)]
    pub initial: Option<InitialCondition>,
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    /// Equal-neighbour weight; defaults to `1/n`.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_num_permutations")]
    pub num_permutations: usize,
    /// Explicit matrices for `matrix-sequence`, repeated cyclically.
    #[serde(default)]
    pub matrices: Option<Vec<WeightMatrix>>,
}

impl ScenarioConfig {
    /// A config with every optional field at its default.
    pub fn new(protocol: Protocol, n: usize) -> Self {
        ScenarioConfig {
            protocol,
            n,
            window: default_window(),
            eta: None,
            epsilon: default_epsilon(),
            quantized: false,
            q: None,
            seed: None,
            max_rounds: default_max_rounds(),
            stride: default_stride(),
            rng: default_rng(),
            initial: None,
            topology: None,
            eps: None,
            num_permutations: default_num_permutations(),
            matrices: None,
        }
    }

    pub fn is_quantized(&self) -> bool {
        self.quantized || self.protocol == Protocol::Converse
    }

    pub fn initial_condition(&self) -> InitialCondition {
        self.initial.clone().unwrap_or(InitialCondition::Uniform)
    }

    pub fn equal_neighbor_eps(&self) -> f64 {
        self.eps.unwrap_or(1.0 / self.n as f64)
    }

    /// Collects every problem with the config.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Issues::default();
        let n = self.n;
        issues.check(n >= 2, "n", "must be at least 2");
        issues.check(self.window >= 1, "window", "must be at least 1");
        issues.check(self.stride >= 1, "stride", "must be at least 1");
        issues.check(self.max_rounds >= 1, "max_rounds", "must be at least 1");
        issues.check(
            self.rng == RNG_ALGORITHM,
            "rng",
            format!(
                "unsupported generator {:?}; only {RNG_ALGORITHM:?} is available",
                self.rng
            ),
        );
        if !self.is_quantized() {
            issues.check(
                self.epsilon > 0.0 && self.epsilon < 1.0,
                "epsilon",
                "must lie in (0, 1)",
            );
        }
        if self.is_quantized() {
            issues.check(
                self.q.is_some_and(|q| q >= 1),
                "q",
                "quantized runs need a resolution q >= 1",
            );
        } else if let Some(q) = self.q {
            issues.check(q >= 1, "q", "must be at least 1");
        }

        let initial = self.initial_condition();
        let mut needs_seed = matches!(initial, InitialCondition::Uniform) && self.protocol != Protocol::Converse;
        if let InitialCondition::Explicit { values } = &initial {
            issues.check(
                values.len() == n,
                "initial.values",
                format!("has {} entries, expected n = {n}", values.len()),
            );
            issues.check(
                values.iter().all(|v| v.is_finite()),
                "initial.values",
                "entries must be finite",
            );
        }

        match self.protocol {
            Protocol::Circulant => {
                issues.check(n >= 3, "n", "circulant needs n >= 3");
                issues.check(
                    self.eta.is_some_and(|e| e > 0.0 && e < 0.5),
                    "eta",
                    "circulant needs eta in (0, 1/2)",
                );
            }
            Protocol::MatrixSequence => match &self.matrices {
                Some(ms) => {
                    issues.check(!ms.is_empty(), "matrices", "must not be empty");
                    issues.check(
                        ms.iter().all(|m| m.n() == n),
                        "matrices",
                        format!("every matrix must be {n}x{n}"),
                    );
                }
                None => {
                    needs_seed = true;
                    issues.check(self.num_permutations >= 1, "num_permutations", "must be at least 1");
                    issues.check(
                        self.eta
                            .is_some_and(|e| e > 0.0 && e * self.num_permutations as f64 <= 1.0),
                        "eta",
                        "random matrices need 0 < eta <= 1/num_permutations",
                    );
                }
            },
            Protocol::EqualNeighbor | Protocol::Balancing => {
                match &self.topology {
                    None => issues.push("topology", "required for this protocol"),
                    Some(t) => {
                        needs_seed |= t.is_random();
                        self.check_topology(t, &mut issues);
                    }
                }
                if self.protocol == Protocol::EqualNeighbor {
                    let eps = self.equal_neighbor_eps();
                    issues.check(
                        eps > 0.0 && eps * (n as f64 - 1.0) < 1.0,
                        "eps",
                        "need 0 < eps and eps * (n - 1) < 1",
                    );
                }
            }
            Protocol::Converse => {
                issues.check(n.is_multiple_of(2), "n", "converse needs an even n");
                if let Some(q) = self.q {
                    issues.check((q as usize) < n / 2, "q", format!("converse needs q < n/2 = {}", n / 2));
                }
            }
        }
        issues.check(
            !needs_seed || self.seed.is_some(),
            "seed",
            "required for randomized pieces of this scenario",
        );

        if issues.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues: issues.0 })
        }
    }

    fn check_topology(&self, t: &TopologySpec, issues: &mut Issues) {
        match t {
            TopologySpec::RandomUndirected { edge_probability } | TopologySpec::RandomDirected { edge_probability } => {
                issues.check(
                    (0.0..=1.0).contains(edge_probability),
                    "topology.edge_probability",
                    "must lie in [0, 1]",
                );
                issues.check(
                    !(self.protocol == Protocol::Balancing && matches!(t, TopologySpec::RandomDirected { .. })),
                    "topology.kind",
                    "balancing needs an undirected topology",
                );
            }
            TopologySpec::Periodic { snapshots } => {
                issues.check(!snapshots.is_empty(), "topology.snapshots", "must not be empty");
                issues.check(
                    snapshots.iter().all(|g| g.n() == self.n),
                    "topology.snapshots",
                    format!("every snapshot must have n = {}", self.n),
                );
                issues.check(
                    snapshots.iter().all(GraphSnapshot::is_undirected),
                    "topology.snapshots",
                    "snapshots must be undirected for this protocol",
                );
            }
        }
    }
}

#[derive(Default)]
struct Issues(Vec<FieldIssue>);

impl Issues {
    fn push(&mut self, field: &str, reason: impl Into<String>) {
        self.0.push(FieldIssue {
            field: field.to_string(),
            reason: reason.into(),
        });
    }

    fn check(&mut self, ok: bool, field: &str, reason: impl Into<String>) {
        if !ok {
            self.push(field, reason);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldIssue {
    pub field: String,
    pub reason: String,
}

/// Every offending field of a rejected config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub issues: Vec<FieldIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario config:")?;
        for issue in &self.issues {
            write!(f, "\n  {}: {}", issue.field, issue.reason)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"protocol": "circulant", "n": 10, "eta": 0.25, "initial": {"kind": "eigenvector"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.window, 1);
        assert_eq!(cfg.epsilon, 0.01);
        assert_eq!(cfg.rng, "chacha8");
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"protocol": "circulant", "n": 10, "bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn every_bad_field_reported() {
        let mut cfg = ScenarioConfig::new(Protocol::Circulant, 1);
        cfg.epsilon = 2.0;
        cfg.rng = "pcg32".into();
        let err = cfg.validate().unwrap_err();
        let fields: Vec<_> = err.issues.iter().map(|i| i.field.as_str()).collect();
        for f in ["n", "rng", "epsilon", "eta", "seed"] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
        assert!(err.to_string().starts_with("invalid scenario config:"));
    }

    #[test]
    fn quantized_needs_q() {
        let mut cfg = ScenarioConfig::new(Protocol::Circulant, 10);
        cfg.eta = Some(0.25);
        cfg.seed = Some(1);
        cfg.quantized = true;
        assert_eq!(cfg.validate().unwrap_err().issues[0].field, "q");
        cfg.q = Some(100);
        cfg.validate().unwrap();
    }

    #[test]
    fn converse_constraints() {
        let mut cfg = ScenarioConfig::new(Protocol::Converse, 6);
        cfg.q = Some(3);
        assert!(cfg.validate().is_err());
        cfg.q = Some(2);
        cfg.validate().unwrap();
    }

    #[test]
    fn balancing_rejects_directed_topology() {
        let mut cfg = ScenarioConfig::new(Protocol::Balancing, 5);
        cfg.seed = Some(3);
        cfg.topology = Some(TopologySpec::RandomDirected { edge_probability: 0.2 });
        assert_eq!(cfg.validate().unwrap_err().issues[0].field, "topology.kind");
    }
}
