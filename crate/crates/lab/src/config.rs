//! Experiment configuration (JSON).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bdes_core::{Instance, NoiseModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algos::{Algo, AlgoSpec};
use crate::generators::{gen_proposition1_instance, random_instance};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Where the base instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    Inline(Instance),
    /// Instance JSON file, relative to the config file.
    File(PathBuf),
    /// Two-arm separation family at `lambda = 1`.
    Proposition1 {
        epsilon: f64,
        horizon: usize,
    },
    /// Arms drawn uniformly from `[0, 1]^2` with a fixed seed.
    Random {
        arms: usize,
        lambda: f64,
        horizon: usize,
        seed: u64,
    },
}

/// Replications: an explicit list of seed indices or `count` indices from 0
/// under a common `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl SeedSpec {
    /// `(base, index)` pairs.
    pub fn expand(&self) -> Vec<(u64, u64)> {
        match self {
            Self::List(list) => list.iter().map(|&s| (0, s)).collect(),
            Self::Range { base, count } => (0..*count).map(|i| (*base, i)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub instance: InstanceSource,
    pub algos: Vec<AlgoSpec>,
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Rounds reported in `regret.csv` and `summary.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    /// FPTAS precision of the benchmark; `1/T` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_cap: Option<u64>,
}

fn default_name() -> String {
    "experiment".into()
}

/// One concrete instance of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub id: String,
    pub instance: Instance,
}

impl ExperimentConfig {
    /// Parses a config, or the `config` field of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => map
                .remove("config")
                .ok_or_else(|| invalid("manifest has no config"))?,
            other => other,
        };
        Ok(serde_json::from_value(value)?)
    }

    /// Reads, resolves file references against the config's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        config.resolve(path.parent().unwrap_or(Path::new(".")))?;
        config.validate()?;
        Ok(config)
    }

    /// Replaces a file instance by its inline contents.
    pub fn resolve(&mut self, base_dir: &Path) -> Result<(), ConfigError> {
        if let InstanceSource::File(rel) = &self.instance {
            let path = base_dir.join(rel);
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let instance = Instance::from_json(&text).map_err(|e| invalid(e.to_string()))?;
            self.instance = InstanceSource::Inline(instance);
        }
        Ok(())
    }

    pub fn parsed_algos(&self) -> Result<Vec<Algo>, ConfigError> {
        self.algos
            .iter()
            .map(|spec| Algo::from_spec(spec).map_err(ConfigError::Invalid))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid(format!(
                "name {:?} must be nonempty and use only [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.algos.is_empty() {
            return Err(invalid("at least one algo is required"));
        }
        self.parsed_algos()?;
        let mut labels = BTreeSet::new();
        for spec in &self.algos {
            if !labels.insert(spec.label()) {
                return Err(invalid(format!("duplicate algo label {:?}", spec.label())));
            }
        }
        let seeds = self.seeds.expand();
        if seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(invalid("seed list has duplicates"));
        }
        for list in [&self.horizons, &self.checkpoints] {
            if list
                .as_ref()
                .is_some_and(|l| l.is_empty() || l.contains(&0))
            {
                return Err(invalid(
                    "horizons and checkpoints must be nonempty and positive",
                ));
            }
        }
        if let Some(lambdas) = &self.lambdas {
            if lambdas.is_empty() || lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return Err(invalid(format!(
                    "every lambda must lie in [0, 1], got {lambdas:?}"
                )));
            }
        }
        if let Some(sigmas) = &self.noise_sigmas {
            if sigmas.is_empty() || sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(invalid(format!(
                    "noise sigmas must be nonnegative, got {sigmas:?}"
                )));
            }
        }
        if let Some(e) = self.benchmark_epsilon {
            if !(e.is_finite() && e > 0.0) {
                return Err(invalid(format!(
                    "benchmark_epsilon must be positive, got {e}"
                )));
            }
        }
        let points = self.sweep()?;
        if let Some(cps) = &self.checkpoints {
            let min_t = points
                .iter()
                .map(|p| p.instance.horizon())
                .min()
                .unwrap_or(0);
            if let Some(&bad) = cps.iter().find(|&&c| c > min_t) {
                return Err(invalid(format!(
                    "checkpoint {bad} exceeds the shortest horizon {min_t}"
                )));
            }
        }
        Ok(())
    }

    pub fn base_instance(&self) -> Result<Instance, ConfigError> {
        match &self.instance {
            InstanceSource::Inline(instance) => Ok(instance.clone()),
            InstanceSource::File(path) => Err(invalid(format!(
                "instance file {} was not resolved",
                path.display()
            ))),
            InstanceSource::Proposition1 { epsilon, horizon } => {
                gen_proposition1_instance(*epsilon, *horizon).map_err(|e| invalid(e.to_string()))
            }
            InstanceSource::Random {
                arms,
                lambda,
                horizon,
                seed,
            } => {
                if *arms == 0 {
                    return Err(invalid("a random instance needs at least one arm"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                random_instance(&mut rng, *arms, *lambda, *horizon)
                    .map_err(|e| invalid(e.to_string()))
            }
        }
    }

    /// Every `(horizon, lambda, sigma)` combination, in config order.
    pub fn sweep(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        let base = self.base_instance()?;
        let horizons = self
            .horizons
            .clone()
            .unwrap_or_else(|| vec![base.horizon()]);
        let lambdas = self.lambdas.clone().unwrap_or_else(|| vec![base.lambda()]);
        let sigmas: Vec<Option<f64>> = match &self.noise_sigmas {
            Some(s) => s.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut points = Vec::new();
        for &t in &horizons {
            for &lambda in &lambdas {
                for &sigma in &sigmas {
                    let mut instance = base
                        .clone()
                        .with_horizon(t)
                        .and_then(|i| i.with_lambda(lambda))
                        .map_err(|e| invalid(e.to_string()))?;
                    if let Some(sigma) = sigma {
                        let noise =
                            NoiseModel::gaussian(sigma).map_err(|e| invalid(e.to_string()))?;
                        instance = instance
                            .with_noise(noise)
                            .map_err(|e| invalid(e.to_string()))?;
                    }
                    let sigma_tag = instance.noise().map_or(0.0, |n| n.sigma);
                    let id = format!("{}_T{t}_l{lambda}_s{sigma_tag}", self.name);
                    if points.iter().any(|p: &SweepPoint| p.id == id) {
                        return Err(invalid(format!("sweep produces instance {id} twice")));
                    }
                    points.push(SweepPoint { id, instance });
                }
            }
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> serde_json::Value {
        json!({
            "name": "t",
            "instance": {"proposition1": {"epsilon": 0.1, "horizon": 100}},
            "algos": ["ucb1", {"name": "exp3", "overrides": {"gamma": 0.1}}],
            "seeds": {"base": 3, "count": 2}
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig, ConfigError> {
        let c = ExperimentConfig::from_json(&v.to_string())?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn minimal_config() {
        let c = parse(base()).unwrap();
        assert_eq!(c.seeds.expand(), vec![(3, 0), (3, 1)]);
        let points = c.sweep().unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].id, "t_T100_l1_s0");
    }

    #[test]
    fn sweep_is_cartesian() {
        let mut v = base();
        v["horizons"] = json!([50, 100]);
        v["lambdas"] = json!([0.25, 0.5, 1.0]);
        v["noise_sigmas"] = json!([0.0, 0.1]);
        let points = parse(v).unwrap().sweep().unwrap();
        assert_eq!(points.len(), 12);
        assert_eq!(points[1].id, "t_T50_l0.25_s0.1");
        assert_eq!(points[1].instance.noise().unwrap().sigma, 0.1);
    }

    #[test]
    fn validation_errors() {
        let cases = [
            ("seeds", json!([])),
            ("seeds", json!({"base": 1, "count": 0})),
            ("algos", json!([])),
            ("algos", json!(["nope"])),
            ("algos", json!(["ucb1", "ucb1"])),
            ("lambdas", json!([1.5])),
            ("noise_sigmas", json!([-0.1])),
            ("horizons", json!([0])),
            ("checkpoints", json!([101])),
            ("benchmark_epsilon", json!(0.0)),
            ("name", json!("a/b")),
        ];
        for (key, value) in cases {
            let mut v = base();
            v[key] = value.clone();
            assert!(parse(v).is_err(), "{key} = {value}");
        }
        let mut v = base();
        v["unexpected"] = json!(1);
        assert!(parse(v).is_err());
        let mut v = base();
        v["instance"] = json!({"proposition1": {"epsilon": 0.3, "horizon": 10}});
        assert!(parse(v).is_err());
    }

    #[test]
    fn manifest_wrapper_is_accepted() {
        let wrapped = json!({"manifest_version": 1, "config": base()});
        let c = ExperimentConfig::from_json(&wrapped.to_string()).unwrap();
        assert_eq!(c, parse(base()).unwrap());
    }

    #[test]
    fn file_instance_resolves_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let inst = Instance::from_pairs(&[(0.5, 0.5), (0.6, 0.2)], 0.3, 40).unwrap();
        std::fs::write(dir.path().join("inst.json"), inst.to_json()).unwrap();
        let mut v = base();
        v["instance"] = json!({"file": "inst.json"});
        std::fs::write(dir.path().join("cfg.json"), v.to_string()).unwrap();
        let c = ExperimentConfig::load(&dir.path().join("cfg.json")).unwrap();
        assert_eq!(c.instance, InstanceSource::Inline(inst));
    }

    #[test]
    fn random_instance_is_seeded() {
        let mut v = base();
        v["instance"] = json!({"random": {"arms": 3, "lambda": 0.5, "horizon": 20, "seed": 9}});
        let a = parse(v.clone()).unwrap().base_instance().unwrap();
        let b = parse(v).unwrap().base_instance().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_arms(), 3);
    }
}
