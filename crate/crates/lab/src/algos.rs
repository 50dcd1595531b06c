//! Algorithm registry: maps config keys and overrides to learners.

use bdes_core::learners::{
    BatchedSticky, BatchedStickyOverrides, EtcKnown, EtcOverrides, EtcUnknown, Exp3p, Exp3pParams,
    FixedPlan, UnknownLambda, UnknownLambdaOverrides,
};
use bdes_core::{Learner, LearnerError, Plan};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::{Aae, AaeParams, Exp3, Exp3Params, Ucb1, Ucb1Params};

pub const ALGO_KEYS: &[&str] = &[
    "ucb1",
    "exp3",
    "aae",
    "exp3p",
    "etc_known",
    "etc_unknown",
    "batched_sticky",
    "unknown_lambda",
    "benchmark",
];

/// An algorithm entry of a config: either a bare key or a key with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgoSpec {
    Key(String),
    Detailed {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
        overrides: serde_json::Value,
    },
}

impl AlgoSpec {
    pub fn key(name: &str) -> Self {
        Self::Key(name.to_string())
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Key(name) | Self::Detailed { name, .. } => name,
        }
    }

    /// Name used in output files: the label if set, else the key.
    pub fn label(&self) -> &str {
        match self {
            Self::Detailed {
                label: Some(label), ..
            } => label,
            _ => self.name(),
        }
    }

    fn overrides(&self) -> serde_json::Value {
        match self {
            Self::Detailed { overrides, .. } if !overrides.is_null() => overrides.clone(),
            _ => serde_json::Value::Object(Default::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp3pOverrides {
    pub delta_conf: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
}

/// A parsed, validated algorithm.
#[derive(Debug, Clone, PartialEq)]
pub enum Algo {
    Ucb1(Ucb1Params),
    Exp3(Exp3Params),
    Aae(AaeParams),
    Exp3p(Exp3pOverrides),
    EtcKnown(EtcOverrides),
    EtcUnknown(EtcOverrides),
    BatchedSticky(BatchedStickyOverrides),
    UnknownLambda(UnknownLambdaOverrides),
    /// Replays the benchmark plan; its DES regret is zero.
    Benchmark,
}

fn parse<T: DeserializeOwned>(name: &str, value: serde_json::Value) -> Result<T, String> {
    serde_json::from_value(value).map_err(|e| format!("overrides for {name}: {e}"))
}

impl Algo {
    pub fn from_spec(spec: &AlgoSpec) -> Result<Self, String> {
        let name = spec.name();
        let o = spec.overrides();
        let algo = match name {
            "ucb1" => Self::Ucb1(parse(name, o)?),
            "exp3" => Self::Exp3(parse(name, o)?),
            "aae" => Self::Aae(parse(name, o)?),
            "exp3p" => Self::Exp3p(parse(name, o)?),
            "etc_known" => Self::EtcKnown(parse(name, o)?),
            "etc_unknown" => Self::EtcUnknown(parse(name, o)?),
            "batched_sticky" => Self::BatchedSticky(parse(name, o)?),
            "unknown_lambda" => {
                // Flattened fields bypass serde's unknown-field check.
                const KNOWN: [&str; 5] = ["epsilon", "M", "i_R", "dp_epsilon", "delta_conf"];
                if let Some(bad) = o
                    .as_object()
                    .and_then(|m| m.keys().find(|k| !KNOWN.contains(&k.as_str())))
                {
                    return Err(format!("overrides for {name}: unknown field {bad:?}"));
                }
                Self::UnknownLambda(parse(name, o)?)
            }
            "benchmark" => {
                if o.as_object().is_some_and(|m| !m.is_empty()) {
                    return Err("benchmark takes no overrides".into());
                }
                Self::Benchmark
            }
            other => {
                return Err(format!(
                    "unknown algo key {other:?}; expected one of {}",
                    ALGO_KEYS.join(", ")
                ))
            }
        };
        // Parameter checks that do not depend on the instance.
        algo.build(None).map_err(|e| format!("{name}: {e}"))?;
        Ok(algo)
    }

    /// Builds a fresh learner. `benchmark` is required for [`Algo::Benchmark`].
    pub fn build(&self, benchmark: Option<&Plan>) -> Result<Box<dyn Learner>, LearnerError> {
        Ok(match self {
            Self::Ucb1(p) => Box::new(Ucb1::new(*p)?),
            Self::Exp3(p) => Box::new(Exp3::new(*p)?),
            Self::Aae(p) => Box::new(Aae::new(*p)?),
            Self::Exp3p(o) => match (o.eta, o.gamma, o.beta) {
                (None, None, None) => {
                    if let Some(d) = o.delta_conf {
                        if !(d > 0.0 && d < 1.0) {
                            return Err(LearnerError::InvalidParameter(format!(
                                "delta_conf must be in (0, 1), got {d}"
                            )));
                        }
                    }
                    Box::new(Exp3p::new(o.delta_conf))
                }
                (Some(eta), Some(gamma), Some(beta)) if o.delta_conf.is_none() => {
                    if !(eta > 0.0 && (0.0..=1.0).contains(&gamma) && beta >= 0.0) {
                        return Err(LearnerError::InvalidParameter(format!(
                            "need eta > 0, gamma in [0, 1], beta >= 0; got {eta}, {gamma}, {beta}"
                        )));
                    }
                    Box::new(Exp3p::with_params(Exp3pParams { eta, gamma, beta }))
                }
                _ => {
                    return Err(LearnerError::InvalidParameter(
                        "exp3p takes either delta_conf or all of eta, gamma, beta".into(),
                    ))
                }
            },
            Self::EtcKnown(o) => {
                check_etc(o)?;
                Box::new(EtcKnown::new(*o))
            }
            Self::EtcUnknown(o) => {
                check_etc(o)?;
                Box::new(EtcUnknown::new(*o))
            }
            Self::BatchedSticky(o) => {
                if o.b == Some(0) {
                    return Err(LearnerError::InvalidParameter(
                        "B must be at least 1".into(),
                    ));
                }
                Box::new(BatchedSticky::new(*o))
            }
            Self::UnknownLambda(o) => {
                check_etc(&o.etc)?;
                Box::new(UnknownLambda::new(*o))
            }
            Self::Benchmark => match benchmark {
                Some(plan) => Box::new(FixedPlan::from_plan(plan)),
                None => Box::new(FixedPlan::new(Vec::new())),
            },
        })
    }
}

fn check_etc(o: &EtcOverrides) -> Result<(), LearnerError> {
    for (name, v) in [("epsilon", o.epsilon), ("dp_epsilon", o.dp_epsilon)] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(LearnerError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
    }
    if o.m == Some(0) {
        return Err(LearnerError::InvalidParameter(
            "M must be at least 1".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec(v: serde_json::Value) -> AlgoSpec {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn every_key_parses() {
        for key in ALGO_KEYS {
            assert!(Algo::from_spec(&AlgoSpec::key(key)).is_ok(), "{key}");
        }
    }

    #[test]
    fn overrides_are_typed() {
        let a = Algo::from_spec(&spec(
            json!({"name": "etc_known", "overrides": {"M": 50, "i_R": 1}}),
        ));
        assert!(matches!(
            a,
            Ok(Algo::EtcKnown(EtcOverrides {
                m: Some(50),
                i_r: Some(1),
                ..
            }))
        ));
        let b = Algo::from_spec(&spec(
            json!({"name": "unknown_lambda", "overrides": {"epsilon": 0.2, "delta_conf": 0.01}}),
        ));
        assert!(b.is_ok(), "{b:?}");
    }

    #[test]
    fn bad_overrides_are_rejected() {
        for v in [
            json!({"name": "ucb1", "overrides": {"scale": -1.0}}),
            json!({"name": "ucb1", "overrides": {"radius": 1.0}}),
            json!({"name": "exp3p", "overrides": {"eta": 0.1}}),
            json!({"name": "etc_known", "overrides": {"M": 0}}),
            json!({"name": "unknown_lambda", "overrides": {"bogus": 1}}),
            json!({"name": "batched_sticky", "overrides": {"B": 0}}),
            json!({"name": "benchmark", "overrides": {"x": 1}}),
            json!("thompson"),
        ] {
            assert!(Algo::from_spec(&spec(v.clone())).is_err(), "{v}");
        }
    }

    #[test]
    fn label_defaults_to_key() {
        assert_eq!(AlgoSpec::key("aae").label(), "aae");
        let s = spec(json!({"name": "ucb1", "label": "ucb1_wide", "overrides": {"scale": 2.0}}));
        assert_eq!(s.label(), "ucb1_wide");
    }
}
