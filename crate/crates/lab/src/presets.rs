//! Built-in experiments.

use serde_json::json;

use crate::config::ExperimentConfig;

pub const PRESETS: &[&str] = &[
    "fig2_repro",
    "lambda_sweep",
    "sticky_demo",
    "noise_robustness",
    "unknown_lambda_demo",
    "etc_midrange",
    "lambda0_sanity",
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let value = match name {
        // Baselines against the sticky learner on the two-arm separation family.
        "fig2_repro" => json!({
            "name": name,
            "instance": {"proposition1": {"epsilon": 0.1, "horizon": 20000}},
            "lambdas": [0.25, 0.5, 0.75, 1.0],
            "algos": ["ucb1", "exp3", "aae", "batched_sticky"],
            "seeds": {"base": 2024, "count": 20}
        }),
        "lambda_sweep" => json!({
            "name": name,
            "instance": {"random": {"arms": 3, "lambda": 0.5, "horizon": 5000, "seed": 7}},
            "lambdas": [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0],
            "algos": ["exp3p", "etc_known", "unknown_lambda", "ucb1"],
            "seeds": {"base": 1, "count": 10}
        }),
        "sticky_demo" => json!({
            "name": name,
            "instance": {"proposition1": {"epsilon": 0.1, "horizon": 20000}},
            "algos": ["batched_sticky", "exp3p", "ucb1", "benchmark"],
            "seeds": {"base": 3, "count": 10}
        }),
        "noise_robustness" => json!({
            "name": name,
            "instance": {"inline": {
                "lambda": 0.5, "horizon": 10000,
                "arms": [{"r": 0.6, "b": 1.0}, {"r": 0.9, "b": 0.3}, {"r": 0.4, "b": 0.8}]
            }},
            "noise_sigmas": [0.0, 0.05, 0.1],
            "algos": ["etc_known", "exp3p", "unknown_lambda"],
            "seeds": {"base": 5, "count": 10}
        }),
        "unknown_lambda_demo" => json!({
            "name": name,
            "instance": {"inline": {
                "lambda": 0.6, "horizon": 50000,
                "arms": [{"r": 0.9, "b": 1.0}, {"r": 0.6, "b": 0.2}, {"r": 0.8, "b": 0.5}]
            }},
            "algos": ["unknown_lambda", "etc_known", "exp3p"],
            "seeds": {"base": 11, "count": 10}
        }),
        "etc_midrange" => json!({
            "name": name,
            "instance": {"inline": {
                "lambda": 0.5, "horizon": 100000,
                "arms": [{"r": 0.6, "b": 1.0}, {"r": 0.9, "b": 0.3}]
            }},
            "algos": ["etc_known", "etc_unknown", "exp3p"],
            "seeds": {"base": 13, "count": 10},
            "benchmark_epsilon": 0.001
        }),
        "lambda0_sanity" => json!({
            "name": name,
            "instance": {"random": {"arms": 3, "lambda": 0.0, "horizon": 20000, "seed": 17}},
            "algos": ["ucb1", "exp3", "aae"],
            "seeds": {"base": 19, "count": 10}
        }),
        _ => return None,
    };
    Some(serde_json::from_value(value).expect("preset is a valid config"))
}
