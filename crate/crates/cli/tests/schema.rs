//! The published schemas list exactly the keys the code reads and writes.

use std::collections::BTreeSet;

use pgsm_cli::trace::TraceRow;
use pgsm_cli::ExperimentConfig;
use serde_json::Value;

fn schema(name: &str) -> Value {
    let path = format!("{}/schema/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Dotted paths of every leaf key in a schema's `properties` tree.
fn schema_keys(node: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    for (k, v) in node["properties"].as_object().unwrap() {
        let key = format!("{prefix}{k}");
        if v.get("properties").is_some() {
            schema_keys(v, &format!("{key}."), out);
        } else {
            out.insert(key);
        }
    }
}

fn value_keys(node: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    for (k, v) in node.as_object().unwrap() {
        let key = format!("{prefix}{k}");
        if v.is_object() {
            value_keys(v, &format!("{key}."), out);
        } else {
            out.insert(key);
        }
    }
}

#[test]
fn config_schema_matches_config_fields() {
    let mut expected = BTreeSet::new();
    value_keys(
        &serde_json::to_value(ExperimentConfig::default()).unwrap(),
        "",
        &mut expected,
    );
    let mut listed = BTreeSet::new();
    schema_keys(&schema("config.schema.json"), "", &mut listed);
    assert_eq!(listed, expected);
}

#[test]
fn config_schema_defaults_match_code() {
    let s = schema("config.schema.json");
    let defaults = serde_json::to_value(ExperimentConfig::default()).unwrap();
    for section in ["dataset", "model", "prior", "sampler", "budget", "output"] {
        for (k, v) in s["properties"][section]["properties"].as_object().unwrap() {
            if let Some(d) = v.get("default") {
                let actual = &defaults[section][k];
                let same = match (d.as_f64(), actual.as_f64()) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                    _ => d == actual,
                };
                assert!(same, "{section}.{k}: schema {d} vs code {actual}");
            }
        }
    }
}

#[test]
fn trace_schema_matches_trace_rows() {
    let row = TraceRow {
        iteration: 1,
        wall_seconds: None,
        cpu_seconds: None,
        clusters: 1,
        alpha: None,
        log_score: 0.0,
        heldout_loglik: None,
        v_measure: None,
        pgsm_moves: 0,
        smc_generations: 0,
        resampling_events: 0,
        sams_accepts: 0,
    };
    let mut expected = BTreeSet::new();
    value_keys(&serde_json::to_value(row).unwrap(), "", &mut expected);
    let s = schema("trace.schema.json");
    let mut listed = BTreeSet::new();
    schema_keys(&s, "", &mut listed);
    assert_eq!(listed, expected);
    let required: BTreeSet<String> = s["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(required, expected);
}
