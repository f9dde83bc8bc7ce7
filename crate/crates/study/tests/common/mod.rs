#![allow(dead_code)]

use std::sync::Arc;

use bayesvis_core::samples::{Provenance, Schema};
use bayesvis_core::{JointSamples, Observability, VariableSpec};
use bayesvis_study::{parse_template, AppState, BlobStore, StudyStore, StudyTemplate};
use serde_json::{json, Value};

/// A unit-slider confidence partial without visualisation.
pub fn query(id: &str) -> Value {
    json!({
        "id": id,
        "query_id": id,
        "context": "Two gauges.",
        "query": format!("How sure are you that v0 is at least 1 ({id})?"),
        "answer_input": { "type": "slider", "min": 0.0, "max": 1.0, "step": 0.01 },
        "model_ref": "m",
        "query_meta": { "observability": "observable", "quantity": "confidence", "conditioning": "posterior" },
        "objective": {
            "kind": "symmetric_kl",
            "target": { "type": "confidence", "variable": "v0", "threshold": 1.0, "direction": "at_least" }
        }
    })
}

/// An identity multibet partial over both variables.
pub fn multibet_query(id: &str) -> Value {
    json!({
        "id": id,
        "query_id": id,
        "context": "Two gauges.",
        "query": "Which variable produced 1.0?",
        "answer_input": { "type": "multibet", "options": 2, "chips": 10 },
        "model_ref": "m",
        "query_meta": { "observability": "observable", "quantity": "id", "conditioning": "posterior" },
        "objective": {
            "kind": "symmetric_kl",
            "target": { "type": "identity_posterior", "candidates": ["v0", "v1"], "observed": 1.0, "window": 0.5 }
        }
    })
}

pub fn vis(id: &str) -> Value {
    json!({ "id": id, "visualisation": id })
}

pub fn task(id: &str) -> Value {
    let mut t = query(id);
    t["kind"] = json!("task");
    t["visualisation"] = json!("boxplot");
    t
}

pub fn list(ordered: bool, children: Vec<Value>) -> Value {
    json!({ "kind": "tasklist", "ordered": ordered, "children": children })
}

pub fn merge(left: Vec<Value>, right: Vec<Value>) -> Value {
    json!({ "kind": "mergelist", "left": left, "right": right })
}

pub fn template(id: &str, root: Value) -> StudyTemplate {
    parse_template(&json!({ "id": id, "root": root }).to_string()).unwrap()
}

/// Two ordered tasks plus one multibet task, in that order.
pub fn small_template() -> StudyTemplate {
    let mut mb = multibet_query("pick");
    mb["kind"] = json!("task");
    mb["visualisation"] = json!("hop");
    template("small", list(true, vec![task("a"), task("b"), mb]))
}

pub fn samples() -> JointSamples {
    let schema = Schema::new(vec![
        VariableSpec::new("v0", Observability::Observable, 0, "min"),
        VariableSpec::new("v1", Observability::Observable, 1, "min"),
    ])
    .unwrap();
    let values = (0..400).flat_map(|i| [f64::from(i % 4) * 0.5, f64::from(i % 5) * 0.6]).collect();
    JointSamples::new(schema, 400, values, Provenance::Posterior, 1).unwrap()
}

pub fn blobs(dir: &std::path::Path) -> BlobStore {
    let store = BlobStore::open(dir).unwrap();
    store.put("m", &samples()).unwrap();
    store
}

pub fn state(dir: &std::path::Path, template: &StudyTemplate) -> AppState {
    let store = StudyStore::open(dir.join("study.sqlite")).unwrap();
    store.register_study(template).unwrap();
    AppState {
        store: Arc::new(store),
        blobs: Arc::new(blobs(&dir.join("blobs"))),
    }
}
