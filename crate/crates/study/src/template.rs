//! Study templates: a nested tree of task lists, merge lists and tasks.
//!
//! ```json
//! {
//!   "id": "demo",
//!   "root": {
//!     "kind": "tasklist", "ordered": false,
//!     "children": [
//!       { "kind": "mergelist",
//!         "left":  [{ "id": "box", "visualisation": "boxplot" }],
//!         "right": [{ "id": "q1", "query": "...", "objective": { ... } }] },
//!       { "kind": "task", "id": "t2", ... }
//!     ]
//!   }
//! }
//! ```
//!
//! A merge list expands to the outer product of its partials. Partials of a pair
//! must not share fields except `id`, which becomes `"{left}-{right}"`. A task
//! without an `interactive` flag takes it from its visualisation.

use std::collections::HashSet;

use bayesvis_core::task::{TaskError, TaskSpec, Visualisation};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("template error at {path}: {message}")]
pub struct TemplateError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T, TemplateError> {
    Err(TemplateError {
        path: path.to_owned(),
        message: message.into(),
    })
}

/// Grouping used by `choose_k` to select descendants instead of immediate children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChooseBy {
    /// Keep `k` task leaves per query id across the whole subtree.
    QueryId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskList {
    pub ordered: bool,
    /// Per-participant number of children (or, with `choose_by`, of leaves per
    /// group) to keep.
    pub choose_k: Option<usize>,
    pub choose_by: Option<ChooseBy>,
    /// Message shown before the first task of this list.
    pub notice: Option<String>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    #[serde(rename = "tasklist")]
    List(TaskList),
    Task(Box<TaskSpec>),
}

impl Node {
    fn for_each_task<'a>(&'a self, f: &mut impl FnMut(&'a TaskSpec)) {
        match self {
            Node::List(l) => l.children.iter().for_each(|c| c.for_each_task(f)),
            Node::Task(t) => f(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTemplate {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub root: TaskList,
}

impl StudyTemplate {
    /// Every resolved task in template order.
    pub fn tasks(&self) -> Vec<&TaskSpec> {
        let mut out = Vec::new();
        self.root.children.iter().for_each(|c| c.for_each_task(&mut |t| out.push(t)));
        out
    }

    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks().into_iter().find(|t| t.id == id)
    }

    /// Distinct model references in template order.
    pub fn model_refs(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.tasks()
            .into_iter()
            .filter(|t| seen.insert(t.model_ref.as_str()))
            .map(|t| t.model_ref.clone())
            .collect()
    }
}

/// Parses and validates a template document.
pub fn parse_template(document: &str) -> Result<StudyTemplate, TemplateError> {
    let value: Value = serde_json::from_str(document).or_else(|e| err("$", format!("malformed JSON: {e}")))?;
    let obj = value.as_object().map_or_else(|| err("$", "template must be an object"), Ok)?;
    let id = match obj.get("id") {
        Some(Value::String(s)) if valid_id(s) => s.clone(),
        _ => return err("$.id", "study id must be a non-empty string of letters, digits, '-' or '_'"),
    };
    let title = obj.get("title").and_then(Value::as_str).unwrap_or_default().to_owned();
    let root = match obj.get("root") {
        Some(v) => match parse_node(v, "$.root")? {
            Resolved::List(l) => l,
            Resolved::Tasks(tasks) => TaskList {
                ordered: true,
                choose_k: None,
                choose_by: None,
                notice: None,
                children: tasks.into_iter().map(|t| Node::Task(Box::new(t))).collect(),
            },
        },
        None => return err("$", "missing `root`"),
    };
    let template = StudyTemplate { id, title, root };
    let mut ids = HashSet::new();
    for t in template.tasks() {
        if !ids.insert(t.id.as_str()) {
            return err("$.root", format!("duplicate task id `{}`", t.id));
        }
    }
    if ids.is_empty() {
        return err("$.root", "template has no tasks");
    }
    Ok(template)
}

pub(crate) fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

enum Resolved {
    List(TaskList),
    Tasks(Vec<TaskSpec>),
}

fn parse_node(v: &Value, path: &str) -> Result<Resolved, TemplateError> {
    let obj = v.as_object().map_or_else(|| err(path, "node must be an object"), Ok)?;
    match obj.get("kind").and_then(Value::as_str) {
        Some("tasklist") => parse_list(obj, path).map(Resolved::List),
        Some("mergelist") => parse_merge(obj, path).map(Resolved::Tasks),
        Some("task") => {
            let mut fields = obj.clone();
            fields.remove("kind");
            parse_task(fields, path).map(|t| Resolved::Tasks(vec![t]))
        }
        Some(other) => err(&format!("{path}.kind"), format!("unknown node kind `{other}`")),
        None => err(path, "node without a `kind`"),
    }
}

fn parse_list(obj: &Map<String, Value>, path: &str) -> Result<TaskList, TemplateError> {
    for key in obj.keys() {
        if !matches!(key.as_str(), "kind" | "ordered" | "choose_k" | "choose_by" | "notice" | "children") {
            return err(&format!("{path}.{key}"), "unknown tasklist field");
        }
    }
    let ordered = match obj.get("ordered") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return err(&format!("{path}.ordered"), "expected a boolean"),
    };
    let choose_k = match obj.get("choose_k") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(k) if k > 0 => Some(k as usize),
            _ => return err(&format!("{path}.choose_k"), "expected a positive integer"),
        },
    };
    let choose_by = match obj.get("choose_by") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            serde_json::from_value::<ChooseBy>(v.clone())
                .or_else(|e| err(&format!("{path}.choose_by"), e.to_string()))?,
        ),
    };
    if choose_by.is_some() && choose_k.is_none() {
        return err(&format!("{path}.choose_by"), "choose_by requires choose_k");
    }
    let notice = match obj.get("notice") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return err(&format!("{path}.notice"), "expected a string"),
    };
    let raw = match obj.get("children") {
        Some(Value::Array(a)) => a,
        _ => return err(&format!("{path}.children"), "expected an array of nodes"),
    };
    let mut children = Vec::new();
    for (i, c) in raw.iter().enumerate() {
        match parse_node(c, &format!("{path}.children[{i}]"))? {
            Resolved::List(l) => children.push(Node::List(l)),
            Resolved::Tasks(ts) => children.extend(ts.into_iter().map(|t| Node::Task(Box::new(t)))),
        }
    }
    let list = TaskList {
        ordered,
        choose_k,
        choose_by,
        notice,
        children,
    };
    if let Some(k) = choose_k {
        match choose_by {
            None if k > list.children.len() => {
                return err(
                    &format!("{path}.choose_k"),
                    format!("cannot choose {k} of {} children", list.children.len()),
                )
            }
            Some(ChooseBy::QueryId) => {
                let mut counts = std::collections::HashMap::<String, usize>::new();
                list.children
                    .iter()
                    .for_each(|c| c.for_each_task(&mut |t| *counts.entry(t.query_key().to_owned()).or_default() += 1));
                if let Some((q, n)) = counts.iter().find(|(_, &n)| n < k) {
                    return err(&format!("{path}.choose_k"), format!("query `{q}` has only {n} tasks, fewer than {k}"));
                }
            }
            None => {}
        }
    }
    Ok(list)
}

fn parse_merge(obj: &Map<String, Value>, path: &str) -> Result<Vec<TaskSpec>, TemplateError> {
    let side = |name: &str| -> Result<Vec<Map<String, Value>>, TemplateError> {
        match obj.get(name) {
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_object()
                        .cloned()
                        .map_or_else(|| err(&format!("{path}.{name}[{i}]"), "partial task must be an object"), Ok)
                })
                .collect(),
            _ => err(&format!("{path}.{name}"), "expected an array of partial tasks"),
        }
    };
    let left = side("left")?;
    let right = side("right")?;
    let mut out = Vec::with_capacity(left.len() * right.len());
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            let here = format!("{path}[{i},{j}]");
            let mut merged = l.clone();
            for (key, value) in r {
                if key == "id" {
                    continue;
                }
                if merged.contains_key(key) {
                    return err(&here, format!("field `{key}` set by both partials"));
                }
                merged.insert(key.clone(), value.clone());
            }
            let id = match (l.get("id").and_then(Value::as_str), r.get("id").and_then(Value::as_str)) {
                (Some(a), Some(b)) => format!("{a}-{b}"),
                (Some(a), None) | (None, Some(a)) => a.to_owned(),
                (None, None) => return err(&here, "neither partial has an `id`"),
            };
            merged.insert("id".into(), Value::String(id));
            out.push(parse_task(merged, &here)?);
        }
    }
    Ok(out)
}

fn parse_task(mut fields: Map<String, Value>, path: &str) -> Result<TaskSpec, TemplateError> {
    if !fields.contains_key("interactive") {
        if let Some(v) = fields
            .get("visualisation")
            .and_then(|v| serde_json::from_value::<Visualisation>(v.clone()).ok())
        {
            fields.insert("interactive".into(), Value::Bool(v.is_interactive()));
        }
    }
    let task: TaskSpec = serde_json::from_value(Value::Object(fields))
        .or_else(|e| err(path, format!("incomplete or invalid task: {e}")))?;
    task.validate()
        .map_err(|TaskError { reason, .. }| TemplateError {
            path: path.to_owned(),
            message: format!("task `{}`: {reason}", task.id),
        })?;
    Ok(task)
}
