//! Per-participant expansion of a template into a task sequence.

use std::collections::{HashMap, HashSet};

use bayesvis_core::task::TaskSpec;
use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::template::{ChooseBy, Node, StudyTemplate, TaskList};

/// Depth-first expansion: selection first, then a Fisher-Yates shuffle of the
/// immediate children of unordered lists, then recursion. Deterministic per seed.
pub fn expand_for_user(template: &StudyTemplate, seed: u64) -> Vec<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    expand_list(&template.root, None, &mut rng, &mut out);
    out
}

fn expand_list(list: &TaskList, keep: Option<&HashSet<String>>, rng: &mut ChaCha8Rng, out: &mut Vec<TaskSpec>) {
    let mut selected: Option<HashSet<String>> = None;
    let mut children: Vec<&Node> = list.children.iter().collect();
    match (list.choose_k, list.choose_by) {
        (Some(k), Some(ChooseBy::QueryId)) => {
            let mut groups: Vec<(String, Vec<String>)> = Vec::new();
            let mut index: HashMap<String, usize> = HashMap::new();
            for c in &list.children {
                collect_ids(c, keep, &mut |t| {
                    let key = t.query_key().to_owned();
                    let g = *index.entry(key.clone()).or_insert_with(|| {
                        groups.push((key, Vec::new()));
                        groups.len() - 1
                    });
                    groups[g].1.push(t.id.clone());
                });
            }
            let mut chosen = HashSet::new();
            for (_, ids) in &groups {
                let k = k.min(ids.len());
                for i in sample(rng, ids.len(), k) {
                    chosen.insert(ids[i].clone());
                }
            }
            selected = Some(chosen);
        }
        (Some(k), None) => {
            let mut picks = sample(rng, children.len(), k.min(children.len())).into_vec();
            picks.sort_unstable();
            children = picks.into_iter().map(|i| children[i]).collect();
        }
        _ => {}
    }
    if !list.ordered {
        children.shuffle(rng);
    }
    let keep = selected.as_ref().or(keep);
    let start = out.len();
    for child in children {
        match child {
            Node::List(l) => expand_list(l, keep, rng, out),
            Node::Task(t) => {
                if keep.is_none_or(|k| k.contains(&t.id)) {
                    out.push((**t).clone());
                }
            }
        }
    }
    if let (Some(notice), Some(first)) = (&list.notice, out.get_mut(start)) {
        first.notice = Some(match first.notice.take() {
            Some(inner) => format!("{notice}\n\n{inner}"),
            None => notice.clone(),
        });
    }
}

fn collect_ids<'a>(node: &'a Node, keep: Option<&HashSet<String>>, f: &mut impl FnMut(&'a TaskSpec)) {
    match node {
        Node::List(l) => l.children.iter().for_each(|c| collect_ids(c, keep, f)),
        Node::Task(t) => {
            if keep.is_none_or(|k| k.contains(&t.id)) {
                f(t)
            }
        }
    }
}
