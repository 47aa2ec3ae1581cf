//! The bundled tree is well formed, corrupted documents are rejected with
//! the right error, and navigation behaves as a stack.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use faircompass_core::compass::{default_tree_document, NodeKind, PathStep};
use faircompass_core::{
    load_dataset, load_tree, path_to_definition, AuditSession, Clock, DecisionTree, IngestConfig, Meta,
};

use crate::{ensure, err, workspace_path, Outcome};

/// Corrupted fixtures and the error kind each must produce.
pub const CORRUPTED: [(&str, &str); 3] = [
    ("cycle", "CycleDetected"),
    ("dangling_answer", "DanglingAnswer"),
    ("unknown_definition", "UnknownDefinition"),
];

/// Every root-to-leaf walk, as the leaf reached.
fn leaves_by_walk(tree: &DecisionTree) -> Result<(usize, BTreeSet<String>), String> {
    let mut walks = 0;
    let mut seen = BTreeSet::new();
    let mut stack = vec![(tree.root.clone(), 0usize)];
    while let Some((id, depth)) = stack.pop() {
        ensure!(
            depth <= tree.nodes.len(),
            "walk through {id} is longer than the node count"
        );
        seen.insert(id.clone());
        let node = tree.node(&id).map_err(err("walk"))?;
        match node.kind {
            NodeKind::Leaf => {
                ensure!(
                    tree.leaf_definition(node).is_some(),
                    "leaf {id} has no definition"
                );
                walks += 1;
            }
            NodeKind::Question => stack.extend(node.answers.iter().map(|a| (a.target.clone(), depth + 1))),
        }
    }
    Ok((walks, seen))
}

fn default_tree_is_sound() -> Result<String, String> {
    let tree = load_tree(default_tree_document()).map_err(err("bundled tree"))?;
    let (walks, seen) = leaves_by_walk(&tree)?;
    let all: BTreeSet<String> = tree.nodes.keys().cloned().collect();
    ensure!(
        seen == all,
        "unreachable nodes {:?}",
        all.difference(&seen).collect::<Vec<_>>()
    );
    for id in tree.definitions.keys() {
        ensure!(
            path_to_definition(&tree, id).is_some(),
            "definition {id} has no leaf"
        );
    }
    Ok(format!(
        "{} nodes, {walks} walks, {} definitions",
        tree.nodes.len(),
        tree.definitions.len()
    ))
}

fn corrupted_trees_are_rejected() -> Result<(), String> {
    for (name, kind) in CORRUPTED {
        let path = workspace_path(&format!("crates/acceptance/fixtures/trees/{name}.json"));
        let document = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        match load_tree(&document) {
            Ok(_) => return Err(format!("{name}.json loaded")),
            Err(e) => ensure!(e.kind() == kind, "{name}.json: {} instead of {kind}", e.kind()),
        }
    }
    Ok(())
}

fn navigation_is_a_stack() -> Result<(), String> {
    let tree = faircompass_core::default_tree();
    let ds = load_dataset("s,y,yhat\na,1,1\n".as_bytes(), &IngestConfig::new("y", "yhat"))
        .map_err(err("dataset"))?;
    let config = Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(
            &prop::collection::vec((any::<bool>(), any::<u8>()), 1..40),
            |ops| {
                let mut session = AuditSession::new("stack", &ds, &tree, Clock::System);
                let mut stack: Vec<(Vec<PathStep>, String)> = vec![(Vec::new(), tree.root.clone())];
                for (forward, pick) in ops {
                    let (path, frontier) = stack.last().unwrap().clone();
                    let node = tree.node(&frontier).unwrap();
                    if forward && node.kind == NodeKind::Question {
                        let answer = &node.answers[pick as usize % node.answers.len()];
                        let reached = session
                            .navigate(&tree, &frontier, &answer.label, Meta::default())
                            .unwrap();
                        prop_assert_eq!(&reached, &answer.target);
                        let mut next = path;
                        next.push(PathStep {
                            node_id: frontier.clone(),
                            answer: answer.label.clone(),
                        });
                        stack.push((next, reached));
                    } else if !path.is_empty() {
                        let steps = 1 + pick as usize % path.len();
                        session.backtrack(steps, Meta::default()).unwrap();
                        stack.truncate(stack.len() - steps);
                    } else {
                        prop_assert!(session.backtrack(1, Meta::default()).is_err());
                    }
                    let (path, frontier) = stack.last().unwrap();
                    prop_assert_eq!(&session.state.tree_path, path);
                    prop_assert_eq!(&session.state.frontier, frontier);
                    let leaf = tree.node(frontier).unwrap().definition_id.clone();
                    prop_assert_eq!(session.state.selected_definition.clone(), leaf);
                }
                Ok(())
            },
        )
        .map_err(|e| format!("navigation: {e}"))
}

pub fn check() -> Outcome {
    let summary = default_tree_is_sound()?;
    corrupted_trees_are_rejected()?;
    navigation_is_a_stack()?;
    Ok(format!(
        "{summary}; {} corrupted documents rejected; navigation is a stack",
        CORRUPTED.len()
    ))
}
