use faircompass_core::compass::{NodeKind, PathStep};
use faircompass_core::{default_tree, load_dataset, load_tree, AuditSession, Clock, IngestConfig, Meta};
use proptest::prelude::*;
use serde_json::json;

/// A tree document over `n` nodes where answers mostly point forward, so
/// some generated documents are valid and some are not.
fn tree_document() -> impl Strategy<Value = String> {
    (1usize..10).prop_flat_map(|n| {
        prop::collection::vec((any::<bool>(), prop::collection::vec((any::<u8>(), any::<u8>()), 2..4)), n).prop_map(
            move |specs| {
                let nodes: Vec<_> = specs
                    .iter()
                    .enumerate()
                    .map(|(i, (leaf, answers))| {
                        if *leaf || i + 1 == n {
                            json!({"id": format!("n{i}"), "kind": "leaf", "text": format!("Leaf {i}"), "definition_id": "dp"})
                        } else {
                            let answers: Vec<_> = answers
                                .iter()
                                .enumerate()
                                .map(|(j, (forward, pick))| {
                                    let target = if *forward < 230 {
                                        i + 1 + *pick as usize % (n - i - 1)
                                    } else {
                                        *pick as usize % (n + 1)
                                    };
                                    json!({"label": format!("a{j}"), "target": format!("n{target}")})
                                })
                                .collect();
                            json!({"id": format!("n{i}"), "kind": "question", "text": format!("Q {i}"), "answers": answers})
                        }
                    })
                    .collect();
                json!({
                    "version": "random",
                    "definitions": [{"id": "dp", "name": "DP", "description": "", "required_inputs": ["favourable_class"],
                                     "evaluator": {"kind": "demographic_parity"}}],
                    "nodes": nodes
                })
                .to_string()
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn valid_trees_have_no_dead_ends(doc in tree_document(), walk in prop::collection::vec(any::<u8>(), 0..20)) {
        let Ok(tree) = load_tree(&doc) else { return Ok(()) };
        let mut at = tree.root_node();
        let mut steps = 0;
        let mut choices = walk.iter().cycle();
        while at.kind == NodeKind::Question {
            let pick = *choices.next().unwrap_or(&0) as usize % at.answers.len();
            at = tree.node(&at.answers[pick].target).unwrap();
            steps += 1;
            prop_assert!(steps <= tree.nodes.len(), "walk longer than the node count");
        }
        prop_assert!(tree.leaf_definition(at).is_some());
    }

    #[test]
    fn default_tree_walks_end_at_bound_leaves(walk in prop::collection::vec(any::<u8>(), 1..10)) {
        let tree = default_tree();
        let mut at = tree.root_node();
        for pick in walk.iter().cycle() {
            if at.kind == NodeKind::Leaf {
                break;
            }
            at = tree.node(&at.answers[*pick as usize % at.answers.len()].target).unwrap();
        }
        prop_assert!(tree.leaf_definition(at).is_some());
    }

    #[test]
    fn navigate_and_backtrack_form_a_stack(ops in prop::collection::vec((any::<bool>(), any::<u8>()), 1..40)) {
        let tree = default_tree();
        let ds = load_dataset("s,y,yhat\na,1,1\n".as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
        let mut session = AuditSession::new("p", &ds, &tree, Clock::System);
        // Model: stack of (path, frontier) snapshots.
        let mut stack: Vec<(Vec<PathStep>, String)> = vec![(Vec::new(), tree.root.clone())];
        for (forward, pick) in ops {
            let (path, frontier) = stack.last().unwrap().clone();
            let node = tree.node(&frontier).unwrap();
            if forward && node.kind == NodeKind::Question {
                let answer = &node.answers[pick as usize % node.answers.len()];
                let reached = session.navigate(&tree, &frontier, &answer.label, Meta::default()).unwrap();
                prop_assert_eq!(&reached, &answer.target);
                let mut next = path.clone();
                next.push(PathStep { node_id: frontier.clone(), answer: answer.label.clone() });
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
    }
}

#[test]
fn generator_yields_valid_and_invalid_trees() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let strategy = tree_document();
    let valid = (0..400)
        .filter(|_| load_tree(&strategy.new_tree(&mut runner).unwrap().current()).is_ok())
        .count();
    assert!((40..360).contains(&valid), "{valid} of 400 valid");
}
