//! The guidance tree: question nodes whose answers lead to leaves, each leaf
//! bound to an executable fairness definition.
//!
//! Trees are JSON documents. `root` may be omitted when exactly one node has
//! no incoming answer. The first line of a node's `text` is its title.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RateKind;

const DEFAULT_TREE: &str = include_str!("../assets/default_tree.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequiredInput {
    FavourableClass,
    SensitiveAttribute,
    LegitimateAttributes,
    RateKind,
}

impl RequiredInput {
    pub fn as_str(self) -> &'static str {
        match self {
            RequiredInput::FavourableClass => "favourable_class",
            RequiredInput::SensitiveAttribute => "sensitive_attribute",
            RequiredInput::LegitimateAttributes => "legitimate_attributes",
            RequiredInput::RateKind => "rate_kind",
        }
    }
}

/// Metric-engine operation a definition dispatches to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluator {
    DemographicParity,
    ConditionalStatisticalParity,
    /// Parity of every listed rate; an empty list means the rate is chosen
    /// at evaluation time.
    RateParity {
        #[serde(default)]
        rates: Vec<RateKind>,
    },
}

impl Evaluator {
    pub fn required_inputs(&self) -> BTreeSet<RequiredInput> {
        match self {
            Evaluator::DemographicParity => [RequiredInput::FavourableClass].into(),
            Evaluator::ConditionalStatisticalParity => [
                RequiredInput::FavourableClass,
                RequiredInput::SensitiveAttribute,
                RequiredInput::LegitimateAttributes,
            ]
            .into(),
            Evaluator::RateParity { rates } if rates.is_empty() => [RequiredInput::RateKind].into(),
            Evaluator::RateParity { .. } => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessDefinition {
    pub id: String,
    pub name: String,
    /// Markdown.
    pub description: String,
    pub required_inputs: BTreeSet<RequiredInput>,
    pub evaluator: Evaluator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Question,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub label: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionNode {
    pub id: String,
    pub kind: NodeKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition_id: Option<String>,
}

impl DecisionNode {
    pub fn title(&self) -> &str {
        self.text.lines().next().unwrap_or("").trim()
    }

    pub fn answer(&self, label: &str) -> Option<&Answer> {
        self.answers.iter().find(|a| a.label == label)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDocument {
    version: String,
    #[serde(default)]
    root: Option<String>,
    #[serde(default)]
    definitions: Vec<FairnessDefinition>,
    nodes: Vec<DecisionNode>,
}

/// A validated tree. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionTree {
    pub version: String,
    pub root: String,
    pub nodes: BTreeMap<String, DecisionNode>,
    pub definitions: BTreeMap<String, FairnessDefinition>,
    /// Node ids in document order.
    #[serde(skip)]
    order: Vec<String>,
}

impl DecisionTree {
    pub fn node(&self, id: &str) -> Result<&DecisionNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn root_node(&self) -> &DecisionNode {
        &self.nodes[&self.root]
    }

    /// Nodes in document order.
    pub fn iter_nodes(&self) -> impl Iterator<Item = &DecisionNode> {
        self.order.iter().map(|id| &self.nodes[id])
    }

    pub fn definition(&self, id: &str) -> Option<&FairnessDefinition> {
        self.definitions.get(id)
    }

    /// Definition bound to a leaf node.
    pub fn leaf_definition(&self, node: &DecisionNode) -> Option<&FairnessDefinition> {
        node.definition_id
            .as_deref()
            .and_then(|d| self.definitions.get(d))
    }
}

/// Parse and validate a tree document.
pub fn load_tree(document: &str) -> Result<DecisionTree> {
    let doc: TreeDocument = serde_json::from_str(document).map_err(|e| Error::TreeParse(e.to_string()))?;

    let mut definitions = BTreeMap::new();
    for d in doc.definitions {
        let expected = d.evaluator.required_inputs();
        if d.required_inputs != expected {
            let names: Vec<&str> = expected.iter().map(|i| i.as_str()).collect();
            return Err(Error::InvalidDefinition {
                definition: d.id.clone(),
                reason: format!("evaluator requires inputs {names:?}"),
            });
        }
        if definitions.contains_key(&d.id) {
            return Err(Error::InvalidDefinition {
                definition: d.id.clone(),
                reason: "defined twice".into(),
            });
        }
        definitions.insert(d.id.clone(), d);
    }

    let mut nodes = BTreeMap::new();
    let mut order = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        if nodes.contains_key(&n.id) {
            return Err(Error::DuplicateNode(n.id));
        }
        order.push(n.id.clone());
        nodes.insert(n.id.clone(), n);
    }
    if nodes.is_empty() {
        return Err(Error::TreeParse("tree has no nodes".into()));
    }

    for id in &order {
        let node = &nodes[id];
        for a in &node.answers {
            if !nodes.contains_key(&a.target) {
                return Err(Error::DanglingAnswer {
                    node: id.clone(),
                    target: a.target.clone(),
                });
            }
        }
        if let Some(def) = &node.definition_id {
            if !definitions.contains_key(def) {
                return Err(Error::UnknownDefinition {
                    node: id.clone(),
                    definition: def.clone(),
                });
            }
        }
        check_shape(node)?;
    }

    check_acyclic(&nodes, &order)?;

    let has_parent: BTreeSet<&str> = nodes
        .values()
        .flat_map(|n| n.answers.iter().map(|a| a.target.as_str()))
        .collect();
    let parentless: Vec<String> = order
        .iter()
        .filter(|id| !has_parent.contains(id.as_str()))
        .cloned()
        .collect();
    let root = match doc.root {
        Some(root) => {
            if !nodes.contains_key(&root) {
                return Err(Error::UnknownNode(root));
            }
            if has_parent.contains(root.as_str()) {
                return Err(Error::InvalidNode {
                    node: root,
                    reason: "the root cannot be the target of an answer".into(),
                });
            }
            root
        }
        None if parentless.len() == 1 => parentless[0].clone(),
        None => return Err(Error::MultipleRoots(parentless)),
    };

    let reachable = reachable_from(&nodes, &root);
    if let Some(lost) = order.iter().find(|id| !reachable.contains(id.as_str())) {
        return Err(Error::UnreachableNode(lost.clone()));
    }

    Ok(DecisionTree {
        version: doc.version,
        root,
        nodes,
        definitions,
        order,
    })
}

fn check_shape(node: &DecisionNode) -> Result<()> {
    let invalid = |reason: &str| {
        Err(Error::InvalidNode {
            node: node.id.clone(),
            reason: reason.into(),
        })
    };
    match node.kind {
        NodeKind::Question => {
            if node.answers.len() < 2 {
                return invalid("a question needs at least two answers");
            }
            if node.definition_id.is_some() {
                return invalid("a question cannot bind a definition");
            }
            let labels: BTreeSet<&str> = node.answers.iter().map(|a| a.label.as_str()).collect();
            if labels.len() != node.answers.len() {
                return invalid("answer labels must be distinct");
            }
        }
        NodeKind::Leaf => {
            if !node.answers.is_empty() {
                return invalid("a leaf cannot have answers");
            }
            if node.definition_id.is_none() {
                return invalid("a leaf needs a definition_id");
            }
        }
    }
    Ok(())
}

fn check_acyclic(nodes: &BTreeMap<String, DecisionNode>, order: &[String]) -> Result<()> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Open,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = nodes.keys().map(|k| (k.as_str(), Mark::Fresh)).collect();
    for start in order {
        if marks[start.as_str()] != Mark::Fresh {
            continue;
        }
        // Iterative DFS: (node, next answer index).
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        marks.insert(start.as_str(), Mark::Open);
        while let Some((id, next)) = stack.pop() {
            let answers = &nodes[id].answers;
            if next == answers.len() {
                marks.insert(id, Mark::Done);
                continue;
            }
            stack.push((id, next + 1));
            let target = answers[next].target.as_str();
            match marks[target] {
                Mark::Open => return Err(Error::CycleDetected(target.to_string())),
                Mark::Fresh => {
                    marks.insert(target, Mark::Open);
                    stack.push((target, 0));
                }
                Mark::Done => {}
            }
        }
    }
    Ok(())
}

fn reachable_from<'a>(nodes: &'a BTreeMap<String, DecisionNode>, root: &'a str) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::from([root]);
    let mut queue = vec![root];
    while let Some(id) = queue.pop() {
        for a in &nodes[id].answers {
            if seen.insert(a.target.as_str()) {
                queue.push(a.target.as_str());
            }
        }
    }
    seen
}

/// The tree shipped with the crate, an approximation of the published
/// Fairness Compass covering seven definitions.
pub fn default_tree() -> DecisionTree {
    load_tree(DEFAULT_TREE).expect("bundled tree is valid")
}

/// Raw JSON of the bundled tree.
pub fn default_tree_document() -> &'static str {
    DEFAULT_TREE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDescription {
    pub id: String,
    pub kind: NodeKind,
    pub title: String,
    pub text: String,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<FairnessDefinition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_inputs: Option<BTreeSet<RequiredInput>>,
}

pub fn describe_node(tree: &DecisionTree, node_id: &str) -> Result<NodeDescription> {
    let node = tree.node(node_id)?;
    let definition = tree.leaf_definition(node).cloned();
    Ok(NodeDescription {
        id: node.id.clone(),
        kind: node.kind,
        title: node.title().to_string(),
        text: node.text.clone(),
        answers: node.answers.iter().map(|a| a.label.clone()).collect(),
        required_inputs: definition.as_ref().map(|d| d.required_inputs.clone()),
        definition,
    })
}

/// One answered question on a path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub node_id: String,
    pub answer: String,
}

/// First root-to-leaf path (answers tried in document order) ending at a
/// leaf bound to `definition_id`.
pub fn path_to_definition(tree: &DecisionTree, definition_id: &str) -> Option<Vec<PathStep>> {
    fn walk(tree: &DecisionTree, id: &str, target: &str, path: &mut Vec<PathStep>) -> bool {
        let node = &tree.nodes[id];
        if node.kind == NodeKind::Leaf {
            return node.definition_id.as_deref() == Some(target);
        }
        for a in &node.answers {
            path.push(PathStep {
                node_id: id.to_string(),
                answer: a.label.clone(),
            });
            if walk(tree, &a.target, target, path) {
                return true;
            }
            path.pop();
        }
        false
    }
    let mut path = Vec::new();
    walk(tree, &tree.root, definition_id, &mut path).then_some(path)
}
