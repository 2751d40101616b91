use serde::{Deserialize, Serialize};

use crate::poset::Actor;

use super::NodeType;

/// Nested, id-free form of a decomposition tree.
///
/// This is the JSON schema for trees in files and traces. `S` children are
/// listed top of the stack first; `P` children are unordered.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NestedTree {
    Leaf { actor: Actor },
    S { children: Vec<NestedTree> },
    P { children: Vec<NestedTree> },
}

impl NestedTree {
    pub fn leaf(actor: Actor) -> Self {
        NestedTree::Leaf { actor }
    }

    pub fn internal(ty: NodeType, children: Vec<NestedTree>) -> Self {
        match ty {
            NodeType::S => NestedTree::S { children },
            NodeType::P => NestedTree::P { children },
        }
    }

    pub fn node_type(&self) -> Option<NodeType> {
        match self {
            NestedTree::Leaf { .. } => None,
            NestedTree::S { .. } => Some(NodeType::S),
            NestedTree::P { .. } => Some(NodeType::P),
        }
    }

    pub fn children(&self) -> &[NestedTree] {
        match self {
            NestedTree::Leaf { .. } => &[],
            NestedTree::S { children } | NestedTree::P { children } => children,
        }
    }

    pub fn min_actor(&self) -> Actor {
        match self {
            NestedTree::Leaf { actor } => *actor,
            NestedTree::S { children } | NestedTree::P { children } => {
                children.iter().map(|c| c.min_actor()).min().unwrap_or(Actor::MAX)
            }
        }
    }

    pub fn actors(&self) -> Vec<Actor> {
        let mut out = Vec::new();
        self.collect_actors(&mut out);
        out
    }

    fn collect_actors(&self, out: &mut Vec<Actor>) {
        match self {
            NestedTree::Leaf { actor } => out.push(*actor),
            NestedTree::S { children } | NestedTree::P { children } => {
                for c in children {
                    c.collect_actors(out);
                }
            }
        }
    }

    /// Canonical multi-tree form: same-type parent/child pairs merged (stack
    /// order kept at `S` nodes), `P` children sorted by smallest actor.
    /// Two trees represent the same VSP iff their canonical forms are equal.
    pub fn canonical(&self) -> NestedTree {
        match self {
            NestedTree::Leaf { .. } => self.clone(),
            NestedTree::S { children } | NestedTree::P { children } => {
                let ty = self.node_type().unwrap();
                let mut flat = Vec::with_capacity(children.len());
                for c in children {
                    let c = c.canonical();
                    if c.node_type() == Some(ty) {
                        flat.extend(c.children().iter().cloned());
                    } else {
                        flat.push(c);
                    }
                }
                if ty == NodeType::P {
                    flat.sort_by_key(|c| c.min_actor());
                }
                NestedTree::internal(ty, flat)
            }
        }
    }

    /// Binary form keeping the tree shape but sorting `P` children; identifies
    /// a typed BDT up to the (meaningless) order of `P` children.
    pub fn binary_key(&self) -> NestedTree {
        match self {
            NestedTree::Leaf { .. } => self.clone(),
            NestedTree::S { children } => NestedTree::S {
                children: children.iter().map(|c| c.binary_key()).collect(),
            },
            NestedTree::P { children } => {
                let mut cs: Vec<_> = children.iter().map(|c| c.binary_key()).collect();
                cs.sort_by_key(|c| c.min_actor());
                NestedTree::P { children: cs }
            }
        }
    }
}
