//! Decomposition trees for vertex-series-parallel orders.
//!
//! A [`Bdt`] is a binary tree whose internal nodes are series (`S`) or
//! parallel (`P`) compositions; many BDTs represent the same order. An
//! [`Mdt`] merges adjacent same-type nodes and is unique per order.

mod arena;
mod bdt;
mod mdt;
mod nested;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poset::Actor;

pub use arena::{Node, NodeId, NodeKind, SpTree};
pub use bdt::{Bdt, ClusterSummary, TypeDraw};
pub use mdt::{Mdt, MdtMove};
pub use nested::NestedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    /// Series: children are stacked, earlier children above later ones.
    S,
    /// Parallel: children are mutually unordered.
    P,
}

impl NodeType {
    pub fn flipped(self) -> Self {
        match self {
            NodeType::S => NodeType::P,
            NodeType::P => NodeType::S,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("actor {0} is already in the tree")]
    ActorPresent(Actor),
    #[error("actor {0} is not in the tree")]
    UnknownActor(Actor),
    #[error("node {0} does not exist")]
    EdgeNotFound(NodeId),
    #[error("cannot delete the last actor")]
    LastActor,
    #[error("actor {0} appears more than once")]
    DuplicateActor(Actor),
    #[error("node {0} has inconsistent parent/child links")]
    BrokenLink(NodeId),
    #[error("internal node {node} has {children} children, expected {expected}")]
    BadArity { node: NodeId, children: usize, expected: &'static str },
    #[error("adjacent internal nodes {0} and {1} have the same type")]
    SameTypeAdjacent(NodeId, NodeId),
    #[error("order is not series-parallel; forbidden subgraph on {0:?}")]
    NotVsp([Actor; 4]),
    #[error("tree has no actors")]
    Empty,
}
