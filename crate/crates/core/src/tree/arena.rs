use fixedbitset::FixedBitSet;

use crate::poset::{Actor, PartialOrder};

use super::{NestedTree, NodeType, TreeError};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Leaf(Actor),
    /// For `S` nodes `children[0]` is the top of the stack.
    Internal { ty: NodeType, children: Vec<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub kind: NodeKind,
}

/// Index pool of decomposition-tree nodes with a free list.
///
/// Node ids stay stable across edits. Both [`super::Bdt`] and
/// [`super::Mdt`] are thin wrappers enforcing their own shape invariants.
#[derive(Debug, Clone)]
pub struct SpTree {
    nodes: Vec<Option<Node>>,
    free: Vec<NodeId>,
    root: NodeId,
}

impl SpTree {
    pub fn leaf(actor: Actor) -> Self {
        Self {
            nodes: vec![Some(Node { parent: None, kind: NodeKind::Leaf(actor) })],
            free: Vec::new(),
            root: 0,
        }
    }

    pub fn from_nested(nested: &NestedTree) -> Self {
        let mut tree = Self { nodes: Vec::new(), free: Vec::new(), root: 0 };
        tree.root = tree.build(nested, None);
        tree
    }

    fn build(&mut self, nested: &NestedTree, parent: Option<NodeId>) -> NodeId {
        match nested {
            NestedTree::Leaf { actor } => self.alloc(Node { parent, kind: NodeKind::Leaf(*actor) }),
            NestedTree::S { children } | NestedTree::P { children } => {
                let ty = nested.node_type().unwrap();
                let id = self.alloc(Node {
                    parent,
                    kind: NodeKind::Internal { ty, children: Vec::new() },
                });
                let kids: Vec<NodeId> = children.iter().map(|c| self.build(c, Some(id))).collect();
                self.set_children(id, kids);
                id
            }
        }
    }

    pub(crate) fn alloc(&mut self, node: Node) -> NodeId {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id] = Some(node);
                id
            }
            None => {
                self.nodes.push(Some(node));
                self.nodes.len() - 1
            }
        }
    }

    pub(crate) fn release(&mut self, id: NodeId) {
        self.nodes[id] = None;
        self.free.push(id);
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub(crate) fn set_root(&mut self, id: NodeId) {
        self.root = id;
        self.node_mut(id).parent = None;
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(|n| n.is_some())
    }

    pub fn node(&self, id: NodeId) -> &Node {
        self.nodes[id].as_ref().expect("dead node id")
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id].as_mut().expect("dead node id")
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.node(id).kind {
            NodeKind::Leaf(_) => &[],
            NodeKind::Internal { children, .. } => children,
        }
    }

    pub(crate) fn children_mut(&mut self, id: NodeId) -> &mut Vec<NodeId> {
        match &mut self.node_mut(id).kind {
            NodeKind::Leaf(_) => panic!("leaf has no children"),
            NodeKind::Internal { children, .. } => children,
        }
    }

    pub(crate) fn set_children(&mut self, id: NodeId, kids: Vec<NodeId>) {
        for &k in &kids {
            self.node_mut(k).parent = Some(id);
        }
        *self.children_mut(id) = kids;
    }

    pub fn node_type(&self, id: NodeId) -> Option<NodeType> {
        match &self.node(id).kind {
            NodeKind::Leaf(_) => None,
            NodeKind::Internal { ty, .. } => Some(*ty),
        }
    }

    pub(crate) fn set_type(&mut self, id: NodeId, new_ty: NodeType) {
        if let NodeKind::Internal { ty, .. } = &mut self.node_mut(id).kind {
            *ty = new_ty;
        }
    }

    pub fn actor(&self, id: NodeId) -> Option<Actor> {
        match &self.node(id).kind {
            NodeKind::Leaf(a) => Some(*a),
            NodeKind::Internal { .. } => None,
        }
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.node(id).kind, NodeKind::Leaf(_))
    }

    /// Live node ids in increasing order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|_| i))
    }

    pub fn internal_ids(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&i| !self.is_leaf(i)).collect()
    }

    pub fn leaf_ids(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    /// Number of leaves (actors).
    pub fn n(&self) -> usize {
        self.node_ids().filter(|&i| self.is_leaf(i)).count()
    }

    pub fn leaf_of(&self, actor: Actor) -> Option<NodeId> {
        self.node_ids().find(|&i| self.actor(i) == Some(actor))
    }

    /// Sorted actor ids.
    pub fn actors(&self) -> Vec<Actor> {
        let mut a: Vec<Actor> = self.node_ids().filter_map(|i| self.actor(i)).collect();
        a.sort_unstable();
        a
    }

    /// Children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.children(id).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    /// True iff `anc` is `node` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, anc: NodeId, node: NodeId) -> bool {
        let mut cur = Some(node);
        while let Some(c) = cur {
            if c == anc {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }

    /// Position of `child` among its parent's children.
    pub fn child_position(&self, child: NodeId) -> Option<usize> {
        let p = self.parent(child)?;
        self.children(p).iter().position(|&c| c == child)
    }

    /// Puts `new` where `old` hangs (same slot in the parent's child list, or
    /// the root). `old` is left detached.
    pub(crate) fn replace_in_parent(&mut self, old: NodeId, new: NodeId) {
        match self.parent(old) {
            Some(p) => {
                let pos = self.child_position(old).unwrap();
                self.children_mut(p)[pos] = new;
                self.node_mut(new).parent = Some(p);
            }
            None => self.set_root(new),
        }
        self.node_mut(old).parent = None;
    }

    /// The order represented by the tree: the relation between two actors is
    /// set by the type of their most recent common ancestor.
    pub fn to_partial_order(&self) -> PartialOrder {
        let labels = self.actors();
        let n = labels.len();
        let mut rows = vec![FixedBitSet::with_capacity(n); n];
        let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for id in self.postorder() {
            match &self.node(id).kind {
                NodeKind::Leaf(a) => leaves[id] = vec![labels.binary_search(a).unwrap()],
                NodeKind::Internal { ty, children } => {
                    if *ty == NodeType::S {
                        for (k, &upper) in children.iter().enumerate() {
                            for &lower in &children[k + 1..] {
                                for &x in &leaves[upper] {
                                    for &y in &leaves[lower] {
                                        rows[x].insert(y);
                                    }
                                }
                            }
                        }
                    }
                    let mut all = Vec::new();
                    for &c in children {
                        all.append(&mut leaves[c]);
                    }
                    leaves[id] = all;
                }
            }
        }
        PartialOrder::from_closed_rows(labels, rows)
    }

    /// Longest chain: `S` nodes add child depths, `P` nodes take the maximum.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.nodes.len()];
        for id in self.postorder() {
            d[id] = match &self.node(id).kind {
                NodeKind::Leaf(_) => 1,
                NodeKind::Internal { ty: NodeType::S, children } => children.iter().map(|&c| d[c]).sum(),
                NodeKind::Internal { ty: NodeType::P, children } => {
                    children.iter().map(|&c| d[c]).max().unwrap_or(0)
                }
            };
        }
        d[self.root]
    }

    /// Leaf counts of every subtree, indexed by node id (0 for dead ids).
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.nodes.len()];
        for id in self.postorder() {
            s[id] = if self.is_leaf(id) {
                1
            } else {
                self.children(id).iter().map(|&c| s[c]).sum()
            };
        }
        s
    }

    pub fn to_nested(&self) -> NestedTree {
        self.nested_at(self.root)
    }

    pub fn nested_at(&self, id: NodeId) -> NestedTree {
        match &self.node(id).kind {
            NodeKind::Leaf(a) => NestedTree::leaf(*a),
            NodeKind::Internal { ty, children } => {
                NestedTree::internal(*ty, children.iter().map(|&c| self.nested_at(c)).collect())
            }
        }
    }

    /// Canonical multi-tree form (see [`NestedTree::canonical`]).
    pub fn canonical(&self) -> NestedTree {
        self.to_nested().canonical()
    }

    /// Structural checks shared by both tree kinds: parent links agree with
    /// child lists, every live node is reachable, actors are distinct.
    pub fn check_links(&self) -> Result<(), TreeError> {
        if !self.contains(self.root) || self.parent(self.root).is_some() {
            return Err(TreeError::BrokenLink(self.root));
        }
        let order = self.postorder();
        if order.len() != self.node_count() {
            return Err(TreeError::BrokenLink(self.root));
        }
        let mut seen = std::collections::HashSet::new();
        for id in order {
            for &c in self.children(id) {
                if self.parent(c) != Some(id) {
                    return Err(TreeError::BrokenLink(c));
                }
            }
            if let Some(a) = self.actor(id) {
                if !seen.insert(a) {
                    return Err(TreeError::DuplicateActor(a));
                }
            }
        }
        Ok(())
    }

    /// Removes an actor's leaf; a parent left with one child is spliced out.
    /// Works for binary and multi-way trees alike.
    pub fn remove_actor(&mut self, actor: Actor) -> Result<(), TreeError> {
        let leaf = self.leaf_of(actor).ok_or(TreeError::UnknownActor(actor))?;
        let parent = self.parent(leaf).ok_or(TreeError::LastActor)?;
        self.children_mut(parent).retain(|&c| c != leaf);
        self.release(leaf);
        if self.children(parent).len() == 1 {
            let only = self.children(parent)[0];
            self.replace_in_parent(parent, only);
            self.release(parent);
        }
        Ok(())
    }

    /// True iff nothing lies above the actor: at every `S` ancestor its
    /// branch is the first child.
    pub fn is_maximal(&self, leaf: NodeId) -> bool {
        self.on_extreme_branch(leaf, true)
    }

    /// True iff nothing lies below the actor.
    pub fn is_minimal(&self, leaf: NodeId) -> bool {
        self.on_extreme_branch(leaf, false)
    }

    fn on_extreme_branch(&self, leaf: NodeId, top: bool) -> bool {
        let mut cur = leaf;
        while let Some(p) = self.parent(cur) {
            if self.node_type(p) == Some(NodeType::S) {
                let kids = self.children(p);
                let end = if top { kids[0] } else { kids[kids.len() - 1] };
                if end != cur {
                    return false;
                }
            }
            cur = p;
        }
        true
    }
}
