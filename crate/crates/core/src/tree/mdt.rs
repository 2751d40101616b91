use rand::Rng;

use crate::poset::{Actor, PartialOrder};

use super::{Bdt, NestedTree, Node, NodeId, NodeKind, NodeType, SpTree, TreeError};

/// Multi decomposition tree: every internal node has at least two children
/// and adjacent internal nodes alternate type. One-to-one with VSPs.
#[derive(Debug, Clone)]
pub struct Mdt {
    tree: SpTree,
}

impl PartialEq for Mdt {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Mdt {}

/// One regraft choice of the MDT edge move: the subtree at `moved` is pruned
/// and reattached relative to `anchor` (`None` means above the root). `slot`
/// picks among the stacking options of that placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MdtMove {
    pub moved: NodeId,
    pub anchor: Option<NodeId>,
    pub slot: usize,
}

impl Mdt {
    pub fn leaf(actor: Actor) -> Self {
        Self { tree: SpTree::leaf(actor) }
    }

    pub fn from_tree(tree: SpTree) -> Result<Self, TreeError> {
        tree.check_links()?;
        for id in tree.internal_ids() {
            let kids = tree.children(id);
            if kids.len() < 2 {
                return Err(TreeError::BadArity { node: id, children: kids.len(), expected: "at least 2" });
            }
            let ty = tree.node_type(id);
            if let Some(&c) = kids.iter().find(|&&c| tree.node_type(c) == ty) {
                return Err(TreeError::SameTypeAdjacent(id, c));
            }
        }
        Ok(Self { tree })
    }

    /// Strict: the nested form must already alternate.
    pub fn from_nested(nested: &NestedTree) -> Result<Self, TreeError> {
        Self::from_tree(SpTree::from_nested(nested))
    }

    /// Accepts any decomposition tree (binary or not) and merges same-type
    /// neighbours.
    pub fn from_nested_normalized(nested: &NestedTree) -> Result<Self, TreeError> {
        let c = nested.canonical();
        Self::from_tree(SpTree::from_nested(&c))
    }

    pub(crate) fn from_canonical(c: &NestedTree) -> Self {
        Self { tree: SpTree::from_nested(c) }
    }

    /// The MDT of a VSP, by recursive series/parallel decomposition.
    pub fn from_partial_order(po: &PartialOrder) -> Result<Self, TreeError> {
        if po.n() == 0 {
            return Err(TreeError::Empty);
        }
        let all: Vec<usize> = (0..po.n()).collect();
        match decompose(po, &all) {
            Some(nested) => Ok(Self::from_canonical(&nested.canonical())),
            None => Err(TreeError::NotVsp(
                po.forbidden_witness().expect("decomposition fails only on non-VSPs"),
            )),
        }
    }

    pub fn tree(&self) -> &SpTree {
        &self.tree
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn to_nested(&self) -> NestedTree {
        self.tree.to_nested()
    }

    /// Canonical form; equal keys iff equal orders.
    pub fn key(&self) -> NestedTree {
        self.tree.canonical()
    }

    pub fn to_vsp(&self) -> PartialOrder {
        self.tree.to_partial_order()
    }

    /// A representing BDT: each multi-way node unfolds into a right comb.
    pub fn to_bdt(&self) -> Bdt {
        fn comb(n: &NestedTree) -> NestedTree {
            match n.node_type() {
                None => n.clone(),
                Some(ty) => {
                    let kids: Vec<NestedTree> = n.children().iter().map(comb).collect();
                    let mut it = kids.into_iter().rev();
                    let mut acc = it.next().expect("internal node has children");
                    for c in it {
                        acc = NestedTree::internal(ty, vec![c, acc]);
                    }
                    acc
                }
            }
        }
        Bdt::from_nested(&comb(&self.to_nested())).expect("comb is binary")
    }

    /// Subtrees that can be pruned: all non-root nodes.
    pub fn movable(&self) -> Vec<NodeId> {
        let r = self.tree.root();
        self.tree.node_ids().filter(|&i| i != r).collect()
    }

    /// Anchors for regrafting `moved`: all nodes outside its subtree except
    /// its parent, plus `None` for the position above the root.
    pub fn anchors(&self, moved: NodeId) -> Vec<Option<NodeId>> {
        let e1 = self.tree.parent(moved);
        let mut out: Vec<Option<NodeId>> = self
            .tree
            .node_ids()
            .filter(|&i| Some(i) != e1 && !self.tree.is_ancestor_or_self(moved, i))
            .map(Some)
            .collect();
        out.push(None);
        out
    }

    /// Prunes `moved` from a copy. `None` if the prune itself leaves two
    /// same-type internal nodes adjacent.
    fn pruned(&self, moved: NodeId) -> Option<SpTree> {
        let mut t = self.tree.clone();
        let e1 = t.parent(moved)?;
        t.children_mut(e1).retain(|&c| c != moved);
        t.node_mut(moved).parent = None;
        if t.children(e1).len() == 1 {
            let s = t.children(e1)[0];
            let g = t.parent(e1);
            t.replace_in_parent(e1, s);
            t.release(e1);
            if let (Some(g), Some(sty)) = (g, t.node_type(s)) {
                if t.node_type(g) == Some(sty) {
                    return None;
                }
            }
        }
        Some(t)
    }

    /// Type and number of stacking options for reattaching at `anchor` in
    /// the pruned tree. The new parent of `moved` is the anchor itself when
    /// it is internal, otherwise a fresh node.
    fn placement(t: &SpTree, anchor: Option<NodeId>) -> Placement {
        let fresh_over = |base: NodeId, opposite_of: Option<NodeType>| match opposite_of {
            Some(ty) => Placement::Fresh { base, ty: Some(ty.flipped()) },
            // Above a lone leaf: both types are possible.
            None => Placement::Fresh { base, ty: None },
        };
        match anchor {
            None => {
                let r = t.root();
                fresh_over(r, t.node_type(r))
            }
            Some(i) if t.is_leaf(i) => fresh_over(i, t.parent(i).and_then(|p| t.node_type(p))),
            Some(i) => Placement::Join(i),
        }
    }

    fn option_count(t: &SpTree, p: Placement) -> usize {
        match p {
            Placement::Join(i) => match t.node_type(i) {
                Some(NodeType::S) => t.children(i).len() + 1,
                _ => 1,
            },
            Placement::Fresh { ty: Some(NodeType::S), .. } => 2,
            Placement::Fresh { ty: Some(NodeType::P), .. } => 1,
            Placement::Fresh { ty: None, .. } => 3,
        }
    }

    /// All outcomes of pruning `moved` and reattaching at `anchor`, one per
    /// stacking option. Empty when the placement is inadmissible.
    pub fn move_outcomes(&self, moved: NodeId, anchor: Option<NodeId>) -> Vec<Mdt> {
        let Some(t) = self.pruned(moved) else { return Vec::new() };
        if anchor.is_some_and(|a| !t.contains(a)) {
            return Vec::new();
        }
        let place = Self::placement(&t, anchor);
        (0..Self::option_count(&t, place))
            .filter_map(|slot| Self::attach(t.clone(), moved, place, slot))
            .collect()
    }

    fn attach(mut t: SpTree, moved: NodeId, place: Placement, slot: usize) -> Option<Mdt> {
        let moved_ty = t.node_type(moved);
        match place {
            Placement::Join(i) => {
                let ty = t.node_type(i);
                if moved_ty == ty {
                    return None;
                }
                let kids = t.children_mut(i);
                if ty == Some(NodeType::S) {
                    kids.insert(slot, moved);
                } else {
                    kids.push(moved);
                }
                t.node_mut(moved).parent = Some(i);
            }
            Placement::Fresh { base, ty } => {
                let (ty, moved_first) = match (ty, slot) {
                    (Some(NodeType::S), s) => (NodeType::S, s == 0),
                    (Some(NodeType::P), _) => (NodeType::P, false),
                    (None, 0) => (NodeType::S, true),
                    (None, 1) => (NodeType::S, false),
                    (None, _) => (NodeType::P, false),
                };
                if moved_ty == Some(ty) {
                    return None;
                }
                let j = t.alloc(Node { parent: None, kind: NodeKind::Internal { ty, children: Vec::new() } });
                t.replace_in_parent(base, j);
                let kids = if moved_first { vec![moved, base] } else { vec![base, moved] };
                t.set_children(j, kids);
            }
        }
        debug_assert!(Mdt::from_tree(t.clone()).is_ok());
        Some(Mdt { tree: t })
    }

    /// Draws one edge move: uniform pruned subtree, uniform anchor, uniform
    /// stacking option. `None` when the draw is inadmissible.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(MdtMove, Mdt)> {
        let movable = self.movable();
        if movable.is_empty() {
            return None;
        }
        let moved = movable[rng.random_range(0..movable.len())];
        let anchors = self.anchors(moved);
        let anchor = anchors[rng.random_range(0..anchors.len())];
        let t = self.pruned(moved)?;
        let place = Self::placement(&t, anchor);
        let slot = rng.random_range(0..Self::option_count(&t, place));
        let out = Self::attach(t, moved, place, slot)?;
        Some((MdtMove { moved, anchor, slot }, out))
    }

    /// Total probability that [`Mdt::propose`] returns a tree equal to
    /// `target` (summed over every path reaching it).
    pub fn proposal_prob(&self, target: &Mdt) -> f64 {
        let key = target.key();
        let movable = self.movable();
        let mut total = 0.0;
        for &moved in &movable {
            let anchors = self.anchors(moved);
            let w = 1.0 / (movable.len() as f64 * anchors.len() as f64);
            for anchor in anchors {
                let outs = self.move_outcomes(moved, anchor);
                if outs.is_empty() {
                    continue;
                }
                // Outcomes are produced per stacking option, inadmissible
                // options included in the denominator.
                let k = self.pruned(moved).map_or(1, |t| {
                    Self::option_count(&t, Self::placement(&t, anchor))
                });
                let hits = outs.iter().filter(|m| m.key() == key).count();
                total += w * hits as f64 / k as f64;
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy)]
enum Placement {
    /// Become a new child of an existing internal node.
    Join(NodeId),
    /// A fresh internal node is inserted above `base`; `ty` is forced by the
    /// surrounding types, or free when `base` has no parent and is a leaf.
    Fresh { base: NodeId, ty: Option<NodeType> },
}

/// Series/parallel decomposition of the sub-order on `set` (indices into
/// `po`). `None` if some part is neither series- nor parallel-decomposable.
fn decompose(po: &PartialOrder, set: &[usize]) -> Option<NestedTree> {
    if set.len() == 1 {
        return Some(NestedTree::leaf(po.labels()[set[0]]));
    }
    let comparable = |a: usize, b: usize| po.above_idx(a, b) || po.above_idx(b, a);
    let parts = components(set, |a, b| comparable(a, b));
    if parts.len() > 1 {
        let kids = parts.iter().map(|p| decompose(po, p)).collect::<Option<Vec<_>>>()?;
        return Some(NestedTree::P { children: kids });
    }
    let mut parts = components(set, |a, b| !comparable(a, b));
    if parts.len() == 1 {
        return None;
    }
    // Series parts are totally ordered among themselves: sort by how many
    // members of the set lie above the part's first element.
    let above_count = |x: usize| set.iter().filter(|&&y| po.above_idx(y, x)).count();
    parts.sort_by_key(|p| above_count(p[0]));
    for w in parts.windows(2) {
        if !w[0].iter().all(|&a| w[1].iter().all(|&b| po.above_idx(a, b))) {
            return None;
        }
    }
    let kids = parts.iter().map(|p| decompose(po, p)).collect::<Option<Vec<_>>>()?;
    Some(NestedTree::S { children: kids })
}

/// Connected components of `set` under `linked`, each sorted, in order of
/// smallest member.
fn components(set: &[usize], linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut comp = vec![usize::MAX; set.len()];
    let mut out = Vec::new();
    for start in 0..set.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        comp[start] = id;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(set[i]);
            for j in 0..set.len() {
                if comp[j] == usize::MAX && linked(set[i], set[j]) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}
