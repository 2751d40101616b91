use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::poset::{Actor, PartialOrder};

use super::{Mdt, NestedTree, Node, NodeId, NodeKind, NodeType, SpTree, TreeError};

/// How a freshly inserted internal node is typed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeDraw {
    /// Series with the new leaf as the upper child.
    SUp,
    /// Series with the new leaf as the lower child.
    SDown,
    P,
}

impl TypeDraw {
    pub const ALL: [TypeDraw; 3] = [TypeDraw::SUp, TypeDraw::SDown, TypeDraw::P];

    /// P with probability `1 - q`, otherwise S-up or S-down with equal odds.
    pub fn sample<R: Rng + ?Sized>(q: f64, rng: &mut R) -> Self {
        let u: f64 = rng.random();
        if u < q / 2.0 {
            TypeDraw::SUp
        } else if u < q {
            TypeDraw::SDown
        } else {
            TypeDraw::P
        }
    }
}

/// Sizes of the maximal connected same-type groups of internal nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// Sorted ascending.
    pub s_cluster_sizes: Vec<usize>,
    /// Sorted ascending.
    pub p_cluster_sizes: Vec<usize>,
}

impl ClusterSummary {
    pub fn total(&self) -> usize {
        self.s_cluster_sizes.iter().sum::<usize>() + self.p_cluster_sizes.iter().sum::<usize>()
    }
}

/// Binary decomposition tree.
#[derive(Debug, Clone)]
pub struct Bdt {
    tree: SpTree,
}

impl Bdt {
    pub fn leaf(actor: Actor) -> Self {
        Self { tree: SpTree::leaf(actor) }
    }

    pub fn from_tree(tree: SpTree) -> Result<Self, TreeError> {
        tree.check_links()?;
        for id in tree.internal_ids() {
            let c = tree.children(id).len();
            if c != 2 {
                return Err(TreeError::BadArity { node: id, children: c, expected: "exactly 2" });
            }
        }
        Ok(Self { tree })
    }

    pub fn from_nested(nested: &NestedTree) -> Result<Self, TreeError> {
        Self::from_tree(SpTree::from_nested(nested))
    }

    pub fn tree(&self) -> &SpTree {
        &self.tree
    }

    pub fn into_tree(self) -> SpTree {
        self.tree
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn to_nested(&self) -> NestedTree {
        self.tree.to_nested()
    }

    /// Identifies the typed tree up to the order of `P` children.
    pub fn key(&self) -> NestedTree {
        self.tree.to_nested().binary_key()
    }

    pub fn to_vsp(&self) -> PartialOrder {
        self.tree.to_partial_order()
    }

    /// Collapses same-type neighbours into the unique MDT of the same order.
    pub fn collapse(&self) -> Mdt {
        Mdt::from_canonical(&self.tree.canonical())
    }

    /// Number of `S` nodes.
    pub fn s_count(&self) -> usize {
        self.tree
            .internal_ids()
            .into_iter()
            .filter(|&i| self.tree.node_type(i) == Some(NodeType::S))
            .count()
    }

    /// Every edge a new leaf could be inserted into, named by its lower end.
    /// The root's id stands for the edge above the root; there are `2k - 1`.
    pub fn insertion_edges(&self) -> Vec<NodeId> {
        self.tree.node_ids().collect()
    }

    /// In-place leaf insertion into the edge above `edge`; returns the id of
    /// the new internal node.
    pub fn insert_leaf(&mut self, edge: NodeId, actor: Actor, draw: TypeDraw) -> Result<NodeId, TreeError> {
        if !self.tree.contains(edge) {
            return Err(TreeError::EdgeNotFound(edge));
        }
        if self.tree.leaf_of(actor).is_some() {
            return Err(TreeError::ActorPresent(actor));
        }
        Ok(self.insert_unchecked(edge, actor, draw))
    }

    fn insert_unchecked(&mut self, edge: NodeId, actor: Actor, draw: TypeDraw) -> NodeId {
        let ty = match draw {
            TypeDraw::P => NodeType::P,
            _ => NodeType::S,
        };
        let leaf = self.tree.alloc(Node { parent: None, kind: NodeKind::Leaf(actor) });
        let j = self.tree.alloc(Node {
            parent: None,
            kind: NodeKind::Internal { ty, children: Vec::new() },
        });
        self.tree.replace_in_parent(edge, j);
        let kids = match draw {
            TypeDraw::SUp => vec![leaf, edge],
            TypeDraw::SDown | TypeDraw::P => vec![edge, leaf],
        };
        self.tree.set_children(j, kids);
        j
    }

    pub fn leaf_insert(&self, edge: NodeId, actor: Actor, draw: TypeDraw) -> Result<Bdt, TreeError> {
        let mut t = self.clone();
        t.insert_leaf(edge, actor, draw)?;
        Ok(t)
    }

    /// In-place removal of an actor's leaf and its parent; the sibling takes
    /// the parent's place.
    pub fn delete_leaf(&mut self, actor: Actor) -> Result<(), TreeError> {
        let leaf = self.tree.leaf_of(actor).ok_or(TreeError::UnknownActor(actor))?;
        let parent = self.tree.parent(leaf).ok_or(TreeError::LastActor)?;
        let sibling = self.sibling(leaf);
        self.tree.replace_in_parent(parent, sibling);
        self.tree.release(leaf);
        self.tree.release(parent);
        Ok(())
    }

    pub fn leaf_delete(&self, actor: Actor) -> Result<Bdt, TreeError> {
        let mut t = self.clone();
        t.delete_leaf(actor)?;
        Ok(t)
    }

    /// The other child of `id`'s parent. Panics at the root.
    pub fn sibling(&self, id: NodeId) -> NodeId {
        let p = self.tree.parent(id).expect("root has no sibling");
        let kids = self.tree.children(p);
        if kids[0] == id {
            kids[1]
        } else {
            kids[0]
        }
    }

    /// Draws from the tree prior on actors `0..n` by sequential leaf insertion.
    pub fn sample_prior<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Result<Bdt, TreeError> {
        let actors: Vec<Actor> = (0..n).collect();
        Self::sample_prior_on(&actors, q, rng)
    }

    pub fn sample_prior_on<R: Rng + ?Sized>(actors: &[Actor], q: f64, rng: &mut R) -> Result<Bdt, TreeError> {
        let mut sorted = actors.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(TreeError::DuplicateActor(w[0]));
        }
        let (&first, rest) = actors.split_first().ok_or(TreeError::Empty)?;
        let mut t = Bdt::leaf(first);
        for &a in rest {
            // No deletions happen here, so live ids are exactly 0..count.
            let edge = rng.random_range(0..t.tree.node_count());
            t.insert_unchecked(edge, a, TypeDraw::sample(q, rng));
        }
        Ok(t)
    }

    /// Every typed BDT on `actors` (each `S` stacking counted separately,
    /// `P` child order not). There are `(2n-3)!! * 3^(n-1)` of them.
    pub fn enumerate_all(actors: &[Actor]) -> Result<Vec<Bdt>, TreeError> {
        let (&first, rest) = actors.split_first().ok_or(TreeError::Empty)?;
        let mut current = vec![Bdt::leaf(first)];
        for &a in rest {
            let mut next = Vec::with_capacity(current.len() * 3 * (2 * current[0].n() + 1));
            for t in &current {
                for e in t.insertion_edges() {
                    for d in TypeDraw::ALL {
                        next.push(t.leaf_insert(e, a, d)?);
                    }
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Sizes of maximal same-type connected groups of internal nodes.
    pub fn clusters(&self) -> ClusterSummary {
        let t = &self.tree;
        let mut acc = vec![0usize; t.node_ids().last().map_or(0, |i| i + 1)];
        let mut out = ClusterSummary::default();
        for id in t.postorder() {
            let Some(ty) = t.node_type(id) else { continue };
            acc[id] = 1 + t
                .children(id)
                .iter()
                .filter(|&&c| t.node_type(c) == Some(ty))
                .map(|&c| acc[c])
                .sum::<usize>();
            let is_top = t.parent(id).and_then(|p| t.node_type(p)) != Some(ty);
            if is_top {
                match ty {
                    NodeType::S => out.s_cluster_sizes.push(acc[id]),
                    NodeType::P => out.p_cluster_sizes.push(acc[id]),
                }
            }
        }
        out.s_cluster_sizes.sort_unstable();
        out.p_cluster_sizes.sort_unstable();
        out
    }

    /// Flips the type of internal node `id`. `upper_first` decides, when the
    /// node becomes `S`, whether the current first child goes on top.
    pub fn flip_type(&mut self, id: NodeId, upper_first: bool) {
        match self.tree.node_type(id) {
            Some(NodeType::P) => {
                self.tree.set_type(id, NodeType::S);
                if !upper_first {
                    self.tree.children_mut(id).swap(0, 1);
                }
            }
            Some(NodeType::S) => self.tree.set_type(id, NodeType::P),
            None => {}
        }
    }

    /// Regraft targets for moving the subtree at `moved`: every node outside
    /// that subtree, each naming the edge above it.
    pub fn global_targets(&self, moved: NodeId) -> Vec<NodeId> {
        self.tree
            .node_ids()
            .filter(|&i| !self.tree.is_ancestor_or_self(moved, i))
            .collect()
    }

    /// Edges adjacent to the pruned position of `moved`: the edge above its
    /// grandparent, the edges below its sibling, and the grandparent's other
    /// child. Empty for the root.
    pub fn local_targets(&self, moved: NodeId) -> Vec<NodeId> {
        let Some(e1) = self.tree.parent(moved) else { return Vec::new() };
        let s = self.sibling(moved);
        let mut out = Vec::with_capacity(4);
        if let Some(g) = self.tree.parent(e1) {
            out.push(g);
            out.push(self.sibling(e1));
        }
        out.extend_from_slice(self.tree.children(s));
        out
    }

    /// Subtree prune and regraft: detach `moved` together with its parent,
    /// let the sibling take the parent's slot, then reinsert the parent into
    /// the edge above `target`. Targets equal to the parent or the sibling
    /// name the edge that remains after pruning. `upper_first` orders the
    /// parent's two children (moved subtree on top when true).
    ///
    /// Returns `None` when `moved` is the root or `target` lies inside the
    /// moved subtree.
    pub fn spr(&self, moved: NodeId, target: NodeId, upper_first: bool) -> Option<Bdt> {
        let mut t = self.clone();
        t.spr_in_place(moved, target, upper_first).then_some(t)
    }

    pub fn spr_in_place(&mut self, moved: NodeId, target: NodeId, upper_first: bool) -> bool {
        let tree = &mut self.tree;
        let Some(e1) = tree.parent(moved) else { return false };
        if !tree.contains(target) || tree.is_ancestor_or_self(moved, target) {
            return false;
        }
        let s = {
            let k = tree.children(e1);
            if k[0] == moved {
                k[1]
            } else {
                k[0]
            }
        };
        let t2 = if target == e1 { s } else { target };
        tree.replace_in_parent(e1, s);
        tree.replace_in_parent(t2, e1);
        let kids = if upper_first { vec![moved, t2] } else { vec![t2, moved] };
        tree.set_children(e1, kids);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn s(children: Vec<NestedTree>) -> NestedTree {
        NestedTree::S { children }
    }
    fn p(children: Vec<NestedTree>) -> NestedTree {
        NestedTree::P { children }
    }
    fn l(a: Actor) -> NestedTree {
        NestedTree::leaf(a)
    }

    /// A BDT for the five-actor example order 1 > {2, 3 > 4} > 5.
    fn t0() -> Bdt {
        Bdt::from_nested(&s(vec![l(1), s(vec![p(vec![l(2), s(vec![l(3), l(4)])]), l(5)])])).unwrap()
    }

    fn v0() -> PartialOrder {
        PartialOrder::from_edges(&[1, 2, 3, 4, 5], &[(1, 2), (1, 3), (3, 4), (4, 5), (2, 5)]).unwrap()
    }

    #[test]
    fn t0_maps_to_v0() {
        assert_eq!(t0().to_vsp(), v0());
    }

    #[test]
    fn single_s_node_is_a_chain() {
        let t = Bdt::from_nested(&s(vec![l(1), l(2)])).unwrap();
        assert_eq!(t.to_vsp(), PartialOrder::chain(&[1, 2]).unwrap());
    }

    #[test]
    fn all_p_tree_is_empty_order() {
        let t = Bdt::from_nested(&p(vec![p(vec![l(1), l(2)]), p(vec![l(3), l(4)])])).unwrap();
        assert_eq!(t.to_vsp(), PartialOrder::empty(&[1, 2, 3, 4]).unwrap());
    }

    #[test]
    fn non_binary_rejected() {
        let err = Bdt::from_nested(&p(vec![l(1), l(2), l(3)])).unwrap_err();
        assert!(matches!(err, TreeError::BadArity { .. }));
    }

    #[test]
    fn insertion_edge_count() {
        let t = t0();
        assert_eq!(t.insertion_edges().len(), 2 * 5 - 1);
    }

    #[test]
    fn insert_then_delete_restores_tree() {
        let t = t0();
        for e in t.insertion_edges() {
            for d in TypeDraw::ALL {
                let u = t.leaf_insert(e, 9, d).unwrap();
                assert_eq!(u.n(), 6);
                assert_eq!(u.leaf_delete(9).unwrap().to_nested(), t.to_nested());
            }
        }
    }

    #[test]
    fn insert_errors() {
        let t = t0();
        assert_eq!(t.leaf_insert(0, 3, TypeDraw::P).unwrap_err(), TreeError::ActorPresent(3));
        assert_eq!(t.leaf_insert(99, 8, TypeDraw::P).unwrap_err(), TreeError::EdgeNotFound(99));
    }

    #[test]
    fn delete_five_restricts_order() {
        let t = t0().leaf_delete(5).unwrap();
        assert_eq!(t.to_vsp(), v0().restrict(&[1, 2, 3, 4]).unwrap());
    }

    #[test]
    fn delete_errors_and_two_leaf_case() {
        let t = Bdt::from_nested(&s(vec![l(1), l(2)])).unwrap();
        let one = t.leaf_delete(1).unwrap();
        assert_eq!(one.to_nested(), l(2));
        assert_eq!(one.leaf_delete(2).unwrap_err(), TreeError::LastActor);
        assert_eq!(t.leaf_delete(7).unwrap_err(), TreeError::UnknownActor(7));
    }

    #[test]
    fn clusters_of_t0() {
        let c = t0().clusters();
        assert_eq!(c.s_cluster_sizes, vec![1, 2]);
        assert_eq!(c.p_cluster_sizes, vec![1]);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn clusters_all_p() {
        let t = Bdt::from_nested(&p(vec![p(vec![l(1), l(2)]), p(vec![l(3), l(4)])])).unwrap();
        assert_eq!(t.clusters().p_cluster_sizes, vec![3]);
        assert!(t.clusters().s_cluster_sizes.is_empty());
    }

    #[test]
    fn enumerate_counts() {
        // (2n-3)!! * 3^(n-1)
        for (n, expected) in [(1, 1), (2, 3), (3, 27), (4, 405)] {
            let actors: Vec<Actor> = (1..=n).collect();
            let all = Bdt::enumerate_all(&actors).unwrap();
            assert_eq!(all.len(), expected);
            let keys: HashSet<_> = all.iter().map(|t| t.key()).collect();
            assert_eq!(keys.len(), expected);
        }
    }

    #[test]
    fn enumeration_multiplicities_at_n3() {
        let all = Bdt::enumerate_all(&[1, 2, 3]).unwrap();
        let count = |po: &PartialOrder| all.iter().filter(|t| &t.to_vsp() == po).count();
        assert_eq!(count(&PartialOrder::empty(&[1, 2, 3]).unwrap()), 3);
        assert_eq!(count(&PartialOrder::chain(&[1, 2, 3]).unwrap()), 2);
    }

    #[test]
    fn collapse_left_comb() {
        let t = Bdt::from_nested(&s(vec![s(vec![l(1), l(2)]), l(3)])).unwrap();
        let m = t.collapse();
        assert_eq!(m.to_nested(), s(vec![l(1), l(2), l(3)]));
        assert_eq!(m.to_vsp(), t.to_vsp());
    }

    #[test]
    fn spr_moves_subtree() {
        let t = t0();
        let leaf2 = t.tree().leaf_of(2).unwrap();
        let leaf5 = t.tree().leaf_of(5).unwrap();
        // The pruned parent is a P node, so 2 lands beside 5: 1 > 3 > 4 > {2, 5}.
        let u = t.spr(leaf2, leaf5, true).unwrap();
        let expected = PartialOrder::from_edges(&[1, 2, 3, 4, 5], &[(1, 3), (3, 4), (4, 2), (4, 5)]).unwrap();
        assert_eq!(u.to_vsp(), expected);
        Bdt::from_tree(u.tree().clone()).unwrap();
        assert!(t.spr(t.tree().root(), leaf5, true).is_none());
    }

    #[test]
    fn spr_inverse_restores_topology() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = Bdt::sample_prior(7, 0.5, &mut rng).unwrap();
            let ids: Vec<_> = t.tree().node_ids().filter(|&i| i != t.tree().root()).collect();
            let moved = ids[rng.random_range(0..ids.len())];
            let e1 = t.tree().parent(moved).unwrap();
            let s0 = t.sibling(moved);
            let upper = t.tree().children(e1)[0] == moved;
            let targets = t.global_targets(moved);
            let target = targets[rng.random_range(0..targets.len())];
            let u = t.spr(moved, target, rng.random()).unwrap();
            Bdt::from_tree(u.tree().clone()).unwrap();
            let back = u.spr(moved, s0, upper).unwrap();
            assert_eq!(back.key(), t.key());
        }
    }

    #[test]
    fn local_move_reverse_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t = Bdt::sample_prior(8, 0.5, &mut rng).unwrap();
            let ids: Vec<_> = t.tree().node_ids().filter(|&i| i != t.tree().root()).collect();
            let moved = ids[rng.random_range(0..ids.len())];
            let s0 = t.sibling(moved);
            let targets = t.local_targets(moved);
            if targets.is_empty() {
                continue;
            }
            let target = targets[rng.random_range(0..targets.len())];
            let u = t.spr(moved, target, true).unwrap();
            assert!(u.local_targets(moved).contains(&s0));
        }
    }

    #[test]
    fn prior_sample_is_valid_vsp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..9 {
            let t = Bdt::sample_prior(n, 0.4, &mut rng).unwrap();
            assert_eq!(t.tree().actors(), (0..n).collect::<Vec<_>>());
            Bdt::from_tree(t.tree().clone()).unwrap();
            let v = t.to_vsp();
            assert!(v.is_vsp());
            assert_eq!(t.tree().depth(), v.depth());
        }
    }

    #[test]
    fn flip_type_round_trip() {
        let t = Bdt::from_nested(&p(vec![l(1), l(2)])).unwrap();
        let mut u = t.clone();
        let r = u.tree().root();
        u.flip_type(r, false);
        assert_eq!(u.to_vsp(), PartialOrder::chain(&[2, 1]).unwrap());
        u.flip_type(r, true);
        assert_eq!(u.to_vsp(), t.to_vsp());
    }
}
