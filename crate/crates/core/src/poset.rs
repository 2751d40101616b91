//! Partial orders stored as dense, transitively closed relation matrices.
//!
//! Besides the basic relation algebra (closure, reduction, restriction, depth)
//! this module carries the exhaustive oracles used to validate the faster
//! tree-based machinery at small `n`: linear-extension enumeration, labelled
//! poset enumeration and the forbidden-subgraph VSP test.

use std::collections::VecDeque;
use std::fmt;

use fixedbitset::FixedBitSet;
use thiserror::Error;

/// Actor identifier. Ground sets are arbitrary sets of actor ids.
pub type Actor = usize;

/// Default bound for brute-force linear-extension enumeration.
pub const LE_ORACLE_BOUND: usize = 10;

/// Largest ground set accepted by [`enumerate_posets`].
pub const POSET_ORACLE_BOUND: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PosetError {
    #[error("relation contains a cycle through actor {0}")]
    CycleDetected(Actor),
    #[error("relation matrix is not square ({rows} rows, row {row} has {len} entries)")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("unknown actor {0}")]
    UnknownActor(Actor),
    #[error("actor {0} appears more than once")]
    DuplicateActor(Actor),
    #[error("oracle bound exceeded: n = {n} > {bound}")]
    OracleBoundExceeded { n: usize, bound: usize },
}

/// An ordered sequence of distinct actors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActorSubset(Vec<Actor>);

impl ActorSubset {
    pub fn new(actors: Vec<Actor>) -> Result<Self, PosetError> {
        let mut sorted = actors.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(PosetError::DuplicateActor(w[0]));
        }
        Ok(Self(actors))
    }

    pub fn as_slice(&self) -> &[Actor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<Actor> {
        self.0
    }
}

/// A strict partial order over a set of actors.
///
/// Labels are kept sorted; `rows[i]` has bit `j` set iff `labels[i] ≻ labels[j]`.
/// Two orders compare equal iff they have the same ground set and relations.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PartialOrder {
    labels: Vec<Actor>,
    rows: Vec<FixedBitSet>,
}

impl fmt::Debug for PartialOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialOrder")
            .field("labels", &self.labels)
            .field("relations", &self.relations())
            .finish()
    }
}

impl PartialOrder {
    /// The empty (antichain) order on `labels`.
    pub fn empty(labels: &[Actor]) -> Result<Self, PosetError> {
        let mut labels = labels.to_vec();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(PosetError::DuplicateActor(w[0]));
        }
        let n = labels.len();
        Ok(Self {
            labels,
            rows: vec![FixedBitSet::with_capacity(n); n],
        })
    }

    /// Closes the relation generated by `edges` (`(a, b)` meaning `a ≻ b`).
    pub fn from_edges(labels: &[Actor], edges: &[(Actor, Actor)]) -> Result<Self, PosetError> {
        let mut po = Self::empty(labels)?;
        for &(a, b) in edges {
            let i = po.index_of(a).ok_or(PosetError::UnknownActor(a))?;
            let j = po.index_of(b).ok_or(PosetError::UnknownActor(b))?;
            if i == j {
                return Err(PosetError::CycleDetected(a));
            }
            po.rows[i].insert(j);
        }
        po.close()?;
        Ok(po)
    }

    /// The total order `chain[0] ≻ chain[1] ≻ ...`.
    pub fn chain(chain: &[Actor]) -> Result<Self, PosetError> {
        let edges: Vec<_> = chain.windows(2).map(|w| (w[0], w[1])).collect();
        Self::from_edges(chain, &edges)
    }

    /// Builds an order whose relation is already closed. Used by tree maps,
    /// which produce closed relations by construction.
    pub(crate) fn from_closed_rows(labels: Vec<Actor>, rows: Vec<FixedBitSet>) -> Self {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        Self { labels, rows }
    }

    fn close(&mut self) -> Result<(), PosetError> {
        let order = self.topological_order()?;
        // Reverse topological order: every successor's row is final before it is merged.
        for &i in order.iter().rev() {
            let succ: Vec<usize> = self.rows[i].ones().collect();
            for j in succ {
                let row_j = self.rows[j].clone();
                self.rows[i].union_with(&row_j);
            }
        }
        Ok(())
    }

    /// Kahn's algorithm on the raw relation. Fails on any directed cycle.
    fn topological_order(&self) -> Result<Vec<usize>, PosetError> {
        let n = self.n();
        let mut indeg = vec![0usize; n];
        for row in &self.rows {
            for j in row.ones() {
                indeg[j] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for j in self.rows[i].ones() {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(PosetError::CycleDetected(self.labels[stuck]));
        }
        Ok(order)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Actor] {
        &self.labels
    }

    pub fn index_of(&self, actor: Actor) -> Option<usize> {
        self.labels.binary_search(&actor).ok()
    }

    /// `labels[i] ≻ labels[j]` by position.
    #[inline]
    pub fn above_idx(&self, i: usize, j: usize) -> bool {
        self.rows[i].contains(j)
    }

    /// `a ≻ b` by actor id. Unknown actors are unrelated.
    pub fn is_above(&self, a: Actor, b: Actor) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.above_idx(i, j),
            _ => false,
        }
    }

    /// Neither `a ≻ b` nor `b ≻ a`.
    pub fn incomparable(&self, a: Actor, b: Actor) -> bool {
        a != b && !self.is_above(a, b) && !self.is_above(b, a)
    }

    /// All ordered pairs `(a, b)` with `a ≻ b`, sorted.
    pub fn relations(&self) -> Vec<(Actor, Actor)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for j in row.ones() {
                out.push((self.labels[i], self.labels[j]));
            }
        }
        out
    }

    pub fn relation_count(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones(..)).sum()
    }

    /// Number of actors strictly above `labels[i]`.
    pub fn predecessor_count_idx(&self, i: usize) -> usize {
        (0..self.n()).filter(|&k| self.above_idx(k, i)).count()
    }

    /// True iff nothing in the order sits above `actor`.
    pub fn is_maximal(&self, actor: Actor) -> bool {
        match self.index_of(actor) {
            Some(i) => (0..self.n()).all(|k| !self.above_idx(k, i)),
            None => false,
        }
    }

    /// True iff nothing in the order sits below `actor`.
    pub fn is_minimal(&self, actor: Actor) -> bool {
        match self.index_of(actor) {
            Some(i) => self.rows[i].is_clear(),
            None => false,
        }
    }

    /// Boolean matrix view, indexed by label position.
    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.above_idx(i, j)).collect())
            .collect()
    }

    /// The order with every relation reversed.
    pub fn dual(&self) -> PartialOrder {
        let n = self.n();
        let mut rows = vec![FixedBitSet::with_capacity(n); n];
        for (i, row) in self.rows.iter().enumerate() {
            for j in row.ones() {
                rows[j].insert(i);
            }
        }
        Self::from_closed_rows(self.labels.clone(), rows)
    }

    /// Minimal edge set whose closure is this order: `a ≻ b` is kept unless
    /// some `c` has `a ≻ c ≻ b`.
    pub fn transitive_reduction(&self) -> Vec<(Actor, Actor)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in self.rows[i].ones() {
                let implied = self.rows[i].ones().any(|k| k != j && self.above_idx(k, j));
                if !implied {
                    out.push((self.labels[i], self.labels[j]));
                }
            }
        }
        out
    }

    /// Suborder on `subset`; relations are inherited unchanged.
    pub fn restrict(&self, subset: &[Actor]) -> Result<PartialOrder, PosetError> {
        let idx: Vec<usize> = subset
            .iter()
            .map(|&a| self.index_of(a).ok_or(PosetError::UnknownActor(a)))
            .collect::<Result<_, _>>()?;
        let mut pairs: Vec<(Actor, usize)> = subset.iter().copied().zip(idx).collect();
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(PosetError::DuplicateActor(w[0].0));
        }
        let m = pairs.len();
        let mut rows = vec![FixedBitSet::with_capacity(m); m];
        for (a, &(_, i)) in pairs.iter().enumerate() {
            for (b, &(_, j)) in pairs.iter().enumerate() {
                if self.above_idx(i, j) {
                    rows[a].insert(b);
                }
            }
        }
        Ok(Self::from_closed_rows(pairs.into_iter().map(|p| p.0).collect(), rows))
    }

    /// Cardinality of the longest chain (1 for any non-empty order).
    pub fn depth(&self) -> usize {
        let n = self.n();
        if n == 0 {
            return 0;
        }
        // In a closed order the number of predecessors is a topological key.
        let mut order: Vec<usize> = (0..n).collect();
        let preds: Vec<usize> = (0..n).map(|i| self.predecessor_count_idx(i)).collect();
        order.sort_by_key(|&i| preds[i]);
        let mut longest = vec![1usize; n];
        for &i in &order {
            for j in self.rows[i].ones() {
                longest[j] = longest[j].max(longest[i] + 1);
            }
        }
        longest.into_iter().max().unwrap_or(1)
    }

    /// A 4-tuple `(a, b, c, d)` forming the forbidden "N": `a ≻ c`, `a ≻ d`,
    /// `b ≻ d`, with `a ∥ b`, `c ∥ d` and `b ∥ c`.
    pub fn forbidden_witness(&self) -> Option<[Actor; 4]> {
        let n = self.n();
        let unrelated = |x: usize, y: usize| !self.above_idx(x, y) && !self.above_idx(y, x);
        for a in 0..n {
            for d in self.rows[a].ones() {
                for b in 0..n {
                    if b == a || !self.above_idx(b, d) || !unrelated(a, b) {
                        continue;
                    }
                    for c in self.rows[a].ones() {
                        if c != d && c != b && unrelated(c, d) && unrelated(b, c) {
                            let l = &self.labels;
                            return Some([l[a], l[b], l[c], l[d]]);
                        }
                    }
                }
            }
        }
        None
    }

    /// Vertex-series-parallel test: no induced copy of the forbidden "N".
    pub fn is_vsp(&self) -> bool {
        self.forbidden_witness().is_none()
    }

    /// Every linear extension, top first. Exponential; bounded by `bound`.
    pub fn linear_extensions_bounded(&self, bound: usize) -> Result<Vec<Vec<Actor>>, PosetError> {
        let n = self.n();
        if n > bound {
            return Err(PosetError::OracleBoundExceeded { n, bound });
        }
        let mut out = Vec::new();
        let mut remaining_preds: Vec<usize> = (0..n).map(|i| self.predecessor_count_idx(i)).collect();
        let mut used = vec![false; n];
        let mut prefix = Vec::with_capacity(n);
        self.extend_le(&mut remaining_preds, &mut used, &mut prefix, &mut out);
        Ok(out)
    }

    pub fn linear_extensions(&self) -> Result<Vec<Vec<Actor>>, PosetError> {
        self.linear_extensions_bounded(LE_ORACLE_BOUND)
    }

    fn extend_le(
        &self,
        preds: &mut [usize],
        used: &mut [bool],
        prefix: &mut Vec<Actor>,
        out: &mut Vec<Vec<Actor>>,
    ) {
        let n = self.n();
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if used[i] || preds[i] != 0 {
                continue;
            }
            used[i] = true;
            prefix.push(self.labels[i]);
            for j in self.rows[i].ones() {
                preds[j] -= 1;
            }
            self.extend_le(preds, used, prefix, out);
            for j in self.rows[i].ones() {
                preds[j] += 1;
            }
            prefix.pop();
            used[i] = false;
        }
    }

    /// True iff `list` is a permutation of the ground set respecting every relation.
    pub fn is_linear_extension(&self, list: &[Actor]) -> bool {
        if list.len() != self.n() {
            return false;
        }
        let mut pos = vec![usize::MAX; self.n()];
        for (k, &a) in list.iter().enumerate() {
            match self.index_of(a) {
                Some(i) if pos[i] == usize::MAX => pos[i] = k,
                _ => return false,
            }
        }
        self.relations().iter().all(|&(a, b)| {
            pos[self.index_of(a).unwrap()] < pos[self.index_of(b).unwrap()]
        })
    }
}

/// Closure of a raw `n × n` relation over actors `0..n`.
pub fn transitive_closure(matrix: &[Vec<bool>]) -> Result<PartialOrder, PosetError> {
    let n = matrix.len();
    let mut edges = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(PosetError::NotSquare { rows: n, row: i, len: row.len() });
        }
        for (j, &set) in row.iter().enumerate() {
            if set {
                edges.push((i, j));
            }
        }
    }
    let labels: Vec<Actor> = (0..n).collect();
    PartialOrder::from_edges(&labels, &edges)
}

/// Every labelled partial order on actors `0..n`, `n ≤ 5`.
///
/// Enumerates irreflexive antisymmetric relations (three states per unordered
/// pair) and keeps those already equal to their closure.
pub fn enumerate_posets(n: usize) -> Result<Vec<PartialOrder>, PosetError> {
    if n > POSET_ORACLE_BOUND {
        return Err(PosetError::OracleBoundExceeded { n, bound: POSET_ORACLE_BOUND });
    }
    let labels: Vec<Actor> = (0..n).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut rows = vec![FixedBitSet::with_capacity(n); n];
        for &(i, j) in &pairs {
            match c % 3 {
                1 => rows[i].insert(j),
                2 => rows[j].insert(i),
                _ => {}
            }
            c /= 3;
        }
        let transitive = (0..n).all(|i| {
            rows[i]
                .ones()
                .all(|j| rows[j].is_subset(&rows[i]))
        });
        if transitive {
            out.push(PartialOrder::from_closed_rows(labels.clone(), rows));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fig. 1 order on actors 1..5.
    pub(crate) fn v0() -> PartialOrder {
        PartialOrder::from_edges(&[1, 2, 3, 4, 5], &[(1, 2), (1, 3), (3, 4), (4, 5), (2, 5)]).unwrap()
    }

    fn n_shape() -> PartialOrder {
        PartialOrder::from_edges(&[1, 2, 3, 4], &[(1, 3), (1, 4), (2, 4)]).unwrap()
    }

    #[test]
    fn closure_of_chain_adds_implied_edge() {
        let m = vec![
            vec![false, true, false],
            vec![false, false, true],
            vec![false, false, false],
        ];
        let po = transitive_closure(&m).unwrap();
        assert_eq!(po.relations(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn closure_of_empty_matrix_is_empty() {
        let po = transitive_closure(&vec![vec![false; 4]; 4]).unwrap();
        assert_eq!(po.relation_count(), 0);
        assert_eq!(po.n(), 4);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let m = vec![vec![false, true], vec![true, false]];
        assert!(matches!(transitive_closure(&m), Err(PosetError::CycleDetected(_))));
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let m = vec![vec![false, true], vec![false]];
        assert!(matches!(transitive_closure(&m), Err(PosetError::NotSquare { .. })));
    }

    #[test]
    fn reduction_examples() {
        let chain = PartialOrder::chain(&[1, 2, 3]).unwrap();
        assert_eq!(chain.transitive_reduction(), vec![(1, 2), (2, 3)]);
        let mut red = v0().transitive_reduction();
        red.sort();
        assert_eq!(red, vec![(1, 2), (1, 3), (2, 5), (3, 4), (4, 5)]);
        assert!(PartialOrder::empty(&[1, 2, 3]).unwrap().transitive_reduction().is_empty());
    }

    #[test]
    fn restriction_examples() {
        let v = v0();
        assert_eq!(v.restrict(&[3, 4]).unwrap(), PartialOrder::chain(&[3, 4]).unwrap());
        assert_eq!(v.restrict(&[1, 2, 5]).unwrap(), PartialOrder::chain(&[1, 2, 5]).unwrap());
        assert_eq!(v.restrict(&[5, 4, 3, 2, 1]).unwrap(), v);
        assert_eq!(v.restrict(&[1, 9]), Err(PosetError::UnknownActor(9)));
    }

    #[test]
    fn depth_examples() {
        assert_eq!(v0().depth(), 4);
        assert_eq!(PartialOrder::empty(&[7]).unwrap().depth(), 1);
        assert_eq!(PartialOrder::empty(&[0, 1, 2, 3, 4, 5, 6]).unwrap().depth(), 1);
    }

    #[test]
    fn vsp_examples() {
        assert!(!n_shape().is_vsp());
        assert_eq!(n_shape().forbidden_witness(), Some([1, 2, 3, 4]));
        assert!(v0().is_vsp());
        for po in enumerate_posets(3).unwrap() {
            assert!(po.is_vsp());
        }
    }

    #[test]
    fn linear_extension_examples() {
        let mut les = v0().linear_extensions().unwrap();
        les.sort();
        assert_eq!(
            les,
            vec![vec![1, 2, 3, 4, 5], vec![1, 3, 2, 4, 5], vec![1, 3, 4, 2, 5]]
        );
        assert_eq!(PartialOrder::chain(&[4, 2, 9, 1]).unwrap().linear_extensions().unwrap().len(), 1);
        assert_eq!(PartialOrder::empty(&[0, 1, 2]).unwrap().linear_extensions().unwrap().len(), 6);
        let big = PartialOrder::empty(&(0..11).collect::<Vec<_>>()).unwrap();
        assert!(matches!(
            big.linear_extensions(),
            Err(PosetError::OracleBoundExceeded { n: 11, bound: 10 })
        ));
    }

    #[test]
    fn poset_counts() {
        assert_eq!(enumerate_posets(1).unwrap().len(), 1);
        assert_eq!(enumerate_posets(2).unwrap().len(), 3);
        assert_eq!(enumerate_posets(3).unwrap().len(), 19);
        assert_eq!(enumerate_posets(4).unwrap().len(), 219);
        assert!(enumerate_posets(6).is_err());
    }

    #[test]
    fn actor_subset_rejects_duplicates() {
        assert_eq!(ActorSubset::new(vec![1, 2, 1]), Err(PosetError::DuplicateActor(1)));
        assert_eq!(ActorSubset::new(vec![3, 1]).unwrap().as_slice(), &[3, 1]);
    }

    #[test]
    fn dual_reverses_relations() {
        let d = v0().dual();
        assert!(d.is_above(5, 1));
        assert!(!d.is_above(1, 5));
        assert_eq!(d.dual(), v0());
    }
}
