//! Linear-extension counting on decomposition trees.
//!
//! Series nodes multiply child counts; parallel nodes additionally multiply by
//! the multinomial coefficient of the child sizes. The whole count is thus a
//! ratio of factorials, which is evaluated exactly through prime exponents.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::factorial::ln_factorial;

use crate::poset::Actor;
use crate::tree::{NodeType, SpTree};

/// Exact count together with its natural log.
#[derive(Debug, Clone, PartialEq)]
pub struct LeCount {
    pub value: BigUint,
    /// `-inf` when `value` is zero.
    pub log_value: f64,
}

impl LeCount {
    pub fn zero() -> Self {
        Self { value: BigUint::zero(), log_value: f64::NEG_INFINITY }
    }

    pub fn from_value(value: BigUint) -> Self {
        let log_value = ln_biguint(&value);
        Self { value, log_value }
    }
}

/// Natural log of a big integer, `-inf` for zero.
pub fn ln_biguint(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Net exponent of `k!` in the count, for every `k` that appears.
fn factorial_exponents(tree: &SpTree) -> Vec<i64> {
    let sizes = tree.subtree_sizes();
    let mut fc = vec![0i64; tree.n() + 1];
    for id in tree.node_ids() {
        if tree.node_type(id) == Some(NodeType::P) {
            fc[sizes[id]] += 1;
            for &c in tree.children(id) {
                fc[sizes[c]] -= 1;
            }
        }
    }
    fc
}

/// Number of linear extensions of the order a decomposition tree represents.
pub fn count_le(tree: &SpTree) -> LeCount {
    let fc = factorial_exponents(tree);
    let log_value = fc
        .iter()
        .enumerate()
        .filter(|&(_, &e)| e != 0)
        .map(|(k, &e)| e as f64 * ln_factorial(k as u64))
        .sum();
    LeCount { value: factorial_ratio(&fc), log_value }
}

/// Log count only; skips the big-integer product.
pub fn log_count_le(tree: &SpTree) -> f64 {
    factorial_exponents(tree)
        .iter()
        .enumerate()
        .filter(|&(_, &e)| e != 0)
        .map(|(k, &e)| e as f64 * ln_factorial(k as u64))
        .sum()
}

/// `prod_k (k!)^fc[k]`, known to be a positive integer.
fn factorial_ratio(fc: &[i64]) -> BigUint {
    let n = fc.len().saturating_sub(1);
    if n < 2 {
        return BigUint::one();
    }
    // j contributes to every k! with k >= j.
    let mut weight = vec![0i64; n + 2];
    for j in (0..=n).rev() {
        weight[j] = weight[j + 1] + fc[j];
    }
    let spf = smallest_prime_factors(n);
    let mut exp = vec![0i64; n + 1];
    for (j, &w) in weight.iter().enumerate().take(n + 1).skip(2) {
        if w == 0 {
            continue;
        }
        let mut m = j;
        while m > 1 {
            let p = spf[m];
            m /= p;
            exp[p] += w;
        }
    }
    let mut factors: Vec<BigUint> = Vec::new();
    for (p, &e) in exp.iter().enumerate() {
        assert!(e >= 0, "count is not an integer");
        if e > 0 {
            factors.push(BigUint::from(p).pow(e as u32));
        }
    }
    product_tree(factors)
}

fn smallest_prime_factors(n: usize) -> Vec<usize> {
    let mut spf: Vec<usize> = (0..=n).collect();
    let mut i = 2;
    while i * i <= n {
        if spf[i] == i {
            let mut j = i * i;
            while j <= n {
                if spf[j] == j {
                    spf[j] = i;
                }
                j += i;
            }
        }
        i += 1;
    }
    spf
}

/// Balanced product so the large multiplications happen between similarly
/// sized operands.
fn product_tree(mut xs: Vec<BigUint>) -> BigUint {
    if xs.is_empty() {
        return BigUint::one();
    }
    while xs.len() > 1 {
        let mut next = Vec::with_capacity(xs.len().div_ceil(2));
        let mut it = xs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a * b),
                None => next.push(a),
            }
        }
        xs = next;
    }
    xs.pop().unwrap()
}

/// `T_i`: linear extensions with actor `i` first (zero unless `i` is maximal).
pub fn top_counts(tree: &SpTree) -> BTreeMap<Actor, LeCount> {
    end_counts(tree, true)
}

/// `B_i`: linear extensions with actor `i` last (zero unless `i` is minimal).
pub fn bottom_counts(tree: &SpTree) -> BTreeMap<Actor, LeCount> {
    end_counts(tree, false)
}

fn end_counts(tree: &SpTree, top: bool) -> BTreeMap<Actor, LeCount> {
    let mut out = BTreeMap::new();
    for leaf in tree.leaf_ids() {
        let actor = tree.actor(leaf).unwrap();
        let extreme = if top { tree.is_maximal(leaf) } else { tree.is_minimal(leaf) };
        let c = if !extreme {
            LeCount::zero()
        } else if tree.n() == 1 {
            LeCount::from_value(BigUint::one())
        } else {
            let mut rest = tree.clone();
            rest.remove_actor(actor).expect("actor present, n >= 2");
            count_le(&rest)
        };
        out.insert(actor, c);
    }
    out
}

#[derive(Debug, Clone)]
enum CNode {
    Leaf(usize),
    Series(Vec<usize>),
    Parallel(Vec<usize>),
}

/// The tree restricted to the members of one list, for repeated log-count
/// queries on subsets of those members.
///
/// Members are addressed by their position in the list. Nodes are stored
/// children-first, so a single forward pass evaluates a query.
#[derive(Debug, Clone)]
pub struct SubsetCounter {
    nodes: Vec<CNode>,
    k: usize,
    above: Vec<Vec<bool>>,
    ln_fact: Vec<f64>,
}

impl SubsetCounter {
    /// `members[pos]` is the actor at list position `pos`. Actors missing
    /// from the tree are an error reported as the first such actor.
    pub fn new(tree: &SpTree, members: &[Actor]) -> Result<Self, Actor> {
        let pos: HashMap<Actor, usize> = members.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let mut found = vec![false; members.len()];
        let mut nodes = Vec::with_capacity(2 * members.len());
        // compact[id]: index in `nodes` of the surviving node for tree node id.
        let mut compact: Vec<Option<usize>> = vec![None; tree.node_ids().last().map_or(0, |i| i + 1)];
        for id in tree.postorder() {
            compact[id] = match tree.actor(id) {
                Some(a) => pos.get(&a).map(|&p| {
                    found[p] = true;
                    nodes.push(CNode::Leaf(p));
                    nodes.len() - 1
                }),
                None => {
                    let kids: Vec<usize> = tree.children(id).iter().filter_map(|&c| compact[c]).collect();
                    match kids.len() {
                        0 => None,
                        1 => Some(kids[0]),
                        _ => {
                            nodes.push(match tree.node_type(id) {
                                Some(NodeType::S) => CNode::Series(kids),
                                _ => CNode::Parallel(kids),
                            });
                            Some(nodes.len() - 1)
                        }
                    }
                }
            };
        }
        if let Some(p) = found.iter().position(|f| !f) {
            return Err(members[p]);
        }
        let k = members.len();
        let mut above = vec![vec![false; k]; k];
        let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match node {
                CNode::Leaf(p) => leaves[i] = vec![*p],
                CNode::Series(kids) | CNode::Parallel(kids) => {
                    if let CNode::Series(_) = node {
                        for (a, &hi) in kids.iter().enumerate() {
                            for &lo in &kids[a + 1..] {
                                for &x in &leaves[hi] {
                                    for &y in &leaves[lo] {
                                        above[x][y] = true;
                                    }
                                }
                            }
                        }
                    }
                    let mut all = Vec::new();
                    for &c in kids {
                        all.append(&mut leaves[c]);
                    }
                    leaves[i] = all;
                }
            }
        }
        let ln_fact = (0..=k).map(|i| ln_factorial(i as u64)).collect();
        Ok(Self { nodes, k, above, ln_fact })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Whether the member at position `a` lies above the one at `b`.
    pub fn above(&self, a: usize, b: usize) -> bool {
        self.above[a][b]
    }

    /// Log number of linear extensions of the sub-order on the positions
    /// flagged in `include`. The empty set has one extension.
    pub fn log_count(&self, include: &[bool]) -> f64 {
        let mut size = vec![0usize; self.nodes.len()];
        let mut logc = vec![0.0f64; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                CNode::Leaf(p) => size[i] = usize::from(include[*p]),
                CNode::Series(kids) => {
                    size[i] = kids.iter().map(|&c| size[c]).sum();
                    logc[i] = kids.iter().map(|&c| logc[c]).sum();
                }
                CNode::Parallel(kids) => {
                    let s: usize = kids.iter().map(|&c| size[c]).sum();
                    let mut l = self.ln_fact[s];
                    for &c in kids {
                        l += logc[c] - self.ln_fact[size[c]];
                    }
                    size[i] = s;
                    logc[i] = l;
                }
            }
        }
        logc.last().copied().unwrap_or(0.0)
    }

    /// Log count for the contiguous positions `a..=b`.
    pub fn log_count_interval(&self, a: usize, b: usize) -> f64 {
        let include: Vec<bool> = (0..self.k).map(|i| a <= i && i <= b).collect();
        self.log_count(&include)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{Bdt, Mdt, NestedTree};
    use num_traits::FromPrimitive;

    fn s(children: Vec<NestedTree>) -> NestedTree {
        NestedTree::S { children }
    }
    fn p(children: Vec<NestedTree>) -> NestedTree {
        NestedTree::P { children }
    }
    fn l(a: Actor) -> NestedTree {
        NestedTree::leaf(a)
    }

    fn v0_tree() -> SpTree {
        SpTree::from_nested(&s(vec![l(1), p(vec![l(2), s(vec![l(3), l(4)])]), l(5)]))
    }

    fn big(v: u64) -> BigUint {
        BigUint::from_u64(v).unwrap()
    }

    #[test]
    fn v0_has_three() {
        assert_eq!(count_le(&v0_tree()).value, big(3));
    }

    #[test]
    fn empty_order_is_factorial() {
        let t = SpTree::from_nested(&p(vec![l(1), l(2), l(3), l(4)]));
        assert_eq!(count_le(&t).value, big(24));
    }

    #[test]
    fn chain_beside_singleton() {
        let t = SpTree::from_nested(&p(vec![s(vec![l(1), l(2)]), l(3)]));
        assert_eq!(count_le(&t).value, big(3));
    }

    #[test]
    fn total_order_is_one() {
        let t = SpTree::from_nested(&s(vec![l(1), l(2), l(3), l(4)]));
        let c = count_le(&t);
        assert_eq!(c.value, big(1));
        assert_eq!(c.log_value, 0.0);
    }

    #[test]
    fn binary_and_multi_trees_agree() {
        let m = Mdt::from_nested(&s(vec![l(1), p(vec![l(2), l(3), l(4)]), l(5), l(6)])).unwrap();
        let b: Bdt = m.to_bdt();
        assert_eq!(count_le(m.tree()), count_le(b.tree()));
        assert_eq!(count_le(m.tree()).value, big(6));
    }

    #[test]
    fn large_factorial_log_matches() {
        let leaves: Vec<NestedTree> = (0..300).map(l).collect();
        let c = count_le(&SpTree::from_nested(&p(leaves)));
        assert!((c.log_value - ln_factorial(300)).abs() < 1e-9);
        assert!((ln_biguint(&c.value) - c.log_value).abs() / c.log_value < 1e-12);
    }

    #[test]
    fn v0_top_and_bottom() {
        let t = top_counts(&v0_tree());
        assert_eq!(t[&1].value, big(3));
        for a in 2..=5 {
            assert!(t[&a].value.is_zero());
        }
        let b = bottom_counts(&v0_tree());
        assert_eq!(b[&5].value, big(3));
        assert!(b[&1].value.is_zero());
    }

    #[test]
    fn empty_order_ends() {
        let t = SpTree::from_nested(&p(vec![l(1), l(2), l(3)]));
        for c in top_counts(&t).values().chain(bottom_counts(&t).values()) {
            assert_eq!(c.value, big(2));
        }
    }

    #[test]
    fn subset_counter_matches_restriction() {
        let t = v0_tree();
        let sc = SubsetCounter::new(&t, &[5, 2, 1]).unwrap();
        assert_eq!(sc.len(), 3);
        assert!(sc.above(2, 1));
        assert!(sc.above(1, 0));
        assert!(!sc.above(0, 2));
        assert_eq!(sc.log_count(&[true, true, true]), 0.0);
        let sc = SubsetCounter::new(&t, &[2, 3, 4]).unwrap();
        assert!((sc.log_count(&[true, true, true]) - 3f64.ln()).abs() < 1e-15);
        assert!((sc.log_count_interval(0, 1) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(sc.log_count(&[false, false, false]), 0.0);
        assert_eq!(SubsetCounter::new(&t, &[1, 9]).unwrap_err(), 9);
    }
}
