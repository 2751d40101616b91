//! Queue-jumping observation models for rank lists.
//!
//! A list is built one placement at a time. Under QJ-U each placement takes
//! the next position from the top; under QJ-D from the bottom; under QJ-B the
//! top is used with probability `phi`. The placed actor is uniform over the
//! remaining actors with probability `p` and otherwise the extreme element of
//! a uniformly random linear extension of the remaining sub-order.

use std::collections::{BTreeSet, HashSet};

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counting::{bottom_counts, count_le, top_counts, SubsetCounter};
use crate::poset::{Actor, ActorSubset};
use crate::tree::SpTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObsError {
    #[error("list actors do not match the order's actors")]
    ActorMismatch,
    #[error("actor {0} is not in the order")]
    UnknownActor(Actor),
    #[error("actor {0} appears twice in one list")]
    DuplicateInList(Actor),
    #[error("empty list")]
    EmptyList,
    #[error("actor id {0} declared twice")]
    DuplicateActorId(Actor),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObsModel {
    #[serde(rename = "qj-u")]
    QjU,
    #[serde(rename = "qj-d")]
    QjD,
    #[serde(rename = "qj-b")]
    QjB,
}

impl ObsModel {
    /// Whether `phi` affects the likelihood.
    pub fn uses_phi(self) -> bool {
        self == ObsModel::QjB
    }
}

/// One observed ordering, top first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Actor>", into = "Vec<Actor>")]
pub struct RankList {
    order: Vec<Actor>,
}

impl RankList {
    pub fn new(order: Vec<Actor>) -> Result<Self, ObsError> {
        if order.is_empty() {
            return Err(ObsError::EmptyList);
        }
        let mut seen = HashSet::with_capacity(order.len());
        for &a in &order {
            if !seen.insert(a) {
                return Err(ObsError::DuplicateInList(a));
            }
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[Actor] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The list's actors in list order.
    pub fn membership(&self) -> ActorSubset {
        ActorSubset::new(self.order.clone()).expect("validated distinct")
    }
}

impl TryFrom<Vec<Actor>> for RankList {
    type Error = ObsError;
    fn try_from(v: Vec<Actor>) -> Result<Self, ObsError> {
        RankList::new(v)
    }
}

impl From<RankList> for Vec<Actor> {
    fn from(l: RankList) -> Self {
        l.order
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorInfo {
    pub id: Actor,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub group: String,
}

impl ActorInfo {
    pub fn anonymous(id: Actor) -> Self {
        Self { id, name: format!("actor {id}"), group: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankDataset {
    pub actors: Vec<ActorInfo>,
    pub lists: Vec<RankList>,
}

impl RankDataset {
    /// Checks ids are unique and every list member is declared.
    pub fn new(actors: Vec<ActorInfo>, lists: Vec<RankList>) -> Result<Self, ObsError> {
        let ds = Self { actors, lists };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), ObsError> {
        let mut ids = HashSet::new();
        for a in &self.actors {
            if !ids.insert(a.id) {
                return Err(ObsError::DuplicateActorId(a.id));
            }
        }
        for l in &self.lists {
            if let Some(&a) = l.order().iter().find(|a| !ids.contains(a)) {
                return Err(ObsError::UnknownActor(a));
            }
        }
        Ok(())
    }

    /// Sorted actor ids.
    pub fn actor_ids(&self) -> Vec<Actor> {
        let s: BTreeSet<Actor> = self.actors.iter().map(|a| a.id).collect();
        s.into_iter().collect()
    }

    pub fn actor(&self, id: Actor) -> Option<&ActorInfo> {
        self.actors.iter().find(|a| a.id == id)
    }

    /// Hex SHA-256 of the dataset's canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("dataset serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Placement directions for one list: `z[k]` true means the `k`-th placement
/// went to the top. Positions are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementState {
    pub z: Vec<bool>,
}

impl PlacementState {
    /// Number of top placements among the first `k` (1-based `k`).
    pub fn up(&self, k: usize) -> usize {
        self.z[..k].iter().filter(|&&b| b).count()
    }

    /// Position reached from the bottom after the first `k` placements.
    pub fn down(&self, k: usize) -> usize {
        let n = self.z.len() + 1;
        n + 1 - self.z[..k].iter().filter(|&&b| !b).count()
    }

    /// Position filled by each placement, the forced last one included.
    pub fn positions(&self) -> Vec<usize> {
        let n = self.z.len() + 1;
        let mut out: Vec<usize> = (1..n)
            .map(|k| if self.z[k - 1] { self.up(k) } else { self.down(k) })
            .collect();
        out.push(self.up(n - 1) + 1);
        out
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log of `p/m + (1-p) r`, with `r` the probability under the order.
fn ln_factor(p: f64, m: usize, r: f64) -> f64 {
    (p / m as f64 + (1.0 - p) * r).ln()
}

/// Likelihood evaluation for one list against a tree that may contain more
/// actors than the list.
struct ListEval {
    sc: SubsetCounter,
    k: usize,
}

impl ListEval {
    fn new(tree: &SpTree, x: &[Actor]) -> Result<Self, ObsError> {
        let sc = SubsetCounter::new(tree, x).map_err(ObsError::UnknownActor)?;
        Ok(Self { k: x.len(), sc })
    }

    fn log_count(&self, a: usize, b: usize) -> f64 {
        self.sc.log_count_interval(a, b)
    }

    fn max_in(&self, i: usize, a: usize, b: usize) -> bool {
        (a..=b).all(|c| !self.sc.above(c, i))
    }

    fn min_in(&self, i: usize, a: usize, b: usize) -> bool {
        (a..=b).all(|c| !self.sc.above(i, c))
    }

    /// Probability the order puts `x[a]` on top of `x[a..=b]`.
    fn top_ratio(&self, a: usize, b: usize, lc: &dyn Fn(usize, usize) -> f64) -> f64 {
        if self.max_in(a, a, b) {
            (lc(a + 1, b) - lc(a, b)).exp()
        } else {
            0.0
        }
    }

    fn bottom_ratio(&self, a: usize, b: usize, lc: &dyn Fn(usize, usize) -> f64) -> f64 {
        if self.min_in(b, a, b) {
            (lc(a, b - 1) - lc(a, b)).exp()
        } else {
            0.0
        }
    }

    fn qju(&self, p: f64) -> f64 {
        let k = self.k;
        let suffix: Vec<f64> = (0..k).map(|a| self.log_count(a, k - 1)).chain([0.0]).collect();
        let lc = |a: usize, _b: usize| suffix[a];
        let mut total = 0.0;
        for i in (0..k.saturating_sub(1)).rev() {
            total = ln_factor(p, k - i, self.top_ratio(i, k - 1, &lc)) + total;
        }
        total
    }

    fn qjd(&self, p: f64) -> f64 {
        let k = self.k;
        let prefix: Vec<f64> = (0..k).map(|b| self.log_count(0, b)).collect();
        let lc = |_a: usize, b: usize| prefix[b];
        let mut total = 0.0;
        for b in 1..k {
            total = ln_factor(p, b + 1, self.bottom_ratio(0, b, &lc)) + total;
        }
        total
    }

    fn qjb(&self, p: f64, phi: f64) -> f64 {
        let k = self.k;
        let mut logl = vec![vec![0.0f64; k]; k];
        for a in 0..k {
            for b in a..k {
                logl[a][b] = self.log_count(a, b);
            }
        }
        let lc = |a: usize, b: usize| if a > b { 0.0 } else { logl[a][b] };
        let (ln_phi, ln_1m_phi) = (phi.ln(), (1.0 - phi).ln());
        // memo[a][b] = log P(x[a..=b] | sub-order on those actors).
        let mut memo = vec![vec![0.0f64; k]; k];
        for len in 2..=k {
            for a in 0..=k - len {
                let b = a + len - 1;
                let up = if phi > 0.0 {
                    ln_phi + ln_factor(p, len, self.top_ratio(a, b, &lc)) + memo[a + 1][b]
                } else {
                    f64::NEG_INFINITY
                };
                let down = if phi < 1.0 {
                    ln_1m_phi + ln_factor(p, len, self.bottom_ratio(a, b, &lc)) + memo[a][b - 1]
                } else {
                    f64::NEG_INFINITY
                };
                memo[a][b] = ln_add(up, down);
            }
        }
        memo[0][k - 1]
    }
}

fn check_same_actors(x: &[Actor], tree: &SpTree) -> Result<(), ObsError> {
    let mut xs = x.to_vec();
    xs.sort_unstable();
    if xs != tree.actors() {
        return Err(ObsError::ActorMismatch);
    }
    Ok(())
}

/// Log QJ-U likelihood of `x`, a permutation of the tree's actors.
pub fn qju_log_lik(x: &[Actor], tree: &SpTree, p: f64) -> Result<f64, ObsError> {
    check_same_actors(x, tree)?;
    Ok(ListEval::new(tree, x)?.qju(p))
}

/// Log QJ-D likelihood: QJ-U read from the bottom.
pub fn qjd_log_lik(x: &[Actor], tree: &SpTree, p: f64) -> Result<f64, ObsError> {
    check_same_actors(x, tree)?;
    Ok(ListEval::new(tree, x)?.qjd(p))
}

/// Log QJ-B likelihood, summing over placement directions by recursion on
/// contiguous intervals of the list.
pub fn qjb_log_lik(x: &[Actor], tree: &SpTree, p: f64, phi: f64) -> Result<f64, ObsError> {
    check_same_actors(x, tree)?;
    Ok(ListEval::new(tree, x)?.qjb(p, phi))
}

/// Log likelihood of one list on the sub-order of its members.
pub fn list_log_lik(x: &[Actor], tree: &SpTree, model: ObsModel, p: f64, phi: f64) -> Result<f64, ObsError> {
    if x.is_empty() {
        return Err(ObsError::EmptyList);
    }
    let ev = ListEval::new(tree, x)?;
    Ok(match model {
        ObsModel::QjU => ev.qju(p),
        ObsModel::QjD => ev.qjd(p),
        ObsModel::QjB => ev.qjb(p, phi),
    })
}

/// Total and per-list log likelihood; lists are independent given the order.
pub fn dataset_log_lik(
    data: &RankDataset,
    tree: &SpTree,
    model: ObsModel,
    p: f64,
    phi: f64,
) -> Result<(f64, Vec<f64>), ObsError> {
    let per: Vec<f64> = data
        .lists
        .iter()
        .map(|l| list_log_lik(l.order(), tree, model, p, phi))
        .collect::<Result<_, _>>()?;
    Ok((per.iter().sum(), per))
}

/// Brute-force QJ-B likelihood (not logged): explicit sum over all `2^(n-1)`
/// placement sequences, with exact counts from leaf-deleted tree copies.
/// Exponential; a reference for small `n` only.
pub fn qjb_lik_naive(x: &[Actor], tree: &SpTree, p: f64, phi: f64) -> Result<f64, ObsError> {
    check_same_actors(x, tree)?;
    let k = x.len();
    let mut total = 0.0;
    for zbits in 0u64..(1u64 << (k - 1)) {
        let (mut lo, mut hi) = (0usize, k - 1);
        let mut t = tree.clone();
        let mut prob = 1.0;
        for step in 0..k - 1 {
            let top = zbits >> step & 1 == 1;
            let m = k - step;
            let (actor, counts, weight) = if top {
                (x[lo], top_counts(&t), phi)
            } else {
                (x[hi], bottom_counts(&t), 1.0 - phi)
            };
            let ratio = counts[&actor].value.to_f64().unwrap() / count_le(&t).value.to_f64().unwrap();
            prob *= weight * (p / m as f64 + (1.0 - p) * ratio);
            if top {
                lo += 1;
            } else {
                hi -= 1;
            }
            t.remove_actor(actor).expect("actor present");
        }
        total += prob;
    }
    Ok(total)
}

/// Sampling helper: the remaining actors (positions into `members`) and
/// draws of an extreme element of a uniform linear extension.
struct Remaining<'a> {
    sc: &'a SubsetCounter,
    include: Vec<bool>,
    left: Vec<usize>,
}

impl<'a> Remaining<'a> {
    fn new(sc: &'a SubsetCounter) -> Self {
        let k = sc.len();
        Self { sc, include: vec![true; k], left: (0..k).collect() }
    }

    fn draw<R: Rng + ?Sized>(&self, p: f64, top: bool, rng: &mut R) -> usize {
        if rng.random::<f64>() < p {
            return self.left[rng.random_range(0..self.left.len())];
        }
        let base = self.sc.log_count(&self.include);
        let mut weights = Vec::with_capacity(self.left.len());
        let mut inc = self.include.clone();
        for &i in &self.left {
            let extreme = self
                .left
                .iter()
                .all(|&c| if top { !self.sc.above(c, i) } else { !self.sc.above(i, c) });
            let w = if extreme {
                inc[i] = false;
                let w = (self.sc.log_count(&inc) - base).exp();
                inc[i] = true;
                w
            } else {
                0.0
            };
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                return self.left[j];
            }
            u -= w;
        }
        // Rounding left `u` past the end: take the last eligible actor.
        let j = weights.iter().rposition(|&w| w > 0.0).expect("some actor is extreme");
        self.left[j]
    }

    fn remove(&mut self, i: usize) {
        self.include[i] = false;
        self.left.retain(|&c| c != i);
    }
}

/// Simulates a QJ-B list over `members` (all of the tree's actors when
/// `None`). QJ-U and QJ-D are the cases `phi = 1` and `phi = 0`.
pub fn simulate_list<R: Rng + ?Sized>(
    tree: &SpTree,
    members: Option<&[Actor]>,
    p: f64,
    phi: f64,
    rng: &mut R,
) -> Result<Vec<Actor>, ObsError> {
    let all;
    let members = match members {
        Some(m) => m,
        None => {
            all = tree.actors();
            &all
        }
    };
    if members.is_empty() {
        return Err(ObsError::EmptyList);
    }
    let sc = SubsetCounter::new(tree, members).map_err(ObsError::UnknownActor)?;
    let k = members.len();
    let mut out = vec![usize::MAX; k];
    let (mut lo, mut hi) = (0usize, k - 1);
    let mut rem = Remaining::new(&sc);
    for _ in 0..k - 1 {
        let top = phi >= 1.0 || (phi > 0.0 && rng.random::<f64>() < phi);
        let i = rem.draw(p, top, rng);
        if top {
            out[lo] = members[i];
            lo += 1;
        } else {
            out[hi] = members[i];
            hi -= 1;
        }
        rem.remove(i);
    }
    out[lo] = members[rem.left[0]];
    Ok(out)
}

pub fn simulate_qju<R: Rng + ?Sized>(tree: &SpTree, p: f64, rng: &mut R) -> Vec<Actor> {
    simulate_list(tree, None, p, 1.0, rng).expect("tree has actors")
}

pub fn simulate_qjd<R: Rng + ?Sized>(tree: &SpTree, p: f64, rng: &mut R) -> Vec<Actor> {
    simulate_list(tree, None, p, 0.0, rng).expect("tree has actors")
}

pub fn simulate_qjb<R: Rng + ?Sized>(tree: &SpTree, p: f64, phi: f64, rng: &mut R) -> Vec<Actor> {
    simulate_list(tree, None, p, phi, rng).expect("tree has actors")
}

/// One simulated list per membership, each on the sub-order of its members.
pub fn simulate_dataset<R: Rng + ?Sized>(
    tree: &SpTree,
    model: ObsModel,
    p: f64,
    phi: f64,
    memberships: &[ActorSubset],
    rng: &mut R,
) -> Result<RankDataset, ObsError> {
    let phi = match model {
        ObsModel::QjU => 1.0,
        ObsModel::QjD => 0.0,
        ObsModel::QjB => phi,
    };
    let lists = memberships
        .iter()
        .map(|m| RankList::new(simulate_list(tree, Some(m.as_slice()), p, phi, rng)?))
        .collect::<Result<Vec<_>, _>>()?;
    let actors = tree.actors().into_iter().map(ActorInfo::anonymous).collect();
    RankDataset::new(actors, lists)
}
