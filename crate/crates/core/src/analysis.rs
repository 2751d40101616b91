//! Posterior summaries over sampled VSPs and model-comparison statistics.
//!
//! Everything here works on slices of [`TraceRecord`] so traces read back
//! from disk and traces held in memory are treated alike.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcmc::TraceRecord;
use crate::poset::{transitive_closure, Actor, PartialOrder, PosetError};
use crate::prior::UnitPrior;
use crate::tree::{NestedTree, SpTree};

pub const DEFAULT_EPS_WEAK: f64 = 0.5;
pub const DEFAULT_EPS_STRONG: f64 = 0.9;
pub const DEFAULT_SD_WINDOW: f64 = 0.02;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("need at least two samples, got {0}")]
    DegenerateTrace(usize),
    #[error("retained consensus edges form a cycle through actor {0}")]
    InconsistentConsensus(Actor),
    #[error("actor {0} has no group")]
    UnknownGroup(Actor),
    #[error("samples disagree on the actor set")]
    ActorMismatch,
    #[error("no posterior samples with phi in the {end} window; the Bayes factor is below {bound}")]
    EmptyWindow { end: &'static str, bound: f64 },
    #[error("prior puts no mass in the {0} window")]
    ZeroPriorMass(&'static str),
    #[error("non-finite log-likelihood at sample {sample}, list {list}")]
    NonFinite { sample: usize, list: usize },
    #[error("rows have unequal lengths")]
    Ragged,
    #[error("window half-width must lie in (0, 0.5), got {0}")]
    BadWindow(f64),
}

/// Distinct sampled VSPs with their multiplicities, in first-seen order.
fn tally(records: &[TraceRecord]) -> Vec<(PartialOrder, usize)> {
    let mut index: HashMap<&NestedTree, usize> = HashMap::new();
    let mut out: Vec<(PartialOrder, usize)> = Vec::new();
    for r in records {
        match index.get(&r.tree) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(&r.tree, out.len());
                out.push((SpTree::from_nested(&r.tree).to_partial_order(), 1));
            }
        }
    }
    out
}

fn sample_orders(records: &[TraceRecord]) -> Result<(Vec<PartialOrder>, Vec<usize>), AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    let mut index: HashMap<&NestedTree, usize> = HashMap::new();
    let mut orders = Vec::new();
    let mut which = Vec::with_capacity(records.len());
    for r in records {
        let i = *index.entry(&r.tree).or_insert_with(|| {
            orders.push(SpTree::from_nested(&r.tree).to_partial_order());
            orders.len() - 1
        });
        which.push(i);
    }
    if orders.iter().any(|o| o.labels() != orders[0].labels()) {
        return Err(AnalysisError::ActorMismatch);
    }
    Ok((orders, which))
}

/// Posterior probabilities `m[i][j] = P(labels[i] > labels[j] | data)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMarginals {
    pub labels: Vec<Actor>,
    pub m: Vec<Vec<f64>>,
    /// Monte Carlo standard errors (autocorrelation-adjusted); zero for
    /// exact marginals.
    pub se: Vec<Vec<f64>>,
    pub samples: usize,
}

impl EdgeMarginals {
    /// Marginals of a weighted set of orders on a common ground set; the
    /// weights need not be normalized.
    pub fn from_weighted<'a>(items: impl IntoIterator<Item = (&'a PartialOrder, f64)>) -> Result<Self, AnalysisError> {
        let mut labels: Option<Vec<Actor>> = None;
        let mut m: Vec<Vec<f64>> = Vec::new();
        let mut total = 0.0;
        let mut count = 0;
        for (po, w) in items {
            let l = labels.get_or_insert_with(|| {
                m = vec![vec![0.0; po.n()]; po.n()];
                po.labels().to_vec()
            });
            if l.as_slice() != po.labels() {
                return Err(AnalysisError::ActorMismatch);
            }
            for (i, row) in m.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    if po.above_idx(i, j) {
                        *x += w;
                    }
                }
            }
            total += w;
            count += 1;
        }
        let labels = labels.ok_or(AnalysisError::EmptyTrace)?;
        for row in &mut m {
            for x in row {
                *x /= total;
            }
        }
        let n = labels.len();
        Ok(Self { labels, m, se: vec![vec![0.0; n]; n], samples: count })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, a: Actor, b: Actor) -> Option<f64> {
        let i = self.labels.binary_search(&a).ok()?;
        let j = self.labels.binary_search(&b).ok()?;
        Some(self.m[i][j])
    }

    /// Ordered pairs `(a, b)` with `m > eps`.
    pub fn retained(&self, eps: f64) -> Vec<(Actor, Actor)> {
        let mut out = Vec::new();
        for (i, row) in self.m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x > eps {
                    out.push((self.labels[i], self.labels[j]));
                }
            }
        }
        out
    }

    /// Rows as CSV with a header of actor ids.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("actor");
        for a in &self.labels {
            s.push_str(&format!(",{a}"));
        }
        s.push('\n');
        for (i, row) in self.m.iter().enumerate() {
            s.push_str(&self.labels[i].to_string());
            for x in row {
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Fraction of samples in which each ordered pair is related.
pub fn edge_marginals(records: &[TraceRecord]) -> Result<EdgeMarginals, AnalysisError> {
    let (orders, which) = sample_orders(records)?;
    let n = orders[0].n();
    let k = records.len();
    let mut m = vec![vec![0.0; n]; n];
    let mut se = vec![vec![0.0; n]; n];
    let mut series = vec![0.0; k];
    for i in 0..n {
        for j in 0..n {
            if i == j || orders.iter().all(|o| !o.above_idx(i, j)) {
                continue;
            }
            for (s, &w) in series.iter_mut().zip(&which) {
                *s = f64::from(u8::from(orders[w].above_idx(i, j)));
            }
            let (mean, err) = mean_and_se(&series);
            m[i][j] = mean;
            se[i][j] = err;
        }
    }
    Ok(EdgeMarginals { labels: orders[0].labels().to_vec(), m, se, samples: k })
}

/// Consensus relations at two thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusOrder {
    pub labels: Vec<Actor>,
    pub eps_weak: f64,
    pub eps_strong: f64,
    /// Pairs with marginal above `eps_weak`.
    pub weak: Vec<(Actor, Actor)>,
    /// Pairs with marginal above `eps_strong`.
    pub strong: Vec<(Actor, Actor)>,
    /// Transitive reduction of the closure of `weak`, for drawing.
    pub display: Vec<(Actor, Actor)>,
}

impl ConsensusOrder {
    pub fn is_strong(&self, edge: (Actor, Actor)) -> bool {
        self.strong.binary_search(&edge).is_ok()
    }
}

pub fn consensus_order(marg: &EdgeMarginals, eps_weak: f64, eps_strong: f64) -> Result<ConsensusOrder, AnalysisError> {
    let weak = marg.retained(eps_weak);
    let strong = marg.retained(eps_strong.max(eps_weak));
    let n = marg.n();
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in &weak {
        let i = marg.labels.binary_search(&a).unwrap();
        let j = marg.labels.binary_search(&b).unwrap();
        adj[i][j] = true;
    }
    let closure = transitive_closure(&adj).map_err(|e| match e {
        PosetError::CycleDetected(i) => AnalysisError::InconsistentConsensus(marg.labels[i]),
        _ => AnalysisError::ActorMismatch,
    })?;
    let display = closure.transitive_reduction().into_iter().map(|(i, j)| (marg.labels[i], marg.labels[j])).collect();
    Ok(ConsensusOrder { labels: marg.labels.clone(), eps_weak, eps_strong, weak, strong, display })
}

/// Rank of an actor in an order: one plus the number of actors above it.
pub fn rank_in(po: &PartialOrder, actor: Actor) -> Option<usize> {
    po.index_of(actor).map(|i| 1 + po.predecessor_count_idx(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub mean: f64,
    /// Monte Carlo standard error of `mean`.
    pub mc_se: f64,
    pub members: usize,
}

/// Posterior mean rank per group: each sample's ranks are averaged over the
/// group's actors, then over samples.
pub fn average_rank(
    records: &[TraceRecord],
    groups: &BTreeMap<Actor, String>,
) -> Result<BTreeMap<String, RankSummary>, AnalysisError> {
    let (orders, which) = sample_orders(records)?;
    let labels = orders[0].labels();
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in labels.iter().enumerate() {
        let g = groups.get(a).ok_or(AnalysisError::UnknownGroup(*a))?;
        members.entry(g.as_str()).or_default().push(i);
    }
    // Per distinct order, the group average rank.
    let per_order: Vec<BTreeMap<&str, f64>> = orders
        .iter()
        .map(|o| {
            members
                .iter()
                .map(|(g, idx)| {
                    let s: usize = idx.iter().map(|&i| 1 + o.predecessor_count_idx(i)).sum();
                    (*g, s as f64 / idx.len() as f64)
                })
                .collect()
        })
        .collect();
    let mut out = BTreeMap::new();
    for (g, idx) in &members {
        let series: Vec<f64> = which.iter().map(|&w| per_order[w][g]).collect();
        let (mean, mc_se) = mean_and_se(&series);
        out.insert(g.to_string(), RankSummary { mean, mc_se, members: idx.len() });
    }
    Ok(out)
}

/// Depth tallies: `hist[d]` counts samples of depth `d` (index 0 unused).
pub fn depth_posterior(records: &[TraceRecord]) -> Result<Vec<u64>, AnalysisError> {
    let first = records.first().ok_or(AnalysisError::EmptyTrace)?;
    let n = first.tree.actors().len();
    let mut hist = vec![0u64; n + 1];
    for (po, c) in tally(records) {
        if po.n() != n {
            return Err(AnalysisError::ActorMismatch);
        }
        hist[po.depth()] += c as u64;
    }
    Ok(hist)
}

/// WAIC estimate of the expected log predictive density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub elpd: f64,
    pub se: f64,
    pub p_waic: f64,
    /// Per-list contributions to `elpd`.
    pub pointwise: Vec<f64>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Unbiased sample variance, computed on values shifted by the first one so
/// that a constant column gives exactly zero.
fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let Some(first) = xs.clone().next() else { return 0.0 };
    let k = xs.clone().count();
    if k < 2 {
        return 0.0;
    }
    let shifted = xs.map(|x| x - first);
    let mean = shifted.clone().sum::<f64>() / k as f64;
    shifted.map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1) as f64
}

/// `log_lik[k][i]` is the log-likelihood of list `i` at sample `k`.
pub fn waic_elpd(log_lik: &[Vec<f64>]) -> Result<Waic, AnalysisError> {
    let k = log_lik.len();
    if k < 2 {
        return Err(AnalysisError::DegenerateTrace(k));
    }
    let n = log_lik[0].len();
    if log_lik.iter().any(|r| r.len() != n) {
        return Err(AnalysisError::Ragged);
    }
    for (s, row) in log_lik.iter().enumerate() {
        if let Some(list) = row.iter().position(|x| !x.is_finite()) {
            return Err(AnalysisError::NonFinite { sample: s, list });
        }
    }
    let ln_k = (k as f64).ln();
    let mut pointwise = Vec::with_capacity(n);
    let mut p_waic = 0.0;
    for i in 0..n {
        let col = log_lik.iter().map(|r| r[i]);
        let lppd = log_sum_exp(col.clone()) - ln_k;
        let var = sample_variance(col);
        p_waic += var;
        pointwise.push(lppd - var);
    }
    let elpd: f64 = pointwise.iter().sum();
    let se = if n < 2 {
        0.0
    } else {
        let mean = elpd / n as f64;
        let var = pointwise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (n as f64 * var).sqrt()
    };
    Ok(Waic { elpd, se, p_waic, pointwise })
}

/// Bayes factors for the two nested boundary models of the bidirectional
/// queue-jumping model: `up` (phi near 1) and `down` (phi near 0), each
/// against the full model, and `up` against `down`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBayesFactors {
    pub delta: f64,
    pub b_up_vs_full: f64,
    pub b_down_vs_full: f64,
    pub b_up_vs_down: f64,
    pub samples: usize,
}

/// Boundary density ratios estimated by posterior over prior mass in windows
/// of half-width `delta` at each end of `(0, 1)`.
pub fn savage_dickey_bf(phi: &[f64], prior: UnitPrior, delta: f64) -> Result<BoundaryBayesFactors, AnalysisError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(AnalysisError::BadWindow(delta));
    }
    let k = phi.len();
    if k == 0 {
        return Err(AnalysisError::EmptyTrace);
    }
    let prior_up = 1.0 - prior.cdf(1.0 - delta);
    let prior_down = prior.cdf(delta);
    let ratio = |end: &'static str, hits: usize, mass: f64| {
        if mass <= 0.0 {
            return Err(AnalysisError::ZeroPriorMass(end));
        }
        if hits == 0 {
            return Err(AnalysisError::EmptyWindow { end, bound: 1.0 / (k as f64 * mass) });
        }
        Ok(hits as f64 / k as f64 / mass)
    };
    let up = ratio("upper", phi.iter().filter(|&&x| x > 1.0 - delta).count(), prior_up)?;
    let down = ratio("lower", phi.iter().filter(|&&x| x < delta).count(), prior_down)?;
    Ok(BoundaryBayesFactors { delta, b_up_vs_full: up, b_down_vs_full: down, b_up_vs_down: up / down, samples: k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub eps: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// True and false positive rates of the consensus at each threshold, scored
/// on ordered pairs of the closure of `truth`.
pub fn roc_reconstruction(truth: &PartialOrder, marg: &EdgeMarginals, grid: &[f64]) -> Result<Vec<RocPoint>, AnalysisError> {
    if truth.labels() != marg.labels.as_slice() {
        return Err(AnalysisError::ActorMismatch);
    }
    let n = truth.n();
    let positives = truth.relation_count();
    let negatives = n * n.saturating_sub(1) - positives;
    let mut out = Vec::with_capacity(grid.len());
    for &eps in grid {
        let (mut tp, mut fp) = (0usize, 0usize);
        for i in 0..n {
            for j in 0..n {
                if i != j && marg.m[i][j] > eps {
                    if truth.above_idx(i, j) {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
        }
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        out.push(RocPoint { eps, tpr: rate(tp, positives), fpr: rate(fp, negatives) });
    }
    Ok(out)
}

/// Trapezoidal area under a ROC curve, closed with `(0,0)` and `(1,1)`.
pub fn auc(curve: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Evenly spaced thresholds from 0 to 1 inclusive.
pub fn eps_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Effective sample size by Geyer's initial positive sequence over summed
/// autocorrelation pairs. A constant series returns its length.
pub fn ess(series: &[f64]) -> f64 {
    let k = series.len();
    if k < 4 {
        return k as f64;
    }
    let mean = series.iter().sum::<f64>() / k as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / k as f64;
    if c0 <= 0.0 {
        return k as f64;
    }
    let acf = |lag: usize| centered[..k - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / k as f64 / c0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while 2 * t + 1 < k {
        let pair = if t == 0 { 1.0 + acf(1) } else { acf(2 * t) + acf(2 * t + 1) };
        if pair <= 0.0 {
            break;
        }
        // Monotone sequence estimator.
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        t += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / k as f64);
    (k as f64 / tau).min(k as f64 * (k as f64).ln().max(1.0))
}

/// Mean and autocorrelation-adjusted standard error.
pub fn mean_and_se(series: &[f64]) -> (f64, f64) {
    let k = series.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = series.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / ess(series)).sqrt())
}

/// Named scalar traces used for convergence diagnostics.
pub fn scalar_series(records: &[TraceRecord]) -> BTreeMap<&'static str, Vec<f64>> {
    let mut out = BTreeMap::new();
    out.insert("q", records.iter().map(|r| r.hyper.q).collect());
    out.insert("p", records.iter().map(|r| r.hyper.p).collect());
    out.insert("phi", records.iter().map(|r| r.hyper.phi).collect());
    out.insert("log_lik", records.iter().map(|r| r.log_lik).collect());
    let depths: HashMap<&NestedTree, f64> = records
        .iter()
        .map(|r| (&r.tree, 0.0))
        .collect::<HashMap<_, _>>()
        .into_keys()
        .map(|t| (t, SpTree::from_nested(t).depth() as f64))
        .collect();
    out.insert("depth", records.iter().map(|r| depths[&r.tree]).collect());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::Hyperparams;

    fn record(tree: NestedTree, per_list: Vec<f64>) -> TraceRecord {
        TraceRecord {
            iteration: 0,
            tree,
            hyper: Hyperparams { q: 0.5, p: 0.5, phi: 0.5 },
            log_prior: 0.0,
            log_lik: per_list.iter().sum(),
            per_list,
        }
    }

    fn leaf(a: Actor) -> NestedTree {
        NestedTree::leaf(a)
    }

    fn v0() -> NestedTree {
        NestedTree::S {
            children: vec![
                leaf(1),
                NestedTree::P {
                    children: vec![NestedTree::S { children: vec![leaf(3), leaf(4)] }, leaf(2)],
                },
                leaf(5),
            ],
        }
        .canonical()
    }

    fn chain3() -> NestedTree {
        NestedTree::S { children: vec![leaf(1), leaf(2), leaf(3)] }
    }

    fn flat3() -> NestedTree {
        NestedTree::P { children: vec![leaf(1), leaf(2), leaf(3)] }
    }

    #[test]
    fn single_sample_marginals_are_the_closure() {
        let marg = edge_marginals(&[record(v0(), vec![])]).unwrap();
        let po = SpTree::from_nested(&v0()).to_partial_order();
        for (i, row) in marg.m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert_eq!(x, f64::from(u8::from(po.above_idx(i, j))));
            }
        }
        let c = consensus_order(&marg, DEFAULT_EPS_WEAK, DEFAULT_EPS_STRONG).unwrap();
        assert_eq!(c.display, po.transitive_reduction());
        assert_eq!(c.display.len(), 5);
        assert!(consensus_order(&marg, 1.0, 1.0).unwrap().weak.is_empty());
    }

    #[test]
    fn alternating_trace_gives_half() {
        let two = NestedTree::S { children: vec![leaf(1), leaf(2)] };
        let none = NestedTree::P { children: vec![leaf(1), leaf(2)] };
        let recs: Vec<_> = (0..10).map(|i| record(if i % 2 == 0 { two.clone() } else { none.clone() }, vec![])).collect();
        let marg = edge_marginals(&recs).unwrap();
        assert_eq!(marg.get(1, 2), Some(0.5));
        assert_eq!(marg.get(2, 1), Some(0.0));
        assert_eq!(marg.retained(0.0), vec![(1, 2)]);
    }

    #[test]
    fn cycle_in_consensus_is_reported() {
        let marg = EdgeMarginals {
            labels: vec![1, 2],
            m: vec![vec![0.0, 0.45], vec![0.45, 0.0]],
            se: vec![vec![0.0; 2]; 2],
            samples: 1,
        };
        assert!(matches!(consensus_order(&marg, 0.4, 0.9), Err(AnalysisError::InconsistentConsensus(_))));
    }

    #[test]
    fn ranks() {
        let singles: BTreeMap<Actor, String> = (1..=5).map(|a| (a, format!("g{a}"))).collect();
        let r = average_rank(&[record(chain3(), vec![])], &singles).unwrap();
        assert_eq!([r["g1"].mean, r["g2"].mean, r["g3"].mean], [1.0, 2.0, 3.0]);
        let r = average_rank(&[record(flat3(), vec![])], &singles).unwrap();
        assert!(r.values().all(|s| s.mean == 1.0));
        let r = average_rank(&[record(v0(), vec![])], &singles).unwrap();
        assert_eq!((r["g1"].mean, r["g3"].mean, r["g5"].mean), (1.0, 2.0, 5.0));
        let mut partial = singles.clone();
        partial.remove(&2);
        assert_eq!(average_rank(&[record(chain3(), vec![])], &partial), Err(AnalysisError::UnknownGroup(2)));
    }

    #[test]
    fn depth_histograms() {
        let h = depth_posterior(&[record(v0(), vec![])]).unwrap();
        assert_eq!(h, vec![0, 0, 0, 0, 1, 0]);
        let h = depth_posterior(&vec![record(chain3(), vec![]); 4]).unwrap();
        assert_eq!(h, vec![0, 0, 0, 4]);
        assert_eq!(depth_posterior(&[]), Err(AnalysisError::EmptyTrace));
    }

    #[test]
    fn waic_constant_matrix() {
        let w = waic_elpd(&vec![vec![-2.5; 3]; 4]).unwrap();
        assert!((w.elpd + 7.5).abs() < 1e-12);
        assert_eq!(w.p_waic, 0.0);
        assert_eq!(w.se, 0.0);
        assert_eq!(waic_elpd(&[vec![1.0]]), Err(AnalysisError::DegenerateTrace(1)));
    }

    #[test]
    fn waic_invariant_to_sample_order() {
        let a = vec![vec![-1.0, -2.0, -0.5], vec![-3.0, -1.0, -0.7], vec![-2.0, -1.5, -0.2]];
        let mut b = a.clone();
        b.reverse();
        let (x, y) = (waic_elpd(&a).unwrap(), waic_elpd(&b).unwrap());
        assert!((x.elpd - y.elpd).abs() < 1e-12 && (x.p_waic - y.p_waic).abs() < 1e-12);
    }

    #[test]
    fn savage_dickey_windows() {
        let grid: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let bf = savage_dickey_bf(&grid, UnitPrior::Uniform, 0.02).unwrap();
        assert!((bf.b_up_vs_full - 1.0).abs() < 1e-9);
        assert!((bf.b_down_vs_full - 1.0).abs() < 1e-9);
        let centred = vec![0.5; 100];
        match savage_dickey_bf(&centred, UnitPrior::Uniform, 0.05) {
            Err(AnalysisError::EmptyWindow { bound, .. }) => assert!((bound - 0.2).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(savage_dickey_bf(&grid, UnitPrior::Uniform, 0.7).is_err());
    }

    #[test]
    fn roc_endpoints_and_perfect_recovery() {
        let truth = SpTree::from_nested(&v0()).to_partial_order();
        let marg = EdgeMarginals::from_weighted([(&truth, 1.0)]).unwrap();
        let curve = roc_reconstruction(&truth, &marg, &eps_grid(10)).unwrap();
        assert_eq!((curve[10].tpr, curve[10].fpr), (0.0, 0.0));
        assert!(curve.iter().any(|p| p.tpr == 1.0 && p.fpr == 0.0));
        assert!((auc(&curve) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(ess(&[1.0; 50]), 50.0);
        let mut state = 1u64;
        let iid: Vec<f64> = (0..5000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let e = ess(&iid);
        assert!(e > 3500.0 && e < 7000.0, "{e}");
        let sticky: Vec<f64> = (0..5000).map(|i| ((i / 100) % 2) as f64).collect();
        assert!(ess(&sticky) < 200.0);
    }
}
