//! Priors over decomposition trees and VSPs, and hyperpriors for `q`, `p`, `phi`.
//!
//! A BDT with `S` series nodes on `n` leaves has prior
//! `(q/2)^S (1-q)^(n-1-S) / (2n-3)!!`. Summing over the BDTs of one VSP gives a
//! closed form over its MDT: each `P` node with `c` children contributes
//! `(1-q)^(c-1) (2c-3)!!`, each `S` node `(q/2)^(c-1) Catalan(c-1)`.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

use crate::poset::{enumerate_posets, Actor, PartialOrder, PosetError, POSET_ORACLE_BOUND};
use crate::tree::{Bdt, Mdt, NestedTree, NodeType, SpTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("{name} = {value} is outside its support")]
    OutOfSupport { name: &'static str, value: f64 },
    #[error("invalid prior parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Poset(#[from] PosetError),
}

/// `C_s = binom(2s, s) / (s + 1)`.
pub fn catalan(s: u64) -> BigUint {
    // C_{k+1} = C_k * 2(2k+1) / (k+2), exact at every step.
    let mut c = BigUint::one();
    for k in 0..s {
        c = c * (2 * (2 * k + 1)) / (k + 2);
    }
    c
}

/// `k!! = k (k-2) (k-4) ...`; `0!! = (-1)!! = 1`.
pub fn double_factorial(k: i64) -> BigUint {
    let mut out = BigUint::one();
    let mut j = k;
    while j > 1 {
        out *= j as u64;
        j -= 2;
    }
    out
}

/// `ln (2m-1)!!` for `m >= 0`, via `(2m)! / (2^m m!)`.
pub fn ln_odd_double_factorial(m: u64) -> f64 {
    ln_factorial(2 * m) - m as f64 * std::f64::consts::LN_2 - ln_factorial(m)
}

/// `ln C_s`.
pub fn ln_catalan(s: u64) -> f64 {
    ln_factorial(2 * s) - ln_factorial(s) - ln_factorial(s + 1)
}

/// `count * ln(x)` with `0 * ln 0 = 0`.
fn xlogy(count: usize, x: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * x.ln()
    }
}

/// `ln (2n-3)!!`, the number of rooted binary topologies on `n` leaves.
pub fn ln_topology_count(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_odd_double_factorial(n as u64 - 1)
    }
}

/// Log prior of a typed BDT.
pub fn bdt_log_prior(t: &Bdt, q: f64) -> f64 {
    let n = t.n();
    let s = t.s_count();
    xlogy(s, q / 2.0) + xlogy(n - 1 - s, 1.0 - q) - ln_topology_count(n)
}

/// Child counts of every internal node of the MDT, split by type.
fn mdt_arities(tree: &SpTree) -> (Vec<usize>, Vec<usize>) {
    let canon = SpTree::from_nested(&tree.canonical());
    let mut s = Vec::new();
    let mut p = Vec::new();
    for id in canon.internal_ids() {
        let c = canon.children(id).len();
        match canon.node_type(id) {
            Some(NodeType::S) => s.push(c),
            _ => p.push(c),
        }
    }
    (s, p)
}

/// Number of typed BDTs representing the same VSP as `tree` (binary or not).
pub fn bdt_multiplicity(tree: &SpTree) -> BigUint {
    let (s, p) = mdt_arities(tree);
    let mut out = BigUint::one();
    for c in p {
        out *= double_factorial(2 * c as i64 - 3);
    }
    for c in s {
        out *= catalan(c as u64 - 1);
    }
    out
}

/// Log prior of a VSP, given as its MDT (or any representing tree).
pub fn vsp_log_prior(tree: &SpTree, q: f64) -> f64 {
    let (s, p) = mdt_arities(tree);
    let mut lp = -ln_topology_count(tree.n());
    for c in p {
        lp += xlogy(c - 1, 1.0 - q) + ln_odd_double_factorial(c as u64 - 1);
    }
    for c in s {
        lp += xlogy(c - 1, q / 2.0) + ln_catalan(c as u64 - 1);
    }
    lp
}

/// All VSPs on the given labels, as MDTs.
pub fn enumerate_vsps(labels: &[Actor]) -> Result<Vec<Mdt>, PosetError> {
    let n = labels.len();
    let base = enumerate_posets(n)?;
    Ok(base
        .into_iter()
        .filter(|po| po.is_vsp())
        .map(|po| {
            let edges: Vec<(Actor, Actor)> =
                po.relations().into_iter().map(|(a, b)| (labels[a], labels[b])).collect();
            let relabelled = PartialOrder::from_edges(labels, &edges).expect("relabelling keeps acyclicity");
            Mdt::from_partial_order(&relabelled).expect("filtered to VSPs")
        })
        .collect())
}

/// Largest discrepancy between the prior on `n - 1` actors and the marginal
/// of the prior on `n` actors, over every dropped actor and every sub-VSP.
pub fn check_marginal_consistency(n: usize, q: f64) -> Result<f64, PosetError> {
    if n > POSET_ORACLE_BOUND {
        return Err(PosetError::OracleBoundExceeded { n, bound: POSET_ORACLE_BOUND });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let labels: Vec<Actor> = (1..=n).collect();
    let full: Vec<(PartialOrder, f64)> = enumerate_vsps(&labels)?
        .into_iter()
        .map(|m| (m.to_vsp(), vsp_log_prior(m.tree(), q).exp()))
        .collect();
    let mut worst: f64 = 0.0;
    for drop in &labels {
        let sub: Vec<Actor> = labels.iter().copied().filter(|a| a != drop).collect();
        let mut marginal: HashMap<PartialOrder, f64> = HashMap::new();
        for (po, w) in &full {
            *marginal.entry(po.restrict(&sub)?).or_insert(0.0) += w;
        }
        for m in enumerate_vsps(&sub)? {
            let direct = vsp_log_prior(m.tree(), q).exp();
            let summed = marginal.get(&m.to_vsp()).copied().unwrap_or(0.0);
            worst = worst.max((direct - summed).abs());
        }
    }
    Ok(worst)
}

/// Model parameters besides the order itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Probability an inserted internal node is series.
    pub q: f64,
    /// Probability a placement ignores the order.
    pub p: f64,
    /// Probability a placement is taken from the top of the queue.
    pub phi: f64,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), PriorError> {
        for (name, value) in [("q", self.q), ("p", self.p), ("phi", self.phi)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(PriorError::OutOfSupport { name, value });
            }
        }
        Ok(())
    }
}

/// A prior on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitPrior {
    /// `x = 1 / (1 + exp(-z))` with `z ~ N(mean, sd)`.
    LogitNormal { mean: f64, sd: f64 },
    Uniform,
    Beta { a: f64, b: f64 },
    /// Not sampled; the parameter stays at `value`.
    Fixed { value: f64 },
}

impl UnitPrior {
    pub fn validate(&self) -> Result<(), PriorError> {
        match *self {
            UnitPrior::LogitNormal { sd, .. } if !(sd > 0.0) => {
                Err(PriorError::BadParameters(format!("logit-normal sd must be positive, got {sd}")))
            }
            UnitPrior::Beta { a, b } if !(a > 0.0 && b > 0.0) => {
                Err(PriorError::BadParameters(format!("beta shapes must be positive, got {a}, {b}")))
            }
            UnitPrior::Fixed { value } if !(0.0..=1.0).contains(&value) => {
                Err(PriorError::OutOfSupport { name: "fixed value", value })
            }
            _ => Ok(()),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, UnitPrior::Fixed { .. })
    }

    /// Log density at `x`; `0` for fixed priors. Zero-density boundary
    /// points give `-inf`.
    pub fn log_density(&self, name: &'static str, x: f64) -> Result<f64, PriorError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(PriorError::OutOfSupport { name, value: x });
        }
        Ok(match *self {
            UnitPrior::LogitNormal { mean, sd } => {
                if x <= 0.0 || x >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    let z = (x / (1.0 - x)).ln();
                    let u = (z - mean) / sd;
                    -0.5 * u * u - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - x.ln() - (1.0 - x).ln()
                }
            }
            UnitPrior::Uniform => 0.0,
            UnitPrior::Beta { a, b } => {
                xlogy_f(a - 1.0, x) + xlogy_f(b - 1.0, 1.0 - x) - ln_beta(a, b)
            }
            UnitPrior::Fixed { .. } => 0.0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UnitPrior::LogitNormal { mean, sd } => {
                let z: f64 = Normal::new(mean, sd).expect("validated sd").sample(rng);
                1.0 / (1.0 + (-z).exp())
            }
            UnitPrior::Uniform => rng.random(),
            UnitPrior::Beta { a, b } => Beta::new(a, b).expect("validated shapes").sample(rng),
            UnitPrior::Fixed { value } => value,
        }
    }

    /// `P(X <= x)`. A fixed prior is a point mass at its value.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if matches!(self, UnitPrior::Fixed { value } if *value <= 0.0) { 1.0 } else { 0.0 };
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            UnitPrior::LogitNormal { mean, sd } => {
                statrs::distribution::Normal::new(mean, sd).expect("validated sd").cdf((x / (1.0 - x)).ln())
            }
            UnitPrior::Uniform => x,
            UnitPrior::Beta { a, b } => statrs::distribution::Beta::new(a, b).expect("validated shapes").cdf(x),
            UnitPrior::Fixed { value } => f64::from(u8::from(value <= x)),
        }
    }

    pub fn mean_hint(&self) -> Option<f64> {
        match *self {
            UnitPrior::Uniform => Some(0.5),
            UnitPrior::Beta { a, b } => Some(a / (a + b)),
            UnitPrior::Fixed { value } => Some(value),
            UnitPrior::LogitNormal { .. } => None,
        }
    }
}

fn xlogy_f(c: f64, x: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * x.ln()
    }
}

/// Hyperpriors for `(q, p, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperPriorSpec {
    pub q: UnitPrior,
    pub p: UnitPrior,
    pub phi: UnitPrior,
}

impl Default for HyperPriorSpec {
    fn default() -> Self {
        Self {
            q: UnitPrior::LogitNormal { mean: 1.0, sd: 1.5 },
            p: UnitPrior::LogitNormal { mean: 0.0, sd: 1.5 },
            phi: UnitPrior::Uniform,
        }
    }
}

impl HyperPriorSpec {
    pub fn validate(&self) -> Result<(), PriorError> {
        self.q.validate()?;
        self.p.validate()?;
        self.phi.validate()
    }

    /// Every parameter pinned to the given values.
    pub fn fixed(h: Hyperparams) -> Self {
        Self {
            q: UnitPrior::Fixed { value: h.q },
            p: UnitPrior::Fixed { value: h.p },
            phi: UnitPrior::Fixed { value: h.phi },
        }
    }
}

pub fn hyper_log_prior(h: &Hyperparams, spec: &HyperPriorSpec) -> Result<f64, PriorError> {
    Ok(spec.q.log_density("q", h.q)? + spec.p.log_density("p", h.p)? + spec.phi.log_density("phi", h.phi)?)
}

pub fn sample_hyper<R: Rng + ?Sized>(spec: &HyperPriorSpec, rng: &mut R) -> Hyperparams {
    Hyperparams { q: spec.q.sample(rng), p: spec.p.sample(rng), phi: spec.phi.sample(rng) }
}

/// Prior depth tallies: `hist[d]` counts draws of depth `d` (index 0 unused).
/// Each draw samples `q` from its hyperprior, then a BDT.
pub fn prior_depth_histogram<R: Rng + ?Sized>(n: usize, spec: &HyperPriorSpec, draws: usize, rng: &mut R) -> Vec<u64> {
    let mut hist = vec![0u64; n + 1];
    for _ in 0..draws {
        let q = spec.q.sample(rng);
        let t = Bdt::sample_prior(n, q, rng).expect("n >= 1");
        hist[t.tree().depth()] += 1;
    }
    hist
}

/// Tree of a VSP's canonical form, for callers holding nested trees.
pub fn vsp_log_prior_nested(nested: &NestedTree, q: f64) -> f64 {
    vsp_log_prior(&SpTree::from_nested(nested), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Bdt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logsumexp(xs: &[f64]) -> f64 {
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    #[test]
    fn catalan_values() {
        let got: Vec<u64> = (0..8).map(|s| catalan(s).try_into().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 2, 5, 14, 42, 132, 429]);
        assert!((ln_catalan(7) - 429f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn double_factorials() {
        let got: Vec<u64> = [-1, 0, 1, 3, 5, 7].iter().map(|&k| double_factorial(k).try_into().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 1, 3, 15, 105]);
        assert!((ln_odd_double_factorial(4) - 105f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_leaf_bdt_priors() {
        let q = 0.3;
        let pt = Bdt::from_nested(&NestedTree::P { children: vec![NestedTree::leaf(1), NestedTree::leaf(2)] }).unwrap();
        let st = Bdt::from_nested(&NestedTree::S { children: vec![NestedTree::leaf(1), NestedTree::leaf(2)] }).unwrap();
        assert!((bdt_log_prior(&pt, q) - (1.0 - q).ln()).abs() < 1e-15);
        assert!((bdt_log_prior(&st, q) - (q / 2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn bdt_prior_sums_to_one_at_n3() {
        for q in [0.1, 0.5, 0.9] {
            let all = Bdt::enumerate_all(&[1, 2, 3]).unwrap();
            let total: f64 = all.iter().map(|t| bdt_log_prior(t, q).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicities() {
        let all = Bdt::enumerate_all(&[1, 2, 3, 4, 5]).unwrap();
        let v0 = PartialOrder::from_edges(&[1, 2, 3, 4, 5], &[(1, 2), (1, 3), (3, 4), (4, 5), (2, 5)]).unwrap();
        let reps: Vec<&Bdt> = all.iter().filter(|t| t.to_vsp() == v0).collect();
        assert_eq!(reps.len(), 2);
        assert_eq!(bdt_multiplicity(reps[0].tree()), BigUint::from(2u32));
        let empty = Mdt::from_partial_order(&PartialOrder::empty(&[1, 2, 3]).unwrap()).unwrap();
        assert_eq!(bdt_multiplicity(empty.tree()), BigUint::from(3u32));
        let chain = Mdt::from_partial_order(&PartialOrder::chain(&[1, 2, 3]).unwrap()).unwrap();
        assert_eq!(bdt_multiplicity(chain.tree()), BigUint::from(2u32));
    }

    #[test]
    fn closed_form_small_cases() {
        let q = 0.35;
        let chain = Mdt::from_partial_order(&PartialOrder::chain(&[1, 2]).unwrap()).unwrap();
        assert!((vsp_log_prior(chain.tree(), q) - (q / 2.0).ln()).abs() < 1e-15);
        let empty = Mdt::from_partial_order(&PartialOrder::empty(&[1, 2, 3]).unwrap()).unwrap();
        assert!((vsp_log_prior(empty.tree(), q) - 2.0 * (1.0 - q).ln()).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_tree_sum_n4() {
        let all = Bdt::enumerate_all(&[1, 2, 3, 4]).unwrap();
        for q in [0.1, 0.5, 0.9] {
            let mut groups: HashMap<NestedTree, Vec<f64>> = HashMap::new();
            for t in &all {
                groups.entry(t.collapse().key()).or_default().push(bdt_log_prior(t, q));
            }
            assert_eq!(groups.len(), enumerate_vsps(&[1, 2, 3, 4]).unwrap().len());
            for (key, lps) in groups {
                let direct = vsp_log_prior_nested(&key, q);
                assert!((direct - logsumexp(&lps)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn vsp_counts() {
        assert_eq!(enumerate_vsps(&[1, 2]).unwrap().len(), 3);
        assert_eq!(enumerate_vsps(&[1, 2, 3]).unwrap().len(), 19);
    }

    #[test]
    fn marginal_consistency_small() {
        assert_eq!(check_marginal_consistency(2, 0.4).unwrap(), 0.0);
        assert!(check_marginal_consistency(3, 0.5).unwrap() < 1e-12);
        assert!(check_marginal_consistency(4, 0.25).unwrap() < 1e-12);
        assert!(check_marginal_consistency(6, 0.5).is_err());
    }

    #[test]
    fn logit_normal_density_integrates_to_one() {
        let prior = UnitPrior::LogitNormal { mean: 1.0, sd: 1.5 };
        let m = 10_000;
        let h = 1.0 / m as f64;
        let total: f64 = (0..m)
            .map(|i| prior.log_density("q", (i as f64 + 0.5) * h).unwrap().exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn uniform_and_beta_densities() {
        assert_eq!(UnitPrior::Uniform.log_density("phi", 0.3).unwrap(), 0.0);
        let b = UnitPrior::Beta { a: 2.0, b: 3.0 };
        // 12 x (1-x)^2
        let x: f64 = 0.4;
        assert!((b.log_density("p", x).unwrap() - (12.0 * x * (1.0 - x).powi(2)).ln()).abs() < 1e-12);
        assert!(UnitPrior::Uniform.log_density("p", 1.5).is_err());
    }

    #[test]
    fn sampled_q_median() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = HyperPriorSpec::default();
        let mut qs: Vec<f64> = (0..100_000).map(|_| sample_hyper(&spec, &mut rng).q).collect();
        qs.sort_by(f64::total_cmp);
        let logistic1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((qs[50_000] - logistic1).abs() < 0.01);
    }

    #[test]
    fn depth_with_q_one_is_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = HyperPriorSpec { q: UnitPrior::Fixed { value: 1.0 }, ..HyperPriorSpec::default() };
        let h = prior_depth_histogram(7, &spec, 200, &mut rng);
        assert_eq!(h[7], 200);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = HyperPriorSpec::default();
        let text = toml::to_string(&spec).unwrap();
        let back: HyperPriorSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(toml::from_str::<HyperPriorSpec>("bogus = 1").is_err());
    }
}
