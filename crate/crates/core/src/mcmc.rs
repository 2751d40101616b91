//! Metropolis-Hastings samplers over decomposition trees.
//!
//! Two parameterizations target the same VSP posterior: the BDT chain moves
//! over binary trees (type flips plus local and global prune-and-regraft), the
//! MDT chain over canonical multi-way trees (prune-and-regraft with exact
//! proposal probabilities). Hyperparameters `q`, `p`, `phi` are updated by
//! Gaussian random walks on the logit scale.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::observation::{dataset_log_lik, ObsError, ObsModel, RankDataset};
use crate::poset::{Actor, PosetError};
use crate::prior::{
    bdt_log_prior, enumerate_vsps, sample_hyper, vsp_log_prior, HyperPriorSpec, Hyperparams, PriorError, UnitPrior,
};
use crate::tree::{Bdt, Mdt, NestedTree, SpTree, TreeError};

/// Largest ground set [`exact_posterior`] will enumerate.
pub const EXACT_POSTERIOR_BOUND: usize = 4;

/// Version stamp written into trace headers.
pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Obs(#[from] ObsError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("cached log posterior {cached} differs from recomputed {fresh} at iteration {iteration}")]
    CacheMismatch { iteration: usize, cached: f64, fresh: f64 },
    #[error("trace sink failed: {0}")]
    Sink(String),
    #[error("initial state has zero posterior density")]
    ImpossibleStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    Bdt,
    Mdt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Number of sweeps.
    pub iterations: usize,
    pub thin: usize,
    /// Sweeps discarded before recording.
    pub burn_in: usize,
    pub seed: u64,
    /// Local edge moves per global move (BDT); defaults to the actor count.
    pub local_per_global: Option<usize>,
    /// Random-walk sd on the logit scale; zero disables the update.
    pub step_q: f64,
    pub step_p: f64,
    pub step_phi: f64,
    pub param: Parameterization,
    pub model: ObsModel,
    /// Sweeps between checks of the cached posterior against a fresh
    /// evaluation; zero disables the check.
    pub check_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            thin: 10,
            burn_in: 2_000,
            seed: 0,
            local_per_global: None,
            step_q: 0.5,
            step_p: 0.5,
            step_phi: 0.5,
            param: Parameterization::Bdt,
            model: ObsModel::QjU,
            check_every: 1_000,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if self.iterations <= self.burn_in {
            return Err(McmcError::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(McmcError::Config("thin must be at least 1".into()));
        }
        for (name, s) in [("step_q", self.step_q), ("step_p", self.step_p), ("step_phi", self.step_phi)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(McmcError::Config(format!("{name} must be finite and non-negative, got {s}")));
            }
        }
        Ok(())
    }

    /// Number of records a run of this configuration produces.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone)]
pub enum TreeState {
    Bdt(Bdt),
    Mdt(Mdt),
}

impl TreeState {
    pub fn tree(&self) -> &SpTree {
        match self {
            TreeState::Bdt(t) => t.tree(),
            TreeState::Mdt(m) => m.tree(),
        }
    }

    /// Prior of the state itself: per typed BDT, or per VSP for MDTs.
    pub fn log_prior(&self, q: f64) -> f64 {
        match self {
            TreeState::Bdt(t) => bdt_log_prior(t, q),
            TreeState::Mdt(m) => vsp_log_prior(m.tree(), q),
        }
    }

    pub fn n(&self) -> usize {
        self.tree().n()
    }
}

/// Current tree and hyperparameters with cached posterior terms.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub tree: TreeState,
    pub hyper: Hyperparams,
    /// Tree prior given `q`.
    pub log_prior: f64,
    pub log_lik: f64,
    pub per_list: Vec<f64>,
}

impl ChainState {
    pub fn new(tree: TreeState, hyper: Hyperparams, data: &RankDataset, model: ObsModel) -> Result<Self, McmcError> {
        let log_prior = tree.log_prior(hyper.q);
        let (log_lik, per_list) = dataset_log_lik(data, tree.tree(), model, hyper.p, hyper.phi)?;
        Ok(Self { tree, hyper, log_prior, log_lik, per_list })
    }

    pub fn log_posterior(&self, priors: &HyperPriorSpec) -> Result<f64, McmcError> {
        Ok(self.log_prior + self.log_lik + crate::prior::hyper_log_prior(&self.hyper, priors)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One retained sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Canonical MDT of the sampled VSP.
    pub tree: NestedTree,
    pub hyper: Hyperparams,
    pub log_prior: f64,
    pub log_lik: f64,
    pub per_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format_version: u32,
    pub seed: u64,
    pub config: McmcConfig,
    pub priors: HyperPriorSpec,
    pub actors: Vec<Actor>,
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub acceptance: BTreeMap<String, MoveStats>,
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// A running chain: state, data, settings and random stream.
pub struct Chain<'a> {
    pub state: ChainState,
    data: &'a RankDataset,
    config: McmcConfig,
    priors: HyperPriorSpec,
    rng: ChaCha8Rng,
    stats: BTreeMap<&'static str, MoveStats>,
    /// Proposal probabilities of MDT moves keyed by (from, to).
    rho_cache: HashMap<(NestedTree, NestedTree), f64>,
    sweeps: usize,
}

const RHO_CACHE_LIMIT: usize = 200_000;

impl<'a> Chain<'a> {
    /// Starts from a prior draw over the dataset's actors.
    pub fn new(data: &'a RankDataset, config: McmcConfig, priors: HyperPriorSpec) -> Result<Self, McmcError> {
        config.validate()?;
        priors.validate()?;
        data.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let actors = data.actor_ids();
        if actors.is_empty() {
            return Err(McmcError::Tree(TreeError::Empty));
        }
        // Retry a few prior draws if the start has zero likelihood (p = 0).
        for _ in 0..1000 {
            let hyper = sample_hyper(&priors, &mut rng);
            let bdt = Bdt::sample_prior_on(&actors, hyper.q, &mut rng)?;
            let tree = match config.param {
                Parameterization::Bdt => TreeState::Bdt(bdt),
                Parameterization::Mdt => TreeState::Mdt(bdt.collapse()),
            };
            let state = ChainState::new(tree, hyper, data, config.model)?;
            if state.log_posterior(&priors)?.is_finite() {
                return Ok(Self::assemble(state, data, config, priors, rng));
            }
        }
        Err(McmcError::ImpossibleStart)
    }

    /// Starts from a given state.
    pub fn with_state(
        data: &'a RankDataset,
        config: McmcConfig,
        priors: HyperPriorSpec,
        tree: TreeState,
        hyper: Hyperparams,
    ) -> Result<Self, McmcError> {
        config.validate()?;
        priors.validate()?;
        hyper.validate()?;
        let state = ChainState::new(tree, hyper, data, config.model)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self::assemble(state, data, config, priors, rng))
    }

    fn assemble(
        state: ChainState,
        data: &'a RankDataset,
        config: McmcConfig,
        priors: HyperPriorSpec,
        rng: ChaCha8Rng,
    ) -> Self {
        Self { state, data, config, priors, rng, stats: BTreeMap::new(), rho_cache: HashMap::new(), sweeps: 0 }
    }

    pub fn acceptance(&self) -> BTreeMap<String, MoveStats> {
        self.stats.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn record(&mut self, name: &'static str, accepted: bool) {
        let s = self.stats.entry(name).or_default();
        s.proposed += 1;
        s.accepted += u64::from(accepted);
    }

    fn log_lik_of(&self, tree: &SpTree, p: f64, phi: f64) -> Result<(f64, Vec<f64>), McmcError> {
        Ok(dataset_log_lik(self.data, tree, self.config.model, p, phi)?)
    }

    /// Flip the type of a uniformly chosen internal node of a BDT. Turning a
    /// `P` node into `S` draws which child goes on top, so the proposal ratio
    /// is 2 one way and 1/2 the other.
    pub fn bdt_type_update(&mut self) -> Result<bool, McmcError> {
        let TreeState::Bdt(t) = &self.state.tree else { return Ok(false) };
        let internal = t.tree().internal_ids();
        if internal.is_empty() {
            return Ok(false);
        }
        let id = internal[self.rng.random_range(0..internal.len())];
        let to_series = t.tree().node_type(id) == Some(crate::tree::NodeType::P);
        let mut u = t.clone();
        u.flip_type(id, self.rng.random());
        let q = self.state.hyper.q;
        let lp = bdt_log_prior(&u, q);
        let (ll, per) = self.log_lik_of(u.tree(), self.state.hyper.p, self.state.hyper.phi)?;
        let hastings = if to_series { std::f64::consts::LN_2 } else { -std::f64::consts::LN_2 };
        let ratio = lp - self.state.log_prior + ll - self.state.log_lik + hastings;
        let ok = accept(ratio, &mut self.rng);
        if ok {
            self.state.tree = TreeState::Bdt(u);
            self.state.log_prior = lp;
            self.state.log_lik = ll;
            self.state.per_list = per;
        }
        self.record("bdt_type", ok);
        Ok(ok)
    }

    /// Prune a uniformly chosen subtree with its parent and regraft it on a
    /// uniformly chosen edge, either anywhere (`global`) or next to where it
    /// was. Needs at least three actors.
    pub fn bdt_edge_move(&mut self, global: bool) -> Result<bool, McmcError> {
        let TreeState::Bdt(t) = &self.state.tree else { return Ok(false) };
        if t.n() < 3 {
            return Ok(false);
        }
        let root = t.tree().root();
        let movable: Vec<_> = t.tree().node_ids().filter(|&i| i != root).collect();
        let moved = movable[self.rng.random_range(0..movable.len())];
        let targets = if global { t.global_targets(moved) } else { t.local_targets(moved) };
        let name = if global { "bdt_global" } else { "bdt_local" };
        if targets.is_empty() {
            self.record(name, false);
            return Ok(false);
        }
        let target = targets[self.rng.random_range(0..targets.len())];
        let u = t.spr(moved, target, self.rng.random()).expect("targets lie outside the moved subtree");
        let mut ratio = 0.0;
        if !global {
            let back = u.local_targets(moved).len();
            ratio += (targets.len() as f64).ln() - (back as f64).ln();
        }
        let (ll, per) = self.log_lik_of(u.tree(), self.state.hyper.p, self.state.hyper.phi)?;
        ratio += ll - self.state.log_lik;
        let ok = accept(ratio, &mut self.rng);
        if ok {
            self.state.tree = TreeState::Bdt(u);
            self.state.log_lik = ll;
            self.state.per_list = per;
        }
        self.record(name, ok);
        Ok(ok)
    }

    fn rho(&mut self, from: &Mdt, to: &Mdt) -> f64 {
        let key = (from.key(), to.key());
        if let Some(&r) = self.rho_cache.get(&key) {
            return r;
        }
        let r = from.proposal_prob(to);
        if self.rho_cache.len() >= RHO_CACHE_LIMIT {
            self.rho_cache.clear();
        }
        self.rho_cache.insert(key, r);
        r
    }

    /// Prune and regraft on the MDT; inadmissible draws are rejected.
    pub fn mdt_edge_move(&mut self) -> Result<bool, McmcError> {
        let TreeState::Mdt(m) = &self.state.tree else { return Ok(false) };
        let m = m.clone();
        let Some((_, u)) = m.propose(&mut self.rng) else {
            self.record("mdt_edge", false);
            return Ok(false);
        };
        if u == m {
            self.record("mdt_edge", true);
            return Ok(true);
        }
        let forward = self.rho(&m, &u);
        let backward = self.rho(&u, &m);
        let q = self.state.hyper.q;
        let lp = vsp_log_prior(u.tree(), q);
        let (ll, per) = self.log_lik_of(u.tree(), self.state.hyper.p, self.state.hyper.phi)?;
        let ratio = lp - self.state.log_prior + ll - self.state.log_lik + backward.ln() - forward.ln();
        let ok = accept(ratio, &mut self.rng);
        if ok {
            self.state.tree = TreeState::Mdt(u);
            self.state.log_prior = lp;
            self.state.log_lik = ll;
            self.state.per_list = per;
        }
        self.record("mdt_edge", ok);
        Ok(ok)
    }

    /// One logit-scale random-walk step per free hyperparameter. `q` only
    /// touches the tree prior; `p` and `phi` only the likelihood. `phi` is
    /// left alone unless the model uses it.
    pub fn hyper_updates(&mut self) -> Result<(), McmcError> {
        let h = self.state.hyper;
        if let Some(q) = self.propose_unit(h.q, self.config.step_q, self.priors.q) {
            let lp = self.state.tree.log_prior(q);
            let ratio = lp - self.state.log_prior + self.unit_ratio(self.priors.q, "q", h.q, q)?;
            let ok = accept(ratio, &mut self.rng);
            if ok {
                self.state.hyper.q = q;
                self.state.log_prior = lp;
            }
            self.record("q", ok);
        }
        if let Some(p) = self.propose_unit(h.p, self.config.step_p, self.priors.p) {
            let (ll, per) = self.log_lik_of(self.state.tree.tree(), p, self.state.hyper.phi)?;
            let ratio = ll - self.state.log_lik + self.unit_ratio(self.priors.p, "p", h.p, p)?;
            let ok = accept(ratio, &mut self.rng);
            if ok {
                self.state.hyper.p = p;
                self.state.log_lik = ll;
                self.state.per_list = per;
            }
            self.record("p", ok);
        }
        if self.config.model.uses_phi() {
            if let Some(phi) = self.propose_unit(h.phi, self.config.step_phi, self.priors.phi) {
                let (ll, per) = self.log_lik_of(self.state.tree.tree(), self.state.hyper.p, phi)?;
                let ratio = ll - self.state.log_lik + self.unit_ratio(self.priors.phi, "phi", h.phi, phi)?;
                let ok = accept(ratio, &mut self.rng);
                if ok {
                    self.state.hyper.phi = phi;
                    self.state.log_lik = ll;
                    self.state.per_list = per;
                }
                self.record("phi", ok);
            }
        }
        Ok(())
    }

    fn propose_unit(&mut self, x: f64, step: f64, prior: UnitPrior) -> Option<f64> {
        if step == 0.0 || prior.is_fixed() || x <= 0.0 || x >= 1.0 {
            return None;
        }
        let z = logit(x) + Normal::new(0.0, step).expect("positive sd").sample(&mut self.rng);
        let y = logistic(z);
        (y > 0.0 && y < 1.0).then_some(y)
    }

    /// Prior ratio plus the Jacobian of the logit walk, `y(1-y) / (x(1-x))`.
    fn unit_ratio(&self, prior: UnitPrior, name: &'static str, x: f64, y: f64) -> Result<f64, McmcError> {
        let jac = (y * (1.0 - y)).ln() - (x * (1.0 - x)).ln();
        Ok(prior.log_density(name, y)? - prior.log_density(name, x)? + jac)
    }

    /// One sweep: edge moves, a type flip (BDT), then hyperparameters.
    pub fn sweep(&mut self) -> Result<(), McmcError> {
        let n = self.state.tree.n();
        match self.state.tree {
            TreeState::Bdt(_) => {
                let locals = self.config.local_per_global.unwrap_or(n);
                if n >= 3 {
                    for _ in 0..locals {
                        self.bdt_edge_move(false)?;
                    }
                    self.bdt_edge_move(true)?;
                }
                self.bdt_type_update()?;
            }
            TreeState::Mdt(_) => {
                for _ in 0..n + 1 {
                    self.mdt_edge_move()?;
                }
            }
        }
        self.hyper_updates()?;
        self.sweeps += 1;
        if self.config.check_every > 0 && self.sweeps % self.config.check_every == 0 {
            self.check_cache()?;
        }
        Ok(())
    }

    /// Recomputes the posterior terms and compares them with the caches.
    pub fn check_cache(&self) -> Result<(), McmcError> {
        let fresh = ChainState::new(self.state.tree.clone(), self.state.hyper, self.data, self.config.model)?;
        let cached = self.state.log_prior + self.state.log_lik;
        let recomputed = fresh.log_prior + fresh.log_lik;
        let same = cached == recomputed || (cached - recomputed).abs() <= 1e-9 * recomputed.abs().max(1.0);
        if !same {
            return Err(McmcError::CacheMismatch { iteration: self.sweeps, cached, fresh: recomputed });
        }
        Ok(())
    }

    pub fn snapshot(&self, iteration: usize) -> TraceRecord {
        TraceRecord {
            iteration,
            tree: self.state.tree.tree().canonical(),
            hyper: self.state.hyper,
            log_prior: self.state.log_prior,
            log_lik: self.state.log_lik,
            per_list: self.state.per_list.clone(),
        }
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            seed: self.config.seed,
            config: self.config.clone(),
            priors: self.priors,
            actors: self.data.actor_ids(),
            data_hash: self.data.content_hash(),
        }
    }

    /// Runs the configured number of sweeps, passing each retained record to
    /// `sink` as it is produced.
    pub fn run_with(
        &mut self,
        mut sink: impl FnMut(&TraceRecord) -> Result<(), McmcError>,
    ) -> Result<(), McmcError> {
        let (burn, thin) = (self.config.burn_in, self.config.thin);
        for it in 1..=self.config.iterations {
            self.sweep()?;
            if it > burn && (it - burn) % thin == 0 {
                sink(&self.snapshot(it))?;
            }
        }
        Ok(())
    }
}

/// Runs one chain from a prior draw and collects the whole trace in memory.
pub fn run_chain(data: &RankDataset, config: &McmcConfig, priors: &HyperPriorSpec) -> Result<ChainTrace, McmcError> {
    let mut chain = Chain::new(data, config.clone(), *priors)?;
    let header = chain.header();
    let mut records = Vec::with_capacity(config.retained());
    chain.run_with(|r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(ChainTrace { header, records, acceptance: chain.acceptance() })
}

/// Posterior over every VSP on `actors` with fixed hyperparameters, by
/// enumeration. Returns MDTs with normalized probabilities.
pub fn exact_posterior(
    data: &RankDataset,
    actors: &[Actor],
    hyper: Hyperparams,
    model: ObsModel,
) -> Result<Vec<(Mdt, f64)>, McmcError> {
    if actors.len() > EXACT_POSTERIOR_BOUND {
        return Err(PosetError::OracleBoundExceeded { n: actors.len(), bound: EXACT_POSTERIOR_BOUND }.into());
    }
    let mut out = Vec::new();
    for m in enumerate_vsps(actors)? {
        let lp = vsp_log_prior(m.tree(), hyper.q);
        let (ll, _) = dataset_log_lik(data, m.tree(), model, hyper.p, hyper.phi)?;
        out.push((m, lp + ll));
    }
    let max = out.iter().map(|(_, w)| *w).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|(_, w)| (w - max).exp()).sum();
    for (_, w) in &mut out {
        *w = (*w - max).exp() / z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{ActorInfo, RankList};
    use crate::poset::PartialOrder;

    fn empty_data(n: usize) -> RankDataset {
        RankDataset::new((1..=n).map(ActorInfo::anonymous).collect(), vec![]).unwrap()
    }

    fn fixed(q: f64, p: f64, phi: f64) -> HyperPriorSpec {
        HyperPriorSpec::fixed(Hyperparams { q, p, phi })
    }

    #[test]
    fn config_validation() {
        let mut c = McmcConfig { iterations: 10, burn_in: 10, ..McmcConfig::default() };
        assert!(c.validate().is_err());
        c.burn_in = 2;
        c.thin = 0;
        assert!(c.validate().is_err());
        c.thin = 4;
        c.validate().unwrap();
        assert_eq!(c.retained(), 2);
    }

    #[test]
    fn two_actor_type_flips_match_prior() {
        let data = empty_data(2);
        let q = 0.3;
        let cfg = McmcConfig { iterations: 200_000, burn_in: 1, thin: 1, seed: 5, ..McmcConfig::default() };
        let trace = run_chain(&data, &cfg, &fixed(q, 0.5, 0.5)).unwrap();
        let chains = trace.records.iter().filter(|r| r.tree.node_type() == Some(crate::tree::NodeType::S)).count();
        let frac = chains as f64 / trace.records.len() as f64;
        assert!((frac - q).abs() < 0.01, "{frac}");
    }

    #[test]
    fn rejected_flip_keeps_state() {
        // With p = 0 every list puts 1 before 2, so 2 > 1 is impossible.
        let lists = vec![RankList::new(vec![1, 2]).unwrap(); 3];
        let data = RankDataset::new(vec![ActorInfo::anonymous(1), ActorInfo::anonymous(2)], lists).unwrap();
        let start = Bdt::from_nested(&NestedTree::S { children: vec![NestedTree::leaf(1), NestedTree::leaf(2)] }).unwrap();
        let cfg = McmcConfig { iterations: 100, burn_in: 0, thin: 1, ..McmcConfig::default() };
        let mut chain = Chain::with_state(&data, cfg, fixed(0.5, 0.0, 0.5), TreeState::Bdt(start),
            Hyperparams { q: 0.5, p: 0.0, phi: 0.5 }).unwrap();
        for _ in 0..200 {
            chain.sweep().unwrap();
            let v = chain.state.tree.tree().to_partial_order();
            assert!(!v.is_above(2, 1));
        }
    }

    #[test]
    fn zero_step_never_moves_p() {
        let data = empty_data(3);
        let cfg = McmcConfig { iterations: 500, burn_in: 0, thin: 1, step_p: 0.0, seed: 3, ..McmcConfig::default() };
        let trace = run_chain(&data, &cfg, &HyperPriorSpec::default()).unwrap();
        let p0 = trace.records[0].hyper.p;
        assert!(trace.records.iter().all(|r| r.hyper.p == p0));
        assert!(!trace.acceptance.contains_key("p"));
    }

    #[test]
    fn phi_untouched_under_up_model() {
        let data = empty_data(3);
        let cfg = McmcConfig { iterations: 200, burn_in: 0, thin: 1, model: ObsModel::QjU, ..McmcConfig::default() };
        let trace = run_chain(&data, &cfg, &HyperPriorSpec::default()).unwrap();
        let phi0 = trace.records[0].hyper.phi;
        assert!(trace.records.iter().all(|r| r.hyper.phi == phi0));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = empty_data(4);
        for param in [Parameterization::Bdt, Parameterization::Mdt] {
            let cfg = McmcConfig { iterations: 300, burn_in: 100, thin: 5, seed: 42, param, ..McmcConfig::default() };
            let a = run_chain(&data, &cfg, &HyperPriorSpec::default()).unwrap();
            let b = run_chain(&data, &cfg, &HyperPriorSpec::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.records.len(), cfg.retained());
        }
    }

    #[test]
    fn exact_posterior_basics() {
        let prior_only = exact_posterior(&empty_data(3), &[1, 2, 3], Hyperparams { q: 0.4, p: 0.1, phi: 0.5 }, ObsModel::QjU).unwrap();
        assert_eq!(prior_only.len(), 19);
        let total: f64 = prior_only.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (m, w) in &prior_only {
            assert!((w - vsp_log_prior(m.tree(), 0.4).exp()).abs() < 1e-12);
        }
        let data = RankDataset::new(
            (1..=3).map(ActorInfo::anonymous).collect(),
            vec![RankList::new(vec![1, 2, 3]).unwrap(); 5],
        )
        .unwrap();
        let post = exact_posterior(&data, &[1, 2, 3], Hyperparams { q: 0.5, p: 0.05, phi: 0.5 }, ObsModel::QjU).unwrap();
        let best = post.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.0.to_vsp(), PartialOrder::chain(&[1, 2, 3]).unwrap());
        assert!(exact_posterior(&empty_data(5), &[1, 2, 3, 4, 5], Hyperparams { q: 0.5, p: 0.1, phi: 0.5 }, ObsModel::QjU).is_err());
    }

    #[test]
    fn cache_stays_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let truth = Bdt::sample_prior(5, 0.6, &mut rng).unwrap();
        let ms: Vec<_> = (0..6).map(|_| crate::poset::ActorSubset::new((0..5).collect()).unwrap()).collect();
        let data = crate::observation::simulate_dataset(truth.tree(), ObsModel::QjB, 0.2, 0.5, &ms, &mut rng).unwrap();
        for param in [Parameterization::Bdt, Parameterization::Mdt] {
            let cfg = McmcConfig { iterations: 400, burn_in: 0, thin: 1, check_every: 1, param, model: ObsModel::QjB, ..McmcConfig::default() };
            run_chain(&data, &cfg, &HyperPriorSpec::default()).unwrap();
        }
    }
}
