//! Bayesian inference of vertex-series-parallel partial orders from noisy
//! rank-order lists.

pub mod analysis;
pub mod counting;
pub mod io;
pub mod mcmc;
pub mod observation;
pub mod poset;
pub mod prior;
pub mod tree;

pub use counting::{count_le, LeCount};
pub use observation::{ActorInfo, ObsModel, RankDataset, RankList};
pub use poset::{Actor, ActorSubset, PartialOrder, PosetError};
pub use prior::{HyperPriorSpec, Hyperparams, UnitPrior};
pub use tree::{Bdt, ClusterSummary, Mdt, NestedTree, NodeType, TreeError, TypeDraw};
