//! Satisfaction-aware multi-task fusion for search ranking.
//!
//! A policy picks, per query, one weight per prediction task; candidates are
//! ranked by `Σ_j w_j ln(1 + s_j)`. The policy is trained with a critic-free
//! clipped objective whose advantages combine within-query and across-query
//! normalization, against a reward mixing list engagement, a learned
//! satisfaction estimate and format penalties.
//!
//! Modules, bottom up:
//!
//! - [`fusion`]: fused scores, ranking, the discrete action grid
//! - [`satisfaction`]: the satisfaction target and its reward model
//! - [`reward`]: engagement NDCG, format penalties, the composite reward
//! - [`policy`]: the task-relation-aware policy network and its gradients
//! - [`drpo`]: advantages, the clipped surrogate, the training loop
//! - [`simenv`]: a seeded synthetic search environment
//! - [`eval`]: offline metrics and the α sensitivity analysis
//! - [`runner`]: the experiment pipeline behind the `satfusion` binary

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checkpoint;
pub mod config;
pub mod drpo;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod nn;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod runner;
pub mod satisfaction;
pub mod search;
pub mod simenv;
pub mod types;

pub use error::{Error, Result};
pub use fusion::{fuse_score, rank, ActionSpace, RankedList};
pub use rng::SeededRng;
pub use types::{Candidate, FusionAction, ItemFeedback, QueryEpisode, ScoreVector};
