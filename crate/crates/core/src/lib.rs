//! Wasserstein unsupervised reinforcement learning at desk scale.
//!
//! The crate is layered bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`ot`] | primal estimators: 1-D transport, matching matrices, sliced/projected distances, amortized credits, exact oracle |
//! | [`nn`] | feed-forward networks with hand-written reverse mode, Adam, checkpoints, finite-difference checks |
//! | [`dual`] | neural dual estimators (Kantorovich-Rubinstein and smoothed) |
//! | [`env`] | 2-D particle environments (FreeRun, TreeMaze, navigation) |
//! | [`sac`] | soft actor-critic with per-policy replay |
//! | [`train`] | multi-policy diversity training and the incremental schedule |
//! | [`eval`] | discriminator success rate, pairwise distance reports, trajectory export |
//! | [`hrl`] | meta-policy over frozen sub-policies trained with clipped policy gradients |
//!
//! Every stochastic routine takes an explicit [`Rng`]; nothing reads global randomness.

pub mod dual;
pub mod env;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod hrl;
pub mod nn;
pub mod ot;
pub mod rng;
pub mod sac;
pub mod study;
pub mod train;

pub use error::{Error, Result};
pub use rng::{Rng, SeedTree};
