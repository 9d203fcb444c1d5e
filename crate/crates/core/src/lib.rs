//! Variational temporal item response theory.
//!
//! Learner ability follows a Wiener process and responses follow the 2PL
//! model. Approximate posteriors over ability trajectories are formed by
//! attaching per-response Gaussian *ability potentials* (emitted by a small
//! recognition network) to the Wiener prior and aggregating them backwards
//! in time into a linear Gaussian chain ([`kernel`]). Everything here is
//! allocation-only numeric code; IO, randomness and the training loop live
//! in the `vtirt` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod elbo;
pub mod error;
pub mod kernel;
pub mod math;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod params;
pub mod predict;
pub mod recognition;
pub mod scalar;
pub mod tape;

pub use error::{Error, Result};
pub use kernel::{AbilityPotential, BackwardAggregate, LgmPosterior, Marginals};
pub use model::{InteractionRecord, ItemParams, ModelConfig, Trajectory};
pub use params::{Layout, ParamStore};
pub use elbo::Variant;
pub use predict::TrainedModel;
pub use scalar::Scalar;
pub use tape::{Tape, Var};
