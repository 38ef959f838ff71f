//! Robust actor-critic contextual bandit.
//!
//! The learner fits a linear expected-reward model (the critic) under a
//! capped squared loss whose threshold is chosen by the boxplot rule on the
//! squared residuals. Samples whose residual exceeds the cap get weight
//! zero, and the same binary weights are carried into the actor, which
//! maximizes a penalized average reward of a two-action Boltzmann policy.
//!
//! Around the learner the crate ships everything needed to run the
//! comparison experiments: a parametric micro-randomized-trial simulator
//! with outlier injection ([`envsim`]), Lin-UCB and the uncapped
//! actor-critic baseline ([`baselines`]), and the long-run average reward
//! evaluation and sweep drivers ([`evalharness`]).

pub mod actor;
pub mod baselines;
pub mod config;
pub mod critic;
pub mod envsim;
pub mod error;
pub mod evalharness;
pub mod features;
mod linalg;
pub mod optim;
pub mod rng;

pub use actor::{fit_actor, fit_actor_critic, ActorConfig, ActorCriticFit, ActorFit};
pub use baselines::{fit_s_accb, LinUcbState};
pub use config::{load_config, RunConfig};
pub use critic::{fit_critic, CriticConfig, CriticFit};
pub use envsim::{OutlierConfig, SimConfig, Trajectory, Tuple};
pub use error::{Error, Result};
pub use evalharness::{EvalConfig, ExperimentReport, Method};
pub use features::{Action, PolicyParams};
