//! Decentralized cooperative multi-agent Q-learning.
//!
//! The crate models cooperative stochastic games ([`game`]), computes
//! model-based ground truth ([`oracle`]), and implements sample-based
//! learners that each see only their own action: best possible Q-learning
//! with Q-tables ([`tabular`]) and with small neural networks
//! ([`neural`]), plus IQL, Hysteretic/Distributed IQL, MA2QL and a
//! centralized joint Q-learning reference. [`harness`] runs seeded
//! experiment suites and writes CSV reports.

pub mod envs;
pub mod error;
pub mod game;
pub mod harness;
pub mod neural;
pub mod oracle;
pub mod record;
pub mod replay;
pub mod seed;
pub mod tabular;

pub use error::{Error, Result};
pub use game::{
    generate_deterministic_game, generate_random_game, induced_transition, sample_step,
    DeterministicPolicyProfile, JointActionCodec, JointMdp, Transition,
};
pub use record::{EvalPoint, RunRecord};
