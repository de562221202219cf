//! Simulation of online learning to rank under click feedback, with
//! observation-free reward-poisoning attacks on UCB rankers.
//!
//! The crate covers two user models (cascade and position-based), the
//! matching UCB learners, the attack schedules and feedback transforms,
//! a seeded experiment harness and MovieLens ingestion.

pub mod attacks;
pub mod cli;
pub mod click_models;
pub mod data_ingest;
pub mod error;
pub mod harness;
pub mod rankers;
pub mod rng;
pub mod types;

pub use attacks::{cascade_ofa_params, pbm_ofa_params, Attack, CascadeOfaSchedule, PbmOfaSchedule, TargetSpec};
pub use click_models::{expected_reward, per_round_regret, ClickModelKind};
pub use error::{Error, Result};
pub use harness::{AttackKind, Experiment, ExperimentConfig, RankerKind, RunResult, Summary};
pub use rankers::{CascadeUcb1, PbmUcb, Ranker};
pub use types::{AttractionProfile, FeedbackRound, ItemId, PositionBias, RankedList};
