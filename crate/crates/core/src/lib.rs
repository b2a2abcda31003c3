//! Emotion-aware user simulation for task-oriented dialogue.
//!
//! The crate is organised around the pieces of a simulated dialogue:
//!
//! - [`ontology`]: domains, slots, user goals, semantic actions and personas.
//! - [`emotion`]: the user's emotional state as a log-linear distribution over
//!   seven emotions, driven by elicitor features.
//! - [`user_sim`]: the agenda-based simulated user and its JSON sequence interface.
//! - [`system`]: belief tracking, database, rule policy and the trainable policy.
//! - [`rl`]: dialogue rollout, GAE and PPO training.
//! - [`lang`]: template NLG/NLU and slot error counting.
//! - [`metrics`]: F1, BLEU, self-BLEU and SER.
//! - [`probe`]: system-behaviour tagging and emotion-elicitation analysis.
//! - [`corpus`]: corpus ingestion, synthetic corpora and persona derivation.

pub mod config;
pub mod corpus;
pub mod emotion;
pub mod episode;
pub mod error;
pub mod lang;
pub mod metrics;
pub mod ontology;
pub mod probe;
pub mod rl;
pub mod seed;
pub mod system;
pub mod user_sim;
pub mod world;

pub use error::{Error, Result};
