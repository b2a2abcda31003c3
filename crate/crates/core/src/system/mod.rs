//! The dialogue system: belief tracking, database, a rule policy and the
//! trainable policy over master actions.

mod belief;
mod db;
mod master;
mod rule;

pub use belief::{track, track_system, BeliefState};
pub use db::{Database, Record, NAME};
pub use master::{
    log_softmax, policy_act, ActMode, ActionSpace, Featurizer, MasterAction, PolicyParameters,
    BUNDLED_FEATURE_DIM, FEATURIZATION_VERSION,
};
pub use rule::{inject_misbehavior, rule_policy, NoiseConfig, RulePolicyConfig};
