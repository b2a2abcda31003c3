//! Dialogue rollout and PPO training of the system policy.

mod ppo;
mod rollout;

pub use ppo::{
    clipped_surrogate, curve_csv, gae_advantages, ppo_loss, ppo_update, prepare_samples, train_policy, Adam,
    CurvePoint, PPOConfig, Sample, TrainResult,
};
pub use rollout::{
    dialogue_success, eval_dialogue_seed, evaluate, run_dialogue, run_dialogue_traced, simulate, EvalResult, RewardSpec,
    SystemAgent, SystemSetup, Trajectory,
};
