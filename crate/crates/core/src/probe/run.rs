use crate::episode::EpisodeLog;
use crate::error::Result;
use crate::rl::{simulate, RewardSpec, SystemAgent, SystemSetup};
use crate::system::{NoiseConfig, RulePolicyConfig};
use crate::user_sim::UserSimConfig;
use crate::world::World;

use super::{elicitation_table, sentiment_curve, ElicitationTable, SentimentCurve};

/// Logs and analyses of a rule system with injected misbehaviour.
#[derive(Clone, Debug)]
pub struct BehaviorProbe {
    pub logs: Vec<EpisodeLog>,
    pub elicitation: ElicitationTable,
    pub curve: SentimentCurve,
}

impl BehaviorProbe {
    /// Final-three-turn sentiment of successes minus failures.
    pub fn final_gap(&self) -> Option<f64> {
        Some(SentimentCurve::final_window(&self.logs, true)? - SentimentCurve::final_window(&self.logs, false)?)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn behavior_probe(
    world: &World,
    user_sim: &UserSimConfig,
    rule: &RulePolicyConfig,
    noise: &NoiseConfig,
    reward: &RewardSpec,
    max_turns: usize,
    episodes: usize,
    seed: u64,
) -> Result<BehaviorProbe> {
    let system = SystemSetup::new(SystemAgent::Rule(rule)).with_noise(noise);
    let logs = simulate(world, system, user_sim, reward, max_turns, episodes, seed)?;
    let elicitation = elicitation_table(&logs)?;
    let curve = sentiment_curve(&logs);
    Ok(BehaviorProbe {
        logs,
        elicitation,
        curve,
    })
}
