use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{evaluate, train_policy, EvalResult, PPOConfig, RewardSpec, SystemAgent, SystemSetup};
use crate::system::{ActMode, PolicyParameters};
use crate::user_sim::{SimulatorVariant, UserSimConfig};
use crate::world::World;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossEvalConfig {
    pub ppo: PPOConfig,
    pub reward: RewardSpec,
    pub dialogues: usize,
    pub seeds: Vec<u64>,
}

/// Training US × evaluation US success rates, plus the random policy on
/// each evaluation US.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossModelMatrix {
    pub train: Vec<SimulatorVariant>,
    pub eval: Vec<SimulatorVariant>,
    pub cells: Vec<Vec<EvalResult>>,
    pub random_baseline: Vec<EvalResult>,
}

impl CrossModelMatrix {
    pub fn cell(&self, train: SimulatorVariant, eval: SimulatorVariant) -> Option<&EvalResult> {
        let i = self.train.iter().position(|v| *v == train)?;
        let j = self.eval.iter().position(|v| *v == eval)?;
        Some(&self.cells[i][j])
    }

    pub fn baseline(&self, eval: SimulatorVariant) -> Option<&EvalResult> {
        let j = self.eval.iter().position(|v| *v == eval)?;
        Some(&self.random_baseline[j])
    }
}

/// Trains one policy per training US and seed, then evaluates each on every
/// evaluation US with that seed. `user_sim` maps a variant to its population.
pub fn cross_model(
    world: &World,
    train_variants: &[SimulatorVariant],
    eval_variants: &[SimulatorVariant],
    user_sim: impl Fn(SimulatorVariant) -> UserSimConfig + Sync,
    config: &CrossEvalConfig,
) -> Result<CrossModelMatrix> {
    if train_variants.is_empty() || eval_variants.is_empty() {
        return Err(Error::Empty("simulator variants"));
    }
    if config.seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let jobs: Vec<(SimulatorVariant, u64)> = train_variants
        .iter()
        .flat_map(|v| config.seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let policies: Vec<PolicyParameters> = jobs
        .par_iter()
        .map(|(v, s)| train_policy(world, &user_sim(*v), &config.ppo, &config.reward, *s).map(|r| r.params))
        .collect::<Result<_>>()?;

    let eval_one = |agent: SystemAgent<'_>, v: SimulatorVariant, s: u64| {
        evaluate(
            world,
            SystemSetup::new(agent),
            &user_sim(v),
            &config.reward,
            config.ppo.max_turns,
            config.dialogues,
            &[s],
        )
        .map(|r| r.mean)
    };

    let mut cells = Vec::with_capacity(train_variants.len());
    for (i, _) in train_variants.iter().enumerate() {
        let mut row = Vec::with_capacity(eval_variants.len());
        for ev in eval_variants {
            let per_seed = config
                .seeds
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let p = &policies[i * config.seeds.len() + k];
                    eval_one(SystemAgent::Learned(p, ActMode::Greedy), *ev, *s)
                })
                .collect::<Result<Vec<_>>>()?;
            row.push(EvalResult::from_per_seed(per_seed));
        }
        cells.push(row);
    }
    let random_baseline = eval_variants
        .iter()
        .map(|ev| {
            let per_seed = config
                .seeds
                .iter()
                .map(|s| eval_one(SystemAgent::Random, *ev, *s))
                .collect::<Result<Vec<_>>>()?;
            Ok(EvalResult::from_per_seed(per_seed))
        })
        .collect::<Result<_>>()?;
    Ok(CrossModelMatrix {
        train: train_variants.to_vec(),
        eval: eval_variants.to_vec(),
        cells,
        random_baseline,
    })
}
