use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Channel;
use crate::episode::{EpisodeLog, TurnRecord};
use crate::error::{Error, Result};
use crate::lang::{parse_utterance, realize_system};
use crate::ontology::{SemanticAction, DONTCARE};
use crate::probe::classify_behavior;
use crate::seed;
use crate::system::{
    inject_misbehavior, policy_act, rule_policy, track, track_system, ActMode, ActionSpace, BeliefState,
    Database, Featurizer, NoiseConfig, PolicyParameters, RulePolicyConfig, NAME,
};
use crate::user_sim::{init_user, UserSimConfig, UserState};
use crate::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub per_turn: f64,
    pub success: f64,
    pub failure: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            per_turn: -1.0,
            success: 40.0,
            failure: -20.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        if [self.per_turn, self.success, self.failure].iter().all(|r| r.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("rewards must be finite".into()))
        }
    }
}

/// Who plays the system side.
#[derive(Clone, Copy, Debug)]
pub enum SystemAgent<'a> {
    Rule(&'a RulePolicyConfig),
    Learned(&'a PolicyParameters, ActMode),
    /// Uniform over master actions.
    Random,
}

#[derive(Clone, Copy, Debug)]
pub struct SystemSetup<'a> {
    pub agent: SystemAgent<'a>,
    pub noise: &'a NoiseConfig,
    pub channel: Channel,
}

impl<'a> SystemSetup<'a> {
    pub fn new(agent: SystemAgent<'a>) -> Self {
        const SILENT: &NoiseConfig = &NoiseConfig {
            neglect: 0.0,
            repeat: 0.0,
            miss_info: 0.0,
        };
        Self {
            agent,
            noise: SILENT,
            channel: Channel::Semantic,
        }
    }

    pub fn with_noise(mut self, noise: &'a NoiseConfig) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }
}

/// Decisions of a master-action policy in one dialogue.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub features: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub success: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Success means every goal domain has an offered record that satisfies the
/// user's current constraints and every requested slot was answered with that
/// record's value.
pub fn dialogue_success(user: &UserState, db: &Database) -> bool {
    user.goal.domains.iter().all(|(d, g)| {
        let Some(record) = user.offered.get(d).and_then(|name| db.find(d, name)) else {
            return false;
        };
        let constraints_hold = user.constraints[d]
            .iter()
            .all(|(s, v)| v == DONTCARE || record.get(s) == Some(v));
        let answers_hold = g.reqt.iter().all(|s| {
            user.answered
                .get(d)
                .and_then(|a| a.get(s))
                .is_some_and(|v| record.get(s) == Some(v))
        });
        constraints_hold && answers_hold && record.contains_key(NAME)
    })
}

const USER_STREAM: u64 = 1 << 20;
const SYSTEM_STREAM: u64 = 2 << 20;
const NLG_STREAM: u64 = 3 << 20;
const NOISE_STREAM: u64 = 4 << 20;

pub fn run_dialogue(
    world: &World,
    system: SystemSetup<'_>,
    user_sim: &UserSimConfig,
    reward: &RewardSpec,
    max_turns: usize,
    seed: u64,
) -> Result<EpisodeLog> {
    run_dialogue_traced(world, system, user_sim, reward, max_turns, seed).map(|(log, _)| log)
}

/// Alternates system and user turns until the user says bye, the system says
/// bye, or `max_turns` user turns have passed. The trajectory is empty for the
/// rule agent.
pub fn run_dialogue_traced(
    world: &World,
    system: SystemSetup<'_>,
    user_sim: &UserSimConfig,
    reward: &RewardSpec,
    max_turns: usize,
    seed: u64,
) -> Result<(EpisodeLog, Trajectory)> {
    if max_turns == 0 {
        return Err(Error::Config("max_turns must be positive".into()));
    }
    let (goal, persona) = user_sim.sample_user(&world.ontology, seed)?;
    let model = user_sim.model(world);
    let mut user = init_user(&goal, &persona, user_sim.variant)?;
    let mut log = EpisodeLog::new(seed, user_sim.variant, goal, persona);
    let mut traj = Trajectory::default();

    let space = ActionSpace::new(&world.ontology);
    let featurizer = Featurizer::new(&world.ontology);
    let mut belief = BeliefState::new();
    let mut sys_actions: Vec<SemanticAction> = Vec::new();
    let mut prev_sys: Vec<SemanticAction> = Vec::new();
    let mut prev_user: Vec<SemanticAction> = Vec::new();
    let mut last_decision: Option<usize> = None;

    for t in 0..max_turns {
        let t64 = t as u64;
        let system_utterance = realize_system(
            &sys_actions,
            &world.system_templates,
            &mut seed::child_rng(seed, NLG_STREAM + t64),
        )?
        .text;
        let behaviors = if t == 0 {
            BTreeSet::new()
        } else {
            classify_behavior(&sys_actions, &prev_user, &prev_sys)
        };
        let (response, next_user) = model.step(&user, &sys_actions, t, seed::derive(seed, USER_STREAM + t64))?;
        user = next_user;
        let heard = match system.channel {
            Channel::Semantic => response.actions.clone(),
            Channel::Language => parse_utterance(&response.text, &world.user_templates, &world.ontology),
        };
        belief = track(&belief, &heard, &world.ontology);

        let mut record = TurnRecord {
            turn: t,
            system_actions: sys_actions.clone(),
            system_utterance,
            behaviors,
            emotion: response.emotion,
            user_actions: response.actions.clone(),
            user_utterance: response.text,
            reward: 0.0,
        };
        if user.terminated || t + 1 == max_turns {
            log.push(record);
            break;
        }

        let decision_seed = seed::derive(seed, SYSTEM_STREAM + t64);
        let chosen = match system.agent {
            SystemAgent::Rule(cfg) => rule_policy(
                &belief,
                &world.db,
                &world.ontology,
                cfg,
                &mut seed::rng(decision_seed),
            ),
            SystemAgent::Learned(params, mode) => {
                let x = featurizer.featurize(&belief, &world.db);
                let (a, lp) = policy_act(params, &x, mode, decision_seed)?;
                traj.values.push(params.state_value(&x)?);
                traj.features.push(x);
                traj.actions.push(a);
                traj.log_probs.push(lp);
                traj.rewards.push(reward.per_turn);
                space.expand(a, &belief, &world.db, &world.ontology)?
            }
            SystemAgent::Random => {
                let x = featurizer.featurize(&belief, &world.db);
                let n = space.len();
                let a = seed::rng(decision_seed).gen_range(0..n);
                traj.values.push(0.0);
                traj.features.push(x);
                traj.actions.push(a);
                traj.log_probs.push(-(n as f64).ln());
                traj.rewards.push(reward.per_turn);
                space.expand(a, &belief, &world.db, &world.ontology)?
            }
        };
        let next = if system.noise.is_silent() {
            chosen
        } else {
            inject_misbehavior(
                &chosen,
                &belief,
                system.noise,
                &mut seed::child_rng(seed, NOISE_STREAM + t64),
            )
        };
        record.reward = reward.per_turn;
        last_decision = Some(log.turns.len());
        log.push(record);

        belief = track_system(&belief, &next);
        prev_sys = std::mem::replace(&mut sys_actions, next);
        prev_user = response.actions;
        if sys_actions.iter().any(|a| a.is("bye")) {
            break;
        }
    }

    let success = dialogue_success(&user, &world.db);
    let bonus = if success { reward.success } else { reward.failure };
    let target = last_decision.unwrap_or(log.turns.len() - 1);
    log.turns[target].reward += bonus;
    if let Some(r) = traj.rewards.last_mut() {
        *r += bonus;
    }
    traj.success = success;
    log.finish(success);
    Ok((log, traj))
}

/// `n` dialogues with seeds derived from `seed`, in seed order.
pub fn simulate(
    world: &World,
    system: SystemSetup<'_>,
    user_sim: &UserSimConfig,
    reward: &RewardSpec,
    max_turns: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<EpisodeLog>> {
    (0..n)
        .into_par_iter()
        .map(|i| run_dialogue(world, system, user_sim, reward, max_turns, seed::derive(seed, i as u64)))
        .collect()
}

/// Success rate per seed and their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    pub per_seed: Vec<f64>,
}

impl EvalResult {
    pub fn from_per_seed(per_seed: Vec<f64>) -> Self {
        let mean = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
        Self { mean, per_seed }
    }
}

/// Seed of the `i`-th evaluation dialogue under `seed`.
pub fn eval_dialogue_seed(seed: u64, i: usize) -> u64 {
    seed::derive(seed ^ 0x5EED_E7A1, i as u64)
}

/// Success rate of `system` over `n_dialogues` per seed. Learned policies act
/// greedily.
pub fn evaluate(
    world: &World,
    system: SystemSetup<'_>,
    user_sim: &UserSimConfig,
    reward: &RewardSpec,
    max_turns: usize,
    n_dialogues: usize,
    seeds: &[u64],
) -> Result<EvalResult> {
    if n_dialogues == 0 {
        return Err(Error::Empty("evaluation dialogues"));
    }
    let system = match system.agent {
        SystemAgent::Learned(p, _) => SystemSetup {
            agent: SystemAgent::Learned(p, ActMode::Greedy),
            ..system
        },
        _ => system,
    };
    let per_seed = seeds
        .iter()
        .map(|&s| {
            let wins = (0..n_dialogues)
                .into_par_iter()
                .map(|i| {
                    run_dialogue(world, system, user_sim, reward, max_turns, eval_dialogue_seed(s, i))
                        .map(|l| l.success() as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(wins.iter().sum::<usize>() as f64 / n_dialogues as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult::from_per_seed(per_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::GoalConfig;
    use crate::user_sim::SimulatorVariant;

    fn rule() -> RulePolicyConfig {
        RulePolicyConfig::default()
    }

    #[test]
    fn same_seed_same_log() {
        let w = World::bundled();
        let r = rule();
        let sim = UserSimConfig::new(SimulatorVariant::Emous);
        let a = run_dialogue(&w, SystemSetup::new(SystemAgent::Rule(&r)), &sim, &RewardSpec::default(), 20, 11).unwrap();
        let b = run_dialogue(&w, SystemSetup::new(SystemAgent::Rule(&r)), &sim, &RewardSpec::default(), 20, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dialogues_stop_at_max_turns() {
        let w = World::bundled();
        let sim = UserSimConfig::new(SimulatorVariant::AbusLike);
        for s in 0..30 {
            let l = run_dialogue(&w, SystemSetup::new(SystemAgent::Random), &sim, &RewardSpec::default(), 7, s).unwrap();
            assert!(l.turns.len() <= 7);
            assert!(l.outcome().is_some());
        }
    }

    #[test]
    fn immediate_bye_never_succeeds() {
        let w = World::bundled();
        let space = ActionSpace::new(&w.ontology);
        let dim = Featurizer::new(&w.ontology).dim();
        let mut p = PolicyParameters::zeros(dim, space.len());
        let bye = space.iter().position(|a| *a == crate::system::MasterAction::Bye).unwrap();
        p.policy[bye * dim + dim - 1] = 10.0;
        let sim = UserSimConfig::new(SimulatorVariant::Emous);
        let r = evaluate(
            &w,
            SystemSetup::new(SystemAgent::Learned(&p, ActMode::Greedy)),
            &sim,
            &RewardSpec::default(),
            20,
            20,
            &[0, 1],
        )
        .unwrap();
        assert_eq!(r.mean, 0.0);
    }

    #[test]
    fn unsatisfiable_goal_without_relaxation_fails() {
        let mut w = World::bundled();
        for r in w.db.domains.get_mut("restaurant").unwrap() {
            r.insert("area".into(), "centre".into());
        }
        let mut sim = UserSimConfig::new(SimulatorVariant::GentusLike);
        sim.agenda.relax_after_nooffer = false;
        sim.agenda.misstate_probability = 0.0;
        sim.goal = GoalConfig {
            domains: Some(vec!["restaurant".into()]),
            ..GoalConfig::minimal()
        };
        let r = rule();
        for s in 0..40 {
            let (goal, _) = sim.sample_user(&w.ontology, s).unwrap();
            if goal.domains["restaurant"].info.get("area").is_some_and(|v| v != "centre") {
                let l = run_dialogue(&w, SystemSetup::new(SystemAgent::Rule(&r)), &sim, &RewardSpec::default(), 20, s)
                    .unwrap();
                assert!(!l.success());
                return;
            }
        }
        panic!("no goal with a non-centre area constraint in 40 seeds");
    }

    #[test]
    fn terminal_bonus_lands_on_last_decision() {
        let w = World::bundled();
        let r = rule();
        let sim = UserSimConfig::new(SimulatorVariant::Emous);
        let spec = RewardSpec::default();
        let l = run_dialogue(&w, SystemSetup::new(SystemAgent::Rule(&r)), &sim, &spec, 20, 3).unwrap();
        let decisions = l.turns.iter().filter(|t| t.reward != 0.0).count();
        let bonus = if l.success() { spec.success } else { spec.failure };
        assert!((l.total_reward() - (decisions as f64 * spec.per_turn + bonus)).abs() < 1e-9);
    }
}
