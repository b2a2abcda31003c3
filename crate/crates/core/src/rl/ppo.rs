use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rollout::{run_dialogue_traced, RewardSpec, SystemAgent, SystemSetup, Trajectory};
use crate::error::{Error, Result};
use crate::seed;
use crate::system::{log_softmax, ActMode, ActionSpace, Featurizer, PolicyParameters};
use crate::user_sim::UserSimConfig;
use crate::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PPOConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    /// System decisions collected per epoch.
    pub turns_per_epoch: usize,
    pub minibatch_size: usize,
    pub update_passes: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    pub seeds: usize,
    pub max_turns: usize,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 20,
            turns_per_epoch: 200,
            minibatch_size: 64,
            update_passes: 4,
            learning_rate: 0.05,
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: true,
            seeds: 3,
            max_turns: 20,
        }
    }
}

impl PPOConfig {
    pub fn paper_scale(mut self) -> Self {
        self.epochs = 200;
        self.turns_per_epoch = 1000;
        self.seeds = 5;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in [0, 1]".into()));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::Config("clip must be positive".into()));
        }
        if self.turns_per_epoch == 0
            || self.minibatch_size == 0
            || self.update_passes == 0
            || self.seeds == 0
            || self.max_turns == 0
        {
            return Err(Error::Config("PPO sizes must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Seed list derived from a base seed.
    pub fn seed_list(&self, base: u64) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| base + i).collect()
    }
}

/// Generalised advantage estimates and returns; the value after the last step is 0.
pub fn gae_advantages(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let n = traj.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { traj.values[t + 1] } else { 0.0 };
        let delta = traj.rewards[t] + gamma * next_value - traj.values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// One decision prepared for the update.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub target: f64,
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Loss `-mean(surrogate) + c_v·mean((V - R)²) - c_e·mean(H)` and its gradient
/// over `[policy, value]` parameters.
pub fn ppo_loss(params: &PolicyParameters, batch: &[Sample], config: &PPOConfig) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("PPO batch"));
    }
    let (d, k) = (params.dim, params.n_actions);
    let m = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.n_params()];
    let (gp, gv) = grad.split_at_mut(d * k);
    for s in batch {
        let lp = log_softmax(&params.logits(&s.features)?);
        let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        let ratio = (lp[s.action] - s.old_log_prob).exp();
        let surrogate = clipped_surrogate(ratio, s.advantage, config.clip);
        let entropy: f64 = -probs.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        let value = params.state_value(&s.features)?;
        loss += (-surrogate + config.value_coef * (value - s.target).powi(2) - config.entropy_coef * entropy) / m;

        // d(loss)/d(logit_b), accumulated then spread over the feature row.
        let mut dz = vec![0.0; k];
        if ratio * s.advantage <= ratio.clamp(1.0 - config.clip, 1.0 + config.clip) * s.advantage {
            let c = -s.advantage * ratio;
            for (b, g) in dz.iter_mut().enumerate() {
                *g += c * ((b == s.action) as u8 as f64 - probs[b]);
            }
        }
        for (b, g) in dz.iter_mut().enumerate() {
            *g += config.entropy_coef * probs[b] * (lp[b] + entropy);
        }
        for (b, g) in dz.iter().enumerate() {
            if *g != 0.0 {
                for (w, x) in gp[b * d..(b + 1) * d].iter_mut().zip(&s.features) {
                    *w += g * x / m;
                }
            }
        }
        let cv = 2.0 * config.value_coef * (value - s.target);
        for (w, x) in gv.iter_mut().zip(&s.features) {
            *w += cv * x / m;
        }
    }
    Ok((loss, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Descends `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.epsilon);
        }
    }
}

/// Flattens trajectories into samples with GAE advantages, optionally
/// standardised across the batch.
pub fn prepare_samples(batch: &[Trajectory], config: &PPOConfig) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for traj in batch.iter().filter(|t| !t.is_empty()) {
        let (adv, ret) = gae_advantages(traj, config.gamma, config.lambda)?;
        for i in 0..traj.len() {
            samples.push(Sample {
                features: traj.features[i].clone(),
                action: traj.actions[i],
                old_log_prob: traj.log_probs[i],
                advantage: adv[i],
                target: ret[i],
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::Empty("PPO batch"));
    }
    if config.normalize_advantages && samples.len() > 1 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-8);
        for s in &mut samples {
            s.advantage = (s.advantage - mean) / sd;
        }
    }
    Ok(samples)
}

/// Several passes of minibatch Adam steps on the clipped objective. A
/// non-finite gradient aborts the update and leaves `params` untouched.
pub fn ppo_update(
    params: &PolicyParameters,
    batch: &[Trajectory],
    config: &PPOConfig,
    optimizer: &mut Adam,
    seed: u64,
) -> Result<PolicyParameters> {
    let samples = prepare_samples(batch, config)?;
    let mut next = params.clone();
    let mut flat: Vec<f64> = next.policy.iter().chain(&next.value).copied().collect();
    let split = next.policy.len();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = seed::rng(seed);
    let mut adam = optimizer.clone();
    for _ in 0..config.update_passes {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            let mb: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (_, grad) = ppo_loss(&next, &mb, config)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient);
            }
            adam.step(&mut flat, &grad);
            next.policy.copy_from_slice(&flat[..split]);
            next.value.copy_from_slice(&flat[split..]);
        }
    }
    if !next.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    *optimizer = adam;
    Ok(next)
}

/// Per-epoch statistics of the sampling policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub params: PolicyParameters,
    pub curve: Vec<CurvePoint>,
    pub skipped_updates: usize,
}

const ROLLOUT_CHUNK: usize = 16;

/// Collects dialogues in parallel chunks until `turns` decisions are gathered.
fn collect(
    world: &World,
    params: &PolicyParameters,
    user_sim: &UserSimConfig,
    reward: &RewardSpec,
    config: &PPOConfig,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    let mut steps = 0;
    let mut next = 0u64;
    let system = SystemSetup::new(SystemAgent::Learned(params, ActMode::Sample));
    while steps < config.turns_per_epoch {
        let chunk = (next..next + ROLLOUT_CHUNK as u64)
            .into_par_iter()
            .map(|i| {
                run_dialogue_traced(world, system, user_sim, reward, config.max_turns, seed::derive(seed, i))
                    .map(|(_, t)| t)
            })
            .collect::<Result<Vec<_>>>()?;
        next += ROLLOUT_CHUNK as u64;
        for t in chunk {
            if steps >= config.turns_per_epoch {
                break;
            }
            steps += t.len();
            out.push(t);
        }
    }
    Ok(out)
}

/// PPO from a uniform (zero) policy against one user population.
pub fn train_policy(
    world: &World,
    user_sim: &UserSimConfig,
    config: &PPOConfig,
    reward: &RewardSpec,
    seed: u64,
) -> Result<TrainResult> {
    config.validate()?;
    user_sim.validate()?;
    let dim = Featurizer::new(&world.ontology).dim();
    let n_actions = ActionSpace::new(&world.ontology).len();
    let mut params = PolicyParameters::zeros(dim, n_actions);
    let mut adam = Adam::new(params.n_params(), config.learning_rate);
    let mut curve = Vec::with_capacity(config.epochs);
    let mut skipped = 0;
    for epoch in 0..config.epochs {
        let epoch_seed = seed::derive(seed, epoch as u64);
        let batch = collect(world, &params, user_sim, reward, config, epoch_seed)?;
        let n = batch.len() as f64;
        curve.push(CurvePoint {
            epoch,
            mean_return: batch.iter().map(Trajectory::total_reward).sum::<f64>() / n,
            success_rate: batch.iter().filter(|t| t.success).count() as f64 / n,
            seed,
        });
        match ppo_update(&params, &batch, config, &mut adam, seed::derive(epoch_seed, u64::MAX)) {
            Ok(p) => params = p,
            Err(Error::NonFiniteGradient) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(TrainResult {
        params,
        curve,
        skipped_updates: skipped,
    })
}

/// Writes `epoch,mean_return,success_rate,seed` rows.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("epoch,mean_return,success_rate,seed\n");
    for p in curve {
        s.push_str(&format!("{},{:.6},{:.6},{}\n", p.epoch, p.mean_return, p.success_rate, p.seed));
    }
    s
}
