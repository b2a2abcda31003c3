use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::belief::BeliefState;
use super::db::{Database, NAME};
use super::rule::{answers, echo_informs};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, SemanticAction, NONE};
use crate::seed;

/// Composite system moves the trainable policy chooses between.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterAction {
    /// Answer every pending request from the offered entities.
    Reply,
    /// Search the active domain; offer the first match and answer its requests.
    Offer,
    NoOffer,
    /// Ask for the first unfilled constraint of the active domain.
    RequestMissing,
    /// Echo the slot-values the user just gave.
    Confirm,
    ReqMore,
    Bye,
    /// Replay the previous system turn.
    Repeat,
    Request { domain: String, slot: String },
}

impl fmt::Display for MasterAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MasterAction::Request { domain, slot } => write!(f, "request:{domain}.{slot}"),
            other => {
                let v = serde_json::to_value(other).map_err(|_| fmt::Error)?;
                f.write_str(v.as_str().unwrap_or("?"))
            }
        }
    }
}

/// The fixed master-action list for an ontology: eight general moves then one
/// request per informable slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpace {
    actions: Vec<MasterAction>,
}

impl ActionSpace {
    pub fn new(ontology: &Ontology) -> Self {
        let mut actions = vec![
            MasterAction::Reply,
            MasterAction::Offer,
            MasterAction::NoOffer,
            MasterAction::RequestMissing,
            MasterAction::Confirm,
            MasterAction::ReqMore,
            MasterAction::Bye,
            MasterAction::Repeat,
        ];
        for (d, schema) in &ontology.domains {
            for s in schema.informable.keys() {
                actions.push(MasterAction::Request {
                    domain: d.clone(),
                    slot: s.clone(),
                });
            }
        }
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&MasterAction> {
        self.actions.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MasterAction> {
        self.actions.iter()
    }

    /// Turns a master action into concrete system actions. Moves with nothing
    /// to say fall back to `reqmore`.
    pub fn expand(
        &self,
        index: usize,
        belief: &BeliefState,
        db: &Database,
        ontology: &Ontology,
    ) -> Result<Vec<SemanticAction>> {
        let action = self.get(index).ok_or(Error::Dimension {
            expected: self.len(),
            got: index,
        })?;
        let active = belief.active_domain.as_deref();
        let empty = Default::default();
        let mut out = match action {
            MasterAction::Reply => belief
                .offered
                .iter()
                .filter_map(|(d, name)| db.find(d, name).map(|r| answers(d, r, belief)))
                .flatten()
                .collect(),
            MasterAction::Offer => match active {
                Some(d) => {
                    let c = belief.constraints_of(d).unwrap_or(&empty);
                    match db.query(d, c)?.first() {
                        Some(r) => {
                            let mut v = vec![SemanticAction::new("offer", d, NAME, &r[NAME])];
                            v.extend(answers(d, r, belief));
                            v
                        }
                        None => vec![SemanticAction::new("nooffer", d, NONE, NONE)],
                    }
                }
                None => vec![],
            },
            MasterAction::NoOffer => active
                .map(|d| vec![SemanticAction::new("nooffer", d, NONE, NONE)])
                .unwrap_or_default(),
            MasterAction::RequestMissing => active
                .and_then(|d| {
                    let c = belief.constraints_of(d).unwrap_or(&empty);
                    ontology
                        .domain(d)?
                        .informable
                        .keys()
                        .find(|s| !c.contains_key(*s))
                        .map(|s| vec![SemanticAction::new("request", d, s, NONE)])
                })
                .unwrap_or_default(),
            MasterAction::Confirm => echo_informs(belief, ontology),
            MasterAction::ReqMore => vec![],
            MasterAction::Bye => vec![SemanticAction::general("bye")],
            MasterAction::Repeat => belief.last_system_actions.clone(),
            MasterAction::Request { domain, slot } => vec![SemanticAction::new("request", domain, slot, NONE)],
        };
        if out.is_empty() {
            out.push(SemanticAction::general("reqmore"));
        }
        Ok(out)
    }
}

/// Version tag written into persisted policy parameters.
pub const FEATURIZATION_VERSION: &str = "belief-v1";

/// Dimension of [`Featurizer`] on the bundled ontology.
pub const BUNDLED_FEATURE_DIM: usize = 48;

const TURN_BUCKETS: [usize; 3] = [2, 4, 8];

/// Encodes a belief as: constraint-filled flags, requested flags,
/// active-domain one-hot, match-count bucket {0, 1-3, >3}, offered flag,
/// booked flag, turn bucket {0-1, 2-3, 4-7, 8+}, last user intents, bias.
#[derive(Clone, Debug)]
pub struct Featurizer {
    informable: Vec<(String, String)>,
    requestable: Vec<(String, String)>,
    domains: Vec<String>,
    user_intents: Vec<String>,
}

impl Featurizer {
    pub fn new(ontology: &Ontology) -> Self {
        let mut informable = Vec::new();
        let mut requestable = Vec::new();
        for (d, schema) in &ontology.domains {
            informable.extend(schema.informable.keys().map(|s| (d.clone(), s.clone())));
            requestable.extend(schema.requestable.iter().map(|s| (d.clone(), s.clone())));
        }
        Self {
            informable,
            requestable,
            domains: ontology.domains.keys().cloned().collect(),
            user_intents: ontology.user_intents.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.informable.len() + self.requestable.len() + self.domains.len() + 3 + 2 + 4 + self.user_intents.len() + 1
    }

    pub fn featurize(&self, belief: &BeliefState, db: &Database) -> Vec<f64> {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let mut x = Vec::with_capacity(self.dim());
        for (d, s) in &self.informable {
            x.push(flag(belief.constraints.get(d).is_some_and(|c| c.contains_key(s))));
        }
        for (d, s) in &self.requestable {
            x.push(flag(belief.requested.iter().any(|(rd, rs)| rd == d && rs == s)));
        }
        let active = belief.active_domain.as_deref();
        for d in &self.domains {
            x.push(flag(active == Some(d.as_str())));
        }
        let matches = active.and_then(|d| {
            let empty = Default::default();
            db.query(d, belief.constraints.get(d).unwrap_or(&empty)).ok().map(|m| m.len())
        });
        x.push(flag(matches == Some(0)));
        x.push(flag(matches.is_some_and(|n| (1..=3).contains(&n))));
        x.push(flag(matches.is_some_and(|n| n > 3)));
        x.push(flag(active.is_some_and(|d| belief.offered.contains_key(d))));
        x.push(flag(active.is_some_and(|d| belief.booked.contains(d))));
        let bucket = TURN_BUCKETS.iter().filter(|&&t| belief.turn >= t).count();
        for i in 0..4 {
            x.push(flag(i == bucket));
        }
        for intent in &self.user_intents {
            x.push(flag(belief.last_user_actions.iter().any(|a| &a.intent == intent)));
        }
        x.push(1.0);
        x
    }
}

/// Linear softmax policy and linear value function over belief features.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParameters {
    pub dim: usize,
    pub n_actions: usize,
    /// Row-major `n_actions × dim`.
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
}

impl PolicyParameters {
    pub fn zeros(dim: usize, n_actions: usize) -> Self {
        Self {
            dim,
            n_actions,
            policy: vec![0.0; dim * n_actions],
            value: vec![0.0; dim],
        }
    }

    /// Small random policy weights, zero value weights.
    pub fn random(dim: usize, n_actions: usize, scale: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut p = Self::zeros(dim, n_actions);
        for w in &mut p.policy {
            *w = rng.gen_range(-scale..=scale);
        }
        p
    }

    pub fn n_params(&self) -> usize {
        self.policy.len() + self.value.len()
    }

    pub fn is_finite(&self) -> bool {
        self.policy.iter().chain(&self.value).all(|w| w.is_finite())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self
            .policy
            .chunks(self.dim)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    pub fn log_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(log_softmax(&self.logits(x)?))
    }

    pub fn state_value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value.iter().zip(x).map(|(w, v)| w * v).sum())
    }

    /// `[header, policy rows, value weights]`.
    pub fn to_json(&self) -> String {
        let rows: Vec<&[f64]> = self.policy.chunks(self.dim).collect();
        let v = json!([
            {"featurization": FEATURIZATION_VERSION, "dim": self.dim, "actions": self.n_actions},
            rows,
            self.value,
        ]);
        serde_json::to_string_pretty(&v).expect("numbers serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let parts = v
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| Error::schema("policy", "expected [header, policy, value]"))?;
        let header = &parts[0];
        if header["featurization"] != FEATURIZATION_VERSION {
            return Err(Error::schema(
                "policy.header.featurization",
                format!("expected {FEATURIZATION_VERSION}, got {}", header["featurization"]),
            ));
        }
        let size = |k: &str| {
            header[k]
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::schema(format!("policy.header.{k}"), "not an integer"))
        };
        let (dim, n_actions) = (size("dim")?, size("actions")?);
        let rows: Vec<Vec<f64>> = serde_json::from_value(parts[1].clone())?;
        let value: Vec<f64> = serde_json::from_value(parts[2].clone())?;
        if rows.len() != n_actions || rows.iter().any(|r| r.len() != dim) || value.len() != dim {
            return Err(Error::schema("policy", "shape disagrees with header"));
        }
        Ok(Self {
            dim,
            n_actions,
            policy: rows.concat(),
            value,
        })
    }
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Picks a master action; greedy ties go to the lowest index.
pub fn policy_act(params: &PolicyParameters, x: &[f64], mode: ActMode, seed: u64) -> Result<(usize, f64)> {
    let lp = params.log_probs(x)?;
    let index = match mode {
        ActMode::Greedy => {
            let mut best = 0;
            for (i, v) in lp.iter().enumerate() {
                if *v > lp[best] {
                    best = i;
                }
            }
            best
        }
        ActMode::Sample => {
            let u: f64 = seed::rng(seed).gen();
            let mut acc = 0.0;
            let mut pick = lp.len() - 1;
            for (i, v) in lp.iter().enumerate() {
                acc += v.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    Ok((index, lp[index]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::belief::track;

    #[test]
    fn bundled_dimension() {
        let f = Featurizer::new(&Ontology::bundled());
        assert_eq!(f.dim(), BUNDLED_FEATURE_DIM);
        assert_eq!(f.featurize(&BeliefState::new(), &Database::bundled()).len(), BUNDLED_FEATURE_DIM);
    }

    #[test]
    fn empty_belief_has_no_constraint_flags() {
        let o = Ontology::bundled();
        let f = Featurizer::new(&o);
        let x = f.featurize(&BeliefState::new(), &Database::bundled());
        assert!(x[..13].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn untracked_field_does_not_change_features() {
        let o = Ontology::bundled();
        let f = Featurizer::new(&o);
        let db = Database::bundled();
        let a = track(
            &BeliefState::new(),
            &[SemanticAction::new("inform", "hotel", "area", "north")],
            &o,
        );
        let mut b = a.clone();
        b.user_done = true;
        b.last_system_actions = vec![SemanticAction::general("reqmore")];
        assert_eq!(f.featurize(&a, &db), f.featurize(&b, &db));
    }

    #[test]
    fn action_space_size() {
        let s = ActionSpace::new(&Ontology::bundled());
        assert_eq!(s.len(), 21);
        assert_eq!(s.get(0), Some(&MasterAction::Reply));
    }

    #[test]
    fn zero_params_greedy_takes_first() {
        let p = PolicyParameters::zeros(4, 5);
        let (a, lp) = policy_act(&p, &[1.0, 0.0, 2.0, 1.0], ActMode::Greedy, 0).unwrap();
        assert_eq!(a, 0);
        assert!((lp - (0.2f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn dominant_action_has_log_prob_near_zero() {
        let mut p = PolicyParameters::zeros(2, 5);
        p.policy[3 * 2 + 1] = 100.0;
        let (a, lp) = policy_act(&p, &[0.0, 1.0], ActMode::Greedy, 0).unwrap();
        assert_eq!(a, 3);
        let expected = -(4.0 * (-100.0f64).exp()).ln_1p();
        assert!((lp - expected).abs() < 1e-15 && lp.abs() < 1e-40);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = PolicyParameters::random(3, 6, 1.0, 9);
        let x = [0.3, -1.0, 1.0];
        let a = policy_act(&p, &x, ActMode::Sample, 42).unwrap();
        assert_eq!(a, policy_act(&p, &x, ActMode::Sample, 42).unwrap());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = PolicyParameters::random(3, 6, 5.0, 1);
        let s: f64 = p.log_probs(&[1.0, 2.0, -1.0]).unwrap().iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = PolicyParameters::zeros(3, 2);
        assert!(matches!(
            policy_act(&p, &[1.0], ActMode::Greedy, 0),
            Err(Error::Dimension { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let p = PolicyParameters::random(4, 3, 1.0, 5);
        assert_eq!(PolicyParameters::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = PolicyParameters::zeros(1, 1).to_json().replace(FEATURIZATION_VERSION, "old");
        assert!(PolicyParameters::from_json(&text).is_err());
    }

    #[test]
    fn reqmore_fallback_for_empty_moves() {
        let o = Ontology::bundled();
        let s = ActionSpace::new(&o);
        let out = s.expand(0, &BeliefState::new(), &Database::bundled(), &o).unwrap();
        assert_eq!(out, vec![SemanticAction::general("reqmore")]);
    }
}
