//! The simulated user.
//!
//! Each turn runs agenda update → elicitor features → emotion distribution →
//! neutral reweighting → emotion sampling → action selection → NLG. The three
//! variants share the agenda machinery; only `emous` samples emotions.

mod sequence;

use std::fmt;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use sequence::{
    parse_input, parse_user_output, serialize_input, serialize_output, SequenceError, SequenceInput,
};

use crate::emotion::{
    emotion_distribution, extract_features, reweight_neutral, sample_emotion_with, ElicitorFeatures,
    Emotion, EmotionDistribution, EmotionWeights, ProgressSummary,
};
use crate::error::{Error, Result};
use crate::lang::{realize_user, TemplateSet};
use crate::system::Database;
use crate::ontology::{
    sample_goal, sample_persona, Conduct, EventEmotion, GoalConfig, Ontology, Persona, PersonaConfig, SemanticAction,
    UserGoal, DONTCARE, GENERAL, NONE,
};
use crate::world::World;
use crate::seed;

/// Number of past user turns visible to the emotion model.
pub const HISTORY_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorVariant {
    /// Emotion-aware user.
    Emous,
    /// Same agenda policy, emotion pathway removed.
    GentusLike,
    /// Hand-coded agenda only: fixed pop distribution, no slips, no thanks.
    AbusLike,
}

impl SimulatorVariant {
    pub const ALL: [SimulatorVariant; 3] = [
        SimulatorVariant::Emous,
        SimulatorVariant::GentusLike,
        SimulatorVariant::AbusLike,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimulatorVariant::Emous => "emous",
            SimulatorVariant::GentusLike => "gentus_like",
            SimulatorVariant::AbusLike => "abus_like",
        }
    }
}

impl fmt::Display for SimulatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SimulatorVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SimulatorVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown simulator variant `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgendaConfig {
    /// Probabilities of popping 1, 2 or 3 agenda items.
    pub pop_weights: [f64; 3],
    /// Pop distribution of the `abus_like` variant.
    pub abus_pop_weights: [f64; 3],
    /// Relax the least recently informed constraint after a nooffer.
    pub relax_after_nooffer: bool,
    /// Chance that an inform carries a wrong value, corrected later.
    pub misstate_probability: f64,
    /// Chance that a satisfied user appends a thank.
    pub thank_probability: f64,
    /// Consecutive failed searches after which the user leaves.
    pub give_up_after: u32,
}

impl Default for AgendaConfig {
    fn default() -> Self {
        Self {
            pop_weights: [1.0 / 3.0; 3],
            abus_pop_weights: [0.5, 0.3, 0.2],
            relax_after_nooffer: true,
            misstate_probability: 0.05,
            thank_probability: 0.3,
            give_up_after: 4,
        }
    }
}

impl AgendaConfig {
    pub fn validate(&self) -> Result<()> {
        for w in [self.pop_weights, self.abus_pop_weights] {
            if w.iter().any(|p| !(0.0..=1.0).contains(p)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("pop weights {w:?} are not a distribution")));
            }
        }
        for (name, p) in [
            ("misstate_probability", self.misstate_probability),
            ("thank_probability", self.thank_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Everything that defines a simulated user population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSimConfig {
    pub variant: SimulatorVariant,
    pub w_neutral: f64,
    pub goal: GoalConfig,
    pub persona: PersonaConfig,
    pub agenda: AgendaConfig,
}

impl UserSimConfig {
    pub fn new(variant: SimulatorVariant) -> Self {
        Self {
            variant,
            w_neutral: 1.0,
            goal: GoalConfig::default(),
            persona: PersonaConfig::default(),
            agenda: AgendaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.persona.validate()?;
        self.agenda.validate()?;
        if self.w_neutral.is_nan() || self.w_neutral < 0.0 {
            return Err(Error::NegativeWeight(self.w_neutral));
        }
        Ok(())
    }

    /// Goal and persona of the user in episode `seed`.
    pub fn sample_user(&self, ontology: &Ontology, seed: u64) -> Result<(UserGoal, Persona)> {
        let goal = sample_goal(ontology, &self.goal, seed::derive(seed, 0))?;
        let persona = sample_persona(&goal, &self.persona, seed::derive(seed, 1))?;
        Ok((goal, persona))
    }

    pub fn model<'a>(&'a self, world: &'a World) -> UserModel<'a> {
        UserModel {
            ontology: &world.ontology,
            db: &world.db,
            templates: &world.user_templates,
            weights: &world.weights,
            agenda: &self.agenda,
            w_neutral: self.w_neutral,
        }
    }
}

/// A wrong value the user gave and has not yet corrected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misstatement {
    pub domain: String,
    pub slot: String,
    pub wrong: String,
    pub correct: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub variant: SimulatorVariant,
    pub goal: UserGoal,
    pub persona: Persona,
    /// Current constraints; relaxation may turn values into `dontcare`.
    pub constraints: IndexMap<String, IndexMap<String, String>>,
    /// Pending actions, top of stack last.
    pub agenda: Vec<SemanticAction>,
    /// Informed (domain, slot) pairs, least recent first.
    pub informed: Vec<(String, String)>,
    /// Requests issued and not yet answered, oldest first.
    pub pending_requests: Vec<(String, String)>,
    pub answered: IndexMap<String, IndexMap<String, String>>,
    /// Entity currently offered per domain.
    pub offered: IndexMap<String, String>,
    pub last_emotion: Emotion,
    pub failures: u32,
    pub misstated: Option<Misstatement>,
    /// Last user turns, oldest first, at most [`HISTORY_WINDOW`].
    pub history: Vec<Vec<SemanticAction>>,
    pub last_system: Vec<SemanticAction>,
    pub turn: usize,
    pub terminated: bool,
}

impl UserState {
    /// Every goal domain has an offered entity and every request an answer.
    pub fn goal_complete(&self) -> bool {
        self.goal.domains.iter().all(|(d, g)| {
            self.offered.contains_key(d)
                && g.reqt
                    .iter()
                    .all(|s| self.answered.get(d).is_some_and(|a| a.contains_key(s)))
        })
    }

    /// Domain the user is currently working on.
    pub fn active_domain(&self) -> Option<&str> {
        self.agenda
            .iter()
            .rev()
            .find(|a| a.domain != GENERAL)
            .map(|a| a.domain.as_str())
            .or_else(|| {
                self.history
                    .iter()
                    .rev()
                    .flat_map(|t| t.iter().rev())
                    .find(|a| a.domain != GENERAL)
                    .map(|a| a.domain.as_str())
            })
            .or_else(|| self.goal.domain_names().next())
    }

    fn remove_from_agenda(&mut self, pred: impl Fn(&SemanticAction) -> bool) {
        self.agenda.retain(|a| !pred(a));
    }

    fn push_inform(&mut self, domain: &str, slot: &str, value: &str) {
        self.remove_from_agenda(|a| a.is("inform") && a.domain == domain && a.slot == slot);
        self.agenda.push(SemanticAction::new("inform", domain, slot, value));
    }

    fn touch_informed(&mut self, domain: &str, slot: &str) {
        self.informed.retain(|(d, s)| !(d == domain && s == slot));
        self.informed.push((domain.to_string(), slot.to_string()));
    }
}

/// Seeds the agenda domain by domain, informs before requests, so the first
/// goal constraint is on top.
pub fn init_user(goal: &UserGoal, persona: &Persona, variant: SimulatorVariant) -> Result<UserState> {
    persona.check_against(goal)?;
    let mut ordered = Vec::new();
    for (d, g) in &goal.domains {
        for (s, v) in &g.info {
            ordered.push(SemanticAction::new("inform", d, s, v));
        }
        for s in &g.reqt {
            ordered.push(SemanticAction::new("request", d, s, NONE));
        }
    }
    ordered.reverse();
    Ok(UserState {
        variant,
        goal: goal.clone(),
        persona: persona.clone(),
        constraints: goal
            .domains
            .iter()
            .map(|(d, g)| (d.clone(), g.info.clone()))
            .collect(),
        agenda: ordered,
        informed: Vec::new(),
        pending_requests: Vec::new(),
        answered: IndexMap::new(),
        offered: IndexMap::new(),
        last_emotion: Emotion::Neutral,
        failures: 0,
        misstated: None,
        history: Vec::new(),
        last_system: Vec::new(),
        turn: 0,
        terminated: false,
    })
}

/// Applies the stacking rules for one system turn.
/// Offers are checked against `db`: an entity that violates a binding
/// constraint is rejected with a negate and a re-inform.
pub fn agenda_update(
    state: &UserState,
    system_actions: &[SemanticAction],
    config: &AgendaConfig,
    db: &Database,
) -> UserState {
    let mut st = state.clone();
    st.failures = ProgressSummary::next_failures(st.failures, system_actions);
    for a in system_actions {
        match a.intent.as_str() {
            "request" if a.slot != NONE => {
                let value = st
                    .constraints
                    .get(&a.domain)
                    .and_then(|c| c.get(&a.slot))
                    .cloned()
                    .unwrap_or_else(|| DONTCARE.to_string());
                if st
                    .misstated
                    .as_ref()
                    .is_some_and(|m| m.domain == a.domain && m.slot == a.slot)
                {
                    st.misstated = None;
                }
                st.push_inform(&a.domain, &a.slot, &value);
            }
            "inform" => {
                let wants = st
                    .goal
                    .domains
                    .get(&a.domain)
                    .is_some_and(|g| g.reqt.contains(&a.slot));
                if wants {
                    st.answered
                        .entry(a.domain.clone())
                        .or_default()
                        .insert(a.slot.clone(), a.value.clone());
                    st.remove_from_agenda(|x| x.is("request") && x.domain == a.domain && x.slot == a.slot);
                    st.pending_requests.retain(|(d, s)| !(*d == a.domain && *s == a.slot));
                    continue;
                }
                let expected = st.constraints.get(&a.domain).and_then(|c| c.get(&a.slot)).cloned();
                if let Some(expected) = expected {
                    if expected != DONTCARE && a.value != expected {
                        st.push_inform(&a.domain, &a.slot, &expected);
                        st.agenda.retain(|x| !x.is("negate"));
                        st.agenda.push(SemanticAction::general("negate"));
                        if st
                            .misstated
                            .as_ref()
                            .is_some_and(|m| m.domain == a.domain && m.slot == a.slot)
                        {
                            st.misstated = None;
                        }
                    }
                }
            }
            "nooffer" => {
                st.offered.shift_remove(&a.domain);
                if config.relax_after_nooffer {
                    relax(&mut st, &a.domain);
                }
            }
            "offer" => {
                if let Some((slot, value)) = violated_constraint(&st, db, &a.domain, &a.value) {
                    st.offered.shift_remove(&a.domain);
                    st.push_inform(&a.domain, &slot, &value);
                    st.agenda.retain(|x| !x.is("negate"));
                    st.agenda.push(SemanticAction::general("negate"));
                } else if st.offered.get(&a.domain) != Some(&a.value) {
                    st.offered.insert(a.domain.clone(), a.value.clone());
                    let previously: Vec<String> = st
                        .answered
                        .shift_remove(&a.domain)
                        .map(|m| m.into_keys().collect())
                        .unwrap_or_default();
                    for s in previously {
                        st.agenda.push(SemanticAction::new("request", &a.domain, &s, NONE));
                    }
                    let constraints_done = !st
                        .agenda
                        .iter()
                        .any(|x| x.is("inform") && x.domain == a.domain);
                    if constraints_done && !st.agenda.iter().any(|x| x.is("affirm")) {
                        st.agenda.push(SemanticAction::general("affirm"));
                    }
                }
            }
            _ => {}
        }
    }
    st
}

fn violated_constraint(st: &UserState, db: &Database, domain: &str, name: &str) -> Option<(String, String)> {
    let constraints = st.constraints.get(domain)?;
    let record = db.find(domain, name);
    constraints
        .iter()
        .find(|(s, v)| *v != DONTCARE && record.is_none_or(|r| r.get(*s) != Some(*v)))
        .map(|(s, v)| (s.clone(), v.clone()))
}

/// Drops the least recently informed, still-binding constraint of a domain.
fn relax(st: &mut UserState, domain: &str) {
    let Some(constraints) = st.constraints.get(domain) else {
        return;
    };
    let binding = |s: &str| constraints.get(s).is_some_and(|v| v != DONTCARE);
    let slot = st
        .informed
        .iter()
        .filter(|(d, s)| d == domain && binding(s))
        .map(|(_, s)| s.clone())
        .next()
        .or_else(|| constraints.iter().find(|(_, v)| *v != DONTCARE).map(|(s, _)| s.clone()));
    if let Some(slot) = slot {
        st.constraints
            .get_mut(domain)
            .expect("domain present")
            .insert(slot.clone(), DONTCARE.to_string());
        if st.misstated.as_ref().is_some_and(|m| m.domain == domain && m.slot == slot) {
            st.misstated = None;
        }
        st.push_inform(domain, &slot, DONTCARE);
    }
}

fn sample_pop_count<R: Rng>(weights: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i + 1;
        }
    }
    3
}

fn push_unique(out: &mut Vec<SemanticAction>, a: SemanticAction) {
    if !out.contains(&a) {
        out.push(a);
    }
}

/// Pops `k ∈ [1, 3]` agenda items, modulated by the emotion. Mutates `state`
/// with the bookkeeping of what was said.
pub fn select_actions<R: Rng>(
    state: &mut UserState,
    ontology: &Ontology,
    emotion: Emotion,
    config: &AgendaConfig,
    rng: &mut R,
) -> Vec<SemanticAction> {
    let bye = |state: &mut UserState| {
        state.agenda.clear();
        state.terminated = true;
    };
    if state.failures >= config.give_up_after {
        bye(state);
        return vec![SemanticAction::general("bye")];
    }
    if state.goal_complete() && state.agenda.iter().all(|a| a.is("affirm") || a.is("negate")) {
        bye(state);
        let mut out = Vec::new();
        if emotion == Emotion::Satisfied
            && state.variant != SimulatorVariant::AbusLike
            && rng.gen::<f64>() < config.thank_probability
        {
            out.push(SemanticAction::general("thank"));
        }
        out.push(SemanticAction::general("bye"));
        return out;
    }

    let weights = match state.variant {
        SimulatorVariant::AbusLike => &config.abus_pop_weights,
        _ => &config.pop_weights,
    };
    let mut k = sample_pop_count(weights, rng);
    if emotion == Emotion::Excited {
        k = (k + 1).min(3);
    }

    let mut out = Vec::new();
    match emotion {
        Emotion::Dissatisfied | Emotion::Abusive => {
            if let Some((d, s)) = state.pending_requests.last().cloned() {
                state.remove_from_agenda(|a| a.is("request") && a.domain == d && a.slot == s);
                out.push(SemanticAction::new("request", d, s, NONE));
                k -= 1;
            }
        }
        Emotion::Apologetic => {
            if let Some(m) = state.misstated.take() {
                state.remove_from_agenda(|a| a.is("inform") && a.domain == m.domain && a.slot == m.slot);
                state.touch_informed(&m.domain, &m.slot);
                out.push(SemanticAction::new("inform", m.domain, m.slot, m.correct));
                k -= 1;
            }
        }
        _ => {}
    }

    if state.agenda.is_empty() && out.is_empty() {
        refill(state);
    }

    while k > 0 {
        let Some(a) = state.agenda.pop() else {
            break;
        };
        k -= 1;
        match a.intent.as_str() {
            "inform" => {
                let mut said = a.clone();
                if a.value != DONTCARE
                    && state.variant != SimulatorVariant::AbusLike
                    && state.misstated.is_none()
                    && config.misstate_probability > 0.0
                    && rng.gen::<f64>() < config.misstate_probability
                {
                    if let Some(wrong) = wrong_value(ontology, &a, rng) {
                        state.misstated = Some(Misstatement {
                            domain: a.domain.clone(),
                            slot: a.slot.clone(),
                            wrong: wrong.clone(),
                            correct: a.value.clone(),
                        });
                        said.value = wrong;
                    }
                }
                state.touch_informed(&a.domain, &a.slot);
                push_unique(&mut out, said);
            }
            "request" => {
                let key = (a.domain.clone(), a.slot.clone());
                if !state.pending_requests.contains(&key) {
                    state.pending_requests.push(key);
                }
                push_unique(&mut out, a);
            }
            _ => push_unique(&mut out, a),
        }
    }

    if emotion == Emotion::Satisfied
        && state.variant != SimulatorVariant::AbusLike
        && rng.gen::<f64>() < config.thank_probability
    {
        push_unique(&mut out, SemanticAction::general("thank"));
    }
    if out.is_empty() {
        bye(state);
        out.push(SemanticAction::general("bye"));
    }
    out
}

fn wrong_value<R: Rng>(ontology: &Ontology, a: &SemanticAction, rng: &mut R) -> Option<String> {
    let others: Vec<&String> = ontology
        .values(&a.domain, &a.slot)?
        .iter()
        .filter(|v| **v != a.value)
        .collect();
    others.choose(rng).map(|v| (*v).clone())
}

/// Re-queues what the user still needs when the agenda runs dry.
fn refill(state: &mut UserState) {
    let mut pushes = Vec::new();
    for (d, s) in &state.pending_requests {
        pushes.push(SemanticAction::new("request", d, s, NONE));
    }
    if pushes.is_empty() {
        if let Some(d) = state.goal.domain_names().find(|d| !state.offered.contains_key(*d)) {
            for (s, v) in &state.constraints[d] {
                pushes.push(SemanticAction::new("inform", d, s, v));
            }
        }
    }
    if pushes.is_empty() {
        for (d, g) in &state.goal.domains {
            for s in &g.reqt {
                if !state.answered.get(d).is_some_and(|a| a.contains_key(s)) {
                    pushes.push(SemanticAction::new("request", d, s, NONE));
                }
            }
        }
    }
    pushes.reverse();
    state.agenda.extend(pushes);
}

/// Emotion, actions and text of one user turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserResponse {
    pub emotion: Emotion,
    pub actions: Vec<SemanticAction>,
    pub text: String,
}

/// Everything a user step depends on besides the state and the system turn.
#[derive(Clone, Copy, Debug)]
pub struct UserModel<'a> {
    pub ontology: &'a Ontology,
    pub db: &'a Database,
    pub templates: &'a TemplateSet,
    pub weights: &'a EmotionWeights,
    pub agenda: &'a AgendaConfig,
    pub w_neutral: f64,
}

/// Intermediate quantities of a step, for analysis.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub features: ElicitorFeatures,
    pub distribution: EmotionDistribution,
}

impl UserModel<'_> {
    pub fn step(
        &self,
        state: &UserState,
        system_actions: &[SemanticAction],
        turn: usize,
        seed: u64,
    ) -> Result<(UserResponse, UserState)> {
        self.step_traced(state, system_actions, turn, seed)
            .map(|(r, s, _)| (r, s))
    }

    pub fn step_traced(
        &self,
        state: &UserState,
        system_actions: &[SemanticAction],
        turn: usize,
        seed: u64,
    ) -> Result<(UserResponse, UserState, StepTrace)> {
        if state.terminated {
            return Err(Error::Terminated);
        }
        let mut emotion_rng: ChaCha8Rng = seed::child_rng(seed, 1);
        let mut action_rng: ChaCha8Rng = seed::child_rng(seed, 2);
        let mut nlg_rng: ChaCha8Rng = seed::child_rng(seed, 3);

        let mut st = agenda_update(state, system_actions, self.agenda, self.db);
        let progress = ProgressSummary {
            delta: ProgressSummary::delta_of(system_actions, st.history.last().map_or(&[], Vec::as_slice)),
            failures: st.failures,
            user_error: st.misstated.is_some(),
        };
        let emotive = st.variant == SimulatorVariant::Emous;
        let (event, conduct) = if emotive {
            let d = st.active_domain().map(str::to_string);
            (
                d.map_or(EventEmotion::Neutral, |d| st.persona.event(&d)),
                st.persona.conduct,
            )
        } else {
            (EventEmotion::Neutral, Conduct::Polite)
        };
        let features = extract_features(
            system_actions,
            &st.history,
            &state.last_system,
            progress,
            event,
            conduct,
            turn,
        );
        let raw = emotion_distribution(&features, self.weights)?;
        let distribution = reweight_neutral(&raw, self.w_neutral)?;
        let emotion = if emotive {
            sample_emotion_with(&distribution, &mut emotion_rng)
        } else {
            Emotion::Neutral
        };

        let actions = select_actions(&mut st, self.ontology, emotion, self.agenda, &mut action_rng);
        let text = realize_user(&actions, emotion, conduct, self.templates, &mut nlg_rng)?.text;

        st.last_emotion = emotion;
        st.history.push(actions.clone());
        if st.history.len() > HISTORY_WINDOW {
            st.history.remove(0);
        }
        st.last_system = system_actions.to_vec();
        st.turn = turn + 1;
        Ok((
            UserResponse {
                emotion,
                actions,
                text,
            },
            st,
            StepTrace {
                features,
                distribution,
            },
        ))
    }
}
