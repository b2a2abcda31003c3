//! Turn-by-turn record of one simulated dialogue.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::ontology::{Persona, SemanticAction, UserGoal};
use crate::probe::Behavior;
use crate::user_sim::SimulatorVariant;

/// One exchange: the system turn the user reacts to, then the user's reply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub system_actions: Vec<SemanticAction>,
    pub system_utterance: String,
    pub behaviors: BTreeSet<Behavior>,
    pub emotion: Emotion,
    pub user_actions: Vec<SemanticAction>,
    pub user_utterance: String,
    /// Reward of the system decision taken after this user turn.
    pub reward: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub turns: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub variant: SimulatorVariant,
    pub goal: UserGoal,
    pub persona: Persona,
    pub turns: Vec<TurnRecord>,
    outcome: Option<Outcome>,
}

impl EpisodeLog {
    pub fn new(seed: u64, variant: SimulatorVariant, goal: UserGoal, persona: Persona) -> Self {
        Self {
            seed,
            variant,
            goal,
            persona,
            turns: Vec::new(),
            outcome: None,
        }
    }

    /// Appends a turn; indices must grow by one from zero.
    pub fn push(&mut self, record: TurnRecord) {
        assert!(self.outcome.is_none(), "episode already finished");
        assert_eq!(record.turn, self.turns.len(), "turn indices must be consecutive");
        self.turns.push(record);
    }

    pub fn finish(&mut self, success: bool) {
        assert!(self.outcome.is_none(), "terminal flags are set exactly once");
        self.outcome = Some(Outcome {
            success,
            turns: self.turns.len(),
        });
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn success(&self) -> bool {
        self.outcome.is_some_and(|o| o.success)
    }

    pub fn total_reward(&self) -> f64 {
        self.turns.iter().map(|t| t.reward).sum()
    }
}
