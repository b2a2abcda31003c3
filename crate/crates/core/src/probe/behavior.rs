use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ontology::{SemanticAction, DONTCARE};

/// System-behaviour tags. These are predicates, not a partition: one system
/// turn may carry several.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Confirm,
    NoConfirm,
    MissInfo,
    Neglect,
    Reply,
    Loop,
}

impl Behavior {
    pub const ALL: [Behavior; 6] = [
        Behavior::Confirm,
        Behavior::NoConfirm,
        Behavior::MissInfo,
        Behavior::Neglect,
        Behavior::Reply,
        Behavior::Loop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Confirm => "confirm",
            Behavior::NoConfirm => "no_confirm",
            Behavior::MissInfo => "miss_info",
            Behavior::Neglect => "neglect",
            Behavior::Reply => "reply",
            Behavior::Loop => "loop",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn same_set(a: &[SemanticAction], b: &[SemanticAction]) -> bool {
    let a: BTreeSet<&SemanticAction> = a.iter().collect();
    let b: BTreeSet<&SemanticAction> = b.iter().collect();
    a == b
}

/// Tags the current system turn given the user turn it answers and the system
/// turn before that.
///
/// `reply` needs at least one user request, all of them answered; any
/// unanswered request makes the turn `neglect`. `loop` needs a non-empty
/// action set identical to the previous one.
pub fn classify_behavior(
    current: &[SemanticAction],
    previous_user: &[SemanticAction],
    previous_system: &[SemanticAction],
) -> BTreeSet<Behavior> {
    let mut tags = BTreeSet::new();

    let user_informs: Vec<&SemanticAction> = previous_user
        .iter()
        .filter(|a| a.is("inform") && a.value != DONTCARE)
        .collect();
    if !user_informs.is_empty() {
        let echoed = user_informs.iter().any(|u| {
            current
                .iter()
                .any(|s| s.is("inform") && s.domain == u.domain && s.slot == u.slot && s.value == u.value)
        });
        tags.insert(if echoed {
            Behavior::Confirm
        } else {
            Behavior::NoConfirm
        });
    }

    let miss_info = current.iter().any(|s| {
        s.is("request")
            && previous_user
                .iter()
                .any(|u| u.is("inform") && u.domain == s.domain && u.slot == s.slot)
    });
    if miss_info {
        tags.insert(Behavior::MissInfo);
    }

    let requests: Vec<&SemanticAction> = previous_user.iter().filter(|a| a.is("request")).collect();
    if !requests.is_empty() {
        let all_answered = requests.iter().all(|u| {
            current
                .iter()
                .any(|s| s.is("inform") && s.domain == u.domain && s.slot == u.slot)
        });
        tags.insert(if all_answered {
            Behavior::Reply
        } else {
            Behavior::Neglect
        });
    }

    if !current.is_empty() && same_set(current, previous_system) {
        tags.insert(Behavior::Loop);
    }
    tags
}
