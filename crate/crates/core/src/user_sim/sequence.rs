//! JSON sequence interface of the simulator, for swapping in a neural model.
//!
//! Input:  `{"system": [[i,d,s,v],...], "user": [[[i,d,s,v],...], ...], "goal": {...}, "turn": n, "persona": {...}}`
//! Output: `{"emotion": label, "action": [[i,d,s,v],...], "text": "..."}`

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::emotion::Emotion;
use crate::ontology::{Persona, SemanticAction, UserGoal};
use crate::user_sim::{UserResponse, HISTORY_WINDOW};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing or mistyped field `{0}`")]
    BadField(&'static str),
    #[error("unknown emotion label `{0}`")]
    UnknownEmotion(String),
    #[error("action {index} is not a quadruple of strings")]
    NonQuadruple { index: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceInput {
    pub system: Vec<SemanticAction>,
    pub user: Vec<Vec<SemanticAction>>,
    pub goal: UserGoal,
    pub turn: usize,
    pub persona: Persona,
}

/// Serialises the model input. History is oldest-first; only the last three
/// user turns are kept.
pub fn serialize_input(
    system_actions: &[SemanticAction],
    user_history: &[Vec<SemanticAction>],
    goal: &UserGoal,
    turn: usize,
    persona: &Persona,
) -> String {
    let start = user_history.len().saturating_sub(HISTORY_WINDOW);
    let input = SequenceInput {
        system: system_actions.to_vec(),
        user: user_history[start..].to_vec(),
        goal: goal.clone(),
        turn,
        persona: persona.clone(),
    };
    serde_json::to_string(&input).expect("sequence input serialises")
}

pub fn parse_input(text: &str) -> Result<SequenceInput, SequenceError> {
    serde_json::from_str(text).map_err(|e| SequenceError::MalformedJson(e.to_string()))
}

pub fn serialize_output(response: &UserResponse) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        emotion: Emotion,
        action: &'a [SemanticAction],
        text: &'a str,
    }
    serde_json::to_string(&Out {
        emotion: response.emotion,
        action: &response.actions,
        text: &response.text,
    })
    .expect("sequence output serialises")
}

/// Strictly validates a model output; each failure mode has its own error.
pub fn parse_user_output(text: &str) -> Result<UserResponse, SequenceError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SequenceError::MalformedJson(e.to_string()))?;
    let obj = value.as_object().ok_or(SequenceError::BadField("<root>"))?;
    let label = obj
        .get("emotion")
        .and_then(Value::as_str)
        .ok_or(SequenceError::BadField("emotion"))?;
    let emotion: Emotion = label.parse().map_err(SequenceError::UnknownEmotion)?;
    let raw_actions = obj
        .get("action")
        .and_then(Value::as_array)
        .ok_or(SequenceError::BadField("action"))?;
    let mut actions = Vec::with_capacity(raw_actions.len());
    for (index, raw) in raw_actions.iter().enumerate() {
        let parts: Option<Vec<&str>> = raw
            .as_array()
            .filter(|a| a.len() == 4)
            .and_then(|a| a.iter().map(Value::as_str).collect());
        let parts = parts.ok_or(SequenceError::NonQuadruple { index })?;
        actions.push(SemanticAction::new(parts[0], parts[1], parts[2], parts[3]));
    }
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .ok_or(SequenceError::BadField("text"))?
        .to_string();
    Ok(UserResponse {
        emotion,
        actions,
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{Conduct, DomainGoal};

    #[test]
    fn valid_output_parses() {
        let r = parse_user_output(r#"{"emotion":"satisfied","action":[["thank","general","none","none"]],"text":"Thanks!"}"#)
            .unwrap();
        assert_eq!(r.emotion, Emotion::Satisfied);
        assert_eq!(r.actions, vec![SemanticAction::general("thank")]);
        assert_eq!(r.text, "Thanks!");
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(parse_user_output("{not json"), Err(SequenceError::MalformedJson(_))));
        assert_eq!(
            parse_user_output(r#"{"emotion":"ecstatic","action":[],"text":""}"#),
            Err(SequenceError::UnknownEmotion("ecstatic".into()))
        );
        assert_eq!(
            parse_user_output(r#"{"emotion":"neutral","action":[["inform","restaurant","area"]],"text":""}"#),
            Err(SequenceError::NonQuadruple { index: 0 })
        );
    }

    #[test]
    fn empty_history_and_single_key_persona() {
        let mut goal = UserGoal::default();
        goal.domains.insert("restaurant".into(), DomainGoal::default());
        let persona = Persona {
            conduct: Conduct::Polite,
            events: Default::default(),
        };
        let text = serialize_input(&[], &[], &goal, 0, &persona);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["user"], serde_json::json!([]));
        assert_eq!(v["persona"], serde_json::json!({"user": "polite"}));
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["system", "user", "goal", "turn", "persona"]);
        assert_eq!(serialize_input(&[], &[], &goal, 0, &persona), text);
    }

    #[test]
    fn history_is_windowed() {
        let goal = UserGoal::default();
        let persona = Persona::neutral_for(&goal);
        let history: Vec<Vec<SemanticAction>> = (0..5).map(|i| vec![SemanticAction::general(format!("x{i}"))]).collect();
        let parsed = parse_input(&serialize_input(&[], &history, &goal, 5, &persona)).unwrap();
        assert_eq!(parsed.user, history[2..].to_vec());
    }
}
