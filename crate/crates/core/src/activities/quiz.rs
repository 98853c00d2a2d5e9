use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ActivityError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub items: Vec<QuizItem>,
}

/// Fraction of items answered correctly; unanswered items count as wrong.
pub fn score_test(key: &AnswerKey, responses: &BTreeMap<String, String>) -> Result<f64, ActivityError> {
    if let Some(unknown) = responses.keys().find(|id| !key.items.iter().any(|i| &i.id == *id)) {
        return Err(ActivityError::UnknownItemId(unknown.clone()));
    }
    if key.items.is_empty() {
        return Ok(0.0);
    }
    let correct = key
        .items
        .iter()
        .filter(|item| responses.get(&item.id).is_some_and(|r| r.trim() == item.answer.trim()))
        .count();
    Ok(correct as f64 / key.items.len() as f64)
}
