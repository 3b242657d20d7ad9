//! Reading-comprehension inputs: the marked sentence, sense options and role queries.

use serde::{Deserialize, Serialize};

use crate::corpus::{PredicateInstance, PREDICATE_CLOSE, PREDICATE_OPEN};
use crate::error::{Error, Result};
use crate::frames::{BaseRole, FrameInventory, RoleLabel};

/// Sentence tokens with `<p>` / `</p>` around the predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSequence {
    pub tokens: Vec<String>,
    /// Position of the predicate token inside `tokens`.
    pub pred_index: usize,
}

impl MarkedSequence {
    /// Recovers the original sentence tokens.
    pub fn unmarked(&self) -> Vec<String> {
        self.tokens
            .iter()
            .filter(|t| *t != PREDICATE_OPEN && *t != PREDICATE_CLOSE)
            .cloned()
            .collect()
    }

    pub fn predicate_word(&self) -> &str {
        &self.tokens[self.pred_index]
    }

    /// Checks that exactly one well-placed marker pair is present.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let opens: Vec<usize> = positions(&tokens, PREDICATE_OPEN);
        let closes: Vec<usize> = positions(&tokens, PREDICATE_CLOSE);
        match (opens.as_slice(), closes.as_slice()) {
            ([o], [c]) if *c == o + 2 => Ok(MarkedSequence {
                tokens,
                pred_index: o + 1,
            }),
            _ => Err(Error::Contract(
                "marked tokens must contain exactly one `<p> w </p>` pair".to_string(),
            )),
        }
    }

    /// Index of the predicate in the unmarked sentence.
    pub fn sentence_pred_index(&self) -> usize {
        self.pred_index - 1
    }
}

fn positions(tokens: &[String], marker: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == marker)
        .map(|(i, _)| i)
        .collect()
}

pub fn mark_predicate(inst: &PredicateInstance) -> MarkedSequence {
    let words = &inst.sentence.tokens;
    let mut tokens = Vec::with_capacity(words.len() + 2);
    tokens.extend_from_slice(&words[..inst.pred_index]);
    tokens.push(PREDICATE_OPEN.to_string());
    tokens.push(words[inst.pred_index].clone());
    tokens.push(PREDICATE_CLOSE.to_string());
    tokens.extend_from_slice(&words[inst.pred_index + 1..]);
    MarkedSequence {
        tokens,
        pred_index: inst.pred_index + 1,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseOption {
    pub sense_id: String,
    pub option_text: String,
}

/// One option per sense of `lemma`, in inventory order.
pub fn build_sense_options(inv: &FrameInventory, lemma: &str) -> Vec<SenseOption> {
    inv.senses_of(lemma)
        .iter()
        .map(|s| SenseOption {
            sense_id: s.id.clone(),
            option_text: s.description.clone(),
        })
        .collect()
}

/// Question text attached to disambiguation instances for inspection.
pub fn sense_question(predicate_word: &str) -> String {
    format!("What is the sense of predicate {predicate_word}?")
}

/// How role queries are phrased.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryStyle {
    /// Templates filled with frame-file and modifier descriptions.
    #[default]
    Semantic,
    /// The bare role label, without any description.
    LabelOnly,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleQuery {
    pub role: RoleLabel,
    pub query_text: String,
}

/// Builds the argument-labeling query for `role` of the predicate under `sense_id`.
///
/// Prefixes are dropped: `R-A1` and `A1` share one query.
pub fn build_role_query(
    inv: &FrameInventory,
    predicate_word: &str,
    sense_id: &str,
    role: &BaseRole,
    style: QueryStyle,
) -> Result<RoleQuery> {
    let description = inv.base_role_description(sense_id, role)?;
    let query_text = match style {
        QueryStyle::LabelOnly => role.to_string(),
        QueryStyle::Semantic => match role {
            BaseRole::Core(_) => format!(
                "What are the {role} arguments of predicate {predicate_word} with meaning {description}?"
            ),
            BaseRole::Modifier(_) => {
                format!("What are the {description} modifiers of predicate {predicate_word}?")
            }
        },
    };
    Ok(RoleQuery {
        role: RoleLabel::norm(role.clone()),
        query_text,
    })
}
