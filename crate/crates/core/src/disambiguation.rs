//! Predicate sense selection as multiple choice over the lemma's senses.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::PredicateInstance;
use crate::error::{Error, Result};
use crate::frames::FrameInventory;
use crate::querygen::{build_sense_options, mark_predicate, SenseOption};
use crate::scoring::{Scorer, SenseRequest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseDecision {
    pub sense_id: String,
    pub score: f64,
    pub option_scores: BTreeMap<String, f64>,
}

/// Argmax over `scores` (aligned with `options`); the first maximum in
/// inventory order wins ties.
pub fn select_sense(options: &[SenseOption], scores: &[f64]) -> Option<SenseDecision> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s > scores[b]) {
            best = Some(i);
        }
    }
    let best = best?;
    Some(SenseDecision {
        sense_id: options[best].sense_id.clone(),
        score: scores[best],
        option_scores: options
            .iter()
            .zip(scores)
            .map(|(o, s)| (o.sense_id.clone(), *s))
            .collect(),
    })
}

/// Scores one option per sense of `lemma` and keeps the best. Lemmas with a
/// single sense are answered without calling the scorer, with score 1.0.
pub fn disambiguate(
    scorer: &dyn Scorer,
    inv: &FrameInventory,
    inst: &PredicateInstance,
    lemma: &str,
) -> Result<SenseDecision> {
    let options = build_sense_options(inv, lemma);
    match options.len() {
        0 => Err(Error::Contract(format!("lemma {lemma:?} has no senses"))),
        1 => Ok(SenseDecision {
            sense_id: options[0].sense_id.clone(),
            score: 1.0,
            option_scores: [(options[0].sense_id.clone(), 1.0)].into_iter().collect(),
        }),
        _ => {
            let marked = mark_predicate(inst);
            let requests: Vec<SenseRequest> = options
                .iter()
                .map(|o| SenseRequest {
                    marked: marked.clone(),
                    option_text: o.option_text.clone(),
                })
                .collect();
            let scores = scorer.score_senses(&requests)?;
            if scores.len() != options.len() {
                return Err(Error::Protocol(format!(
                    "{} sense scores for {} options",
                    scores.len(),
                    options.len()
                )));
            }
            Ok(select_sense(&options, &scores).expect("options are non-empty"))
        }
    }
}
