//! Most-frequent baselines: the commonest training sense per lemma, and the
//! commonest global tag per lowercased word.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{resolve_lemma, PredicateInstance, Prediction};
use crate::decoder::{encode_spans, extract_spans, GlobalTag};
use crate::error::Result;
use crate::frames::FrameInventory;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MostFrequent {
    senses: BTreeMap<String, String>,
    tags: HashMap<String, GlobalTag>,
}

fn argmax<K: Clone + Ord>(counts: &BTreeMap<K, usize>) -> Option<K> {
    // BTreeMap order breaks ties deterministically.
    let mut best: Option<(&K, usize)> = None;
    for (k, c) in counts {
        if best.is_none_or(|(_, b)| *c > b) {
            best = Some((k, *c));
        }
    }
    best.map(|(k, _)| k.clone())
}

impl MostFrequent {
    pub fn fit(train: &[PredicateInstance], inv: &FrameInventory) -> Result<Self> {
        let mut sense_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut tag_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        for inst in train {
            if let (Some(sense), Some(lemma)) = (
                &inst.gold_sense,
                resolve_lemma(inv, inst.predicate_word(), inst.lemma.as_deref()),
            ) {
                *sense_counts.entry(lemma).or_default().entry(sense.clone()).or_default() += 1;
            }
            if let Some(args) = &inst.gold_args {
                let tags = encode_spans(args, inst.sentence.len())?;
                for (word, tag) in inst.sentence.tokens.iter().zip(tags) {
                    *tag_counts
                        .entry(word.to_lowercase())
                        .or_default()
                        .entry(tag.to_string())
                        .or_default() += 1;
                }
            }
        }
        Ok(MostFrequent {
            senses: sense_counts
                .iter()
                .filter_map(|(l, c)| argmax(c).map(|s| (l.clone(), s)))
                .collect(),
            tags: tag_counts
                .iter()
                .filter_map(|(w, c)| argmax(c).and_then(|t| t.parse().ok()).map(|t| (w.clone(), t)))
                .collect(),
        })
    }

    /// Unseen lemmas fall back to their first inventory sense, unseen words to O.
    pub fn predict(&self, inst: &PredicateInstance, inv: &FrameInventory) -> Prediction {
        let sense = resolve_lemma(inv, inst.predicate_word(), inst.lemma.as_deref()).and_then(|lemma| {
            self.senses
                .get(&lemma)
                .cloned()
                .or_else(|| inv.senses_of(&lemma).first().map(|s| s.id.clone()))
        });
        let tags: Vec<GlobalTag> = inst
            .sentence
            .tokens
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if i == inst.pred_index {
                    GlobalTag::O
                } else {
                    self.tags.get(&w.to_lowercase()).cloned().unwrap_or(GlobalTag::O)
                }
            })
            .collect();
        Prediction {
            sense,
            args: extract_spans(&tags),
        }
    }

    pub fn predict_all(&self, instances: &[PredicateInstance], inv: &FrameInventory) -> Vec<Prediction> {
        instances.iter().map(|i| self.predict(i, inv)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::{figure1, role};
    use crate::corpus::ArgumentSpan;
    use crate::frames::fixtures::beat_inventory;

    #[test]
    fn memorizes_a_single_instance() {
        let inv = beat_inventory();
        let inst = figure1();
        let b = MostFrequent::fit(std::slice::from_ref(&inst), &inv).unwrap();
        let p = b.predict(&inst, &inv);
        assert_eq!(p.sense.as_deref(), inst.gold_sense.as_deref());
        // "The stock" B then I, "down" B, "for two days" B I I
        assert_eq!(&p.args, inst.gold_args.as_ref().unwrap());
    }

    #[test]
    fn majority_sense_and_tag() {
        let inv = beat_inventory();
        let mut a = figure1();
        a.gold_sense = Some("beat.01".into());
        let mut b = figure1();
        b.gold_args = Some(vec![ArgumentSpan::new(0, 1, role("A0"))]);
        let c = figure1();
        let base = MostFrequent::fit(&[a, b, c.clone()], &inv).unwrap();
        let p = base.predict(&c, &inv);
        assert_eq!(p.sense.as_deref(), Some("beat.02"));
        assert!(p.args.contains(&ArgumentSpan::new(0, 1, role("A1"))));
    }

    #[test]
    fn unseen_lemma_uses_first_sense() {
        let inv = beat_inventory();
        let base = MostFrequent::default();
        let p = base.predict(&figure1(), &inv);
        assert_eq!(p.sense.as_deref(), Some("beat.01"));
        assert!(p.args.is_empty());
    }
}
