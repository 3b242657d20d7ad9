//! Scorer answering from fixed tables. Used as the mock harness in tests and
//! for the worked example.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{check_bio_length, BioRequest, RoleRequest, Scorer, SenseRequest, TagDistribution};
use crate::error::Result;
use crate::frames::BaseRole;

/// Lookups fall back from the sentence-specific entry (keyed by the marked
/// tokens joined with spaces) to the role- or option-wide entry, then to the default.
#[derive(Debug)]
pub struct TableScorer {
    senses: HashMap<String, f64>,
    senses_for: HashMap<(String, String), f64>,
    sense_default: f64,
    roles: HashMap<BaseRole, f64>,
    roles_for: HashMap<(String, BaseRole), f64>,
    role_default: f64,
    bio: HashMap<BaseRole, TagDistribution>,
    bio_for: HashMap<(String, BaseRole), TagDistribution>,
    sense_calls: AtomicUsize,
    role_calls: AtomicUsize,
    bio_calls: AtomicUsize,
}

impl Default for TableScorer {
    fn default() -> Self {
        TableScorer {
            senses: HashMap::new(),
            senses_for: HashMap::new(),
            sense_default: 0.5,
            roles: HashMap::new(),
            roles_for: HashMap::new(),
            role_default: 0.0,
            bio: HashMap::new(),
            bio_for: HashMap::new(),
            sense_calls: AtomicUsize::new(0),
            role_calls: AtomicUsize::new(0),
            bio_calls: AtomicUsize::new(0),
        }
    }
}

/// Key under which sentence-specific entries are stored.
pub fn marked_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

impl TableScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sense(mut self, option_text: &str, score: f64) -> Self {
        self.senses.insert(option_text.to_string(), score);
        self
    }

    pub fn with_sense_for(mut self, marked: &str, option_text: &str, score: f64) -> Self {
        self.senses_for.insert((marked.to_string(), option_text.to_string()), score);
        self
    }

    pub fn with_sense_default(mut self, score: f64) -> Self {
        self.sense_default = score;
        self
    }

    pub fn with_role(mut self, role: BaseRole, score: f64) -> Self {
        self.roles.insert(role, score);
        self
    }

    pub fn with_role_for(mut self, marked: &str, role: BaseRole, score: f64) -> Self {
        self.roles_for.insert((marked.to_string(), role), score);
        self
    }

    pub fn with_role_default(mut self, score: f64) -> Self {
        self.role_default = score;
        self
    }

    /// Missing BIO entries answer "everything outside".
    pub fn with_bio(mut self, role: BaseRole, dist: TagDistribution) -> Self {
        self.bio.insert(role, dist);
        self
    }

    pub fn with_bio_for(mut self, marked: &str, role: BaseRole, dist: TagDistribution) -> Self {
        self.bio_for.insert((marked.to_string(), role), dist);
        self
    }

    /// Number of sense options scored so far.
    pub fn sense_calls(&self) -> usize {
        self.sense_calls.load(Ordering::Relaxed)
    }

    pub fn role_calls(&self) -> usize {
        self.role_calls.load(Ordering::Relaxed)
    }

    pub fn bio_calls(&self) -> usize {
        self.bio_calls.load(Ordering::Relaxed)
    }
}

impl Scorer for TableScorer {
    fn score_senses(&self, requests: &[SenseRequest]) -> Result<Vec<f64>> {
        self.sense_calls.fetch_add(requests.len(), Ordering::Relaxed);
        Ok(requests
            .iter()
            .map(|r| {
                let key = (marked_key(&r.marked.tokens), r.option_text.clone());
                self.senses_for
                    .get(&key)
                    .or_else(|| self.senses.get(&r.option_text))
                    .copied()
                    .unwrap_or(self.sense_default)
            })
            .collect())
    }

    fn score_roles(&self, requests: &[RoleRequest]) -> Result<Vec<BTreeMap<BaseRole, f64>>> {
        self.role_calls.fetch_add(requests.len(), Ordering::Relaxed);
        Ok(requests
            .iter()
            .map(|r| {
                let key = marked_key(&r.marked.tokens);
                r.roles
                    .iter()
                    .map(|role| {
                        let p = self
                            .roles_for
                            .get(&(key.clone(), role.clone()))
                            .or_else(|| self.roles.get(role))
                            .copied()
                            .unwrap_or(self.role_default);
                        (role.clone(), p)
                    })
                    .collect()
            })
            .collect())
    }

    fn score_bio(&self, requests: &[BioRequest]) -> Result<Vec<TagDistribution>> {
        self.bio_calls.fetch_add(requests.len(), Ordering::Relaxed);
        requests
            .iter()
            .map(|r| {
                let key = (marked_key(&r.marked.tokens), r.role.clone());
                let dist = self
                    .bio_for
                    .get(&key)
                    .or_else(|| self.bio.get(&r.role))
                    .cloned()
                    .unwrap_or_else(|| TagDistribution::all_outside(r.marked.tokens.len() - 2));
                check_bio_length(r, &dist)?;
                Ok(dist)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygen::MarkedSequence;

    #[test]
    fn lookups_fall_back_and_count() {
        let marked = MarkedSequence::from_tokens(vec!["<p>".into(), "x".into(), "</p>".into()]).unwrap();
        let key = marked_key(&marked.tokens);
        let s = TableScorer::new()
            .with_sense("a", 0.1)
            .with_sense_for(&key, "b", 0.7)
            .with_sense_default(0.4);
        let reqs: Vec<SenseRequest> = ["a", "b", "c"]
            .iter()
            .map(|o| SenseRequest {
                marked: marked.clone(),
                option_text: o.to_string(),
            })
            .collect();
        assert_eq!(s.score_senses(&reqs).unwrap(), vec![0.1, 0.7, 0.4]);
        assert_eq!(s.sense_calls(), 3);

        let d = s
            .score_bio_one(&BioRequest {
                marked,
                query_text: "q".into(),
                role: "A0".parse().unwrap(),
            })
            .unwrap();
        assert_eq!(d, TagDistribution::all_outside(1));
        assert_eq!(s.bio_calls(), 1);
    }
}
