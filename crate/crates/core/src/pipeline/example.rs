//! The running example: "The stock has been beaten down for two days ." with
//! a table scorer whose answers are fixed by hand.
//!
//! Sense options score 0.1, 0.8 and 0.3 for beat.01, beat.02 and beat.03.
//! Role presence favours A1 (0.9), TMP (0.85) and A2 (0.8) over A0 (0.2) and
//! LOC (0.1); with λ = 3 and one predicate exactly those three survive. The
//! BIO tables put most mass on the gold bracketing, with a weaker competing
//! TMP claim on "down" that the merged decoder overrules.

use std::sync::Arc;

use super::{SenseSource, Stages};
use crate::frames::{BaseRole, FrameInventory};
use crate::querygen::QueryStyle;
use crate::role_filter::Selection;
use crate::scoring::{TableScorer, TagDistribution, TAG_COUNT};

pub use crate::corpus::fixtures::figure1 as instance;

pub const LAMBDA: f64 = 3.0;

pub fn inventory() -> FrameInventory {
    crate::frames::fixtures::beat_inventory()
}

fn base(s: &str) -> BaseRole {
    s.parse().expect("static role")
}

pub fn universe() -> Vec<BaseRole> {
    ["A0", "A1", "A2", "TMP", "LOC"].into_iter().map(base).collect()
}

/// Ten rows; `claims` lists (start, end, p) spans tagged B-N/I-N with
/// probability p, the rest of each row going to O.
fn table(claims: &[(usize, usize, f64)]) -> TagDistribution {
    let mut rows = vec![[0.0; TAG_COUNT]; 10];
    for row in rows.iter_mut() {
        row[6] = 1.0;
    }
    for &(start, end, p) in claims {
        for (j, row) in rows.iter_mut().enumerate().take(end + 1).skip(start) {
            let k = if j == start { 0 } else { 1 };
            *row = [0.0; TAG_COUNT];
            row[k] = p;
            row[6] = 1.0 - p;
        }
    }
    TagDistribution::new(rows).expect("rows sum to one")
}

pub fn scorer() -> TableScorer {
    TableScorer::new()
        .with_sense("(Cause) pulsating motion that often makes sound", 0.1)
        .with_sense("push, cause motion", 0.8)
        .with_sense("win over some competitor", 0.3)
        .with_role(base("A0"), 0.2)
        .with_role(base("A1"), 0.9)
        .with_role(base("A2"), 0.8)
        .with_role(base("TMP"), 0.85)
        .with_role(base("LOC"), 0.1)
        .with_bio(base("A1"), table(&[(0, 1, 0.9)]))
        .with_bio(base("A2"), table(&[(5, 5, 0.85)]))
        .with_bio(base("TMP"), table(&[(5, 5, 0.6), (6, 8, 0.95)]))
}

pub fn stages() -> Stages {
    let scorer = Arc::new(scorer());
    Stages {
        sense: scorer.clone(),
        role: scorer.clone(),
        bio: scorer,
        universe: universe(),
        selection: Selection::Lambda(LAMBDA),
        style: QueryStyle::Semantic,
        senses: SenseSource::Predicted,
    }
}
