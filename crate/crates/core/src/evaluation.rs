//! Sense accuracy, argument micro P/R/F1 and the dependency-style combined
//! score that counts each predicate's sense as one more argument.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{find_overlap, ArgumentSpan, PredicateInstance, Prediction};
use crate::error::{Error, Result};
use crate::frames::{split_sense_id, FrameInventory};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.matched += o.matched;
        self.predicted += o.predicted;
        self.gold += o.gold;
    }
}

/// Precision, recall and F1 with the counts behind them. P is 0 without
/// predictions and R is 0 without gold items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl From<Counts> for Prf {
    fn from(c: Counts) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.matched, c.predicted);
        let recall = ratio(c.matched, c.gold);
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            counts: c,
        }
    }
}

/// Multiset matches between two span lists.
pub fn count_matches(gold: &[ArgumentSpan], pred: &[ArgumentSpan]) -> Counts {
    let mut bag: HashMap<&ArgumentSpan, usize> = HashMap::new();
    for g in gold {
        *bag.entry(g).or_default() += 1;
    }
    let mut matched = 0;
    for p in pred {
        if let Some(n) = bag.get_mut(p).filter(|n| **n > 0) {
            *n -= 1;
            matched += 1;
        }
    }
    Counts {
        matched,
        predicted: pred.len(),
        gold: gold.len(),
    }
}

fn check_aligned(gold: usize, pred: usize) -> Result<()> {
    if gold != pred {
        return Err(Error::Contract(format!("{gold} gold instances but {pred} predictions")));
    }
    Ok(())
}

/// Exact match on (start, end, prefixed role), micro-averaged.
pub fn score_arguments(gold: &[Vec<ArgumentSpan>], pred: &[Vec<ArgumentSpan>]) -> Result<Prf> {
    check_aligned(gold.len(), pred.len())?;
    let mut total = Counts::default();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if let Some((a, b)) = find_overlap(p) {
            return Err(Error::Contract(format!("prediction {i} has overlapping spans {a} and {b}")));
        }
        total += count_matches(g, p);
    }
    Ok(total.into())
}

/// Like [`score_arguments`] with the sense as an extra argument on each
/// side. Missing senses contribute nothing on their side.
pub fn score_combined_dep(
    gold: &[(Option<String>, Vec<ArgumentSpan>)],
    pred: &[(Option<String>, Vec<ArgumentSpan>)],
) -> Result<Prf> {
    check_aligned(gold.len(), pred.len())?;
    let args: Vec<Vec<ArgumentSpan>> = gold.iter().map(|g| g.1.clone()).collect();
    let pargs: Vec<Vec<ArgumentSpan>> = pred.iter().map(|p| p.1.clone()).collect();
    let mut total = score_arguments(&args, &pargs)?.counts;
    for ((gs, _), (ps, _)) in gold.iter().zip(pred) {
        total.gold += usize::from(gs.is_some());
        total.predicted += usize::from(ps.is_some());
        total.matched += usize::from(gs.is_some() && gs == ps);
    }
    Ok(total.into())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SenseScore {
    pub accuracy: f64,
    pub correct: usize,
    /// Instances with a gold sense.
    pub total: usize,
    /// Share of `total` whose lemma has a single sense in the inventory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_sense_fraction: Option<f64>,
}

/// Exact string match on the full sense id, so a wrong lemma is a wrong sense.
pub fn score_senses(gold: &[Option<String>], pred: &[Option<String>], inv: Option<&FrameInventory>) -> Result<SenseScore> {
    check_aligned(gold.len(), pred.len())?;
    let mut s = SenseScore::default();
    let mut single = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        let Some(g) = g else { continue };
        s.total += 1;
        s.correct += usize::from(p.as_ref() == Some(g));
        if let Some(inv) = inv {
            let lemma = split_sense_id(g).map_or(g.as_str(), |(l, _)| l);
            single += usize::from(inv.senses_of(lemma).len() == 1);
        }
    }
    if s.total > 0 {
        s.accuracy = s.correct as f64 / s.total as f64;
        s.single_sense_fraction = inv.map(|_| single as f64 / s.total as f64);
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    #[default]
    Span,
    Dep,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "span" => Ok(EvalMode::Span),
            "dep" => Ok(EvalMode::Dep),
            other => Err(Error::Config(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub mode: EvalMode,
    pub predicates: usize,
    pub sense: SenseScore,
    pub arguments: Prf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<Prf>,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "predicates      {}", self.predicates);
        let _ = writeln!(
            out,
            "sense accuracy  {:.4} ({}/{})",
            self.sense.accuracy, self.sense.correct, self.sense.total
        );
        if let Some(f) = self.sense.single_sense_fraction {
            let _ = writeln!(out, "single-sense    {f:.4}");
        }
        let line = |out: &mut String, name: &str, p: &Prf| {
            let _ = writeln!(
                out,
                "{name:<15} P {:.4}  R {:.4}  F1 {:.4}  (matched {}, predicted {}, gold {})",
                p.precision, p.recall, p.f1, p.counts.matched, p.counts.predicted, p.counts.gold
            );
        };
        line(&mut out, "arguments", &self.arguments);
        if let Some(c) = &self.combined {
            line(&mut out, "combined", c);
        }
        out
    }
}

/// Scores predictions aligned with `gold` instances.
pub fn evaluate(
    gold: &[PredicateInstance],
    pred: &[Prediction],
    mode: EvalMode,
    inv: Option<&FrameInventory>,
) -> Result<EvalReport> {
    check_aligned(gold.len(), pred.len())?;
    let gold_senses: Vec<Option<String>> = gold.iter().map(|g| g.gold_sense.clone()).collect();
    let pred_senses: Vec<Option<String>> = pred.iter().map(|p| p.sense.clone()).collect();
    let gold_args: Vec<Vec<ArgumentSpan>> = gold.iter().map(|g| g.gold_args.clone().unwrap_or_default()).collect();
    let pred_args: Vec<Vec<ArgumentSpan>> = pred.iter().map(|p| p.args.clone()).collect();
    let combined = match mode {
        EvalMode::Span => None,
        EvalMode::Dep => {
            let g: Vec<_> = gold_senses.iter().cloned().zip(gold_args.iter().cloned()).collect();
            let p: Vec<_> = pred_senses.iter().cloned().zip(pred_args.iter().cloned()).collect();
            Some(score_combined_dep(&g, &p)?)
        }
    };
    Ok(EvalReport {
        version: REPORT_VERSION,
        mode,
        predicates: gold.len(),
        sense: score_senses(&gold_senses, &pred_senses, inv)?,
        arguments: score_arguments(&gold_args, &pred_args)?,
        combined,
    })
}

/// Orders `pred` instances like `gold` by predicate key. Every gold
/// predicate needs exactly one prediction.
pub fn align(gold: &[PredicateInstance], pred: &[PredicateInstance]) -> Result<Vec<Prediction>> {
    let mut by_key: BTreeMap<String, &PredicateInstance> = BTreeMap::new();
    for p in pred {
        if by_key.insert(p.key(), p).is_some() {
            return Err(Error::Contract(format!("duplicate prediction for {}", p.key())));
        }
    }
    let out = gold
        .iter()
        .map(|g| {
            by_key
                .remove(&g.key())
                .map(Prediction::from_instance)
                .ok_or_else(|| Error::Contract(format!("no prediction for {}", g.key())))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = by_key.keys().next() {
        return Err(Error::Contract(format!("prediction {extra} has no gold instance")));
    }
    Ok(out)
}
