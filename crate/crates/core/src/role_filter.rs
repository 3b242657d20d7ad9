//! Candidate role sets: keep the λN best (predicate, role) pairs across the
//! whole corpus, N being the number of predicates.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{with_file, PredicateInstance};
use crate::error::{Error, Result};
use crate::frames::BaseRole;
use crate::querygen::mark_predicate;
use crate::scoring::{check_role_scores, RoleRequest, Scorer};

/// Slack when flooring λN, so that 4.2 × 10 keeps 42 pairs.
const FLOOR_EPSILON: f64 = 1e-9;

pub const DEFAULT_GRID_STEP: f64 = 0.1;

/// How many pairs survive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Keep the floor(λN) highest scoring pairs.
    Lambda(f64),
    /// Keep every pair scoring at least the threshold.
    Threshold(f64),
}

impl Selection {
    pub fn validate(self) -> Result<Self> {
        match self {
            Selection::Lambda(l) if !(l.is_finite() && l > 0.0) => {
                Err(Error::Config(format!("lambda must be positive, got {l}")))
            }
            Selection::Threshold(t) if !(0.0..=1.0).contains(&t) => {
                Err(Error::Config(format!("threshold must lie in [0, 1], got {t}")))
            }
            ok => Ok(ok),
        }
    }
}

/// The roles kept for one predicate, in universe order. May be empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSet {
    pub predicate: String,
    pub roles: Vec<BaseRole>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    /// The budget used; in threshold mode the effective kept/N.
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub predicates: usize,
    pub universe_size: usize,
    pub kept_pairs: usize,
    /// Fraction of gold (predicate, role) pairs kept; absent without gold.
    pub recall: Option<f64>,
    pub speedup: f64,
}

/// Queries saved per predicate relative to asking about every role.
pub fn speedup(universe_size: usize, lambda: f64) -> f64 {
    universe_size as f64 / lambda
}

pub fn keep_count(lambda: f64, predicates: usize) -> usize {
    (lambda * predicates as f64 + FLOOR_EPSILON).floor() as usize
}

/// Role-presence scores, one row per predicate aligned with `universe`.
/// Rows of predicates whose scoring failed are `None` and keep nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub universe: Vec<BaseRole>,
    pub rows: Vec<Option<Vec<f64>>>,
}

impl ScoreMatrix {
    pub fn new(universe: Vec<BaseRole>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = rows.iter().position(|r| r.len() != universe.len()) {
            return Err(Error::Contract(format!(
                "score row {bad} has {} entries for {} roles",
                rows[bad].len(),
                universe.len()
            )));
        }
        Ok(ScoreMatrix {
            universe,
            rows: rows.into_iter().map(Some).collect(),
        })
    }

    pub fn predicates(&self) -> usize {
        self.rows.len()
    }

    /// Pair indices `(predicate, role)` ordered by score, highest first;
    /// equal scores keep (predicate, role) order.
    pub fn ranked_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(p, row)| row.as_ref().map(|r| (p, r.len())))
            .flat_map(|(p, n)| (0..n).map(move |r| (p, r)))
            .collect();
        pairs.sort_by(|a, b| self.score(*b).total_cmp(&self.score(*a)));
        pairs
    }

    fn score(&self, (p, r): (usize, usize)) -> f64 {
        self.rows[p].as_ref().expect("ranked rows exist")[r]
    }
}

/// Scores every role of `universe` for every instance, in parallel. The
/// per-instance results keep input order.
pub fn score_rows(
    scorer: &dyn Scorer,
    instances: &[PredicateInstance],
    universe: &[BaseRole],
) -> Vec<Result<Vec<f64>>> {
    instances
        .par_iter()
        .map(|inst| {
            let request = RoleRequest {
                marked: mark_predicate(inst),
                roles: universe.to_vec(),
            };
            let scores = scorer.score_role_presence(&request)?;
            check_role_scores(&request, &scores)?;
            Ok(universe.iter().map(|r| scores[r]).collect())
        })
        .collect()
}

/// Like [`score_rows`] but fails on the first error.
pub fn score_matrix(scorer: &dyn Scorer, instances: &[PredicateInstance], universe: &[BaseRole]) -> Result<ScoreMatrix> {
    let rows = score_rows(scorer, instances, universe)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    ScoreMatrix::new(universe.to_vec(), rows)
}

/// Kept-pair mask aligned with the matrix.
pub fn select_pairs(m: &ScoreMatrix, selection: Selection) -> Vec<Vec<bool>> {
    let mut kept: Vec<Vec<bool>> = m.rows.iter().map(|_| vec![false; m.universe.len()]).collect();
    match selection {
        Selection::Lambda(lambda) => {
            let k = keep_count(lambda, m.predicates());
            for (p, r) in m.ranked_pairs().into_iter().take(k) {
                kept[p][r] = true;
            }
        }
        Selection::Threshold(t) => {
            for (p, row) in m.rows.iter().enumerate() {
                if let Some(row) = row {
                    for (r, s) in row.iter().enumerate() {
                        kept[p][r] = *s >= t;
                    }
                }
            }
        }
    }
    kept
}

/// Distinct base roles of each instance's gold arguments; `None` without gold.
pub fn gold_roles(instances: &[PredicateInstance]) -> Vec<Option<BTreeSet<BaseRole>>> {
    instances
        .iter()
        .map(|i| {
            i.gold_args
                .as_ref()
                .map(|args| args.iter().map(|a| a.role.base.clone()).collect())
        })
        .collect()
}

fn recall(m: &ScoreMatrix, kept: &[Vec<bool>], gold: &[Option<BTreeSet<BaseRole>>]) -> Option<f64> {
    if gold.iter().all(Option::is_none) {
        return None;
    }
    let mut total = 0usize;
    let mut covered = 0usize;
    for (p, roles) in gold.iter().enumerate() {
        for role in roles.iter().flatten() {
            total += 1;
            if let Some(r) = m.universe.iter().position(|u| u == role) {
                covered += usize::from(kept[p][r]);
            }
        }
    }
    Some(if total == 0 { 1.0 } else { covered as f64 / total as f64 })
}

pub fn report(
    m: &ScoreMatrix,
    selection: Selection,
    kept: &[Vec<bool>],
    gold: &[Option<BTreeSet<BaseRole>>],
) -> LambdaReport {
    let kept_pairs = kept.iter().flatten().filter(|k| **k).count();
    let (lambda, threshold) = match selection {
        Selection::Lambda(l) => (l, None),
        Selection::Threshold(t) => (kept_pairs as f64 / m.predicates().max(1) as f64, Some(t)),
    };
    LambdaReport {
        lambda,
        threshold,
        predicates: m.predicates(),
        universe_size: m.universe.len(),
        kept_pairs,
        recall: recall(m, kept, gold),
        speedup: speedup(m.universe.len(), lambda),
    }
}

/// Role sets plus the report for a scored matrix.
pub fn apply_selection(
    m: &ScoreMatrix,
    instances: &[PredicateInstance],
    selection: Selection,
) -> (Vec<RoleSet>, LambdaReport) {
    let kept = select_pairs(m, selection);
    let sets = instances
        .iter()
        .zip(&kept)
        .map(|(inst, mask)| RoleSet {
            predicate: inst.key(),
            roles: m
                .universe
                .iter()
                .zip(mask)
                .filter(|(_, k)| **k)
                .map(|(r, _)| r.clone())
                .collect(),
        })
        .collect();
    let rep = report(m, selection, &kept, &gold_roles(instances));
    (sets, rep)
}

pub fn filter_roles(
    scorer: &dyn Scorer,
    instances: &[PredicateInstance],
    universe: &[BaseRole],
    selection: Selection,
) -> Result<(Vec<RoleSet>, LambdaReport)> {
    let selection = selection.validate()?;
    let m = score_matrix(scorer, instances, universe)?;
    Ok(apply_selection(&m, instances, selection))
}

/// The λ grid: step, 2·step, ... up to |R| inclusive.
pub fn lambda_grid(universe_size: usize, step: f64) -> Vec<f64> {
    let steps = (universe_size as f64 / step + FLOOR_EPSILON).floor() as usize;
    (1..=steps).map(|k| ((k as f64 * step) * 1e9).round() / 1e9).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub reached: bool,
    pub report: LambdaReport,
}

/// Smallest grid λ whose recall reaches `target`. The ranking is computed
/// once and swept with prefix counts. Falls back to |R| when no grid value
/// reaches the target.
pub fn tune_lambda(
    m: &ScoreMatrix,
    gold: &[Option<BTreeSet<BaseRole>>],
    target_recall: f64,
    step: f64,
) -> Result<TuneResult> {
    if !(0.0..=1.0).contains(&target_recall) {
        return Err(Error::Config(format!("target recall must lie in [0, 1], got {target_recall}")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    if m.universe.is_empty() {
        return Err(Error::Config("empty role universe".to_string()));
    }
    if gold.len() != m.predicates() {
        return Err(Error::Contract(format!("{} gold rows for {} predicates", gold.len(), m.predicates())));
    }
    let total: usize = gold.iter().flatten().map(BTreeSet::len).sum();
    let ranked = m.ranked_pairs();
    // covered[k] = gold pairs among the first k ranked pairs
    let mut covered = Vec::with_capacity(ranked.len() + 1);
    covered.push(0usize);
    for &(p, r) in &ranked {
        let hit = gold[p].as_ref().is_some_and(|g| g.contains(&m.universe[r]));
        covered.push(covered.last().unwrap() + usize::from(hit));
    }
    let recall_at = |lambda: f64| {
        let k = keep_count(lambda, m.predicates()).min(ranked.len());
        if total == 0 {
            1.0
        } else {
            covered[k] as f64 / total as f64
        }
    };

    let grid = lambda_grid(m.universe.len(), step);
    let found = grid.iter().copied().find(|l| recall_at(*l) >= target_recall);
    let (lambda, reached) = match found {
        Some(l) => (l, true),
        None => {
            warn!(
                "no grid lambda reaches recall {target_recall}; keeping every role (lambda = {})",
                m.universe.len()
            );
            (m.universe.len() as f64, false)
        }
    };
    let selection = Selection::Lambda(lambda);
    let kept = select_pairs(m, selection);
    Ok(TuneResult {
        lambda,
        reached,
        report: report(m, selection, &kept, gold),
    })
}

#[derive(Serialize, Deserialize)]
struct Header {
    report: LambdaReport,
}

pub fn write_role_sets_to<W: Write>(out: &mut W, report: &LambdaReport, sets: &[RoleSet]) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<output>", e);
    let json = |e: serde_json::Error| Error::Contract(e.to_string());
    serde_json::to_writer(
        &mut *out,
        &Header {
            report: report.clone(),
        },
    )
    .map_err(json)?;
    out.write_all(b"\n").map_err(io)?;
    for s in sets {
        serde_json::to_writer(&mut *out, s).map_err(json)?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn write_role_sets(path: &Path, report: &LambdaReport, sets: &[RoleSet]) -> Result<()> {
    with_file(path, |out| write_role_sets_to(out, report, sets))
}

pub fn read_role_sets(path: &Path) -> Result<(LambdaReport, Vec<RoleSet>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::parse(name.clone(), line, e.to_string());
    let header: Header = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line.map_err(|e| Error::io(path, e))?).map_err(|e| parse_err(1, e))?,
        None => return Err(Error::parse(name.clone(), 1, "missing report header")),
    };
    let mut sets = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        sets.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?);
    }
    Ok((header.report, sets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roles(names: &[&str]) -> Vec<BaseRole> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    fn matrix(rows: Vec<Vec<f64>>) -> ScoreMatrix {
        let names = ["A0", "A1", "A2", "A3", "A4", "A5", "AA", "TMP", "LOC", "MNR"];
        let n = rows.first().map_or(0, Vec::len);
        ScoreMatrix::new(roles(&names[..n]), rows).unwrap()
    }

    /// Repeatedly extracts the best remaining pair: highest score, then lowest
    /// predicate index, then lowest role index.
    fn oracle(m: &ScoreMatrix, k: usize) -> Vec<Vec<bool>> {
        let rows: Vec<&Vec<f64>> = m.rows.iter().map(|r| r.as_ref().unwrap()).collect();
        let mut kept: Vec<Vec<bool>> = rows.iter().map(|r| vec![false; r.len()]).collect();
        for _ in 0..k {
            let mut best: Option<(usize, usize)> = None;
            for (p, row) in rows.iter().enumerate() {
                for (r, s) in row.iter().enumerate() {
                    if kept[p][r] {
                        continue;
                    }
                    if best.is_none_or(|(bp, br)| *s > rows[bp][br]) {
                        best = Some((p, r));
                    }
                }
            }
            match best {
                Some((p, r)) => kept[p][r] = true,
                None => break,
            }
        }
        kept
    }

    #[test]
    fn lone_predicate_keeps_everything_at_full_lambda() {
        let m = matrix(vec![vec![0.1, 0.9, 0.5, 0.0]]);
        let kept = select_pairs(&m, Selection::Lambda(4.0));
        assert!(kept[0].iter().all(|k| *k));
    }

    #[test]
    fn three_predicates_lambda_two() {
        let m = matrix(vec![
            vec![0.9, 0.1, 0.4, 0.35],
            vec![0.2, 0.8, 0.05, 0.6],
            vec![0.3, 0.7, 0.45, 0.15],
        ]);
        let kept = select_pairs(&m, Selection::Lambda(2.0));
        assert_eq!(kept.iter().flatten().filter(|k| **k).count(), 6);
        // full sort of the 12 scores: the 6 largest are 0.9 0.8 0.7 0.6 0.45 0.4
        let mut all: Vec<f64> = m.rows.iter().flatten().flatten().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let cutoff = all[5];
        for (p, row) in m.rows.iter().enumerate() {
            for (r, s) in row.as_ref().unwrap().iter().enumerate() {
                assert_eq!(kept[p][r], *s >= cutoff, "pair ({p},{r})");
            }
        }
    }

    #[test]
    fn cutoff_ties_follow_predicate_then_role_order() {
        let m = matrix(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let kept = select_pairs(&m, Selection::Lambda(1.5));
        assert_eq!(kept, vec![vec![true, true], vec![true, false]]);
    }

    #[test]
    fn speedups() {
        assert_eq!(speedup(20, 5.0), 4.0);
        assert!((speedup(20, 4.2) - 4.76).abs() < 0.05);
        assert!((speedup(28, 5.5) - 5.09).abs() < 0.05);
    }

    #[test]
    fn floor_is_robust_to_representation() {
        assert_eq!(keep_count(4.2, 10), 42);
        assert_eq!(keep_count(0.7, 10), 7);
        assert_eq!(keep_count(2.5, 3), 7);
    }

    #[test]
    fn threshold_mode() {
        let m = matrix(vec![vec![0.9, 0.2], vec![0.5, 0.6]]);
        let kept = select_pairs(&m, Selection::Threshold(0.5));
        assert_eq!(kept, vec![vec![true, false], vec![true, true]]);
        let rep = report(&m, Selection::Threshold(0.5), &kept, &[None, None]);
        assert_eq!(rep.lambda, 1.5);
        assert_eq!(rep.recall, None);
    }

    #[test]
    fn grid_values() {
        let g = lambda_grid(3, 0.1);
        assert_eq!(g.len(), 30);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[2], 0.3);
        assert_eq!(*g.last().unwrap(), 3.0);
    }

    fn gold(sets: &[&[&str]]) -> Vec<Option<BTreeSet<BaseRole>>> {
        sets.iter().map(|s| Some(roles(s).into_iter().collect())).collect()
    }

    #[test]
    fn zero_target_returns_smallest_grid_value() {
        let m = matrix(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let t = tune_lambda(&m, &gold(&[&["A0"], &["A1"]]), 0.0, 0.1).unwrap();
        assert_eq!(t.lambda, 0.1);
        assert!(t.reached);
    }

    #[test]
    fn perfect_scorer_needs_gold_count_over_n() {
        // 7 gold pairs over 3 predicates: 7/3 = 2.33, rounded up to the grid
        let g = gold(&[&["A0", "A1", "A2"], &["A1", "A3"], &["A0", "A2"]]);
        let rows = g
            .iter()
            .map(|s| {
                roles(&["A0", "A1", "A2", "A3"])
                    .iter()
                    .map(|r| if s.as_ref().unwrap().contains(r) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let m = matrix(rows);
        let t = tune_lambda(&m, &g, 1.0, 0.1).unwrap();
        assert_eq!(t.lambda, 2.4);
        assert_eq!(t.report.recall, Some(1.0));
        assert_eq!(t.report.kept_pairs, 7);
    }

    #[test]
    fn unreachable_target_keeps_everything() {
        // gold role outside the universe can never be covered
        let m = matrix(vec![vec![0.5, 0.5]]);
        let t = tune_lambda(&m, &gold(&[&["A0", "TMP"]]), 0.99, 0.1).unwrap();
        assert!(!t.reached);
        assert_eq!(t.lambda, 2.0);
        assert_eq!(t.report.recall, Some(0.5));
    }

    #[test]
    fn role_set_file_round_trip() {
        let m = matrix(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        let sentence = std::sync::Arc::new(crate::corpus::Sentence::new("s", vec!["a".into(), "b".into()]));
        let insts = vec![
            PredicateInstance::new(sentence.clone(), 0),
            PredicateInstance::new(sentence, 1),
        ];
        let (sets, rep) = apply_selection(&m, &insts, Selection::Lambda(1.0));
        assert_eq!(sets[0].roles, roles(&["A0"]));
        assert_eq!(sets[1].roles, roles(&["A1"]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roles.jsonl");
        write_role_sets(&path, &rep, &sets).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"report":{"lambda":1.0,"#));
        assert!(text.contains(r#"{"predicate":"s#0","roles":["A0"]}"#));
        assert_eq!(read_role_sets(&path).unwrap(), (rep, sets));
    }

    fn arb_matrix() -> impl Strategy<Value = ScoreMatrix> {
        (1usize..=10, 1usize..=10).prop_flat_map(|(n, r)| {
            // coarse values make ties common
            prop::collection::vec(prop::collection::vec(0u8..8, r), n)
                .prop_map(|rows| matrix(rows.into_iter().map(|row| row.into_iter().map(|v| f64::from(v) / 7.0).collect()).collect()))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force_oracle(m in arb_matrix(), lambda_tenths in 1u32..120) {
            let lambda = f64::from(lambda_tenths) / 10.0;
            let k = keep_count(lambda, m.predicates());
            let kept = select_pairs(&m, Selection::Lambda(lambda));
            prop_assert_eq!(&kept, &oracle(&m, k));
            let count = kept.iter().flatten().filter(|x| **x).count();
            prop_assert!(count <= k);
            prop_assert_eq!(count, k.min(m.predicates() * m.universe.len()));
        }

        #[test]
        fn recall_is_monotone_in_lambda(m in arb_matrix(), seed in 0u64..1000, a in 1u32..100, b in 1u32..100) {
            let (lo, hi) = (f64::from(a.min(b)) / 10.0, f64::from(a.max(b)) / 10.0);
            let g: Vec<Option<BTreeSet<BaseRole>>> = (0..m.predicates())
                .map(|p| Some(m.universe.iter().enumerate()
                    .filter(|(r, _)| (seed >> ((p * 3 + r) % 64)) & 1 == 1)
                    .map(|(_, x)| x.clone()).collect()))
                .collect();
            let r_lo = report(&m, Selection::Lambda(lo), &select_pairs(&m, Selection::Lambda(lo)), &g).recall.unwrap();
            let r_hi = report(&m, Selection::Lambda(hi), &select_pairs(&m, Selection::Lambda(hi)), &g).recall.unwrap();
            prop_assert!(r_lo <= r_hi);
            prop_assert!((0.0..=1.0).contains(&r_lo));
        }

        #[test]
        fn tuning_matches_exhaustive_sweep(m in arb_matrix(), seed in 0u64..1000, target in 0.0f64..=1.0) {
            let g: Vec<Option<BTreeSet<BaseRole>>> = (0..m.predicates())
                .map(|p| Some(m.universe.iter().enumerate()
                    .filter(|(r, _)| (seed >> ((p * 5 + r) % 64)) & 1 == 1)
                    .map(|(_, x)| x.clone()).collect()))
                .collect();
            let tuned = tune_lambda(&m, &g, target, 0.1).unwrap();
            let mut expected = m.universe.len() as f64;
            for lambda in lambda_grid(m.universe.len(), 0.1) {
                let kept = select_pairs(&m, Selection::Lambda(lambda));
                if report(&m, Selection::Lambda(lambda), &kept, &g).recall.unwrap() >= target {
                    expected = lambda;
                    break;
                }
            }
            prop_assert_eq!(tuned.lambda, expected);
        }
    }
}
