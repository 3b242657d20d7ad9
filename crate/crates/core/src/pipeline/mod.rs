//! The staged pipeline: lemma → sense → role filtering → queries → BIO
//! scoring → merged decoding → spans.
//!
//! Every stage except the global role selection works per instance on the
//! rayon pool. A failing instance is logged, gets an empty prediction and the
//! run carries on.

pub mod ablation;
mod config;
pub mod example;
mod train;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_corpus, resolve_lemma, with_file, write_predictions, ArgumentSpan, PredicateInstance, Prediction};
use crate::decoder::decode_spans;
use crate::disambiguation::disambiguate;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport};
use crate::frames::{split_sense_id, BaseRole, FrameInventory};
use crate::querygen::{build_role_query, mark_predicate, QueryStyle};
use crate::role_filter::{
    apply_selection, read_role_sets, score_rows, write_role_sets, LambdaReport, RoleSet, ScoreMatrix, Selection,
};
use crate::scoring::{BioRequest, Scorer};

pub use config::{Paths, PipelineConfig, Scorers, SenseMode, CONFIG_VERSION};
pub use train::{role_universe, train_bio_with_filter, train_model, TrainSettings, TrainSummary};

pub const SENSES_FILE: &str = "senses.jsonl";
pub const ROLES_FILE: &str = "roles.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";

/// Where predicate senses come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SenseSource {
    Predicted,
    /// Gold senses, a `corruption` share of them swapped for another sense
    /// of the same lemma. The swapped set grows with the rate for a fixed seed.
    Gold { corruption: f64, seed: u64 },
}

/// Scorers and knobs of one run.
#[derive(Clone)]
pub struct Stages {
    pub sense: Arc<dyn Scorer>,
    pub role: Arc<dyn Scorer>,
    pub bio: Arc<dyn Scorer>,
    pub universe: Vec<BaseRole>,
    pub selection: Selection,
    pub style: QueryStyle,
    pub senses: SenseSource,
}

impl Stages {
    /// One scorer for all three heads.
    pub fn single(scorer: Arc<dyn Scorer>, universe: Vec<BaseRole>, selection: Selection) -> Self {
        Stages {
            sense: Arc::clone(&scorer),
            role: Arc::clone(&scorer),
            bio: scorer,
            universe,
            selection,
            style: QueryStyle::Semantic,
            senses: SenseSource::Predicted,
        }
    }
}

/// Output of the sense stage for one predicate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SenseRecord {
    pub predicate: String,
    pub lemma: Option<String>,
    pub sense: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub option_scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub corrupted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Precomputed stage outputs that replace the matching stage.
#[derive(Clone, Debug, Default)]
pub struct Intermediates {
    pub senses: Option<Vec<SenseRecord>>,
    pub roles: Option<(LambdaReport, Vec<RoleSet>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub predicate: String,
    pub stage: String,
    pub error: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStats {
    pub corrupted: usize,
    /// Gold senses left alone because their lemma has a single sense.
    pub single_sense: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub predictions: Vec<Prediction>,
    pub senses: Vec<SenseRecord>,
    pub role_sets: Vec<RoleSet>,
    pub lambda_report: LambdaReport,
    pub failures: Vec<Failure>,
    pub corruption: Option<CorruptionStats>,
}

/// Gold sense with nested, seeded corruption. Instance `i` draws from its own
/// stream, so whether it is swapped depends only on the rate.
fn corrupt_sense(inv: &FrameInventory, gold: &str, seed: u64, index: usize, rate: f64) -> (String, Option<bool>) {
    let Some((lemma, _)) = split_sense_id(gold) else {
        return (gold.to_string(), None);
    };
    let others: Vec<&str> = inv
        .senses_of(lemma)
        .iter()
        .map(|s| s.id.as_str())
        .filter(|id| *id != gold)
        .collect();
    if others.is_empty() {
        return (gold.to_string(), None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let u: f64 = rng.gen();
    let pick = rng.gen_range(0..others.len());
    if u < rate {
        (others[pick].to_string(), Some(true))
    } else {
        (gold.to_string(), Some(false))
    }
}

fn sense_stage(inv: &FrameInventory, inst: &PredicateInstance, index: usize, stages: &Stages) -> SenseRecord {
    let mut rec = SenseRecord {
        predicate: inst.key(),
        ..SenseRecord::default()
    };
    let lemma = resolve_lemma(inv, inst.predicate_word(), inst.lemma.as_deref());
    rec.lemma = lemma.clone();
    let outcome = match (stages.senses, lemma) {
        (_, None) => Err(format!("no frame lemma for predicate word {:?}", inst.predicate_word())),
        (SenseSource::Predicted, Some(lemma)) => disambiguate(stages.sense.as_ref(), inv, inst, &lemma)
            .map(|d| {
                rec.score = Some(d.score);
                rec.option_scores = d.option_scores;
                d.sense_id
            })
            .map_err(|e| e.to_string()),
        (SenseSource::Gold { corruption, seed }, Some(_)) => match &inst.gold_sense {
            None => Err("gold sense requested but the instance has none".to_string()),
            Some(gold) => {
                let (sense, swapped) = corrupt_sense(inv, gold, seed, index, corruption);
                rec.corrupted = swapped == Some(true);
                Ok(sense)
            }
        },
    };
    match outcome {
        Ok(s) => rec.sense = Some(s),
        Err(e) => rec.error = Some(e),
    }
    rec
}

/// Role queries of one instance. Roles without a description under the
/// chosen sense are dropped.
pub fn instance_queries(
    inv: &FrameInventory,
    inst: &PredicateInstance,
    sense_id: &str,
    roles: &[BaseRole],
    style: QueryStyle,
) -> Result<Vec<(BaseRole, String)>> {
    let mut out = Vec::with_capacity(roles.len());
    for role in roles {
        match build_role_query(inv, inst.predicate_word(), sense_id, role, style) {
            Ok(q) => out.push((role.clone(), q.query_text)),
            Err(e @ (Error::RoleUndefinedForSense { .. } | Error::UnknownModifier(_))) => {
                debug!("{}: dropping role {role}: {e}", inst.key());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn bio_stage(
    inv: &FrameInventory,
    inst: &PredicateInstance,
    sense_id: &str,
    roles: &[BaseRole],
    stages: &Stages,
) -> Result<Vec<ArgumentSpan>> {
    let queries = instance_queries(inv, inst, sense_id, roles, stages.style)?;
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    let marked = mark_predicate(inst);
    let requests: Vec<BioRequest> = queries
        .iter()
        .map(|(role, text)| BioRequest {
            marked: marked.clone(),
            query_text: text.clone(),
            role: role.clone(),
        })
        .collect();
    let dists = stages.bio.score_bio(&requests)?;
    if dists.len() != requests.len() {
        return Err(Error::Protocol(format!(
            "{} tag distributions for {} queries",
            dists.len(),
            requests.len()
        )));
    }
    let lattice: Vec<_> = queries.into_iter().map(|(r, _)| r).zip(dists).collect();
    decode_spans(&lattice)
}

fn check_keys<'a>(what: &str, instances: &[PredicateInstance], keys: impl ExactSizeIterator<Item = &'a str>) -> Result<()> {
    if keys.len() != instances.len() {
        return Err(Error::Contract(format!(
            "{what} has {} records for {} predicates",
            keys.len(),
            instances.len()
        )));
    }
    for (inst, key) in instances.iter().zip(keys) {
        if inst.key() != key {
            return Err(Error::Contract(format!("{what} record {key} does not match predicate {}", inst.key())));
        }
    }
    Ok(())
}

/// The sense stage alone.
pub fn predict_senses(inv: &FrameInventory, instances: &[PredicateInstance], stages: &Stages) -> Vec<SenseRecord> {
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| sense_stage(inv, inst, i, stages))
        .collect()
}

/// Role scoring and the global selection. Instances flagged in `skip`, and
/// those whose scoring fails, keep no roles; failures come back as
/// `(index, message)`.
pub fn select_roles(
    instances: &[PredicateInstance],
    stages: &Stages,
    skip: &[bool],
) -> Result<(LambdaReport, Vec<RoleSet>, Vec<(usize, String)>)> {
    let selection = stages.selection.validate()?;
    let mut errors = Vec::new();
    let rows = score_rows(stages.role.as_ref(), instances, &stages.universe)
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            _ if skip.get(i).copied().unwrap_or(false) => None,
            Ok(row) => Some(row),
            Err(e) => {
                errors.push((i, e.to_string()));
                None
            }
        })
        .collect();
    let m = ScoreMatrix {
        universe: stages.universe.clone(),
        rows,
    };
    let (sets, report) = apply_selection(&m, instances, selection);
    Ok((report, sets, errors))
}

/// Runs every stage over `instances` on the current rayon pool.
pub fn run(
    inv: &FrameInventory,
    instances: &[PredicateInstance],
    stages: &Stages,
    given: Intermediates,
) -> Result<RunOutput> {
    stages.selection.validate()?;
    let mut failures: Vec<Option<Failure>> = vec![None; instances.len()];
    let fail = |failures: &mut Vec<Option<Failure>>, i: usize, stage: &str, error: String| {
        if failures[i].is_none() {
            warn!("{}: {stage} stage failed: {error}", instances[i].key());
            failures[i] = Some(Failure {
                predicate: instances[i].key(),
                stage: stage.to_string(),
                error,
            });
        }
    };

    let senses = match given.senses {
        Some(s) => {
            check_keys("sense file", instances, s.iter().map(|r| r.predicate.as_str()))?;
            s
        }
        None => predict_senses(inv, instances, stages),
    };
    let corruption = match stages.senses {
        SenseSource::Gold { corruption, seed } => {
            let mut stats = CorruptionStats::default();
            for (i, rec) in senses.iter().enumerate() {
                match (&instances[i].gold_sense, rec.error.is_none()) {
                    (Some(g), true) => match corrupt_sense(inv, g, seed, i, corruption).1 {
                        Some(true) => stats.corrupted += 1,
                        None => stats.single_sense += 1,
                        Some(false) => {}
                    },
                    _ => {}
                }
            }
            info!(
                "sense corruption {corruption}: {} swapped, {} single-sense lemmas skipped",
                stats.corrupted, stats.single_sense
            );
            Some(stats)
        }
        SenseSource::Predicted => None,
    };
    for (i, rec) in senses.iter().enumerate() {
        if let Some(e) = &rec.error {
            fail(&mut failures, i, "sense", e.clone());
        } else if rec.sense.is_none() {
            fail(&mut failures, i, "sense", "no sense".to_string());
        }
    }

    let (lambda_report, role_sets) = match given.roles {
        Some((report, sets)) => {
            check_keys("role-set file", instances, sets.iter().map(|r| r.predicate.as_str()))?;
            (report, sets)
        }
        None => {
            let skip: Vec<bool> = failures.iter().map(Option::is_some).collect();
            let (report, sets, errors) = select_roles(instances, stages, &skip)?;
            for (i, e) in errors {
                fail(&mut failures, i, "role", e);
            }
            (report, sets)
        }
    };

    let decoded: Vec<Option<Result<Vec<ArgumentSpan>>>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            if failures[i].is_some() {
                return None;
            }
            let sense = senses[i].sense.as_deref().expect("checked above");
            Some(bio_stage(inv, inst, sense, &role_sets[i].roles, stages))
        })
        .collect();
    let mut predictions = Vec::with_capacity(instances.len());
    for (i, d) in decoded.into_iter().enumerate() {
        predictions.push(match d {
            Some(Ok(args)) => Prediction {
                sense: senses[i].sense.clone(),
                args,
            },
            Some(Err(e)) => {
                fail(&mut failures, i, "bio", e.to_string());
                Prediction::default()
            }
            None => Prediction::default(),
        });
    }
    let failures: Vec<Failure> = failures.into_iter().flatten().collect();
    if !failures.is_empty() {
        warn!("{} of {} predicates failed and were left empty", failures.len(), instances.len());
    }
    Ok(RunOutput {
        predictions,
        senses,
        role_sets,
        lambda_report,
        failures,
        corruption,
    })
}

/// One role query as sent to the BIO scorer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub predicate: String,
    pub sense: String,
    pub role: BaseRole,
    pub query: String,
}

/// The queries a run would send, given the sense and role-set stages.
pub fn dump_queries(
    inv: &FrameInventory,
    instances: &[PredicateInstance],
    senses: &[SenseRecord],
    role_sets: &[RoleSet],
    style: QueryStyle,
) -> Result<Vec<QueryRecord>> {
    check_keys("sense file", instances, senses.iter().map(|r| r.predicate.as_str()))?;
    check_keys("role-set file", instances, role_sets.iter().map(|r| r.predicate.as_str()))?;
    let mut out = Vec::new();
    for ((inst, rec), set) in instances.iter().zip(senses).zip(role_sets) {
        let Some(sense) = &rec.sense else { continue };
        for (role, query) in instance_queries(inv, inst, sense, &set.roles, style)? {
            out.push(QueryRecord {
                predicate: inst.key(),
                sense: sense.clone(),
                role,
                query,
            });
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    with_file(path, |out| {
        for r in records {
            serde_json::to_writer(&mut *out, r).map_err(|e| Error::Contract(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(&name, n + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_senses(path: &Path) -> Result<Vec<SenseRecord>> {
    read_jsonl(path)
}

/// Runs `f` on a pool of `workers` threads, or the global pool.
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("workers must be at least 1".to_string())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub output: RunOutput,
    pub report: Option<EvalReport>,
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Stage intermediates under `dir`.
pub fn write_intermediates(dir: &Path, out: &RunOutput) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let senses = dir.join(SENSES_FILE);
    let roles = dir.join(ROLES_FILE);
    write_jsonl(&senses, &out.senses)?;
    write_role_sets(&roles, &out.lambda_report, &out.role_sets)?;
    Ok((senses, roles))
}

pub fn read_intermediates(senses: Option<&Path>, roles: Option<&Path>) -> Result<Intermediates> {
    Ok(Intermediates {
        senses: senses.map(read_senses).transpose()?,
        roles: roles.map(read_role_sets).transpose()?,
    })
}

/// Loads everything named by `cfg`, runs, and writes predictions, the
/// report (when the corpus carries gold) and the intermediates.
pub fn run_pipeline(cfg: &PipelineConfig, given: Intermediates) -> Result<PipelineResult> {
    let inv = cfg.inventory()?;
    let corpus = cfg.corpus_path()?;
    let instances = read_corpus(&corpus, cfg.corpus_format()?)?;
    info!("{} predicates from {}", instances.len(), corpus.display());
    let stages = cfg.stages()?;
    let output = with_pool(cfg.workers, || run(&inv, &instances, &stages, given))??;

    if let Some(path) = &cfg.paths.output {
        ensure_parent(path)?;
        write_predictions(&instances, &output.predictions, path)?;
    }
    if let Some(dir) = &cfg.paths.intermediates {
        write_intermediates(dir, &output)?;
        write_jsonl(
            &dir.join(QUERIES_FILE),
            &dump_queries(&inv, &instances, &output.senses, &output.role_sets, stages.style)?,
        )?;
    }
    let report = if instances.iter().all(|i| i.gold_args.is_some()) {
        let report = evaluate(&instances, &output.predictions, cfg.eval_mode, Some(&inv))?;
        if let Some(path) = &cfg.paths.report {
            ensure_parent(path)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Contract(e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
        }
        Some(report)
    } else {
        None
    };
    Ok(PipelineResult { output, report })
}
