//! Ablation sweeps: corrupted gold senses, label-only queries, and training
//! on growing corpus prefixes.

use std::collections::BTreeSet;
use std::str::FromStr;
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use super::{
    dump_queries, role_universe, run, train_bio_with_filter, train_model, with_pool, Intermediates, PipelineConfig,
    RunOutput, SenseSource, Stages, TrainSettings,
};
use crate::corpus::{read_corpus, PredicateInstance};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalMode, EvalReport};
use crate::frames::{BaseRole, FrameInventory};
use crate::querygen::QueryStyle;
use crate::role_filter::{write_role_sets_to, Selection};

pub const CORRUPTION_RATES: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
pub const DATA_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const SERIES_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    SenseCorruption,
    NoSemantics,
    DataFraction,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sense-corruption" => Ok(Ablation::SenseCorruption),
            "no-semantics" => Ok(Ablation::NoSemantics),
            "data-fraction" => Ok(Ablation::DataFraction),
            other => Err(Error::Config(format!("unknown ablation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    /// Corruption rate, data fraction, or 1/0 for semantic/label-only queries.
    pub setting: f64,
    pub label: String,
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_sense_skipped: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failures: Option<usize>,
}

/// Stage-by-stage comparison of a semantic and a label-only run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationCheck {
    pub senses_identical: bool,
    /// The serialized role-set files are byte-identical.
    pub role_sets_identical: bool,
    pub queries: usize,
    /// Queries whose text differs; everything else about them matches.
    pub query_text_changed: usize,
    /// Queries present in one run only, or differing in predicate, sense or role.
    pub query_other_differences: usize,
}

impl IsolationCheck {
    pub fn only_query_text_changed(&self) -> bool {
        self.senses_identical && self.role_sets_identical && self.query_other_differences == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSeries {
    pub version: u32,
    pub ablation: Ablation,
    pub points: Vec<AblationPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolation: Option<IsolationCheck>,
}

impl AblationSeries {
    pub fn f1s(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.report.arguments.f1).collect()
    }
}

fn point(setting: f64, label: String, gold: &[PredicateInstance], out: &RunOutput, inv: &FrameInventory) -> Result<AblationPoint> {
    let report = evaluate(gold, &out.predictions, EvalMode::Span, Some(inv))?;
    info!("{label}: argument F1 {:.4}", report.arguments.f1);
    Ok(AblationPoint {
        setting,
        label,
        report,
        corrupted: out.corruption.map(|c| c.corrupted),
        single_sense_skipped: out.corruption.map(|c| c.single_sense),
        failures: Some(out.failures.len()),
    })
}

/// Gold senses corrupted at each rate; everything else as in `base`.
pub fn sense_corruption(
    inv: &FrameInventory,
    test: &[PredicateInstance],
    base: &Stages,
    rates: &[f64],
    seed: u64,
) -> Result<AblationSeries> {
    let mut points = Vec::new();
    for &rate in rates {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("corruption rate {rate} outside [0, 1]")));
        }
        let stages = Stages {
            senses: SenseSource::Gold { corruption: rate, seed },
            ..base.clone()
        };
        let out = run(inv, test, &stages, Intermediates::default())?;
        points.push(point(rate, format!("corruption={rate}"), test, &out, inv)?);
    }
    Ok(AblationSeries {
        version: SERIES_VERSION,
        ablation: Ablation::SenseCorruption,
        points,
        isolation: None,
    })
}

fn role_file_bytes(out: &RunOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_role_sets_to(&mut buf, &out.lambda_report, &out.role_sets)?;
    Ok(buf)
}

/// Trains once with semantic queries, retrains only the BIO head with bare
/// labels, and runs both on `test`. The sense and role heads are shared.
#[allow(clippy::too_many_arguments)]
pub fn no_semantics(
    inv: &FrameInventory,
    train: &[PredicateInstance],
    dev: &[PredicateInstance],
    test: &[PredicateInstance],
    universe: Option<&[BaseRole]>,
    settings: &TrainSettings,
    selection: Selection,
) -> Result<AblationSeries> {
    let (semantic, summary) = train_model(inv, train, dev, universe, QueryStyle::Semantic, settings)?;
    let mut label = semantic.clone();
    train_bio_with_filter(
        &mut label,
        inv,
        train,
        &summary.universe,
        summary.tuning.lambda,
        QueryStyle::LabelOnly,
        &settings.bio,
    )?;
    let semantic = Arc::new(semantic);
    let label = Arc::new(label);
    let mut stages = Stages::single(semantic, summary.universe.clone(), selection);
    let with = run(inv, test, &stages, Intermediates::default())?;
    stages.bio = label;
    stages.style = QueryStyle::LabelOnly;
    let without = run(inv, test, &stages, Intermediates::default())?;

    let q_with = dump_queries(inv, test, &with.senses, &with.role_sets, QueryStyle::Semantic)?;
    let q_without = dump_queries(inv, test, &without.senses, &without.role_sets, QueryStyle::LabelOnly)?;
    let mut changed = 0;
    let mut other = q_with.len().abs_diff(q_without.len());
    for (a, b) in q_with.iter().zip(&q_without) {
        if (&a.predicate, &a.sense, &a.role) != (&b.predicate, &b.sense, &b.role) {
            other += 1;
        } else if a.query != b.query {
            changed += 1;
        }
    }
    let isolation = IsolationCheck {
        senses_identical: with.senses == without.senses,
        role_sets_identical: role_file_bytes(&with)? == role_file_bytes(&without)?,
        queries: q_with.len(),
        query_text_changed: changed,
        query_other_differences: other,
    };
    Ok(AblationSeries {
        version: SERIES_VERSION,
        ablation: Ablation::NoSemantics,
        points: vec![
            point(1.0, "semantic".into(), test, &with, inv)?,
            point(0.0, "label-only".into(), test, &without, inv)?,
        ],
        isolation: Some(isolation),
    })
}

/// Instances of the first `fraction` of sentences (at least one).
pub fn sentence_prefix(instances: &[PredicateInstance], fraction: f64) -> &[PredicateInstance] {
    let ids: Vec<&str> = {
        let mut seen = BTreeSet::new();
        instances
            .iter()
            .map(|i| i.sentence.id.as_str())
            .filter(|id| seen.insert(*id))
            .collect()
    };
    let keep = ((ids.len() as f64 * fraction).ceil() as usize).clamp(1.min(ids.len()), ids.len());
    let keep: BTreeSet<&str> = ids[..keep].iter().copied().collect();
    let end = instances
        .iter()
        .position(|i| !keep.contains(i.sentence.id.as_str()))
        .unwrap_or(instances.len());
    &instances[..end]
}

/// Retrains the reference scorer on growing training prefixes.
#[allow(clippy::too_many_arguments)]
pub fn data_fraction(
    inv: &FrameInventory,
    train: &[PredicateInstance],
    dev: &[PredicateInstance],
    test: &[PredicateInstance],
    universe: Option<&[BaseRole]>,
    settings: &TrainSettings,
    selection: Selection,
    fractions: &[f64],
) -> Result<AblationSeries> {
    let universe = universe.map(<[BaseRole]>::to_vec).unwrap_or_else(|| role_universe(train));
    let mut points = Vec::new();
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("data fraction {f} outside (0, 1]")));
        }
        let part = sentence_prefix(train, f);
        let (model, _) = train_model(inv, part, dev, Some(&universe), QueryStyle::Semantic, settings)?;
        let stages = Stages::single(Arc::new(model), universe.clone(), selection);
        let out = run(inv, test, &stages, Intermediates::default())?;
        points.push(point(f, format!("fraction={f} ({} predicates)", part.len()), test, &out, inv)?);
    }
    Ok(AblationSeries {
        version: SERIES_VERSION,
        ablation: Ablation::DataFraction,
        points,
        isolation: None,
    })
}

/// Runs one ablation as described by `cfg`: the corpus is the test split;
/// retraining ablations read `paths.train` and optionally `paths.dev`.
pub fn run_ablation(cfg: &PipelineConfig, which: Ablation) -> Result<AblationSeries> {
    let inv = cfg.inventory()?;
    let format = cfg.corpus_format()?;
    let test = read_corpus(&cfg.corpus_path()?, format)?;
    if test.iter().any(|i| i.gold_args.is_none() || i.gold_sense.is_none()) {
        return Err(Error::Config("ablations need gold senses and arguments in the corpus".into()));
    }
    let load_train = || -> Result<(Vec<PredicateInstance>, Vec<PredicateInstance>)> {
        let train = cfg
            .paths
            .train
            .as_ref()
            .ok_or_else(|| Error::Config("this ablation retrains; set paths.train".into()))?;
        let dev = match &cfg.paths.dev {
            Some(d) => read_corpus(d, format)?,
            None => Vec::new(),
        };
        Ok((read_corpus(train, format)?, dev))
    };
    let selection = cfg.selection()?;
    with_pool(cfg.workers, || match which {
        Ablation::SenseCorruption => sense_corruption(&inv, &test, &cfg.stages()?, &CORRUPTION_RATES, cfg.seed),
        Ablation::NoSemantics => {
            let (train, dev) = load_train()?;
            no_semantics(&inv, &train, &dev, &test, cfg.roles.as_deref(), &cfg.train, selection)
        }
        Ablation::DataFraction => {
            let (train, dev) = load_train()?;
            data_fraction(
                &inv,
                &train,
                &dev,
                &test,
                cfg.roles.as_deref(),
                &cfg.train,
                selection,
                &DATA_FRACTIONS,
            )
        }
    })?
}
