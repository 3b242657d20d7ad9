use std::collections::BTreeSet;

use log::info;
use serde::{Deserialize, Serialize};

use crate::corpus::PredicateInstance;
use crate::error::{Error, Result};
use crate::frames::{BaseRole, FrameInventory};
use crate::querygen::QueryStyle;
use crate::role_filter::{filter_roles, gold_roles, score_matrix, tune_lambda, Selection, TuneResult, DEFAULT_GRID_STEP};
use crate::scoring::{train_bio, train_role, train_sense, BioTrainReport, ReferenceModel, TrainConfig, TrainReport, DEFAULT_HASH_BITS};

/// The `[train]` table of the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub hash_bits: u32,
    pub target_recall: f64,
    pub grid_step: f64,
    pub sense: TrainConfig,
    pub role: TrainConfig,
    pub bio: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            hash_bits: DEFAULT_HASH_BITS,
            target_recall: 0.99,
            grid_step: DEFAULT_GRID_STEP,
            sense: TrainConfig::default(),
            role: TrainConfig::default(),
            bio: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub universe: Vec<BaseRole>,
    pub sense: TrainReport,
    pub role: TrainReport,
    pub tuning: TuneResult,
    pub bio: BioTrainReport,
}

/// Base roles seen in gold arguments, sorted.
pub fn role_universe(instances: &[PredicateInstance]) -> Vec<BaseRole> {
    let set: BTreeSet<BaseRole> = instances
        .iter()
        .flat_map(|i| i.gold_args.iter().flatten())
        .map(|a| a.role.base.clone())
        .collect();
    set.into_iter().collect()
}

/// Trains the BIO head under the role sets the role head predicts for the
/// training instances at `lambda`.
pub fn train_bio_with_filter(
    model: &mut ReferenceModel,
    inv: &FrameInventory,
    train: &[PredicateInstance],
    universe: &[BaseRole],
    lambda: f64,
    style: QueryStyle,
    cfg: &TrainConfig,
) -> Result<BioTrainReport> {
    let (sets, report) = filter_roles(&*model, train, universe, Selection::Lambda(lambda))?;
    info!(
        "training role sets at lambda {lambda}: {} pairs, recall {:?}",
        report.kept_pairs, report.recall
    );
    let sets: Vec<Vec<BaseRole>> = sets.into_iter().map(|s| s.roles).collect();
    train_bio(model, train, inv, &sets, style, cfg)
}

/// Sense head, role head, λ tuned on `dev` (the training set when `dev` is
/// empty), then the BIO head on predicted role sets.
pub fn train_model(
    inv: &FrameInventory,
    train: &[PredicateInstance],
    dev: &[PredicateInstance],
    universe: Option<&[BaseRole]>,
    style: QueryStyle,
    settings: &TrainSettings,
) -> Result<(ReferenceModel, TrainSummary)> {
    let universe = match universe {
        Some(u) => u.to_vec(),
        None => role_universe(train),
    };
    if universe.is_empty() {
        return Err(Error::Config("training data has no gold arguments".into()));
    }
    let mut model = ReferenceModel::empty(settings.hash_bits);
    let sense = train_sense(&mut model, train, inv, &settings.sense)?;
    let role = train_role(&mut model, train, &universe, &settings.role)?;

    let tune_on = if dev.is_empty() { train } else { dev };
    let m = score_matrix(&model, tune_on, &universe)?;
    let tuning = tune_lambda(&m, &gold_roles(tune_on), settings.target_recall, settings.grid_step)?;
    info!(
        "lambda {} (recall {:?}, speedup {:.2})",
        tuning.lambda, tuning.report.recall, tuning.report.speedup
    );
    model.lambda = Some(tuning.lambda);

    let bio = train_bio_with_filter(&mut model, inv, train, &universe, tuning.lambda, style, &settings.bio)?;
    Ok((
        model,
        TrainSummary {
            universe,
            sense,
            role,
            tuning,
            bio,
        },
    ))
}
