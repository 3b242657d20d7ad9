//! Scoring contracts shared by every scorer implementation.
//!
//! Three heads are needed by the pipeline:
//!
//! * sense option confidence, a probability per (option text, marked sentence);
//! * role presence, a probability per role of the role universe;
//! * per-token distributions over the seven BIO tags for one role query.
//!
//! [`ReferenceModel`] is the built-in trainable implementation,
//! [`ExternalScorer`] forwards requests to another process over the wire
//! protocol in [`protocol`], and [`TableScorer`] answers from fixed tables.

mod external;
mod features;
pub mod protocol;
mod reference;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{BaseRole, Prefix};
use crate::querygen::MarkedSequence;

pub use external::ExternalScorer;
pub use reference::{
    train_bio, train_role, train_sense, BioTrainReport, LinearHead, ReferenceModel, TrainConfig, TrainReport,
    DEFAULT_HASH_BITS,
};
pub use table::TableScorer;

/// Begin or inside marker of a tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bio {
    B,
    I,
}

/// One of the seven local BIO tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Arg(Bio, Prefix),
    O,
}

pub const TAG_COUNT: usize = 7;

/// Index order of tag probabilities, on the wire and in [`TagDistribution`].
pub const TAGS: [Tag; TAG_COUNT] = [
    Tag::Arg(Bio::B, Prefix::N),
    Tag::Arg(Bio::I, Prefix::N),
    Tag::Arg(Bio::B, Prefix::R),
    Tag::Arg(Bio::I, Prefix::R),
    Tag::Arg(Bio::B, Prefix::C),
    Tag::Arg(Bio::I, Prefix::C),
    Tag::O,
];

pub const O_INDEX: usize = 6;

impl Tag {
    pub fn index(self) -> usize {
        match self {
            Tag::Arg(bio, prefix) => 2 * prefix.index() + usize::from(bio == Bio::I),
            Tag::O => O_INDEX,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Arg(bio, prefix) => write!(f, "{bio:?}-{prefix:?}"),
            Tag::O => f.write_str("O"),
        }
    }
}

pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// Per-token probabilities over [`TAGS`] for one role query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TagDistribution {
    rows: Vec<[f64; TAG_COUNT]>,
}

impl TagDistribution {
    /// Validates that every row is a probability vector (sum 1 within 1e-6,
    /// entries allowed the same slack above 1).
    pub fn new(rows: Vec<[f64; TAG_COUNT]>) -> Result<Self> {
        for (j, row) in rows.iter().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0 + DISTRIBUTION_TOLERANCE) {
                return Err(Error::Contract(format!("row {j} has entries outside [0, 1]: {row:?}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
                return Err(Error::Contract(format!("row {j} sums to {sum}")));
            }
        }
        Ok(TagDistribution { rows })
    }

    pub fn uniform(len: usize) -> Self {
        TagDistribution {
            rows: vec![[1.0 / TAG_COUNT as f64; TAG_COUNT]; len],
        }
    }

    /// Every token certainly outside any argument.
    pub fn all_outside(len: usize) -> Self {
        let mut row = [0.0; TAG_COUNT];
        row[O_INDEX] = 1.0;
        TagDistribution { rows: vec![row; len] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; TAG_COUNT]] {
        &self.rows
    }

    pub fn prob(&self, token: usize, tag: Tag) -> f64 {
        self.rows[token][tag.index()]
    }
}

impl TryFrom<Vec<Vec<f64>>> for TagDistribution {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(j, r)| {
                <[f64; TAG_COUNT]>::try_from(r.as_slice())
                    .map_err(|_| Error::Contract(format!("row {j} has {} entries, expected {TAG_COUNT}", r.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        TagDistribution::new(rows)
    }
}

impl From<TagDistribution> for Vec<Vec<f64>> {
    fn from(d: TagDistribution) -> Self {
        d.rows.into_iter().map(|r| r.to_vec()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SenseRequest {
    pub marked: MarkedSequence,
    pub option_text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoleRequest {
    pub marked: MarkedSequence,
    pub roles: Vec<BaseRole>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BioRequest {
    pub marked: MarkedSequence,
    pub query_text: String,
    pub role: BaseRole,
}

/// The three scoring heads. Implementations must be deterministic for fixed
/// parameters and safe to call from several threads.
pub trait Scorer: Send + Sync {
    fn score_senses(&self, requests: &[SenseRequest]) -> Result<Vec<f64>>;

    fn score_roles(&self, requests: &[RoleRequest]) -> Result<Vec<BTreeMap<BaseRole, f64>>>;

    fn score_bio(&self, requests: &[BioRequest]) -> Result<Vec<TagDistribution>>;

    fn score_sense(&self, request: &SenseRequest) -> Result<f64> {
        Ok(self.score_senses(std::slice::from_ref(request))?[0])
    }

    fn score_role_presence(&self, request: &RoleRequest) -> Result<BTreeMap<BaseRole, f64>> {
        Ok(self.score_roles(std::slice::from_ref(request))?.remove(0))
    }

    fn score_bio_one(&self, request: &BioRequest) -> Result<TagDistribution> {
        Ok(self.score_bio(std::slice::from_ref(request))?.remove(0))
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score_senses(&self, requests: &[SenseRequest]) -> Result<Vec<f64>> {
        (**self).score_senses(requests)
    }

    fn score_roles(&self, requests: &[RoleRequest]) -> Result<Vec<BTreeMap<BaseRole, f64>>> {
        (**self).score_roles(requests)
    }

    fn score_bio(&self, requests: &[BioRequest]) -> Result<Vec<TagDistribution>> {
        (**self).score_bio(requests)
    }
}

pub(crate) fn check_probability(p: f64, what: &str) -> Result<f64> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::Protocol(format!("{what} score {p} is not a probability")))
    }
}

/// Checks a role-presence answer covers exactly the requested roles.
pub(crate) fn check_role_scores(request: &RoleRequest, scores: &BTreeMap<BaseRole, f64>) -> Result<()> {
    if scores.len() != request.roles.len() || request.roles.iter().any(|r| !scores.contains_key(r)) {
        return Err(Error::Protocol(format!(
            "role scores {:?} do not match requested roles {:?}",
            scores.keys().collect::<Vec<_>>(),
            request.roles
        )));
    }
    for p in scores.values() {
        check_probability(*p, "role")?;
    }
    Ok(())
}

/// Checks a BIO answer has one row per unmarked sentence token.
pub(crate) fn check_bio_length(request: &BioRequest, dist: &TagDistribution) -> Result<()> {
    let expected = request.marked.tokens.len() - 2;
    if dist.len() != expected {
        return Err(Error::Protocol(format!(
            "tag distribution has {} rows for a {expected}-token sentence",
            dist.len()
        )));
    }
    Ok(())
}

/// How to reach a scorer: `reference:<model>`, `exec:<command>` or `tcp:<host:port>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScorerSpec {
    Reference(PathBuf),
    Exec(String),
    Tcp(String),
}

impl FromStr for ScorerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("scorer spec {s:?} must look like kind:target")))?;
        if rest.is_empty() {
            return Err(Error::Config(format!("scorer spec {s:?} has no target")));
        }
        match kind {
            "reference" => Ok(ScorerSpec::Reference(PathBuf::from(rest))),
            "exec" => Ok(ScorerSpec::Exec(rest.to_string())),
            "tcp" => Ok(ScorerSpec::Tcp(rest.to_string())),
            other => Err(Error::Config(format!("unknown scorer kind {other:?}"))),
        }
    }
}

impl TryFrom<String> for ScorerSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Reference(p) => write!(f, "reference:{}", p.display()),
            ScorerSpec::Exec(c) => write!(f, "exec:{c}"),
            ScorerSpec::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

impl From<ScorerSpec> for String {
    fn from(s: ScorerSpec) -> Self {
        s.to_string()
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

impl ScorerSpec {
    /// Relative model paths are resolved against `base`.
    pub fn resolve(self, base: &std::path::Path) -> Self {
        match self {
            ScorerSpec::Reference(p) if p.is_relative() => ScorerSpec::Reference(base.join(p)),
            other => other,
        }
    }

    pub fn open(&self) -> Result<Arc<dyn Scorer>> {
        self.open_with_timeout(DEFAULT_TIMEOUT)
    }

    pub fn open_with_timeout(&self, timeout: Duration) -> Result<Arc<dyn Scorer>> {
        Ok(match self {
            ScorerSpec::Reference(path) => Arc::new(ReferenceModel::load(path)?),
            ScorerSpec::Exec(cmd) => Arc::new(ExternalScorer::spawn(cmd, timeout)?),
            ScorerSpec::Tcp(addr) => Arc::new(ExternalScorer::connect(addr, timeout)?),
        })
    }
}
