use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{SenseSource, Stages, TrainSettings};
use crate::corpus::CorpusFormat;
use crate::error::{Error, Result};
use crate::evaluation::EvalMode;
use crate::frames::{BaseRole, FrameInventory};
use crate::querygen::QueryStyle;
use crate::role_filter::Selection;
use crate::scoring::{ReferenceModel, Scorer, ScorerSpec, DEFAULT_TIMEOUT};

pub const CONFIG_VERSION: u32 = 1;

fn default_seed() -> u64 {
    13
}

fn default_format() -> String {
    "normalized".to_string()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseMode {
    #[default]
    Predicted,
    Gold,
}

/// File locations. Relative paths are taken from the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub frames: PathBuf,
    pub modifiers: Option<PathBuf>,
    /// Corpus to label.
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub corpus_format: String,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Directory receiving senses.jsonl, roles.jsonl and queries.jsonl.
    pub intermediates: Option<PathBuf>,
    /// Reference model written by `train` and read by default scorers.
    pub model: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
}

/// Scorer per head; unset heads use `default`, then the reference model at `paths.model`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scorers {
    pub default: Option<ScorerSpec>,
    pub sense: Option<ScorerSpec>,
    pub role: Option<ScorerSpec>,
    pub bio: Option<ScorerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub query_style: QueryStyle,
    #[serde(default)]
    pub senses: SenseMode,
    #[serde(default)]
    pub sense_corruption: f64,
    #[serde(default)]
    pub eval_mode: EvalMode,
    /// Role universe; defaults to the one stored in the reference role model.
    #[serde(default)]
    pub roles: Option<Vec<BaseRole>>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    pub paths: Paths,
    #[serde(default)]
    pub scorers: Scorers,
    #[serde(default)]
    pub train: TrainSettings,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        if p.frames.is_relative() {
            p.frames = base.join(&p.frames);
        }
        for slot in [
            &mut p.modifiers,
            &mut p.corpus,
            &mut p.output,
            &mut p.report,
            &mut p.intermediates,
            &mut p.model,
            &mut p.train,
            &mut p.dev,
        ] {
            resolve(base, slot);
        }
        for spec in [
            &mut self.scorers.default,
            &mut self.scorers.sense,
            &mut self.scorers.role,
            &mut self.scorers.bio,
        ]
        .into_iter()
        {
            if let Some(s) = spec.take() {
                *spec = Some(s.resolve(base));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.selection()?;
        if !(0.0..=1.0).contains(&self.sense_corruption) {
            return Err(Error::Config(format!(
                "sense_corruption must lie in [0, 1], got {}",
                self.sense_corruption
            )));
        }
        if self.sense_corruption > 0.0 && self.senses != SenseMode::Gold {
            return Err(Error::Config("sense_corruption applies to gold senses; set senses = \"gold\"".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.corpus_format()?;
        Ok(())
    }

    /// Exactly one of `lambda` and `threshold`.
    pub fn selection(&self) -> Result<Selection> {
        match (self.lambda, self.threshold) {
            (Some(l), None) => Selection::Lambda(l).validate(),
            (None, Some(t)) => Selection::Threshold(t).validate(),
            _ => Err(Error::Config("set exactly one of lambda and threshold".into())),
        }
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        self.paths.corpus_format.parse()
    }

    pub fn corpus_path(&self) -> Result<PathBuf> {
        self.paths
            .corpus
            .clone()
            .ok_or_else(|| Error::Config("paths.corpus is not set".into()))
    }

    pub fn inventory(&self) -> Result<FrameInventory> {
        let inv = FrameInventory::load(&self.paths.frames)?;
        match &self.paths.modifiers {
            Some(m) => inv.with_modifiers(FrameInventory::load_modifiers(m)?),
            None => Ok(inv),
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout_secs.map(Duration::from_secs).unwrap_or(DEFAULT_TIMEOUT)
    }

    fn spec(&self, head: Option<&ScorerSpec>) -> Result<ScorerSpec> {
        head.or(self.scorers.default.as_ref())
            .cloned()
            .or_else(|| self.paths.model.clone().map(ScorerSpec::Reference))
            .ok_or_else(|| Error::Config("no scorer configured (set scorers.default or paths.model)".into()))
    }

    /// Specs of the sense, role and BIO heads.
    pub fn specs(&self) -> Result<[ScorerSpec; 3]> {
        Ok([
            self.spec(self.scorers.sense.as_ref())?,
            self.spec(self.scorers.role.as_ref())?,
            self.spec(self.scorers.bio.as_ref())?,
        ])
    }

    pub fn universe(&self) -> Result<Vec<BaseRole>> {
        if let Some(r) = &self.roles {
            return Ok(r.clone());
        }
        match &self.specs()?[1] {
            ScorerSpec::Reference(path) => {
                let roles = ReferenceModel::load(path)?.roles;
                if roles.is_empty() {
                    Err(Error::Config(format!("model {} stores no role universe", path.display())))
                } else {
                    Ok(roles)
                }
            }
            _ => Err(Error::Config("external role scorer: set `roles` in the config".into())),
        }
    }

    pub fn sense_source(&self) -> SenseSource {
        match self.senses {
            SenseMode::Predicted => SenseSource::Predicted,
            SenseMode::Gold => SenseSource::Gold {
                corruption: self.sense_corruption,
                seed: self.seed,
            },
        }
    }

    /// Opens the scorers; heads sharing a spec share one scorer.
    pub fn stages(&self) -> Result<Stages> {
        let mut open: HashMap<String, Arc<dyn Scorer>> = HashMap::new();
        let mut get = |spec: &ScorerSpec| -> Result<Arc<dyn Scorer>> {
            if let Some(s) = open.get(&spec.to_string()) {
                return Ok(Arc::clone(s));
            }
            let s = spec.open_with_timeout(self.timeout())?;
            open.insert(spec.to_string(), Arc::clone(&s));
            Ok(s)
        };
        let [sense, role, bio] = self.specs()?;
        Ok(Stages {
            sense: get(&sense)?,
            role: get(&role)?,
            bio: get(&bio)?,
            universe: self.universe()?,
            selection: self.selection()?,
            style: self.query_style,
            senses: self.sense_source(),
        })
    }
}
