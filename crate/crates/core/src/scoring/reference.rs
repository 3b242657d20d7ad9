//! Built-in reference scorer: linear models over hashed sparse features with
//! a sigmoid head for sense options and role presence and a softmax head over
//! the seven BIO tags. Trained with plain SGD.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{bio_features, role_features, sense_features, FeatureHasher, Features};
use super::{BioRequest, RoleRequest, Scorer, SenseRequest, TagDistribution, O_INDEX, TAGS, TAG_COUNT};
use crate::corpus::{resolve_lemma, PredicateInstance};
use crate::error::{Error, Result};
use crate::frames::{BaseRole, FrameInventory};
use crate::querygen::{build_role_query, build_sense_options, mark_predicate, QueryStyle};

pub const DEFAULT_HASH_BITS: u32 = 18;
const MODEL_VERSION: u32 = 1;

/// Dense weights indexed by `bucket * outputs + output`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SparseHead", into = "SparseHead")]
pub struct LinearHead {
    bits: u32,
    outputs: usize,
    weights: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct SparseHead {
    bits: u32,
    outputs: usize,
    weights: Vec<(u32, f32)>,
}

impl From<LinearHead> for SparseHead {
    fn from(h: LinearHead) -> Self {
        SparseHead {
            bits: h.bits,
            outputs: h.outputs,
            weights: h
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        }
    }
}

impl From<SparseHead> for LinearHead {
    fn from(s: SparseHead) -> Self {
        let mut head = LinearHead::zeros(s.bits, s.outputs);
        for (i, w) in s.weights {
            if let Some(slot) = head.weights.get_mut(i as usize) {
                *slot = w;
            }
        }
        head
    }
}

impl LinearHead {
    pub fn zeros(bits: u32, outputs: usize) -> Self {
        LinearHead {
            bits,
            outputs,
            weights: vec![0.0; (1usize << bits) * outputs],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0)
    }

    fn logits(&self, features: &Features, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &(b, v) in features {
            let base = b as usize * self.outputs;
            for (k, o) in out.iter_mut().enumerate() {
                *o += f64::from(self.weights[base + k]) * f64::from(v);
            }
        }
    }

    fn logit(&self, features: &Features) -> f64 {
        let mut out = [0.0];
        self.logits(features, &mut out);
        out[0]
    }

    fn step(&mut self, features: &Features, grads: &[f64], lr: f64) {
        for &(b, v) in features {
            let base = b as usize * self.outputs;
            for (k, g) in grads.iter().enumerate() {
                self.weights[base + k] -= (lr * g * f64::from(v)) as f32;
            }
        }
    }
}

fn require<'a>(head: &'a Option<LinearHead>, name: &str) -> Result<&'a LinearHead> {
    head.as_ref()
        .ok_or_else(|| Error::Config(format!("reference model has no {name} head")))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(logits: &[f64; TAG_COUNT]) -> [f64; TAG_COUNT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; TAG_COUNT];
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    out
}

/// Parameters of the three heads. Missing heads make the matching scoring call fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    version: u32,
    pub hash_bits: u32,
    /// Role universe seen when the role head was trained.
    #[serde(default)]
    pub roles: Vec<BaseRole>,
    /// Role-selection budget tuned at training time, if any.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub sense: Option<LinearHead>,
    pub role: Option<LinearHead>,
    pub bio: Option<LinearHead>,
}

impl ReferenceModel {
    /// All heads present with zero weights: sense and role scores are 0.5,
    /// tag distributions uniform.
    pub fn untrained(hash_bits: u32) -> Self {
        ReferenceModel {
            version: MODEL_VERSION,
            hash_bits,
            roles: Vec::new(),
            lambda: None,
            sense: Some(LinearHead::zeros(hash_bits, 1)),
            role: Some(LinearHead::zeros(hash_bits, 1)),
            bio: Some(LinearHead::zeros(hash_bits, TAG_COUNT)),
        }
    }

    pub fn empty(hash_bits: u32) -> Self {
        ReferenceModel {
            version: MODEL_VERSION,
            hash_bits,
            roles: Vec::new(),
            lambda: None,
            sense: None,
            role: None,
            bio: None,
        }
    }

    fn hasher(&self) -> FeatureHasher {
        FeatureHasher::new(self.hash_bits)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let model: ReferenceModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
        if model.version != MODEL_VERSION {
            return Err(Error::Config(format!(
                "model {} has version {}, expected {MODEL_VERSION}",
                path.display(),
                model.version
            )));
        }
        for head in [&model.sense, &model.role, &model.bio].into_iter().flatten() {
            if head.bits != model.hash_bits {
                return Err(Error::Config(format!("model {} has inconsistent hash sizes", path.display())));
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self).map_err(|e| Error::Contract(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    fn distribution(&self, head: &LinearHead, request: &BioRequest) -> Result<TagDistribution> {
        let rows = bio_features(&self.hasher(), &request.marked, &request.query_text)
            .iter()
            .map(|f| {
                let mut logits = [0.0; TAG_COUNT];
                head.logits(f, &mut logits);
                softmax(&logits)
            })
            .collect();
        TagDistribution::new(rows)
    }
}

impl Scorer for ReferenceModel {
    fn score_senses(&self, requests: &[SenseRequest]) -> Result<Vec<f64>> {
        let head = require(&self.sense, "sense")?;
        let h = self.hasher();
        Ok(requests
            .iter()
            .map(|r| sigmoid(head.logit(&sense_features(&h, &r.marked, &r.option_text))))
            .collect())
    }

    fn score_roles(&self, requests: &[RoleRequest]) -> Result<Vec<BTreeMap<BaseRole, f64>>> {
        let head = require(&self.role, "role")?;
        let h = self.hasher();
        Ok(requests
            .iter()
            .map(|r| {
                r.roles
                    .iter()
                    .map(|role| {
                        let f = role_features(&h, &r.marked, role.as_str());
                        (role.clone(), sigmoid(head.logit(&f)))
                    })
                    .collect()
            })
            .collect())
    }

    fn score_bio(&self, requests: &[BioRequest]) -> Result<Vec<TagDistribution>> {
        let head = require(&self.bio, "bio")?;
        requests.iter().map(|r| self.distribution(head, r)).collect()
    }
}

/// SGD settings for one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 8,
            learning_rate: 0.1,
            seed: 13,
        }
    }
}

/// Mean training loss of every epoch, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BioTrainReport {
    pub report: TrainReport,
    /// Gold (predicate, role) pairs outside the predicted role sets.
    pub uncovered: usize,
    /// Predicted roles without a description under the gold sense.
    pub skipped_roles: usize,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

fn train_binary(head: &mut LinearHead, examples: &[(Features, f64)], cfg: &TrainConfig) -> Result<TrainReport> {
    if examples.is_empty() {
        return Err(Error::Config("no training examples".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (f, y) = &examples[i];
            let p = sigmoid(head.logit(f));
            let q = clamp_prob(p);
            total -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
            head.step(f, &[p - y], cfg.learning_rate);
        }
        let mean = total / examples.len() as f64;
        debug!("epoch {epoch}: loss {mean:.5}");
        losses.push(mean);
    }
    Ok(TrainReport {
        examples: examples.len(),
        losses,
    })
}

struct TokenExample {
    features: Vec<Features>,
    targets: Vec<usize>,
}

fn train_tags(head: &mut LinearHead, examples: &[TokenExample], cfg: &TrainConfig) -> Result<TrainReport> {
    if examples.is_empty() {
        return Err(Error::Config("no training examples".to_string()));
    }
    let tokens: usize = examples.iter().map(|e| e.targets.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut logits = [0.0; TAG_COUNT];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &examples[i];
            for (f, &y) in ex.features.iter().zip(&ex.targets) {
                head.logits(f, &mut logits);
                let probs = softmax(&logits);
                total -= clamp_prob(probs[y]).ln();
                let mut grads = probs;
                grads[y] -= 1.0;
                head.step(f, &grads, cfg.learning_rate);
            }
        }
        let mean = total / tokens as f64;
        debug!("epoch {epoch}: loss {mean:.5}");
        losses.push(mean);
    }
    Ok(TrainReport {
        examples: examples.len(),
        losses,
    })
}

/// Trains the sense head with per-option binary cross-entropy. Only lemmas
/// with more than one sense contribute; single-sense lemmas never reach the scorer.
pub fn train_sense(
    model: &mut ReferenceModel,
    instances: &[PredicateInstance],
    inv: &FrameInventory,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let h = model.hasher();
    let mut examples = Vec::new();
    for inst in instances {
        let Some(gold) = &inst.gold_sense else { continue };
        let Some(lemma) = resolve_lemma(inv, inst.predicate_word(), inst.lemma.as_deref()) else {
            continue;
        };
        let options = build_sense_options(inv, &lemma);
        if options.len() < 2 {
            continue;
        }
        let marked = mark_predicate(inst);
        for opt in options {
            let y = if &opt.sense_id == gold { 1.0 } else { 0.0 };
            examples.push((sense_features(&h, &marked, &opt.option_text), y));
        }
    }
    let mut head = LinearHead::zeros(model.hash_bits, 1);
    let report = train_binary(&mut head, &examples, cfg)?;
    info!("sense head: {} option examples, final loss {:.4}", report.examples, report.losses.last().unwrap_or(&0.0));
    model.sense = Some(head);
    Ok(report)
}

/// Trains the role head: one binary example per (predicate, role in `universe`).
pub fn train_role(
    model: &mut ReferenceModel,
    instances: &[PredicateInstance],
    universe: &[BaseRole],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let h = model.hasher();
    let mut examples = Vec::new();
    for inst in instances {
        let Some(args) = &inst.gold_args else { continue };
        let marked = mark_predicate(inst);
        for role in universe {
            let y = if args.iter().any(|a| &a.role.base == role) { 1.0 } else { 0.0 };
            examples.push((role_features(&h, &marked, role.as_str()), y));
        }
    }
    let mut head = LinearHead::zeros(model.hash_bits, 1);
    let report = train_binary(&mut head, &examples, cfg)?;
    info!("role head: {} pair examples, final loss {:.4}", report.examples, report.losses.last().unwrap_or(&0.0));
    model.role = Some(head);
    model.roles = universe.to_vec();
    Ok(report)
}

/// Trains the BIO head on the predicted role sets (`role_sets[i]` belongs to
/// `instances[i]`). Queries use the gold sense. Gold roles outside a role set
/// contribute no examples and are counted as uncovered.
pub fn train_bio(
    model: &mut ReferenceModel,
    instances: &[PredicateInstance],
    inv: &FrameInventory,
    role_sets: &[Vec<BaseRole>],
    style: QueryStyle,
    cfg: &TrainConfig,
) -> Result<BioTrainReport> {
    if role_sets.len() != instances.len() {
        return Err(Error::Contract(format!(
            "{} role sets for {} instances",
            role_sets.len(),
            instances.len()
        )));
    }
    let h = model.hasher();
    let mut examples = Vec::new();
    let mut uncovered = 0;
    let mut skipped_roles = 0;
    for (inst, roles) in instances.iter().zip(role_sets) {
        let Some(args) = &inst.gold_args else { continue };
        let mut gold_roles: Vec<&BaseRole> = args.iter().map(|a| &a.role.base).collect();
        gold_roles.sort();
        gold_roles.dedup();
        uncovered += gold_roles.iter().filter(|r| !roles.contains(r)).count();

        let sense = inst.gold_sense.as_deref().unwrap_or("");
        let marked = mark_predicate(inst);
        for role in roles {
            let query = match build_role_query(inv, inst.predicate_word(), sense, role, style) {
                Ok(q) => q,
                Err(_) => {
                    skipped_roles += 1;
                    continue;
                }
            };
            let mut targets = vec![O_INDEX; inst.sentence.len()];
            for a in args.iter().filter(|a| &a.role.base == role) {
                for (j, t) in targets.iter_mut().enumerate().take(a.end + 1).skip(a.start) {
                    let bio = if j == a.start { super::Bio::B } else { super::Bio::I };
                    *t = super::Tag::Arg(bio, a.role.prefix).index();
                }
            }
            examples.push(TokenExample {
                features: bio_features(&h, &marked, &query.query_text),
                targets,
            });
        }
    }
    if uncovered > 0 {
        info!("{uncovered} gold (predicate, role) pairs fall outside the predicted role sets");
    }
    let mut head = LinearHead::zeros(model.hash_bits, TAG_COUNT);
    let report = train_tags(&mut head, &examples, cfg)?;
    info!("bio head: {} query examples, final loss {:.4}", report.examples, report.losses.last().unwrap_or(&0.0));
    model.bio = Some(head);
    debug_assert_eq!(TAGS.len(), TAG_COUNT);
    Ok(BioTrainReport {
        report,
        uncovered,
        skipped_roles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ArgumentSpan, Sentence};
    use crate::frames::{CoreRole, InventoryBuilder, RoleLabel};
    use crate::querygen::MarkedSequence;
    use std::sync::Arc;

    const BITS: u32 = 14;

    fn marked(words: &[&str], idx: usize) -> MarkedSequence {
        let inst = PredicateInstance::new(
            Arc::new(Sentence::new("s", words.iter().map(|s| s.to_string()).collect())),
            idx,
        );
        mark_predicate(&inst)
    }

    fn base(s: &str) -> BaseRole {
        s.parse().unwrap()
    }

    #[test]
    fn untrained_heads_are_neutral() {
        let m = ReferenceModel::untrained(BITS);
        let mk = marked(&["the", "stock", "fell"], 2);
        let p = m
            .score_sense(&SenseRequest {
                marked: mk.clone(),
                option_text: "anything at all".into(),
            })
            .unwrap();
        assert_eq!(p, 0.5);

        let roles: Vec<BaseRole> = ["A0", "A1", "TMP"].iter().map(|r| base(r)).collect();
        let scores = m
            .score_role_presence(&RoleRequest {
                marked: mk.clone(),
                roles: roles.clone(),
            })
            .unwrap();
        assert_eq!(scores.len(), 3);
        assert!(scores.values().all(|p| *p == 0.5));

        let d = m
            .score_bio_one(&BioRequest {
                marked: mk,
                query_text: "What are the A1 arguments?".into(),
                role: base("A1"),
            })
            .unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.rows().iter().flatten().all(|p| *p == 1.0 / 7.0));
    }

    #[test]
    fn role_map_size_follows_universe() {
        let m = ReferenceModel::untrained(BITS);
        let mut universe: Vec<BaseRole> = CoreRole::ALL.iter().map(|c| BaseRole::Core(*c)).collect();
        for (k, _) in crate::frames::DEFAULT_MODIFIERS.iter().filter(|(k, _)| *k != "PRP") {
            universe.push(base(k));
        }
        assert_eq!(universe.len(), 20);
        let scores = m
            .score_role_presence(&RoleRequest {
                marked: marked(&["a", "b"], 0),
                roles: universe,
            })
            .unwrap();
        assert_eq!(scores.len(), 20);
    }

    #[test]
    fn missing_head_is_a_config_error() {
        let m = ReferenceModel::empty(BITS);
        let r = m.score_sense(&SenseRequest {
            marked: marked(&["a"], 0),
            option_text: "x".into(),
        });
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn sparse_serialization_round_trips() {
        let mut head = LinearHead::zeros(4, 2);
        head.weights[3] = 0.25;
        head.weights[30] = -1.5;
        let json = serde_json::to_string(&head).unwrap();
        assert_eq!(json, r#"{"bits":4,"outputs":2,"weights":[[3,0.25],[30,-1.5]]}"#);
        let back: LinearHead = serde_json::from_str(&json).unwrap();
        assert_eq!(back, head);
    }

    #[test]
    fn binary_training_overfits_one_example() {
        let h = FeatureHasher::new(BITS);
        let f = sense_features(&h, &marked(&["the", "heart", "beat"], 2), "pulsating motion");
        let mut head = LinearHead::zeros(BITS, 1);
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 0.1,
            seed: 1,
        };
        let report = train_binary(&mut head, &[(f.clone(), 1.0)], &cfg).unwrap();
        assert!(sigmoid(head.logit(&f)) > 0.9);
        assert!(report.losses.last().unwrap() < &report.losses[0]);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut head = LinearHead::zeros(BITS, 1);
        assert!(matches!(
            train_binary(&mut head, &[], &TrainConfig::default()),
            Err(Error::Config(_))
        ));
    }

    /// Two-sense lemma where the option text "gold" is always the right answer.
    fn gold_option_fixture() -> (FrameInventory, Vec<PredicateInstance>) {
        let mut b = InventoryBuilder::default();
        b.add_definition("f", "r", "go.01", "gold", &[]).unwrap();
        b.add_definition("f", "r", "go.02", "other", &[]).unwrap();
        let inv = b.build();
        let nouns = ["cat", "dog", "bird", "fish", "cow", "owl", "ant", "bee"];
        let insts = nouns
            .iter()
            .map(|n| {
                let s = Arc::new(Sentence::new(*n, vec!["the".into(), n.to_string(), "went".into()]));
                PredicateInstance {
                    lemma: Some("go".into()),
                    gold_sense: Some("go.01".into()),
                    gold_args: Some(vec![]),
                    ..PredicateInstance::new(s, 2)
                }
            })
            .collect();
        (inv, insts)
    }

    #[test]
    fn trained_sense_head_prefers_gold_option() {
        let (inv, insts) = gold_option_fixture();
        let (train, held_out) = insts.split_at(6);
        let mut m = ReferenceModel::untrained(BITS);
        train_sense(&mut m, train, &inv, &TrainConfig::default()).unwrap();
        for inst in held_out {
            let mk = mark_predicate(inst);
            let gold = m
                .score_sense(&SenseRequest {
                    marked: mk.clone(),
                    option_text: "gold".into(),
                })
                .unwrap();
            let other = m
                .score_sense(&SenseRequest {
                    marked: mk,
                    option_text: "other".into(),
                })
                .unwrap();
            assert!(gold > other, "{gold} <= {other}");
        }
    }

    #[test]
    fn one_example_sense_overfit() {
        let (inv, insts) = gold_option_fixture();
        let mut m = ReferenceModel::untrained(BITS);
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        train_sense(&mut m, &insts[..1], &inv, &cfg).unwrap();
        let p = m
            .score_sense(&SenseRequest {
                marked: mark_predicate(&insts[0]),
                option_text: "gold".into(),
            })
            .unwrap();
        assert!(p > 0.9, "{p}");
    }

    #[test]
    fn fixed_seed_training_is_reproducible() {
        let (inv, insts) = gold_option_fixture();
        let run = || {
            let mut m = ReferenceModel::untrained(BITS);
            train_sense(&mut m, &insts, &inv, &TrainConfig::default()).unwrap();
            m
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn role_head_learns_cooccurrence() {
        let tmp = base("TMP");
        let mut insts = Vec::new();
        for (i, with_days) in [true, false].iter().cycle().take(20).enumerate() {
            let mut words = vec!["prices".to_string(), "fell".to_string()];
            let mut args = vec![ArgumentSpan::new(0, 0, RoleLabel::norm(base("A1")))];
            if *with_days {
                words.extend(["for", "two", "days"].iter().map(|s| s.to_string()));
                args.push(ArgumentSpan::new(2, 4, RoleLabel::norm(tmp.clone())));
            } else {
                words.extend(["in", "the", "city"].iter().map(|s| s.to_string()));
            }
            insts.push(PredicateInstance {
                gold_args: Some(args),
                ..PredicateInstance::new(Arc::new(Sentence::new(format!("s{i}"), words)), 1)
            });
        }
        let mut m = ReferenceModel::untrained(BITS);
        let universe = vec![base("A1"), tmp.clone()];
        train_role(&mut m, &insts[..16], &universe, &TrainConfig::default()).unwrap();
        let score = |inst: &PredicateInstance| {
            m.score_role_presence(&RoleRequest {
                marked: mark_predicate(inst),
                roles: universe.clone(),
            })
            .unwrap()[&tmp]
        };
        // held-out: 16 has days, 17 does not
        assert!(score(&insts[16]) > score(&insts[17]));
    }

    #[test]
    fn bio_head_overfits_constant_span() {
        let inv = crate::frames::fixtures::beat_inventory();
        let words = ["stocks", "were", "beaten", "down"];
        let inst = PredicateInstance {
            gold_sense: Some("beat.02".into()),
            gold_args: Some(vec![ArgumentSpan::new(0, 0, RoleLabel::norm(base("A1")))]),
            ..PredicateInstance::new(
                Arc::new(Sentence::new("s", words.iter().map(|s| s.to_string()).collect())),
                2,
            )
        };
        let mut m = ReferenceModel::untrained(BITS);
        let report = train_bio(
            &mut m,
            std::slice::from_ref(&inst),
            &inv,
            &[vec![base("A1")]],
            QueryStyle::Semantic,
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(report.uncovered, 0);
        let q = build_role_query(&inv, "beaten", "beat.02", &base("A1"), QueryStyle::Semantic).unwrap();
        let d = m
            .score_bio_one(&BioRequest {
                marked: mark_predicate(&inst),
                query_text: q.query_text,
                role: base("A1"),
            })
            .unwrap();
        let row = d.rows()[0];
        let best = (0..TAG_COUNT).max_by(|a, b| row[*a].total_cmp(&row[*b])).unwrap();
        assert!(matches!(TAGS[best], super::super::Tag::Arg(super::super::Bio::B, _)));
    }

    #[test]
    fn bio_training_counts_uncovered_gold_roles() {
        let inv = crate::frames::fixtures::beat_inventory();
        let inst = PredicateInstance {
            gold_sense: Some("beat.02".into()),
            gold_args: Some(vec![
                ArgumentSpan::new(0, 0, RoleLabel::norm(base("A1"))),
                ArgumentSpan::new(3, 3, RoleLabel::norm(base("A2"))),
            ]),
            ..PredicateInstance::new(
                Arc::new(Sentence::new("s", ["stocks", "were", "beaten", "down"].iter().map(|s| s.to_string()).collect())),
                2,
            )
        };
        let mut m = ReferenceModel::untrained(BITS);
        let report = train_bio(
            &mut m,
            &[inst],
            &inv,
            &[vec![base("A1"), base("A3")]],
            QueryStyle::Semantic,
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(report.uncovered, 1);
        assert_eq!(report.skipped_roles, 1);
    }
}
