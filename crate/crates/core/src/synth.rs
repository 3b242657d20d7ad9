//! Seeded generator for a small synthetic SRL corpus: two ambiguous lemmas
//! (`run`, `beat`) with two senses each, roles A0 A1 A2 TMP LOC MNR.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_corpus, ArgumentSpan, PredicateInstance, Sentence};
use crate::error::Result;
use crate::frames::{CoreRole, FrameInventory, InventoryBuilder, RoleLabel};

pub const DEFAULT_SEED: u64 = 2021;
pub const DEFAULT_SENTENCES: usize = 500;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub sentences: usize,
    /// Fractions of sentences for train and dev; the rest is test.
    pub train: f64,
    pub dev: f64,
    /// Chance that a predicate is written without its lemma.
    pub missing_lemma: f64,
    /// Chance of a two-clause sentence.
    pub coordination: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: DEFAULT_SEED,
            sentences: DEFAULT_SENTENCES,
            train: 0.7,
            dev: 0.1,
            missing_lemma: 0.15,
            coordination: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub inventory: FrameInventory,
    pub train: Vec<PredicateInstance>,
    pub dev: Vec<PredicateInstance>,
    pub test: Vec<PredicateInstance>,
}

/// Frame inventory of the synthetic grammar.
pub fn inventory() -> FrameInventory {
    use CoreRole::*;
    let mut b = InventoryBuilder::default();
    let defs: [(&str, &str, &[(CoreRole, &str)]); 4] = [
        ("run.01", "operate, manage", &[(A0, "operator"), (A1, "thing operated")]),
        ("run.02", "move quickly on foot", &[(A0, "runner"), (A1, "course, race")]),
        ("beat.01", "pulsate, throb", &[(A1, "thing pulsating")]),
        (
            "beat.02",
            "push, cause motion",
            &[(A0, "causer of motion"), (A1, "thing moving"), (A2, "direction, destination")],
        ),
    ];
    for (id, desc, roles) in defs {
        let roles: Vec<(CoreRole, String)> = roles.iter().map(|(r, d)| (*r, d.to_string())).collect();
        b.add_definition("synthetic", id, id, desc, &roles)
            .expect("static definitions are valid");
    }
    b.build()
}

const TMP: &[&str] = &[
    "for two days",
    "on monday",
    "last week",
    "yesterday",
    "every morning",
    "for three hours",
    "in march",
];
const TMP_FRONT: &[&str] = &["yesterday", "last week", "on monday", "in march"];
const LOC: &[&str] = &["in the city", "near the river", "in the park", "at the port", "along the coast"];

const RUN1_A0: &[&str] = &[
    "the manager",
    "the new director",
    "maria",
    "the family",
    "a local firm",
    "the owner",
    "her brother",
];
const RUN1_A1: &[&str] = &["the factory", "the company", "a small bakery", "the hotel", "the shop", "the program"];
const RUN2_A0: &[&str] = &["the athlete", "my dog", "tom", "the children", "a young runner", "the team"];
const RUN2_A1: &[&str] = &["the marathon", "a mile", "the race", "ten kilometres", "the course"];
const RUN_MNR: &[&str] = &["quickly", "slowly", "fast", "hard"];
const RUN_FORMS: &[&[&str]] = &[&["ran"], &["runs"], &["is", "running"], &["has", "run"]];

const BEAT1_A1: &[&str] = &["her heart", "his heart", "the drum", "my pulse", "the big drum"];
const BEAT1_MNR: &[&str] = &["loudly", "fast", "steadily", "wildly"];
const BEAT1_FORMS: &[&[&str]] = &[&["beat"], &["beats"], &["was", "beating"]];
const BEAT2_A0: &[&str] = &["the storm", "the police", "the wind", "the guards", "strong waves"];
const BEAT2_A1: &[&str] = &["the crowd", "the boats", "the protesters", "the flames"];
const BEAT2_A2: &[&str] = &["back", "down", "away"];
const BEAT2_FORMS: &[&[&str]] = &[&["beat"], &["beats"], &["have", "beaten"]];
const PASSIVE_A1: &[&str] = &["the stock", "prices", "the shares", "the index"];
const PASSIVE_AUX: &[&[&str]] = &[&["has", "been"], &["have", "been"], &["was"], &["were"]];
const PASSIVE_A0: &[&str] = &["by the news", "by investors"];

/// One predicate with its arguments, positions relative to the clause.
struct Clause {
    tokens: Vec<String>,
    pred: usize,
    lemma: &'static str,
    sense: &'static str,
    args: Vec<(usize, usize, &'static str)>,
}

impl Clause {
    fn new(lemma: &'static str, sense: &'static str) -> Self {
        Clause {
            tokens: Vec::new(),
            pred: 0,
            lemma,
            sense,
            args: Vec::new(),
        }
    }

    fn words(&mut self, phrase: &str) {
        self.tokens.extend(phrase.split(' ').map(str::to_string));
    }

    fn arg(&mut self, phrase: &str, role: &'static str) {
        let start = self.tokens.len();
        self.words(phrase);
        self.args.push((start, self.tokens.len() - 1, role));
    }

    fn verb(&mut self, form: &[&str]) {
        for (i, w) in form.iter().enumerate() {
            if i + 1 == form.len() {
                self.pred = self.tokens.len();
            }
            self.tokens.push(w.to_string());
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

fn pick_form<'a, R: Rng>(rng: &mut R, xs: &[&'a [&'a str]]) -> &'a [&'a str] {
    xs.choose(rng).expect("non-empty form list")
}

/// Optional trailing modifiers in random order.
fn modifiers<R: Rng>(rng: &mut R, c: &mut Clause, options: &[(&'static str, &[&str], f64)]) {
    let mut chosen: Vec<(&'static str, &str)> = Vec::new();
    for (role, words, p) in options {
        if rng.gen_bool(*p) {
            chosen.push((role, pick(rng, words)));
        }
    }
    chosen.shuffle(rng);
    for (role, phrase) in chosen {
        c.arg(phrase, role);
    }
}

fn clause<R: Rng>(rng: &mut R) -> Clause {
    let front_tmp = rng.gen_bool(0.12);
    let kind = rng.gen_range(0..5);
    let mut c = match kind {
        0 => Clause::new("run", "run.01"),
        1 => Clause::new("run", "run.02"),
        2 => Clause::new("beat", "beat.01"),
        _ => Clause::new("beat", "beat.02"),
    };
    if front_tmp {
        c.arg(pick(rng, TMP_FRONT), "TMP");
        c.words(",");
    }
    let tmp_rate = if front_tmp { 0.0 } else { 0.35 };
    match kind {
        0 => {
            c.arg(pick(rng, RUN1_A0), "A0");
            c.verb(pick_form(rng, RUN_FORMS));
            c.arg(pick(rng, RUN1_A1), "A1");
            modifiers(rng, &mut c, &[("TMP", TMP, tmp_rate), ("LOC", LOC, 0.3)]);
        }
        1 => {
            c.arg(pick(rng, RUN2_A0), "A0");
            c.verb(pick_form(rng, RUN_FORMS));
            if rng.gen_bool(0.6) {
                c.arg(pick(rng, RUN2_A1), "A1");
            }
            modifiers(
                rng,
                &mut c,
                &[("MNR", RUN_MNR, 0.45), ("LOC", LOC, 0.35), ("TMP", TMP, tmp_rate)],
            );
        }
        2 => {
            c.arg(pick(rng, BEAT1_A1), "A1");
            c.verb(pick_form(rng, BEAT1_FORMS));
            modifiers(rng, &mut c, &[("MNR", BEAT1_MNR, 0.7), ("TMP", TMP, tmp_rate)]);
        }
        3 => {
            c.arg(pick(rng, BEAT2_A0), "A0");
            c.verb(pick_form(rng, BEAT2_FORMS));
            c.arg(pick(rng, BEAT2_A1), "A1");
            c.arg(pick(rng, BEAT2_A2), "A2");
            modifiers(rng, &mut c, &[("LOC", LOC, 0.3), ("TMP", TMP, tmp_rate)]);
        }
        _ => {
            c.arg(pick(rng, PASSIVE_A1), "A1");
            let aux = pick_form(rng, PASSIVE_AUX);
            for w in aux {
                c.words(w);
            }
            c.verb(&["beaten"]);
            c.arg(pick(rng, &BEAT2_A2[..2]), "A2");
            let front = if front_tmp { 0.0 } else { 0.6 };
            modifiers(rng, &mut c, &[("TMP", TMP, front), ("A0", PASSIVE_A0, 0.25)]);
        }
    }
    c
}

fn capitalize(w: &str) -> String {
    let mut chars = w.chars();
    match chars.next() {
        Some(f) => f.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn sentence<R: Rng>(rng: &mut R, id: String, cfg: &SynthConfig) -> Vec<PredicateInstance> {
    let mut clauses = vec![clause(rng)];
    if rng.gen_bool(cfg.coordination) {
        clauses.push(clause(rng));
    }
    let mut tokens: Vec<String> = Vec::new();
    let mut placed = Vec::new();
    for (i, c) in clauses.iter().enumerate() {
        if i > 0 {
            tokens.push("and".into());
        }
        placed.push(tokens.len());
        tokens.extend(c.tokens.iter().cloned());
    }
    tokens.push(".".into());
    tokens[0] = capitalize(&tokens[0]);
    let sentence = Arc::new(Sentence::new(id, tokens));
    clauses
        .into_iter()
        .zip(placed)
        .map(|(c, off)| {
            let args = c
                .args
                .iter()
                .map(|(s, e, r)| ArgumentSpan::new(s + off, e + off, r.parse::<RoleLabel>().expect("static role")))
                .collect();
            let lemma = (!rng.gen_bool(cfg.missing_lemma)).then(|| c.lemma.to_string());
            PredicateInstance {
                sentence: Arc::clone(&sentence),
                pred_index: c.pred + off,
                lemma,
                gold_sense: Some(c.sense.to_string()),
                gold_args: Some(args),
            }
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_train = (cfg.sentences as f64 * cfg.train).round() as usize;
    let n_dev = (cfg.sentences as f64 * cfg.dev).round() as usize;
    let mut corpus = SyntheticCorpus {
        inventory: inventory(),
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for n in 0..cfg.sentences {
        let insts = sentence(&mut rng, format!("syn-{n:04}"), cfg);
        let split = if n < n_train {
            &mut corpus.train
        } else if n < n_train + n_dev {
            &mut corpus.dev
        } else {
            &mut corpus.test
        };
        split.extend(insts);
    }
    corpus
}

/// Writes `frames.jsonl`, `train.jsonl`, `dev.jsonl` and `test.jsonl` into `dir`.
pub fn write(corpus: &SyntheticCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    corpus.inventory.save_jsonl(&dir.join("frames.jsonl"))?;
    write_corpus(&corpus.train, &dir.join("train.jsonl"))?;
    write_corpus(&corpus.dev, &dir.join("dev.jsonl"))?;
    write_corpus(&corpus.test, &dir.join("test.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{find_overlap, resolve_lemma};
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate(&SynthConfig::default());
        let b = generate(&SynthConfig::default());
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = generate(&SynthConfig {
            seed: 7,
            ..SynthConfig::default()
        });
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn shape_of_the_default_corpus() {
        let c = generate(&SynthConfig::default());
        let sentences = |v: &[PredicateInstance]| v.iter().map(|i| i.sentence.id.clone()).collect::<BTreeSet<_>>().len();
        assert_eq!(sentences(&c.train), 350);
        assert_eq!(sentences(&c.dev), 50);
        assert_eq!(sentences(&c.test), 100);
        let all: Vec<&PredicateInstance> = c.train.iter().chain(&c.dev).chain(&c.test).collect();
        let senses: BTreeSet<_> = all.iter().filter_map(|i| i.gold_sense.clone()).collect();
        assert_eq!(senses.len(), 4);
        let roles: BTreeSet<String> = all
            .iter()
            .flat_map(|i| i.gold_args.as_ref().unwrap())
            .map(|a| a.role.to_string())
            .collect();
        assert_eq!(roles.into_iter().collect::<Vec<_>>(), ["A0", "A1", "A2", "LOC", "MNR", "TMP"]);
        assert!(all.iter().any(|i| i.lemma.is_none()));
        assert!(all.len() > 500, "some sentences have two predicates");
    }

    #[test]
    fn instances_are_well_formed() {
        let c = generate(&SynthConfig::default());
        for inst in c.train.iter().chain(&c.test) {
            let args = inst.gold_args.as_ref().unwrap();
            assert!(find_overlap(args).is_none());
            assert!(args.iter().all(|a| a.end < inst.sentence.len()));
            assert!(args.iter().all(|a| a.start > inst.pred_index || a.end < inst.pred_index));
            // every predicate form resolves to its lemma
            let lemma = resolve_lemma(&c.inventory, inst.predicate_word(), inst.lemma.as_deref()).unwrap();
            assert_eq!(Some(lemma.as_str()), inst.gold_sense.as_deref().map(|s| &s[..s.len() - 3]));
            // core roles are defined for the gold sense
            for a in args {
                c.inventory
                    .base_role_description(inst.gold_sense.as_deref().unwrap(), &a.role.base)
                    .unwrap();
            }
        }
    }
}
