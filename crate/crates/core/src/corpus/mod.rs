//! Sentences, predicate instances and gold/predicted argument spans.
//!
//! The normalized corpus format is JSON Lines, one record per sentence:
//!
//! ```json
//! {"id": "s1", "tokens": ["The", "stock", ...],
//!  "predicates": [{"index": 4, "lemma": "beat", "sense": "beat.02",
//!                  "args": [{"start": 0, "end": 1, "role": "A1"}]}]}
//! ```
//!
//! Spans are 0-based and inclusive. Prediction files use the same layout.

mod conll;
mod lemma;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::RoleLabel;

pub use lemma::{levenshtein, resolve_lemma};

pub const PREDICATE_OPEN: &str = "<p>";
pub const PREDICATE_CLOSE: &str = "</p>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Sentence {
            id: id.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err(format!("sentence {} has no tokens", self.id));
        }
        if let Some(t) = self
            .tokens
            .iter()
            .find(|t| *t == PREDICATE_OPEN || *t == PREDICATE_CLOSE)
        {
            return Err(format!("sentence {} contains marker token {t}", self.id));
        }
        Ok(())
    }
}

/// A labeled argument: inclusive token span `[start, end]` plus role.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArgumentSpan {
    pub start: usize,
    pub end: usize,
    pub role: RoleLabel,
}

impl ArgumentSpan {
    pub fn new(start: usize, end: usize, role: RoleLabel) -> Self {
        ArgumentSpan { start, end, role }
    }

    pub fn overlaps(&self, other: &ArgumentSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for ArgumentSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.role)
    }
}

/// Returns the first pair of overlapping spans, if any.
pub fn find_overlap(spans: &[ArgumentSpan]) -> Option<(&ArgumentSpan, &ArgumentSpan)> {
    let mut sorted: Vec<&ArgumentSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    sorted
        .windows(2)
        .find(|w| w[0].overlaps(w[1]))
        .map(|w| (w[0], w[1]))
}

/// One sentence with one marked predicate; the unit of pipeline work.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateInstance {
    pub sentence: Arc<Sentence>,
    pub pred_index: usize,
    pub lemma: Option<String>,
    pub gold_sense: Option<String>,
    pub gold_args: Option<Vec<ArgumentSpan>>,
}

impl PredicateInstance {
    pub fn new(sentence: Arc<Sentence>, pred_index: usize) -> Self {
        PredicateInstance {
            sentence,
            pred_index,
            lemma: None,
            gold_sense: None,
            gold_args: None,
        }
    }

    pub fn predicate_word(&self) -> &str {
        &self.sentence.tokens[self.pred_index]
    }

    /// `sentence-id#index`, unique within a corpus.
    pub fn key(&self) -> String {
        format!("{}#{}", self.sentence.id, self.pred_index)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let n = self.sentence.len();
        if self.pred_index >= n {
            return Err(format!("predicate index {} out of range for {n} tokens", self.pred_index));
        }
        if let Some(args) = &self.gold_args {
            for a in args {
                if a.start > a.end || a.end >= n {
                    return Err(format!("argument {a} out of range for {n} tokens"));
                }
            }
            if let Some((x, y)) = find_overlap(args) {
                return Err(format!("overlapping arguments {x} and {y}"));
            }
        }
        Ok(())
    }
}

/// Output of the pipeline for one instance.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Prediction {
    pub sense: Option<String>,
    pub args: Vec<ArgumentSpan>,
}

impl Prediction {
    /// Reads a prediction back out of an instance loaded from a prediction file.
    pub fn from_instance(inst: &PredicateInstance) -> Self {
        Prediction {
            sense: inst.gold_sense.clone(),
            args: inst.gold_args.clone().unwrap_or_default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusFormat {
    Normalized,
    ConllSpan,
    ConllDep,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(CorpusFormat::Normalized),
            "conll-span" => Ok(CorpusFormat::ConllSpan),
            "conll-dep" => Ok(CorpusFormat::ConllDep),
            other => Err(Error::Config(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    predicates: Vec<PredicateRecord>,
}

#[derive(Serialize, Deserialize)]
struct PredicateRecord {
    index: usize,
    #[serde(default)]
    lemma: Option<String>,
    #[serde(default)]
    sense: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    args: Option<Vec<ArgumentSpan>>,
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<PredicateInstance>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let reader = BufReader::new(file);
    match format {
        CorpusFormat::Normalized => read_normalized(&name, reader),
        CorpusFormat::ConllSpan => conll::read_span(&name, reader),
        CorpusFormat::ConllDep => conll::read_dep(&name, reader),
    }
}

pub fn read_normalized<R: BufRead>(name: &str, reader: R) -> Result<Vec<PredicateInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(name, lineno, e.to_string()))?;
        let sentence = Arc::new(Sentence::new(record.id, record.tokens));
        sentence.validate().map_err(|m| Error::parse(name, lineno, m))?;
        for p in record.predicates {
            let inst = PredicateInstance {
                sentence: Arc::clone(&sentence),
                pred_index: p.index,
                lemma: p.lemma,
                gold_sense: p.sense,
                gold_args: p.args,
            };
            inst.validate().map_err(|m| Error::parse(name, lineno, m))?;
            out.push(inst);
        }
    }
    Ok(out)
}

pub(crate) fn validate_instance(name: &str, line: usize, inst: &PredicateInstance) -> Result<()> {
    inst.sentence
        .validate()
        .and_then(|_| inst.validate())
        .map_err(|m| Error::parse(name, line, m))
}

/// Writes instances in normalized form, taking sense and arguments from `fill`.
fn write_records<W, F>(out: &mut W, instances: &[PredicateInstance], mut fill: F) -> Result<()>
where
    W: Write,
    F: FnMut(usize) -> (Option<String>, Option<Vec<ArgumentSpan>>),
{
    let mut i = 0;
    while i < instances.len() {
        let sentence = &instances[i].sentence;
        let mut predicates = Vec::new();
        while i < instances.len() && same_sentence(&instances[i].sentence, sentence) {
            let (sense, args) = fill(i);
            predicates.push(PredicateRecord {
                index: instances[i].pred_index,
                lemma: instances[i].lemma.clone(),
                sense,
                args,
            });
            i += 1;
        }
        let record = SentenceRecord {
            id: sentence.id.clone(),
            tokens: sentence.tokens.clone(),
            predicates,
        };
        serde_json::to_writer(&mut *out, &record).map_err(|e| Error::Contract(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

fn same_sentence(a: &Arc<Sentence>, b: &Arc<Sentence>) -> bool {
    Arc::ptr_eq(a, b) || a.id == b.id
}

pub fn write_corpus_to<W: Write>(out: &mut W, instances: &[PredicateInstance]) -> Result<()> {
    write_records(out, instances, |i| {
        (instances[i].gold_sense.clone(), instances[i].gold_args.clone())
    })
}

pub fn write_corpus(instances: &[PredicateInstance], path: &Path) -> Result<()> {
    with_file(path, |out| write_corpus_to(out, instances))
}

pub fn write_predictions_to<W: Write>(
    out: &mut W,
    instances: &[PredicateInstance],
    predictions: &[Prediction],
) -> Result<()> {
    if instances.len() != predictions.len() {
        return Err(Error::Contract(format!(
            "{} instances but {} predictions",
            instances.len(),
            predictions.len()
        )));
    }
    write_records(out, instances, |i| {
        (predictions[i].sense.clone(), Some(predictions[i].args.clone()))
    })
}

pub fn write_predictions(instances: &[PredicateInstance], predictions: &[Prediction], path: &Path) -> Result<()> {
    with_file(path, |out| write_predictions_to(out, instances, predictions))
}

pub(crate) fn with_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
{
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a prediction file back into per-instance predictions.
pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    Ok(read_corpus(path, CorpusFormat::Normalized)?
        .iter()
        .map(Prediction::from_instance)
        .collect())
}

/// The running example sentence.
pub mod fixtures {
    use super::*;

    pub fn role(s: &str) -> RoleLabel {
        s.parse().unwrap()
    }

    pub const FIGURE1_JSON: &str = r#"{"id":"fig1","tokens":["The","stock","has","been","beaten","down","for","two","days","."],"predicates":[{"index":4,"lemma":"beat","sense":"beat.02","args":[{"start":0,"end":1,"role":"A1"},{"start":5,"end":5,"role":"A2"},{"start":6,"end":8,"role":"TMP"}]}]}"#;

    pub fn figure1() -> PredicateInstance {
        read_normalized("fig1", FIGURE1_JSON.as_bytes())
            .unwrap()
            .remove(0)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn figure1_sentence() {
        let inst = figure1();
        assert_eq!(inst.predicate_word(), "beaten");
        assert_eq!(inst.pred_index, 4);
        let args = inst.gold_args.as_ref().unwrap();
        assert_eq!(
            args,
            &vec![
                ArgumentSpan::new(0, 1, role("A1")),
                ArgumentSpan::new(5, 5, role("A2")),
                ArgumentSpan::new(6, 8, role("TMP")),
            ]
        );
    }

    #[test]
    fn empty_input_gives_no_instances() {
        assert!(read_normalized("empty", "".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn two_predicates_share_a_sentence() {
        let line = r#"{"id":"s","tokens":["he","ran","and","fell"],"predicates":[{"index":1,"lemma":null,"sense":null,"args":[]},{"index":3,"lemma":"fall","sense":null}]}"#;
        let insts = read_normalized("f", line.as_bytes()).unwrap();
        assert_eq!(insts.len(), 2);
        assert!(Arc::ptr_eq(&insts[0].sentence, &insts[1].sentence));
        assert_eq!(insts[0].gold_args, Some(vec![]));
        assert_eq!(insts[1].gold_args, None);
    }

    #[test]
    fn rejects_bad_records_with_line_numbers() {
        let cases = [
            r#"{"id":"s","tokens":["a","b"],"predicates":[{"index":2}]}"#,
            r#"{"id":"s","tokens":["a","b"],"predicates":[{"index":0,"args":[{"start":0,"end":1,"role":"A0"},{"start":1,"end":1,"role":"A1"}]}]}"#,
            r#"{"id":"s","tokens":["a","b"],"predicates":[{"index":0,"args":[{"start":1,"end":2,"role":"A0"}]}]}"#,
            r#"{"id":"s","tokens":[],"predicates":[]}"#,
            r#"{"id":"s","tokens":["<p>"],"predicates":[]}"#,
            r#"{"id":"s","tokens":["a"],"predicates":[{"index":0,"args":[{"start":0,"end":0,"role":"a0"}]}]}"#,
        ];
        for case in cases {
            let text = format!("\n{case}\n");
            match read_normalized("f", text.as_bytes()) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 2, "{case}"),
                other => panic!("expected parse error for {case}, got {other:?}"),
            }
        }
    }

    #[test]
    fn zero_argument_prediction_is_empty_list() {
        let inst = figure1();
        let mut buf = Vec::new();
        write_predictions_to(&mut buf, &[inst], &[Prediction { sense: None, args: vec![] }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(r#""args":[]"#), "{text}");
        assert!(text.contains(r#""sense":null"#), "{text}");
    }

    #[test]
    fn figure1_gold_round_trips() {
        let inst = figure1();
        let mut buf = Vec::new();
        write_corpus_to(&mut buf, std::slice::from_ref(&inst)).unwrap();
        let back = read_normalized("mem", buf.as_slice()).unwrap();
        assert_eq!(back[0].gold_args, inst.gold_args);
        assert_eq!(back[0].gold_sense, inst.gold_sense);
    }

    #[test]
    fn prediction_count_must_match() {
        let inst = figure1();
        let mut buf = Vec::new();
        assert!(write_predictions_to(&mut buf, &[inst], &[]).is_err());
    }

    fn arb_prediction(n: usize) -> impl Strategy<Value = Prediction> {
        let roles = prop::sample::select(vec!["A0", "A1", "R-A1", "C-A2", "TMP", "C-LOC"]);
        let spans = prop::collection::vec((0..n, 0..3usize, roles), 0..4).prop_map(move |raw| {
            // Keep only a non-overlapping subset.
            let mut args: Vec<ArgumentSpan> = Vec::new();
            for (start, width, role) in raw {
                let span = ArgumentSpan::new(start, (start + width).min(n - 1), role.parse().unwrap());
                if args.iter().all(|a| !a.overlaps(&span)) {
                    args.push(span);
                }
            }
            args
        });
        let sense = prop::option::of(prop::sample::select(vec!["beat.01", "beat.02", "run.01"]));
        (sense, spans).prop_map(|(sense, args)| Prediction {
            sense: sense.map(str::to_string),
            args,
        })
    }

    proptest! {
        #[test]
        fn predictions_round_trip(preds in prop::collection::vec(arb_prediction(6), 1..5)) {
            let sentence = Arc::new(Sentence::new("s", (0..6).map(|i| format!("w{i}")).collect()));
            let instances: Vec<PredicateInstance> = (0..preds.len())
                .map(|i| PredicateInstance::new(Arc::clone(&sentence), i))
                .collect();
            let mut buf = Vec::new();
            write_predictions_to(&mut buf, &instances, &preds).unwrap();
            let back: Vec<Prediction> = read_normalized("mem", buf.as_slice())
                .unwrap()
                .iter()
                .map(Prediction::from_instance)
                .collect();
            prop_assert_eq!(back, preds);
        }
    }
}
