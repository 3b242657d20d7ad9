//! Hashed sparse features for the reference scorer.

use std::collections::BTreeSet;
use std::hash::Hasher;

use fnv::FnvHasher;

use crate::querygen::MarkedSequence;

/// `(bucket, value)` pairs.
pub(crate) type Features = Vec<(u32, f32)>;

pub(crate) struct FeatureHasher {
    mask: u64,
}

impl FeatureHasher {
    pub fn new(bits: u32) -> Self {
        FeatureHasher {
            mask: (1u64 << bits) - 1,
        }
    }

    pub fn bucket(&self, parts: &[&str]) -> u32 {
        let mut h = FnvHasher::default();
        for p in parts {
            h.write(p.as_bytes());
            h.write_u8(0xff);
        }
        (h.finish() & self.mask) as u32
    }
}

/// Lowercased alphanumeric words of free text (queries, option texts).
pub(crate) fn text_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn distinct(words: Vec<String>) -> Vec<String> {
    words.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

/// The unmarked sentence, lowercased, with the predicate position.
struct Context {
    words: Vec<String>,
    pred: usize,
}

impl Context {
    fn new(marked: &MarkedSequence) -> Self {
        Context {
            words: marked.unmarked().iter().map(|w| w.to_lowercase()).collect(),
            pred: marked.sentence_pred_index(),
        }
    }

    fn word(&self, i: isize) -> &str {
        if i < 0 {
            "<s>"
        } else {
            self.words.get(i as usize).map(String::as_str).unwrap_or("</s>")
        }
    }

    fn predicate(&self) -> &str {
        &self.words[self.pred]
    }
}

fn offset_bucket(d: isize) -> String {
    match d {
        d if d < -5 => "far-left".to_string(),
        d if d > 5 => "far-right".to_string(),
        d => d.to_string(),
    }
}

/// Features for one (option text, marked sentence) pair.
pub(crate) fn sense_features(h: &FeatureHasher, marked: &MarkedSequence, option: &str) -> Features {
    let ctx = Context::new(marked);
    let option_words = distinct(text_words(option));
    let sentence_words: BTreeSet<&str> = ctx.words.iter().map(String::as_str).collect();
    let pred = ctx.predicate();

    let mut f = vec![(h.bucket(&["s.bias"]), 1.0)];
    let overlap = option_words
        .iter()
        .filter(|w| sentence_words.contains(w.as_str()))
        .count();
    f.push((h.bucket(&["s.overlap"]), overlap as f32));
    for ow in &option_words {
        f.push((h.bucket(&["s.o", ow]), 1.0));
        f.push((h.bucket(&["s.op", ow, pred]), 1.0));
        for xw in &sentence_words {
            f.push((h.bucket(&["s.ox", ow, xw]), 1.0));
        }
    }
    f
}

/// Features for the presence of `role` given the marked sentence.
pub(crate) fn role_features(h: &FeatureHasher, marked: &MarkedSequence, role: &str) -> Features {
    let ctx = Context::new(marked);
    let p = ctx.pred as isize;
    let mut f = vec![
        (h.bucket(&["r.bias", role]), 1.0),
        (h.bucket(&["r.pred", role, ctx.predicate()]), 1.0),
    ];
    for w in ctx.words.iter().collect::<BTreeSet<_>>() {
        f.push((h.bucket(&["r.w", role, w]), 1.0));
    }
    for d in [-2isize, -1, 1, 2] {
        let off = d.to_string();
        f.push((h.bucket(&["r.near", role, &off, ctx.word(p + d)]), 1.0));
    }
    f
}

/// Per-token features for a BIO query. Every token feature appears alone and
/// conjoined with each distinct query word.
pub(crate) fn bio_features(h: &FeatureHasher, marked: &MarkedSequence, query: &str) -> Vec<Features> {
    let ctx = Context::new(marked);
    let query_words = distinct(text_words(query));
    let p = ctx.pred as isize;
    let voice = ctx.word(p - 1).to_string();

    (0..ctx.words.len() as isize)
        .map(|j| {
            let d = j - p;
            let bucket = offset_bucket(d);
            let side = match d.signum() {
                -1 => "L",
                0 => "P",
                _ => "R",
            };
            let w = ctx.word(j);
            let in_query = if query_words.iter().any(|q| q == w) { "1" } else { "0" };
            let token: [Vec<&str>; 10] = [
                vec!["bias"],
                vec!["w", w],
                vec!["w-1", ctx.word(j - 1)],
                vec!["w+1", ctx.word(j + 1)],
                vec!["w+2", ctx.word(j + 2)],
                vec!["d", &bucket],
                vec!["dw", &bucket, w],
                vec!["dw-1", &bucket, ctx.word(j - 1)],
                vec!["inq", in_query],
                vec!["voice", &voice, side],
            ];
            let mut f = Vec::with_capacity(token.len() * (query_words.len() + 1));
            for parts in &token {
                f.push((h.bucket(parts), 1.0));
                for q in &query_words {
                    let mut conj: Vec<&str> = Vec::with_capacity(parts.len() + 2);
                    conj.push("q");
                    conj.push(q);
                    conj.extend(parts.iter());
                    f.push((h.bucket(&conj), 1.0));
                }
            }
            f
        })
        .collect()
}
