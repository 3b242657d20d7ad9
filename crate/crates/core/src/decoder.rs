//! Constrained decoding: per-role BIO distributions are merged into one tag
//! set per predicate, so every token gets exactly one tag and arguments
//! cannot overlap.
//!
//! A role tag keeps the probability it had under its own query. O becomes
//! the product of the per-role O probabilities. Each token then takes its
//! best tag. Ties go to the earlier tag in this order: roles in R_p order,
//! within a role B-N, B-R, B-C, I-N, I-R, I-C, and O last.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{find_overlap, ArgumentSpan};
use crate::error::{Error, Result};
use crate::frames::{BaseRole, Prefix, RoleLabel};
use crate::scoring::{Bio, Tag, TagDistribution, O_INDEX, TAGS};

/// A tag of the merged set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GlobalTag {
    O,
    Arg { role: BaseRole, bio: Bio, prefix: Prefix },
}

impl GlobalTag {
    pub fn arg(role: BaseRole, bio: Bio, prefix: Prefix) -> Self {
        GlobalTag::Arg { role, bio, prefix }
    }
}

impl fmt::Display for GlobalTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlobalTag::O => f.write_str("O"),
            GlobalTag::Arg { role, bio, prefix } => write!(f, "{role}-{bio:?}-{prefix:?}"),
        }
    }
}

impl FromStr for GlobalTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(GlobalTag::O);
        }
        let bad = || Error::InvalidRole(format!("bad tag {s:?}"));
        let mut parts = s.rsplitn(3, '-');
        let (prefix, bio, role) = (parts.next(), parts.next(), parts.next());
        let prefix = match prefix {
            Some("N") => Prefix::N,
            Some("R") => Prefix::R,
            Some("C") => Prefix::C,
            _ => return Err(bad()),
        };
        let bio = match bio {
            Some("B") => Bio::B,
            Some("I") => Bio::I,
            _ => return Err(bad()),
        };
        Ok(GlobalTag::Arg {
            role: role.ok_or_else(bad)?.parse()?,
            bio,
            prefix,
        })
    }
}

impl TryFrom<String> for GlobalTag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GlobalTag> for String {
    fn from(t: GlobalTag) -> Self {
        t.to_string()
    }
}

/// Local tag indices (into [`TAGS`]) of the six role tags in tie-break order.
pub const ROLE_TAG_PRIORITY: [usize; 6] = [0, 2, 4, 1, 3, 5];

/// `m · 2^e` with `m` in [0.5, 1), or zero. Products never underflow and round
/// exactly like an f64 product with unbounded exponent range.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Scaled {
    m: f64,
    e: i32,
}

impl Scaled {
    const ONE: Scaled = Scaled { m: 0.5, e: 1 };
    const ZERO: Scaled = Scaled { m: 0.0, e: 0 };

    fn split(x: f64) -> Scaled {
        debug_assert!(x.is_finite() && x >= 0.0);
        if x == 0.0 {
            return Scaled::ZERO;
        }
        let (x, bias) = if x < f64::MIN_POSITIVE {
            (x * 2f64.powi(64), -64)
        } else {
            (x, 0)
        };
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i32 - 1022;
        let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
        Scaled { m, e: exp + bias }
    }

    fn mul(self, x: f64) -> Scaled {
        let o = Scaled::split(x);
        if self.m == 0.0 || o.m == 0.0 {
            return Scaled::ZERO;
        }
        let p = Scaled::split(self.m * o.m);
        Scaled {
            m: p.m,
            e: self.e + o.e + p.e,
        }
    }

    fn cmp(self, other: Scaled) -> Ordering {
        match (self.m == 0.0, other.m == 0.0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => self.e.cmp(&other.e).then(self.m.total_cmp(&other.m)),
        }
    }

    fn to_f64(self) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        // two steps keep intermediate powers in range
        let half = self.e / 2;
        self.m * 2f64.powi(half) * 2f64.powi(self.e - half)
    }
}

/// Scores of every merged tag at every token.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedLattice {
    roles: Vec<BaseRole>,
    len: usize,
    /// `[token][role][local tag]`, local tags in [`TAGS`] order without O.
    role_scores: Vec<f64>,
    o: Vec<Scaled>,
}

/// Merges per-role distributions; `dists` order defines R_p order.
pub fn merge_lattice(dists: &[(BaseRole, TagDistribution)]) -> Result<MergedLattice> {
    let Some((_, first)) = dists.first() else {
        return Err(Error::Contract("cannot merge an empty role set".to_string()));
    };
    let len = first.len();
    for (i, (role, d)) in dists.iter().enumerate() {
        if d.len() != len {
            return Err(Error::Contract(format!(
                "distribution for {role} has {} rows, expected {len}",
                d.len()
            )));
        }
        if dists[..i].iter().any(|(r, _)| r == role) {
            return Err(Error::Contract(format!("role {role} appears twice")));
        }
    }
    let r = dists.len();
    let mut role_scores = Vec::with_capacity(len * r * 6);
    let mut o = Vec::with_capacity(len);
    for j in 0..len {
        let mut product = Scaled::ONE;
        for (_, d) in dists {
            let row = &d.rows()[j];
            role_scores.extend_from_slice(&row[..O_INDEX]);
            product = product.mul(row[O_INDEX]);
        }
        o.push(product);
    }
    Ok(MergedLattice {
        roles: dists.iter().map(|(r, _)| r.clone()).collect(),
        len,
        role_scores,
        o,
    })
}

impl MergedLattice {
    pub fn roles(&self) -> &[BaseRole] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of merged tags, 6·|R_p| + 1.
    pub fn tag_count(&self) -> usize {
        6 * self.roles.len() + 1
    }

    fn role_row(&self, token: usize, role: usize) -> &[f64] {
        let start = (token * self.roles.len() + role) * 6;
        &self.role_scores[start..start + 6]
    }

    /// Merged O score; may underflow to 0 for very large role sets even
    /// though decoding compares it exactly.
    pub fn o_score(&self, token: usize) -> f64 {
        self.o[token].to_f64()
    }

    pub fn o_column(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.o_score(j)).collect()
    }

    pub fn score(&self, token: usize, tag: &GlobalTag) -> Option<f64> {
        match tag {
            GlobalTag::O => Some(self.o_score(token)),
            GlobalTag::Arg { role, bio, prefix } => {
                let r = self.roles.iter().position(|x| x == role)?;
                Some(self.role_row(token, r)[Tag::Arg(*bio, *prefix).index()])
            }
        }
    }

    /// Every merged tag in tie-break order.
    pub fn tags(&self) -> Vec<GlobalTag> {
        let mut out = Vec::with_capacity(self.tag_count());
        for role in &self.roles {
            for &k in &ROLE_TAG_PRIORITY {
                if let Tag::Arg(bio, prefix) = TAGS[k] {
                    out.push(GlobalTag::arg(role.clone(), bio, prefix));
                }
            }
        }
        out.push(GlobalTag::O);
        out
    }

    /// Lattice as JSON for inspection: per token, every tag score.
    pub fn debug_json(&self) -> Value {
        let tags = self.tags();
        let tokens: Vec<Value> = (0..self.len)
            .map(|j| {
                let scores: serde_json::Map<String, Value> = tags
                    .iter()
                    .map(|t| (t.to_string(), json!(self.score(j, t).unwrap_or(0.0))))
                    .collect();
                Value::Object(scores)
            })
            .collect();
        json!({
            "roles": self.roles.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "tags": tags.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            "tokens": tokens,
        })
    }
}

/// Best merged tag per token.
pub fn decode(lat: &MergedLattice) -> Vec<GlobalTag> {
    (0..lat.len)
        .map(|j| {
            let mut best: Option<(usize, usize, f64)> = None;
            for r in 0..lat.roles.len() {
                let row = lat.role_row(j, r);
                for &k in &ROLE_TAG_PRIORITY {
                    if best.is_none_or(|(_, _, s)| row[k] > s) {
                        best = Some((r, k, row[k]));
                    }
                }
            }
            let (r, k, s) = best.expect("at least one role");
            if lat.o[j].cmp(Scaled::split(s)) == Ordering::Greater {
                GlobalTag::O
            } else {
                let Tag::Arg(bio, prefix) = TAGS[k] else { unreachable!() };
                GlobalTag::arg(lat.roles[r].clone(), bio, prefix)
            }
        })
        .collect()
}

/// Maximal runs of B, I, I... with the same role and prefix. An I that does
/// not continue the previous tag opens a new span.
pub fn extract_spans(tags: &[GlobalTag]) -> Vec<ArgumentSpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &BaseRole, Prefix)> = None;
    let close = |open: &mut Option<(usize, &BaseRole, Prefix)>, end: usize, spans: &mut Vec<ArgumentSpan>| {
        if let Some((start, role, prefix)) = open.take() {
            spans.push(ArgumentSpan::new(start, end, RoleLabel::new(role.clone(), prefix)));
        }
    };
    for (j, tag) in tags.iter().enumerate() {
        match tag {
            GlobalTag::O => close(&mut open, j.wrapping_sub(1), &mut spans),
            GlobalTag::Arg { role, bio, prefix } => {
                let continues = *bio == Bio::I && open.is_some_and(|(_, r, p)| r == role && p == *prefix);
                if !continues {
                    close(&mut open, j.wrapping_sub(1), &mut spans);
                    open = Some((j, role, *prefix));
                }
            }
        }
    }
    close(&mut open, tags.len().wrapping_sub(1), &mut spans);
    spans
}

/// Inverse of [`extract_spans`] for non-overlapping spans.
pub fn encode_spans(spans: &[ArgumentSpan], len: usize) -> Result<Vec<GlobalTag>> {
    if let Some((a, b)) = find_overlap(spans) {
        return Err(Error::Contract(format!("overlapping spans {a} and {b}")));
    }
    let mut tags = vec![GlobalTag::O; len];
    for s in spans {
        if s.start > s.end || s.end >= len {
            return Err(Error::Contract(format!("span {s} out of range for {len} tokens")));
        }
        for (j, t) in tags.iter_mut().enumerate().take(s.end + 1).skip(s.start) {
            let bio = if j == s.start { Bio::B } else { Bio::I };
            *t = GlobalTag::arg(s.role.base.clone(), bio, s.role.prefix);
        }
    }
    Ok(tags)
}

/// Merge, decode and extract in one step.
pub fn decode_spans(dists: &[(BaseRole, TagDistribution)]) -> Result<Vec<ArgumentSpan>> {
    Ok(extract_spans(&decode(&merge_lattice(dists)?)))
}
