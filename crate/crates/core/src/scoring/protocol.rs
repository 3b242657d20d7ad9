//! Scorer wire protocol, version 1: newline-delimited JSON.
//!
//! Both sides open with `{"hello": {"protocol": 1}}`. Requests carry an
//! integer id that the matching response repeats; responses may arrive in any
//! order.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    check_bio_length, check_probability, check_role_scores, BioRequest, RoleRequest, Scorer, SenseRequest,
    TagDistribution,
};
use crate::error::{Error, Result};
use crate::frames::BaseRole;
use crate::querygen::MarkedSequence;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloBody {
    pub protocol: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub hello: HelloBody,
}

impl Hello {
    pub fn current() -> Self {
        Hello {
            hello: HelloBody {
                protocol: PROTOCOL_VERSION,
            },
        }
    }

    /// Parses a handshake line and checks the version.
    pub fn check(line: &str) -> Result<()> {
        let hello: Hello = serde_json::from_str(line.trim())
            .map_err(|e| Error::Protocol(format!("bad handshake {:?}: {e}", line.trim())))?;
        if hello.hello.protocol != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "peer speaks protocol {}, expected {PROTOCOL_VERSION}",
                hello.hello.protocol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    Sense,
    Role,
    Bio,
}

/// One request line. Unused fields are `null`. A bio request names its role
/// as the single entry of `roles`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: u64,
    pub kind: RequestKind,
    pub tokens: Vec<String>,
    pub option: Option<String>,
    pub query: Option<String>,
    pub roles: Option<Vec<String>>,
}

/// One response line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireResponse {
    Score { id: u64, score: f64 },
    Scores { id: u64, scores: BTreeMap<String, f64> },
    Tags { id: u64, tags: Vec<Vec<f64>> },
    Error { id: Option<u64>, error: String },
}

impl WireResponse {
    pub fn id(&self) -> Option<u64> {
        match self {
            WireResponse::Score { id, .. } | WireResponse::Scores { id, .. } | WireResponse::Tags { id, .. } => {
                Some(*id)
            }
            WireResponse::Error { id, .. } => *id,
        }
    }
}

/// A request decoded into scoring-contract types.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoded {
    Sense(SenseRequest),
    Role(RoleRequest),
    Bio(BioRequest),
}

impl WireRequest {
    pub fn sense(id: u64, r: &SenseRequest) -> Self {
        WireRequest {
            id,
            kind: RequestKind::Sense,
            tokens: r.marked.tokens.clone(),
            option: Some(r.option_text.clone()),
            query: None,
            roles: None,
        }
    }

    pub fn role(id: u64, r: &RoleRequest) -> Self {
        WireRequest {
            id,
            kind: RequestKind::Role,
            tokens: r.marked.tokens.clone(),
            option: None,
            query: None,
            roles: Some(r.roles.iter().map(|r| r.to_string()).collect()),
        }
    }

    pub fn bio(id: u64, r: &BioRequest) -> Self {
        WireRequest {
            id,
            kind: RequestKind::Bio,
            tokens: r.marked.tokens.clone(),
            option: None,
            query: Some(r.query_text.clone()),
            roles: Some(vec![r.role.to_string()]),
        }
    }

    fn roles(&self) -> Result<Vec<BaseRole>> {
        self.roles
            .as_ref()
            .ok_or_else(|| Error::Protocol(format!("request {} has no roles", self.id)))?
            .iter()
            .map(|r| r.parse())
            .collect()
    }

    pub fn decode(&self) -> Result<Decoded> {
        let marked = MarkedSequence::from_tokens(self.tokens.clone())
            .map_err(|e| Error::Protocol(format!("request {}: {e}", self.id)))?;
        let missing = |field: &str| Error::Protocol(format!("{:?} request {} has no {field}", self.kind, self.id));
        Ok(match self.kind {
            RequestKind::Sense => Decoded::Sense(SenseRequest {
                marked,
                option_text: self.option.clone().ok_or_else(|| missing("option"))?,
            }),
            RequestKind::Role => Decoded::Role(RoleRequest {
                marked,
                roles: self.roles()?,
            }),
            RequestKind::Bio => {
                let query_text = self.query.clone().filter(|q| !q.is_empty()).ok_or_else(|| missing("query"))?;
                let role = match self.roles()?.as_slice() {
                    [r] => r.clone(),
                    _ => return Err(Error::Protocol(format!("bio request {} needs exactly one role", self.id))),
                };
                Decoded::Bio(BioRequest {
                    marked,
                    query_text,
                    role,
                })
            }
        })
    }
}

pub fn sense_response(id: u64, resp: &WireResponse) -> Result<f64> {
    match resp {
        WireResponse::Score { score, .. } => check_probability(*score, "sense"),
        WireResponse::Error { error, .. } => Err(Error::Protocol(format!("request {id} failed remotely: {error}"))),
        other => Err(Error::Protocol(format!("request {id}: expected a score, got {other:?}"))),
    }
}

pub fn role_response(id: u64, req: &RoleRequest, resp: &WireResponse) -> Result<BTreeMap<BaseRole, f64>> {
    match resp {
        WireResponse::Scores { scores, .. } => {
            let parsed = scores
                .iter()
                .map(|(k, v)| Ok((k.parse::<BaseRole>()?, *v)))
                .collect::<Result<BTreeMap<_, _>>>()
                .map_err(|e| Error::Protocol(format!("request {id}: {e}")))?;
            check_role_scores(req, &parsed)?;
            Ok(parsed)
        }
        WireResponse::Error { error, .. } => Err(Error::Protocol(format!("request {id} failed remotely: {error}"))),
        other => Err(Error::Protocol(format!("request {id}: expected role scores, got {other:?}"))),
    }
}

pub fn bio_response(id: u64, req: &BioRequest, resp: &WireResponse) -> Result<TagDistribution> {
    match resp {
        WireResponse::Tags { tags, .. } => {
            let dist = TagDistribution::try_from(tags.clone())
                .map_err(|e| Error::Protocol(format!("request {id}: {e}")))?;
            check_bio_length(req, &dist)?;
            Ok(dist)
        }
        WireResponse::Error { error, .. } => Err(Error::Protocol(format!("request {id} failed remotely: {error}"))),
        other => Err(Error::Protocol(format!("request {id}: expected tags, got {other:?}"))),
    }
}

/// Answers one request line with `scorer`. Malformed requests produce an
/// error response carrying the offending id when it can be read.
pub fn answer(scorer: &dyn Scorer, line: &str) -> WireResponse {
    let request: WireRequest = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64));
            return WireResponse::Error {
                id,
                error: format!("malformed request: {e}"),
            };
        }
    };
    let id = request.id;
    let result = request.decode().and_then(|decoded| match decoded {
        Decoded::Sense(r) => scorer.score_sense(&r).map(|score| WireResponse::Score { id, score }),
        Decoded::Role(r) => scorer.score_role_presence(&r).map(|s| WireResponse::Scores {
            id,
            scores: s.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }),
        Decoded::Bio(r) => scorer.score_bio_one(&r).map(|d| WireResponse::Tags { id, tags: d.into() }),
    });
    result.unwrap_or_else(|e| WireResponse::Error {
        id: Some(id),
        error: e.to_string(),
    })
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::Protocol(e.to_string()))?;
    writeln!(out, "{line}")
        .and_then(|_| out.flush())
        .map_err(|e| Error::Transport(e.to_string()))
}

/// Server loop: handshake, then one response per request line until EOF.
pub fn serve<R: BufRead, W: Write>(scorer: &dyn Scorer, reader: R, mut writer: W) -> Result<usize> {
    let mut lines = reader.lines();
    let first = match lines.next() {
        Some(line) => line.map_err(|e| Error::Transport(e.to_string()))?,
        None => return Ok(0),
    };
    Hello::check(&first)?;
    write_line(&mut writer, &Hello::current())?;
    let mut answered = 0;
    for line in lines {
        let line = line.map_err(|e| Error::Transport(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let response = answer(scorer, &line);
        if let WireResponse::Error { id, error } = &response {
            warn!("request {id:?}: {error}");
        }
        write_line(&mut writer, &response)?;
        answered += 1;
    }
    Ok(answered)
}
