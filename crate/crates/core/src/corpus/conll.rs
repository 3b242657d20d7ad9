//! CoNLL column-format readers.
//!
//! Span format (one token per line, blank line between sentences, `#` lines
//! ignored):
//!
//! ```text
//! FORM  PRED  ARGS_1 ... ARGS_k
//! ```
//!
//! `PRED` is `-` for non-predicates, otherwise the lemma or a full sense id
//! (`beat.02`). There is one bracketed argument column per predicate, in
//! sentence order, as in the CoNLL-2005 props files (`(A0*`, `*`, `*)`, `(V*)`).
//!
//! Dependency format is CoNLL-2009: fourteen fixed columns followed by one
//! APRED column per predicate. `FILLPRED = Y` marks predicates, `PRED` holds
//! the sense and `LEMMA` the provided lemma.

use std::io::BufRead;
use std::sync::Arc;

use super::{validate_instance, ArgumentSpan, PredicateInstance, Sentence};
use crate::error::{Error, Result};
use crate::frames::{split_sense_id, RoleLabel};

struct Block {
    first_line: usize,
    rows: Vec<(usize, Vec<String>)>,
}

fn blocks<R: BufRead>(name: &str, reader: R) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    let mut current: Option<Block> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(name, e))?;
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            out.extend(current.take());
            continue;
        }
        let cols: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
        current
            .get_or_insert_with(|| Block {
                first_line: lineno,
                rows: Vec::new(),
            })
            .rows
            .push((lineno, cols));
    }
    out.extend(current);
    Ok(out)
}

fn sentence_id(name: &str, n: usize) -> String {
    let stem = std::path::Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("conll");
    format!("{stem}-{n}")
}

fn check_columns(name: &str, block: &Block, expected: usize) -> Result<()> {
    for (lineno, cols) in &block.rows {
        if cols.len() != expected {
            return Err(Error::parse(
                name,
                *lineno,
                format!("expected {expected} columns, found {}", cols.len()),
            ));
        }
    }
    Ok(())
}

fn parse_role(name: &str, lineno: usize, label: &str) -> Result<Option<RoleLabel>> {
    RoleLabel::from_conll(label).map_err(|e| Error::parse(name, lineno, e.to_string()))
}

pub(super) fn read_span<R: BufRead>(name: &str, reader: R) -> Result<Vec<PredicateInstance>> {
    let mut out = Vec::new();
    for (n, block) in blocks(name, reader)?.into_iter().enumerate() {
        let preds: Vec<usize> = block
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (_, cols))| cols.get(1).is_some_and(|p| p != "-"))
            .map(|(i, _)| i)
            .collect();
        check_columns(name, &block, 2 + preds.len())?;
        let tokens: Vec<String> = block.rows.iter().map(|(_, c)| c[0].clone()).collect();
        let sentence = Arc::new(Sentence::new(sentence_id(name, n + 1), tokens));

        for (k, &pred_index) in preds.iter().enumerate() {
            let column = 2 + k;
            let mut args = Vec::new();
            let mut open: Option<(usize, Option<RoleLabel>)> = None;
            for (i, (lineno, cols)) in block.rows.iter().enumerate() {
                let cell = cols[column].as_str();
                let star = cell
                    .find('*')
                    .ok_or_else(|| Error::parse(name, *lineno, format!("malformed argument cell {cell:?}")))?;
                let (head, tail) = (&cell[..star], &cell[star + 1..]);
                if let Some(label) = head.strip_prefix('(') {
                    if open.is_some() {
                        return Err(Error::parse(name, *lineno, "nested argument brackets"));
                    }
                    open = Some((i, parse_role(name, *lineno, label)?));
                } else if !head.is_empty() {
                    return Err(Error::parse(name, *lineno, format!("malformed argument cell {cell:?}")));
                }
                match tail {
                    "" => {}
                    ")" => {
                        let (start, role) = open
                            .take()
                            .ok_or_else(|| Error::parse(name, *lineno, "closing bracket without opening"))?;
                        if let Some(role) = role {
                            args.push(ArgumentSpan::new(start, i, role));
                        }
                    }
                    _ => return Err(Error::parse(name, *lineno, format!("malformed argument cell {cell:?}"))),
                }
            }
            if open.is_some() {
                return Err(Error::parse(name, block.first_line, "unclosed argument bracket"));
            }

            let pred_col = &block.rows[pred_index].1[1];
            let (lemma, sense) = match split_sense_id(pred_col) {
                Some((lemma, _)) => (lemma.to_string(), Some(pred_col.clone())),
                None => (pred_col.clone(), None),
            };
            let inst = PredicateInstance {
                sentence: Arc::clone(&sentence),
                pred_index,
                lemma: Some(lemma),
                gold_sense: sense,
                gold_args: Some(args),
            };
            validate_instance(name, block.rows[pred_index].0, &inst)?;
            out.push(inst);
        }
    }
    Ok(out)
}

const DEP_FIXED_COLUMNS: usize = 14;

pub(super) fn read_dep<R: BufRead>(name: &str, reader: R) -> Result<Vec<PredicateInstance>> {
    let mut out = Vec::new();
    for (n, block) in blocks(name, reader)?.into_iter().enumerate() {
        for (lineno, cols) in &block.rows {
            if cols.len() < DEP_FIXED_COLUMNS {
                return Err(Error::parse(
                    name,
                    *lineno,
                    format!("expected at least {DEP_FIXED_COLUMNS} columns, found {}", cols.len()),
                ));
            }
        }
        let preds: Vec<usize> = block
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (_, cols))| cols[12] == "Y")
            .map(|(i, _)| i)
            .collect();
        check_columns(name, &block, DEP_FIXED_COLUMNS + preds.len())?;
        let tokens: Vec<String> = block.rows.iter().map(|(_, c)| c[1].clone()).collect();
        let sentence = Arc::new(Sentence::new(sentence_id(name, n + 1), tokens));

        for (k, &pred_index) in preds.iter().enumerate() {
            let column = DEP_FIXED_COLUMNS + k;
            let mut args = Vec::new();
            for (i, (lineno, cols)) in block.rows.iter().enumerate() {
                let cell = &cols[column];
                if cell == "_" {
                    continue;
                }
                if let Some(role) = parse_role(name, *lineno, cell)? {
                    args.push(ArgumentSpan::new(i, i, role));
                }
            }
            let (lineno, cols) = &block.rows[pred_index];
            let sense = (cols[13] != "_").then(|| cols[13].clone());
            let lemma = (cols[2] != "_").then(|| cols[2].clone());
            let inst = PredicateInstance {
                sentence: Arc::clone(&sentence),
                pred_index,
                lemma,
                gold_sense: sense,
                gold_args: Some(args),
            };
            validate_instance(name, *lineno, &inst)?;
            out.push(inst);
        }
    }
    Ok(out)
}
