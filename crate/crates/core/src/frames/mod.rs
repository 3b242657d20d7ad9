//! Frame-file sense inventory.
//!
//! Frame files define, per lemma, the available senses with a short description
//! and a description for each numbered (core) role. Modifier roles carry
//! sense-independent descriptions from a separate table.
//!
//! The same sense id may be defined more than once across a collection (verb
//! and noun frame files, for instance). Such definitions are merged by joining
//! the texts with [`MERGE_SEPARATOR`] in source order.

mod propbank;
mod role;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use role::{BaseRole, CoreRole, Prefix, RoleLabel};

pub const MERGE_SEPARATOR: &str = "; ";

/// Descriptions shipped for modifier roles when no table is supplied.
pub const DEFAULT_MODIFIERS: [(&str, &str); 14] = [
    ("TMP", "time"),
    ("LOC", "location"),
    ("MNR", "manner"),
    ("CAU", "cause"),
    ("DIR", "direction"),
    ("EXT", "extent"),
    ("PRP", "purpose"),
    ("ADV", "general-purpose adverbial"),
    ("DIS", "discourse"),
    ("MOD", "modal"),
    ("NEG", "negation"),
    ("PNC", "purpose not cause"),
    ("PRD", "secondary predication"),
    ("REC", "reciprocal"),
];

pub fn default_modifiers() -> BTreeMap<String, String> {
    DEFAULT_MODIFIERS
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// One sense of a lemma, e.g. `beat.02`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenseEntry {
    pub id: String,
    pub description: String,
    #[serde(default)]
    pub roles: BTreeMap<CoreRole, String>,
}

impl SenseEntry {
    pub fn lemma(&self) -> &str {
        split_sense_id(&self.id).map(|(l, _)| l).unwrap_or(&self.id)
    }
}

// CoreRole keys serialize as their label strings.
impl Serialize for CoreRole {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CoreRole {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Splits `beat.02` into `("beat", "02")`. The index must be exactly two digits.
pub fn split_sense_id(id: &str) -> Option<(&str, &str)> {
    let (lemma, index) = id.rsplit_once('.')?;
    if lemma.is_empty() || index.len() != 2 || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((lemma, index))
}

/// Immutable lemma → senses table plus modifier descriptions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FrameInventory {
    entries: BTreeMap<String, Vec<SenseEntry>>,
    modifiers: BTreeMap<String, String>,
    by_id: HashMap<String, (String, usize)>,
}

impl FrameInventory {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lemma_count(&self) -> usize {
        self.entries.len()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.entries.contains_key(lemma)
    }

    /// Senses of `lemma` in frame-file order; empty when the lemma is unknown.
    pub fn senses_of(&self, lemma: &str) -> &[SenseEntry] {
        self.entries.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn sense(&self, sense_id: &str) -> Option<&SenseEntry> {
        let (lemma, idx) = self.by_id.get(sense_id)?;
        self.entries.get(lemma).map(|senses| &senses[*idx])
    }

    pub fn modifiers(&self) -> &BTreeMap<String, String> {
        &self.modifiers
    }

    /// Description of `role` under `sense_id`. The N/R/C prefix is ignored.
    ///
    /// Core roles are looked up in the sense's role table, modifiers in the
    /// modifier table.
    pub fn role_description(&self, sense_id: &str, role: &RoleLabel) -> Result<&str> {
        self.base_role_description(sense_id, &role.base)
    }

    pub fn base_role_description(&self, sense_id: &str, role: &BaseRole) -> Result<&str> {
        match role {
            BaseRole::Core(core) => {
                let sense = self
                    .sense(sense_id)
                    .ok_or_else(|| Error::UnknownSense(sense_id.to_string()))?;
                sense
                    .roles
                    .get(core)
                    .map(String::as_str)
                    .ok_or_else(|| Error::RoleUndefinedForSense {
                        sense_id: sense_id.to_string(),
                        role: core.as_str().to_string(),
                    })
            }
            BaseRole::Modifier(m) => self
                .modifier_description(m)
                .ok_or_else(|| Error::UnknownModifier(m.clone())),
        }
    }

    pub fn modifier_description(&self, label: &str) -> Option<&str> {
        self.modifiers.get(label).map(String::as_str)
    }

    /// Replaces entries of the modifier table; labels not mentioned keep their text.
    pub fn with_modifiers(mut self, overrides: BTreeMap<String, String>) -> Result<Self> {
        for (label, text) in overrides {
            match label.parse::<BaseRole>() {
                Ok(BaseRole::Modifier(_)) => {}
                _ => return Err(Error::Config(format!("{label:?} is not a modifier role label"))),
            }
            if text.trim().is_empty() {
                return Err(Error::Config(format!("empty description for modifier {label}")));
            }
            self.modifiers.insert(label, text);
        }
        Ok(self)
    }

    /// Ingests a frame-file collection: a directory of PropBank XML and/or
    /// normalized `.jsonl` files (read in file-name order), or a single such file.
    pub fn ingest(path: &Path) -> Result<Self> {
        let mut builder = InventoryBuilder::default();
        for file in frame_files(path)? {
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let name = file.display().to_string();
            if file.extension().is_some_and(|e| e == "xml") {
                builder.add_propbank_xml(&name, &text)?;
            } else {
                builder.add_jsonl(&name, &text)?;
            }
        }
        Ok(builder.build())
    }

    pub fn load_modifiers(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }

    /// Writes the normalized JSON Lines form, one record per lemma.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (lemma, senses) in &self.entries {
            let record = LemmaRecord {
                lemma: lemma.clone(),
                senses: senses.clone(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_jsonl(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads the normalized JSON Lines form.
    pub fn from_jsonl_reader<R: BufRead>(name: &str, reader: R) -> Result<Self> {
        let mut text = String::new();
        for line in reader.lines() {
            text.push_str(&line.map_err(|e| Error::io(name, e))?);
            text.push('\n');
        }
        let mut builder = InventoryBuilder::default();
        builder.add_jsonl(name, &text)?;
        Ok(builder.build())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() || path.extension().is_some_and(|e| e == "xml") {
            return Self::ingest(path);
        }
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl_reader(&path.display().to_string(), BufReader::new(file))
    }
}

fn frame_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.extension().is_some_and(|e| e == "xml" || e == "jsonl") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Serialize, Deserialize)]
struct LemmaRecord {
    lemma: String,
    senses: Vec<SenseEntry>,
}

#[derive(Debug)]
struct RawSense {
    id: String,
    descriptions: Vec<String>,
    roles: BTreeMap<CoreRole, Vec<String>>,
}

/// Accumulates definitions before merging them into a [`FrameInventory`].
#[derive(Debug, Default)]
pub struct InventoryBuilder {
    senses: BTreeMap<String, Vec<RawSense>>,
}

impl InventoryBuilder {
    /// Adds one definition block of a sense. `record` names it in error messages.
    pub fn add_definition(
        &mut self,
        file: &str,
        record: &str,
        sense_id: &str,
        description: &str,
        roles: &[(CoreRole, String)],
    ) -> Result<()> {
        let fail = |message: String| Error::Ingest {
            file: file.to_string(),
            record: record.to_string(),
            message,
        };
        let (lemma, _) = split_sense_id(sense_id)
            .ok_or_else(|| fail(format!("sense id {sense_id:?} is not of the form <lemma>.NN")))?;
        let description = description.trim();
        if description.is_empty() {
            return Err(fail(format!("sense {sense_id} has an empty description")));
        }
        let mut block: BTreeMap<CoreRole, String> = BTreeMap::new();
        for (role, text) in roles {
            let text = text.trim();
            if text.is_empty() {
                return Err(fail(format!("role {} of {sense_id} has an empty description", role.as_str())));
            }
            if block.insert(*role, text.to_string()).is_some() {
                return Err(fail(format!("duplicate role {} in definition of {sense_id}", role.as_str())));
            }
        }

        let senses = self.senses.entry(lemma.to_string()).or_default();
        let raw = match senses.iter_mut().position(|s| s.id == sense_id) {
            Some(i) => &mut senses[i],
            None => {
                senses.push(RawSense {
                    id: sense_id.to_string(),
                    descriptions: Vec::new(),
                    roles: BTreeMap::new(),
                });
                senses.last_mut().unwrap()
            }
        };
        raw.descriptions.push(description.to_string());
        for (role, text) in block {
            raw.roles.entry(role).or_default().push(text);
        }
        Ok(())
    }

    pub fn add_propbank_xml(&mut self, file: &str, text: &str) -> Result<()> {
        propbank::add_frameset(self, file, text)
    }

    /// Adds normalized JSON Lines records; the record's lemma must own every sense id.
    pub fn add_jsonl(&mut self, file: &str, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record_name = format!("line {}", lineno + 1);
            let record: LemmaRecord = serde_json::from_str(line).map_err(|e| Error::Ingest {
                file: file.to_string(),
                record: record_name.clone(),
                message: e.to_string(),
            })?;
            if record.senses.is_empty() {
                return Err(Error::Ingest {
                    file: file.to_string(),
                    record: record_name,
                    message: format!("lemma {:?} has no senses", record.lemma),
                });
            }
            for sense in record.senses {
                if split_sense_id(&sense.id).map(|(l, _)| l) != Some(record.lemma.as_str()) {
                    return Err(Error::Ingest {
                        file: file.to_string(),
                        record: record_name,
                        message: format!("sense id {:?} does not belong to lemma {:?}", sense.id, record.lemma),
                    });
                }
                let roles: Vec<(CoreRole, String)> = sense.roles.into_iter().collect();
                self.add_definition(file, &record_name, &sense.id, &sense.description, &roles)?;
            }
        }
        Ok(())
    }

    pub fn build(self) -> FrameInventory {
        let mut entries = BTreeMap::new();
        let mut by_id = HashMap::new();
        for (lemma, raws) in self.senses {
            let senses: Vec<SenseEntry> = raws
                .into_iter()
                .enumerate()
                .map(|(i, raw)| {
                    by_id.insert(raw.id.clone(), (lemma.clone(), i));
                    SenseEntry {
                        id: raw.id,
                        description: raw.descriptions.join(MERGE_SEPARATOR),
                        roles: raw
                            .roles
                            .into_iter()
                            .map(|(r, texts)| (r, texts.join(MERGE_SEPARATOR)))
                            .collect(),
                    }
                })
                .collect();
            entries.insert(lemma, senses);
        }
        FrameInventory {
            entries,
            modifiers: default_modifiers(),
            by_id,
        }
    }
}

/// The `beat` frameset of the running example.
pub mod fixtures {
    use super::*;

    /// The `beat` frameset with the three senses used in the running example.
    pub fn beat_inventory() -> FrameInventory {
        let mut b = InventoryBuilder::default();
        b.add_definition(
            "beat.xml",
            "beat.01",
            "beat.01",
            "(Cause) pulsating motion that often makes sound",
            &[(CoreRole::A0, "beater".into()), (CoreRole::A1, "thing beating".into())],
        )
        .unwrap();
        b.add_definition(
            "beat.xml",
            "beat.02",
            "beat.02",
            "push, cause motion",
            &[
                (CoreRole::A0, "causer of motion".into()),
                (CoreRole::A1, "thing moving".into()),
                (CoreRole::A2, "direction, destination".into()),
            ],
        )
        .unwrap();
        b.add_definition(
            "beat.xml",
            "beat.03",
            "beat.03",
            "win over some competitor",
            &[(CoreRole::A0, "winner".into()), (CoreRole::A1, "loser".into())],
        )
        .unwrap();
        b.build()
    }
}
