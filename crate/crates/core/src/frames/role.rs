use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Numbered PropBank roles whose meaning is defined per sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoreRole {
    A0,
    A1,
    A2,
    A3,
    A4,
    A5,
    AA,
}

impl CoreRole {
    pub const ALL: [CoreRole; 7] = [
        CoreRole::A0,
        CoreRole::A1,
        CoreRole::A2,
        CoreRole::A3,
        CoreRole::A4,
        CoreRole::A5,
        CoreRole::AA,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CoreRole::A0 => "A0",
            CoreRole::A1 => "A1",
            CoreRole::A2 => "A2",
            CoreRole::A3 => "A3",
            CoreRole::A4 => "A4",
            CoreRole::A5 => "A5",
            CoreRole::AA => "AA",
        }
    }

    /// Maps the `n` attribute of a frame-file `<role>` element.
    pub fn from_frame_number(n: &str) -> Option<CoreRole> {
        match n.trim() {
            "0" => Some(CoreRole::A0),
            "1" => Some(CoreRole::A1),
            "2" => Some(CoreRole::A2),
            "3" => Some(CoreRole::A3),
            "4" => Some(CoreRole::A4),
            "5" => Some(CoreRole::A5),
            "a" | "A" => Some(CoreRole::AA),
            _ => None,
        }
    }
}

impl FromStr for CoreRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CoreRole::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidRole(s.to_string()))
    }
}

/// A role label without its N/R/C prefix.
///
/// Core roles sort before modifiers; modifiers sort lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseRole {
    Core(CoreRole),
    Modifier(String),
}

impl BaseRole {
    pub fn is_core(&self) -> bool {
        matches!(self, BaseRole::Core(_))
    }

    pub fn as_str(&self) -> &str {
        match self {
            BaseRole::Core(c) => c.as_str(),
            BaseRole::Modifier(m) => m,
        }
    }
}

impl fmt::Display for BaseRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(core) = s.parse::<CoreRole>() {
            return Ok(BaseRole::Core(core));
        }
        let valid = !s.is_empty()
            && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
            && s.chars().next().is_some_and(|c| c.is_ascii_uppercase());
        // `A<digit>` outside A0-A5 is a malformed core role, not a modifier.
        let looks_core = s.len() == 2 && s.starts_with('A') && s[1..].chars().all(|c| c.is_ascii_digit());
        if valid && !looks_core {
            Ok(BaseRole::Modifier(s.to_string()))
        } else {
            Err(Error::InvalidRole(s.to_string()))
        }
    }
}

impl Serialize for BaseRole {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BaseRole {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Norm, reference or continuation variant of a role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Prefix {
    #[default]
    N,
    R,
    C,
}

impl Prefix {
    pub const ALL: [Prefix; 3] = [Prefix::N, Prefix::R, Prefix::C];

    pub fn index(self) -> usize {
        match self {
            Prefix::N => 0,
            Prefix::R => 1,
            Prefix::C => 2,
        }
    }
}

/// A role as it appears on an argument: base role plus N/R/C prefix.
///
/// Renders as `A1`, `R-A1` or `C-A1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleLabel {
    pub base: BaseRole,
    pub prefix: Prefix,
}

impl RoleLabel {
    pub fn new(base: BaseRole, prefix: Prefix) -> Self {
        RoleLabel { base, prefix }
    }

    pub fn norm(base: BaseRole) -> Self {
        RoleLabel::new(base, Prefix::N)
    }

    /// Parses the label spellings found in CoNLL data (`ARG0`, `AM-TMP`,
    /// `ARGM-TMP`, `R-ARG1`, `C-AM-LOC`) into the normalized form.
    ///
    /// Returns `Ok(None)` for verb labels (`V`, `C-V`), which are not arguments.
    pub fn from_conll(label: &str) -> Result<Option<RoleLabel>, Error> {
        let (prefix, rest) = if let Some(r) = label.strip_prefix("R-") {
            (Prefix::R, r)
        } else if let Some(r) = label.strip_prefix("C-") {
            (Prefix::C, r)
        } else {
            (Prefix::N, label)
        };
        if rest == "V" {
            return Ok(None);
        }
        let base = if let Some(m) = rest.strip_prefix("ARGM-").or_else(|| rest.strip_prefix("AM-")) {
            m.to_string()
        } else if let Some(n) = rest.strip_prefix("ARG") {
            format!("A{n}")
        } else {
            rest.to_string()
        };
        let base: BaseRole = base
            .parse()
            .map_err(|_| Error::InvalidRole(label.to_string()))?;
        Ok(Some(RoleLabel::new(base, prefix)))
    }
}

impl From<BaseRole> for RoleLabel {
    fn from(base: BaseRole) -> Self {
        RoleLabel::norm(base)
    }
}

impl fmt::Display for RoleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prefix {
            Prefix::N => write!(f, "{}", self.base),
            Prefix::R => write!(f, "R-{}", self.base),
            Prefix::C => write!(f, "C-{}", self.base),
        }
    }
}

impl FromStr for RoleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, rest) = if let Some(r) = s.strip_prefix("R-") {
            (Prefix::R, r)
        } else if let Some(r) = s.strip_prefix("C-") {
            (Prefix::C, r)
        } else {
            (Prefix::N, s)
        };
        let base = rest.parse().map_err(|_| Error::InvalidRole(s.to_string()))?;
        Ok(RoleLabel::new(base, prefix))
    }
}

impl Serialize for RoleLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RoleLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
