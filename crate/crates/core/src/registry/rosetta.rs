//! Rosetta questions: one de novo question per shared concept within a leaf,
//! with a body template and severity-ordered answer codes.
//!
//! File rows: `rosetta_id <TAB> leaf_path <TAB> body_template <TAB> codes`,
//! where codes are `|`-separated `n=label` entries.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ontology::{LeafPath, OntologyTree};
use crate::error::{Error, ParseError};

pub const NAME_TOKEN: &str = "[NAME]";
pub const PRONOUN_TOKEN: &str = "[his/her]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    /// Renders the possessive as "their".
    Unspecified,
}

impl Gender {
    fn possessive(self) -> &'static str {
        match self {
            Gender::Male => "his",
            Gender::Female => "her",
            Gender::Unspecified => "their",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unspecified" | "u" => Ok(Gender::Unspecified),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment<'a> {
    Text(&'a str),
    Name,
    Pronoun,
}

/// Splits a template into literal text and placeholders.
fn segments(template: &str) -> Result<Vec<Segment<'_>>, Error> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        if open > 0 {
            out.push(Segment::Text(&rest[..open]));
        }
        let close = rest[open..]
            .find(']')
            .map(|c| open + c)
            .ok_or_else(|| Error::UnknownPlaceholder(rest[open..].to_string()))?;
        match &rest[open..=close] {
            NAME_TOKEN => out.push(Segment::Name),
            PRONOUN_TOKEN => out.push(Segment::Pronoun),
            other => return Err(Error::UnknownPlaceholder(other.to_string())),
        }
        rest = &rest[close + 1..];
    }
    if rest.contains(']') {
        return Err(Error::UnknownPlaceholder("]".to_string()));
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    Ok(out)
}

/// Checks the template grammar: only the two known placeholders, and
/// `[NAME]` present at least once.
pub fn check_template(template: &str) -> Result<(), String> {
    let parts = segments(template).map_err(|e| e.to_string())?;
    if !parts.contains(&Segment::Name) {
        return Err(format!("template does not contain {NAME_TOKEN}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosettaCode {
    pub code: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosettaQuestion {
    pub id: String,
    pub leaf: LeafPath,
    pub template: String,
    pub codes: Vec<RosettaCode>,
    #[serde(skip)]
    pub line: usize,
}

impl RosettaQuestion {
    pub fn code_count(&self) -> usize {
        self.codes.len()
    }

    pub fn has_code(&self, code: u32) -> bool {
        code >= 1 && code as usize <= self.codes.len()
    }

    /// Substitutes `[NAME]` and `[his/her]`.
    pub fn render(&self, name: &str, gender: Gender) -> Result<String, Error> {
        render_template(&self.template, name, gender)
    }
}

pub fn render_template(template: &str, name: &str, gender: Gender) -> Result<String, Error> {
    let mut out = String::with_capacity(template.len() + name.len());
    for part in segments(template)? {
        match part {
            Segment::Text(t) => out.push_str(t),
            Segment::Name => out.push_str(name),
            Segment::Pronoun => out.push_str(gender.possessive()),
        }
    }
    Ok(out)
}

impl fmt::Display for RosettaQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes = self
            .codes
            .iter()
            .map(|c| format!("{}={}", c.code, c.label))
            .collect::<Vec<_>>()
            .join("|");
        write!(f, "{}\t{}\t{}\t{}", self.id, self.leaf, self.template, codes)
    }
}

fn check_id(id: &str) -> Result<(), String> {
    let valid = id
        .strip_prefix("R-")
        .and_then(|rest| rest.rsplit_once('-'))
        .map(|(slug, n)| {
            !slug.is_empty()
                && slug.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
                && !n.is_empty()
                && n.chars().all(|c| c.is_ascii_digit())
        })
        .unwrap_or(false);
    if valid {
        Ok(())
    } else {
        Err(format!("Rosetta id {id:?} does not match R-<leafslug>-<n>"))
    }
}

fn parse_codes(field: &str) -> Result<Vec<RosettaCode>, String> {
    let mut codes = Vec::new();
    for (pos, entry) in field.split('|').enumerate() {
        let (num, label) = entry
            .split_once('=')
            .ok_or_else(|| format!("code entry {entry:?} is not `n=label`"))?;
        let code: u32 = num
            .trim()
            .parse()
            .map_err(|_| format!("code {num:?} is not a positive integer"))?;
        if code as usize != pos + 1 {
            return Err(format!(
                "codes must be contiguous from 1; found {code} at position {}",
                pos + 1
            ));
        }
        let label = label.trim();
        if label.is_empty() {
            return Err(format!("code {code} has an empty label"));
        }
        codes.push(RosettaCode {
            code,
            label: label.to_string(),
        });
    }
    if codes.len() < 2 {
        return Err(format!(
            "a Rosetta question needs at least 2 codes, found {}",
            codes.len()
        ));
    }
    Ok(codes)
}

/// Parses the Rosetta question file. Ids must be unique and leaves must
/// resolve in `ontology`.
pub fn parse_rosetta(source: &str, ontology: &OntologyTree) -> Result<Vec<RosettaQuestion>, ParseError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (index, raw) in source.lines().enumerate() {
        let line_no = index + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return Err(ParseError::new(
                line_no,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let err = |e: String| ParseError::new(line_no, e);
        let id = fields[0].trim();
        check_id(id).map_err(err)?;
        if !ids.insert(id.to_string()) {
            return Err(err(format!("duplicate Rosetta id {id:?}")));
        }
        let leaf: LeafPath = fields[1].parse().map_err(err)?;
        if ontology.resolve(&leaf).is_none() {
            return Err(err(format!("unknown leaf path {leaf}")));
        }
        let template = fields[2].trim();
        check_template(template).map_err(err)?;
        let codes = parse_codes(fields[3]).map_err(err)?;
        out.push(RosettaQuestion {
            id: id.to_string(),
            leaf,
            template: template.to_string(),
            codes,
            line: line_no,
        });
    }
    Ok(out)
}

pub fn rosetta_to_text(questions: &[RosettaQuestion]) -> String {
    questions.iter().map(|q| format!("{q}\n")).collect()
}
