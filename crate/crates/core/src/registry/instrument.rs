//! Ingested instrument versions.
//!
//! File layout (UTF-8, tab-separated):
//!
//! ```text
//! name            BASC-3
//! version         Preschool
//! age_min_months  24
//! age_max_months  71
//! reporter        parent
//!
//! 88  Cognitive/Behavioral/Emotional/Adaptability  Adjusts well ...  frequency  Almost Always|Often|Sometimes|Never
//! ```
//!
//! The header block ends at the first blank line. Choices are listed in
//! ascending severity; they may be written as bare labels or as `n=label`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ontology::{LeafPath, OntologyTree};
use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Frequency,
    Quality,
    Binary,
}

impl FromStr for ScaleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frequency" => Ok(ScaleKind::Frequency),
            "quality" => Ok(ScaleKind::Quality),
            "binary" => Ok(ScaleKind::Binary),
            other => Err(format!("unknown scale kind {other:?}")),
        }
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleKind::Frequency => "frequency",
            ScaleKind::Quality => "quality",
            ScaleKind::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerChoice {
    /// 1-based; larger means more severe.
    pub index: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerScale {
    pub kind: ScaleKind,
    choices: Vec<AnswerChoice>,
}

impl AnswerScale {
    /// Builds a scale from choices in severity order, checking the scale rules.
    pub fn new(kind: ScaleKind, choices: Vec<AnswerChoice>) -> Result<Self, String> {
        if choices.len() < 2 {
            return Err(format!("a scale needs at least 2 choices, found {}", choices.len()));
        }
        if kind == ScaleKind::Binary && choices.len() != 2 {
            return Err(format!("binary scale has {} choices", choices.len()));
        }
        let mut seen = HashSet::new();
        for (pos, choice) in choices.iter().enumerate() {
            if choice.index as usize != pos + 1 {
                return Err(format!(
                    "choice indices must be contiguous from 1; found {} at position {}",
                    choice.index,
                    pos + 1
                ));
            }
            if choice.label.trim().is_empty() {
                return Err(format!("choice {} has an empty label", choice.index));
            }
            if !seen.insert(choice.label.as_str()) {
                return Err(format!("duplicate choice label {:?}", choice.label));
            }
        }
        Ok(Self { kind, choices })
    }

    pub fn from_labels<S: Into<String>>(kind: ScaleKind, labels: impl IntoIterator<Item = S>) -> Result<Self, String> {
        let choices = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| AnswerChoice {
                index: i as u32 + 1,
                label: label.into(),
            })
            .collect();
        Self::new(kind, choices)
    }

    pub fn choices(&self) -> &[AnswerChoice] {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        index >= 1 && index as usize <= self.choices.len()
    }

    fn parse_choices(field: &str) -> Result<Vec<AnswerChoice>, String> {
        let entries: Vec<&str> = field.split('|').map(str::trim).collect();
        let explicit: Vec<Option<(u32, &str)>> = entries
            .iter()
            .map(|e| {
                let (num, label) = e.split_once('=')?;
                Some((num.trim().parse().ok()?, label.trim()))
            })
            .collect();
        let n_explicit = explicit.iter().filter(|e| e.is_some()).count();
        if n_explicit == 0 {
            return Ok(entries
                .iter()
                .enumerate()
                .map(|(i, label)| AnswerChoice {
                    index: i as u32 + 1,
                    label: label.to_string(),
                })
                .collect());
        }
        if n_explicit != entries.len() {
            return Err("choices mix numbered and unnumbered labels".to_string());
        }
        Ok(explicit
            .into_iter()
            .flatten()
            .map(|(index, label)| AnswerChoice {
                index,
                label: label.to_string(),
            })
            .collect())
    }

    fn labels_field(&self) -> String {
        self.choices
            .iter()
            .map(|c| c.label.as_str())
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceQuestion {
    pub id: String,
    pub body: String,
    pub scale: AnswerScale,
    pub leaf: LeafPath,
    #[serde(skip)]
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reporter {
    Clinician,
    Parent,
    Teacher,
    #[serde(rename = "self")]
    SelfReport,
}

impl FromStr for Reporter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clinician" => Ok(Reporter::Clinician),
            "parent" => Ok(Reporter::Parent),
            "teacher" => Ok(Reporter::Teacher),
            "self" => Ok(Reporter::SelfReport),
            other => Err(format!("unknown reporter {other:?}")),
        }
    }
}

impl fmt::Display for Reporter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reporter::Clinician => "clinician",
            Reporter::Parent => "parent",
            Reporter::Teacher => "teacher",
            Reporter::SelfReport => "self",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentVersion {
    pub name: String,
    pub version: String,
    pub age_min_months: u32,
    pub age_max_months: u32,
    pub reporter: Reporter,
    pub questions: Vec<SourceQuestion>,
    /// File the version was read from, for diagnostics.
    #[serde(skip)]
    pub origin: String,
}

impl InstrumentVersion {
    pub fn question(&self, id: &str) -> Option<&SourceQuestion> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn label(&self) -> String {
        format!("{} / {}", self.name, self.version)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "name\t{}\nversion\t{}\nage_min_months\t{}\nage_max_months\t{}\nreporter\t{}\n\n",
            self.name, self.version, self.age_min_months, self.age_max_months, self.reporter
        );
        for q in &self.questions {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                q.id,
                q.leaf,
                q.body,
                q.scale.kind,
                q.scale.labels_field()
            ));
        }
        out
    }
}

/// Parses one instrument version, resolving every leaf path against `ontology`.
pub fn parse_instrument(source: &str, ontology: &OntologyTree) -> Result<InstrumentVersion, ParseError> {
    let mut name = None;
    let mut version = None;
    let mut age_min = None;
    let mut age_max = None;
    let mut reporter = None;
    let mut questions: Vec<SourceQuestion> = Vec::new();
    let mut ids = HashSet::new();
    let mut in_header = true;
    let mut last_line = 0;

    for (index, raw) in source.lines().enumerate() {
        let line_no = index + 1;
        last_line = line_no;
        if raw.trim_start().starts_with('#') {
            continue;
        }
        if raw.trim().is_empty() {
            if in_header && name.is_some() {
                in_header = false;
            }
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if in_header {
            if fields.len() != 2 {
                return Err(ParseError::new(line_no, "header lines must be `key<TAB>value`"));
            }
            let value = fields[1].trim();
            let number = |v: &str| {
                v.parse::<u32>()
                    .map_err(|_| ParseError::new(line_no, format!("expected months, found {v:?}")))
            };
            match fields[0].trim() {
                "name" => name = Some(value.to_string()),
                "version" => version = Some(value.to_string()),
                "age_min_months" => age_min = Some(number(value)?),
                "age_max_months" => age_max = Some(number(value)?),
                "reporter" => reporter = Some(value.parse().map_err(|e: String| ParseError::new(line_no, e))?),
                other => return Err(ParseError::new(line_no, format!("unknown header key {other:?}"))),
            }
            continue;
        }

        if fields.len() != 5 {
            return Err(ParseError::new(
                line_no,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(ParseError::new(line_no, "empty question id"));
        }
        if !ids.insert(id.to_string()) {
            return Err(ParseError::new(line_no, format!("duplicate question id {id:?}")));
        }
        let leaf: LeafPath = fields[1].parse().map_err(|e: String| ParseError::new(line_no, e))?;
        if ontology.resolve(&leaf).is_none() {
            return Err(ParseError::new(line_no, format!("unknown leaf path {leaf}")));
        }
        let kind: ScaleKind = fields[3]
            .trim()
            .parse()
            .map_err(|e: String| ParseError::new(line_no, e))?;
        let choices = AnswerScale::parse_choices(fields[4]).map_err(|e| ParseError::new(line_no, e))?;
        let scale = AnswerScale::new(kind, choices).map_err(|e| ParseError::new(line_no, e))?;
        questions.push(SourceQuestion {
            id: id.to_string(),
            body: fields[2].trim().to_string(),
            scale,
            leaf,
            line: line_no,
        });
    }

    let missing = |key: &str| ParseError::new(1, format!("header is missing `{key}`"));
    let name = name.ok_or_else(|| missing("name"))?;
    let version = version.ok_or_else(|| missing("version"))?;
    let age_min_months = age_min.ok_or_else(|| missing("age_min_months"))?;
    let age_max_months = age_max.ok_or_else(|| missing("age_max_months"))?;
    let reporter = reporter.ok_or_else(|| missing("reporter"))?;
    if age_min_months > age_max_months {
        return Err(ParseError::new(1, "age_min_months exceeds age_max_months"));
    }
    if questions.is_empty() {
        return Err(ParseError::new(last_line.max(1), "instrument has no questions"));
    }

    Ok(InstrumentVersion {
        name,
        version,
        age_min_months,
        age_max_months,
        reporter,
        questions,
        origin: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ontology() -> OntologyTree {
        OntologyTree::parse(
            "Cognitive\n  Behavioral\n    Emotional\n      Adaptability\nMotor\n  Fine\nSomatic\n  Sleep\n",
        )
        .unwrap()
    }

    const SRS: &str = "name\tSRS-2\nversion\tSchool-Age\nage_min_months\t48\nage_max_months\t227\nreporter\tparent\n\n\
24\tCognitive/Behavioral/Emotional/Adaptability\tDifficulty with changes to routine\tfrequency\tNot True|Sometimes True|Often True|Almost Always True\n";

    #[test]
    fn parses_four_choice_frequency_item() {
        let inst = parse_instrument(SRS, &ontology()).unwrap();
        assert_eq!(inst.name, "SRS-2");
        assert_eq!(inst.reporter, Reporter::Parent);
        let q = inst.question("24").unwrap();
        assert_eq!(q.scale.len(), 4);
        assert_eq!(q.scale.kind, ScaleKind::Frequency);
        assert_eq!(q.scale.choices()[2].label, "Often True");
        assert_eq!(q.line, 7);
    }

    #[test]
    fn parses_three_choice_item() {
        let src = "name\tCBCL\nversion\t6-18\nage_min_months\t72\nage_max_months\t227\nreporter\tparent\n\n\
21\tCognitive/Behavioral/Emotional/Adaptability\tDisturbed by changes in routine\tfrequency\tNot True|Somewhat True|Very True\n";
        let inst = parse_instrument(src, &ontology()).unwrap();
        assert_eq!(inst.questions[0].scale.len(), 3);
    }

    #[test]
    fn smallest_instrument_is_binary() {
        let src = "name\tX\nversion\tv\nage_min_months\t0\nage_max_months\t10\nreporter\tself\n\nq1\tMotor/Fine\tCan hop\tbinary\tNo|Yes\n";
        let inst = parse_instrument(src, &ontology()).unwrap();
        assert_eq!(inst.questions.len(), 1);
        assert_eq!(inst.questions[0].scale.kind, ScaleKind::Binary);
        assert_eq!(inst.reporter, Reporter::SelfReport);
    }

    #[test]
    fn rejects_unknown_leaf() {
        let src = SRS.replace("Emotional/Adaptability", "Emotional/Nope");
        let err = parse_instrument(&src, &ontology()).unwrap_err();
        assert_eq!(err.line, 7);
        assert!(err.message.contains("unknown leaf"));
    }

    #[test]
    fn rejects_interior_leaf_path() {
        let src = SRS.replace("Cognitive/Behavioral/Emotional/Adaptability", "Cognitive/Behavioral");
        assert!(parse_instrument(&src, &ontology()).is_err());
    }

    #[test]
    fn rejects_non_contiguous_indices() {
        let src = SRS.replace(
            "Not True|Sometimes True|Often True|Almost Always True",
            "1=Not True|2=Sometimes True|4=Almost Always True",
        );
        let err = parse_instrument(&src, &ontology()).unwrap_err();
        assert!(err.message.contains("contiguous"), "{}", err.message);
    }

    #[test]
    fn accepts_numbered_choices() {
        let src = SRS.replace(
            "Not True|Sometimes True|Often True|Almost Always True",
            "1=Not True|2=Sometimes True|3=Often True",
        );
        let inst = parse_instrument(&src, &ontology()).unwrap();
        assert_eq!(inst.questions[0].scale.len(), 3);
    }

    #[test]
    fn rejects_duplicate_question_id() {
        let src = format!("{SRS}24\tMotor/Fine\tAgain\tbinary\tNo|Yes\n");
        let err = parse_instrument(&src, &ontology()).unwrap_err();
        assert_eq!(err.line, 8);
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn rejects_bad_scales() {
        for choices in ["Only", "A|A", "A||B", "A|B|C"] {
            let kind = if choices == "A|B|C" { "binary" } else { "frequency" };
            let src = format!(
                "name\tX\nversion\tv\nage_min_months\t0\nage_max_months\t10\nreporter\tparent\n\nq\tMotor/Fine\tb\t{kind}\t{choices}\n"
            );
            assert!(parse_instrument(&src, &ontology()).is_err(), "{choices}");
        }
    }

    #[test]
    fn rejects_missing_header_and_empty_body() {
        assert!(parse_instrument("version\tv\n\nq\tMotor/Fine\tb\tbinary\tNo|Yes\n", &ontology()).is_err());
        let header_only = "name\tX\nversion\tv\nage_min_months\t0\nage_max_months\t10\nreporter\tparent\n\n";
        let err = parse_instrument(header_only, &ontology()).unwrap_err();
        assert!(err.message.contains("no questions"));
    }

    #[test]
    fn round_trips_through_text() {
        let inst = parse_instrument(SRS, &ontology()).unwrap();
        let again = parse_instrument(&inst.to_text(), &ontology()).unwrap();
        assert_eq!(inst.to_text(), again.to_text());
        assert_eq!(inst.questions[0].scale, again.questions[0].scale);
    }
}
