//! Records and labels files.
//!
//! Records: `subject_id <TAB> instrument <TAB> version <TAB> question_id <TAB> choice_index [<TAB> date]`.
//! Rows sharing subject, instrument version and date form one assessment.
//! Labels: `subject_id <TAB> label`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, Result};

/// One administration of one instrument version to one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub subject_id: String,
    pub instrument: String,
    pub version: String,
    /// Question id to 1-based choice index.
    pub responses: BTreeMap<String, u32>,
    pub date: Option<NaiveDate>,
}

impl AssessmentRecord {
    pub fn new(subject_id: impl Into<String>, instrument: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            instrument: instrument.into(),
            version: version.into(),
            responses: BTreeMap::new(),
            date: None,
        }
    }

    pub fn with_response(mut self, question_id: impl Into<String>, choice: u32) -> Self {
        self.responses.insert(question_id.into(), choice);
        self
    }

    pub fn with_date(mut self, date: NaiveDate) -> Self {
        self.date = Some(date);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Autism,
    Adhd,
    Neither,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Autism, Label::Adhd, Label::Neither];

    /// Autism or ADHD.
    pub fn has_condition(self) -> bool {
        !matches!(self, Label::Neither)
    }

    pub fn index(self) -> usize {
        match self {
            Label::Autism => 0,
            Label::Adhd => 1,
            Label::Neither => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Autism => "autism",
            Label::Adhd => "adhd",
            Label::Neither => "neither",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "autism" => Ok(Label::Autism),
            "adhd" => Ok(Label::Adhd),
            "neither" => Ok(Label::Neither),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Groups record rows into assessments, ordered by (subject, instrument,
/// version, date).
pub fn parse_records(source: &str) -> std::result::Result<Vec<AssessmentRecord>, ParseError> {
    type Key = (String, String, String, Option<NaiveDate>);
    let mut grouped: BTreeMap<Key, AssessmentRecord> = BTreeMap::new();
    for (index, raw) in source.lines().enumerate() {
        let line_no = index + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(ParseError::new(
                line_no,
                format!("expected 5 or 6 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields[..4].iter().any(|f| f.is_empty()) {
            return Err(ParseError::new(line_no, "empty field"));
        }
        let choice: u32 = fields[4]
            .parse()
            .map_err(|_| ParseError::new(line_no, format!("choice {:?} is not a positive integer", fields[4])))?;
        let date = match fields.get(5) {
            Some(d) if !d.is_empty() => Some(
                NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|_| ParseError::new(line_no, format!("date {d:?} is not YYYY-MM-DD")))?,
            ),
            _ => None,
        };
        let key = (
            fields[0].to_string(),
            fields[1].to_string(),
            fields[2].to_string(),
            date,
        );
        let record = grouped.entry(key).or_insert_with(|| {
            let mut r = AssessmentRecord::new(fields[0], fields[1], fields[2]);
            r.date = date;
            r
        });
        if record.responses.insert(fields[3].to_string(), choice).is_some() {
            return Err(ParseError::new(
                line_no,
                format!("question {} answered twice in the same assessment", fields[3]),
            ));
        }
    }
    Ok(grouped.into_values().collect())
}

pub fn records_to_text(records: &[AssessmentRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let date = r.date.map(|d| d.format("%Y-%m-%d").to_string());
        for (qid, choice) in &r.responses {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}",
                r.subject_id, r.instrument, r.version, qid, choice
            ));
            if let Some(d) = &date {
                out.push('\t');
                out.push_str(d);
            }
            out.push('\n');
        }
    }
    out
}

/// Parses a labels file. A subject may repeat with the same label; a
/// different label is an error.
pub fn parse_labels(source: &str) -> Result<BTreeMap<String, Label>> {
    let mut labels = BTreeMap::new();
    for (index, raw) in source.lines().enumerate() {
        let line_no = index + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(ParseError::new(line_no, "expected `subject_id<TAB>label`").into());
        }
        let label: Label = fields[1].parse().map_err(|e| ParseError::new(line_no, e))?;
        if let Some(prev) = labels.insert(fields[0].to_string(), label) {
            if prev != label {
                return Err(Error::ConflictingLabel {
                    subject: fields[0].to_string(),
                    first: prev.to_string(),
                    second: label.to_string(),
                });
            }
        }
    }
    Ok(labels)
}

pub fn labels_to_text(labels: &BTreeMap<String, Label>) -> String {
    labels.iter().map(|(s, l)| format!("{s}\t{l}\n")).collect()
}
