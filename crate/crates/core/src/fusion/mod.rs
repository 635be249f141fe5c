//! Fusion of raw instrument responses into Rosetta vectors.
//!
//! [`translate`] pushes one assessment through the crosswalk. [`merge`]
//! combines a subject's vectors under a [`ConflictPolicy`]. [`build_cohort`]
//! does both for a whole records file and attaches labels.
//!
//! Missing values are `None`, never a code.

mod records;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use records::{labels_to_text, parse_labels, parse_records, records_to_text, AssessmentRecord, Label};

use crate::error::{Error, Result};
use crate::registry::{Registry, SourceKey};

/// A raw response that produced (or competed for) a Rosetta value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub instrument: String,
    pub version: String,
    pub question_id: String,
    pub choice: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosettaVector {
    pub subject_id: String,
    /// Every Rosetta id of the registry; `None` is MISSING.
    pub values: BTreeMap<String, Option<u32>>,
    /// Present ids only.
    pub provenance: BTreeMap<String, Vec<Provenance>>,
}

impl RosettaVector {
    /// All-missing vector over `ids`.
    pub fn missing<I, S>(subject_id: impl Into<String>, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            subject_id: subject_id.into(),
            values: ids.into_iter().map(|id| (id.into(), None)).collect(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.values.get(id).copied().flatten()
    }

    pub fn present(&self) -> impl Iterator<Item = (&str, u32)> {
        self.values.iter().filter_map(|(k, v)| v.map(|c| (k.as_str(), c)))
    }

    pub fn present_count(&self) -> usize {
        self.values.values().filter(|v| v.is_some()).count()
    }

    /// Latest dated provenance entry behind `id`, if any.
    fn latest_date(&self, id: &str) -> Option<NaiveDate> {
        self.provenance.get(id)?.iter().filter_map(|p| p.date).max()
    }
}

/// How [`merge`] resolves a Rosetta question answered by several vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictPolicy {
    /// Most severe code.
    #[default]
    Max,
    /// First vector in input order that has a value.
    First,
    /// Value from the most recently dated vector; undated vectors rank
    /// oldest and ties go to the earlier vector.
    Latest,
}

impl FromStr for ConflictPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(ConflictPolicy::Max),
            "first" => Ok(ConflictPolicy::First),
            "latest" => Ok(ConflictPolicy::Latest),
            other => Err(format!("unknown conflict policy {other:?}")),
        }
    }
}

impl fmt::Display for ConflictPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictPolicy::Max => "max",
            ConflictPolicy::First => "first",
            ConflictPolicy::Latest => "latest",
        })
    }
}

/// Maps one assessment into Rosetta space.
///
/// Unmapped or unanswered questions contribute nothing. When several answered
/// questions of the same assessment map to one Rosetta question the most
/// severe code is kept and every contributing response is recorded.
pub fn translate(record: &AssessmentRecord, registry: &Registry) -> Result<RosettaVector> {
    let inst = registry
        .instrument(&record.instrument, &record.version)
        .ok_or_else(|| Error::UnknownInstrument {
            instrument: record.instrument.clone(),
            version: record.version.clone(),
        })?;
    for (qid, &choice) in &record.responses {
        let question = inst.question(qid).ok_or_else(|| Error::UnknownQuestion {
            instrument: record.instrument.clone(),
            version: record.version.clone(),
            question_id: qid.clone(),
        })?;
        if !question.scale.contains(choice) {
            return Err(Error::ChoiceOutOfRange {
                instrument: record.instrument.clone(),
                version: record.version.clone(),
                question_id: qid.clone(),
                choice,
                choices: question.scale.len(),
            });
        }
    }

    let mut vector = RosettaVector::missing(
        &record.subject_id,
        registry.rosetta_questions().iter().map(|r| r.id.clone()),
    );
    for (qid, &choice) in &record.responses {
        let key = SourceKey::new(&record.instrument, &record.version, qid);
        let Some(link) = registry.link_for(&key) else { continue };
        let Some(code) = link.answers.get(choice) else { continue };
        let Some(slot) = vector.values.get_mut(&link.rosetta_id) else {
            continue;
        };
        *slot = Some(slot.map_or(code, |c| c.max(code)));
        vector
            .provenance
            .entry(link.rosetta_id.clone())
            .or_default()
            .push(Provenance {
                instrument: record.instrument.clone(),
                version: record.version.clone(),
                question_id: qid.clone(),
                choice,
                date: record.date,
            });
    }
    for entries in vector.provenance.values_mut() {
        entries.sort();
    }
    Ok(vector)
}

/// Combines vectors of one subject. Provenance of every competing value is
/// kept, in canonical order.
pub fn merge(vectors: &[RosettaVector], policy: ConflictPolicy) -> Result<RosettaVector> {
    let first = vectors.first().ok_or(Error::EmptyMerge)?;
    if let Some(other) = vectors.iter().find(|v| v.subject_id != first.subject_id) {
        return Err(Error::SubjectMismatch(
            first.subject_id.clone(),
            other.subject_id.clone(),
        ));
    }
    if vectors.len() == 1 {
        return Ok(first.clone());
    }

    let mut out = RosettaVector::missing(&first.subject_id, vectors.iter().flat_map(|v| v.values.keys().cloned()));
    for (id, slot) in out.values.iter_mut() {
        let candidates: Vec<(usize, u32)> = vectors
            .iter()
            .enumerate()
            .filter_map(|(pos, v)| v.get(id).map(|c| (pos, c)))
            .collect();
        let chosen = match policy {
            ConflictPolicy::Max => candidates.iter().map(|&(_, c)| c).max(),
            ConflictPolicy::First => candidates.first().map(|&(_, c)| c),
            ConflictPolicy::Latest => candidates
                .iter()
                // max_by_key keeps the last maximum; reverse so ties go to the earlier vector
                .rev()
                .max_by_key(|&&(pos, _)| vectors[pos].latest_date(id))
                .map(|&(_, c)| c),
        };
        *slot = chosen;
        if chosen.is_some() {
            let mut entries: Vec<Provenance> = candidates
                .iter()
                .flat_map(|&(pos, _)| vectors[pos].provenance.get(id).into_iter().flatten().cloned())
                .collect();
            entries.sort();
            out.provenance.insert(id.clone(), entries);
        }
    }
    Ok(out)
}

/// One fused vector per labeled subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCohort {
    /// Column order: Rosetta questions in registry order.
    pub rosetta_ids: Vec<String>,
    /// Sorted by subject id.
    pub vectors: Vec<RosettaVector>,
    pub labels: BTreeMap<String, Label>,
    /// Number of answer codes per Rosetta question.
    pub code_counts: BTreeMap<String, u32>,
    pub policy: ConflictPolicy,
}

impl LabeledCohort {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// (autism, adhd, neither)
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for v in &self.vectors {
            counts[self.labels[&v.subject_id].index()] += 1;
        }
        counts
    }

    /// Fraction of subjects with no value, per Rosetta question in column order.
    pub fn missingness(&self) -> Vec<(String, f64)> {
        let n = self.vectors.len().max(1) as f64;
        self.rosetta_ids
            .iter()
            .map(|id| {
                let missing = self.vectors.iter().filter(|v| v.get(id).is_none()).count();
                (id.clone(), missing as f64 / n)
            })
            .collect()
    }

    /// Wide table: `subject_id,label,<rosetta ids...>`, empty cell for MISSING.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["subject_id".to_string(), "label".to_string()];
        header.extend(self.rosetta_ids.iter().cloned());
        w.write_record(&header)?;
        for v in &self.vectors {
            let mut row = vec![v.subject_id.clone(), self.labels[&v.subject_id].to_string()];
            row.extend(
                self.rosetta_ids
                    .iter()
                    .map(|id| v.get(id).map(|c| c.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn missingness_csv(&self) -> String {
        let mut out = String::from("rosetta_id,missing_fraction\n");
        for (id, frac) in self.missingness() {
            out.push_str(&format!("{id},{frac:.6}\n"));
        }
        out
    }

    /// Provenance of every present value, with the policy that produced it.
    pub fn provenance_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            policy: ConflictPolicy,
            subjects: Vec<SubjectDoc<'a>>,
        }
        #[derive(Serialize)]
        struct SubjectDoc<'a> {
            subject_id: &'a str,
            provenance: &'a BTreeMap<String, Vec<Provenance>>,
        }
        let doc = Doc {
            policy: self.policy,
            subjects: self
                .vectors
                .iter()
                .map(|v| SubjectDoc {
                    subject_id: &v.subject_id,
                    provenance: &v.provenance,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }
}

/// Translates and merges every subject's records and attaches labels.
/// Labels for subjects without records are ignored.
pub fn build_cohort(
    records: &[AssessmentRecord],
    labels: &BTreeMap<String, Label>,
    registry: &Registry,
    policy: ConflictPolicy,
) -> Result<LabeledCohort> {
    let mut by_subject: BTreeMap<&str, Vec<&AssessmentRecord>> = BTreeMap::new();
    for r in records {
        by_subject.entry(r.subject_id.as_str()).or_default().push(r);
    }
    if let Some(subject) = by_subject.keys().find(|s| !labels.contains_key(**s)) {
        return Err(Error::Unlabeled(subject.to_string()));
    }

    let subjects: Vec<(&str, Vec<&AssessmentRecord>)> = by_subject.into_iter().collect();
    let vectors = subjects
        .par_iter()
        .map(|(_, recs)| {
            let translated = recs
                .iter()
                .map(|r| translate(r, registry))
                .collect::<Result<Vec<_>>>()?;
            merge(&translated, policy)
        })
        .collect::<Result<Vec<_>>>()?;

    let kept: BTreeMap<String, Label> = subjects.iter().map(|(s, _)| (s.to_string(), labels[*s])).collect();

    Ok(LabeledCohort {
        rosetta_ids: registry.rosetta_questions().iter().map(|r| r.id.clone()).collect(),
        vectors,
        labels: kept,
        code_counts: registry
            .rosetta_questions()
            .iter()
            .map(|r| (r.id.clone(), r.code_count() as u32))
            .collect(),
        policy,
    })
}
