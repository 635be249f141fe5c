//! Case-study learning pipeline: imputation, gradient-boosted trees, the
//! two-stage cascade, forward feature selection and cross-validated AUC.
//!
//! Everything works on a [`Dataset`]: fused Rosetta codes (possibly missing)
//! plus three-class labels, rows sorted by subject id.

pub mod auc;
pub mod cascade;
pub mod cv;
pub mod gbdt;
pub mod impute;
pub mod select;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use auc::auc;
pub use cascade::{fit_cascade, train_pipeline, CascadeModel, CascadeParams, ModelEval, Prediction};
pub use cv::{cross_validate, stratified_folds, CvParams, EvalReport, FoldResult};
pub use gbdt::{BinnedMatrix, GbdtModel, GbdtParams};
pub use impute::{ImputationModel, ImputeStrategy};
pub use select::{select_features, SelectMethod, SelectParams};

use crate::error::{Error, Result};
use crate::fusion::{Label, LabeledCohort};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subject_ids: Vec<String>,
    pub feature_ids: Vec<String>,
    /// Answer-code count per feature; bounds imputed values.
    pub code_counts: Vec<u32>,
    pub rows: Vec<Vec<Option<u32>>>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn from_cohort(cohort: &LabeledCohort) -> Self {
        let mut vectors: Vec<_> = cohort.vectors.iter().collect();
        vectors.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        Self {
            subject_ids: vectors.iter().map(|v| v.subject_id.clone()).collect(),
            feature_ids: cohort.rosetta_ids.clone(),
            code_counts: cohort
                .rosetta_ids
                .iter()
                .map(|id| cohort.code_counts.get(id).copied().unwrap_or(0))
                .collect(),
            rows: vectors
                .iter()
                .map(|v| cohort.rosetta_ids.iter().map(|id| v.get(id)).collect())
                .collect(),
            labels: vectors.iter().map(|v| cohort.labels[&v.subject_id]).collect(),
        }
    }

    /// Reads the fused wide table. Without `code_counts` the largest observed
    /// code of each column stands in for its code count.
    pub fn from_csv(text: &str, code_counts: Option<&BTreeMap<String, u32>>) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "subject_id" || &header[1] != "label" {
            return Err(Error::Invalid("fused table must start with subject_id,label".into()));
        }
        let feature_ids: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut parsed = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let label: Label = rec[1]
                .parse()
                .map_err(|e: String| Error::Invalid(format!("line {line}: {e}")))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|cell| match cell.trim() {
                    "" => Ok(None),
                    c => c
                        .parse::<u32>()
                        .map(Some)
                        .map_err(|_| Error::Invalid(format!("line {line}: code {c:?} is not an integer"))),
                })
                .collect::<Result<Vec<_>>>()?;
            parsed.push((rec[0].to_string(), label, row));
        }
        parsed.sort_by(|a, b| a.0.cmp(&b.0));
        let counts = feature_ids
            .iter()
            .enumerate()
            .map(|(j, id)| match code_counts.and_then(|m| m.get(id)) {
                Some(&n) => n,
                None => parsed.iter().filter_map(|r| r.2[j]).max().unwrap_or(1),
            })
            .collect();
        Ok(Self {
            subject_ids: parsed.iter().map(|r| r.0.clone()).collect(),
            feature_ids,
            code_counts: counts,
            labels: parsed.iter().map(|r| r.1).collect(),
            rows: parsed.into_iter().map(|r| r.2).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    /// Same rows with labels shuffled.
    pub fn with_permuted_labels(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        out
    }
}

/// Condition present (autism or ADHD) vs neither.
pub(crate) fn stage1_target(label: Label) -> bool {
    label.has_condition()
}

/// Autism vs ADHD; only meaningful for labels with a condition.
pub(crate) fn stage2_target(label: Label) -> bool {
    label == Label::Autism
}

/// Independent seed for sub-task `stream` of a run seeded with `seed`.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng.next_u64()
}
