//! Synthetic labeled cohorts.
//!
//! Each subject is assigned one or two instrument versions. For every Rosetta
//! question those versions reach, a code is drawn from the subject's class
//! distribution and each linked source question is answered with the lowest
//! choice mapping to that code. A code that some linked source cannot express
//! is redrawn a bounded number of times, after which the question is left
//! unanswered.
//!
//! Subject `i` draws from its own ChaCha stream `i` of the master seed, so
//! output does not depend on scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{AssessmentRecord, Label};
use crate::registry::{AnswerMap, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub autism: usize,
    pub adhd: usize,
    pub neither: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.autism + self.adhd + self.neither
    }

    fn label_of(&self, i: usize) -> Label {
        if i < self.autism {
            Label::Autism
        } else if i < self.autism + self.adhd {
            Label::Adhd
        } else {
            Label::Neither
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub instrument: String,
    pub version: String,
    pub weight: f64,
}

/// Per-class code probabilities of one Rosetta question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistributions {
    pub autism: Vec<f64>,
    pub adhd: Vec<f64>,
    pub neither: Vec<f64>,
}

impl ClassDistributions {
    fn get(&self, label: Label) -> &[f64] {
        match label {
            Label::Autism => &self.autism,
            Label::Adhd => &self.adhd,
            Label::Neither => &self.neither,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub class_counts: ClassCounts,
    /// 0 makes every class distribution uniform.
    pub effect_size: f64,
    pub seed: u64,
    pub coverage: Vec<CoverageEntry>,
    /// Inclusive range of versions per subject.
    #[serde(default = "default_versions")]
    pub versions_per_subject: (usize, usize),
    /// Explicit distributions by Rosetta id; others follow `effect_size`.
    #[serde(default)]
    pub distributions: BTreeMap<String, ClassDistributions>,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_versions() -> (usize, usize) {
    (1, 2)
}

fn default_retries() -> usize {
    8
}

/// Instrument versions of the case-study cohort.
pub const CASE_STUDY_VERSIONS: &[(&str, &str)] = &[
    ("ADI-R", "Interview"),
    ("ADOS-2", "Toddler"),
    ("ADOS-2", "Module 1"),
    ("ADOS-2", "Module 2"),
    ("ADOS-2", "Module 3"),
    ("ADOS-2", "Module 4"),
    ("BASC-3", "Preschool"),
    ("BASC-3", "Child"),
    ("BASC-3", "Adolescent"),
    ("CBCL", "1.5-5"),
    ("CBCL", "6-18"),
    ("Conners 3", "Parent"),
    ("SRS-2", "Preschool"),
    ("SRS-2", "School-Age"),
    ("SRS-2", "Adult"),
];

impl GeneratorSpec {
    /// Case-study class counts over the fifteen case-study versions. Each of
    /// the six instruments gets equal weight, split evenly across its versions.
    pub fn case_study(effect_size: f64, seed: u64) -> Self {
        Self {
            class_counts: ClassCounts {
                autism: 2941,
                adhd: 343,
                neither: 447,
            },
            effect_size,
            seed,
            coverage: CASE_STUDY_VERSIONS
                .iter()
                .map(|(i, v)| CoverageEntry {
                    instrument: i.to_string(),
                    version: v.to_string(),
                    weight: 1.0 / CASE_STUDY_VERSIONS.iter().filter(|(j, _)| j == i).count() as f64,
                })
                .collect(),
            versions_per_subject: default_versions(),
            distributions: BTreeMap::new(),
            max_retries: default_retries(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if !(self.effect_size >= 0.0 && self.effect_size.is_finite()) {
            return Err(Error::Invalid(format!(
                "effect size {} must be finite and >= 0",
                self.effect_size
            )));
        }
        if self.coverage.is_empty() {
            return Err(Error::Invalid("coverage plan is empty".into()));
        }
        for c in &self.coverage {
            if registry.instrument(&c.instrument, &c.version).is_none() {
                return Err(Error::UnknownInstrument {
                    instrument: c.instrument.clone(),
                    version: c.version.clone(),
                });
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Invalid(format!(
                    "coverage weight for {} / {} must be positive",
                    c.instrument, c.version
                )));
            }
        }
        let (lo, hi) = self.versions_per_subject;
        if lo < 1 || lo > hi || hi > self.coverage.len() {
            return Err(Error::Invalid(format!(
                "versions per subject ({lo}, {hi}) must satisfy 1 <= min <= max <= {}",
                self.coverage.len()
            )));
        }
        for (id, d) in &self.distributions {
            let q = registry.rosetta(id).ok_or_else(|| Error::UnknownRosetta(id.clone()))?;
            for p in [&d.autism, &d.adhd, &d.neither] {
                if p.len() != q.code_count() {
                    return Err(Error::Invalid(format!(
                        "{id}: distribution needs {} entries",
                        q.code_count()
                    )));
                }
                if p.iter().any(|&v| v.is_nan() || v < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!(
                        "{id}: distribution must be non-negative and sum to 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Code distribution of Rosetta question number `index` (registry order)
    /// with `codes` codes for class `label`.
    ///
    /// Questions cycle through three profiles by index: autism-specific,
    /// ADHD-specific and general (both conditions). Classes carrying the
    /// trait center on the top code, the others on code 1, with
    /// `p(k) ~ exp(-effect * |k - center|)`.
    pub fn class_distribution(&self, id: &str, index: usize, codes: usize, label: Label) -> Vec<f64> {
        if let Some(d) = self.distributions.get(id) {
            return d.get(label).to_vec();
        }
        let high = matches!(
            (index % 3, label),
            (0, Label::Autism) | (1, Label::Adhd) | (2, Label::Autism) | (2, Label::Adhd)
        );
        let center = if high { codes as f64 } else { 1.0 };
        let w: Vec<f64> = (1..=codes)
            .map(|k| (-self.effect_size * (k as f64 - center).abs()).exp())
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub records: Vec<AssessmentRecord>,
    pub labels: BTreeMap<String, Label>,
    /// Codes drawn per subject for every answered Rosetta question.
    pub sampled: BTreeMap<String, BTreeMap<String, u32>>,
    /// Coverage-plan indices assigned to each subject.
    pub assigned: BTreeMap<String, Vec<usize>>,
}

pub fn subject_id(i: usize) -> String {
    format!("S{i:05}")
}

#[derive(Clone)]
struct Source<'a> {
    question_id: &'a str,
    answers: &'a AnswerMap,
}

/// Generates a cohort. Records are ordered by subject, then coverage order.
pub fn generate(spec: &GeneratorSpec, registry: &Registry) -> Result<SyntheticCohort> {
    spec.validate(registry)?;

    // coverage index -> rosetta position -> linked sources
    let mut by_version: Vec<BTreeMap<usize, Vec<Source>>> = vec![BTreeMap::new(); spec.coverage.len()];
    for (v, c) in spec.coverage.iter().enumerate() {
        for r in registry.resolved_links() {
            let src = &r.link.source;
            if src.instrument == c.instrument && src.version == c.version {
                let pos = registry.rosetta_position(&r.target.id).expect("resolved target");
                by_version[v].entry(pos).or_default().push(Source {
                    question_id: &src.question_id,
                    answers: &r.link.answers,
                });
            }
        }
    }
    let rosetta = registry.rosetta_questions();
    // distributions indexed [position][class]
    let dists: Vec<[Vec<f64>; 3]> = rosetta
        .iter()
        .enumerate()
        .map(|(i, q)| Label::ALL.map(|l| spec.class_distribution(&q.id, i, q.code_count(), l)))
        .collect();
    let weights: Vec<f64> = spec.coverage.iter().map(|c| c.weight).collect();

    let subjects: Vec<_> = (0..spec.class_counts.total())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let label = spec.class_counts.label_of(i);
            let (lo, hi) = spec.versions_per_subject;
            let count = rng.gen_range(lo..=hi);
            let versions = weighted_without_replacement(&mut rng, &weights, count);

            let mut reached: BTreeMap<usize, Vec<(usize, &Source)>> = BTreeMap::new();
            for &v in &versions {
                for (&pos, sources) in &by_version[v] {
                    reached.entry(pos).or_default().extend(sources.iter().map(|s| (v, s)));
                }
            }
            let mut responses: Vec<BTreeMap<String, u32>> = vec![BTreeMap::new(); spec.coverage.len()];
            let mut sampled = BTreeMap::new();
            for (pos, sources) in reached {
                let dist = &dists[pos][label.index()];
                for _attempt in 0..=spec.max_retries {
                    let code = draw(&mut rng, dist);
                    let choices: Option<Vec<u32>> =
                        sources.iter().map(|(_, s)| s.answers.lowest_choice_for(code)).collect();
                    if let Some(choices) = choices {
                        for ((v, s), choice) in sources.iter().zip(choices) {
                            responses[*v].insert(s.question_id.to_string(), choice);
                        }
                        sampled.insert(rosetta[pos].id.clone(), code);
                        break;
                    }
                }
            }
            let id = subject_id(i);
            let records: Vec<AssessmentRecord> = versions
                .iter()
                .map(|&v| {
                    let c = &spec.coverage[v];
                    let mut r = AssessmentRecord::new(&id, &c.instrument, &c.version);
                    r.responses = std::mem::take(&mut responses[v]);
                    r
                })
                .collect();
            (id, label, records, sampled, versions)
        })
        .collect();

    let mut out = SyntheticCohort {
        records: Vec::new(),
        labels: BTreeMap::new(),
        sampled: BTreeMap::new(),
        assigned: BTreeMap::new(),
    };
    for (id, label, mut records, sampled, mut versions) in subjects {
        records.sort_by(|a, b| (&a.instrument, &a.version).cmp(&(&b.instrument, &b.version)));
        versions.sort_unstable();
        out.records.extend(records);
        out.labels.insert(id.clone(), label);
        out.sampled.insert(id.clone(), sampled);
        out.assigned.insert(id, versions);
    }
    Ok(out)
}

/// 1-based code drawn from `dist`.
fn draw(rng: &mut ChaCha8Rng, dist: &[f64]) -> u32 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u32 + 1;
        }
    }
    // rounding left u above the cumulative sum; take the last code with mass
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u32 + 1
}

fn weighted_without_replacement(rng: &mut ChaCha8Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut left: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k.min(weights.len()) {
        let total: f64 = left.iter().map(|&i| weights[i]).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut at = left.len() - 1;
        for (j, &i) in left.iter().enumerate() {
            if u < weights[i] {
                at = j;
                break;
            }
            u -= weights[i];
        }
        picked.push(left.remove(at));
    }
    picked
}

/// Probability that a subject is assigned each coverage entry, by exact
/// enumeration of the sequential weighted draw. Only supports up to two
/// versions per subject.
pub fn assignment_probabilities(spec: &GeneratorSpec) -> Result<Vec<Vec<f64>>> {
    let (lo, hi) = spec.versions_per_subject;
    if hi > 2 {
        return Err(Error::Invalid(
            "exact enumeration supports at most two versions per subject".into(),
        ));
    }
    let w: Vec<f64> = spec.coverage.iter().map(|c| c.weight).collect();
    let total: f64 = w.iter().sum();
    let counts = hi - lo + 1;
    // probability of each assigned set, as (set, p)
    let mut sets = Vec::new();
    for k in lo..=hi {
        let pk = 1.0 / counts as f64;
        if k == 1 {
            for (i, wi) in w.iter().enumerate() {
                sets.push((vec![i], pk * wi / total));
            }
        } else {
            for i in 0..w.len() {
                for j in 0..w.len() {
                    if i != j {
                        sets.push((vec![i, j], pk * w[i] / total * w[j] / (total - w[i])));
                    }
                }
            }
        }
    }
    Ok(sets
        .into_iter()
        .map(|(s, p)| {
            let mut row = vec![0.0; w.len()];
            for i in s {
                row[i] = p;
            }
            row
        })
        .collect())
}

/// Expected fraction of subjects with no source for each Rosetta question
/// (registry order), ignoring retries that run out.
pub fn expected_missingness(spec: &GeneratorSpec, registry: &Registry) -> Result<Vec<(String, f64)>> {
    let sets = assignment_probabilities(spec)?;
    Ok(registry
        .rosetta_questions()
        .iter()
        .map(|q| {
            let covered: Vec<bool> = spec
                .coverage
                .iter()
                .map(|c| {
                    registry.resolved_links().any(|r| {
                        r.target.id == q.id
                            && r.link.source.instrument == c.instrument
                            && r.link.source.version == c.version
                    })
                })
                .collect();
            let p_cover: f64 = sets
                .iter()
                .filter_map(|row| {
                    let p = row.iter().copied().find(|&p| p > 0.0)?;
                    row.iter().zip(&covered).any(|(&x, &c)| x > 0.0 && c).then_some(p)
                })
                .sum();
            (q.id.clone(), 1.0 - p_cover)
        })
        .collect())
}
