//! Structural validation of a registry.
//!
//! Every rule produces diagnostics rather than failing, so one run reports
//! everything. Output order is deterministic: ontology, instruments, Rosetta
//! questions, crosswalk links in file order, then coverage warnings.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::crosswalk::{CrosswalkLink, SourceKey};
use super::rosetta::check_template;
use super::{Registry, CROSSWALK_FILE, ONTOLOGY_FILE, ROSETTA_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    OntologyRoots,
    DuplicateInstrument,
    DuplicateRosetta,
    UnknownLeaf,
    Template,
    Codes,
    DanglingSource,
    DanglingRosetta,
    ManyToOne,
    DuplicateLink,
    LeafAgreement,
    AnswerTotality,
    AnswerRange,
    AnswerMonotone,
    MinimalCode,
    UnmappedQuestion,
    UnusedRosetta,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::OntologyRoots => "ontology-roots",
            Rule::DuplicateInstrument => "duplicate-instrument",
            Rule::DuplicateRosetta => "duplicate-rosetta",
            Rule::UnknownLeaf => "unknown-leaf",
            Rule::Template => "template",
            Rule::Codes => "codes",
            Rule::DanglingSource => "dangling-source",
            Rule::DanglingRosetta => "dangling-rosetta",
            Rule::ManyToOne => "many-to-one",
            Rule::DuplicateLink => "duplicate-link",
            Rule::LeafAgreement => "leaf-agreement",
            Rule::AnswerTotality => "answer-totality",
            Rule::AnswerRange => "answer-range",
            Rule::AnswerMonotone => "answer-monotone",
            Rule::MinimalCode => "minimal-code",
            Rule::UnmappedQuestion => "unmapped-question",
            Rule::UnusedRosetta => "unused-rosetta",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Rule::UnmappedQuestion | Rule::UnusedRosetta => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: Rule,
    pub severity: Severity,
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn new(rule: Rule, file: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            rule,
            severity: rule.severity(),
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: ", self.file, line)?,
            None => write!(f, "{}: ", self.file)?,
        }
        write!(f, "{}[{}]: {}", self.severity, self.rule, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count()
    }

    pub fn warning_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Warning)
            .count()
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.diagnostics.iter().any(|d| d.rule == rule)
    }

    pub fn by_rule(&self, rule: Rule) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(move |d| d.rule == rule)
    }

    /// One diagnostic per line followed by a summary line.
    pub fn to_text(&self) -> String {
        let mut out: String = self.diagnostics.iter().map(|d| format!("{d}\n")).collect();
        out.push_str(&format!(
            "{} errors, {} warnings\n",
            self.error_count(),
            self.warning_count()
        ));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.diagnostics).unwrap_or_else(|_| "[]".into());
        s.push('\n');
        s
    }
}

/// Runs every structural rule over `registry`.
pub fn validate(registry: &Registry) -> ValidationReport {
    let mut out = Vec::new();
    let ontology = registry.ontology();

    if !ontology.has_standard_roots() {
        let found: Vec<&str> = ontology.roots().map(|r| ontology.node(r).name.as_str()).collect();
        out.push(Diagnostic::new(
            Rule::OntologyRoots,
            ONTOLOGY_FILE,
            None,
            format!("level-1 domains must be Cognitive, Motor, Somatic; found {found:?}"),
        ));
    }

    let mut versions = HashSet::new();
    for inst in registry.instruments() {
        if !versions.insert((inst.name.as_str(), inst.version.as_str())) {
            out.push(Diagnostic::new(
                Rule::DuplicateInstrument,
                &inst.origin,
                None,
                format!("{} is defined more than once", inst.label()),
            ));
        }
        for q in &inst.questions {
            if ontology.resolve(&q.leaf).is_none() {
                out.push(Diagnostic::new(
                    Rule::UnknownLeaf,
                    &inst.origin,
                    Some(q.line),
                    format!("question {} uses unknown leaf {}", q.id, q.leaf),
                ));
            }
        }
    }

    let mut ids = HashSet::new();
    for r in registry.rosetta_questions() {
        let line = Some(r.line);
        if !ids.insert(r.id.as_str()) {
            out.push(Diagnostic::new(
                Rule::DuplicateRosetta,
                ROSETTA_FILE,
                line,
                format!("{} is defined more than once", r.id),
            ));
        }
        if ontology.resolve(&r.leaf).is_none() {
            out.push(Diagnostic::new(
                Rule::UnknownLeaf,
                ROSETTA_FILE,
                line,
                format!("{} uses unknown leaf {}", r.id, r.leaf),
            ));
        }
        if let Err(e) = check_template(&r.template) {
            out.push(Diagnostic::new(
                Rule::Template,
                ROSETTA_FILE,
                line,
                format!("{}: {e}", r.id),
            ));
        }
        let contiguous = r.codes.iter().enumerate().all(|(i, c)| c.code as usize == i + 1);
        if r.codes.len() < 2 || !contiguous {
            out.push(Diagnostic::new(
                Rule::Codes,
                ROSETTA_FILE,
                line,
                format!("{} needs at least 2 codes numbered from 1", r.id),
            ));
        }
    }

    out.extend(check_links(&registry.crosswalk().links, registry, CROSSWALK_FILE).diagnostics);

    let mapped: HashSet<&SourceKey> = registry.crosswalk().links.iter().map(|l| &l.source).collect();
    for inst in registry.instruments() {
        for q in &inst.questions {
            let key = SourceKey::new(&inst.name, &inst.version, &q.id);
            if !mapped.contains(&key) {
                out.push(Diagnostic::new(
                    Rule::UnmappedQuestion,
                    &inst.origin,
                    Some(q.line),
                    format!("{key} is not mapped to a Rosetta question"),
                ));
            }
        }
    }
    let targeted: HashSet<&str> = registry
        .crosswalk()
        .links
        .iter()
        .map(|l| l.rosetta_id.as_str())
        .collect();
    for r in registry.rosetta_questions() {
        if !targeted.contains(r.id.as_str()) {
            out.push(Diagnostic::new(
                Rule::UnusedRosetta,
                ROSETTA_FILE,
                Some(r.line),
                format!("{} has no mapped source questions", r.id),
            ));
        }
    }

    ValidationReport { diagnostics: out }
}

/// Crosswalk rules for `links` against the instruments and Rosetta questions
/// of `registry` (its own crosswalk is ignored).
pub(crate) fn check_links(links: &[CrosswalkLink], registry: &Registry, file: &str) -> ValidationReport {
    let mut out = Vec::new();
    let mut first_target: HashMap<&SourceKey, &str> = HashMap::new();

    for link in links {
        let at = Some(link.line);
        let source = registry.source_question(&link.source);
        let target = registry.rosetta(&link.rosetta_id);

        if source.is_none() {
            let what = if registry
                .instrument(&link.source.instrument, &link.source.version)
                .is_none()
            {
                "instrument version"
            } else {
                "question"
            };
            out.push(Diagnostic::new(
                Rule::DanglingSource,
                file,
                at,
                format!("unknown {what} for {}", link.source),
            ));
        }
        if target.is_none() {
            out.push(Diagnostic::new(
                Rule::DanglingRosetta,
                file,
                at,
                format!("unknown Rosetta question {}", link.rosetta_id),
            ));
        }

        match first_target.get(&link.source) {
            Some(prev) if *prev != link.rosetta_id => out.push(Diagnostic::new(
                Rule::ManyToOne,
                file,
                at,
                format!("{} is mapped to both {} and {}", link.source, prev, link.rosetta_id),
            )),
            Some(_) => out.push(Diagnostic::new(
                Rule::DuplicateLink,
                file,
                at,
                format!("{} is mapped to {} more than once", link.source, link.rosetta_id),
            )),
            None => {
                first_target.insert(&link.source, &link.rosetta_id);
            }
        }

        let (Some(source), Some(target)) = (source, target) else {
            continue;
        };
        if source.leaf != target.leaf {
            out.push(Diagnostic::new(
                Rule::LeafAgreement,
                file,
                at,
                format!(
                    "{} is on leaf {} but {} is on {}",
                    link.source, source.leaf, target.id, target.leaf
                ),
            ));
        }
        let choices = source.scale.len();
        if !link.answers.is_total_over(choices) {
            out.push(Diagnostic::new(
                Rule::AnswerTotality,
                file,
                at,
                format!("answer map {} must cover exactly choices 1..={choices}", link.answers),
            ));
        }
        let bad = link.answers.out_of_range(target.code_count());
        if !bad.is_empty() {
            out.push(Diagnostic::new(
                Rule::AnswerRange,
                file,
                at,
                format!("codes {bad:?} are outside 1..={} of {}", target.code_count(), target.id),
            ));
        }
        if !link.answers.is_monotone() {
            out.push(Diagnostic::new(
                Rule::AnswerMonotone,
                file,
                at,
                format!("answer map {} decreases with choice severity", link.answers),
            ));
        }
        if target.code_count() > choices {
            out.push(Diagnostic::new(
                Rule::MinimalCode,
                file,
                at,
                format!(
                    "{} has {} codes but {} offers only {choices} choices",
                    target.id,
                    target.code_count(),
                    link.source
                ),
            ));
        }
    }
    ValidationReport { diagnostics: out }
}
