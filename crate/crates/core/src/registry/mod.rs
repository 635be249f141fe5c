//! Ontology, instruments, Rosetta questions and the crosswalk between them.
//!
//! A [`Registry`] is immutable once built. It is usually loaded from a
//! directory holding `ontology.txt`, `instruments/*.tsv`, `rosetta.tsv` and
//! `crosswalk.tsv`; [`validate`] then checks every structural rule of the
//! mapping and reports diagnostics without failing.

mod crosswalk;
mod instrument;
mod ontology;
mod rosetta;
mod validate;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

pub use crosswalk::{AnswerMap, Crosswalk, CrosswalkLink, SourceKey};
pub use instrument::{
    parse_instrument, AnswerChoice, AnswerScale, InstrumentVersion, Reporter, ScaleKind, SourceQuestion,
};
pub use ontology::{LeafPath, NodeId, OntologyNode, OntologyTree, MAX_DEPTH, ROOT_DOMAINS};
pub use rosetta::{
    check_template, parse_rosetta, render_template, rosetta_to_text, Gender, RosettaCode, RosettaQuestion,
};
pub use validate::{validate, Diagnostic, Rule, Severity, ValidationReport};

use crate::error::{Error, Result};

pub const ONTOLOGY_FILE: &str = "ontology.txt";
pub const INSTRUMENTS_DIR: &str = "instruments";
pub const ROSETTA_FILE: &str = "rosetta.tsv";
pub const CROSSWALK_FILE: &str = "crosswalk.tsv";

/// Parses an ontology file.
pub fn parse_ontology(source: &str) -> std::result::Result<OntologyTree, crate::ParseError> {
    OntologyTree::parse(source)
}

/// Parses crosswalk rows and checks them against `registry`'s instruments and
/// Rosetta questions. Any error-severity diagnostic fails the parse.
pub fn parse_crosswalk(source: &str, registry: &Registry) -> Result<Crosswalk> {
    let crosswalk = Crosswalk::parse(source).map_err(|e| e.in_file(CROSSWALK_FILE))?;
    let report = validate::check_links(&crosswalk.links, registry, CROSSWALK_FILE);
    if report.error_count() > 0 {
        return Err(Error::Validation(report));
    }
    Ok(crosswalk)
}

#[derive(Debug, Clone)]
pub struct Registry {
    ontology: OntologyTree,
    instruments: Vec<InstrumentVersion>,
    rosetta: Vec<RosettaQuestion>,
    crosswalk: Crosswalk,
    instrument_index: HashMap<(String, String), usize>,
    rosetta_index: HashMap<String, usize>,
    link_index: HashMap<SourceKey, usize>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new(OntologyTree::default(), Vec::new(), Vec::new(), Crosswalk::default())
    }
}

impl Registry {
    /// Builds lookup indexes. Duplicates are kept (first occurrence wins in
    /// lookups) so the validator can report them.
    pub fn new(
        ontology: OntologyTree,
        instruments: Vec<InstrumentVersion>,
        rosetta: Vec<RosettaQuestion>,
        crosswalk: Crosswalk,
    ) -> Self {
        let mut instrument_index = HashMap::new();
        for (i, inst) in instruments.iter().enumerate() {
            instrument_index
                .entry((inst.name.clone(), inst.version.clone()))
                .or_insert(i);
        }
        let mut rosetta_index = HashMap::new();
        for (i, q) in rosetta.iter().enumerate() {
            rosetta_index.entry(q.id.clone()).or_insert(i);
        }
        let mut link_index = HashMap::new();
        for (i, link) in crosswalk.links.iter().enumerate() {
            link_index.entry(link.source.clone()).or_insert(i);
        }
        Self {
            ontology,
            instruments,
            rosetta,
            crosswalk,
            instrument_index,
            rosetta_index,
            link_index,
        }
    }

    /// Loads a registry directory. Files are parsed but the crosswalk is not
    /// rule-checked; call [`validate`] for that.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |path: PathBuf| fs::read_to_string(&path).map_err(|e| Error::io(path, e));

        let ontology = OntologyTree::parse(&read(dir.join(ONTOLOGY_FILE))?).map_err(|e| e.in_file(ONTOLOGY_FILE))?;

        let inst_dir = dir.join(INSTRUMENTS_DIR);
        let mut files: Vec<PathBuf> = fs::read_dir(&inst_dir)
            .map_err(|e| Error::io(&inst_dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "tsv"))
            .collect();
        files.sort();
        let mut instruments = Vec::with_capacity(files.len());
        for path in files {
            let name = format!(
                "{INSTRUMENTS_DIR}/{}",
                path.file_name().unwrap_or_default().to_string_lossy()
            );
            let mut inst = parse_instrument(&read(path)?, &ontology).map_err(|e| e.in_file(name.clone()))?;
            inst.origin = name;
            instruments.push(inst);
        }

        let rosetta = parse_rosetta(&read(dir.join(ROSETTA_FILE))?, &ontology).map_err(|e| e.in_file(ROSETTA_FILE))?;
        let crosswalk = Crosswalk::parse(&read(dir.join(CROSSWALK_FILE))?).map_err(|e| e.in_file(CROSSWALK_FILE))?;

        Ok(Self::new(ontology, instruments, rosetta, crosswalk))
    }

    /// Writes the registry in the directory layout read by [`Registry::load_dir`].
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let inst_dir = dir.join(INSTRUMENTS_DIR);
        fs::create_dir_all(&inst_dir).map_err(|e| Error::io(&inst_dir, e))?;
        let write = |path: PathBuf, text: String| fs::write(&path, text).map_err(|e| Error::io(path, e));
        write(dir.join(ONTOLOGY_FILE), self.ontology.to_text())?;
        for (i, inst) in self.instruments.iter().enumerate() {
            write(inst_dir.join(format!("{i:03}.tsv")), inst.to_text())?;
        }
        write(dir.join(ROSETTA_FILE), rosetta_to_text(&self.rosetta))?;
        write(dir.join(CROSSWALK_FILE), self.crosswalk.to_text())?;
        Ok(())
    }

    pub fn ontology(&self) -> &OntologyTree {
        &self.ontology
    }

    pub fn instruments(&self) -> &[InstrumentVersion] {
        &self.instruments
    }

    pub fn rosetta_questions(&self) -> &[RosettaQuestion] {
        &self.rosetta
    }

    pub fn crosswalk(&self) -> &Crosswalk {
        &self.crosswalk
    }

    pub fn instrument(&self, name: &str, version: &str) -> Option<&InstrumentVersion> {
        self.instrument_index
            .get(&(name.to_string(), version.to_string()))
            .map(|&i| &self.instruments[i])
    }

    pub fn source_question(&self, key: &SourceKey) -> Option<&SourceQuestion> {
        self.instrument(&key.instrument, &key.version)?
            .question(&key.question_id)
    }

    pub fn rosetta(&self, id: &str) -> Option<&RosettaQuestion> {
        self.rosetta_index.get(id).map(|&i| &self.rosetta[i])
    }

    /// Position of a Rosetta question in file order.
    pub fn rosetta_position(&self, id: &str) -> Option<usize> {
        self.rosetta_index.get(id).copied()
    }

    /// The first crosswalk link for a source question.
    pub fn link_for(&self, key: &SourceKey) -> Option<&CrosswalkLink> {
        self.link_index.get(key).map(|&i| &self.crosswalk.links[i])
    }

    /// Links whose source question and Rosetta target both exist, with
    /// duplicate source links dropped (first wins).
    pub fn resolved_links(&self) -> impl Iterator<Item = ResolvedLink<'_>> {
        self.crosswalk
            .links
            .iter()
            .enumerate()
            .filter(|(i, l)| self.link_index.get(&l.source) == Some(i))
            .filter_map(|(_, link)| {
                Some(ResolvedLink {
                    link,
                    source: self.source_question(&link.source)?,
                    target: self.rosetta(&link.rosetta_id)?,
                })
            })
    }

    /// Distinct instrument names in first-appearance order.
    pub fn instrument_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for inst in &self.instruments {
            if !names.contains(&inst.name) {
                names.push(inst.name.clone());
            }
        }
        names
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedLink<'a> {
    pub link: &'a CrosswalkLink,
    pub source: &'a SourceQuestion,
    pub target: &'a RosettaQuestion,
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn lookups_resolve() {
        let reg = small_registry();
        assert!(reg.instrument("CBCL", "6-18").is_some());
        assert!(reg.instrument("CBCL", "1.5-5").is_none());
        let key = SourceKey::new("SRS-2", "School-Age", "24");
        assert_eq!(reg.source_question(&key).unwrap().scale.len(), 4);
        assert_eq!(reg.link_for(&key).unwrap().rosetta_id, "R-adaptability-1");
        assert_eq!(reg.resolved_links().count(), 5);
        assert_eq!(reg.instrument_names(), vec!["SRS-2", "CBCL"]);
        assert_eq!(reg.rosetta_position("R-fine-1"), Some(2));
    }

    #[test]
    fn parse_crosswalk_against_registry() {
        let reg = small_registry();
        let ok = parse_crosswalk("CBCL\t6-18\t21\tR-adaptability-1\t1:1,2:2,3:3\n", &reg).unwrap();
        assert_eq!(ok.links.len(), 1);

        // 3-choice source into a 4-code question
        let err = parse_crosswalk("CBCL\t6-18\t21\tR-fine-1\t1:1,2:2,3:3\n", &reg).unwrap_err();
        let Error::Validation(report) = err else {
            panic!("expected validation error")
        };
        assert!(report.has_rule(Rule::MinimalCode));

        let err = parse_crosswalk("CBCL\t6-18\t99\tR-nope-1\t1:1\n", &reg).unwrap_err();
        let Error::Validation(report) = err else { panic!() };
        assert!(report.has_rule(Rule::DanglingSource));
        assert!(report.has_rule(Rule::DanglingRosetta));
    }

    #[test]
    fn directory_round_trip() {
        let reg = small_registry();
        let dir = tempfile::tempdir().unwrap();
        reg.write_dir(dir.path()).unwrap();
        let back = Registry::load_dir(dir.path()).unwrap();
        assert_eq!(back.ontology(), reg.ontology());
        assert_eq!(back.crosswalk().to_text(), reg.crosswalk().to_text());
        assert_eq!(
            rosetta_to_text(back.rosetta_questions()),
            rosetta_to_text(reg.rosetta_questions())
        );
        for (a, b) in back.instruments().iter().zip(reg.instruments()) {
            assert_eq!(a.to_text(), b.to_text());
        }
    }

    #[test]
    fn load_reports_file_and_line() {
        let reg = small_registry();
        let dir = tempfile::tempdir().unwrap();
        reg.write_dir(dir.path()).unwrap();
        fs::write(dir.path().join(CROSSWALK_FILE), "ok\tbut\ttoo\tfew\n").unwrap();
        match Registry::load_dir(dir.path()).unwrap_err() {
            Error::Parse(e) => {
                assert_eq!(e.file.as_deref(), Some(CROSSWALK_FILE));
                assert_eq!(e.line, 1);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
