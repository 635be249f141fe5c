//! Source-question to Rosetta-question links with per-link answer maps.
//!
//! File rows: `instrument <TAB> version <TAB> question_id <TAB> rosetta_id <TAB> answer_map`
//! where the answer map reads `1:1,2:2,3:2,4:3` (choice index to code).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceKey {
    pub instrument: String,
    pub version: String,
    pub question_id: String,
}

impl SourceKey {
    pub fn new(instrument: impl Into<String>, version: impl Into<String>, question_id: impl Into<String>) -> Self {
        Self {
            instrument: instrument.into(),
            version: version.into(),
            question_id: question_id.into(),
        }
    }
}

impl fmt::Display for SourceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} #{}", self.instrument, self.version, self.question_id)
    }
}

/// Choice index to Rosetta code. Stored as written; totality, range and
/// monotonicity are checked by the validator against the linked scale.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerMap(BTreeMap<u32, u32>);

impl AnswerMap {
    pub fn new(entries: impl IntoIterator<Item = (u32, u32)>) -> Self {
        Self(entries.into_iter().collect())
    }

    /// `choice -> choice` for `1..=n`.
    pub fn identity(n: u32) -> Self {
        Self((1..=n).map(|i| (i, i)).collect())
    }

    pub fn get(&self, choice: u32) -> Option<u32> {
        self.0.get(&choice).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the domain is exactly `1..=choices`.
    pub fn is_total_over(&self, choices: usize) -> bool {
        self.0.len() == choices && self.0.keys().copied().eq(1..=choices as u32)
    }

    /// Non-decreasing codes in ascending choice order.
    pub fn is_monotone(&self) -> bool {
        self.0.values().zip(self.0.values().skip(1)).all(|(a, b)| a <= b)
    }

    /// Codes, in choice order, that are outside `1..=codes`.
    pub fn out_of_range(&self, codes: usize) -> Vec<u32> {
        self.0
            .values()
            .copied()
            .filter(|&c| c < 1 || c as usize > codes)
            .collect()
    }

    /// Smallest choice index mapping to `code`.
    pub fn lowest_choice_for(&self, code: u32) -> Option<u32> {
        self.0.iter().find(|(_, &v)| v == code).map(|(&k, _)| k)
    }
}

impl FromStr for AnswerMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = BTreeMap::new();
        for entry in s.split(',') {
            let (choice, code) = entry
                .split_once(':')
                .ok_or_else(|| format!("answer map entry {entry:?} is not `choice:code`"))?;
            let choice: u32 = choice
                .trim()
                .parse()
                .map_err(|_| format!("choice {choice:?} is not an integer"))?;
            let code: u32 = code
                .trim()
                .parse()
                .map_err(|_| format!("code {code:?} is not an integer"))?;
            if map.insert(choice, code).is_some() {
                return Err(format!("choice {choice} mapped twice"));
            }
        }
        Ok(Self(map))
    }
}

impl fmt::Display for AnswerMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{k}:{v}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosswalkLink {
    pub source: SourceKey,
    pub rosetta_id: String,
    pub answers: AnswerMap,
    #[serde(skip)]
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crosswalk {
    pub links: Vec<CrosswalkLink>,
}

impl Crosswalk {
    /// Syntax-only parse. Cross-references and mapping rules are checked by
    /// [`super::validate`]; use [`super::parse_crosswalk`] for both at once.
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let mut links = Vec::new();
        for (index, raw) in source.lines().enumerate() {
            let line_no = index + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(ParseError::new(
                    line_no,
                    format!("expected 5 tab-separated fields, found {}", fields.len()),
                ));
            }
            if fields[..4].iter().any(|f| f.is_empty()) {
                return Err(ParseError::new(line_no, "empty field"));
            }
            let answers: AnswerMap = fields[4].parse().map_err(|e| ParseError::new(line_no, e))?;
            links.push(CrosswalkLink {
                source: SourceKey::new(fields[0], fields[1], fields[2]),
                rosetta_id: fields[3].to_string(),
                answers,
                line: line_no,
            });
        }
        Ok(Self { links })
    }

    pub fn to_text(&self) -> String {
        self.links
            .iter()
            .map(|l| {
                format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    l.source.instrument, l.source.version, l.source.question_id, l.rosetta_id, l.answers
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_map_parse_and_display() {
        let m: AnswerMap = "1:1,2:2,3:2,4:3".parse().unwrap();
        assert_eq!(m.get(3), Some(2));
        assert_eq!(m.to_string(), "1:1,2:2,3:2,4:3");
        assert!(m.is_total_over(4));
        assert!(!m.is_total_over(3));
        assert!(m.is_monotone());
        assert_eq!(m.lowest_choice_for(2), Some(2));
        assert_eq!(m.lowest_choice_for(4), None);
        assert!("1:1,1:2".parse::<AnswerMap>().is_err());
        assert!("1-1".parse::<AnswerMap>().is_err());
        assert!("".parse::<AnswerMap>().is_err());
    }

    #[test]
    fn monotone_and_range_checks() {
        let inverted = AnswerMap::new([(1, 1), (2, 3), (3, 2)]);
        assert!(!inverted.is_monotone());
        assert_eq!(inverted.out_of_range(2), vec![3]);
        assert!(AnswerMap::identity(3).is_monotone());
        let gap = AnswerMap::new([(1, 1), (3, 2)]);
        assert!(!gap.is_total_over(2));
        assert!(!gap.is_total_over(3));
    }

    #[test]
    fn parses_rows() {
        let cw = Crosswalk::parse("# header\nSRS-2\tSchool-Age\t24\tR-adaptability-1\t1:1,2:2,3:3,4:3\n").unwrap();
        assert_eq!(cw.links.len(), 1);
        assert_eq!(cw.links[0].line, 2);
        assert_eq!(cw.links[0].source.question_id, "24");
        assert_eq!(
            Crosswalk::parse(&cw.to_text()).unwrap().links[0].answers,
            cw.links[0].answers
        );
        assert!(Crosswalk::parse("a\tb\tc\td\n").is_err());
        assert!(Crosswalk::parse("a\tb\tc\td\t1:x\n").is_err());
    }
}
