//! Per-leaf fusion statistics and the instrument overlap matrix.
//!
//! Counting is at instrument level: CBCL 1.5-5 and CBCL 6-18 both count as
//! "CBCL". Only resolved crosswalk links (source and target both exist) are
//! counted.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

/// Source-question total quoted in prose for the canonical registry. The
/// per-leaf table sums to 1277; both are reported.
pub const REFERENCE_SOURCE_TOTAL: usize = 1274;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafFusionStat {
    /// Ancestors of the leaf, `/`-joined.
    pub base: String,
    pub leaf: String,
    pub instruments: usize,
    pub instrument_questions: usize,
    pub rosetta_questions: usize,
}

/// One row per ontology leaf, in ontology order.
pub fn leaf_stats(registry: &Registry) -> Vec<LeafFusionStat> {
    let ontology = registry.ontology();
    let mut rows: Vec<LeafFusionStat> = Vec::new();
    let mut index = BTreeMap::new();
    for id in ontology.leaves() {
        let path = ontology.path(id);
        index.insert(path.clone(), rows.len());
        rows.push(LeafFusionStat {
            base: path.base(),
            leaf: path.leaf().to_string(),
            instruments: 0,
            instrument_questions: 0,
            rosetta_questions: 0,
        });
    }

    let mut instruments: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); rows.len()];
    let mut seen = BTreeSet::new();
    for q in registry.rosetta_questions() {
        if !seen.insert(q.id.as_str()) {
            continue;
        }
        if let Some(&i) = index.get(&q.leaf) {
            rows[i].rosetta_questions += 1;
        }
    }
    for r in registry.resolved_links() {
        if let Some(&i) = index.get(&r.target.leaf) {
            rows[i].instrument_questions += 1;
            instruments[i].insert(r.link.source.instrument.as_str());
        }
    }
    for (row, set) in rows.iter_mut().zip(&instruments) {
        row.instruments = set.len();
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub source_questions: usize,
    pub rosetta_questions: usize,
    pub mean_instruments_per_rosetta: f64,
    pub mean_sources_per_rosetta: f64,
    /// Externally quoted source total, kept next to the computed one.
    pub reference_source_questions: usize,
}

impl GlobalStats {
    pub fn discrepancy(&self) -> bool {
        self.source_questions != self.reference_source_questions
    }
}

pub fn global_stats(registry: &Registry) -> GlobalStats {
    global_stats_with_reference(registry, REFERENCE_SOURCE_TOTAL)
}

pub fn global_stats_with_reference(registry: &Registry, reference: usize) -> GlobalStats {
    let sets = instrument_sets(registry);
    let rosetta = sets.len();
    let sources = registry.resolved_links().count();
    let instrument_sum: usize = sets.values().map(BTreeSet::len).sum();
    let mean = |x: usize| if rosetta == 0 { 0.0 } else { x as f64 / rosetta as f64 };
    GlobalStats {
        source_questions: sources,
        rosetta_questions: rosetta,
        mean_instruments_per_rosetta: mean(instrument_sum),
        mean_sources_per_rosetta: mean(sources),
        reference_source_questions: reference,
    }
}

/// Distinct Rosetta id -> instruments with at least one mapped source.
fn instrument_sets(registry: &Registry) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut sets: BTreeMap<&str, BTreeSet<&str>> = registry
        .rosetta_questions()
        .iter()
        .map(|q| (q.id.as_str(), BTreeSet::new()))
        .collect();
    for r in registry.resolved_links() {
        if let Some(set) = sets.get_mut(r.target.id.as_str()) {
            set.insert(r.link.source.instrument.as_str());
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub instruments: Vec<String>,
    /// Off-diagonal: Rosetta questions shared by both instruments.
    /// Diagonal: Rosetta questions mapped from that instrument only.
    pub cells: Vec<Vec<usize>>,
    /// Rosetta questions with at least one source in each instrument.
    pub totals: Vec<usize>,
}

impl OverlapMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<usize> {
        let i = self.instruments.iter().position(|x| x == a)?;
        let j = self.instruments.iter().position(|x| x == b)?;
        Some(self.cells[i][j])
    }
}

pub fn overlap_matrix(registry: &Registry) -> OverlapMatrix {
    let instruments = registry.instrument_names();
    let pos: BTreeMap<&str, usize> = instruments.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let n = instruments.len();
    let mut cells = vec![vec![0; n]; n];
    let mut totals = vec![0; n];
    for set in instrument_sets(registry).values() {
        let idx: Vec<usize> = set.iter().filter_map(|name| pos.get(name).copied()).collect();
        for &i in &idx {
            totals[i] += 1;
            for &j in &idx {
                if i != j {
                    cells[i][j] += 1;
                }
            }
        }
        if let [only] = idx[..] {
            cells[only][only] += 1;
        }
    }
    OverlapMatrix {
        instruments,
        cells,
        totals,
    }
}

pub const LEAF_STATS_FILE: &str = "leaf_stats.csv";
pub const GLOBAL_STATS_FILE: &str = "global_stats.csv";
pub const OVERLAP_FILE: &str = "overlap_matrix.csv";
pub const OVERLAP_LONG_FILE: &str = "overlap_long.csv";

pub fn leaf_stats_csv(stats: &[LeafFusionStat]) -> String {
    let mut out = String::from("base,leaf,instruments,instrument_questions,rosetta_questions\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&s.base),
            csv_field(&s.leaf),
            s.instruments,
            s.instrument_questions,
            s.rosetta_questions
        ));
    }
    out
}

pub fn global_stats_csv(g: &GlobalStats) -> String {
    format!(
        "metric,value\n\
         source_questions,{}\n\
         reference_source_questions,{}\n\
         source_total_discrepancy,{}\n\
         rosetta_questions,{}\n\
         mean_instruments_per_rosetta,{:.6}\n\
         mean_sources_per_rosetta,{:.6}\n",
        g.source_questions,
        g.reference_source_questions,
        g.discrepancy(),
        g.rosetta_questions,
        g.mean_instruments_per_rosetta,
        g.mean_sources_per_rosetta
    )
}

pub fn overlap_csv(m: &OverlapMatrix) -> String {
    let mut out = String::from("instrument");
    for name in &m.instruments {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push_str(",total\n");
    for (i, name) in m.instruments.iter().enumerate() {
        out.push_str(&csv_field(name));
        for v in &m.cells[i] {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", m.totals[i]));
    }
    out
}

/// `row,col,value` for heat-map tools.
pub fn overlap_long_csv(m: &OverlapMatrix) -> String {
    let mut out = String::from("row,col,value\n");
    for (i, a) in m.instruments.iter().enumerate() {
        for (j, b) in m.instruments.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", csv_field(a), csv_field(b), m.cells[i][j]));
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes the four report files into `out` and returns their names.
pub fn emit_reports(
    stats: &[LeafFusionStat],
    global: &GlobalStats,
    matrix: &OverlapMatrix,
    out: impl AsRef<Path>,
) -> Result<Vec<&'static str>> {
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = [
        (LEAF_STATS_FILE, leaf_stats_csv(stats)),
        (GLOBAL_STATS_FILE, global_stats_csv(global)),
        (OVERLAP_FILE, overlap_csv(matrix)),
        (OVERLAP_LONG_FILE, overlap_long_csv(matrix)),
    ];
    for (name, text) in &files {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.iter().map(|(n, _)| *n).collect())
}
