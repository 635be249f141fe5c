//! Fixtures, random case generators and brute-force oracles shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rosetta_core::fusion::{AssessmentRecord, ConflictPolicy};
use rosetta_core::registry::{
    AnswerMap, AnswerScale, Crosswalk, CrosswalkLink, InstrumentVersion, OntologyTree, Registry, Reporter, RosettaCode,
    RosettaQuestion, Rule, ScaleKind, SourceKey, SourceQuestion,
};

pub fn canonical_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/canonical")
}

/// (base, leaf, instruments, instrument questions, rosetta questions), transcribed row by row.
pub const TABLE5: &[(&str, &str, usize, usize, usize)] = &[
    ("Cognitive/Behavioral/Emotional", "Adaptability", 6, 32, 4),
    ("Cognitive/Behavioral/Emotional", "Anger Control", 6, 48, 5),
    ("Cognitive/Behavioral/Emotional", "Anxiety", 7, 126, 17),
    ("Cognitive/Behavioral/Emotional", "Depression", 4, 38, 5),
    ("Cognitive/Behavioral/Emotional", "Mood", 4, 16, 3),
    ("Cognitive/Behavioral/Emotional", "Obsessive Compulsive", 4, 15, 4),
    ("Cognitive/Behavioral/Emotional", "Paranoia", 3, 6, 1),
    ("Cognitive/Behavioral/Emotional", "Emotional", 5, 35, 8),
    ("Cognitive/Behavioral/Sensory", "Disturbed", 2, 4, 1),
    ("Cognitive/Behavioral/Sensory", "Intrigued", 3, 6, 1),
    ("Cognitive/Behavioral/Sensory", "Sensory", 3, 16, 3),
    ("Cognitive/Behavioral/Social", "Aggression", 6, 57, 3),
    ("Cognitive/Behavioral/Social", "Atypicality", 3, 32, 6),
    ("Cognitive/Behavioral/Social", "Awareness", 8, 52, 11),
    ("Cognitive/Behavioral/Social", "Comforting", 3, 5, 1),
    ("Cognitive/Behavioral/Social", "Conduct", 4, 100, 14),
    ("Cognitive/Behavioral/Social", "Ego", 1, 2, 1),
    ("Cognitive/Behavioral/Social", "Eye Contact", 5, 11, 1),
    ("Cognitive/Behavioral/Social", "Group Play", 4, 10, 2),
    ("Cognitive/Behavioral/Social", "Imitation", 2, 3, 1),
    ("Cognitive/Behavioral/Social", "Joint Attention", 3, 22, 3),
    ("Cognitive/Behavioral/Social", "Leadership", 1, 7, 1),
    ("Cognitive/Behavioral/Social", "Maturity", 1, 3, 1),
    ("Cognitive/Behavioral/Social", "Reciprocal Interactions", 2, 22, 2),
    ("Cognitive/Behavioral/Social", "Relationships", 4, 32, 4),
    ("Cognitive/Behavioral/Social", "Shared Interests", 4, 16, 4),
    ("Cognitive/Behavioral/Social", "Smile", 2, 2, 1),
    ("Cognitive/Behavioral/Social", "Staring", 3, 7, 1),
    ("Cognitive/Behavioral/Social", "Withdrawal", 5, 51, 4),
    ("Cognitive/Behavioral/Social", "Social", 7, 32, 8),
    ("Cognitive/Executive Functioning", "Attention", 6, 62, 7),
    ("Cognitive/Executive Functioning", "Confusion", 2, 2, 1),
    ("Cognitive/Executive Functioning", "Coping", 1, 9, 1),
    ("Cognitive/Executive Functioning", "Fluency", 2, 6, 3),
    ("Cognitive/Executive Functioning", "General", 1, 9, 7),
    ("Cognitive/Executive Functioning", "Hyperactivity", 7, 34, 4),
    ("Cognitive/Executive Functioning", "Imagination", 3, 11, 1),
    ("Cognitive/Executive Functioning", "Impulsivity", 5, 20, 3),
    ("Cognitive/Executive Functioning", "Inhibitory Control", 3, 7, 2),
    ("Cognitive/Executive Functioning", "Memory", 5, 14, 3),
    ("Cognitive/Executive Functioning", "Patience", 4, 7, 1),
    ("Cognitive/Executive Functioning", "Perseveration", 5, 18, 1),
    ("Cognitive/Executive Functioning", "Planning", 4, 24, 4),
    ("Cognitive/Executive Functioning", "Reasoning", 3, 18, 4),
    ("Cognitive/Executive Functioning", "Executive Functioning", 5, 18, 6),
    ("Cognitive/Language and Communication", "Expressive", 4, 77, 12),
    ("Cognitive/Language and Communication", "Nonverbal", 2, 10, 2),
    ("Cognitive/Language and Communication", "Receptive", 6, 17, 5),
    ("Cognitive/Language and Communication", "Speech", 4, 12, 3),
    ("Motor", "Fine", 2, 8, 1),
    ("Motor", "Gross", 4, 11, 4),
    ("Somatic", "Dermatologic", 1, 2, 1),
    ("Somatic", "Fatigue", 3, 8, 1),
    ("Somatic", "Gastrointestinal", 2, 18, 2),
    ("Somatic", "General", 2, 15, 1),
    ("Somatic", "Illness", 1, 10, 1),
    ("Somatic", "Neurologic", 2, 10, 2),
    ("Somatic", "Sleep", 1, 7, 2),
    ("Somatic", "Vision", 1, 2, 1),
    ("Somatic", "Weight", 1, 1, 1),
    ("Somatic", "Somatic", 1, 2, 1),
];

pub const SMALL_ONTOLOGY: &str =
    "Cognitive\n  Behavioral\n    Emotional\n      Adaptability\n      Anxiety\nMotor\n  Fine\nSomatic\n  Sleep\n";
pub const SMALL_LEAVES: [&str; 4] = [
    "Cognitive/Behavioral/Emotional/Adaptability",
    "Cognitive/Behavioral/Emotional/Anxiety",
    "Motor/Fine",
    "Somatic/Sleep",
];

pub fn instrument(name: &str, version: &str, questions: Vec<(String, &str, usize)>) -> InstrumentVersion {
    InstrumentVersion {
        name: name.into(),
        version: version.into(),
        age_min_months: 24,
        age_max_months: 216,
        reporter: Reporter::Parent,
        questions: questions
            .into_iter()
            .enumerate()
            .map(|(i, (id, leaf, choices))| SourceQuestion {
                body: format!("{name} item {id}"),
                id,
                scale: AnswerScale::from_labels(ScaleKind::Frequency, (1..=choices).map(|c| format!("level {c}")))
                    .unwrap(),
                leaf: leaf.parse().unwrap(),
                line: i + 7,
            })
            .collect(),
        origin: format!("instruments/{name}.tsv"),
    }
}

pub fn rosetta(id: &str, leaf: &str, codes: usize) -> RosettaQuestion {
    RosettaQuestion {
        id: id.into(),
        leaf: leaf.parse().unwrap(),
        template: "How often does [NAME] do this?".into(),
        codes: (1..=codes as u32)
            .map(|c| RosettaCode {
                code: c,
                label: format!("code {c}"),
            })
            .collect(),
        line: 1,
    }
}

/// Monotone map from `choices` onto `1..=codes.min(choices)`, spreading
/// choices as evenly as possible.
pub fn monotone_map(choices: usize, codes: usize) -> AnswerMap {
    let top = codes.min(choices);
    AnswerMap::new((1..=choices).map(|c| (c as u32, (((c - 1) * top) / choices + 1) as u32)))
}

/// Small registry whose crosswalk breaks mapping rules at random.
pub fn random_rule_case(rng: &mut ChaCha8Rng) -> Registry {
    let mut instruments = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let n = rng.gen_range(1..=5);
        let qs = (0..n)
            .map(|k| {
                (
                    format!("q{k}"),
                    *SMALL_LEAVES.choose(rng).unwrap(),
                    rng.gen_range(2..=5),
                )
            })
            .collect();
        instruments.push(instrument(&format!("I{i}"), "v1", qs));
    }
    let rosetta_qs: Vec<RosettaQuestion> = (0..rng.gen_range(1..=5))
        .map(|k| {
            rosetta(
                &format!("R-r-{k}"),
                SMALL_LEAVES.choose(rng).unwrap(),
                rng.gen_range(2..=5),
            )
        })
        .collect();

    // half the cases only draw links that satisfy every rule
    let noisy = rng.gen_bool(0.5);
    let mut links = Vec::new();
    for inst in &instruments {
        for q in &inst.questions {
            if rng.gen_bool(0.1) {
                continue;
            }
            let choices = q.scale.len();
            let fitting: Vec<&RosettaQuestion> = rosetta_qs
                .iter()
                .filter(|r| r.leaf == q.leaf && r.code_count() <= choices)
                .collect();
            let target = if !noisy {
                match fitting.choose(rng) {
                    Some(t) => *t,
                    None => continue,
                }
            } else if !fitting.is_empty() && rng.gen_bool(0.8) {
                *fitting.choose(rng).unwrap()
            } else {
                rosetta_qs.choose(rng).unwrap()
            };
            let mut entries: Vec<(u32, u32)> = monotone_map(choices, target.code_count()).entries().collect();
            if noisy && rng.gen_bool(0.35) {
                match rng.gen_range(0..4) {
                    0 => {
                        let at = rng.gen_range(0..entries.len());
                        entries.remove(at);
                    }
                    1 => entries.push((choices as u32 + 1, 1)),
                    2 => {
                        let a = rng.gen_range(0..entries.len());
                        let b = rng.gen_range(0..entries.len());
                        let (va, vb) = (entries[a].1, entries[b].1);
                        entries[a].1 = vb;
                        entries[b].1 = va;
                    }
                    _ => {
                        let at = rng.gen_range(0..entries.len());
                        entries[at].1 = if rng.gen_bool(0.5) {
                            0
                        } else {
                            target.code_count() as u32 + 1
                        };
                    }
                }
            }
            let source = SourceKey::new(&inst.name, &inst.version, &q.id);
            let link = CrosswalkLink {
                source: source.clone(),
                rosetta_id: target.id.clone(),
                answers: AnswerMap::new(entries),
                line: 0,
            };
            if noisy && rng.gen_bool(0.08) {
                let mut extra = link.clone();
                extra.rosetta_id = rosetta_qs.choose(rng).unwrap().id.clone();
                links.push(link);
                links.push(extra);
            } else {
                links.push(link);
            }
        }
    }
    links.shuffle(rng);
    for (i, l) in links.iter_mut().enumerate() {
        l.line = i + 1;
    }
    Registry::new(
        OntologyTree::parse(SMALL_ONTOLOGY).unwrap(),
        instruments,
        rosetta_qs,
        Crosswalk { links },
    )
}

/// Link-rule violations as (line, rule), found by direct enumeration.
pub fn brute_link_rules(reg: &Registry) -> BTreeSet<(usize, Rule)> {
    let links = &reg.crosswalk().links;
    let mut out = BTreeSet::new();
    for (k, link) in links.iter().enumerate() {
        let source = reg
            .instruments()
            .iter()
            .find(|i| i.name == link.source.instrument && i.version == link.source.version)
            .and_then(|i| i.questions.iter().find(|q| q.id == link.source.question_id));
        let target = reg.rosetta_questions().iter().find(|r| r.id == link.rosetta_id);
        if source.is_none() {
            out.insert((link.line, Rule::DanglingSource));
        }
        if target.is_none() {
            out.insert((link.line, Rule::DanglingRosetta));
        }
        if let Some(first) = links[..k].iter().find(|l| l.source == link.source) {
            out.insert((
                link.line,
                if first.rosetta_id == link.rosetta_id {
                    Rule::DuplicateLink
                } else {
                    Rule::ManyToOne
                },
            ));
        }
        let (Some(source), Some(target)) = (source, target) else {
            continue;
        };
        if source.leaf.to_string() != target.leaf.to_string() {
            out.insert((link.line, Rule::LeafAgreement));
        }
        let n = source.scale.len() as u32;
        let entries: Vec<(u32, u32)> = link.answers.entries().collect();
        let total = entries.len() == n as usize && (1..=n).all(|c| entries.iter().any(|e| e.0 == c));
        if !total {
            out.insert((link.line, Rule::AnswerTotality));
        }
        let codes = target.codes.len() as u32;
        if entries.iter().any(|e| e.1 < 1 || e.1 > codes) {
            out.insert((link.line, Rule::AnswerRange));
        }
        let mut monotone = true;
        for a in &entries {
            for b in &entries {
                if a.0 < b.0 && a.1 > b.1 {
                    monotone = false;
                }
            }
        }
        if !monotone {
            out.insert((link.line, Rule::AnswerMonotone));
        }
        if codes > n {
            out.insert((link.line, Rule::MinimalCode));
        }
    }
    out
}

pub const LINK_RULES: [Rule; 9] = [
    Rule::DanglingSource,
    Rule::DanglingRosetta,
    Rule::ManyToOne,
    Rule::DuplicateLink,
    Rule::LeafAgreement,
    Rule::AnswerTotality,
    Rule::AnswerRange,
    Rule::AnswerMonotone,
    Rule::MinimalCode,
];

/// Registry with up to 8 instruments and 50 Rosetta questions, every link valid.
pub fn random_overlap_case(rng: &mut ChaCha8Rng) -> Registry {
    const LEAF: &str = "Motor/Fine";
    let n_rosetta = rng.gen_range(1..=50);
    let rosetta_qs: Vec<RosettaQuestion> = (0..n_rosetta).map(|k| rosetta(&format!("R-r-{k}"), LEAF, 3)).collect();
    let mut instruments = Vec::new();
    let mut links = Vec::new();
    for i in 0..rng.gen_range(1..=8) {
        for v in 0..rng.gen_range(1..=2) {
            let name = format!("I{i}");
            let version = format!("v{v}");
            let n = rng.gen_range(0..=20);
            let qs: Vec<(String, &str, usize)> = (0..n).map(|k| (format!("q{k}"), LEAF, 3)).collect();
            for (qid, _, _) in &qs {
                if rng.gen_bool(0.85) {
                    links.push(CrosswalkLink {
                        source: SourceKey::new(&name, &version, qid),
                        rosetta_id: rosetta_qs.choose(rng).unwrap().id.clone(),
                        answers: AnswerMap::identity(3),
                        line: links.len() + 1,
                    });
                }
            }
            instruments.push(instrument(&name, &version, qs));
        }
    }
    Registry::new(
        OntologyTree::parse(SMALL_ONTOLOGY).unwrap(),
        instruments,
        rosetta_qs,
        Crosswalk { links },
    )
}

/// (off-diagonal/diagonal cells keyed by instrument names, totals) by set enumeration.
pub fn brute_overlap(reg: &Registry) -> (BTreeMap<(String, String), usize>, BTreeMap<String, usize>) {
    let mut names: Vec<String> = reg.instruments().iter().map(|i| i.name.clone()).collect();
    names.sort();
    names.dedup();
    let sets: Vec<BTreeSet<&str>> = reg
        .rosetta_questions()
        .iter()
        .map(|r| {
            reg.crosswalk()
                .links
                .iter()
                .filter(|l| l.rosetta_id == r.id)
                .map(|l| l.source.instrument.as_str())
                .collect()
        })
        .collect();
    let mut cells = BTreeMap::new();
    let mut totals = BTreeMap::new();
    for a in &names {
        totals.insert(a.clone(), sets.iter().filter(|s| s.contains(a.as_str())).count());
        for b in &names {
            let n = if a == b {
                sets.iter().filter(|s| s.len() == 1 && s.contains(a.as_str())).count()
            } else {
                sets.iter()
                    .filter(|s| s.contains(a.as_str()) && s.contains(b.as_str()))
                    .count()
            };
            cells.insert((a.clone(), b.clone()), n);
        }
    }
    (cells, totals)
}

/// One subject's assessments: 1 to 3 random versions, random answers and dates.
pub fn random_subject(rng: &mut ChaCha8Rng, reg: &Registry, subject: &str) -> Vec<AssessmentRecord> {
    let dates = [
        None,
        NaiveDate::from_ymd_opt(2021, 5, 1),
        NaiveDate::from_ymd_opt(2022, 1, 9),
        NaiveDate::from_ymd_opt(2023, 7, 30),
    ];
    (0..rng.gen_range(1..=3))
        .map(|_| {
            let inst = reg.instruments().choose(rng).unwrap();
            let mut r = AssessmentRecord::new(subject, &inst.name, &inst.version);
            r.date = *dates.choose(rng).unwrap();
            for q in &inst.questions {
                if rng.gen_bool(0.3) {
                    r.responses
                        .insert(q.id.clone(), rng.gen_range(1..=q.scale.len() as u32));
                }
            }
            r
        })
        .collect()
}

/// Fused values for one subject by linear scans and an explicit fold over
/// the records in input order.
pub fn brute_fuse(
    reg: &Registry,
    records: &[AssessmentRecord],
    policy: ConflictPolicy,
) -> BTreeMap<String, Option<u32>> {
    let per_record: Vec<BTreeMap<&str, u32>> = records
        .iter()
        .map(|rec| {
            let mut vals: BTreeMap<&str, u32> = BTreeMap::new();
            for (qid, &choice) in &rec.responses {
                let link = reg.crosswalk().links.iter().find(|l| {
                    l.source.instrument == rec.instrument
                        && l.source.version == rec.version
                        && &l.source.question_id == qid
                });
                if let Some(link) = link {
                    if let Some((_, code)) = link.answers.entries().find(|e| e.0 == choice) {
                        let slot = vals.entry(link.rosetta_id.as_str()).or_insert(code);
                        *slot = (*slot).max(code);
                    }
                }
            }
            vals
        })
        .collect();
    reg.rosetta_questions()
        .iter()
        .map(|r| {
            let mut acc: Option<(u32, Option<NaiveDate>)> = None;
            for (vals, rec) in per_record.iter().zip(records) {
                let Some(&code) = vals.get(r.id.as_str()) else { continue };
                acc = Some(match (acc, policy) {
                    (None, _) => (code, rec.date),
                    (Some((c, d)), ConflictPolicy::Max) => (c.max(code), d),
                    (Some(prev), ConflictPolicy::First) => prev,
                    (Some((c, d)), ConflictPolicy::Latest) => {
                        if rec.date > d {
                            (code, rec.date)
                        } else {
                            (c, d)
                        }
                    }
                });
            }
            (r.id.clone(), acc.map(|a| a.0))
        })
        .collect()
}

/// Best depth-1 split of the first boosting round by exhaustive search:
/// (feature, threshold, left weight, right weight), or `None` without a
/// positive-gain split. Same tie rule as the learner.
pub fn stump_oracle(x: &[Vec<f64>], y: &[bool], lambda: f64) -> Option<(usize, f64, f64, f64)> {
    let n = y.len() as f64;
    let p0 = y.iter().filter(|&&v| v).count() as f64 / n;
    let g: Vec<f64> = y.iter().map(|&v| p0 - if v { 1.0 } else { 0.0 }).collect();
    let h = p0 * (1.0 - p0);
    let score = |gs: f64, hs: f64| gs * gs / (hs + lambda);
    let width = x[0].len();
    let mut best: Option<(f64, usize, f64, f64, f64)> = None;
    for f in 0..width {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for (i, row) in x.iter().enumerate() {
                if row[f] <= t {
                    gl += g[i];
                    hl += h;
                } else {
                    gr += g[i];
                    hr += h;
                }
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr));
            let current = best.map_or(0.0, |b| b.0);
            if gain > current + 1e-12 * current.abs().max(1.0) {
                best = Some((gain, f, t, -gl / (hl + lambda), -gr / (hr + lambda)));
            }
        }
    }
    best.map(|b| (b.1, b.2, b.3, b.4))
}

/// AUC by counting every positive/negative pair.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}
