#!/usr/bin/env python3
"""Regenerates the canonical fixture registry under fixtures/canonical/.

Deterministic: running it twice produces identical files. Item bodies are
placeholders except for the routine-change items, which are kept verbatim.
"""

import os
from collections import OrderedDict

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "canonical")

# (base path, leaf, overlapping instruments, instrument questions, rosetta questions)
LEAVES = [
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
]

QUALITY = ["No abnormality", "Mild or possible abnormality",
           "Definite abnormality", "Severe abnormality"]

# name -> (file slug, reporter, scale kind, labels, versions [(label, min, max)])
INSTRUMENTS = OrderedDict([
    ("ADI-R", ("adi-r", "clinician", "quality", QUALITY,
               [("Interview", 24, 1200)])),
    ("ADOS-2", ("ados-2", "clinician", "quality", QUALITY,
                [("Toddler", 12, 30), ("Module 1", 31, 1200), ("Module 2", 31, 1200),
                 ("Module 3", 48, 216), ("Module 4", 192, 1200)])),
    ("BASC-3", ("basc-3", "parent", "frequency",
                ["Never", "Sometimes", "Often", "Almost Always"],
                [("Preschool", 24, 71), ("Child", 72, 143), ("Adolescent", 144, 263)])),
    ("BRIEF2", ("brief2", "parent", "frequency", ["Never", "Sometimes", "Often"],
                [("Parent", 60, 227)])),
    ("CBCL", ("cbcl", "parent", "frequency", ["Not True", "Somewhat True", "Very True"],
              [("1.5-5", 18, 71), ("6-18", 72, 227)])),
    ("Conners 3", ("conners-3", "parent", "frequency",
                   ["Not true at all", "Just a little true", "Pretty much true",
                    "Very much true"],
                   [("Parent", 72, 227)])),
    ("SRS-2", ("srs-2", "parent", "frequency",
               ["Not True", "Sometimes True", "Often True", "Almost Always True"],
               [("Preschool", 30, 54), ("School-Age", 48, 227), ("Adult", 228, 1200)])),
    ("VADRS", ("vadrs", "parent", "frequency",
               ["Never", "Occasionally", "Often", "Very Often"],
               [("Parent", 72, 155)])),
])

PREFERENCE = {
    "Cognitive/Behavioral/Emotional": ["BASC-3", "CBCL", "VADRS", "Conners 3", "BRIEF2",
                                       "ADI-R", "SRS-2", "ADOS-2"],
    "Cognitive/Behavioral/Sensory": ["ADI-R", "ADOS-2", "SRS-2", "BASC-3", "CBCL",
                                     "Conners 3", "BRIEF2", "VADRS"],
    "Cognitive/Behavioral/Social": ["SRS-2", "ADI-R", "ADOS-2", "BASC-3", "CBCL",
                                    "Conners 3", "VADRS", "BRIEF2"],
    "Cognitive/Executive Functioning": ["Conners 3", "BRIEF2", "BASC-3", "VADRS", "CBCL",
                                        "SRS-2", "ADI-R", "ADOS-2"],
    "Cognitive/Language and Communication": ["ADI-R", "ADOS-2", "BASC-3", "SRS-2", "CBCL",
                                             "Conners 3", "BRIEF2", "VADRS"],
    "Motor": ["ADI-R", "BASC-3", "CBCL", "ADOS-2", "SRS-2", "Conners 3", "BRIEF2", "VADRS"],
    "Somatic": ["CBCL", "BASC-3", "VADRS", "Conners 3", "BRIEF2", "SRS-2", "ADI-R",
                "ADOS-2"],
}

ROUTINE_TEMPLATE = ("Does [NAME] become unusually upset with or have difficulty accepting "
                    "small changes? For example, a change in [his/her] bedtime routine, "
                    "weekly scheduled activities, or furniture arrangement in the house.")
ROUTINE_CODES = ["Rarely or never", "Sometimes, but with little interference in family life",
                 "Often, and with some interference with family life"]
ADIR_ROUTINE = ["No difficulties with changes to routine",
                "Unusually negative reaction to minor changes",
                "Definite, unusual reactions to minor changes, causing distress",
                "Definite, unusual resistance to minor changes, with impairment of family activities"]
BASC_REVERSED = ["Almost Always", "Often", "Sometimes", "Never"]

# (instrument, version, id, body, labels override)
ROUTINE_ITEMS = [
    ("ADI-R", "Interview", "74",
     "Is bothered by minor changes in routine, schedule or how personal things are arranged",
     ADIR_ROUTINE),
    ("ADI-R", "Interview", "75", "Gets upset by changes around the house", ADIR_ROUTINE),
    ("BASC-3", "Preschool", "88", "Adjusts well to new surroundings", BASC_REVERSED),
    ("BASC-3", "Child", "47", "Adjusts well to changes in plans", BASC_REVERSED),
    ("BASC-3", "Adolescent", "156", "Adjusts well to change in teacher", BASC_REVERSED),
    ("BRIEF2", "Parent", "11", "Has trouble adjusting to new situations", None),
    ("CBCL", "6-18", "21", "Disturbed by changes in routine", None),
    ("SRS-2", "School-Age", "24", "Difficulty with changes to routine", None),
]
ROUTINE_TOTAL = 21
ADAPTABILITY_INSTRUMENTS = ["ADI-R", "BASC-3", "BRIEF2", "CBCL", "SRS-2", "Conners 3"]


def leaf_slug(base, leaf, dup_names):
    parts = [base.split("/")[-1], leaf] if leaf in dup_names else [leaf]
    return "-".join(p.lower().replace(" ", "-") for p in parts)


def answer_map(n_choices, n_codes):
    return ",".join(f"{i}:{min(i, n_codes)}" for i in range(1, n_choices + 1))


class Question:
    def __init__(self, instrument, version, qid, leaf_path, body, labels, reversed_=False):
        self.instrument = instrument
        self.version = version
        self.qid = qid
        self.leaf_path = leaf_path
        self.body = body
        self.labels = labels
        self.reversed = reversed_


def main():
    names = [leaf for _, leaf, *_ in LEAVES]
    dup_names = {n for n in names if names.count(n) > 1}

    reserved = {}
    for inst, ver, qid, *_ in ROUTINE_ITEMS:
        reserved.setdefault((inst, ver), set()).add(int(qid))
    counters = {}
    version_cursor = {}

    def next_id(inst, ver):
        n = counters.get((inst, ver), 0) + 1
        while n in reserved.get((inst, ver), set()):
            n += 1
        counters[(inst, ver)] = n
        return str(n)

    def next_version(inst):
        versions = INSTRUMENTS[inst][4]
        k = version_cursor.get(inst, 0)
        version_cursor[inst] = k + 1
        return versions[k % len(versions)][0]

    questions = OrderedDict((inst, []) for inst in INSTRUMENTS)
    rosetta = []
    links = []

    for base, leaf, n_inst, n_q, n_r in LEAVES:
        path = f"{base}/{leaf}"
        slug = leaf_slug(base, leaf, dup_names)
        rids = [f"R-{slug}-{k}" for k in range(1, n_r + 1)]
        if leaf == "Adaptability":
            chosen = ADAPTABILITY_INSTRUMENTS
        else:
            chosen = PREFERENCE[base][:n_inst]
        # per-instrument question counts: one each, then round-robin
        counts = {inst: 1 for inst in chosen}
        k = 0
        while sum(counts.values()) < n_q:
            counts[chosen[k % len(chosen)]] += 1
            k += 1

        sources = []
        if leaf == "Adaptability":
            for inst, ver, qid, body, labels in ROUTINE_ITEMS:
                q = Question(inst, ver, qid, path, body,
                             labels or INSTRUMENTS[inst][3], labels is BASC_REVERSED)
                questions[inst].append(q)
                counts[inst] -= 1
                sources.append((q, rids[0]))
            # remaining routine-change sources from the five table instruments
            extra = ROUTINE_TOTAL - len(ROUTINE_ITEMS)
            routine_insts = ADAPTABILITY_INSTRUMENTS[:5]
            k = 0
            while extra > 0:
                inst = routine_insts[k % len(routine_insts)]
                k += 1
                if counts[inst] == 0:
                    continue
                ver = next_version(inst)
                q = Question(inst, ver, next_id(inst, ver), path,
                             f"{inst} {ver} adaptability item (routine change)",
                             INSTRUMENTS[inst][3])
                questions[inst].append(q)
                counts[inst] -= 1
                sources.append((q, rids[0]))
                extra -= 1
            assert extra == 0, "routine-change allocation"
            rest = []
            for inst in chosen:
                for _ in range(counts[inst]):
                    ver = next_version(inst)
                    rest.append(Question(inst, ver, next_id(inst, ver), path,
                                         f"{inst} {ver} adaptability item",
                                         INSTRUMENTS[inst][3]))
            for j, q in enumerate(rest):
                questions[q.instrument].append(q)
                sources.append((q, rids[1 + j % (n_r - 1)]))
        else:
            ordered = []
            for inst in chosen:
                for _ in range(counts[inst]):
                    ver = next_version(inst)
                    ordered.append(Question(inst, ver, next_id(inst, ver), path,
                                            f"{inst} {ver} {leaf.lower()} item",
                                            INSTRUMENTS[inst][3]))
            # interleave instruments so Rosetta questions receive mixed sources
            by_inst = OrderedDict((inst, [q for q in ordered if q.instrument == inst])
                                  for inst in chosen)
            interleaved = []
            while any(by_inst.values()):
                for inst in chosen:
                    if by_inst[inst]:
                        interleaved.append(by_inst[inst].pop(0))
            for j, q in enumerate(interleaved):
                questions[q.instrument].append(q)
                sources.append((q, rids[j % n_r]))

        for r_index, rid in enumerate(rids):
            linked = [q for q, target in sources if target == rid]
            assert linked, rid
            n_codes = min(len(q.labels) for q in linked)
            if rid == "R-adaptability-1":
                assert n_codes == 3
                template, codes = ROUTINE_TEMPLATE, ROUTINE_CODES
            else:
                template = (f"Does [NAME] show difficulties with {leaf.lower()} "
                            f"(concept {r_index + 1})? Think about [his/her] usual behavior.")
                codes = ["Rarely or never", "Sometimes", "Often", "Almost always"][:n_codes]
            rosetta.append((rid, path, template, codes))
            for q in linked:
                links.append((q, rid, answer_map(len(q.labels), n_codes)))

    # files
    os.makedirs(os.path.join(OUT, "instruments"), exist_ok=True)
    with open(os.path.join(OUT, "ontology.txt"), "w") as f:
        f.write("# Clinical-domain ontology, one leaf per fused category.\n")
        written = set()
        for base, leaf, *_ in LEAVES:
            parts = base.split("/")
            for depth in range(len(parts)):
                key = tuple(parts[: depth + 1])
                if key not in written:
                    written.add(key)
                    f.write("  " * depth + parts[depth] + "\n")
            f.write("  " * len(parts) + leaf + "\n")

    for inst, (slug, reporter, kind, _labels, versions) in INSTRUMENTS.items():
        for ver, age_min, age_max in versions:
            vslug = ver.lower().replace(" ", "-").replace(".", "_")
            rows = [q for q in questions[inst] if q.version == ver]
            rows.sort(key=lambda q: int(q.qid))
            with open(os.path.join(OUT, "instruments", f"{slug}__{vslug}.tsv"), "w") as f:
                f.write(f"name\t{inst}\nversion\t{ver}\nage_min_months\t{age_min}\n"
                        f"age_max_months\t{age_max}\nreporter\t{reporter}\n\n")
                for q in rows:
                    f.write(f"{q.qid}\t{q.leaf_path}\t{q.body}\t{kind}\t{'|'.join(q.labels)}\n")

    with open(os.path.join(OUT, "rosetta.tsv"), "w") as f:
        for rid, path, template, codes in rosetta:
            coded = "|".join(f"{i + 1}={c}" for i, c in enumerate(codes))
            f.write(f"{rid}\t{path}\t{template}\t{coded}\n")

    with open(os.path.join(OUT, "crosswalk.tsv"), "w") as f:
        for q, rid, amap in links:
            f.write(f"{q.instrument}\t{q.version}\t{q.qid}\t{rid}\t{amap}\n")

    print(f"{len(rosetta)} rosetta questions, {len(links)} links")


if __name__ == "__main__":
    main()
