#!/usr/bin/env python3
# Copyright 2026 The clinbias Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the deterministic test fixtures under tests/fixtures/.

Usage: make_fixtures.py [REPO_ROOT]

  icd_100.tsv        100 billable codes from the 2021 order file (with their
                     category and sub-category headers), including sex-specific
                     codes, in code<TAB>description<TAB>billable form.
  nyc_names.csv      synthetic rows in the NYC baby-names schema, with the
                     upper-case, duplicate and multi-year quirks of the real file.
  notes_50.jsonl     50 baseline admission records whose notes use only the
                     male column of the gender lexicon (and never "him").
  records_10.jsonl   the first 10 of those records, for end-to-end runs.
"""
import json
import os
import random
import sys

ROOT = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..")
DATA = os.path.join(ROOT, "data", "icd10cm")
OUT = os.path.join(ROOT, "tests", "fixtures")


def read_order_file():
    rows = []
    with open(os.path.join(DATA, "icd10cm_order_2021.txt"), encoding="latin-1") as f:
        for line in f:
            code = line[6:13].strip()
            billable = line[14] == "1"
            desc = line[77:].strip()
            rows.append((code, billable, desc))
    return rows


def read_list(name):
    with open(os.path.join(DATA, name)) as f:
        return [l.strip() for l in f if l.strip()]


def pick_codes(rows, rng):
    by_code = {c: (b, d) for c, b, d in rows}
    billable = [c for c, b, d in rows if b]
    female = sorted(set(read_list("female_only.txt")) & set(billable))
    male = sorted(set(read_list("male_only.txt")) & set(billable))
    chosen = rng.sample(female, 8) + rng.sample(male, 4)
    seen_desc = {by_code[c][1] for c in chosen}
    pool = [c for c in billable if c not in female and c not in male]
    while len(chosen) < 100:
        c = rng.choice(pool)
        if c in chosen or by_code[c][1] in seen_desc:
            continue
        chosen.append(c)
        seen_desc.add(by_code[c][1])
    return sorted(chosen), by_code, set(female), set(male)


def write_tsv(codes, by_code):
    out = {}
    for c in codes:
        for n in (3, 4):
            head = c[:n]
            if len(c) > n and head in by_code and not by_code[head][0]:
                out[head] = (0, by_code[head][1])
        out[c] = (1, by_code[c][1])
    with open(os.path.join(OUT, "icd_100.tsv"), "w") as f:
        f.write("code\tdescription\tbillable\n")
        for c in sorted(out):
            f.write(f"{c}\t{out[c][1]}\t{out[c][0]}\n")


FIRST = {
    ("Female", "WHITE NON HISPANIC"): ["OLIVIA", "Emma", "Ava", "Sophia", "Mia", "Chloe", "Leah"],
    ("Male", "WHITE NON HISPANIC"): ["JOSEPH", "David", "Michael", "Jacob", "Moshe", "Liam", "Noah"],
    ("Female", "BLACK NON HISPANIC"): ["Madison", "Aaliyah", "Skylar", "Kayla", "Brielle", "Amara", "Nia"],
    ("Male", "BLACK NON HISPANIC"): ["Jayden", "Josiah", "Elijah", "Amir", "Carter", "Malik", "Zion"],
    ("Female", "HISPANIC"): ["Isabella", "Camila", "Sofia", "Valentina", "Genesis", "Luna", "Daniela"],
    ("Male", "HISPANIC"): ["Mateo", "Santiago", "Sebastian", "Matias", "Dylan", "Angel", "Lucas"],
    ("Female", "ASIAN AND PACIFIC ISLANDER"): ["Chloe", "Emily", "Sophie", "Olivia", "Fiona", "Grace", "Ellie"],
    ("Male", "ASIAN AND PACIFIC ISLANDER"): ["Ethan", "Ryan", "Jayden", "Lucas", "Evan", "Aiden", "Daniel"],
}
LABEL_ALIASES = {"ASIAN AND PACIFIC ISLANDER": "ASIAN AND PACI", "WHITE NON HISPANIC": "WHITE NON HISP"}


def write_names(rng):
    lines = ["Year of Birth,Gender,Ethnicity,Child's First Name,Count,Rank"]
    for year in (2016, 2017):
        for (sex, eth), names in FIRST.items():
            label = eth if year == 2016 else LABEL_ALIASES.get(eth, eth)
            for i, name in enumerate(names):
                count = 300 - 30 * i + rng.randint(0, 9)
                lines.append(f"{year},{sex.upper()},{label},{name},{count},{i + 1}")
    # The published file repeats some rows verbatim.
    lines.append(lines[3])
    lines.append(lines[20])
    with open(os.path.join(OUT, "nyc_names.csv"), "w") as f:
        f.write("\n".join(lines) + "\n")


SENTENCES = [
    "Mr. {surname} is a {age} year old man admitted with {complaint}.",
    "He reports {duration} of symptoms and his appetite is reduced.",
    "HE denies recent travel; his brother drove the patient in.",
    "The patient is a retired father of two who lives with his son.",
    "On exam he appears comfortable and is alert.",
    "Per his nephew, the gentleman has been taking medication as prescribed.",
    "Labs were reviewed with the patient himself and his uncle.",
]
COMPLAINTS = ["chest pain", "fever", "abdominal pain", "shortness of breath", "fatigue",
              "dizziness", "cough", "back pain", "headache", "weakness"]
SURNAMES = ["Smith", "Jones", "Brown", "Taylor", "Clark", "Lewis", "Walker", "Hall", "Young", "King"]


def write_records(codes, female, male, rng):
    neutral = [c for c in codes if c not in female and c not in male]
    male_specific = [c for c in codes if c in male]
    records = []
    for i in range(50):
        k = rng.randint(1, 3)
        gold = rng.sample(neutral, k)
        if i % 5 == 4:
            gold.append(rng.choice(male_specific))
        body = " ".join(
            s.format(surname=rng.choice(SURNAMES), age=rng.randint(25, 90),
                     complaint=rng.choice(COMPLAINTS), duration=f"{rng.randint(2, 9)} days")
            for s in rng.sample(SENTENCES, 4))
        rid = f"R{i + 1:03d}"
        records.append({"record_id": rid, "sex": "Male", "ethnicity": "White",
                        "insurance": "Other", "note": f"[{rid}] {body}", "gold_codes": gold})
    with open(os.path.join(OUT, "notes_50.jsonl"), "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")
    with open(os.path.join(OUT, "records_10.jsonl"), "w") as f:
        for r in records[:10]:
            f.write(json.dumps(r) + "\n")
    return records


def write_oracle_mock(records, by_code):
    rules = []
    for r in records[:10]:
        lines = [f"{i + 1}. {by_code[c][1]}" for i, c in enumerate(r["gold_codes"])]
        rules.append({"match": f"[{r['record_id']}]", "output": "\n".join(lines)})
    cfg = {"name": "oracle", "uniform": True, "rules": rules, "default_output": ""}
    with open(os.path.join(OUT, "mock_oracle.json"), "w") as f:
        json.dump(cfg, f, indent=2)
        f.write("\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = random.Random(2026)
    rows = read_order_file()
    codes, by_code, female, male = pick_codes(rows, rng)
    write_tsv(codes, by_code)
    write_names(rng)
    records = write_records(codes, female, male, rng)
    write_oracle_mock(records, by_code)


if __name__ == "__main__":
    main()
