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
"""Builds data/icd10cm/chapter_blocks_<year>.json from a CMS tabular XML file.

Usage: derive_chapter_blocks.py TABULAR_XML VERSION OUT_JSON

Blocks are the tabular sections that directly contain categories. A category
that falls outside its block's nominal first..last string range (C4A, M1A,
Z3A, ...) is listed in the block's "members" array so that resolution never
depends on guessing.
"""
import json
import sys
import xml.etree.ElementTree as ET


def resolve(blocks, category):
    for b in blocks:
        if category in b["members"]:
            return b["id"]
    hits = [b for b in blocks if b["first"] <= category <= b["last"]]
    if not hits:
        return None
    hits.sort(key=lambda b: (b["first"], [-ord(ch) for ch in b["last"]]), reverse=True)
    return hits[0]["id"]


def main():
    xml_path, version, out_path = sys.argv[1:4]
    root = ET.parse(xml_path).getroot()
    chapters, blocks, expected = [], [], {}
    for ch in root.findall("chapter"):
        desc = ch.find("desc").text.strip()
        rng = desc[desc.rfind("(") + 1 : -1]
        first, last = rng.split("-")
        chapters.append({
            "id": rng,
            "number": int(ch.find("name").text),
            "title": desc[: desc.rfind("(")].strip(),
            "first": first,
            "last": last,
        })
        for sec in ch.findall("section"):
            cats = [d.find("name").text for d in sec.findall("diag")]
            if not cats:
                continue
            sid = sec.attrib["id"]
            parts = sid.split("-")
            sdesc = sec.find("desc").text.strip()
            if sdesc.endswith(")") and "(" in sdesc:
                sdesc = sdesc[: sdesc.rfind("(")].strip()
            blocks.append({
                "id": sid,
                "title": sdesc,
                "chapter": rng,
                "first": parts[0],
                "last": parts[-1],
                "members": [],
            })
            for c in cats:
                expected[c] = blocks[-1]["id"]

    for cat, bid in sorted(expected.items()):
        if resolve(blocks, cat) != bid:
            owner = next(b for b in blocks if b["id"] == bid)
            owner["members"].append(cat)
    for cat, bid in expected.items():
        assert resolve(blocks, cat) == bid, cat

    with open(out_path, "w") as f:
        json.dump({"version": version, "chapters": chapters, "blocks": blocks}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
