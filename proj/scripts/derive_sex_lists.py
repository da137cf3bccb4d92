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
"""Extracts the female-only / male-only diagnosis lists from the CMS Medicare
Code Editor sex-conflict edit, restricted to the billable codes of an
ICD-10-CM order file.

Usage: derive_sex_lists.py ORDER_FILE DISCHARGE_DATE OUT_DIR

Requires the `msdrg` wheel (ships the CMS MCE edit tables). Every billable
code of the order file is edited twice, once as a male and once as a female
principal diagnosis; a SEX_CONFLICT edit for the male claim marks the code as
female-only and vice versa. FY2025 and later MCE releases dropped the edit,
so use a FY2024 discharge date (20231001..20240930).
"""
import os
import sys

import msdrg


def billable_codes(order_path):
    with open(order_path, encoding="latin-1") as f:
        for line in f:
            if len(line) > 14 and line[14] == "1":
                yield line[6:13].strip()


def main():
    order_path, date, out_dir = sys.argv[1], int(sys.argv[2]), sys.argv[3]
    female, male = [], []
    with msdrg.MceEditor() as mce:
        for code in billable_codes(order_path):
            edits = {}
            for sex in (0, 1):
                r = mce.edit({"discharge_date": date, "age": 40, "sex": sex,
                              "discharge_status": 1, "pdx": {"code": code},
                              "sdx": [], "procedures": []})
                edits[sex] = {e["name"] for e in r["edits"]}
            if "INVALID_CODE" in edits[0]:
                continue
            if "SEX_CONFLICT" in edits[0]:
                female.append(code)
            if "SEX_CONFLICT" in edits[1]:
                male.append(code)
    for name, codes in (("female_only.txt", female), ("male_only.txt", male)):
        with open(os.path.join(out_dir, name), "w") as f:
            f.writelines(c + "\n" for c in sorted(codes))
    print(f"female_only={len(female)} male_only={len(male)}")


if __name__ == "__main__":
    main()
