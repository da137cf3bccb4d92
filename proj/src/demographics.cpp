// Copyright 2026 The clinbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "clinbias/demographics.hpp"

#include "clinbias/error.hpp"
#include "clinbias/util.hpp"

namespace clinbias {

std::string_view to_string(Sex v) {
  switch (v) {
    case Sex::kFemale: return "Female";
    case Sex::kMale: return "Male";
    case Sex::kAny: return "Any";
  }
  return "?";
}

std::string_view to_string(Ethnicity v) {
  switch (v) {
    case Ethnicity::kWhite: return "White";
    case Ethnicity::kBlack: return "Black";
    case Ethnicity::kHispanic: return "Hispanic";
    case Ethnicity::kAsian: return "Asian";
    case Ethnicity::kOther: return "Other";
    case Ethnicity::kAny: return "Any";
  }
  return "?";
}

std::string_view to_string(Insurance v) {
  switch (v) {
    case Insurance::kMedicaid: return "Medicaid";
    case Insurance::kMedicare: return "Medicare";
    case Insurance::kOther: return "Other";
    case Insurance::kAny: return "Any";
  }
  return "?";
}

std::string_view to_string(Axis v) {
  switch (v) {
    case Axis::kSex: return "Sex";
    case Axis::kEthnicity: return "Ethnicity";
    case Axis::kInsurance: return "Insurance";
  }
  return "?";
}

Sex parse_sex(std::string_view text) {
  std::string t = to_lower(trim(text));
  if (t == "female" || t == "f") return Sex::kFemale;
  if (t == "male" || t == "m") return Sex::kMale;
  throw ValidationError("unknown sex '" + std::string(text) + "'");
}

Ethnicity parse_ethnicity(std::string_view text) {
  std::string t = to_lower(trim(text));
  if (t == "white") return Ethnicity::kWhite;
  if (t == "black") return Ethnicity::kBlack;
  if (t == "hispanic") return Ethnicity::kHispanic;
  if (t == "asian") return Ethnicity::kAsian;
  if (t == "other") return Ethnicity::kOther;
  throw ValidationError("unknown ethnicity '" + std::string(text) + "'");
}

Insurance parse_insurance(std::string_view text) {
  std::string t = to_lower(trim(text));
  if (t == "medicaid") return Insurance::kMedicaid;
  if (t == "medicare") return Insurance::kMedicare;
  if (t == "other") return Insurance::kOther;
  throw ValidationError("unknown insurance '" + std::string(text) + "'");
}

Axis parse_axis(std::string_view text) {
  std::string t = to_lower(trim(text));
  if (t == "sex") return Axis::kSex;
  if (t == "ethnicity") return Axis::kEthnicity;
  if (t == "insurance") return Axis::kInsurance;
  throw ValidationError("unknown axis '" + std::string(text) + "'");
}

}  // namespace clinbias
