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

#pragma once

#include <array>
#include <string>
#include <string_view>

namespace clinbias {

enum class Sex { kFemale, kMale, kAny };
// kOther only appears on admission records outside the four studied groups.
enum class Ethnicity { kWhite, kBlack, kHispanic, kAsian, kOther, kAny };
enum class Insurance { kMedicaid, kMedicare, kOther, kAny };
enum class Axis { kSex, kEthnicity, kInsurance };

inline constexpr std::array<Sex, 2> kSexes = {Sex::kFemale, Sex::kMale};
inline constexpr std::array<Ethnicity, 4> kEthnicities = {Ethnicity::kWhite, Ethnicity::kBlack,
                                                          Ethnicity::kHispanic, Ethnicity::kAsian};
inline constexpr std::array<Insurance, 3> kInsurances = {Insurance::kMedicaid,
                                                         Insurance::kMedicare, Insurance::kOther};

std::string_view to_string(Sex v);
std::string_view to_string(Ethnicity v);
std::string_view to_string(Insurance v);
std::string_view to_string(Axis v);

// Case-insensitive; throw ValidationError on unknown values.
Sex parse_sex(std::string_view text);
Ethnicity parse_ethnicity(std::string_view text);
Insurance parse_insurance(std::string_view text);
Axis parse_axis(std::string_view text);

}  // namespace clinbias
