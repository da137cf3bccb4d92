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


#include "clinbias/counterfactual_engine.hpp"

#include <gtest/gtest.h>

#include <set>

#include "clinbias/error.hpp"
#include "clinbias/log.hpp"
#include "clinbias/util.hpp"
#include "test_support.hpp"

namespace clinbias::cf {
namespace {

using clinbias::testing::data_file;
using clinbias::testing::fixture;

const GenderLexicon& lexicon() {
  static const GenderLexicon lex = GenderLexicon::load(data_file("lexicon/gender_lexicon.tsv"));
  return lex;
}

AdmissionRecord baseline(std::string id = "r1") {
  return {id, Sex::kMale, Ethnicity::kWhite, Insurance::kOther,
          "Mr. Doe says he and his wife are well.", {"E119"}};
}

TEST(Lexicon, RewritePreservesCase) {
  EXPECT_EQ(lexicon().rewrite("He told HIS brother. he", Sex::kFemale), "She told HER sister. she");
  EXPECT_EQ(lexicon().rewrite("Mr. Smith, a Gentleman", Sex::kFemale), "Ms. Smith, a Lady");
  EXPECT_EQ(lexicon().rewrite("She thanked her mother", Sex::kMale), "He thanked his father");
  // Whole words only.
  EXPECT_EQ(lexicon().rewrite("the theme: hematology, manual", Sex::kFemale),
            "the theme: hematology, manual");
  EXPECT_THROW(lexicon().rewrite("he", Sex::kAny), PreconditionError);
}

TEST(Lexicon, FirstRowWinsForSharedTargets) {
  // "him" and "his" both map to "her"; the reverse takes the first row.
  EXPECT_EQ(lexicon().rewrite("him", Sex::kFemale), "her");
  EXPECT_EQ(lexicon().rewrite("her", Sex::kMale), "his");
  EXPECT_TRUE(lexicon().contains("Husband"));
}

TEST(Lexicon, RejectsMalformedRows) {
  EXPECT_THROW(GenderLexicon::from_tsv("he\tshe\textra\n"), ParseError);
  EXPECT_THROW(GenderLexicon::from_tsv("he she\n"), ParseError);
  EXPECT_THROW(GenderLexicon::from_tsv("mr.\tms\n"), ParseError);
  EXPECT_EQ(GenderLexicon::from_tsv("# c\n\nhe\tshe\n").size(), 1u);
}

TEST(Records, ParseValidatesEachLine) {
  auto rs = parse_records(
      R"({"record_id":"a","sex":"Male","ethnicity":"White","insurance":"Other","note":"n","gold_codes":["e11.9","E119","I10"]})"
      "\n");
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].gold_codes, (std::vector<std::string>{"E119", "I10"}));
  try {
    parse_records("\n{\"record_id\":\"a\"}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("records line 2"), std::string::npos) << e.what();
  }
  const std::string line =
      R"({"record_id":"a","sex":"Male","ethnicity":"White","insurance":"Other","note":"n","gold_codes":["I10"]})";
  EXPECT_THROW(parse_records(line + "\n" + line + "\n"), ValidationError);
  EXPECT_THROW(
      parse_records(
          R"({"record_id":"b","sex":"Male","ethnicity":"White","insurance":"Other","note":"n","gold_codes":[]})"),
      ValidationError);
  EXPECT_THROW(
      parse_records(
          R"({"record_id":"b","sex":"Robot","ethnicity":"White","insurance":"Other","note":"n","gold_codes":["I10"]})"),
      Error);
}

TEST(Records, RoundTripThroughJson) {
  auto r = baseline();
  auto back = parse_records(to_json(r).dump());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].note, r.note);
  EXPECT_EQ(back[0].gold_codes, r.gold_codes);
}

TEST(Counterfactual, SexChangeRewritesNoteOnly) {
  auto v = make_counterfactual(baseline(), Axis::kSex, "Female", lexicon(),
                               Placement::kDemographicsFirst);
  EXPECT_EQ(v.record.sex, Sex::kFemale);
  // Only male-side words move; "wife" is already on the target side.
  EXPECT_EQ(v.record.note, "Ms. Doe says she and her wife are well.");
  EXPECT_EQ(v.descriptor(), "Sex=Female");
  EXPECT_EQ(v.id(), "r1|Sex=Female|first");
  EXPECT_EQ(v.record.gold_codes, baseline().gold_codes);
}

TEST(Counterfactual, OtherAxesLeaveNoteUntouched) {
  auto e = make_counterfactual(baseline(), Axis::kEthnicity, "Asian", lexicon(),
                               Placement::kDemographicsLast);
  EXPECT_EQ(e.record.note, baseline().note);
  EXPECT_EQ(e.record.ethnicity, Ethnicity::kAsian);
  EXPECT_EQ(e.record.sex, Sex::kMale);
  auto i = make_counterfactual(baseline(), Axis::kInsurance, "Medicare", lexicon(),
                               Placement::kDemographicsLast);
  EXPECT_EQ(i.record.insurance, Insurance::kMedicare);
  EXPECT_THROW(make_counterfactual(baseline(), Axis::kEthnicity, "White", lexicon(),
                                   Placement::kDemographicsFirst),
               PreconditionError);
}

TEST(Templates, PlacementSwapsBlocks) {
  PromptTemplate tpl{"<{{demographics}}|{{note}}>", "{{sex}}/{{ethnicity}}/{{insurance}}"};
  auto r = baseline();
  r.note = "NOTE {{x}}";  // slots in the note are literal text
  EXPECT_EQ(render_prompt(r, tpl, Placement::kDemographicsFirst), "<Male/White/Other|NOTE {{x}}>");
  EXPECT_EQ(render_prompt(r, tpl, Placement::kDemographicsLast), "<NOTE {{x}}|Male/White/Other>");
  PromptTemplate reversed{"[{{note}}] [{{demographics}}]", "{{sex}}"};
  EXPECT_EQ(render_prompt(r, reversed, Placement::kDemographicsFirst), "[Male] [NOTE {{x}}]");
}

TEST(Templates, ValidationErrors) {
  auto r = baseline();
  EXPECT_THROW(render_prompt(r, {"{{note}}", "{{sex}}"}, Placement::kDemographicsFirst), TemplateError);
  EXPECT_THROW(render_prompt(r, {"{{demographics}}{{note}}{{note}}", "{{sex}}"},
                             Placement::kDemographicsFirst),
               TemplateError);
  EXPECT_THROW(render_prompt(r, {"{{demographics}}{{note}}", "{{age}}"}, Placement::kDemographicsFirst),
               TemplateError);
  EXPECT_THROW(render_prompt(r, {"{{demographics}}{{note}} {{", "{{sex}}"},
                             Placement::kDemographicsFirst),
               TemplateError);
  r.note = "   ";
  EXPECT_THROW(render_prompt(r, default_prompt_template(), Placement::kDemographicsFirst),
               TemplateError);
}

TEST(Templates, DefaultTemplateRoundTrips) {
  auto tpl = default_prompt_template();
  EXPECT_NO_THROW(tpl.validate());
  auto back = PromptTemplate::from_json(tpl.to_json());
  EXPECT_EQ(back.body, tpl.body);
  const std::string p = render_prompt(baseline(), tpl, Placement::kDemographicsLast);
  EXPECT_LT(p.find("Mr. Doe"), p.find("Sex: Male"));
}

TEST(Plan, FourteenVariantsPerBaselineRecord) {
  auto plan = variant_plan({baseline("a"), baseline("b")}, lexicon());
  ASSERT_EQ(plan.size(), 28u);
  EXPECT_EQ(plan[0].id(), "a|factual|first");
  EXPECT_EQ(plan[1].id(), "a|factual|last");
  EXPECT_EQ(plan[2].id(), "a|Sex=Female|first");
  EXPECT_EQ(plan[13].id(), "a|Insurance=Medicare|last");
  std::set<std::string> ids;
  for (const auto& v : plan) ids.insert(v.id());
  EXPECT_EQ(ids.size(), plan.size());
}

TEST(Plan, AxesFilterAndNonBaselineSkipped) {
  std::vector<std::string> warnings;
  auto prev = set_log_sink([&](LogLevel, std::string_view m) { warnings.emplace_back(m); });
  auto other = baseline("x");
  other.sex = Sex::kFemale;
  auto plan = variant_plan({baseline("a"), other}, lexicon(), {{Axis::kInsurance}});
  set_log_sink(prev);
  EXPECT_EQ(plan.size(), 6u);
  EXPECT_FALSE(warnings.empty());
}

TEST(Corpus, FixtureNotesRoundTripUnderSexRewrite) {
  auto records = load_records(fixture("notes_50.jsonl"));
  ASSERT_EQ(records.size(), 50u);
  for (const auto& r : records) {
    const std::string f = lexicon().rewrite(r.note, Sex::kFemale);
    EXPECT_NE(f, r.note);
    EXPECT_EQ(lexicon().rewrite(f, Sex::kMale), r.note) << r.record_id;
  }
}

}  // namespace
}  // namespace clinbias::cf
