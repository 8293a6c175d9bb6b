// Copyright 2026 The Tandem Authors.
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


#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "tandem/evaluation.hpp"

namespace tandem {
namespace {

const LabelTaxonomy kHate = LabelTaxonomy::hatemm();
const LabelTaxonomy kMhc = LabelTaxonomy::multihateclip();

StructuredPrediction chunk(const std::string& label, std::vector<Interval> spans = {},
                           std::set<std::string> targets = {}) {
  return {"r", label, std::move(spans), std::move(targets), "s"};
}

TEST(Aggregate, AnyHateChunkMakesVideoHate) {
  const auto v = aggregate("v", {{0, chunk("Non Hate")}, {1, chunk("Hate")}, {2, chunk("Non Hate")}}, kHate);
  EXPECT_EQ(v.aggregated_label, "Hate");
}

TEST(Aggregate, OffsetsSpansByChunk) {
  const auto v = aggregate("v", {{1, chunk("Hate", {{3.0, 7.5}})}}, kHate);
  EXPECT_EQ(v.aggregated_segments, (std::vector<Interval>{{33.0, 37.5}}));
}

TEST(Aggregate, MulticlassTakesMostSevere) {
  EXPECT_EQ(aggregate("v", {{0, chunk("Normal")}, {1, chunk("Offensive")}}, kMhc).aggregated_label, "Offensive");
  EXPECT_EQ(aggregate("v", {{0, chunk("Hateful")}, {1, chunk("Offensive")}}, kMhc).aggregated_label, "Hateful");
}

TEST(Aggregate, CoalescesAcrossChunkBoundary) {
  const auto v = aggregate("v", {{0, chunk("Hate", {{20, 30}})}, {1, chunk("Hate", {{0, 5}})}}, kHate);
  EXPECT_EQ(v.aggregated_segments, (std::vector<Interval>{{20, 35}}));
}

TEST(Aggregate, UnionsTargets) {
  const auto v = aggregate("v", {{0, chunk("Hate", {}, {"Jews"})}, {3, chunk("Hate", {}, {"Women", "Jews"})}}, kHate);
  EXPECT_EQ(v.aggregated_targets, (std::set<std::string>{"Jews", "Women"}));
}

TEST(Aggregate, DuplicateChunkRejected) {
  try {
    aggregate("v", {{0, chunk("Hate")}, {0, chunk("Non Hate")}}, kHate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateChunk);
  }
}

TEST(Aggregate, NoChunksGivesNoLabel) { EXPECT_FALSE(aggregate("v", {}, kHate).aggregated_label.has_value()); }

TEST(Aggregate, SingleChunkIsIdentity) {
  const auto c = chunk("Hate", {{1, 2}, {4, 6}}, {"Jews"});
  const auto v = aggregate("v", {{0, c}}, kHate);
  EXPECT_EQ(v.aggregated_label, c.classification);
  EXPECT_EQ(v.aggregated_segments, c.timestamps);
}

TEST(Classification, HandComputedExample) {
  const auto m = classification_metrics({"Hate", "Non Hate", "Non Hate", "Non Hate"},
                                        {"Hate", "Hate", "Non Hate", "Non Hate"}, kHate);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  EXPECT_NEAR(m.macro_f1, (2.0 / 3.0 + 0.8) / 2.0, 1e-12);
}

TEST(Classification, PerfectPredictions) {
  const auto m = classification_metrics({"Normal", "Hateful", "Offensive"}, {"Normal", "Hateful", "Offensive"}, kMhc);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_f1, 1.0);
  EXPECT_EQ(m.weighted_f1, 1.0);
}

TEST(Classification, SingleClassOnBalancedBinary) {
  const auto m = classification_metrics({"Hate", "Hate", "Hate", "Hate"}, {"Hate", "Hate", "Non Hate", "Non Hate"}, kHate);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_NEAR(m.macro_f1, 1.0 / 3.0, 1e-12);
}

TEST(Classification, SpuriousAbsentClassScoresZero) {
  const auto m = classification_metrics({"Normal", "Hateful"}, {"Normal", "Normal"}, kMhc);
  ASSERT_EQ(m.per_class.size(), 2u);
  EXPECT_NEAR(m.macro_f1, (2.0 / 3.0 + 0.0) / 2.0, 1e-12);
}

TEST(Classification, MissingPredictionIsAMiss) {
  const auto m = classification_metrics({std::nullopt, "Hate"}, {"Hate", "Hate"}, kHate);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_NEAR(m.macro_f1, 2.0 / 3.0, 1e-12);
}

TEST(Classification, MatchesConfusionMatrixOracle) {
  std::mt19937_64 gen(41);
  for (int i = 0; i < 500; ++i) {
    const auto& tax = i % 2 ? kHate : kMhc;
    const auto& labels = tax.labels();
    const std::size_t n = 1 + gen() % 10;
    std::vector<std::optional<std::string>> pred;
    std::vector<std::string> truth;
    for (std::size_t k = 0; k < n; ++k) {
      truth.push_back(labels[gen() % labels.size()]);
      if (gen() % 8 == 0) {
        pred.push_back(std::nullopt);
      } else {
        pred.push_back(labels[gen() % labels.size()]);
      }
    }
    const auto m = classification_metrics(pred, truth, tax);
    const auto o = oracle::classification(pred, truth, labels);
    EXPECT_EQ(m.accuracy, o.accuracy.value());
    EXPECT_EQ(m.macro_f1, o.macro_f1.value());
    EXPECT_EQ(m.weighted_f1, o.weighted_f1.value());
  }
}

TEST(Localization, HandComputedExample) {
  // IoUs 0.6, 0.4, 0.55 built from single intervals
  const std::vector<std::vector<Interval>> pred{{{0, 6}}, {{0, 4}}, {{0, 5.5}}};
  const std::vector<std::vector<Interval>> truth{{{0, 10}}, {{0, 10}}, {{0, 10}}};
  const auto m = localization_metrics(pred, truth);
  EXPECT_NEAR(m.avg_iou, (0.6 + 0.4 + 0.55) / 3.0, 1e-12);
  EXPECT_NEAR(m.acc_at_05, 2.0 / 3.0, 1e-12);
}

TEST(Localization, ExactIouHalfNotCounted) {
  const auto m = localization_metrics({{{0, 5}}}, {{{0, 10}}});
  EXPECT_EQ(m.avg_iou, 0.5);
  EXPECT_EQ(m.acc_at_05, 0.0);
}

TEST(Localization, AllExact) {
  const auto m = localization_metrics({{{1, 2}}, {{3, 9}}}, {{{1, 2}}, {{3, 9}}});
  EXPECT_EQ(m.avg_iou, 1.0);
  EXPECT_EQ(m.acc_at_05, 1.0);
}

TEST(Targets, Examples) {
  auto m = target_metrics({{"Blacks", "Whites"}}, {{"Blacks"}});
  EXPECT_NEAR(m.avg_f1, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(m.exact_match, 0.0);
  m = target_metrics({{"Jews"}}, {{"Jews"}});
  EXPECT_EQ(m.avg_f1, 1.0);
  EXPECT_EQ(m.exact_match, 1.0);
}

VideoPrediction predicted(const std::string& id, std::vector<std::pair<std::size_t, StructuredPrediction>> chunks,
                          const LabelTaxonomy& tax = kHate) {
  return aggregate(id, std::move(chunks), tax);
}

TEST(EvaluateRun, WorkedTwoVideoRun) {
  const std::vector<VideoAnnotation> gt{{"hate_video_354", "Hate", {{0.0, 0.20}}, {"Blacks"}},
                                        {"non_hate_video_36", "Non Hate", {}, {}}};
  std::vector<VideoPrediction> preds{
      predicted("hate_video_354", {{0, chunk("Hate", {{0.17, 1.89}}, {"Blacks", "Whites"})}}),
      predicted("non_hate_video_36", {{0, chunk("Non Hate")}})};
  const auto r = evaluate_run(preds, gt, kHate);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.positives, 1u);
  EXPECT_NEAR(*r.avg_iou, 0.03 / 1.89, 1e-12);
  EXPECT_NEAR(*r.avg_iou, 0.0159, 1e-4);
  EXPECT_NEAR(*r.target_avg_f1, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(*r.target_exact_match, 0.0);
  EXPECT_FALSE(r.weighted_f1.has_value());
}

TEST(EvaluateRun, EmptyRunIsInvalid) {
  const auto r = evaluate_run({}, {{"a", "Hate", {}, {}}}, kHate);
  EXPECT_FALSE(r.valid);
  EXPECT_EQ(r.unpredicted_annotations, 1u);
}

TEST(EvaluateRun, PredictionWithoutAnnotationRejected) {
  try {
    evaluate_run({predicted("x", {{0, chunk("Hate")}})}, {}, kHate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingAnnotation);
  }
}

TEST(EvaluateRun, OrderInvariant) {
  std::mt19937_64 gen(2);
  std::vector<VideoAnnotation> gt;
  std::vector<VideoPrediction> preds;
  for (int i = 0; i < 8; ++i) {
    const std::string id = "v" + std::to_string(i);
    const bool hate = i % 3 != 0;
    gt.push_back({id, hate ? "Offensive" : "Normal", hate ? std::vector<Interval>{{1.0 * i, 5.0 + i}} : std::vector<Interval>{},
                  hate ? std::set<std::string>{"Man"} : std::set<std::string>{}});
    preds.push_back(predicted(id, {{0, chunk(i % 2 ? "Hateful" : "Normal", {}, {})}}, kMhc));
  }
  const auto a = report_to_json(evaluate_run(preds, gt, kMhc));
  std::shuffle(preds.begin(), preds.end(), gen);
  std::shuffle(gt.begin(), gt.end(), gen);
  EXPECT_EQ(report_to_json(evaluate_run(preds, gt, kMhc)), a);
  EXPECT_TRUE(a["weighted_f1"].is_number());
}

TEST(EvaluateRun, PositivesOnlyDenominators) {
  const std::vector<VideoAnnotation> gt{{"a", "Hate", {{0, 10}}, {"Jews"}}, {"b", "Non Hate", {}, {}},
                                        {"c", "Non Hate", {}, {}}};
  const std::vector<VideoPrediction> preds{predicted("a", {{0, chunk("Hate", {{0, 10}}, {"Jews"})}}),
                                           predicted("b", {{0, chunk("Hate", {{0, 3}}, {"Women"})}}),
                                           predicted("c", {{0, chunk("Non Hate")}})};
  const auto r = evaluate_run(preds, gt, kHate);
  EXPECT_EQ(r.positives, 1u);
  EXPECT_EQ(*r.avg_iou, 1.0);
  EXPECT_EQ(*r.target_avg_f1, 1.0);
}

TEST(EvaluateRun, SuppressedFieldsAreAbsent) {
  const std::vector<VideoAnnotation> gt{{"a", "Hate", {{0, 10}}, {"Jews"}}};
  EvaluationOptions opt;
  opt.localization = false;
  const auto r = evaluate_run({predicted("a", {{0, chunk("Hate")}})}, gt, kHate, opt);
  EXPECT_FALSE(r.avg_iou.has_value());
  EXPECT_TRUE(r.target_avg_f1.has_value());
  EXPECT_NE(report_to_table(r).find("--"), std::string::npos);
}

TEST(Records, PredictionFromXmlRecord) {
  const DatasetTaxonomy tax{kHate, TargetTaxonomy::hatemm()};
  const auto rec = nlohmann::json::parse(R"({"video_id":"v","chunks":[
    {"chunk_index":0,"xml":"<reasoning>r</reasoning><classification>Non Hate</classification><timestamps>No hate timestamps</timestamps><targets>None</targets><summary>s</summary>"},
    {"chunk_index":1,"xml":"<reasoning>r</reasoning><classification>Hate</classification><timestamps>2-4</timestamps><targets>Jews</targets><summary>s</summary>"},
    {"chunk_index":2,"xml":"garbage"}]})");
  const auto v = prediction_from_record(rec, tax);
  EXPECT_EQ(v.aggregated_label, "Hate");
  EXPECT_EQ(v.aggregated_segments, (std::vector<Interval>{{32, 34}}));
  EXPECT_EQ(v.per_chunk.size(), 2u);
}

TEST(Records, AnnotationJsonRoundTrip) {
  const VideoAnnotation a{"v", "Hate", {{1.5, 2.25}}, {"Jews", "Women"}};
  EXPECT_EQ(nlohmann::json(a).get<VideoAnnotation>(), a);
  EXPECT_THROW(validate(VideoAnnotation{"v", "Non Hate", {{1, 2}}, {}}, kHate), Error);
  EXPECT_THROW(validate(VideoAnnotation{"v", "Spam", {}, {}}, kHate), Error);
}

}  // namespace
}  // namespace tandem
