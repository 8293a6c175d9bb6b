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


// Acceptance gate. One line per criterion; exit status is non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tandem/tandem.hpp"

using namespace tandem;

namespace {

// Tolerances and budgets.
constexpr double kWorkedExampleIouTol = 1e-6;
constexpr double kWorkedExampleSeconds = 1.0;
constexpr int kMetricRuns = 1000;
constexpr double kRasterTol = 1e-3;
constexpr double kMetricSeconds = 60.0;
constexpr int kAdvantageGroups = 2000;
constexpr double kAdvantageTol = 1e-9;
constexpr int kGradientInstances = 120;
constexpr double kFdEps = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr std::size_t kAscentSteps = 200;
constexpr std::size_t kAscentGroup = 4;
constexpr double kAscentTarget = 0.9;
constexpr int kAscentSeedsRequired = 4;
constexpr double kAscentSeconds = 300.0;
constexpr double kTokenLevelLr = 2.0;
constexpr double kSequenceLevelLr = 8.0;
constexpr std::size_t kTandemSteps = 40;
constexpr double kTandemSeconds = 300.0;
constexpr int kRoundTrips = 1000;
constexpr int kTilingDurations = 2000;
constexpr double kSchemaSeconds = 30.0;
constexpr double kPresetTol = 1e-9;
constexpr int kSilverCandidates = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ----
Outcome worked_examples() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetTaxonomy hatemm{LabelTaxonomy::hatemm(), TargetTaxonomy::hatemm()};
  const DatasetTaxonomy mhc{LabelTaxonomy::multihateclip(), TargetTaxonomy::multihateclip()};

  const auto p1 = parse(
      "<reasoning>Racist symbol shown.</reasoning><classification>Hate</classification>"
      "<timestamps>0.17-1.89</timestamps><targets>Blacks, Whites</targets>"
      "<summary>The video contains a racist and offensive symbol, text, and image.</summary>",
      hatemm.labels, hatemm.targets);
  o.require(p1.recoverable() && p1.violations.empty(), "hate_video_354 prediction did not parse cleanly");
  const GroundTruth g1{"Hate", {{0.0, 0.20}}, {"Blacks"}};
  if (p1.recoverable()) {
    const double iou = interval_iou(p1.prediction->timestamps, g1.segments);
    const double f1 = target_f1(p1.prediction->targets, g1.targets);
    o.require(std::abs(iou - 0.03 / 1.89) <= kWorkedExampleIouTol, "hate_video_354 IoU " + std::to_string(iou));
    o.require(f1 == 2.0 / 3.0, "hate_video_354 target F1 " + std::to_string(f1));
    o.require(summary_word_count(*p1.prediction) == 11, "hate_video_354 summary word count");
  }

  const auto p2 = parse(
      "<reasoning>Mocking remarks.</reasoning><classification>Offensive</classification>"
      "<timestamps>0-5</timestamps><targets>White</targets><summary>Offensive jokes.</summary>",
      mhc.labels, mhc.targets);
  o.require(p2.recoverable() && p2.violations.empty(), "qFnOYeOmPFQ prediction did not parse cleanly");
  const GroundTruth g2{"Hateful", {{1, 26}}, {"White", "LGBTQ"}};
  if (p2.recoverable()) {
    const double iou = interval_iou(p2.prediction->timestamps, g2.segments);
    const double f1 = target_f1(p2.prediction->targets, g2.targets);
    o.require(std::abs(iou - 4.0 / 26.0) <= kWorkedExampleIouTol, "qFnOYeOmPFQ IoU " + std::to_string(iou));
    o.require(f1 == 2.0 / 3.0, "qFnOYeOmPFQ target F1 " + std::to_string(f1));
    o.require(classification_reward(p2.prediction->classification, g2.label, mhc.labels) == 0.0,
              "qFnOYeOmPFQ misclassification rewarded");
  }
  const double secs = elapsed(t0);
  o.require(secs < kWorkedExampleSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "IoU 0.03/1.89 and 4/26, target F1 2/3 twice, " + std::to_string(secs * 1000) + " ms";
  return o;
}

// ---- 2 ----

std::vector<std::pair<std::int64_t, std::int64_t>> raster_components(const std::vector<Interval>& spans) {
  // Connected runs of 1 ms cells covered by any span, as [first, last+1) cell indices.
  std::int64_t hi = 0;
  for (const auto& s : spans) hi = std::max<std::int64_t>(hi, static_cast<std::int64_t>(std::ceil(s.end * 1000)) + 2);
  std::vector<char> on(static_cast<std::size_t>(hi), 0);
  for (std::int64_t ms = 0; ms < hi; ++ms) {
    const double t = (static_cast<double>(ms) + 0.5) / 1000.0;
    for (const auto& s : spans) {
      if (t > s.start && t < s.end) on[static_cast<std::size_t>(ms)] = 1;
    }
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t ms = 0; ms < hi; ++ms) {
    if (on[static_cast<std::size_t>(ms)] && (ms == 0 || !on[static_cast<std::size_t>(ms - 1)])) out.push_back({ms, ms});
    if (on[static_cast<std::size_t>(ms)]) out.back().second = ms + 1;
  }
  return out;
}

double raster_video_iou(const std::vector<Interval>& pred, const std::vector<Interval>& truth) {
  const auto p = raster_components(pred), g = raster_components(truth);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  double sum = 0;
  for (const auto& a : p) {
    double best = 0;
    for (const auto& b : g) {
      const auto inter = std::max<std::int64_t>(0, std::min(a.second, b.second) - std::max(a.first, b.first));
      const auto uni = (a.second - a.first) + (b.second - b.first) - inter;
      best = std::max(best, static_cast<double>(inter) / static_cast<double>(uni));
    }
    sum += best;
  }
  return sum / static_cast<double>(p.size());
}

Outcome metric_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2024);
  const std::vector<LabelTaxonomy> taxes{LabelTaxonomy::hatemm(), LabelTaxonomy::multihateclip(),
                                         LabelTaxonomy::implihatevid()};
  const std::vector<std::string> names{"A", "B", "C"};
  auto ms_time = [&](std::uint64_t max_ms) { return static_cast<double>(gen() % max_ms) / 1000.0; };
  std::size_t iou_checks = 0;
  for (int run = 0; run < kMetricRuns && o.pass; ++run) {
    const auto& tax = taxes[static_cast<std::size_t>(run) % taxes.size()];
    const auto& labels = tax.labels();
    const std::size_t n = 1 + gen() % 10;
    std::vector<VideoAnnotation> gt;
    std::vector<VideoPrediction> preds;
    std::vector<std::optional<std::string>> oracle_pred;
    std::vector<std::string> oracle_truth;
    std::vector<std::vector<Interval>> raw_pred_spans;
    for (std::size_t v = 0; v < n; ++v) {
      VideoAnnotation a;
      a.video_id = "video_" + std::to_string(v);
      a.label = labels[gen() % labels.size()];
      if (tax.is_hate_bearing(a.label)) {
        const auto k = 1 + gen() % 3;
        for (std::size_t i = 0; i < k; ++i) {
          const double s = ms_time(80000);
          a.hate_segments.push_back({s, s + 0.001 + ms_time(15000)});
        }
        a.targets.insert(names[gen() % names.size()]);
      }
      gt.push_back(a);
      std::vector<std::pair<std::size_t, StructuredPrediction>> chunks;
      std::vector<Interval> absolute;
      const auto chunk_count = gen() % 4;  // zero chunks: nothing recoverable
      for (std::size_t c = 0; c < chunk_count; ++c) {
        StructuredPrediction p;
        p.classification = labels[gen() % labels.size()];
        if (tax.is_hate_bearing(p.classification)) {
          const auto k = gen() % 3;
          for (std::size_t i = 0; i < k; ++i) {
            const double s = ms_time(29000);
            const double e = std::min(30.0, s + 0.001 + ms_time(12000));
            p.timestamps.push_back({s, e});
            absolute.push_back({s + 30.0 * static_cast<double>(c), e + 30.0 * static_cast<double>(c)});
          }
          if (gen() % 2) p.targets.insert(names[gen() % names.size()]);
        }
        chunks.emplace_back(c, p);
      }
      // Oracle label: any/most-severe chunk label, or nothing.
      std::optional<std::string> worst;
      for (const auto& [c, p] : chunks) {
        if (!worst || tax.severity(p.classification) > tax.severity(*worst)) worst = p.classification;
      }
      oracle_pred.push_back(worst);
      oracle_truth.push_back(a.label);
      raw_pred_spans.push_back(absolute);
      preds.push_back(aggregate(a.video_id, chunks, tax));
    }
    const auto report = evaluate_run(preds, gt, tax);
    const auto truth = oracle::classification(oracle_pred, oracle_truth, labels);
    o.require(report.accuracy == truth.accuracy.value(), "accuracy mismatch in run " + std::to_string(run));
    o.require(report.macro_f1 == truth.macro_f1.value(),
              "macro F1 mismatch in run " + std::to_string(run));
    const auto cls = classification_metrics(oracle_pred, oracle_truth, tax);
    o.require(cls.weighted_f1 == truth.weighted_f1.value(),
              "weighted F1 mismatch in run " + std::to_string(run));
    if (report.weighted_f1) {
      o.require(*report.weighted_f1 == cls.weighted_f1, "report weighted F1 differs");
    }
    double iou_sum = 0;
    std::size_t positives = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (!tax.is_hate_bearing(gt[v].label)) continue;
      ++positives;
      const double expect = raster_video_iou(raw_pred_spans[v], gt[v].hate_segments);
      const double got = interval_iou(preds[v].aggregated_segments, coalesce(gt[v].hate_segments));
      o.require(std::abs(expect - got) <= kRasterTol, "IoU " + std::to_string(got) + " vs raster " + std::to_string(expect));
      iou_sum += expect;
      ++iou_checks;
    }
    o.require(report.positives == positives, "positives denominator");
    if (positives) {
      o.require(std::abs(*report.avg_iou - iou_sum / static_cast<double>(positives)) <= kRasterTol, "avg IoU vs raster");
    }
  }
  const double secs = elapsed(t0);
  o.require(secs < kMetricSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(kMetricRuns) + " runs, " + std::to_string(iou_checks) + " rasterised IoUs, " +
               std::to_string(secs) + " s";
  }
  return o;
}

// ---- 3 ----
double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-8 ? std::abs(a - b) : std::abs(a - b) / scale;
}

Outcome gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal(0, 1);
  double worst_sum = 0;
  for (int i = 0; i < kAdvantageGroups; ++i) {
    std::vector<double> r(2 + gen() % 15);
    for (double& v : r) v = normal(gen) * std::pow(10.0, static_cast<double>(gen() % 6) - 2.0);
    const auto a = compute_advantages(r, i % 2 == 0);
    double sum = 0;
    for (double v : a.values) sum += v;
    worst_sum = std::max(worst_sum, std::abs(sum));
  }
  o.require(worst_sum <= kAdvantageTol, "advantage sum " + std::to_string(worst_sum));

  const StructuredActionSpace space(LabelTaxonomy::hatemm(), TargetTaxonomy({"T"}), 10.0, 30.0);
  o.require(space.row_parameter_count() <= 20, "toy instance larger than 20 parameters");
  double worst_rel = 0;
  std::size_t compared = 0;
  for (int inst = 0; inst < kGradientInstances; ++inst) {
    ToyPolicy policy(space, 1, 0.5 + static_cast<double>(gen() % 150) / 100.0);
    for (double& v : policy.mutable_parameters()) v = normal(gen);
    auto group = sample_group(policy, {0, ""}, 2 + gen() % 6, gen());
    std::vector<double> rewards;
    for (std::size_t k = 0; k < group.samples.size(); ++k) rewards.push_back(normal(gen));
    assign_rewards(group, rewards);
    const auto variant = inst % 2 ? LossVariant::kSequenceLevel : LossVariant::kTokenLevel;
    const auto analytic = loss_and_gradient(policy, group, variant);
    const std::vector<double> theta(policy.parameters().begin(), policy.parameters().end());
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& x) {
          // loss recomputed from the oracle's own log-probabilities
          ToyPolicy probe = policy;
          std::copy(x.begin(), x.end(), probe.mutable_parameters().begin());
          double loss = 0;
          for (std::size_t k = 0; k < group.samples.size(); ++k) {
            const auto& tokens = group.samples[k].action_tokens;
            const double w = variant == LossVariant::kSequenceLevel ? 1.0 / static_cast<double>(tokens.size()) : 1.0;
            loss += -group.advantages[k] * w * oracle::trajectory_log_prob(probe, 0, tokens);
          }
          return loss;
        },
        theta, kFdEps);
    for (std::size_t j = 0; j < fd.size(); ++j) {
      worst_rel = std::max(worst_rel, relative_error(analytic.gradient[j], fd[j]));
      ++compared;
    }
  }
  o.require(worst_rel <= kFdRelTol, "worst relative FD error " + std::to_string(worst_rel));
  const double secs = elapsed(t0);
  o.require(secs < kGradientSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "max |sum A| %.1e over %d groups; max rel FD err %.1e over %d instances (%zu coords)",
                  worst_sum, kAdvantageGroups, worst_rel, kGradientInstances, compared);
    o.detail = buf;
  }
  return o;
}

// ---- 4 ----
struct AscentResult {
  double final_probability = 0;
};

AscentResult ascend(LossVariant variant, double lr, std::uint64_t seed) {
  const StructuredActionSpace space(LabelTaxonomy::hatemm(), TargetTaxonomy({"T"}), 15.0, 30.0);
  ToyPolicy policy(space, 1);
  const StructuredPrediction best{"", "Hate", {{0, 15}}, {"T"}, ""};
  const auto best_tokens = space.encode(best);
  const PolicyInput input{seed, ""};
  for (std::size_t step = 0; step < kAscentSteps; ++step) {
    auto group = sample_group(policy, input, kAscentGroup, hash_combine(seed, step));
    std::vector<double> rewards;
    for (const auto& s : group.samples) rewards.push_back(s.action_tokens == best_tokens ? 1.0 : 0.0);
    assign_rewards(group, rewards);
    const auto lg = loss_and_gradient(policy, group, variant);
    apply_update(policy, lg.gradient, lr);
  }
  return {std::exp(oracle::trajectory_log_prob(policy, policy.bucket_of(input), best_tokens))};
}

Outcome reward_ascent() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint64_t> seeds{42, 108, 420, 7, 2025};
  {
    const StructuredActionSpace space(LabelTaxonomy::hatemm(), TargetTaxonomy({"T"}), 15.0, 30.0);
    const ToyPolicy uniform(space, 1);
    const auto tokens = space.encode({"", "Hate", {{0, 15}}, {"T"}, ""});
    const double p0 = std::exp(oracle::trajectory_log_prob(uniform, 0, tokens));
    o.require(std::abs(p0 - 1.0 / 24.0) < 1e-12, "uniform start probability " + std::to_string(p0));
  }
  std::string detail;
  for (auto [variant, lr, name] : {std::tuple{LossVariant::kTokenLevel, kTokenLevelLr, "token"},
                                   std::tuple{LossVariant::kSequenceLevel, kSequenceLevelLr, "sequence"}}) {
    int wins = 0;
    std::string probs;
    for (auto seed : seeds) {
      const double p = ascend(variant, lr, seed).final_probability;
      wins += p > kAscentTarget;
      char buf[16];
      std::snprintf(buf, sizeof buf, "%s%.3f", probs.empty() ? "" : " ", p);
      probs += buf;
    }
    o.require(wins >= kAscentSeedsRequired, std::string(name) + "-level: " + std::to_string(wins) + "/5 seeds [" + probs + "]");
    detail += std::string(detail.empty() ? "" : "; ") + name + " " + std::to_string(wins) + "/5 [" + probs + "]";
  }
  const double secs = elapsed(t0);
  o.require(secs < kAscentSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = detail;
  return o;
}

// ---- 5 ----
Outcome tandem_discipline() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetTaxonomy tax{LabelTaxonomy::hatemm(), TargetTaxonomy({"Blacks", "Jews", "Women"})};
  const auto data = synthetic_dataset(tax, 6, 11);
  const StructuredActionSpace space(tax.labels, tax.targets, 0.5);
  ToyModalityPolicy vision(ModalityRole::kVision, ToyPolicy(space, 16), {LossVariant::kSequenceLevel, 0.5, 0.0, 64});
  ToyModalityPolicy audio(ModalityRole::kAudio, ToyPolicy(space, 16), {LossVariant::kTokenLevel, 0.5, 0.0, 64});
  TandemConfig cfg;
  cfg.batch_size = 2;
  const auto res = run_training(TandemState::initial(cfg), PolicyPair{vision, audio}, data.tasks, kTandemSteps, cfg, tax);
  // audit the persisted form, not the in-memory one
  const auto log = TrainingLog::from_jsonl(res.log.to_jsonl());
  const auto rep = check_discipline(log, cfg.phase_length);
  o.require(log.size() == kTandemSteps, "log has " + std::to_string(log.size()) + " steps");
  o.require(rep.frozen_constant, "(a) frozen hash changed");
  o.require(rep.strict_alternation, "(b) alternation broken");
  o.require(rep.context_flow, "(c) context not from same-step frozen modality");
  o.require(rep.history_bound, "(d) history beyond one chunk");
  std::size_t with_history = 0, contexts = 0, phases = 0;
  for (const auto& r : log.records()) {
    phases = std::max(phases, r.phase + 1);
    for (const auto& g : r.groups) {
      ++contexts;
      with_history += g.context.history_chunk_index.has_value();
    }
  }
  o.require(phases == kTandemSteps / cfg.phase_length, "phase count");
  o.require(with_history > 0, "no step exercised the one-chunk history");
  const double secs = elapsed(t0);
  o.require(secs < kTandemSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(phases) + " phases, " + std::to_string(contexts) + " contexts (" +
               std::to_string(with_history) + " with history), (a)-(d) hold";
  }
  return o;
}

// ---- 6 ----
Outcome schema_and_chunking() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(6);
  const std::vector<DatasetTaxonomy> taxes{{LabelTaxonomy::hatemm(), TargetTaxonomy::hatemm()},
                                           {LabelTaxonomy::multihateclip(), TargetTaxonomy::multihateclip()},
                                           {LabelTaxonomy::implihatevid(), TargetTaxonomy()}};
  const std::string chars = "abc XYZ019<>&;\"'\t\n-,.()[]";
  auto text = [&] {
    std::string s;
    for (auto n = gen() % 50; n > 0; --n) s += chars[gen() % chars.size()];
    return s;
  };
  int trips = 0;
  for (int i = 0; i < kRoundTrips; ++i) {
    const auto& tax = taxes[static_cast<std::size_t>(i) % taxes.size()];
    StructuredPrediction p;
    p.reasoning = text();
    p.summary = text();
    p.classification = tax.labels.labels()[gen() % tax.labels.labels().size()];
    if (tax.labels.is_hate_bearing(p.classification)) {
      for (auto k = gen() % 4; k > 0; --k) {
        const double s = static_cast<double>(gen() % 29000) / 1000.0;
        p.timestamps.push_back({s, std::min(30.0, s + 0.001 + static_cast<double>(gen() % 20000) / 1000.0)});
      }
      for (const auto& name : tax.targets.names()) {
        if (gen() % 3 == 0) p.targets.insert(name);
      }
    }
    const auto back = parse(serialize(p, tax.labels), tax.labels, tax.targets);
    const bool same = back.recoverable() && back.violations.empty() && *back.prediction == p;
    o.require(same, "round trip failed for: " + serialize(p));
    trips += same;
  }
  std::uniform_real_distribution<double> dur(0.0, 1e5);
  int tiled = 0;
  std::size_t max_frames = 0;
  for (int i = 0; i < kTilingDurations; ++i) {
    double d = dur(gen);
    if (i % 10 == 0) d = 30.0 * static_cast<double>(1 + gen() % 3333);
    if (i % 10 == 1) d = std::nextafter(30.0 * static_cast<double>(1 + gen() % 3333), 0.0);
    if (i % 10 == 2) d = static_cast<double>(gen() % 1000 + 1) / 997.0;
    if (!(d > 0)) d = 1e5;
    MediaManifest m;
    m.video_id = "v";
    m.duration = d;
    if (i % 2) {
      std::vector<double> cuts;
      double t = 0;
      while ((t += 0.05 + static_cast<double>(gen() % 4000) / 1000.0) < d && cuts.size() < 5000) cuts.push_back(t);
      m.scene_cuts = cuts;
    }
    const auto plans = plan_chunks(m);
    bool ok = !plans.empty() && plans.front().start == 0.0 && plans.back().end == d;
    for (std::size_t k = 0; k < plans.size(); ++k) {
      ok = ok && plans[k].end > plans[k].start && plans[k].length() <= 30.0;
      if (k) ok = ok && plans[k].start == plans[k - 1].end;
      max_frames = std::max(max_frames, plans[k].frame_times.size());
    }
    o.require(ok, "tiling failed for duration " + format_double(d));
    tiled += ok;
  }
  o.require(max_frames <= kMaxFramesPerChunk, "frame schedule of " + std::to_string(max_frames));
  const double secs = elapsed(t0);
  o.require(secs < kSchemaSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(trips) + " round trips, " + std::to_string(tiled) + " durations tiled, max " +
               std::to_string(max_frames) + " frames, " + std::to_string(secs) + " s";
  }
  return o;
}

// ---- 7 ----
Outcome presets() {
  Outcome o;
  const auto c = RewardWeights::preset("cfg-c");
  RewardBreakdown b;
  b.r_len = b.r_fmt = b.r_cls = 1.0;
  b.r_iou = 0.5;
  b.r_tgt = 2.0 / 3.0;
  const double worked = weighted_total(c, b);
  o.require(std::abs(worked - 5.0 / 6.0) <= kPresetTol, "cfg-c worked example " + std::to_string(worked));

  // End to end through composite(): hate_video_354 scored under cfg-c.
  const DatasetTaxonomy tax{LabelTaxonomy::hatemm(), TargetTaxonomy::hatemm()};
  const StructuredPrediction p{"r", "Hate", {{0.17, 1.89}}, {"Blacks", "Whites"},
                               "The video contains a racist and offensive symbol, text, and image."};
  const auto full = composite(p, GroundTruth{"Hate", {{0.0, 0.20}}, {"Blacks"}}, c, tax.labels);
  const double hand = 0.15 * 1 + 0.15 * 1 + 0.3 * 1 + 0.2 * (0.03 / 1.89) + 0.2 * (2.0 / 3.0);
  o.require(std::abs(full.total - hand) <= kPresetTol, "cfg-c hate_video_354 total " + std::to_string(full.total));
  const auto a = composite(p, GroundTruth{"Hate", {{0.0, 0.20}}, {"Blacks"}}, RewardWeights::preset("cfg-a"), tax.labels);
  o.require(std::abs(a.total - (3.0 + 0.03 / 1.89 + 2.0 / 3.0)) <= kPresetTol, "cfg-a hate_video_354 total");

  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    RewardBreakdown r;
    r.r_len = u(gen);
    r.r_fmt = u(gen);
    r.r_cls = u(gen);
    r.r_iou = u(gen);
    r.r_tgt = u(gen);
    RewardWeights w{u(gen), u(gen), u(gen), u(gen), u(gen)};
    const double base = weighted_total(w, r);
    const double comps[5] = {r.r_len, r.r_fmt, r.r_cls, r.r_iou, r.r_tgt};
    double* fields[5] = {&w.len, &w.fmt, &w.cls, &w.tau, &w.z};
    for (int k = 0; k < 5; ++k) {
      const double keep = *fields[k];
      const double t = u(gen) * 3;
      *fields[k] = keep * t;
      const double scaled = weighted_total(w, r);
      // f(λ_k) is affine with slope comps[k]
      worst = std::max(worst, std::abs(scaled - (base + (keep * t - keep) * comps[k])));
      *fields[k] = keep;
    }
  }
  o.require(worst <= kPresetTol, "linearity residual " + std::to_string(worst));
  if (o.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "worked example %.12f, hate_video_354 cfg-c %.6f, linearity residual %.1e", worked,
                  full.total, worst);
    o.detail = buf;
  }
  return o;
}

// ---- 8 ----
Outcome silver_filter() {
  Outcome o;
  std::mt19937_64 gen(8);
  const auto labels = LabelTaxonomy::multihateclip().labels();
  std::vector<SilverCandidate> input;
  std::vector<bool> correct;
  for (int i = 0; i < kSilverCandidates; ++i) {
    const bool is_correct = gen() % 3 != 0;
    const std::string truth = labels[gen() % labels.size()];
    std::string pred = truth;
    if (!is_correct) {
      while (pred == truth) pred = labels[gen() % labels.size()];
    }
    input.push_back({"v" + std::to_string(i), {"r", pred, {{1, 2}}, {"Man"}, "s"}, truth});
    correct.push_back(is_correct);
  }
  const auto res = sft_filter(input);
  std::vector<std::string> expect_kept, expect_discarded, kept, discarded;
  for (std::size_t i = 0; i < input.size(); ++i) (correct[i] ? expect_kept : expect_discarded).push_back(input[i].video_id);
  for (const auto& k : res.kept) kept.push_back(k.video_id);
  for (const auto& d : res.discarded) discarded.push_back(d.video_id);
  o.require(kept == expect_kept, "kept set differs from the correct subset");
  o.require(discarded == expect_discarded, "discarded set differs");
  for (const auto& k : res.kept) {
    const auto it = std::find_if(input.begin(), input.end(), [&](const auto& c) { return c.video_id == k.video_id; });
    o.require(*it == k, "kept candidate altered");
  }
  if (o.pass) o.detail = std::to_string(kept.size()) + " of " + std::to_string(input.size()) + " kept, matches flags exactly";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Worked scoring examples", worked_examples},
      {"Metric oracle equivalence", metric_oracles},
      {"Advantage and gradient correctness", gradients},
      {"GRPO reward ascent", reward_ascent},
      {"Tandem discipline", tandem_discipline},
      {"Schema and chunking", schema_and_chunking},
      {"Composite reward presets", presets},
      {"SFT filter", silver_filter},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    failed += !out.pass;
    std::printf("[%s] %zu. %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
