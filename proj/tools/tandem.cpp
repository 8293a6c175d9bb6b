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


// Command-line front end: chunk planning, scoring, evaluation, silver-data
// filtering and tandem training runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tandem/tandem.hpp"

namespace fs = std::filesystem;
using namespace tandem;
using nlohmann::json;

namespace {

DatasetTaxonomy pick_taxonomy(const std::string& name, const std::string& file) {
  const auto all = file.empty() ? builtin_taxonomies() : load_taxonomies(file);
  const auto it = all.find(name);
  if (it == all.end()) throw Error(ErrorCode::kInvalidArgument, "unknown taxonomy '" + name + "'");
  return it->second;
}

RewardWeights parse_weights(const std::string& text) {
  if (text.find(',') == std::string::npos) return RewardWeights::preset(text);
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stod(item));
  if (v.size() != 5) throw Error(ErrorCode::kInvalidArgument, "--weights needs a preset or five numbers");
  RewardWeights w{v[0], v[1], v[2], v[3], v[4]};
  w.validate();
  return w;
}

std::map<std::string, VideoAnnotation> annotations_by_id(const std::string& path) {
  std::map<std::string, VideoAnnotation> out;
  for (const auto& j : read_jsonl(path)) {
    auto a = j.get<VideoAnnotation>();
    out[a.video_id] = a;
  }
  return out;
}

std::vector<MediaManifest> read_media(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<MediaManifest> out;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception&) {
    for (const auto& j : read_jsonl(path)) out.push_back(j.get<MediaManifest>());
    return out;
  }
  if (doc.is_array()) {
    for (const auto& j : doc) out.push_back(j.get<MediaManifest>());
  } else {
    out.push_back(doc.get<MediaManifest>());
  }
  return out;
}

// Refuses to delete anything that is not a previous run directory.
void clear_destination(const fs::path& dir, bool force) {
  if (!fs::exists(dir)) return;
  if (!force) throw Error(ErrorCode::kIoError, dir.string() + " exists (use --force to replace it)");
  const bool empty = fs::is_directory(dir) && fs::is_empty(dir);
  if (!empty && !fs::exists(dir / kRunHashFile)) {
    throw Error(ErrorCode::kIoError, dir.string() + " does not look like a run directory; not removing it");
  }
  fs::remove_all(dir);
}

int cmd_chunk_plan(const std::string& manifest, bool commands) {
  json out = json::array();
  for (const auto& m : read_media(manifest)) {
    const auto plans = plan_chunks(m);
    json entry{{"video_id", m.video_id}, {"duration", m.duration}, {"chunks", plans}};
    if (commands) entry["commands"] = render_extraction_commands(plans, m);
    out.push_back(entry);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_score(const std::string& pred_path, const std::string& gt_path, const std::string& weights,
              const std::string& tax_name, const std::string& tax_file, std::size_t length_limit) {
  const auto tax = pick_taxonomy(tax_name, tax_file);
  const auto outcome = parse(read_file(pred_path), tax.labels, tax.targets);
  const auto truth = json::parse(read_file(gt_path)).get<GroundTruth>();
  CompositeOptions opt;
  opt.length_limit = length_limit;
  const auto w = parse_weights(weights);
  const auto b = composite(outcome, truth, w, tax.labels, opt);
  json violations = json::array();
  for (const auto& v : outcome.violations) violations.push_back(v);
  std::cout << json{{"weights", w}, {"rewards", b}, {"recoverable", outcome.recoverable()},
                    {"violations", violations}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gt_path, const std::string& tax_name,
                 const std::string& tax_file, bool as_json, bool no_loc, bool no_targets) {
  const auto tax = pick_taxonomy(tax_name, tax_file);
  std::vector<VideoPrediction> preds;
  for (const auto& rec : read_jsonl(pred_path)) preds.push_back(prediction_from_record(rec, tax));
  std::vector<VideoAnnotation> gt;
  for (auto& [id, a] : annotations_by_id(gt_path)) gt.push_back(a);
  EvaluationOptions opt;
  opt.localization = !no_loc;
  opt.targets = !no_targets;
  const auto report = evaluate_run(preds, gt, tax.labels, opt);
  if (as_json) {
    std::cout << report_to_json(report).dump(2) << "\n";
  } else {
    std::cout << report_to_table(report);
    if (report.unpredicted_annotations) {
      std::cout << report.unpredicted_annotations << " annotated videos had no prediction\n";
    }
  }
  return 0;
}

int cmd_sft_filter(const std::string& cand_path, const std::string& gt_path, const std::string& out_dir,
                   bool force) {
  std::map<std::string, VideoAnnotation> gt;
  if (!gt_path.empty()) gt = annotations_by_id(gt_path);
  std::vector<SilverCandidate> candidates;
  for (auto j : read_jsonl(cand_path)) {
    if (!gt_path.empty()) {
      const auto id = j.at("video_id").get<std::string>();
      const auto it = gt.find(id);
      if (it == gt.end()) throw Error(ErrorCode::kMissingAnnotation, "no annotation for " + id);
      j["ground_truth_label"] = it->second.label;
    }
    candidates.push_back(j.get<SilverCandidate>());
  }
  const auto res = sft_filter(candidates);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  auto dump = [&](const char* name, const std::vector<SilverCandidate>& items) {
    const fs::path p = dir / name;
    if (fs::exists(p) && !force) throw Error(ErrorCode::kIoError, p.string() + " exists (use --force)");
    std::string text;
    for (const auto& c : items) text += json(c).dump() + "\n";
    write_file(p, text);
  };
  dump("kept.jsonl", res.kept);
  dump("discarded.jsonl", res.discarded);
  std::cout << "kept " << res.kept.size() << " of " << candidates.size() << " candidates -> " << dir.string() << "\n";
  return 0;
}

struct Datasets {
  SyntheticDataset train, eval;
};

Datasets load_datasets(const RunConfig& cfg, const DatasetTaxonomy& tax) {
  if (!cfg.manifest.empty()) {
    const auto m = load_manifest(cfg.manifest, tax);
    return {dataset_from_manifest(m, cfg.split, tax.labels), dataset_from_manifest(m, cfg.eval_split, tax.labels)};
  }
  const auto& t = cfg.toy;
  return {synthetic_dataset(tax, t.videos, t.data_seed, t.max_duration, t.time_step),
          synthetic_dataset(tax, t.videos, hash_combine(t.data_seed, 1), t.max_duration, t.time_step)};
}

json evaluate_pair(ModalityPolicy& vision, ModalityPolicy& audio, const SyntheticDataset& eval,
                   const DatasetTaxonomy& tax) {
  json out;
  if (eval.tasks.empty()) return out;
  out["vision"] = report_to_json(evaluate_run(infer_videos(vision, audio, eval.tasks, tax), eval.annotations, tax.labels));
  out["audio"] = report_to_json(evaluate_run(infer_videos(audio, vision, eval.tasks, tax), eval.annotations, tax.labels));
  return out;
}

int finish_run(const TrainingResult& res, json report, const RunConfig& cfg, const fs::path& dir, bool force) {
  const auto discipline = check_discipline(res.log, cfg.tandem.phase_length);
  report["discipline"] = {{"frozen_constant", discipline.frozen_constant},
                          {"strict_alternation", discipline.strict_alternation},
                          {"context_flow", discipline.context_flow},
                          {"history_bound", discipline.history_bound},
                          {"problems", discipline.problems}};
  std::size_t skipped = 0, retried = 0;
  for (const auto& r : res.log.records()) {
    skipped += r.status == "skipped";
    retried += r.status == "retried";
  }
  report["steps"] = {{"total", res.log.size()}, {"skipped", skipped}, {"retried", retried}};
  clear_destination(dir, force);
  const auto hash = persist_run(res.log, report, cfg.raw, dir);
  std::cout << "steps " << res.log.size() << " (" << skipped << " skipped, " << retried << " retried), discipline "
            << (discipline.ok() ? "ok" : "VIOLATED") << "\n";
  if (report.contains("eval")) {
    for (const char* role : {"vision", "audio"}) {
      const auto& r = report["eval"][role];
      std::printf("%-6s accuracy %.4f  macro F1 %.4f\n", role, r["accuracy"].get<double>(), r["macro_f1"].get<double>());
    }
  }
  std::cout << "run written to " << dir.string() << " (content hash " << hex64(hash) << ")\n";
  return discipline.ok() ? 0 : 2;
}

fs::path output_dir(const std::string& flag, const RunConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  throw Error(ErrorCode::kInvalidArgument, "no output directory (use --out or out_dir in the config)");
}

int cmd_train_toy(const std::string& config_path, const std::string& out, bool force, std::optional<std::size_t> steps) {
  const auto cfg = load_run_config(config_path);
  const auto tax = cfg.resolve_taxonomy();
  const auto data = load_datasets(cfg, tax);
  const StructuredActionSpace space(tax.labels, tax.targets, cfg.toy.time_step);
  ToyModalityPolicy vision(ModalityRole::kVision, ToyPolicy(space, cfg.toy.buckets, cfg.toy.temperature), cfg.toy.training);
  ToyModalityPolicy audio(ModalityRole::kAudio, ToyPolicy(space, cfg.toy.buckets, cfg.toy.temperature), cfg.toy.training);
  json report;
  report["baseline"] = evaluate_pair(vision, audio, data.eval, tax);
  const auto res = run_training(TandemState::initial(cfg.tandem), PolicyPair{vision, audio}, data.train.tasks,
                                steps.value_or(cfg.tandem.total_steps), cfg.tandem, tax);
  report["eval"] = evaluate_pair(vision, audio, data.eval, tax);
  return finish_run(res, report, cfg, output_dir(out, cfg), force);
}

int cmd_tandem_run(const std::string& config_path, const std::string& out, bool force, std::optional<std::size_t> steps) {
  const auto cfg = load_run_config(config_path);
  if (!cfg.uses_endpoints()) throw Error(ErrorCode::kInvalidArgument, "config has no endpoints (use train-toy)");
  const auto tax = cfg.resolve_taxonomy();
  const auto data = load_datasets(cfg, tax);
  const fs::path dir = output_dir(out, cfg);
  auto sink = [&](const char* role) {
    if (cfg.update_sink.empty()) return std::string();
    return cfg.update_sink + "." + role + ".jsonl";
  };
  EndpointModalityPolicy vision(ModalityRole::kVision, make_endpoint(*cfg.vision_endpoint), cfg.vision_endpoint->client,
                                tax, sink("vision"), cfg.sampling_temperature);
  EndpointModalityPolicy audio(ModalityRole::kAudio, make_endpoint(*cfg.audio_endpoint), cfg.audio_endpoint->client,
                               tax, sink("audio"), cfg.sampling_temperature);
  const auto res = run_training(TandemState::initial(cfg.tandem), PolicyPair{vision, audio}, data.train.tasks,
                                steps.value_or(cfg.tandem.total_steps), cfg.tandem, tax);
  json report;
  report["eval"] = evaluate_pair(vision, audio, data.eval, tax);
  return finish_run(res, report, cfg, dir, force);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tandem multimodal hate-video training and evaluation tools"};
  app.require_subcommand(1);

  std::string manifest;
  bool commands = false;
  auto* plan = app.add_subcommand("chunk-plan", "Plan 30 s chunks, frame times and extraction commands");
  plan->add_option("--manifest", manifest, "Media manifest (JSON object, array or JSONL)")->required()->check(CLI::ExistingFile);
  plan->add_flag("--commands", commands, "Include ffmpeg extraction commands");

  std::string pred, gt, weights = "cfg-a", tax_name = "hatemm", tax_file;
  std::size_t length_limit = kDefaultSummaryWordLimit;
  auto* score = app.add_subcommand("score", "Score one XML prediction against ground truth");
  score->add_option("--pred", pred, "Prediction XML file")->required()->check(CLI::ExistingFile);
  score->add_option("--gt", gt, "Ground truth JSON {label, segments, targets}")->required()->check(CLI::ExistingFile);
  score->add_option("--weights", weights, "cfg-a, cfg-b, cfg-c or five comma-separated numbers")->capture_default_str();
  score->add_option("--length-limit", length_limit, "Summary word limit")->capture_default_str();

  bool as_json = false, no_loc = false, no_targets = false;
  auto* eval = app.add_subcommand("evaluate", "Video-level metrics for chunk predictions");
  eval->add_option("--pred", pred, "Prediction records JSONL {video_id, chunks:[{chunk_index, xml}]}")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Annotations JSONL")->required()->check(CLI::ExistingFile);
  eval->add_flag("--json", as_json, "Print the report as JSON");
  eval->add_flag("--no-localization", no_loc, "Skip IoU metrics");
  eval->add_flag("--no-targets", no_targets, "Skip target metrics");

  for (auto* sub : {score, eval}) {
    sub->add_option("--taxonomy", tax_name, "Dataset taxonomy name")->capture_default_str();
    sub->add_option("--taxonomy-file", tax_file, "Taxonomy config JSON")->check(CLI::ExistingFile);
  }

  std::string candidates, out;
  bool force = false;
  auto* sft = app.add_subcommand("sft-filter", "Keep silver predictions whose label is correct");
  sft->add_option("--candidates", candidates, "Candidates JSONL")->required()->check(CLI::ExistingFile);
  sft->add_option("--gt", gt, "Annotations JSONL supplying ground-truth labels")->check(CLI::ExistingFile);
  sft->add_option("--out", out, "Output directory")->required();
  sft->add_flag("--force", force, "Overwrite existing outputs");

  std::string config;
  std::optional<std::size_t> steps;
  auto* toy = app.add_subcommand("train-toy", "Tandem training of two toy tabular policies");
  auto* run = app.add_subcommand("tandem-run", "Tandem training against inference endpoints");
  for (auto* sub : {toy, run}) {
    sub->add_option("--config", config, "Run config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Run directory (default: out_dir from the config)");
    sub->add_option("--steps", steps, "Override total optimizer steps");
    sub->add_flag("--force", force, "Replace an existing run directory");
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return cmd_chunk_plan(manifest, commands);
    if (*score) return cmd_score(pred, gt, weights, tax_name, tax_file, length_limit);
    if (*eval) return cmd_evaluate(pred, gt, tax_name, tax_file, as_json, no_loc, no_targets);
    if (*sft) return cmd_sft_filter(candidates, gt, out, force);
    if (*toy) return cmd_train_toy(config, out, force, steps);
    if (*run) return cmd_tandem_run(config, out, force, steps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
