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


// Alternating-modality training. Each phase freezes one modality; every step
// the frozen side runs a greedy self-constrained context round (SCCR) on the
// chunk, and the trainable side samples a group conditioned on that context,
// is scored, and takes one update. Roles swap at the end of each phase.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/evaluation.hpp"
#include "tandem/grpo.hpp"
#include "tandem/media_chunker.hpp"
#include "tandem/modality.hpp"
#include "tandem/model_client.hpp"
#include "tandem/reward_engine.hpp"
#include "tandem/structured_output.hpp"
#include "tandem/training_log.hpp"
#include "tandem/util.hpp"

namespace tandem {

inline constexpr std::size_t kDefaultPhaseLength = 10;

/// One chunk of one video with its chunk-relative ground truth.
struct ChunkTask {
  std::string video_id;
  std::size_t chunk_index = 0;
  ChunkPlan plan;
  GroundTruth truth;
  std::vector<std::string> frame_refs;
  std::string audio_ref;

  std::uint64_t observation_key() const { return fnv1a(video_id + "#" + std::to_string(chunk_index)); }
};

/// The same producer's context for the immediately preceding chunk.
struct PriorContext {
  std::size_t chunk_index = 0;
  std::size_t step = 0;
  std::optional<StructuredPrediction> prediction;
};

struct CrossModalContext {
  ModalityRole producer = ModalityRole::kAudio;
  std::string video_id;
  std::size_t chunk_index = 0;
  std::size_t step = 0;
  std::optional<StructuredPrediction> structured_context;  // absent: empty-context marker
  std::optional<PriorContext> history;
  std::string provenance = "zero-shot-sccr";

  bool empty() const { return !structured_context.has_value(); }

  std::string id() const {
    return "sccr:" + std::to_string(step) + ":" + to_string(producer) + ":" + video_id + ":" +
           std::to_string(chunk_index);
  }

  /// Prompt block injected ahead of the trainable modality's instructions.
  std::string render() const {
    auto body = [](const std::optional<StructuredPrediction>& p) {
      return p ? serialize(*p) : std::string("[no usable context]\n");
    };
    std::string out;
    if (history) {
      out += "=== CROSS-MODAL CONTEXT (" + std::string(to_string(producer)) + ", chunk " +
             std::to_string(history->chunk_index) + ") ===\n" + body(history->prediction);
    }
    out += "=== CROSS-MODAL CONTEXT (" + std::string(to_string(producer)) + ", chunk " +
           std::to_string(chunk_index) + ") ===\n" + body(structured_context);
    out += "=== END CONTEXT ===\n";
    return out;
  }

  ContextRef ref() const {
    ContextRef r;
    r.id = id();
    r.producer = producer;
    r.step = step;
    r.video_id = video_id;
    r.chunk_index = chunk_index;
    r.empty = empty();
    if (history) {
      r.history_chunk_index = history->chunk_index;
      r.history_step = history->step;
    }
    return r;
  }
};

/// Instruction prompt for one modality; the context block goes first.
inline std::string build_prompt(ModalityRole role, const DatasetTaxonomy& tax, const ChunkTask& task,
                                const std::string& context_block) {
  std::string labels, targets;
  for (const auto& l : tax.labels.labels()) labels += (labels.empty() ? "" : ", ") + l;
  for (const auto& t : tax.targets.names()) targets += (targets.empty() ? "" : ", ") + t;
  std::string prompt = context_block;
  prompt += role == ModalityRole::kVision
                ? "You are shown key frames from a video chunk of at most 30 seconds.\n"
                : "You are given the audio track of a video chunk of at most 30 seconds.\n";
  prompt += "Chunk " + std::to_string(task.chunk_index) + " spans " + format_double(task.plan.start) + "-" +
            format_double(task.plan.end) + " s of the video. Timestamps are relative to the chunk start.\n";
  prompt += "Classify the chunk as one of: " + labels + ".\n";
  prompt += "Targets must come from: " + (targets.empty() ? std::string("(none)") : targets) + ".\n";
  prompt += "Answer with <reasoning>, <classification>, <timestamps> (S-E pairs, comma separated, or '" +
            std::string(kNoHateTimestamps) + "'), <targets> (comma separated, or 'None') and <summary>.\n";
  return prompt;
}

struct Completion {
  std::string raw_text;
  std::vector<int> tokens;  // filled by token-level policies
};

struct GroupUpdate {
  const ChunkTask* task = nullptr;
  std::string context_block;
  std::vector<Completion> completions;
  std::vector<double> advantages;
};

/// A modality's policy as seen by the scheduler.
class ModalityPolicy {
 public:
  virtual ~ModalityPolicy() = default;
  virtual ModalityRole role() const = 0;
  virtual std::string greedy_completion(const ChunkTask& task, const std::string& context_block) = 0;
  virtual std::vector<Completion> sample_completions(const ChunkTask& task, const std::string& context_block,
                                                     std::size_t group_size, std::uint64_t seed) = 0;
  /// One optimiser step over every group of the current step.
  virtual void update(const std::vector<GroupUpdate>& groups) = 0;
  virtual bool frozen() const = 0;
  virtual void set_frozen(bool frozen) = 0;
  virtual std::uint64_t parameter_hash() const = 0;
};

struct ToyTrainingOptions {
  LossVariant variant = LossVariant::kSequenceLevel;
  double learning_rate = 0.5;
  double kl_coefficient = 0.0;
  std::size_t max_tokens = kDefaultMaxTokens;
};

/// ModalityPolicy backed by an in-process ToyPolicy.
class ToyModalityPolicy : public ModalityPolicy {
 public:
  ToyModalityPolicy(ModalityRole role, ToyPolicy policy, ToyTrainingOptions options = {})
      : role_(role), policy_(std::move(policy)), options_(options) {
    if (options_.kl_coefficient != 0.0) reference_ = policy_;
  }

  ModalityRole role() const override { return role_; }
  const ToyPolicy& policy() const { return policy_; }
  ToyPolicy& policy() { return policy_; }

  PolicyInput input_for(const ChunkTask& task, const std::string& context_block) const {
    return PolicyInput{hash_combine(task.observation_key(), static_cast<std::uint64_t>(role_)), context_block};
  }

  std::string greedy_completion(const ChunkTask& task, const std::string& context_block) override {
    return serialize(greedy_decode(policy_, input_for(task, context_block), options_.max_tokens).decoded,
                     policy_.space().chunk_seconds());
  }

  std::vector<Completion> sample_completions(const ChunkTask& task, const std::string& context_block,
                                             std::size_t group_size, std::uint64_t seed) override {
    SamplingOptions so;
    so.max_tokens = options_.max_tokens;
    const auto group = sample_group(policy_, input_for(task, context_block), group_size, seed, so);
    std::vector<Completion> out;
    for (const auto& s : group.samples) {
      out.push_back({serialize(s.decoded, policy_.space().chunk_seconds()), s.action_tokens});
    }
    return out;
  }

  void update(const std::vector<GroupUpdate>& groups) override {
    if (policy_.frozen()) throw Error(ErrorCode::kFrozenPolicy, std::string(to_string(role_)) + " policy is frozen");
    std::vector<double> total(policy_.parameter_count(), 0.0);
    for (const auto& g : groups) {
      GroupRollout rollout;
      rollout.bucket = policy_.bucket_of(input_for(*g.task, g.context_block));
      for (const auto& c : g.completions) {
        RolloutSample s;
        s.action_tokens = c.tokens;
        rollout.samples.push_back(std::move(s));
      }
      rollout.advantages = g.advantages;
      LossOptions lo;
      lo.kl_coefficient = options_.kl_coefficient;
      if (reference_) {
        for (const auto& s : rollout.samples) {
          lo.reference_log_probs.push_back(token_log_probs(*reference_, rollout.bucket, s.action_tokens));
        }
      }
      const auto lg = loss_and_gradient(policy_, rollout, options_.variant, lo);
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += lg.gradient[j];
    }
    apply_update(policy_, total, options_.learning_rate);
  }

  bool frozen() const override { return policy_.frozen(); }
  void set_frozen(bool frozen) override { policy_.set_frozen(frozen); }
  std::uint64_t parameter_hash() const override { return policy_.parameter_hash(); }

 private:
  ModalityRole role_;
  ToyPolicy policy_;
  ToyTrainingOptions options_;
  std::optional<ToyPolicy> reference_;
};

/// ModalityPolicy backed by a remote inference endpoint. Weights live with an
/// external trainer: update() appends each step's groups and advantages to a
/// line-delimited sink for it to consume.
class EndpointModalityPolicy : public ModalityPolicy {
 public:
  EndpointModalityPolicy(ModalityRole role, std::shared_ptr<Endpoint> endpoint, ClientConfig client,
                         DatasetTaxonomy taxonomy, std::string update_sink = {}, double temperature = 1.0,
                         std::size_t max_tokens = kDefaultMaxTokens)
      : role_(role),
        endpoint_(std::move(endpoint)),
        client_(client),
        taxonomy_(std::move(taxonomy)),
        sink_(std::move(update_sink)),
        temperature_(temperature),
        max_tokens_(max_tokens) {}

  ModalityRole role() const override { return role_; }

  InferenceRequest request_for(const ChunkTask& task, const std::string& context_block) const {
    InferenceRequest req;
    req.modality = role_;
    req.prompt_text = build_prompt(role_, taxonomy_, task, context_block);
    if (role_ == ModalityRole::kVision) {
      req.media_refs = task.frame_refs;
    } else if (!task.audio_ref.empty()) {
      req.media_refs = {task.audio_ref};
    }
    req.max_tokens = max_tokens_;
    req.tag = task.video_id + "#" + std::to_string(task.chunk_index);
    return req;
  }

  std::string greedy_completion(const ChunkTask& task, const std::string& context_block) override {
    return complete(*endpoint_, request_for(task, context_block), client_).raw_text;
  }

  std::vector<Completion> sample_completions(const ChunkTask& task, const std::string& context_block,
                                             std::size_t group_size, std::uint64_t seed) override {
    std::vector<InferenceRequest> reqs;
    for (std::size_t i = 0; i < group_size; ++i) {
      auto req = request_for(task, context_block);
      req.decode = DecodeParams::sample(temperature_, hash_combine(seed, i));
      reqs.push_back(std::move(req));
    }
    const auto results = batch_complete(*endpoint_, reqs, client_, client_.max_in_flight);
    std::vector<Completion> out;
    for (const auto& r : results) {
      if (!r.ok()) throw *r.error;
      out.push_back({r.response->raw_text, {}});
    }
    return out;
  }

  void update(const std::vector<GroupUpdate>& groups) override {
    if (frozen_) throw Error(ErrorCode::kFrozenPolicy, std::string(to_string(role_)) + " policy is frozen");
    std::lock_guard<std::mutex> lock(mu_);
    if (!sink_.empty()) {
      std::ofstream out(sink_, std::ios::app);
      if (!out) throw Error(ErrorCode::kIoError, "cannot append to update sink " + sink_);
      for (const auto& g : groups) {
        nlohmann::json rec{{"modality", to_string(role_)},
                           {"video_id", g.task->video_id},
                           {"chunk_index", g.task->chunk_index},
                           {"prompt", request_for(*g.task, g.context_block).prompt_text},
                           {"advantages", g.advantages}};
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& c : g.completions) comps.push_back(c.raw_text);
        rec["completions"] = comps;
        out << rec.dump() << "\n";
      }
    }
    ++updates_;
  }

  bool frozen() const override { return frozen_; }
  void set_frozen(bool frozen) override { frozen_ = frozen; }
  std::uint64_t parameter_hash() const override {
    return hash_combine(fnv1a(endpoint_->describe()), updates_);
  }

 private:
  ModalityRole role_;
  std::shared_ptr<Endpoint> endpoint_;
  ClientConfig client_;
  DatasetTaxonomy taxonomy_;
  std::string sink_;
  double temperature_;
  std::size_t max_tokens_;
  bool frozen_ = false;
  std::uint64_t updates_ = 0;
  std::mutex mu_;
};

struct PolicyPair {
  ModalityPolicy& vision;
  ModalityPolicy& audio;

  ModalityPolicy& get(ModalityRole role) { return role == ModalityRole::kVision ? vision : audio; }
};

struct TandemConfig {
  std::size_t phase_length = kDefaultPhaseLength;
  std::size_t total_steps = 200;
  ModalityRole first_trainable = ModalityRole::kVision;
  std::size_t group_size = kDefaultGroupSize;
  std::size_t batch_size = 1;
  RewardWeights weights = RewardWeights::preset("cfg-a");
  std::size_t length_limit = kDefaultSummaryWordLimit;
  bool normalize_advantages = false;
  std::uint64_t seed = 42;
};

struct TandemState {
  std::size_t phase_index = 0;
  ModalityRole trainable = ModalityRole::kVision;
  std::size_t step_in_phase = 0;
  std::size_t phase_length = kDefaultPhaseLength;
  std::size_t global_step = 0;
  std::size_t cursor = 0;  // position in the cycled batch stream

  static TandemState initial(const TandemConfig& config) {
    TandemState s;
    s.trainable = config.first_trainable;
    s.phase_length = config.phase_length;
    return s;
  }

  friend bool operator==(const TandemState&, const TandemState&) = default;
};

/// Holds at most one prior chunk of context per video for the current producer.
class ContextHistory {
 public:
  void clear() { latest_.clear(); }

  std::optional<PriorContext> lookup(const std::string& video_id, std::size_t chunk_index) const {
    auto it = latest_.find(video_id);
    if (it == latest_.end() || chunk_index == 0 || it->second.chunk_index + 1 != chunk_index) return std::nullopt;
    return it->second;
  }

  void remember(const CrossModalContext& ctx) {
    latest_[ctx.video_id] = PriorContext{ctx.chunk_index, ctx.step, ctx.structured_context};
  }

 private:
  std::map<std::string, PriorContext> latest_;
};

/// Greedy zero-shot pass of the frozen modality. Unparseable output yields
/// the empty-context marker instead of failing.
inline CrossModalContext sccr(ModalityPolicy& frozen_policy, const ChunkTask& task, std::size_t step,
                              const DatasetTaxonomy& taxonomy, ContextHistory* history = nullptr) {
  if (!frozen_policy.frozen()) {
    throw Error(ErrorCode::kInvalidArgument, "SCCR producer must be frozen for the current phase");
  }
  CrossModalContext ctx;
  ctx.producer = frozen_policy.role();
  ctx.video_id = task.video_id;
  ctx.chunk_index = task.chunk_index;
  ctx.step = step;
  const std::string raw = frozen_policy.greedy_completion(task, std::string());
  auto outcome = parse(raw, taxonomy.labels, taxonomy.targets);
  ctx.structured_context = std::move(outcome.prediction);
  if (history) {
    ctx.history = history->lookup(task.video_id, task.chunk_index);
    history->remember(ctx);
  }
  return ctx;
}

namespace detail {

inline std::uint64_t step_seed(std::uint64_t base, std::size_t global_step, std::size_t slot) {
  return hash_combine(hash_combine(base, global_step), slot);
}

inline StepRecord run_step(const TandemState& state, PolicyPair policies, std::span<const ChunkTask> stream,
                           const TandemConfig& config, const DatasetTaxonomy& taxonomy, ContextHistory& history) {
  ModalityPolicy& trainable = policies.get(state.trainable);
  ModalityPolicy& frozen = policies.get(opposite(state.trainable));
  StepRecord rec;
  rec.global_step = state.global_step;
  rec.phase = state.phase_index;
  rec.step_in_phase = state.step_in_phase;
  rec.trainable = state.trainable;
  rec.frozen_hash_before = frozen.parameter_hash();
  rec.trainable_hash_before = trainable.parameter_hash();

  std::vector<GroupUpdate> updates;
  double reward_sum = 0.0;
  std::size_t reward_count = 0;
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    const ChunkTask& task = stream[(state.cursor + b) % stream.size()];
    const CrossModalContext ctx = sccr(frozen, task, state.global_step, taxonomy, &history);
    GroupUpdate update;
    update.task = &task;
    update.context_block = ctx.render();
    GroupRecord group;
    group.video_id = task.video_id;
    group.chunk_index = task.chunk_index;
    group.seed = step_seed(config.seed, state.global_step, b);
    group.context = ctx.ref();
    update.completions = trainable.sample_completions(task, update.context_block, config.group_size, group.seed);
    CompositeOptions co;
    co.length_limit = config.length_limit;
    for (const auto& c : update.completions) {
      const auto outcome = parse(c.raw_text, taxonomy.labels, taxonomy.targets);
      for (const auto& v : outcome.violations) ++group.violations[to_string(v.kind)];
      const auto br = composite(outcome, task.truth, config.weights, taxonomy.labels, co);
      group.rewards.push_back(br.total);
      reward_sum += br.total;
      ++reward_count;
    }
    const auto adv = compute_advantages(group.rewards, config.normalize_advantages);
    group.baseline = adv.baseline;
    group.advantages = adv.values;
    update.advantages = adv.values;
    rec.groups.push_back(std::move(group));
    updates.push_back(std::move(update));
  }
  trainable.update(updates);
  rec.mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
  rec.frozen_hash_after = frozen.parameter_hash();
  rec.trainable_hash_after = trainable.parameter_hash();
  if (rec.frozen_hash_after != rec.frozen_hash_before) {
    throw std::logic_error("frozen modality parameters changed during a step");
  }
  return rec;
}

}  // namespace detail

struct PhaseResult {
  TandemState state;
  std::vector<StepRecord> records;
};

/// Runs `steps` (default: a full phase) steps with one modality trainable,
/// then swaps roles. A failing step is retried once, then logged as skipped.
inline PhaseResult run_phase(TandemState state, PolicyPair policies, std::span<const ChunkTask> stream,
                             const TandemConfig& config, const DatasetTaxonomy& taxonomy,
                             std::optional<std::size_t> steps = std::nullopt) {
  if (stream.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch stream");
  if (state.phase_length == 0) throw Error(ErrorCode::kInvalidArgument, "phase length must be positive");
  if (config.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  const std::size_t n = steps.value_or(state.phase_length);
  if (n == 0 || n > state.phase_length) throw Error(ErrorCode::kInvalidArgument, "phase step count out of range");

  ModalityPolicy& trainable = policies.get(state.trainable);
  ModalityPolicy& frozen = policies.get(opposite(state.trainable));
  trainable.set_frozen(false);
  frozen.set_frozen(true);
  const std::uint64_t frozen_hash = frozen.parameter_hash();

  ContextHistory history;
  PhaseResult result;
  for (std::size_t i = 0; i < n; ++i) {
    state.step_in_phase = i;
    StepRecord rec;
    bool done = false;
    std::string first_error;
    for (int attempt = 0; attempt < 2 && !done; ++attempt) {
      try {
        rec = detail::run_step(state, policies, stream, config, taxonomy, history);
        if (attempt == 1) {
          rec.status = "retried";
          rec.error = first_error;
        }
        done = true;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kFrozenPolicy) throw;
        if (attempt == 0) {
          first_error = e.what();
        } else {
          rec = StepRecord{};
          rec.global_step = state.global_step;
          rec.phase = state.phase_index;
          rec.step_in_phase = i;
          rec.trainable = state.trainable;
          rec.status = "skipped";
          rec.error = e.what();
          rec.frozen_hash_before = rec.frozen_hash_after = frozen.parameter_hash();
          rec.trainable_hash_before = rec.trainable_hash_after = trainable.parameter_hash();
        }
      }
    }
    if (frozen.parameter_hash() != frozen_hash) {
      throw std::logic_error("frozen modality parameters changed during a phase");
    }
    rec.truncated_phase = n < state.phase_length;
    result.records.push_back(std::move(rec));
    state.cursor = (state.cursor + config.batch_size) % stream.size();
    ++state.global_step;
  }
  state.step_in_phase = 0;
  ++state.phase_index;
  state.trainable = opposite(state.trainable);
  result.state = state;
  return result;
}

struct TrainingResult {
  TandemState state;
  TrainingLog log;
};

/// Whole phases until `total_steps`; a trailing partial phase is marked truncated.
inline TrainingResult run_training(TandemState state, PolicyPair policies, std::span<const ChunkTask> stream,
                                   std::size_t total_steps, const TandemConfig& config,
                                   const DatasetTaxonomy& taxonomy) {
  TrainingResult out;
  std::size_t remaining = total_steps;
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, state.phase_length);
    auto phase = run_phase(state, policies, stream, config, taxonomy, n);
    for (auto& rec : phase.records) out.log.append(std::move(rec));
    state = phase.state;
    remaining -= n;
  }
  out.state = state;
  return out;
}

// ---- log audit ----

struct DisciplineReport {
  bool frozen_constant = true;
  bool strict_alternation = true;
  bool context_flow = true;
  bool history_bound = true;
  std::vector<std::string> problems;

  bool ok() const { return frozen_constant && strict_alternation && context_flow && history_bound; }
};

/// Mechanically checks a log for the four tandem invariants: frozen hashes
/// constant within a phase, alternating roles, same-step opposite-modality
/// contexts, and at most one chunk of context history.
inline DisciplineReport check_discipline(const TrainingLog& log, std::size_t phase_length) {
  DisciplineReport rep;
  const auto& recs = log.records();
  std::map<std::size_t, std::vector<const StepRecord*>> phases;
  for (const auto& r : recs) phases[r.phase].push_back(&r);

  std::optional<ModalityRole> prev_role;
  std::optional<std::size_t> prev_phase;
  for (const auto& [phase, steps] : phases) {
    const ModalityRole role = steps.front()->trainable;
    const std::uint64_t frozen_hash = steps.front()->frozen_hash_before;
    std::size_t first_step = steps.front()->global_step;
    if (steps.size() > phase_length) {
      rep.strict_alternation = false;
      rep.problems.push_back("phase " + std::to_string(phase) + " longer than phase length");
    }
    if (prev_phase && phase != *prev_phase + 1) {
      rep.strict_alternation = false;
      rep.problems.push_back("phase " + std::to_string(phase) + " does not follow phase " + std::to_string(*prev_phase));
    }
    if (prev_role && role == *prev_role) {
      rep.strict_alternation = false;
      rep.problems.push_back("phase " + std::to_string(phase) + " repeats trainable " + to_string(role));
    }
    for (const StepRecord* r : steps) {
      if (r->trainable != role) {
        rep.strict_alternation = false;
        rep.problems.push_back("step " + std::to_string(r->global_step) + " switches role mid-phase");
      }
      if (r->frozen_hash_before != frozen_hash || r->frozen_hash_after != frozen_hash) {
        rep.frozen_constant = false;
        rep.problems.push_back("frozen hash changed at step " + std::to_string(r->global_step));
      }
      for (const auto& g : r->groups) {
        const auto& c = g.context;
        if (c.producer != opposite(r->trainable) || c.step != r->global_step || c.video_id != g.video_id ||
            c.chunk_index != g.chunk_index) {
          rep.context_flow = false;
          rep.problems.push_back("context " + c.id + " not produced this step by the frozen modality");
        }
        if (c.history_chunk_index) {
          const bool one_back = c.chunk_index >= 1 && *c.history_chunk_index + 1 == c.chunk_index;
          const bool this_phase = c.history_step && *c.history_step >= first_step && *c.history_step <= c.step;
          if (!one_back || !this_phase) {
            rep.history_bound = false;
            rep.problems.push_back("context " + c.id + " carries history beyond one chunk");
          }
        }
      }
    }
    prev_role = role;
    prev_phase = phase;
  }
  return rep;
}

// ---- synthetic data and inference ----

/// Chunk-relative ground truth for one chunk of an annotated video.
inline GroundTruth chunk_ground_truth(const VideoAnnotation& video, const ChunkPlan& plan, const LabelTaxonomy& tax) {
  GroundTruth gt;
  for (Interval s : video.hate_segments) {
    if (clip(s, plan.start, plan.end)) gt.segments.push_back({s.start - plan.start, s.end - plan.start});
  }
  const bool hateful_video = tax.is_hate_bearing(video.label);
  // Without segment annotations every chunk inherits the video label.
  const bool chunk_hateful = hateful_video && (video.hate_segments.empty() || !gt.segments.empty());
  gt.label = chunk_hateful ? video.label : tax.negative_label();
  if (chunk_hateful) gt.targets = video.targets;
  return gt;
}

inline std::vector<ChunkTask> chunk_tasks(const VideoAnnotation& video, const MediaManifest& media,
                                          const LabelTaxonomy& tax) {
  std::vector<ChunkTask> tasks;
  for (const auto& plan : plan_chunks(media)) {
    ChunkTask t;
    t.video_id = video.video_id;
    t.chunk_index = plan.chunk_index;
    t.truth = chunk_ground_truth(video, plan, tax);
    const std::string stem = media.video_id + "/chunk_" + std::to_string(plan.chunk_index);
    for (std::size_t k = 0; k < plan.frame_times.size(); ++k) t.frame_refs.push_back(stem + "/frame_" + std::to_string(k) + ".jpg");
    t.audio_ref = stem + "/audio.wav";
    t.plan = plan;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

struct SyntheticDataset {
  std::vector<VideoAnnotation> annotations;
  std::vector<MediaManifest> media;
  std::vector<ChunkTask> tasks;
};

/// Random annotated videos whose hate segments sit on the toy time grid.
inline SyntheticDataset synthetic_dataset(const DatasetTaxonomy& tax, std::size_t videos, std::uint64_t seed,
                                          double max_duration = 95.0, double time_step = 0.5) {
  std::mt19937_64 gen(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * detail::unit_uniform(gen); };
  SyntheticDataset ds;
  const auto& labels = tax.labels.labels();
  for (std::size_t v = 0; v < videos; ++v) {
    MediaManifest m;
    m.video_id = "toy_video_" + std::to_string(v);
    m.duration = std::round(uniform(5.0, max_duration) / time_step) * time_step;
    m.has_audio = gen() % 5 != 0;
    VideoAnnotation a;
    a.video_id = m.video_id;
    a.label = labels[gen() % labels.size()];
    if (tax.labels.is_hate_bearing(a.label)) {
      const auto chunks = static_cast<std::size_t>(std::ceil(m.duration / kChunkSeconds));
      const double chunk_start = static_cast<double>(gen() % chunks) * kChunkSeconds;
      const double chunk_end = std::min(chunk_start + kChunkSeconds, m.duration);
      const auto cells = static_cast<std::size_t>(std::llround((chunk_end - chunk_start) / time_step));
      if (cells >= 1) {
        const std::size_t s = gen() % cells;
        const std::size_t e = s + 1 + gen() % (cells - s);
        a.hate_segments.push_back({chunk_start + time_step * static_cast<double>(s),
                                   chunk_start + time_step * static_cast<double>(e)});
      }
      const auto& names = tax.targets.names();
      if (!names.empty()) {
        a.targets.insert(names[gen() % names.size()]);
        if (gen() % 2) a.targets.insert(names[gen() % names.size()]);
      }
    }
    for (auto& t : chunk_tasks(a, m, tax.labels)) ds.tasks.push_back(std::move(t));
    ds.annotations.push_back(std::move(a));
    ds.media.push_back(std::move(m));
  }
  return ds;
}

/// Runs SCCR from `context_producer` and a greedy pass of `model` on every
/// chunk, then aggregates per video.
inline std::vector<VideoPrediction> infer_videos(ModalityPolicy& model, ModalityPolicy& context_producer,
                                                 std::span<const ChunkTask> tasks, const DatasetTaxonomy& taxonomy) {
  const bool was_frozen = context_producer.frozen();
  context_producer.set_frozen(true);
  std::map<std::string, std::vector<std::pair<std::size_t, StructuredPrediction>>> per_video;
  std::vector<std::string> order;
  ContextHistory history;
  for (const auto& task : tasks) {
    const auto ctx = sccr(context_producer, task, 0, taxonomy, &history);
    auto outcome = parse(model.greedy_completion(task, ctx.render()), taxonomy.labels, taxonomy.targets);
    if (!per_video.count(task.video_id)) order.push_back(task.video_id);
    auto& chunks = per_video[task.video_id];
    if (outcome.prediction) chunks.emplace_back(task.chunk_index, std::move(*outcome.prediction));
  }
  context_producer.set_frozen(was_frozen);
  std::vector<VideoPrediction> out;
  for (const auto& id : order) out.push_back(aggregate(id, std::move(per_video[id]), taxonomy.labels));
  return out;
}

// ---- config ----

inline void to_json(nlohmann::json& j, const TandemConfig& c) {
  j = nlohmann::json{{"phase_length", c.phase_length},
                     {"total_steps", c.total_steps},
                     {"first_trainable", to_string(c.first_trainable)},
                     {"group_size", c.group_size},
                     {"batch_size", c.batch_size},
                     {"weights", c.weights},
                     {"length_limit", c.length_limit},
                     {"normalize_advantages", c.normalize_advantages},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TandemConfig& c) {
  c = TandemConfig{};
  c.phase_length = j.value("phase_length", kDefaultPhaseLength);
  c.total_steps = j.value("total_steps", std::size_t{200});
  c.first_trainable = modality_from_string(j.value("first_trainable", std::string("vision")));
  c.group_size = j.value("group_size", kDefaultGroupSize);
  c.batch_size = j.value("batch_size", std::size_t{1});
  if (j.contains("weights")) c.weights = j.at("weights").get<RewardWeights>();
  c.length_limit = j.value("length_limit", kDefaultSummaryWordLimit);
  c.normalize_advantages = j.value("normalize_advantages", false);
  c.seed = j.value("seed", std::uint64_t{42});
  if (c.phase_length == 0) throw Error(ErrorCode::kInvalidArgument, "phase_length must be positive");
  if (c.group_size < 2) throw Error(ErrorCode::kInvalidArgument, "group_size must be at least 2");
}

}  // namespace tandem
