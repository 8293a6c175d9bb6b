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


// Group-relative policy optimisation over a desk-scale structured-output
// policy. The loss for a group of G sampled trajectories y_i with rewards R_i
// is  -Σ_i (R_i - R̄) · w_i · Σ_t log π(y_i,t),  where the token-level variant
// uses w_i = 1 and the sequence-level variant w_i = 1/|y_i| (length-normalised
// sequence likelihood). Advantages are mean-centred only unless asked.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tandem/error.hpp"
#include "tandem/interval.hpp"
#include "tandem/structured_output.hpp"
#include "tandem/util.hpp"

namespace tandem {

inline constexpr std::size_t kDefaultGroupSize = 4;
inline constexpr std::size_t kDefaultMaxTokens = 384;

enum class LossVariant { kTokenLevel, kSequenceLevel };

inline const char* to_string(LossVariant v) {
  return v == LossVariant::kTokenLevel ? "token" : "sequence";
}

inline LossVariant loss_variant_from_string(std::string_view s) {
  if (s == "token" || s == "grpo" || s == "token-level") return LossVariant::kTokenLevel;
  if (s == "sequence" || s == "gspo" || s == "sequence-level") return LossVariant::kSequenceLevel;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss variant '" + std::string(s) + "'");
}

/// Token vocabulary and grammar for structured predictions.
///
/// Token ids: labels | NO_SPAN | time grid points | targets | STOP.
/// Decoding visits slots in order: label, span start (or NO_SPAN), span end,
/// then up to T target slots. Targets are emitted in increasing taxonomy
/// order, so every token sequence decodes to a distinct prediction.
class StructuredActionSpace {
 public:
  StructuredActionSpace() = default;
  StructuredActionSpace(const LabelTaxonomy& labels, const TargetTaxonomy& targets,
                        double time_step = 0.5, double chunk_seconds = 30.0)
      : labels_(labels), targets_(targets), time_step_(time_step), chunk_seconds_(chunk_seconds) {
    if (!(time_step > 0.0) || !(chunk_seconds > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "time grid step and chunk length must be positive");
    }
    const double cells = chunk_seconds / time_step;
    if (std::abs(cells - std::round(cells)) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "time step must divide the chunk length");
    }
    time_count_ = static_cast<std::size_t>(std::llround(cells)) + 1;
    if (time_count_ < 2) throw Error(ErrorCode::kInvalidArgument, "time grid needs two points");
    std::size_t offset = 0;
    for (std::size_t s = 0; s < slot_count(); ++s) {
      slot_offsets_.push_back(offset);
      offset += slot_width(s);
    }
    row_params_ = offset;
  }

  const LabelTaxonomy& labels() const { return labels_; }
  const TargetTaxonomy& targets() const { return targets_; }
  std::size_t label_count() const { return labels_.labels().size(); }
  std::size_t time_count() const { return time_count_; }
  std::size_t target_count() const { return targets_.names().size(); }
  double time_step() const { return time_step_; }
  double chunk_seconds() const { return chunk_seconds_; }
  double time_at(std::size_t k) const {
    return k + 1 == time_count_ ? chunk_seconds_ : static_cast<double>(k) * time_step_;
  }

  std::size_t vocabulary_size() const { return label_count() + 1 + time_count_ + target_count() + 1; }
  int no_span_token() const { return static_cast<int>(label_count()); }
  int time_token(std::size_t k) const { return static_cast<int>(label_count() + 1 + k); }
  int target_token(std::size_t m) const { return static_cast<int>(label_count() + 1 + time_count_ + m); }
  int stop_token() const { return static_cast<int>(vocabulary_size() - 1); }

  static constexpr std::size_t kLabelSlot = 0;
  static constexpr std::size_t kStartSlot = 1;
  static constexpr std::size_t kEndSlot = 2;
  static constexpr std::size_t kFirstTargetSlot = 3;

  std::size_t slot_count() const { return kFirstTargetSlot + target_count(); }
  std::size_t slot_width(std::size_t slot) const {
    switch (slot) {
      case kLabelSlot: return label_count();
      case kStartSlot: return time_count_;      // NO_SPAN + starts 0..K-2
      case kEndSlot: return time_count_ - 1;    // ends 1..K-1
      default: return target_count() + 1;       // targets + STOP
    }
  }
  std::size_t slot_offset(std::size_t slot) const { return slot_offsets_.at(slot); }
  /// Logits per context bucket.
  std::size_t row_parameter_count() const { return row_params_; }

  int column_token(std::size_t slot, std::size_t col) const {
    switch (slot) {
      case kLabelSlot: return static_cast<int>(col);
      case kStartSlot: return col == 0 ? no_span_token() : time_token(col - 1);
      case kEndSlot: return time_token(col + 1);
      default: return col == target_count() ? stop_token() : target_token(col);
    }
  }

  /// Decoder position within the grammar.
  struct State {
    std::size_t slot = kLabelSlot;
    int label = -1;
    int start = -1;  // time index
    int end = -1;
    int last_target = -1;
    std::vector<std::size_t> chosen_targets;
    bool done = false;
  };

  std::vector<char> allowed(const State& st) const {
    std::vector<char> mask(slot_width(st.slot), 1);
    if (st.slot == kEndSlot) {
      for (std::size_t c = 0; c < mask.size(); ++c) mask[c] = static_cast<int>(c + 1) > st.start;
    } else if (st.slot >= kFirstTargetSlot) {
      for (std::size_t m = 0; m < target_count(); ++m) mask[m] = static_cast<int>(m) > st.last_target;
    }
    return mask;
  }

  void advance(State& st, std::size_t col) const {
    const bool targets_follow = target_count() > 0;
    switch (st.slot) {
      case kLabelSlot:
        st.label = static_cast<int>(col);
        if (!labels_.is_hate_bearing(labels_.labels()[col])) {
          st.done = true;
        } else {
          st.slot = kStartSlot;
        }
        return;
      case kStartSlot:
        if (col == 0) {
          st.slot = kFirstTargetSlot;
          st.done = !targets_follow;
        } else {
          st.start = static_cast<int>(col - 1);
          st.slot = kEndSlot;
        }
        return;
      case kEndSlot:
        st.end = static_cast<int>(col + 1);
        st.slot = kFirstTargetSlot;
        st.done = !targets_follow;
        return;
      default:
        if (col == target_count()) {
          st.done = true;
          return;
        }
        st.last_target = static_cast<int>(col);
        st.chosen_targets.push_back(col);
        if (col + 1 == target_count()) {
          st.done = true;
        } else {
          ++st.slot;
        }
        return;
    }
  }

  /// Column for `token` at the current slot, or -1 when the token does not
  /// belong to that slot.
  int column_of(const State& st, int token) const {
    for (std::size_t c = 0; c < slot_width(st.slot); ++c) {
      if (column_token(st.slot, c) == token) return static_cast<int>(c);
    }
    return -1;
  }

  StructuredPrediction decode(std::span<const int> tokens) const {
    State st;
    for (int tok : tokens) {
      if (st.done) break;
      const int col = column_of(st, tok);
      if (col < 0 || !allowed(st)[static_cast<std::size_t>(col)]) {
        throw Error(ErrorCode::kShapeMismatch, "token sequence violates the output grammar");
      }
      advance(st, static_cast<std::size_t>(col));
    }
    StructuredPrediction pred;
    if (st.label < 0) throw Error(ErrorCode::kShapeMismatch, "empty trajectory");
    pred.classification = labels_.labels()[static_cast<std::size_t>(st.label)];
    if (st.start >= 0 && st.end >= 0) {
      pred.timestamps.push_back({time_at(static_cast<std::size_t>(st.start)),
                                 time_at(static_cast<std::size_t>(st.end))});
    }
    for (std::size_t m : st.chosen_targets) pred.targets.insert(targets_.names()[m]);
    pred.reasoning = "Structured toy decode.";
    pred.summary = "Chunk judged " + pred.classification + " with " + std::to_string(pred.targets.size()) +
                   " target group(s).";
    return pred;
  }

  /// Inverse of decode() for predictions representable on this grid.
  std::vector<int> encode(const StructuredPrediction& pred) const {
    std::vector<int> tokens;
    const std::size_t label = labels_.severity(pred.classification);
    tokens.push_back(static_cast<int>(label));
    if (!labels_.is_hate_bearing(pred.classification)) return tokens;
    if (pred.timestamps.size() > 1) throw Error(ErrorCode::kInvalidArgument, "toy grammar holds one span");
    if (pred.timestamps.empty()) {
      tokens.push_back(no_span_token());
    } else {
      auto index_of = [&](double t) {
        const double k = t / time_step_;
        if (std::abs(k - std::round(k)) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "span off the time grid");
        return static_cast<std::size_t>(std::llround(k));
      };
      tokens.push_back(time_token(index_of(pred.timestamps[0].start)));
      tokens.push_back(time_token(index_of(pred.timestamps[0].end)));
    }
    std::size_t picked = 0;
    for (std::size_t m = 0; m < target_count(); ++m) {
      if (pred.targets.count(targets_.names()[m])) {
        tokens.push_back(target_token(m));
        ++picked;
      }
    }
    if (picked != pred.targets.size()) throw Error(ErrorCode::kInvalidArgument, "target outside taxonomy");
    const bool ended_by_last_target = !pred.targets.empty() &&
                                      pred.targets.count(targets_.names().back()) > 0;
    if (target_count() > 0 && !ended_by_last_target) tokens.push_back(stop_token());
    return tokens;
  }

 private:
  LabelTaxonomy labels_;
  TargetTaxonomy targets_;
  double time_step_ = 0.5;
  double chunk_seconds_ = 30.0;
  std::size_t time_count_ = 0;
  std::vector<std::size_t> slot_offsets_;
  std::size_t row_params_ = 0;
};

/// What the policy conditions on: an observation key (the chunk) and the
/// injected cross-modal context text. Both are hashed into a context bucket.
struct PolicyInput {
  std::uint64_t observation_key = 0;
  std::string context;
};

/// Tabular softmax policy: one logit row per (context bucket, decoder slot).
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(StructuredActionSpace space, std::size_t context_buckets = 16, double temperature = 1.0)
      : space_(std::move(space)), buckets_(context_buckets), temperature_(temperature) {
    if (buckets_ == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one context bucket");
    if (!(temperature_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
    params_.assign(buckets_ * space_.row_parameter_count(), 0.0);
  }

  const StructuredActionSpace& space() const { return space_; }
  std::size_t context_buckets() const { return buckets_; }
  double temperature() const { return temperature_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen) { frozen_ = frozen; }
  std::uint64_t parameter_hash() const { return fnv1a(std::span<const double>(params_)); }

  std::size_t bucket_of(const PolicyInput& input) const {
    return static_cast<std::size_t>(hash_combine(input.observation_key, fnv1a(input.context)) % buckets_);
  }

  std::size_t row_offset(std::size_t bucket, std::size_t slot) const {
    return bucket * space_.row_parameter_count() + space_.slot_offset(slot);
  }

  /// Masked, tempered softmax for one decoder state. Masked entries are 0.
  std::vector<double> probabilities(std::size_t bucket, const StructuredActionSpace::State& st) const {
    const std::size_t width = space_.slot_width(st.slot);
    const auto mask = space_.allowed(st);
    const double* row = params_.data() + row_offset(bucket, st.slot);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < width; ++c) {
      if (mask[c]) top = std::max(top, row[c] / temperature_);
    }
    if (!std::isfinite(top)) throw Error(ErrorCode::kDegenerateVocabulary, "no finite logit in decoder row");
    std::vector<double> p(width, 0.0);
    double z = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      if (mask[c]) {
        p[c] = std::exp(row[c] / temperature_ - top);
        z += p[c];
      }
    }
    for (double& v : p) v /= z;
    return p;
  }

 private:
  StructuredActionSpace space_;
  std::size_t buckets_ = 1;
  double temperature_ = 1.0;
  std::vector<double> params_;
  bool frozen_ = false;
};

struct RolloutSample {
  std::vector<int> action_tokens;
  std::vector<double> log_probs;
  StructuredPrediction decoded;
  double reward = 0.0;
};

struct GroupRollout {
  std::size_t bucket = 0;
  std::vector<RolloutSample> samples;
  double baseline = 0.0;
  std::vector<double> advantages;
};

struct SamplingOptions {
  bool allow_single = false;
  std::size_t max_tokens = kDefaultMaxTokens;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

template <typename Choose>
RolloutSample decode_trajectory(const ToyPolicy& policy, std::size_t bucket, std::size_t max_tokens,
                                Choose&& choose) {
  const auto& space = policy.space();
  RolloutSample sample;
  StructuredActionSpace::State st;
  while (!st.done && sample.action_tokens.size() < max_tokens) {
    const auto p = policy.probabilities(bucket, st);
    const std::size_t col = choose(p);
    sample.action_tokens.push_back(space.column_token(st.slot, col));
    sample.log_probs.push_back(std::log(p[col]));
    space.advance(st, col);
  }
  sample.decoded = space.decode(sample.action_tokens);
  return sample;
}

}  // namespace detail

/// G independent trajectories, reproducible from `seed`. Rewards unfilled.
inline GroupRollout sample_group(const ToyPolicy& policy, const PolicyInput& input, std::size_t group_size,
                                 std::uint64_t seed, const SamplingOptions& options = {}) {
  if (group_size < 2 && !(options.allow_single && group_size == 1)) {
    throw Error(ErrorCode::kInvalidArgument, "group size must be at least 2");
  }
  if (options.max_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  GroupRollout group;
  group.bucket = policy.bucket_of(input);
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < group_size; ++i) {
    group.samples.push_back(detail::decode_trajectory(
        policy, group.bucket, options.max_tokens, [&](const std::vector<double>& p) {
          const double u = detail::unit_uniform(gen);
          double acc = 0.0;
          std::size_t last = 0;
          for (std::size_t c = 0; c < p.size(); ++c) {
            if (p[c] <= 0.0) continue;
            last = c;
            acc += p[c];
            if (u < acc) return c;
          }
          return last;
        }));
  }
  return group;
}

/// Argmax decode; ties go to the lowest column.
inline RolloutSample greedy_decode(const ToyPolicy& policy, const PolicyInput& input,
                                   std::size_t max_tokens = kDefaultMaxTokens) {
  return detail::decode_trajectory(policy, policy.bucket_of(input), max_tokens,
                                   [](const std::vector<double>& p) {
                                     return static_cast<std::size_t>(
                                         std::max_element(p.begin(), p.end()) - p.begin());
                                   });
}

/// Per-token log π under the current parameters.
inline std::vector<double> token_log_probs(const ToyPolicy& policy, std::size_t bucket, std::span<const int> tokens) {
  const auto& space = policy.space();
  StructuredActionSpace::State st;
  std::vector<double> out;
  out.reserve(tokens.size());
  for (int tok : tokens) {
    if (st.done) throw Error(ErrorCode::kShapeMismatch, "tokens continue past end of grammar");
    const int col = space.column_of(st, tok);
    if (col < 0) throw Error(ErrorCode::kShapeMismatch, "token outside decoder slot");
    const auto p = policy.probabilities(bucket, st);
    const double pc = p[static_cast<std::size_t>(col)];
    out.push_back(pc > 0.0 ? std::log(pc) : -std::numeric_limits<double>::infinity());
    space.advance(st, static_cast<std::size_t>(col));
  }
  return out;
}

/// log π(tokens) under the current parameters.
inline double sequence_log_prob(const ToyPolicy& policy, std::size_t bucket, std::span<const int> tokens) {
  const auto lp = token_log_probs(policy, bucket, tokens);
  return std::accumulate(lp.begin(), lp.end(), 0.0);
}

struct Advantages {
  double baseline = 0.0;
  std::vector<double> values;
};

/// Mean-centred advantages; optionally divided by the group's population std.
inline Advantages compute_advantages(std::span<const double> rewards, bool normalize_std = false) {
  if (rewards.size() < 2) throw Error(ErrorCode::kInvalidArgument, "advantages need a group of at least 2");
  Advantages out;
  out.baseline = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
  out.values.reserve(rewards.size());
  for (double r : rewards) out.values.push_back(r - out.baseline);
  if (normalize_std) {
    double var = 0.0;
    for (double a : out.values) var += a * a;
    const double sd = std::sqrt(var / static_cast<double>(rewards.size()));
    for (double& a : out.values) a = sd > 1e-12 ? a / sd : 0.0;
  }
  return out;
}

/// Copies rewards into the group and fills baseline/advantages.
inline void assign_rewards(GroupRollout& group, std::span<const double> rewards, bool normalize_std = false) {
  if (rewards.size() != group.samples.size()) throw Error(ErrorCode::kShapeMismatch, "one reward per sample");
  for (std::size_t i = 0; i < rewards.size(); ++i) group.samples[i].reward = rewards[i];
  auto adv = compute_advantages(rewards, normalize_std);
  group.baseline = adv.baseline;
  group.advantages = std::move(adv.values);
}

struct LossOptions {
  double kl_coefficient = 0.0;
  // Per-sample, per-token log-probs under a reference policy; required only
  // when kl_coefficient != 0. KL uses the k3 estimator.
  std::vector<std::vector<double>> reference_log_probs;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

inline LossAndGradient loss_and_gradient(const ToyPolicy& policy, const GroupRollout& group,
                                         LossVariant variant, const LossOptions& options = {}) {
  if (group.advantages.size() != group.samples.size()) {
    throw Error(ErrorCode::kShapeMismatch, "advantages not computed for every sample");
  }
  const bool use_kl = options.kl_coefficient != 0.0;
  if (use_kl && options.reference_log_probs.size() != group.samples.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reference log-probs missing for KL term");
  }
  const auto& space = policy.space();
  LossAndGradient out;
  out.gradient.assign(policy.parameter_count(), 0.0);
  const double inv_temp = 1.0 / policy.temperature();

  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const auto& tokens = group.samples[i].action_tokens;
    if (tokens.empty()) throw Error(ErrorCode::kShapeMismatch, "empty trajectory");
    if (use_kl && options.reference_log_probs[i].size() != tokens.size()) {
      throw Error(ErrorCode::kShapeMismatch, "reference log-probs length differs from trajectory");
    }
    const double weight = variant == LossVariant::kSequenceLevel ? 1.0 / static_cast<double>(tokens.size()) : 1.0;
    const double adv = group.advantages[i];
    StructuredActionSpace::State st;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (st.done) throw Error(ErrorCode::kShapeMismatch, "tokens continue past end of grammar");
      const int col = space.column_of(st, tokens[t]);
      if (col < 0) throw Error(ErrorCode::kShapeMismatch, "token outside decoder slot");
      const auto p = policy.probabilities(group.bucket, st);
      const auto a = static_cast<std::size_t>(col);
      if (p[a] <= 0.0) throw Error(ErrorCode::kShapeMismatch, "trajectory token has zero probability");
      const double logp = std::log(p[a]);
      // d(loss)/d(log p) for this token
      double coeff = -adv;
      out.loss += weight * (-adv * logp);
      if (use_kl) {
        const double delta = options.reference_log_probs[i][t] - logp;
        out.loss += weight * options.kl_coefficient * (std::exp(delta) - delta - 1.0);
        coeff += options.kl_coefficient * (1.0 - std::exp(delta));
      }
      coeff *= weight * inv_temp;
      const std::size_t base = policy.row_offset(group.bucket, st.slot);
      for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] <= 0.0) continue;
        out.gradient[base + c] += coeff * ((c == a ? 1.0 : 0.0) - p[c]);
      }
      space.advance(st, a);
    }
  }
  return out;
}

/// θ ← θ − lr·g. Frozen policies reject updates.
inline void apply_update(ToyPolicy& policy, std::span<const double> gradient, double learning_rate) {
  if (policy.frozen()) throw Error(ErrorCode::kFrozenPolicy, "update attempted on a frozen policy");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (gradient.size() != policy.parameter_count()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient size differs from parameter count");
  }
  auto params = policy.mutable_parameters();
  for (std::size_t j = 0; j < params.size(); ++j) params[j] -= learning_rate * gradient[j];
}

}  // namespace tandem
