#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tap/alignment.hpp"
#include "tap/core/graph.hpp"
#include "tap/core/optim.hpp"
#include "tap/core/param_store.hpp"
#include "tap/encoder.hpp"
#include "tap/random.hpp"
#include "tap/sampler.hpp"
#include "tap/sequence.hpp"

namespace tap::fewshot {

enum class SimilarityKind {
  Tap,      // learned alignment over message-passed contexts
  AvgPool,  // cosine of temporally averaged features
};

struct ModelConfig {
  std::size_t frames = sampling::kDefaultFrames;
  encoder::EncoderConfig encoder;
  std::size_t lstm_hidden = 32;
  std::vector<std::size_t> head_widths{64, 32, 8, 1};
  SimilarityKind kind = SimilarityKind::Tap;
  bool freeze_encoder = false;

  align::TapConfig tap() const { return {encoder.d_f, lstm_hidden, head_widths}; }
};

/// Encoder plus similarity module with its parameters (theta, alpha, beta).
class Model {
 public:
  Model(ModelConfig config, core::ParamStore params);
  static Model create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  core::ParamStore& params() noexcept { return params_; }
  const core::ParamStore& params() const noexcept { return params_; }
  // Parameter names updated by the optimizer.
  std::vector<std::string> trainable() const;

  /// Per-sequence representation the pairwise similarity consumes: encoded
  /// features for AvgPool, message-passed contexts for Tap.
  core::Var represent(core::Graph& g, const sampling::SampledSequence& seq) const;
  core::Var similarity(core::Graph& g, core::Var lhs, core::Var rhs) const;

 private:
  ModelConfig config_;
  core::ParamStore params_;
};

/// Throws CheckpointMismatch naming the first tensor that is missing,
/// unexpected or differently shaped.
void check_compatible(const core::ParamStore& expected, const core::ParamStore& loaded);

struct LabeledSequence {
  const data::RawSequence* sequence = nullptr;
  std::size_t label = 0;  // 1..N
};

/// N-way K-shot task. Support is ordered by label, K entries per label.
struct Episode {
  std::size_t n_way = 0;
  std::size_t k_shot = 0;
  std::vector<std::uint32_t> class_ids;  // class_ids[label - 1]
  std::vector<LabeledSequence> support;
  std::vector<LabeledSequence> query;
};

/// Draws N classes without replacement, then K + q_per_class distinct
/// instances per class; the first K go to the support set.
Episode sample_episode(const data::ClassStore& metaset, std::size_t n_way, std::size_t k_shot,
                       std::size_t q_per_class, Rng& rng);

/// Mean similarity of `query` to each member of `support` (Eq. prototype score).
core::Var class_score(core::Graph& g, const Model& model, core::Var query,
                      std::span<const core::Var> support);
double class_score(const Model& model, const data::RawSequence& query,
                   std::span<const data::RawSequence* const> support, sampling::SampleMode mode,
                   Rng& rng);

/// argmax over scores, ties to the smallest index; returns a 1-based label.
std::size_t predict_label(std::span<const double> scores);

struct EpisodeOutput {
  core::Var loss;  // mean over queries of -log softmax(scores)[label]
  std::vector<std::vector<double>> scores;
  std::vector<std::size_t> predictions;  // 1-based
  std::size_t correct = 0;
};

/// Samples every sequence once in `mode`, then scores each query against
/// all classes.
EpisodeOutput episode_loss(core::Graph& g, const Episode& episode, const Model& model,
                           sampling::SampleMode mode, Rng& rng);

struct EvalReport {
  std::size_t episode_count = 0;
  double accuracy = 0.0;
  double ci_half_width = 0.0;  // 1.96 * stddev / sqrt(episodes)
  double mean_loss = 0.0;
  double seconds = 0.0;
};

/// Test-mode evaluation. Episode i uses its own stream Rng(seed ^ i), so
/// the report does not depend on `threads`.
EvalReport evaluate(const data::ClassStore& metatest, const Model& model, std::size_t n_episodes,
                    std::size_t n_way, std::size_t k_shot, std::size_t q_per_class,
                    std::uint64_t seed, std::size_t threads = 1);

struct TrainConfig {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t q_per_class = 1;
  std::size_t episodes = 3000;
  std::size_t episodes_per_epoch = 200;
  std::size_t val_every = 200;
  std::size_t val_episodes = 200;
  double clip_norm = 40.0;
  core::SgdConfig sgd{0.001, 0.9, 0.0001, 10, 0.1};
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // clipped subset, before clipping
  double lr = 0.0;
};

struct ValRecord {
  std::size_t episode = 0;
  double accuracy = 0.0;
  double ci = 0.0;
};

struct TrainHistory {
  std::vector<EpisodeRecord> episodes;
  std::vector<ValRecord> validations;
  std::size_t best_episode = 0;
  double best_accuracy = -1.0;
};

struct TrainResult {
  core::ParamStore best;
  TrainHistory history;
};

/// Episodic SGD on `metatrain`, validating on `metaval` every val_every
/// episodes and after the last one. The best validation snapshot is
/// returned; `model` is left holding the final parameters. When `metrics` is
/// set, one CSV line per episode and per validation is streamed to it.
TrainResult train(Model& model, const data::ClassStore& metatrain,
                  const data::ClassStore& metaval, const TrainConfig& config,
                  std::ostream* metrics = nullptr);

void require_disjoint(const data::ClassStore& a, const data::ClassStore& b, const char* what);

}  // namespace tap::fewshot
