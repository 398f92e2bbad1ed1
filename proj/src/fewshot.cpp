#include "tap/fewshot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <thread>

#include "tap/core/ops.hpp"
#include "tap/errors.hpp"

namespace tap::fewshot {

using core::Var;

namespace {
const std::string kClipPrefixes[] = {"theta/", "alpha/"};
}  // namespace

Model::Model(ModelConfig config, core::ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  if (config_.frames == 0) throw ContractError("model: frames must be at least 1");
  if (config_.freeze_encoder) params_.set_requires_grad("theta/", false);
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  core::ParamStore params;
  Rng enc_rng = derive_rng(seed, 1);
  encoder::init_params(params, config.encoder, enc_rng);
  if (config.kind == SimilarityKind::Tap) {
    Rng tap_rng = derive_rng(seed, 2);
    align::init_params(params, config.tap(), tap_rng);
  }
  return Model(config, std::move(params));
}

std::vector<std::string> Model::trainable() const {
  std::vector<std::string> out;
  for (const auto& e : params_.entries()) {
    if (e.tensor->requires_grad()) out.push_back(e.name);
  }
  return out;
}

Var Model::represent(core::Graph& g, const sampling::SampledSequence& seq) const {
  const Var features = encoder::encode(g, params_, config_.encoder, seq);
  if (config_.kind == SimilarityKind::AvgPool) return features;
  return align::message_pass(g, params_, config_.tap(), features);
}

Var Model::similarity(core::Graph& g, Var lhs, Var rhs) const {
  if (config_.kind == SimilarityKind::AvgPool) return align::avgpool_similarity(lhs, rhs);
  return align::tap_similarity_from_context(g, params_, config_.tap(), lhs, rhs).similarity;
}

void check_compatible(const core::ParamStore& expected, const core::ParamStore& loaded) {
  for (const auto& e : expected.entries()) {
    if (!loaded.contains(e.name)) {
      throw CheckpointMismatch("checkpoint is missing tensor '" + e.name + "'");
    }
    const auto& got = loaded.at(e.name).shape();
    if (got != e.tensor->shape()) {
      throw CheckpointMismatch("tensor '" + e.name + "' has shape " + core::shape_str(got) +
                               ", model expects " + core::shape_str(e.tensor->shape()));
    }
  }
  for (const auto& e : loaded.entries()) {
    if (!expected.contains(e.name)) {
      throw CheckpointMismatch("checkpoint has unexpected tensor '" + e.name + "'");
    }
  }
}

void require_disjoint(const data::ClassStore& a, const data::ClassStore& b, const char* what) {
  for (const auto& [id, seqs] : a) {
    if (b.count(id)) {
      throw ContractError(std::string(what) + ": class " + std::to_string(id) +
                          " appears in both meta splits");
    }
  }
}

Episode sample_episode(const data::ClassStore& metaset, std::size_t n_way, std::size_t k_shot,
                       std::size_t q_per_class, Rng& rng) {
  if (n_way == 0) throw ContractError("sample_episode: N must be at least 1");
  if (k_shot == 0) throw ContractError("sample_episode: K must be at least 1");
  const std::size_t per_class = k_shot + q_per_class;

  std::vector<std::uint32_t> eligible;
  for (const auto& [id, seqs] : metaset) {
    if (seqs.size() >= per_class) eligible.push_back(id);
  }
  if (eligible.size() < n_way) {
    throw CapacityError("sample_episode: need " + std::to_string(n_way) + " classes with >= " +
                        std::to_string(per_class) + " instances, only " +
                        std::to_string(eligible.size()) + " available (short by " +
                        std::to_string(n_way - eligible.size()) + ")");
  }

  // Partial Fisher-Yates: draws without replacement.
  auto draw = [&rng](auto& pool, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
  };

  draw(eligible, n_way);
  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  for (std::size_t c = 0; c < n_way; ++c) {
    const std::uint32_t id = eligible[c];
    const auto& seqs = metaset.at(id);
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    draw(order, per_class);
    ep.class_ids.push_back(id);
    for (std::size_t k = 0; k < per_class; ++k) {
      LabeledSequence item{&seqs[order[k]], c + 1};
      (k < k_shot ? ep.support : ep.query).push_back(item);
    }
  }
  return ep;
}

Var class_score(core::Graph& g, const Model& model, Var query, std::span<const Var> support) {
  if (support.empty()) throw ContractError("class_score: support class is empty");
  std::vector<Var> sims;
  sims.reserve(support.size());
  for (const Var& s : support) sims.push_back(model.similarity(g, query, s));
  return core::mean(core::stack(sims));
}

double class_score(const Model& model, const data::RawSequence& query,
                   std::span<const data::RawSequence* const> support, sampling::SampleMode mode,
                   Rng& rng) {
  if (support.empty()) throw ContractError("class_score: support class is empty");
  const std::size_t frames = model.config().frames;
  core::Graph g;
  const Var q = model.represent(g, sampling::sparse_sample(query, frames, mode, rng));
  std::vector<Var> reps;
  for (const auto* s : support) {
    reps.push_back(model.represent(g, sampling::sparse_sample(*s, frames, mode, rng)));
  }
  return class_score(g, model, q, reps).item();
}

std::size_t predict_label(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("predict_label: no class scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best + 1;
}

EpisodeOutput episode_loss(core::Graph& g, const Episode& episode, const Model& model,
                           sampling::SampleMode mode, Rng& rng) {
  if (episode.query.empty()) throw ContractError("episode_loss: episode has no queries");
  const std::size_t frames = model.config().frames;

  std::vector<std::vector<Var>> by_class(episode.n_way);
  for (const auto& item : episode.support) {
    if (item.label == 0 || item.label > episode.n_way) {
      throw ContractError("episode_loss: support label out of range");
    }
    const auto sampled = sampling::sparse_sample(*item.sequence, frames, mode, rng);
    by_class[item.label - 1].push_back(model.represent(g, sampled));
  }
  std::vector<Var> queries;
  for (const auto& item : episode.query) {
    queries.push_back(model.represent(g, sampling::sparse_sample(*item.sequence, frames, mode, rng)));
  }

  EpisodeOutput out;
  std::vector<Var> losses;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<Var> scores;
    for (std::size_t c = 0; c < episode.n_way; ++c) {
      scores.push_back(class_score(g, model, queries[q], by_class[c]));
    }
    const Var stacked = core::stack(scores);
    const std::size_t label = episode.query[q].label;
    losses.push_back(core::cross_entropy(stacked, label - 1));

    const auto values = stacked.value().values();
    out.scores.emplace_back(values.begin(), values.end());
    out.predictions.push_back(predict_label(values));
    if (out.predictions.back() == label) ++out.correct;
  }
  out.loss = core::mean(core::stack(losses));
  return out;
}

EvalReport evaluate(const data::ClassStore& metatest, const Model& model, std::size_t n_episodes,
                    std::size_t n_way, std::size_t k_shot, std::size_t q_per_class,
                    std::uint64_t seed, std::size_t threads) {
  if (n_episodes == 0) throw ContractError("evaluate: episode count must be positive");
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> accuracy(n_episodes), loss(n_episodes);

  auto run_range = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n_episodes; i += stride) {
      Rng rng(seed ^ static_cast<std::uint64_t>(i));
      const Episode ep = sample_episode(metatest, n_way, k_shot, q_per_class, rng);
      core::Graph g;
      const auto out = episode_loss(g, ep, model, sampling::SampleMode::Test, rng);
      accuracy[i] = static_cast<double>(out.correct) / static_cast<double>(ep.query.size());
      loss[i] = out.loss.item();
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, n_episodes));
  if (threads == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          run_range(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  EvalReport report;
  report.episode_count = n_episodes;
  const double n = static_cast<double>(n_episodes);
  double acc_sum = 0.0, loss_sum = 0.0;
  for (std::size_t i = 0; i < n_episodes; ++i) {
    acc_sum += accuracy[i];
    loss_sum += loss[i];
  }
  report.accuracy = acc_sum / n;
  report.mean_loss = loss_sum / n;
  double var = 0.0;
  for (double a : accuracy) var += (a - report.accuracy) * (a - report.accuracy);
  report.ci_half_width = 1.96 * std::sqrt(var / n) / std::sqrt(n);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

TrainResult train(Model& model, const data::ClassStore& metatrain,
                  const data::ClassStore& metaval, const TrainConfig& config,
                  std::ostream* metrics) {
  require_disjoint(metatrain, metaval, "train");
  if (config.episodes_per_epoch == 0) throw ContractError("train: episodes_per_epoch must be > 0");
  if (config.val_every == 0) throw ContractError("train: val_every must be > 0");

  core::SgdState sgd(config.sgd);
  Rng rng = derive_rng(config.seed, 0x7261696eULL);
  const std::uint64_t val_seed = config.seed ^ 0x76616c6964617465ULL;
  const auto names = model.trainable();

  TrainResult result;
  result.best = model.params();
  double last_norm = 0.0;

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    sgd.epoch = ep / config.episodes_per_epoch;
    const double lr = sgd.effective_lr();

    const Episode episode =
        sample_episode(metatrain, config.n_way, config.k_shot, config.q_per_class, rng);
    double loss = 0.0;
    {
      core::Graph g;
      const auto out = episode_loss(g, episode, model, sampling::SampleMode::Train, rng);
      loss = out.loss.item();
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at episode " + std::to_string(ep) +
                           " (lr=" + format_g(lr) + ", last grad norm=" + format_g(last_norm) +
                           ")");
      }
      g.backward(out.loss);
    }
    last_norm = core::clip_global_norm(model.params(), config.clip_norm, kClipPrefixes);
    core::sgd_step(model.params(), sgd, names);

    result.history.episodes.push_back({ep, loss, last_norm, lr});
    if (metrics) {
      *metrics << ep << ',' << format_g(loss) << ',' << format_g(last_norm) << ','
               << format_g(lr) << '\n';
    }

    const bool last = ep + 1 == config.episodes;
    if ((ep + 1) % config.val_every == 0 || last) {
      const auto report = evaluate(metaval, model, config.val_episodes, config.n_way,
                                   config.k_shot, config.q_per_class, val_seed, config.threads);
      result.history.validations.push_back({ep, report.accuracy, report.ci_half_width});
      if (metrics) {
        *metrics << ep << ',' << format_g(report.accuracy) << ','
                 << format_g(report.ci_half_width) << '\n';
      }
      if (report.accuracy > result.history.best_accuracy) {
        result.history.best_accuracy = report.accuracy;
        result.history.best_episode = ep;
        result.best = model.params();
      }
    }
  }
  result.best.clear_grad();
  return result;
}

}  // namespace tap::fewshot
