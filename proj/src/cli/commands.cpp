#include "tap/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tap/alignment.hpp"
#include "tap/binary_io.hpp"
#include "tap/core/checkpoint.hpp"
#include "tap/core/gradcheck.hpp"
#include "tap/core/ops.hpp"
#include "tap/dataset_io.hpp"
#include "tap/dtw.hpp"
#include "tap/errors.hpp"
#include "tap/synthgen.hpp"

namespace tap::cli {
namespace {

namespace fs = std::filesystem;
using core::Var;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string config_header(const RunConfig& config) {
  std::string out;
  for (const auto& line : config_lines(config)) out += "# " + line + "\n";
  return out;
}

fewshot::Model load_model(const RunConfig& config) {
  if (config.checkpoint.empty()) throw UsageError("--checkpoint is required");
  auto loaded = core::load_checkpoint(config.checkpoint);
  const auto fresh = fewshot::Model::create(config.model, config.seed);
  fewshot::check_compatible(fresh.params(), loaded);
  // Keep the model's parameter order; values come from the checkpoint.
  core::ParamStore params;
  for (const auto& e : fresh.params().entries()) params.add(e.name, loaded.at(e.name));
  return fewshot::Model(config.model, std::move(params));
}

data::MetaSplits load_data(const RunConfig& config) {
  if (config.data_dir.empty()) throw UsageError("--data is required");
  auto splits = data::read_dataset(config.data_dir);
  fewshot::require_disjoint(splits.train, splits.val, "dataset");
  fewshot::require_disjoint(splits.train, splits.test, "dataset");
  fewshot::require_disjoint(splits.val, splits.test, "dataset");
  for (const auto* store : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& [id, seqs] : *store) {
      for (const auto& s : seqs) {
        if (s.dim != config.model.encoder.d_raw) {
          throw ConfigError("d_raw: dataset frames have dim " + std::to_string(s.dim) +
                            ", config says " + std::to_string(config.model.encoder.d_raw));
        }
      }
    }
  }
  return splits;
}

// Identity forward whose backward rule is off by a factor; used to show the
// gradient checker rejects a broken rule.
Var corrupted(Var x) {
  core::Tensor out = x.value();
  return x.graph().record("corrupted", std::move(out), {x},
                          [](std::span<const double> go, const core::GradSlots& in) {
                            auto gx = in[0];
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 1.5 * go[i];
                          });
}

core::Tensor random_tensor(core::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  core::Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Projects an op output onto fixed random weights so every coordinate of the
// output contributes to the scalar.
Var project(core::Graph& g, Var out, const core::Tensor& weights) {
  return core::sum(core::mul(out, g.constant(weights)));
}

}  // namespace

// ---------------------------------------------------------------- gen

int cmd_gen(const RunConfig& config, std::ostream& out) {
  if (config.out.empty()) throw UsageError("--out is required");
  const auto metaset = synth::generate_metaset(config.gen);
  data::write_dataset(config.out, metaset.splits, config.gen.d_raw, config_lines(config));
  out << "wrote " << metaset.classes.size() << " classes (" << metaset.splits.train.size() << "/"
      << metaset.splits.val.size() << "/" << metaset.splits.test.size() << ") to " << config.out
      << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& config, std::ostream& out) {
  if (config.out.empty()) throw UsageError("--out is required");
  const auto splits = load_data(config);
  auto model = fewshot::Model::create(config.model, config.seed);

  const fs::path ckpt = config.out;
  core::save_checkpoint(model.params(), ckpt.string() + ".init");

  const fs::path metrics_path = ckpt.string() + ".metrics.csv";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw IoError("cannot open '" + metrics_path.string() + "' for writing");
  metrics << config_header(config);
  metrics << "# training rows: episode_index,loss,grad_norm,lr\n";
  metrics << "# validation rows: episode_index,val_accuracy,val_ci\n";

  const auto result = fewshot::train(model, splits.train, splits.val, config.train, &metrics);
  metrics.flush();
  if (!metrics) throw IoError("write to '" + metrics_path.string() + "' failed");
  core::save_checkpoint(result.best, ckpt);

  out << "trained " << config.train.episodes << " episodes";
  if (!result.history.validations.empty()) {
    out << "; best val accuracy " << fmt("%.4f", result.history.best_accuracy) << " at episode "
        << result.history.best_episode;
  }
  out << "\ncheckpoint " << ckpt.string() << "\nmetrics " << metrics_path.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.eval_episodes == 0) throw UsageError("--episodes must be positive");
  const auto model = load_model(config);
  const auto splits = load_data(config);
  const auto& t = config.train;
  const auto report = fewshot::evaluate(splits.test, model, config.eval_episodes, t.n_way,
                                        t.k_shot, t.q_per_class, config.seed, config.threads);

  out << "accuracy " << fmt("%.4f", report.accuracy) << " ± " << fmt("%.4f", report.ci_half_width)
      << " over " << report.episode_count << " episodes (" << t.n_way << "-way " << t.k_shot
      << "-shot, mean loss " << fmt("%.4f", report.mean_loss) << ")\n";
  err << "elapsed " << fmt("%.2f", report.seconds) << " s\n";

  const fs::path csv = config.out.empty() ? fs::path(config.checkpoint + ".eval.csv")
                                          : fs::path(config.out);
  const bool fresh = !fs::exists(csv);
  std::ofstream row(csv, std::ios::app);
  if (!row) throw IoError("cannot open '" + csv.string() + "' for appending");
  if (fresh) row << config_header(config) << "episodes,n_way,k_shot,accuracy,ci_half_width,mean_loss\n";
  row << report.episode_count << ',' << t.n_way << ',' << t.k_shot << ','
      << fmt("%.9g", report.accuracy) << ',' << fmt("%.9g", report.ci_half_width) << ','
      << fmt("%.9g", report.mean_loss) << '\n';
  if (!row) throw IoError("write to '" + csv.string() + "' failed");
  return kOk;
}

// ---------------------------------------------------------------- align

std::string matrix_csv(const core::Tensor& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += fmt("%.9g", m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_pgm(const core::Tensor& m, bool signed_range) {
  std::string out = "P2\n" + std::to_string(m.cols()) + " " + std::to_string(m.rows()) + "\n255\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = signed_range ? (m.at(r, c) + 1.0) / 2.0 : m.at(r, c);
      const long level = std::clamp(std::lround(255.0 * v), 0L, 255L);
      if (c) out += ' ';
      out += std::to_string(level);
    }
    out += '\n';
  }
  return out;
}

int cmd_align(const RunConfig& config, const AlignArgs& args, std::ostream& out) {
  if (config.model.kind != fewshot::SimilarityKind::Tap) {
    throw UsageError("align needs model = tap");
  }
  const auto model = load_model(config);
  const auto seqs_a = data::read_class_file(args.file_a);
  const auto seqs_b = data::read_class_file(args.file_b);
  if (args.index_a >= seqs_a.size()) {
    throw UsageError("index " + std::to_string(args.index_a) + " out of range for " +
                     args.file_a.string() + " (" + std::to_string(seqs_a.size()) + " sequences)");
  }
  if (args.index_b >= seqs_b.size()) {
    throw UsageError("index " + std::to_string(args.index_b) + " out of range for " +
                     args.file_b.string() + " (" + std::to_string(seqs_b.size()) + " sequences)");
  }

  Rng unused(0);
  const auto& mc = model.config();
  const auto a = sampling::sparse_sample(seqs_a[args.index_a], mc.frames, sampling::SampleMode::Test, unused);
  const auto b = sampling::sparse_sample(seqs_b[args.index_b], mc.frames, sampling::SampleMode::Test, unused);
  const auto fa = encoder::encode(model.params(), mc.encoder, a);
  const auto fb = encoder::encode(model.params(), mc.encoder, b);
  const auto pair = align::compute_alignment(model.params(), mc.tap(), fa, fb);

  const fs::path dir = config.out.empty() ? fs::path(".") : fs::path(config.out);
  fs::create_directories(dir);
  io::write_file(dir / "P.csv", matrix_csv(pair.p));
  io::write_file(dir / "S.csv", matrix_csv(pair.s));
  io::write_file(dir / "P.pgm", matrix_pgm(pair.p, false));
  io::write_file(dir / "S.pgm", matrix_pgm(pair.s, true));
  out << "similarity " << fmt("%.9g", pair.similarity) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

std::vector<CheckOutcome> run_gradcheck_suite(const RunConfig& config, const std::string& corrupt) {
  constexpr std::size_t kFrames = 4, kFeat = 8, kHidden = 6;
  const std::size_t coords = config.gradcheck_coords;
  const double step = config.gradcheck_step;
  const double tol = config.gradcheck_tolerance;

  std::vector<CheckOutcome> outcomes;
  Rng rng = derive_rng(config.seed, 0x67726164ULL);

  auto maybe_corrupt = [&corrupt](const std::string& name, Var v) {
    return name == corrupt ? corrupted(v) : v;
  };
  auto run_check = [&](const std::string& name, core::ParamStore& params, const core::LossBuilder& f) {
    const auto r = core::finite_diff_check(f, params, coords, step, rng());
    outcomes.push_back({name, r.max_rel_error, r.coords_checked, r.worst_coord, r.worst_analytic,
                        r.worst_numeric, r.max_rel_error < tol});
  };

  // Op-level checks: inputs live in a store so they are perturbed like parameters.
  {
    core::ParamStore p;
    p.add("x", random_tensor({5}, rng));
    p.add("W", random_tensor({3, 5}, rng));
    p.add("b", random_tensor({3}, rng));
    const auto w = random_tensor({3}, rng);
    run_check("linear", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("linear", core::linear(g.param(p, "x"), g.param(p, "W"), g.param(p, "b"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({5, 4}, rng));
    p.add("W", random_tensor({3, 5}, rng));
    p.add("b", random_tensor({3}, rng));
    const auto w = random_tensor({3, 4}, rng);
    run_check("linear_batched", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("linear_batched", core::linear(g.param(p, "x"), g.param(p, "W"), g.param(p, "b"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("a", random_tensor({3, 4}, rng));
    p.add("b", random_tensor({4, 2}, rng));
    const auto w = random_tensor({2, 3}, rng);
    run_check("matmul_transpose", p, [&](core::Graph& g) {
      const Var m = core::matmul(g.param(p, "a"), g.param(p, "b"));
      return project(g, maybe_corrupt("matmul_transpose", core::transpose(m)), w);
    });
  }
  {
    core::ParamStore p;
    p.add("a", random_tensor({6}, rng));
    p.add("b", random_tensor({6}, rng));
    const auto w = random_tensor({6}, rng);
    run_check("elementwise", p, [&](core::Graph& g) {
      const Var a = g.param(p, "a"), b = g.param(p, "b");
      const Var v = core::add(core::mul(a, b), core::scale(core::sub(a, b), 0.7));
      return project(g, maybe_corrupt("elementwise", v), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({8}, rng, -4.0, 4.0));
    const auto w = random_tensor({8}, rng);
    run_check("sigmoid", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("sigmoid", core::sigmoid(g.param(p, "x"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({8}, rng, -3.0, 3.0));
    const auto w = random_tensor({8}, rng);
    run_check("tanh", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("tanh", core::tanh(g.param(p, "x"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({5}, rng));
    const auto w = random_tensor({5}, rng);
    run_check("l2_normalize", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("l2_normalize", core::l2_normalize(g.param(p, "x"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({4, 3}, rng));
    const auto w = random_tensor({4, 3}, rng);
    run_check("l2_normalize_columns", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("l2_normalize_columns", core::l2_normalize_columns(g.param(p, "x"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({3}, rng));
    p.add("y", random_tensor({2}, rng));
    const auto w = random_tensor({5}, rng);
    run_check("concat", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("concat", core::concat(g.param(p, "x"), g.param(p, "y"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({3, 2}, rng));
    p.add("y", random_tensor({2, 3}, rng));
    const auto w = random_tensor({5, 6}, rng);
    run_check("pair_concat", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("pair_concat", core::pair_concat(g.param(p, "x"), g.param(p, "y"))), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({4, 3}, rng));
    const auto w = random_tensor({3, 2}, rng);
    run_check("column_slice_stack", p, [&](core::Graph& g) {
      const Var x = g.param(p, "x");
      const Var c0 = core::slice(core::column(x, 0), 1, 3);
      const Var c2 = core::slice(core::column(x, 2), 0, 3);
      const Var m = core::reshape(core::stack_columns({c0, c2}), core::Shape{3, 2});
      return project(g, maybe_corrupt("column_slice_stack", m), w);
    });
  }
  {
    core::ParamStore p;
    p.add("x", random_tensor({4, 3}, rng));
    p.add("y", random_tensor({4}, rng));
    run_check("mean_dot", p, [&](core::Graph& g) {
      const Var m = maybe_corrupt("mean_dot", core::mean_columns(g.param(p, "x")));
      return core::add(core::dot(m, g.param(p, "y")), core::mean(core::mul(m, m)));
    });
  }
  {
    core::ParamStore p;
    p.add("s", random_tensor({5}, rng, -2.0, 2.0));
    run_check("cross_entropy", p, [&](core::Graph& g) {
      return core::cross_entropy(maybe_corrupt("cross_entropy", g.param(p, "s")), 2);
    });
  }

  // Module-level checks at the small desk size.
  fewshot::ModelConfig mc;
  mc.frames = kFrames;
  mc.encoder.d_raw = config.gen.d_raw;
  mc.encoder.hidden = {8};
  mc.encoder.d_f = kFeat;
  mc.lstm_hidden = kHidden;
  mc.head_widths = {12, 6, 1};
  const auto tc = mc.tap();

  {
    core::ParamStore p;
    encoder::init_params(p, mc.encoder, rng);
    const auto frames = random_tensor({mc.encoder.d_raw, kFrames}, rng);
    const auto w = random_tensor({kFeat, kFrames}, rng);
    run_check("encode", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("encode", encoder::encode(g, p, mc.encoder, g.constant(frames))), w);
    });
  }
  {
    core::ParamStore p;
    align::init_message_pass(p, tc, rng);
    p.add("A", random_tensor({kFeat, kFrames}, rng));
    const auto w = random_tensor({2 * kHidden, kFrames}, rng);
    run_check("message_pass", p, [&](core::Graph& g) {
      return project(g, maybe_corrupt("message_pass", align::message_pass(g, p, tc, g.param(p, "A"))), w);
    });
  }
  {
    core::ParamStore p;
    align::init_align_head(p, tc, rng);
    p.add("X", random_tensor({2 * kHidden, kFrames}, rng));
    p.add("Y", random_tensor({2 * kHidden, kFrames}, rng));
    const auto w = random_tensor({kFrames, kFrames}, rng);
    run_check("predict_alignment", p, [&](core::Graph& g) {
      const Var P = align::predict_alignment(g, p, tc, g.param(p, "X"), g.param(p, "Y"));
      return project(g, maybe_corrupt("predict_alignment", P), w);
    });
  }
  {
    core::ParamStore p;
    p.add("X", random_tensor({2 * kHidden, kFrames}, rng));
    p.add("Y", random_tensor({2 * kHidden, kFrames}, rng));
    const auto w = random_tensor({kFrames, kFrames}, rng);
    run_check("similarity_matrix", p, [&](core::Graph& g) {
      const Var S = align::similarity_matrix(g.param(p, "X"), g.param(p, "Y"));
      return project(g, maybe_corrupt("similarity_matrix", S), w);
    });
  }
  {
    core::ParamStore p;
    encoder::init_params(p, mc.encoder, rng);
    align::init_params(p, tc, rng);
    const auto ra = random_tensor({mc.encoder.d_raw, kFrames}, rng);
    const auto rb = random_tensor({mc.encoder.d_raw, kFrames}, rng);
    run_check("tap_similarity", p, [&](core::Graph& g) {
      const Var a = encoder::encode(g, p, mc.encoder, g.constant(ra));
      const Var b = encoder::encode(g, p, mc.encoder, g.constant(rb));
      return maybe_corrupt("tap_similarity", align::tap_similarity(g, p, tc, a, b).similarity);
    });
  }
  {
    core::ParamStore p;
    p.add("A", random_tensor({kFeat, kFrames}, rng));
    p.add("B", random_tensor({kFeat, kFrames}, rng));
    run_check("avgpool_similarity", p, [&](core::Graph& g) {
      return maybe_corrupt("avgpool_similarity",
                           align::avgpool_similarity(g.param(p, "A"), g.param(p, "B")));
    });
  }

  // Full 5-way 1-shot episode losses on a small generated metaset.
  synth::GenConfig gen = config.gen;
  gen.train_classes = 5;
  gen.val_classes = 0;
  gen.test_classes = 0;
  gen.instances_per_class = 2;
  if (synth::distinct_orders(gen) < gen.total_classes()) {
    gen.n_motifs = 5;
    gen.motifs_per_class = 5;
  }
  const auto metaset = synth::generate_metaset(gen);
  const std::uint64_t episode_seed = rng();
  for (auto kind : {fewshot::SimilarityKind::Tap, fewshot::SimilarityKind::AvgPool}) {
    const std::string name =
        kind == fewshot::SimilarityKind::Tap ? "episode_loss_tap" : "episode_loss_avgpool";
    auto cfg = mc;
    cfg.kind = kind;
    auto model = fewshot::Model::create(cfg, rng());
    run_check(name, model.params(), [&](core::Graph& g) {
      Rng episode_rng(episode_seed);
      const auto ep = fewshot::sample_episode(metaset.splits.train, 5, 1, 1, episode_rng);
      auto out = fewshot::episode_loss(g, ep, model, sampling::SampleMode::Train, episode_rng);
      return maybe_corrupt(name, out.loss);
    });
  }
  return outcomes;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out, const std::string& corrupt) {
  const auto start = std::chrono::steady_clock::now();
  const auto outcomes = run_gradcheck_suite(config, corrupt);
  bool ok = true;
  char line[256];
  for (const auto& o : outcomes) {
    std::snprintf(line, sizeof line, "%-22s max_rel_err %.3e over %3zu coords  %s  worst %s (%.6e vs %.6e)\n",
                  o.name.c_str(), o.max_rel_error, o.coords, o.pass ? "PASS" : "FAIL",
                  o.worst_coord.c_str(), o.worst_analytic, o.worst_numeric);
    out << line;
    ok = ok && o.pass;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << outcomes.size() << " checks, tolerance " << fmt("%.1e", config.gradcheck_tolerance)
      << ", " << (ok ? "all passed" : "FAILED") << " in " << fmt("%.2f", secs) << " s\n";
  return ok ? kOk : kGradcheckFailed;
}

// ---------------------------------------------------------------- bench

namespace {

template <class F>
double median_seconds(F&& fn, std::size_t reps) {
  using clock = std::chrono::steady_clock;
  std::vector<double> samples;
  for (std::size_t r = 0; r < reps; ++r) {
    std::size_t iters = 0;
    const auto start = clock::now();
    auto now = start;
    do {
      fn();
      ++iters;
      now = clock::now();
    } while (now - start < std::chrono::milliseconds(2));
    samples.push_back(std::chrono::duration<double>(now - start).count() /
                      static_cast<double>(iters));
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace

std::vector<BenchRow> run_bench(const RunConfig& config) {
  auto mc = config.model;
  mc.kind = fewshot::SimilarityKind::Tap;
  const auto model = fewshot::Model::create(mc, config.seed);
  Rng rng = derive_rng(config.seed, 0x62656e6368ULL);
  std::vector<BenchRow> rows;
  for (std::size_t frames : config.bench_frames) {
    if (frames < 2) throw ConfigError("bench_frames: frame counts must be >= 2");
    const auto a = random_tensor({mc.encoder.d_f, frames}, rng);
    const auto b = random_tensor({mc.encoder.d_f, frames}, rng);
    volatile double sink = 0.0;
    BenchRow row;
    row.frames = frames;
    row.tap_seconds = median_seconds(
        [&] { sink = align::compute_alignment(model.params(), mc.tap(), a, b).similarity; },
        config.bench_reps);
    row.dtw_seconds = median_seconds([&] { sink = dtw::dtw(a, b).distance; }, config.bench_reps);
    row.ratio = row.dtw_seconds / row.tap_seconds;
    rows.push_back(row);
  }
  return rows;
}

int cmd_bench(const RunConfig& config, std::ostream& out) {
  const auto rows = run_bench(config);
  std::ostringstream csv;
  csv << config_header(config) << "frames,tap_seconds,dtw_seconds,ratio\n";
  for (const auto& r : rows) {
    csv << r.frames << ',' << fmt("%.9g", r.tap_seconds) << ',' << fmt("%.9g", r.dtw_seconds)
        << ',' << fmt("%.9g", r.ratio) << '\n';
  }
  if (config.out.empty()) {
    out << csv.str();
  } else {
    io::write_file(config.out, csv.str());
    out << "wrote " << rows.size() << " rows to " << config.out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- dispatch

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal alignment prediction for few-shot sequence classification"};
  app.require_subcommand(1);

  std::string config_path, data, out_path, checkpoint, frames_list;
  std::size_t episodes = 0, n_way = 0, k_shot = 0, threads = 0, reps = 0;
  std::uint64_t seed = 0;
  AlignArgs align_args;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads (fallback: TAP_THREADS)");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  common(gen);
  gen->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "episodic training");
  common(train);
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out_path, "checkpoint path")->required();
  train->add_option("--episodes", episodes, "training episodes");
  train->add_option("--n-way", n_way, "classes per episode");
  train->add_option("--k-shot", k_shot, "support examples per class");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on meta_test");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes");
  eval->add_option("--n-way", n_way, "classes per episode");
  eval->add_option("--k-shot", k_shot, "support examples per class");
  eval->add_option("--out", out_path, "CSV file to append the report to");

  auto* align = app.add_subcommand("align", "export P and S for two sequences");
  common(align);
  align->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  align->add_option("--out", out_path, "output directory");
  align->add_option("file_a", align_args.file_a, "class file A")->required();
  align->add_option("index_a", align_args.index_a, "sequence index in A")->required();
  align->add_option("file_b", align_args.file_b, "class file B")->required();
  align->add_option("index_b", align_args.index_b, "sequence index in B")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  common(grad);

  auto* bench = app.add_subcommand("bench", "TAP vs DTW timing table");
  common(bench);
  bench->add_option("--out", out_path, "CSV output path (default stdout)");
  bench->add_option("--frames", frames_list, "comma-separated sequence lengths");
  bench->add_option("--reps", reps, "repetitions per length");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig config = config_path.empty() ? default_config() : load_config(config_path);
    auto* sub = app.get_subcommands().front();
    auto given = [&](const char* flag) {
      const auto* opt = sub->get_option_no_throw(flag);
      return opt != nullptr && opt->count() > 0;
    };
    if (given("--seed")) set_key(config, "seed", std::to_string(seed));
    if (given("--threads")) {
      set_key(config, "threads", std::to_string(threads));
    } else if (const char* env = std::getenv("TAP_THREADS"); env && *env) {
      set_key(config, "threads", env);
    }
    if (!data.empty()) config.data_dir = data;
    if (!checkpoint.empty()) config.checkpoint = checkpoint;
    if (given("--out")) config.out = out_path;

    if (sub == train) {
      if (given("--episodes")) set_key(config, "train_episodes", std::to_string(episodes));
    } else if (sub == eval) {
      if (given("--episodes")) {
        if (episodes == 0) throw UsageError("--episodes must be positive");
        set_key(config, "eval_episodes", std::to_string(episodes));
      }
    }
    if (given("--n-way")) set_key(config, "n_way", std::to_string(n_way));
    if (given("--k-shot")) set_key(config, "k_shot", std::to_string(k_shot));
    if (sub == bench) {
      if (given("--frames")) set_key(config, "bench_frames", frames_list);
      if (given("--reps")) set_key(config, "bench_reps", std::to_string(reps));
    }
    validate(config);

    if (sub == gen) return cmd_gen(config, out);
    if (sub == train) return cmd_train(config, out);
    if (sub == eval) return cmd_eval(config, out, err);
    if (sub == align) return cmd_align(config, align_args, out);
    if (sub == grad) return cmd_gradcheck(config, out);
    return cmd_bench(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointMismatch& e) {
    err << "checkpoint mismatch: " << e.what() << "\n";
    return kCheckpointMismatch;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const CapacityError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace tap::cli
