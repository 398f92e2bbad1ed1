#include "tap/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "tap/binary_io.hpp"
#include "tap/errors.hpp"

namespace tap::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw ConfigError(std::string(key) + ": " + why);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v, std::size_t min) {
  const auto n = parse_u64(key, v);
  if (n < min) bad(key, "must be >= " + std::to_string(min) + ", got " + std::string(v));
  return static_cast<std::size_t>(n);
}

double parse_real(std::string_view key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    bad(key, "expected a finite number, got '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v, bool allow_empty) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) {
    if (!allow_empty) bad(key, "list must not be empty");
    return out;
  }
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string_view::npos ? v.npos : comma - pos));
    out.push_back(parse_count(key, item, 1));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct KeyDef {
  const char* name;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define TAP_COUNT_KEY(NAME, FIELD, MIN)                                                      \
  KeyDef {                                                                                   \
    NAME, [](RunConfig& c, std::string_view k, std::string_view v) {                         \
      c.FIELD = parse_count(k, v, MIN);                                                      \
    },                                                                                       \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                           \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      // data generation
      TAP_COUNT_KEY("d_raw", gen.d_raw, 1),
      TAP_COUNT_KEY("n_motifs", gen.n_motifs, 1),
      TAP_COUNT_KEY("motif_length", gen.motif_length, 1),
      TAP_COUNT_KEY("motifs_per_class", gen.motifs_per_class, 1),
      {"sigma",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double s = parse_real(k, v);
         if (s < 0.0) bad(k, "must be >= 0, got " + std::string(v));
         c.gen.sigma = s;
       },
       [](const RunConfig& c) { return fmt_real(c.gen.sigma); }},
      TAP_COUNT_KEY("warp_min", gen.warp_min, 1),
      TAP_COUNT_KEY("warp_max", gen.warp_max, 1),
      TAP_COUNT_KEY("train_classes", gen.train_classes, 0),
      TAP_COUNT_KEY("val_classes", gen.val_classes, 0),
      TAP_COUNT_KEY("test_classes", gen.test_classes, 0),
      TAP_COUNT_KEY("instances_per_class", gen.instances_per_class, 1),
      // model
      {"model",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "tap") {
           c.model.kind = fewshot::SimilarityKind::Tap;
         } else if (v == "avgpool") {
           c.model.kind = fewshot::SimilarityKind::AvgPool;
         } else {
           bad(k, "expected tap or avgpool, got '" + std::string(v) + "'");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.model.kind == fewshot::SimilarityKind::Tap ? "tap" : "avgpool");
       }},
      TAP_COUNT_KEY("frames", model.frames, 1),
      TAP_COUNT_KEY("d_f", model.encoder.d_f, 1),
      {"encoder_hidden",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.model.encoder.hidden = parse_list(k, v, true);
       },
       [](const RunConfig& c) { return fmt_list(c.model.encoder.hidden); }},
      TAP_COUNT_KEY("lstm_hidden", model.lstm_hidden, 1),
      {"head_widths",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         auto widths = parse_list(k, v, false);
         if (widths.back() != 1) bad(k, "last width must be 1");
         c.model.head_widths = std::move(widths);
       },
       [](const RunConfig& c) { return fmt_list(c.model.head_widths); }},
      {"freeze_encoder",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.model.freeze_encoder = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.model.freeze_encoder ? "true" : "false"); }},
      // optimization
      {"lr",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double lr = parse_real(k, v);
         if (lr < 0.0) bad(k, "must be >= 0, got " + std::string(v));
         c.train.sgd.learning_rate = lr;
       },
       [](const RunConfig& c) { return fmt_real(c.train.sgd.learning_rate); }},
      {"momentum",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double m = parse_real(k, v);
         if (m < 0.0 || m >= 1.0) bad(k, "must lie in [0, 1), got " + std::string(v));
         c.train.sgd.momentum = m;
       },
       [](const RunConfig& c) { return fmt_real(c.train.sgd.momentum); }},
      {"weight_decay",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double wd = parse_real(k, v);
         if (wd < 0.0) bad(k, "must be >= 0, got " + std::string(v));
         c.train.sgd.weight_decay = wd;
       },
       [](const RunConfig& c) { return fmt_real(c.train.sgd.weight_decay); }},
      {"clip_norm",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double n = parse_real(k, v);
         if (n <= 0.0) bad(k, "must be > 0, got " + std::string(v));
         c.train.clip_norm = n;
       },
       [](const RunConfig& c) { return fmt_real(c.train.clip_norm); }},
      TAP_COUNT_KEY("episodes_per_epoch", train.episodes_per_epoch, 1),
      TAP_COUNT_KEY("decay_every", train.sgd.decay_every, 1),
      {"decay_factor",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double f = parse_real(k, v);
         if (f <= 0.0) bad(k, "must be > 0, got " + std::string(v));
         c.train.sgd.decay_factor = f;
       },
       [](const RunConfig& c) { return fmt_real(c.train.sgd.decay_factor); }},
      // episodes
      TAP_COUNT_KEY("n_way", train.n_way, 1),
      TAP_COUNT_KEY("k_shot", train.k_shot, 1),
      TAP_COUNT_KEY("q_per_class", train.q_per_class, 1),
      TAP_COUNT_KEY("train_episodes", train.episodes, 0),
      TAP_COUNT_KEY("val_every", train.val_every, 1),
      TAP_COUNT_KEY("val_episodes", train.val_episodes, 1),
      TAP_COUNT_KEY("eval_episodes", eval_episodes, 1),
      // verification and benchmarking
      TAP_COUNT_KEY("gradcheck_coords", gradcheck_coords, 1),
      {"gradcheck_step",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double h = parse_real(k, v);
         if (h <= 0.0) bad(k, "must be > 0, got " + std::string(v));
         c.gradcheck_step = h;
       },
       [](const RunConfig& c) { return fmt_real(c.gradcheck_step); }},
      {"gradcheck_tolerance",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const double t = parse_real(k, v);
         if (t <= 0.0) bad(k, "must be > 0, got " + std::string(v));
         c.gradcheck_tolerance = t;
       },
       [](const RunConfig& c) { return fmt_real(c.gradcheck_tolerance); }},
      {"bench_frames",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         auto frames = parse_list(k, v, false);
         for (std::size_t t : frames) {
           if (t < 2) bad(k, "frame counts must be >= 2");
         }
         c.bench_frames = std::move(frames);
       },
       [](const RunConfig& c) { return fmt_list(c.bench_frames); }},
      TAP_COUNT_KEY("bench_reps", bench_reps, 1),
      // general
      {"seed",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = parse_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      TAP_COUNT_KEY("threads", threads, 1),
      {"data_dir", [](RunConfig& c, std::string_view, std::string_view v) { c.data_dir = v; },
       [](const RunConfig& c) { return c.data_dir; }},
      {"checkpoint", [](RunConfig& c, std::string_view, std::string_view v) { c.checkpoint = v; },
       [](const RunConfig& c) { return c.checkpoint; }},
      {"out", [](RunConfig& c, std::string_view, std::string_view v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
  };
  return table;
}

#undef TAP_COUNT_KEY

}  // namespace

void RunConfig::sync() {
  gen.seed = seed;
  train.seed = seed;
  train.threads = threads;
  model.encoder.d_raw = gen.d_raw;
}

RunConfig default_config() {
  RunConfig c;
  c.sync();
  return c;
}

void set_key(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& def : key_table()) {
    if (key == def.name) {
      def.set(config, key, trim(value));
      config.sync();
      return;
    }
  }
  throw ConfigError(std::string(key) + ": unknown key");
}

void validate(const RunConfig& c) {
  synth::validate(c.gen);
  if (c.gen.warp_max < c.gen.warp_min) bad("warp_max", "must be >= warp_min");
  if (c.model.head_widths.empty() || c.model.head_widths.back() != 1)
    bad("head_widths", "last width must be 1");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    set_key(base, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
  }
  validate(base);
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path));
}

std::vector<std::string> config_lines(const RunConfig& config) {
  std::vector<std::string> out;
  for (const auto& def : key_table()) out.push_back(std::string(def.name) + " = " + def.get(config));
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& def : key_table()) out.emplace_back(def.name);
  return out;
}

}  // namespace tap::cli
