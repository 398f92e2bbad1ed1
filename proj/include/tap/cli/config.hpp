#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tap/fewshot.hpp"
#include "tap/synthgen.hpp"

namespace tap::cli {

/// Every tunable of the toolchain in one flat namespace.
///
/// Text form: UTF-8 lines "key = value"; '#' starts a comment; unknown keys
/// and out-of-domain values are rejected with ConfigError naming the key.
struct RunConfig {
  synth::GenConfig gen;
  fewshot::ModelConfig model;
  fewshot::TrainConfig train;

  std::size_t eval_episodes = 10000;

  std::size_t gradcheck_coords = 32;
  double gradcheck_step = 1e-5;
  double gradcheck_tolerance = 1e-4;

  std::vector<std::size_t> bench_frames{8, 16, 32, 64};
  std::size_t bench_reps = 5;

  std::uint64_t seed = 1;
  std::size_t threads = 1;

  std::string data_dir;
  std::string checkpoint;
  std::string out;

  /// Copies seed/thread settings into the nested module configs.
  void sync();
};

RunConfig default_config();

/// Applies "key = value" lines on top of `base`.
RunConfig parse_config(std::string_view text, RunConfig base = default_config());
RunConfig load_config(const std::filesystem::path& path);

/// Sets one key from its textual value.
void set_key(RunConfig& config, std::string_view key, std::string_view value);

/// Cross-key validation (e.g. warp_max >= warp_min).
void validate(const RunConfig& config);

/// Effective config as "key = value" lines in canonical key order.
std::vector<std::string> config_lines(const RunConfig& config);
std::vector<std::string> known_keys();

}  // namespace tap::cli
