#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tap/cli/config.hpp"

namespace tap::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kNumeric = 3,
  kCheckpointMismatch = 4,
  kGradcheckFailed = 5,
};

// Bad command-line arguments (out-of-range index, zero episode count, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses argv and dispatches a subcommand; maps errors to ExitCode values.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Subcommands. They throw on failure; run() translates exceptions.

int cmd_gen(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);

struct AlignArgs {
  std::filesystem::path file_a;
  std::size_t index_a = 0;
  std::filesystem::path file_b;
  std::size_t index_b = 0;
};
int cmd_align(const RunConfig& config, const AlignArgs& args, std::ostream& out);

struct CheckOutcome {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::string worst_coord;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = false;
};

/// Gradient checks for every op and for full 5-way 1-shot episode losses at
/// T = 4, D_f = 8, H = 6. `corrupt` names a check whose backward rule gets a
/// deliberately wrong factor, to show the checker catches it.
std::vector<CheckOutcome> run_gradcheck_suite(const RunConfig& config,
                                              const std::string& corrupt = "");
int cmd_gradcheck(const RunConfig& config, std::ostream& out, const std::string& corrupt = "");

struct BenchRow {
  std::size_t frames = 0;
  double tap_seconds = 0.0;
  double dtw_seconds = 0.0;
  double ratio = 0.0;  // dtw_seconds / tap_seconds
};
std::vector<BenchRow> run_bench(const RunConfig& config);
int cmd_bench(const RunConfig& config, std::ostream& out);

// Alignment export formats.
std::string matrix_csv(const core::Tensor& m);
std::string matrix_pgm(const core::Tensor& m, bool signed_range);

}  // namespace tap::cli
