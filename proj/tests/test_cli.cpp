#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "tap/binary_io.hpp"
#include "tap/cli/commands.hpp"
#include "tap/cli/config.hpp"
#include "tap/core/checkpoint.hpp"
#include "tap/dataset_io.hpp"
#include "tap/errors.hpp"

using namespace tap;
using namespace tap::cli;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "# small desk run\n"
    "d_raw = 4\n"
    "motif_length = 2\n"
    "train_classes = 6\n"
    "val_classes = 5\n"
    "test_classes = 5\n"
    "instances_per_class = 4\n"
    "frames = 4\n"
    "d_f = 8\n"
    "encoder_hidden = 8\n"
    "lstm_hidden = 6\n"
    "head_widths = 12,6,1\n"
    "train_episodes = 4\n"
    "val_every = 2\n"
    "val_episodes = 3\n"
    "eval_episodes = 20\n"
    "lr = 0.01\n"
    "seed = 3\n";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result tap_run(std::vector<std::string> args) {
  args.insert(args.begin(), "tap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("tap_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
  std::string config(const std::string& extra = "") const {
    const auto p = dir / ("run" + std::to_string(std::hash<std::string>{}(extra)) + ".cfg");
    io::write_file(p, std::string(kSmallConfig) + extra);
    return p.string();
  }
};

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
  return out;
}

std::vector<std::vector<double>> read_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(kSmallConfig);
  CHECK(c.gen.d_raw == 4);
  CHECK(c.model.encoder.d_raw == 4);
  CHECK(c.model.head_widths == std::vector<std::size_t>{12, 6, 1});
  CHECK(c.train.seed == 3);
  CHECK(c.gen.seed == 3);
  CHECK(c.train.sgd.learning_rate == 0.01);

  CHECK_THROWS_AS(parse_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("lr\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("frames = -2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("momentum = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("head_widths = 8,4\n"), ConfigError);
  try {
    parse_config("sigma = -1\n");
    FAIL("expected config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("sigma") != std::string::npos);
  }

  // Canonical lines parse back to the same configuration.
  std::string text;
  for (const auto& line : config_lines(c)) text += line + "\n";
  CHECK(config_lines(parse_config(text, default_config())) == config_lines(c));
  CHECK(config_lines(c).size() == known_keys().size());
}

TEST_CASE("defaults follow the training protocol") {
  const auto c = default_config();
  CHECK(c.train.sgd.learning_rate == 0.001);
  CHECK(c.train.sgd.momentum == 0.9);
  CHECK(c.train.sgd.weight_decay == 0.0001);
  CHECK(c.train.clip_norm == 40.0);
  CHECK(c.model.frames == 6);
  CHECK(c.train.episodes_per_epoch * c.train.sgd.decay_every == 2000);
  CHECK(c.eval_episodes == 10000);
  CHECK(c.gen.train_classes == 64);
  CHECK(c.gen.val_classes == 12);
  CHECK(c.gen.test_classes == 24);
}

TEST_CASE("usage errors") {
  CHECK(tap_run({}).code == kUsage);
  CHECK(tap_run({"frobnicate"}).code == kUsage);
  CHECK(tap_run({"gen"}).code == kUsage);
  CHECK(tap_run({"--help"}).code == kOk);
}

TEST_CASE("gen writes a deterministic dataset with manifest") {
  Workspace ws("gen");
  auto r = tap_run({"gen", "--out", ws.path("a"), "--seed", "9"});
  REQUIRE(r.code == kOk);
  std::size_t files = 0;
  for (const char* split : {"meta_train", "meta_val", "meta_test"})
    for (const auto& e : fs::directory_iterator(ws.dir / "a" / split)) files += e.path().extension() == ".seq";
  CHECK(files == 100);
  const auto manifest = io::read_file(ws.dir / "a" / "manifest.txt");
  CHECK(manifest.find("seed = 9") != std::string::npos);
  CHECK(manifest.find("sigma = ") != std::string::npos);

  REQUIRE(tap_run({"gen", "--out", ws.path("b"), "--seed", "9"}).code == kOk);
  auto ta = tree(ws.dir / "a"), tb = tree(ws.dir / "b");
  // Manifests differ only in the echoed output path.
  ta.erase("manifest.txt");
  tb.erase("manifest.txt");
  CHECK(ta == tb);
}

TEST_CASE("gen rejects a negative sigma") {
  Workspace ws("gen_bad");
  const auto cfg = ws.config("sigma = -0.5\n");
  const auto r = tap_run({"gen", "--config", cfg, "--out", ws.path("d")});
  CHECK(r.code == kUsage);
  CHECK(r.err.find("sigma") != std::string::npos);
}

TEST_CASE("train, eval and align on a small dataset") {
  Workspace ws("pipeline");
  const auto cfg = ws.config();
  REQUIRE(tap_run({"gen", "--config", cfg, "--out", ws.path("data")}).code == kOk);

  SUBCASE("missing data directory") {
    CHECK(tap_run({"train", "--config", cfg, "--data", ws.path("nope"), "--out", ws.path("m.tapc")}).code ==
          kIo);
  }

  SUBCASE("lr = 0 keeps the initialization") {
    const auto cfg0 = ws.config("lr = 0\n");
    REQUIRE(tap_run({"train", "--config", cfg0, "--data", ws.path("data"), "--out", ws.path("m.tapc")}).code ==
            kOk);
    CHECK(io::read_file(ws.path("m.tapc")) == io::read_file(ws.path("m.tapc.init")));
  }

  SUBCASE("seeded training and evaluation are reproducible") {
    auto train = [&] {
      const auto r = tap_run({"train", "--config", cfg, "--data", ws.path("data"), "--out", ws.path("m.tapc")});
      REQUIRE(r.code == kOk);
      return std::pair{io::read_file(ws.path("m.tapc")), io::read_file(ws.path("m.tapc.metrics.csv"))};
    };
    const auto first = train();
    const auto second = train();
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
    CHECK(first.second.find("# seed = 3") != std::string::npos);
    CHECK(first.second.find("episode_index,loss,grad_norm,lr") != std::string::npos);
    CHECK(first.first != io::read_file(ws.path("m.tapc.init")));

    const auto e1 = tap_run({"eval", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--data", ws.path("data")});
    const auto e2 = tap_run({"eval", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--data", ws.path("data")});
    REQUIRE(e1.code == kOk);
    CHECK(e1.out == e2.out);
    CHECK(e1.out.rfind("accuracy ", 0) == 0);
    CHECK(e1.out.find(" ± ") != std::string::npos);
    CHECK(e1.out.find("over 20 episodes") != std::string::npos);
    const auto csv = io::read_file(ws.path("m.tapc.eval.csv"));
    CHECK(csv.find("episodes,n_way,k_shot,accuracy,ci_half_width,mean_loss") != std::string::npos);
    std::size_t rows = 0;
    for (std::istringstream in(csv); !in.eof();) {
      std::string line;
      std::getline(in, line);
      rows += !line.empty() && line[0] != '#';
    }
    CHECK(rows == 3);  // header plus two appended reports

    CHECK(tap_run({"eval", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--data", ws.path("data"),
                   "--episodes", "0"})
              .code == kUsage);

    // A checkpoint from a different architecture is refused, naming the tensor.
    const auto wide = ws.config("lstm_hidden = 7\n");
    const auto mismatch =
        tap_run({"eval", "--config", wide, "--checkpoint", ws.path("m.tapc"), "--data", ws.path("data")});
    CHECK(mismatch.code == kCheckpointMismatch);
    CHECK(mismatch.err.find("alpha/") != std::string::npos);

    // Thread count only changes scheduling.
    const auto e3 = tap_run({"eval", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--data", ws.path("data"),
                             "--threads", "3", "--out", ws.path("t3.csv")});
    CHECK(e3.out == e1.out);
    CHECK(io::read_file(ws.path("t3.csv")).find("# threads = 3") != std::string::npos);
  }

  SUBCASE("align exports P and S") {
    REQUIRE(tap_run({"train", "--config", cfg, "--data", ws.path("data"), "--out", ws.path("m.tapc")}).code == kOk);
    const auto file = ws.path("data/meta_test/class_11.seq");
    const auto r = tap_run({"align", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--out", ws.path("al"),
                            file, "1", file, "1"});
    REQUIRE(r.code == kOk);
    CHECK(r.out.rfind("similarity ", 0) == 0);
    const auto S = read_csv(io::read_file(ws.dir / "al" / "S.csv"));
    const auto P = read_csv(io::read_file(ws.dir / "al" / "P.csv"));
    REQUIRE(S.size() == 4);
    REQUIRE(P.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      REQUIRE(S[i].size() == 4);
      CHECK(S[i][i] == doctest::Approx(1.0).epsilon(1e-9));
    }
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) s += P[i][j] * S[i][j];
    CHECK(std::stod(r.out.substr(11)) == doctest::Approx(s).epsilon(1e-7));

    const auto pgm = io::read_file(ws.dir / "al" / "P.pgm");
    CHECK(pgm.rfind("P2\n4 4\n255\n", 0) == 0);
    CHECK(io::read_file(ws.dir / "al" / "S.pgm").rfind("P2\n4 4\n255\n", 0) == 0);

    const auto oob = tap_run({"align", "--config", cfg, "--checkpoint", ws.path("m.tapc"), "--out", ws.path("al"),
                              file, "99", file, "0"});
    CHECK(oob.code == kUsage);
  }
}

TEST_CASE("thread count falls back to TAP_THREADS") {
  Workspace ws("env");
  const auto cfg = ws.config();
  REQUIRE(tap_run({"gen", "--config", cfg, "--out", ws.path("data")}).code == kOk);
  const auto init = ws.path("m.tapc");
  REQUIRE(tap_run({"train", "--config", ws.config("train_episodes = 0\n"), "--data", ws.path("data"), "--out", init})
              .code == kOk);
  setenv("TAP_THREADS", "2", 1);
  REQUIRE(tap_run({"eval", "--config", cfg, "--checkpoint", init, "--data", ws.path("data"), "--out",
                   ws.path("env.csv")})
              .code == kOk);
  REQUIRE(tap_run({"eval", "--config", cfg, "--checkpoint", init, "--data", ws.path("data"), "--out",
                   ws.path("flag.csv"), "--threads", "4"})
              .code == kOk);
  unsetenv("TAP_THREADS");
  CHECK(io::read_file(ws.path("env.csv")).find("# threads = 2") != std::string::npos);
  CHECK(io::read_file(ws.path("flag.csv")).find("# threads = 4") != std::string::npos);
}

TEST_CASE("matrix export formats") {
  const auto m = core::Tensor::matrix(2, 2, {0.0, 1.0, 0.123456789012, -1.0});
  CHECK(matrix_csv(m) == "0,1\n0.123456789,-1\n");
  CHECK(matrix_pgm(m, false) == "P2\n2 2\n255\n0 255\n31 0\n");
  CHECK(matrix_pgm(m, true) == "P2\n2 2\n255\n128 255\n143 0\n");
}

TEST_CASE("gradcheck suite") {
  const auto r = tap_run({"gradcheck"});
  CHECK(r.code == kOk);
  std::size_t checks = 0;
  for (std::istringstream in(r.out); !in.eof();) {
    std::string line;
    std::getline(in, line);
    checks += line.find("max_rel_err") != std::string::npos;
  }
  CHECK(checks >= 10);
  CHECK(r.out.find("episode_loss_tap") != std::string::npos);

  std::ostringstream out;
  CHECK(cmd_gradcheck(default_config(), out, "tanh") == kGradcheckFailed);
  CHECK(out.str().find("FAIL") != std::string::npos);
}

TEST_CASE("bench table") {
  Workspace ws("bench");
  const auto r = tap_run({"bench", "--frames", "4,8", "--reps", "3", "--out", ws.path("b.csv")});
  REQUIRE(r.code == kOk);
  std::vector<std::vector<double>> rows;
  std::istringstream in(io::read_file(ws.path("b.csv")));
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "frames,tap_seconds,dtw_seconds,ratio") {
      header = true;
      continue;
    }
    rows.push_back(read_csv(line)[0]);
  }
  CHECK(header);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == 4);
  CHECK(rows[1][0] == 8);
  for (const auto& row : rows) {
    CHECK(row[1] > 0);
    CHECK(row[2] > 0);
    CHECK(row[3] == doctest::Approx(row[2] / row[1]).epsilon(1e-8));
  }
  CHECK(tap_run({"bench", "--frames", "1"}).code == kUsage);
}

TEST_CASE("the installed binary reports exit codes") {
  const char* bin = std::getenv("TAP_BIN");
  if (!bin) return;
  Workspace ws("bin");
  const std::string cmd = std::string(bin) + " train --data " + ws.path("missing") + " --out " +
                          ws.path("m.tapc") + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kIo);
}
