#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "tap/errors.hpp"
#include "tap/sampler.hpp"

using namespace tap;
using namespace tap::sampling;

namespace {

data::RawSequence ramp(std::size_t length, std::size_t dim = 2) {
  data::RawSequence s;
  s.dim = dim;
  s.length = length;
  s.instance_id = 77;
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t d = 0; d < dim; ++d) s.frames.push_back(static_cast<double>(10 * t + d));
  return s;
}

using Idx = std::vector<std::size_t>;

}  // namespace

TEST_CASE("L = T gives one frame per segment in either mode") {
  Rng rng(1);
  CHECK(segment_indices(6, 6, SampleMode::Test, rng) == Idx{0, 1, 2, 3, 4, 5});
  for (int k = 0; k < 20; ++k) CHECK(segment_indices(6, 6, SampleMode::Train, rng) == Idx{0, 1, 2, 3, 4, 5});
}

TEST_CASE("test mode takes segment centers") {
  Rng rng(1);
  CHECK(segment_indices(12, 6, SampleMode::Test, rng) == Idx{1, 3, 5, 7, 9, 11});
}

TEST_CASE("short sequences repeat indices") {
  Rng rng(1);
  CHECK(segment_indices(3, 6, SampleMode::Test, rng) == Idx{0, 0, 1, 1, 2, 2});
  CHECK(segment_indices(1, 4, SampleMode::Test, rng) == Idx{0, 0, 0, 0});
  for (int k = 0; k < 50; ++k) {
    const auto idx = segment_indices(3, 6, SampleMode::Train, rng);
    REQUIRE(idx.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(idx[i] <= 2);
      if (i) CHECK(idx[i] >= idx[i - 1]);
    }
  }
}

TEST_CASE("T = 0 is a contract error") {
  Rng rng(1);
  CHECK_THROWS_AS(segment_indices(5, 0, SampleMode::Test, rng), ContractError);
  CHECK_THROWS_AS(sparse_sample(ramp(5), 0, SampleMode::Train, rng), ContractError);
}

TEST_CASE("train indices stay in segment bounds and are strictly increasing") {
  Rng rng(7);
  for (std::size_t L : {6u, 7u, 13u, 40u, 101u}) {
    for (int trial = 0; trial < 200; ++trial) {
      const auto idx = segment_indices(L, 6, SampleMode::Train, rng);
      REQUIRE(idx.size() == 6);
      for (std::size_t i = 0; i < 6; ++i) {
        CHECK(idx[i] >= i * L / 6);
        CHECK(idx[i] < (i + 1) * L / 6);
        if (i) CHECK(idx[i] > idx[i - 1]);
      }
    }
  }
}

TEST_CASE("train mode is uniform within segments") {
  Rng rng(99);
  const std::size_t T = 6, L = 2 * T;
  std::vector<std::size_t> first(T, 0);
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto idx = segment_indices(L, T, SampleMode::Train, rng);
    for (std::size_t i = 0; i < T; ++i)
      if (idx[i] == 2 * i) ++first[i];
  }
  for (std::size_t i = 0; i < T; ++i) {
    const double freq = static_cast<double>(first[i]) / draws;
    CHECK(freq > 0.45);
    CHECK(freq < 0.55);
  }
}

TEST_CASE("sparse_sample copies the chosen frames column-wise") {
  Rng rng(3);
  const auto seq = ramp(12, 2);
  const auto s = sparse_sample(seq, 6, SampleMode::Test, rng);
  CHECK(s.frames.rows() == 2);
  CHECK(s.frames.cols() == 6);
  CHECK(s.source == 77);
  CHECK(s.indices == Idx{1, 3, 5, 7, 9, 11});
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(s.frames.at(0, i) == 10.0 * s.indices[i]);
    CHECK(s.frames.at(1, i) == 10.0 * s.indices[i] + 1);
  }
}

TEST_CASE("test mode is deterministic and ignores the rng") {
  Rng a(1), b(2);
  const auto seq = ramp(37);
  const auto s1 = sparse_sample(seq, 6, SampleMode::Test, a);
  const auto s2 = sparse_sample(seq, 6, SampleMode::Test, b);
  CHECK(s1.indices == s2.indices);
  CHECK(a == Rng(1));
}

TEST_CASE("output always has T columns") {
  Rng rng(5);
  for (std::size_t L = 1; L <= 30; ++L)
    for (std::size_t T : {1u, 4u, 6u, 9u})
      for (auto mode : {SampleMode::Train, SampleMode::Test})
        CHECK(sparse_sample(ramp(L), T, mode, rng).frames.cols() == T);
}
