#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace tap::data {

/// A variable-length sequence of raw per-frame feature vectors.
/// Frames are stored frame by frame: frames[t * dim + d].
struct RawSequence {
  std::size_t dim = 0;
  std::size_t length = 0;
  std::vector<double> frames;
  std::uint32_t class_id = 0;
  std::uint64_t instance_id = 0;

  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(frames).subspan(t * dim, dim);
  }
};

inline std::uint64_t make_instance_id(std::uint32_t class_id, std::uint32_t index) {
  return (static_cast<std::uint64_t>(class_id) << 32) | index;
}

/// Sequences grouped by class id; one meta split.
using ClassStore = std::map<std::uint32_t, std::vector<RawSequence>>;

struct MetaSplits {
  ClassStore train;
  ClassStore val;
  ClassStore test;
};

}  // namespace tap::data
