#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tap/core/tensor.hpp"
#include "tap/random.hpp"
#include "tap/sequence.hpp"

namespace tap::synth {

enum class Split { Train, Val, Test };

/// Generator settings. Every class uses the same multiset of motifs
/// {k mod n_motifs : k < motifs_per_class} and differs only in their order.
struct GenConfig {
  std::size_t d_raw = 16;
  std::size_t n_motifs = 5;
  std::size_t motif_length = 4;
  std::size_t motifs_per_class = 5;
  double sigma = 0.1;
  std::size_t warp_min = 1;
  std::size_t warp_max = 3;
  std::size_t train_classes = 64;
  std::size_t val_classes = 12;
  std::size_t test_classes = 24;
  std::size_t instances_per_class = 30;
  std::uint64_t seed = 1;

  std::size_t total_classes() const { return train_classes + val_classes + test_classes; }
};

void validate(const GenConfig& config);

/// Motif templates, each [d_raw x motif_length].
using MotifBank = std::vector<core::Tensor>;

struct ClassSpec {
  std::uint32_t class_id = 0;
  std::vector<std::size_t> order;  // motif indices
  Split split = Split::Train;
};

struct MetaSet {
  MotifBank motifs;
  std::vector<ClassSpec> classes;
  data::MetaSplits splits;
};

/// Number of distinct orderings of the class motif multiset, saturating at
/// SIZE_MAX.
std::size_t distinct_orders(const GenConfig& config);

MotifBank make_motifs(const GenConfig& config);

/// One instance: each motif in `order` has its frames repeated by a factor
/// drawn from [warp_min, warp_max], the pieces are concatenated and
/// N(0, sigma^2) noise is added.
data::RawSequence make_instance(const GenConfig& config, const MotifBank& motifs,
                                const ClassSpec& spec, std::uint32_t index, Rng& rng);

/// Class ids are assigned 0.. in train, val, test order. Throws
/// CapacityError when fewer distinct orders exist than classes requested.
MetaSet generate_metaset(const GenConfig& config);

}  // namespace tap::synth
