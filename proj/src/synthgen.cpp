#include "tap/synthgen.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "tap/errors.hpp"
#include "tap/random.hpp"

namespace tap::synth {
namespace {

constexpr std::uint64_t kMotifStream = 0x6d6f74696673ULL;
constexpr std::uint64_t kOrderStream = 0x6f7264657273ULL;
constexpr std::uint64_t kClassStreamBase = 0x636c617373ULL << 24;

std::vector<std::size_t> base_multiset(const GenConfig& config) {
  std::vector<std::size_t> out(config.motifs_per_class);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = k % config.n_motifs;
  return out;
}

}  // namespace

void validate(const GenConfig& config) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (config.d_raw == 0) fail("d_raw", "must be positive");
  if (config.n_motifs == 0) fail("n_motifs", "must be positive");
  if (config.motif_length == 0) fail("motif_length", "must be positive");
  if (config.motifs_per_class == 0) fail("motifs_per_class", "must be positive");
  if (!(config.sigma >= 0.0)) fail("sigma", "must be >= 0");
  if (config.warp_min < 1) fail("warp_min", "must be >= 1");
  if (config.warp_max < config.warp_min) fail("warp_max", "must be >= warp_min");
  if (config.instances_per_class == 0) fail("instances_per_class", "must be positive");
}

std::size_t distinct_orders(const GenConfig& config) {
  // r! / prod(multiplicity!) computed incrementally as a product of binomials.
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t m : base_multiset(config)) ++counts[m];
  constexpr std::size_t cap = std::numeric_limits<std::size_t>::max();
  std::size_t result = 1, placed = 0;
  for (const auto& [motif, count] : counts) {
    // multiply by C(placed + count, count)
    std::size_t binom = 1;
    for (std::size_t k = 1; k <= count; ++k) {
      const std::size_t num = placed + k;
      if (binom > cap / num) return cap;
      binom = binom * num / k;
    }
    if (result > cap / binom) return cap;
    result *= binom;
    placed += count;
  }
  return result;
}

MotifBank make_motifs(const GenConfig& config) {
  Rng rng = derive_rng(config.seed, kMotifStream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MotifBank bank;
  for (std::size_t m = 0; m < config.n_motifs; ++m) {
    core::Tensor motif(core::Shape{config.d_raw, config.motif_length});
    for (double& v : motif.values()) v = gauss(rng);
    bank.push_back(std::move(motif));
  }
  return bank;
}

data::RawSequence make_instance(const GenConfig& config, const MotifBank& motifs,
                                const ClassSpec& spec, std::uint32_t index, Rng& rng) {
  std::uniform_int_distribution<std::size_t> warp(config.warp_min, config.warp_max);
  std::normal_distribution<double> noise(0.0, 1.0);

  data::RawSequence seq;
  seq.dim = config.d_raw;
  seq.class_id = spec.class_id;
  seq.instance_id = data::make_instance_id(spec.class_id, index);
  for (std::size_t m : spec.order) {
    const core::Tensor& motif = motifs.at(m);
    const std::size_t factor = warp(rng);
    for (std::size_t t = 0; t < config.motif_length; ++t) {
      for (std::size_t rep = 0; rep < factor; ++rep) {
        for (std::size_t d = 0; d < config.d_raw; ++d) seq.frames.push_back(motif.at(d, t));
        ++seq.length;
      }
    }
  }
  if (config.sigma > 0.0) {
    for (double& v : seq.frames) v += config.sigma * noise(rng);
  }
  return seq;
}

MetaSet generate_metaset(const GenConfig& config) {
  validate(config);
  const std::size_t wanted = config.total_classes();
  const std::size_t available = distinct_orders(config);
  if (available < wanted) {
    throw CapacityError("generate_metaset: " + std::to_string(wanted) +
                        " classes requested but the motif multiset has only " +
                        std::to_string(available) + " distinct orders");
  }

  MetaSet out;
  out.motifs = make_motifs(config);

  // Distinct orders by rejection; fine while `available` comfortably exceeds
  // `wanted`, and exhaustive enumeration covers the near-full case.
  Rng order_rng = derive_rng(config.seed, kOrderStream);
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> order = base_multiset(config);
  if (available <= 4 * wanted) {
    std::sort(order.begin(), order.end());
    do {
      orders.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
    for (std::size_t i = 0; i < wanted; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, orders.size() - 1);
      std::swap(orders[i], orders[pick(order_rng)]);
    }
    orders.resize(wanted);
  } else {
    std::set<std::vector<std::size_t>> seen;
    while (orders.size() < wanted) {
      std::shuffle(order.begin(), order.end(), order_rng);
      if (seen.insert(order).second) orders.push_back(order);
    }
  }

  for (std::size_t c = 0; c < wanted; ++c) {
    ClassSpec spec;
    spec.class_id = static_cast<std::uint32_t>(c);
    spec.order = orders[c];
    spec.split = c < config.train_classes                        ? Split::Train
                 : c < config.train_classes + config.val_classes ? Split::Val
                                                                 : Split::Test;
    Rng class_rng = derive_rng(config.seed, kClassStreamBase + c);
    std::vector<data::RawSequence> seqs;
    seqs.reserve(config.instances_per_class);
    for (std::size_t i = 0; i < config.instances_per_class; ++i) {
      seqs.push_back(make_instance(config, out.motifs, spec, static_cast<std::uint32_t>(i), class_rng));
    }
    auto& store = spec.split == Split::Train ? out.splits.train
                  : spec.split == Split::Val ? out.splits.val
                                             : out.splits.test;
    store.emplace(spec.class_id, std::move(seqs));
    out.classes.push_back(std::move(spec));
  }
  return out;
}

}  // namespace tap::synth
