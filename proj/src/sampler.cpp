#include "armlab/sampler.hpp"

#include <algorithm>
#include <random>

#include "armlab/error.hpp"

namespace armlab {

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch),
                    std::uint32_t(epoch >> 32), 0x4D52u};
  std::uint64_t out[1];
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (std::uint64_t(words[0]) << 32) | words[1];
  return out[0];
}

std::vector<SampleRef> mrr_epoch_sample(const DatasetIndex& index, std::uint64_t seed) {
  if (index.num_classes() == 0) throw DataError("MRR: dataset has no classes");
  std::size_t m = SIZE_MAX;
  for (std::size_t c = 0; c < index.num_classes(); ++c) {
    if (index.per_class[c].empty()) {
      throw DataError("MRR: class '" + index.classes[c] + "' has no samples");
    }
    m = std::min(m, index.per_class[c].size());
  }
  std::mt19937_64 rng(seed);
  std::vector<SampleRef> epoch;
  epoch.reserve(m * index.num_classes());
  for (const auto& members : index.per_class) {
    // Partial Fisher-Yates over positions: the first m are a uniform subset.
    std::vector<std::size_t> pos(members.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
      std::swap(pos[i], pos[pick(rng)]);
      epoch.push_back(members[pos[i]]);
    }
  }
  std::shuffle(epoch.begin(), epoch.end(), rng);
  return epoch;
}

std::vector<SampleRef> full_epoch_sample(const DatasetIndex& index, std::uint64_t seed) {
  std::vector<SampleRef> epoch;
  epoch.reserve(index.size());
  for (const auto& members : index.per_class) epoch.insert(epoch.end(), members.begin(), members.end());
  std::mt19937_64 rng(seed);
  std::shuffle(epoch.begin(), epoch.end(), rng);
  return epoch;
}

ImbalanceReport class_counts_report(const DatasetIndex& index) {
  ImbalanceReport r;
  r.classes = index.classes;
  r.counts = index.counts();
  if (r.counts.empty()) return r;
  r.largest = *std::max_element(r.counts.begin(), r.counts.end());
  r.smallest = *std::min_element(r.counts.begin(), r.counts.end());
  r.ratio = r.smallest ? double(r.largest) / double(r.smallest) : INFINITY;
  return r;
}

}  // namespace armlab
