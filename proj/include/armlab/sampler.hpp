#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "armlab/dataset.hpp"

namespace armlab {

/// Minimal random resampling: with m the smallest class count, draws m
/// samples from every class uniformly without replacement and returns the
/// m*K picks in shuffled order. A fresh seed per epoch yields a fresh subset.
std::vector<SampleRef> mrr_epoch_sample(const DatasetIndex& index, std::uint64_t seed);

/// Every sample once, shuffled.
std::vector<SampleRef> full_epoch_sample(const DatasetIndex& index, std::uint64_t seed);

/// Seed for epoch `epoch` of a run seeded with `seed`.
std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch);

struct ImbalanceReport {
  std::vector<std::string> classes;
  std::vector<std::size_t> counts;
  std::size_t largest = 0;
  std::size_t smallest = 0;
  double ratio = 0.0;  // largest / smallest
};

ImbalanceReport class_counts_report(const DatasetIndex& index);

}  // namespace armlab
