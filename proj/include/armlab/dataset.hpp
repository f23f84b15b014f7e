#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "armlab/tensor.hpp"

namespace armlab {

struct SampleRef {
  std::string path;  // relative to the dataset root
  std::size_t label = 0;
  std::size_t id = 0;  // index into Dataset::images
};

/// Per-class sample lists. Every sample sits in exactly one list.
struct DatasetIndex {
  std::vector<std::string> classes;
  std::vector<std::vector<SampleRef>> per_class;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t size() const;
  std::vector<std::size_t> counts() const;
  void validate() const;
};

/// Index plus decoded images, each (1, H, W) with values in [0, 1].
struct Dataset {
  DatasetIndex index;
  std::vector<Tensor> images;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return images.size(); }
};

/// Reads `root/labels.csv` (header `relative_path,label`). Images are PGM P5
/// or ".ten" tensors. The class set comes from `root/manifest.json`
/// ("classes") when present, otherwise from the sorted distinct labels.
Dataset load_dataset(const std::filesystem::path& root);

struct SynthConfig {
  std::size_t classes = 7;
  std::size_t per_class = 200;
  std::vector<std::size_t> class_counts;  // overrides per_class when non-empty
  std::size_t extent = 28;
  std::uint64_t seed = 1;
  double noise = 0.08;

  std::vector<std::size_t> counts() const;
};

/// Counts decaying geometrically from `largest` to largest / ratio.
std::vector<std::size_t> imbalanced_counts(std::size_t classes, std::size_t largest, double ratio);

/// Renders the synthetic corpus in memory. Every class is a fixed blob
/// constellation plus an oriented grating, laid over a background shared by
/// all classes.
Dataset synth_images(const SynthConfig& cfg);

/// Writes the synthetic corpus: images/*.pgm, labels.csv and manifest.json.
DatasetIndex synth_dataset(const SynthConfig& cfg, const std::filesystem::path& root);

struct Split {
  Dataset train;
  Dataset val;
};

/// Stratified split: round(n_c * val_fraction) samples of each class go to
/// validation (at least one when n_c >= 2 and the fraction is positive).
Split split_stratified(const Dataset& data, double val_fraction, std::uint64_t seed);

struct Batch {
  Tensor images;  // (N, 1, H, W)
  std::vector<int> labels;
};

Batch make_batch(const Dataset& data, std::span<const SampleRef> samples);

/// Nearest-centroid classifier on raw pixels, fit on `train`, accuracy on `test`.
double nearest_centroid_accuracy(const Dataset& train, const Dataset& test);

}  // namespace armlab
