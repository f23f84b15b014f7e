#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace armlab {

/// K x K counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes);

  std::size_t classes() const { return k_; }
  void add(std::size_t truth, std::size_t predicted, std::int64_t count = 1);
  std::int64_t at(std::size_t truth, std::size_t predicted) const;
  std::int64_t total() const;
  std::int64_t row_total(std::size_t truth) const;
  std::int64_t correct() const;

  /// CSV: header `true\pred,<names>` then one row per true class.
  void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names) const;
  static ConfusionMatrix read_csv(const std::filesystem::path& path);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<std::int64_t> counts_;
};

struct Metrics {
  double weighted_accuracy = 0.0;    // trace / total
  double unweighted_accuracy = 0.0;  // mean per-class accuracy over non-empty rows
  std::vector<std::optional<double>> per_class;  // nullopt for classes without samples
};

Metrics compute_metrics(const ConfusionMatrix& confusion);

}  // namespace armlab
