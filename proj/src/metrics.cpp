#include "armlab/metrics.hpp"

#include <fstream>
#include <sstream>

#include "armlab/error.hpp"

namespace armlab {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::int64_t count) {
  if (truth >= k_ || predicted >= k_) {
    throw DataError("confusion matrix: class index out of range (" + std::to_string(truth) + ", " +
                    std::to_string(predicted) + ") for K=" + std::to_string(k_));
  }
  if (count < 0) throw DataError("confusion matrix: negative count");
  counts_[truth * k_ + predicted] += count;
}

std::int64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  return counts_.at(truth * k_ + predicted);
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::int64_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::int64_t t = 0;
  for (std::size_t p = 0; p < k_; ++p) t += at(truth, p);
  return t;
}

std::int64_t ConfusionMatrix::correct() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

void ConfusionMatrix::write_csv(const std::filesystem::path& path,
                                const std::vector<std::string>& names) const {
  if (names.size() != k_) throw DataError("confusion matrix: class name count mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "true\\pred";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t t = 0; t < k_; ++t) {
    os << names[t];
    for (std::size_t p = 0; p < k_; ++p) os << ',' << at(t, p);
    os << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

ConfusionMatrix ConfusionMatrix::read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<std::int64_t>> rows;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (row == 1 || line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<std::int64_t> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stoll(cell));
      } catch (...) {
        throw DataError(path.string() + " row " + std::to_string(row) + ": bad count '" + cell + "'");
      }
    }
    rows.push_back(std::move(vals));
  }
  ConfusionMatrix m(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != rows.size()) {
      throw DataError(path.string() + ": matrix is not square");
    }
    for (std::size_t p = 0; p < rows.size(); ++p) m.add(t, p, rows[t][p]);
  }
  return m;
}

Metrics compute_metrics(const ConfusionMatrix& confusion) {
  const std::int64_t total = confusion.total();
  if (confusion.classes() == 0 || total == 0) {
    throw DataError("metrics: confusion matrix holds no samples");
  }
  Metrics m;
  m.weighted_accuracy = double(confusion.correct()) / double(total);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < confusion.classes(); ++c) {
    const std::int64_t n = confusion.row_total(c);
    if (n == 0) {
      m.per_class.push_back(std::nullopt);
      continue;
    }
    const double acc = double(confusion.at(c, c)) / double(n);
    m.per_class.push_back(acc);
    sum += acc;
    ++present;
  }
  m.unweighted_accuracy = sum / double(present);
  return m;
}

}  // namespace armlab
