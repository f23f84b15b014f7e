#include "armlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "armlab/error.hpp"
#include "armlab/pgm.hpp"
#include "armlab/tensor_io.hpp"

namespace armlab {

namespace fs = std::filesystem;

std::size_t DatasetIndex::size() const {
  std::size_t n = 0;
  for (const auto& c : per_class) n += c.size();
  return n;
}

std::vector<std::size_t> DatasetIndex::counts() const {
  std::vector<std::size_t> out;
  for (const auto& c : per_class) out.push_back(c.size());
  return out;
}

void DatasetIndex::validate() const {
  if (per_class.size() != classes.size()) {
    throw DataError("dataset index: " + std::to_string(classes.size()) + " classes but " +
                    std::to_string(per_class.size()) + " sample lists");
  }
  std::set<std::size_t> ids;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (const auto& s : per_class[c]) {
      if (s.label != c) {
        throw DataError("dataset index: sample " + s.path + " listed under class " +
                        classes[c] + " but labelled " + std::to_string(s.label));
      }
      if (!ids.insert(s.id).second) {
        throw DataError("dataset index: sample id " + std::to_string(s.id) + " appears twice");
      }
    }
  }
}

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cols;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cols.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cols.emplace_back();
  return cols;
}

Tensor image_to_tensor(const GrayImage& img) {
  Tensor t(Shape{1, img.height, img.width});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = float(img.pixels[i]) / 255.0f;
  return t;
}

Tensor load_image(const fs::path& path) {
  if (path.extension() == ".ten") {
    Tensor t = read_tensor(path);
    if (t.rank() == 2) t = t.reshaped(Shape{1, t.dim(0), t.dim(1)});
    if (t.rank() != 3 || t.dim(0) != 1) {
      throw DataError(path.string() + ": expected a (H, W) or (1, H, W) tensor, got " +
                      shape_to_string(t.shape()));
    }
    for (auto& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
    return t;
  }
  return image_to_tensor(read_pgm(path));
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  const fs::path csv = root / "labels.csv";
  std::ifstream is(csv);
  if (!is) throw DataError("missing " + csv.string());

  std::vector<std::string> declared;
  const fs::path manifest = root / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream ms(manifest);
    try {
      const auto j = nlohmann::json::parse(ms);
      if (j.contains("classes")) declared = j.at("classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(manifest.string() + ": " + e.what());
    }
  }

  std::string line;
  if (!std::getline(is, line)) throw DataError(csv.string() + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() != 2 || header[0] != "relative_path" || header[1] != "label") {
    throw DataError(csv.string() + ": header must be 'relative_path,label'");
  }
  std::vector<std::pair<std::string, std::string>> rows;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      throw DataError(csv.string() + " row " + std::to_string(row) +
                      ": expected 2 non-empty columns");
    }
    rows.emplace_back(cols[0], cols[1]);
  }

  std::vector<std::string> classes = declared;
  if (classes.empty()) {
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.second);
    classes.assign(names.begin(), names.end());
  }
  std::map<std::string, std::size_t> class_id;
  for (std::size_t i = 0; i < classes.size(); ++i) class_id[classes[i]] = i;

  Dataset d;
  d.index.classes = classes;
  d.index.per_class.resize(classes.size());
  row = 1;
  for (const auto& [rel, label] : rows) {
    ++row;
    auto it = class_id.find(label);
    if (it == class_id.end()) {
      throw DataError(csv.string() + " row " + std::to_string(row) + ": label '" + label +
                      "' is not a declared class");
    }
    const fs::path path = root / rel;
    if (!fs::exists(path)) {
      throw DataError(csv.string() + " row " + std::to_string(row) + ": missing file " +
                      path.string());
    }
    Tensor img;
    try {
      img = load_image(path);
    } catch (const IoError& e) {
      throw DataError(csv.string() + " row " + std::to_string(row) + ": " + e.what());
    }
    if (d.images.empty()) {
      d.height = img.dim(1);
      d.width = img.dim(2);
    } else if (img.dim(1) != d.height || img.dim(2) != d.width) {
      throw DataError(csv.string() + " row " + std::to_string(row) + ": image " +
                      shape_to_string(img.shape()) + " differs from the corpus extent");
    }
    const std::size_t id = d.images.size();
    d.images.push_back(std::move(img));
    d.index.per_class[it->second].push_back(SampleRef{rel, it->second, id});
  }
  d.index.validate();
  return d;
}

std::vector<std::size_t> SynthConfig::counts() const {
  if (!class_counts.empty()) return class_counts;
  return std::vector<std::size_t>(classes, per_class);
}

std::vector<std::size_t> imbalanced_counts(std::size_t classes, std::size_t largest, double ratio) {
  std::vector<std::size_t> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double t = classes > 1 ? double(c) / double(classes - 1) : 0.0;
    out[c] = std::max<std::size_t>(1, std::size_t(std::lround(double(largest) * std::pow(ratio, -t))));
  }
  return out;
}

namespace {

struct Blob {
  double y, x;
};

struct ClassPattern {
  std::vector<Blob> blobs;
  double angle = 0.0;
};

double gauss2(double dy, double dx, double sigma) {
  return std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
}

}  // namespace

Dataset synth_images(const SynthConfig& cfg) {
  if (cfg.classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
  const auto counts = cfg.counts();
  if (counts.size() != cfg.classes) {
    throw ConfigError("synthetic corpus: " + std::to_string(counts.size()) + " class counts for " +
                      std::to_string(cfg.classes) + " classes");
  }
  if (cfg.extent < 8) throw ConfigError("synthetic corpus: extent must be >= 8");
  const double E = double(cfg.extent);

  std::mt19937_64 structure(cfg.seed * 0x9E3779B97F4A7C15ull + 17);
  std::uniform_real_distribution<double> pos(0.12 * E, 0.88 * E);
  std::vector<ClassPattern> patterns(cfg.classes);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (int b = 0; b < 3; ++b) patterns[c].blobs.push_back({pos(structure), pos(structure)});
    patterns[c].angle = std::numbers::pi * double(c) / double(cfg.classes);
  }

  Dataset d;
  d.height = d.width = cfg.extent;
  d.index.per_class.resize(cfg.classes);
  for (std::size_t c = 0; c < cfg.classes; ++c) d.index.classes.push_back("class" + std::to_string(c));

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, 0.04 * E);
  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double blob_sigma = 0.08 * E;
  const double freq = 2.0 * std::numbers::pi * 3.0 / E;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const double bg_amp = 0.3 + 0.1 * unit(rng);
      const double brightness = 0.1 * (unit(rng) - 0.5);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      std::vector<Blob> blobs;
      std::vector<double> amps;
      for (const auto& b : patterns[c].blobs) {
        blobs.push_back({b.y + jitter(rng), b.x + jitter(rng)});
        amps.push_back(0.35 + 0.25 * unit(rng));
      }
      const double ca = std::cos(patterns[c].angle), sa = std::sin(patterns[c].angle);
      Tensor img(Shape{1, cfg.extent, cfg.extent});
      for (std::size_t y = 0; y < cfg.extent; ++y) {
        for (std::size_t x = 0; x < cfg.extent; ++x) {
          const double yy = double(y) + 0.5, xx = double(x) + 0.5;
          // Shared "face": a wide ellipse with two eye spots.
          const double ey = (yy - 0.5 * E) / (0.38 * E), ex = (xx - 0.5 * E) / (0.30 * E);
          double v = bg_amp * std::exp(-0.5 * (ey * ey + ex * ex));
          v += 0.15 * gauss2(yy - 0.4 * E, xx - 0.35 * E, 0.06 * E);
          v += 0.15 * gauss2(yy - 0.4 * E, xx - 0.65 * E, 0.06 * E);
          for (std::size_t b = 0; b < blobs.size(); ++b) {
            v += amps[b] * gauss2(yy - blobs[b].y, xx - blobs[b].x, blob_sigma);
          }
          v += 0.1 * std::sin(freq * (ca * xx + sa * yy) + phase);
          v += brightness + noise(rng);
          const long level = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
          img[y * cfg.extent + x] = float(level) / 255.0f;
        }
      }
      const std::size_t id = d.images.size();
      char name[64];
      std::snprintf(name, sizeof name, "images/c%zu_%05zu.pgm", c, i);
      d.index.per_class[c].push_back(SampleRef{name, c, id});
      d.images.push_back(std::move(img));
    }
  }
  return d;
}

DatasetIndex synth_dataset(const SynthConfig& cfg, const fs::path& root) {
  const Dataset d = synth_images(cfg);
  fs::create_directories(root / "images");
  std::ofstream csv(root / "labels.csv");
  if (!csv) throw IoError("cannot write " + (root / "labels.csv").string());
  csv << "relative_path,label\n";
  for (const auto& cls : d.index.per_class) {
    for (const auto& s : cls) {
      const Tensor& img = d.images[s.id];
      GrayImage g{d.width, d.height, std::vector<std::uint8_t>(img.size())};
      for (std::size_t i = 0; i < img.size(); ++i) {
        g.pixels[i] = static_cast<std::uint8_t>(std::lround(img[i] * 255.0f));
      }
      write_pgm(root / s.path, g);
      csv << s.path << ',' << d.index.classes[s.label] << '\n';
    }
  }
  nlohmann::json m;
  m["generator"] = "synthetic-blob-grating";
  m["classes"] = d.index.classes;
  m["counts"] = d.index.counts();
  m["extent"] = cfg.extent;
  m["seed"] = cfg.seed;
  m["noise"] = cfg.noise;
  m["total"] = d.index.size();
  std::ofstream(root / "manifest.json") << m.dump(2) << '\n';
  return d.index;
}

Split split_stratified(const Dataset& data, double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }
  Split s;
  for (Dataset* part : {&s.train, &s.val}) {
    part->index.classes = data.index.classes;
    part->index.per_class.resize(data.index.num_classes());
    part->height = data.height;
    part->width = data.width;
  }
  std::mt19937_64 rng(seed ^ 0x5151A5A5u);
  for (std::size_t c = 0; c < data.index.num_classes(); ++c) {
    std::vector<SampleRef> members = data.index.per_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t nval = std::size_t(std::lround(double(members.size()) * val_fraction));
    if (val_fraction > 0.0 && nval == 0 && members.size() >= 2) nval = 1;
    for (std::size_t i = 0; i < members.size(); ++i) {
      Dataset& dst = i < nval ? s.val : s.train;
      SampleRef r = members[i];
      r.id = dst.images.size();
      dst.images.push_back(data.images[members[i].id]);
      dst.index.per_class[c].push_back(std::move(r));
    }
  }
  return s;
}

Batch make_batch(const Dataset& data, std::span<const SampleRef> samples) {
  const std::size_t HW = data.height * data.width;
  Batch b{Tensor(Shape{samples.size(), 1, data.height, data.width}), {}};
  b.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& img = data.images.at(samples[i].id);
    std::copy(img.data().begin(), img.data().end(), b.images.data().begin() + i * HW);
    b.labels.push_back(int(samples[i].label));
  }
  return b;
}

double nearest_centroid_accuracy(const Dataset& train, const Dataset& test) {
  const std::size_t K = train.index.num_classes(), HW = train.height * train.width;
  std::vector<std::vector<double>> centroid(K, std::vector<double>(HW, 0.0));
  for (std::size_t c = 0; c < K; ++c) {
    for (const auto& s : train.index.per_class[c]) {
      for (std::size_t i = 0; i < HW; ++i) centroid[c][i] += train.images[s.id][i];
    }
    const double n = double(std::max<std::size_t>(1, train.index.per_class[c].size()));
    for (auto& v : centroid[c]) v /= n;
  }
  std::size_t correct = 0, total = 0;
  for (std::size_t c = 0; c < test.index.num_classes(); ++c) {
    for (const auto& s : test.index.per_class[c]) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t k = 0; k < K; ++k) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < HW; ++i) {
          const double diff = test.images[s.id][i] - centroid[k][i];
          d2 += diff * diff;
        }
        if (d2 < best_d) {
          best_d = d2;
          best = k;
        }
      }
      correct += best == c;
      ++total;
    }
  }
  return total ? double(correct) / double(total) : 0.0;
}

}  // namespace armlab
