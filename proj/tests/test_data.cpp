#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <unistd.h>

#include <json.hpp>

#include "armlab/dataset.hpp"
#include "armlab/error.hpp"
#include "armlab/metrics.hpp"
#include "armlab/pgm.hpp"
#include "armlab/sampler.hpp"
#include "armlab/tensor_io.hpp"

using namespace armlab;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("armlab_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

DatasetIndex make_index(const std::vector<std::size_t>& counts) {
  DatasetIndex idx;
  std::size_t id = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    idx.classes.push_back("c" + std::to_string(c));
    idx.per_class.emplace_back();
    for (std::size_t i = 0; i < counts[c]; ++i)
      idx.per_class.back().push_back({"x" + std::to_string(id), c, id}), ++id;
  }
  return idx;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

// Chi-square survival function with `dof` degrees of freedom.
double chi_square_p(double stat, double dof) { return boost::math::gamma_q(dof / 2, stat / 2); }

}  // namespace

// ---------------------------------------------------------------------------
// PGM / CSV

TEST(Pgm, RoundTrip) {
  GrayImage img{3, 2, {0, 10, 20, 30, 40, 255}};
  const auto bytes = encode_pgm(img);
  const auto back = decode_pgm(bytes);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Pgm, HeaderCommentsAndErrors) {
  const std::string text = "P5\n# made by hand\n2 1\n# max\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(7);
  bytes.push_back(9);
  EXPECT_EQ(decode_pgm(bytes).pixels, (std::vector<std::uint8_t>{7, 9}));
  bytes.pop_back();
  EXPECT_THROW(decode_pgm(bytes), Error);
  const std::string ascii = "P2\n1 1\n255\n0\n";
  EXPECT_THROW(decode_pgm(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), Error);
}

TEST(Heatmap, LinearMaxNormalization) {
  const std::vector<double> v{0, 1, 2, 4};
  const auto img = heatmap(v, 2, 2);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{0, 64, 128, 255}));
  const std::vector<double> zeros(4, 0.0);
  for (auto p : heatmap(zeros, 2, 2).pixels) EXPECT_EQ(p, 0);
}

TEST(GridCsv, RowsAndShortestDecimals) {
  TempDir dir("grid");
  const std::vector<double> v{1, 0.5, 5.0 / 9.0, 0};
  write_grid_csv(dir.path() / "g.csv", v, 2, 2);
  EXPECT_EQ(slurp(dir.path() / "g.csv"), "1,0.5\n0.5555555555555556,0\n");
}

// ---------------------------------------------------------------------------
// synthetic corpus and loading

TEST(Synth, StructureAndDeterminism) {
  TempDir a("synth_a"), b("synth_b");
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.per_class = 100;
  cfg.extent = 32;
  const auto idx = synth_dataset(cfg, a.path());
  synth_dataset(cfg, b.path());
  EXPECT_EQ(idx.size(), 300u);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path() / "images")) {
    EXPECT_EQ(e.path().extension(), ".pgm");
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / "images" / e.path().filename()));
    ++files;
  }
  EXPECT_EQ(files, 300u);
  EXPECT_EQ(slurp(a.path() / "labels.csv"), slurp(b.path() / "labels.csv"));
  EXPECT_EQ(slurp(a.path() / "manifest.json"), slurp(b.path() / "manifest.json"));
}

TEST(Synth, RequiresTwoClasses) {
  SynthConfig cfg;
  cfg.classes = 1;
  EXPECT_THROW(synth_images(cfg), ConfigError);
}

TEST(Synth, LoadRoundTripMatchesMemory) {
  TempDir dir("synth_rt");
  SynthConfig cfg;
  cfg.classes = 4;
  cfg.per_class = 10;
  synth_dataset(cfg, dir.path());
  const Dataset loaded = load_dataset(dir.path());
  const Dataset mem = synth_images(cfg);
  ASSERT_EQ(loaded.size(), mem.size());
  EXPECT_EQ(loaded.index.classes, mem.index.classes);
  for (std::size_t i = 0; i < mem.size(); ++i) {
    EXPECT_EQ(loaded.images[i].values(), mem.images[i].values()) << i;
    EXPECT_EQ(loaded.images[i].shape(), (Shape{1, 28, 28}));
  }
  for (float v : loaded.images[0].values()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}

TEST(Synth, ThousandFileCorpusMatchesManifest) {
  TempDir dir("synth_1000");
  SynthConfig cfg;
  cfg.classes = 5;
  cfg.class_counts = {400, 250, 150, 120, 80};
  synth_dataset(cfg, dir.path());
  const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
  const Dataset d = load_dataset(dir.path());
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(d.index.counts(), manifest.at("counts").get<std::vector<std::size_t>>());
  EXPECT_NO_THROW(d.index.validate());
}

TEST(Synth, NearestCentroidSeparatesDefaultCorpus) {
  const Dataset d = synth_images(SynthConfig{});
  const Split split = split_stratified(d, 0.2, 1);
  EXPECT_GT(nearest_centroid_accuracy(split.train, split.val), 0.8);
}

TEST(Synth, ImbalancedCounts) {
  const auto counts = imbalanced_counts(7, 350, 35.0);
  ASSERT_EQ(counts.size(), 7u);
  EXPECT_EQ(counts.front(), 350u);
  EXPECT_EQ(counts.back(), 10u);
  EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
}

TEST(Load, UnknownLabelNamesRow) {
  TempDir dir("load_bad");
  SynthConfig cfg;
  cfg.classes = 2;
  cfg.per_class = 2;
  synth_dataset(cfg, dir.path());
  auto csv = slurp(dir.path() / "labels.csv");
  const auto pos = csv.rfind(",class1");
  csv.replace(pos, 7, ",mystery");
  write_text(dir.path() / "labels.csv", csv);
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 5"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("mystery"), std::string::npos) << e.what();
  }
}

TEST(Load, ErrorPaths) {
  TempDir dir("load_err");
  EXPECT_THROW(load_dataset(dir.path()), DataError);
  write_text(dir.path() / "labels.csv", "path,label\na.pgm,x\n");
  EXPECT_THROW(load_dataset(dir.path()), DataError);
  write_text(dir.path() / "labels.csv", "relative_path,label\na.pgm\n");
  EXPECT_THROW(load_dataset(dir.path()), DataError);
  write_text(dir.path() / "labels.csv", "relative_path,label\nmissing.pgm,x\n");
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Load, TensorImagesAndSortedClasses) {
  TempDir dir("load_ten");
  write_tensor(dir.path() / "a.ten", Tensor(Shape{1, 4, 4}, 0.25f));
  write_tensor(dir.path() / "b.ten", Tensor(Shape{4, 4}, 0.75f));
  write_text(dir.path() / "labels.csv", "relative_path,label\na.ten,zeta\nb.ten,alpha\n");
  const Dataset d = load_dataset(dir.path());
  EXPECT_EQ(d.index.classes, (std::vector<std::string>{"alpha", "zeta"}));
  EXPECT_EQ(d.index.per_class[0][0].path, "b.ten");
  EXPECT_EQ(d.images[d.index.per_class[1][0].id][0], 0.25f);
}

TEST(Split, StratifiedAndDisjoint) {
  const Dataset d = synth_images(SynthConfig{3, 10, {}, 16, 4, 0.05});
  const Split s = split_stratified(d, 0.2, 9);
  EXPECT_EQ(s.val.size(), 6u);
  EXPECT_EQ(s.train.size(), 24u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(s.val.index.per_class[c].size(), 2u);
    EXPECT_EQ(s.train.index.per_class[c].size(), 8u);
  }
  EXPECT_NO_THROW(s.train.index.validate());
}

// ---------------------------------------------------------------------------
// minimal random resampling

TEST(Mrr, ExactPerClassCount) {
  const auto idx = make_index({3, 5, 7});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto epoch = mrr_epoch_sample(idx, seed);
    ASSERT_EQ(epoch.size(), 9u);
    std::map<std::size_t, int> per;
    std::set<std::size_t> ids;
    for (const auto& s : epoch) {
      ++per[s.label];
      ids.insert(s.id);
    }
    EXPECT_EQ(ids.size(), 9u);
    for (auto [c, n] : per) EXPECT_EQ(n, 3);
  }
}

TEST(Mrr, BalancedIndexIsPermutation) {
  const auto idx = make_index({6, 6, 6});
  const auto epoch = mrr_epoch_sample(idx, 3);
  std::set<std::size_t> ids;
  for (const auto& s : epoch) ids.insert(s.id);
  EXPECT_EQ(ids.size(), 18u);
}

TEST(Mrr, EmptyClassNamed) {
  auto idx = make_index({3, 0, 2});
  try {
    mrr_epoch_sample(idx, 0);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("c1"), std::string::npos);
  }
}

TEST(Mrr, FreshSubsetEachEpoch) {
  const auto idx = make_index({4, 40});
  std::set<std::vector<std::size_t>> subsets;
  for (std::uint64_t e = 0; e < 10; ++e) {
    std::vector<std::size_t> ids;
    for (const auto& s : mrr_epoch_sample(idx, epoch_seed(5, e))) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    subsets.insert(ids);
  }
  EXPECT_GT(subsets.size(), 5u);
}

TEST(Mrr, InclusionRateForThirtyFiveToOne) {
  const std::size_t m = 4;
  const auto idx = make_index({m, 35 * m});
  std::vector<int> hits(35 * m, 0);
  const int epochs = 10000;
  for (int e = 0; e < epochs; ++e)
    for (const auto& s : mrr_epoch_sample(idx, epoch_seed(77, e)))
      if (s.label == 1) ++hits[s.id - m];
  // Expected inclusions per 35 epochs is 1.
  double mean = 0;
  for (int h : hits) mean += double(h) / hits.size();
  EXPECT_NEAR(mean * 35.0 / epochs, 1.0, 0.05);
  for (int h : hits) EXPECT_NEAR(h * 35.0 / epochs, 1.0, 0.25);
}

TEST(Mrr, UniformWithinClassChiSquare) {
  const auto idx = make_index({5, 20});
  std::vector<double> hits(20, 0);
  const int epochs = 10000;
  for (int e = 0; e < epochs; ++e)
    for (const auto& s : mrr_epoch_sample(idx, epoch_seed(2024, e)))
      if (s.label == 1) ++hits[s.id - 5];
  const double expect = epochs * 5.0 / 20.0;
  double stat = 0;
  for (double h : hits) stat += (h - expect) * (h - expect) / expect;
  EXPECT_GT(chi_square_p(stat, 19), 0.01) << "chi2 " << stat;
}

TEST(Mrr, CoverageAfterTwoHundredEpochs) {
  const auto idx = make_index({10, 350});
  std::set<std::size_t> seen;
  for (std::uint64_t e = 0; e < 200; ++e)
    for (const auto& s : mrr_epoch_sample(idx, epoch_seed(11, e)))
      if (s.label == 1) seen.insert(s.id);
  EXPECT_GT(seen.size() / 350.0, 0.99);
}

TEST(Mrr, DeterministicPerSeed) {
  const auto idx = make_index({5, 9, 12});
  const auto a = mrr_epoch_sample(idx, 42), b = mrr_epoch_sample(idx, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  EXPECT_NE(epoch_seed(1, 0), epoch_seed(1, 1));
  EXPECT_NE(epoch_seed(1, 0), epoch_seed(2, 0));
}

TEST(FullEpoch, CoversEverythingOnce) {
  const auto idx = make_index({3, 8});
  const auto epoch = full_epoch_sample(idx, 1);
  std::set<std::size_t> ids;
  for (const auto& s : epoch) ids.insert(s.id);
  EXPECT_EQ(epoch.size(), 11u);
  EXPECT_EQ(ids.size(), 11u);
}

TEST(ImbalanceReport, Ratios) {
  DatasetIndex affect = make_index({10, 10});
  // Golden fixture: largest and smallest annotated class of the in-the-wild corpus.
  const auto big = make_index({134415, 3750});
  EXPECT_NEAR(class_counts_report(big).ratio, 134415.0 / 3750.0, 1e-12);
  EXPECT_NEAR(class_counts_report(big).ratio, 35.844, 1e-3);
  EXPECT_EQ(class_counts_report(affect).ratio, 1.0);
  const auto r = class_counts_report(make_index({10, 350}));
  EXPECT_EQ(r.ratio, 35.0);
  EXPECT_EQ(r.largest, 350u);
  EXPECT_EQ(r.smallest, 10u);
}

// ---------------------------------------------------------------------------
// metrics

TEST(Metrics, Perfect) {
  ConfusionMatrix cm(4);
  for (std::size_t c = 0; c < 4; ++c) cm.add(c, c, 5);
  const auto m = compute_metrics(cm);
  EXPECT_EQ(m.weighted_accuracy, 1.0);
  EXPECT_EQ(m.unweighted_accuracy, 1.0);
}

TEST(Metrics, MajorityMasksMinority) {
  ConfusionMatrix cm(2);
  cm.add(0, 0, 90);
  cm.add(1, 0, 10);
  const auto m = compute_metrics(cm);
  EXPECT_DOUBLE_EQ(m.weighted_accuracy, 0.9);
  EXPECT_DOUBLE_EQ(m.unweighted_accuracy, 0.5);
}

TEST(Metrics, ChanceLevel) {
  std::mt19937_64 rng(1);
  ConfusionMatrix cm(5);
  for (int i = 0; i < 200000; ++i) cm.add(rng() % 5, rng() % 5);
  const auto m = compute_metrics(cm);
  EXPECT_NEAR(m.weighted_accuracy, 0.2, 0.01);
  EXPECT_NEAR(m.unweighted_accuracy, 0.2, 0.01);
}

TEST(Metrics, EmptyRowsExcludedAndEmptyMatrixRejected) {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 3);
  cm.add(2, 0, 1);
  const auto m = compute_metrics(cm);
  EXPECT_FALSE(m.per_class[1].has_value());
  EXPECT_DOUBLE_EQ(m.unweighted_accuracy, 0.5);
  EXPECT_THROW(compute_metrics(ConfusionMatrix(3)), DataError);
}

TEST(Metrics, BoundsAndPermutationInvariance) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    ConfusionMatrix cm(k);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < k; ++p) cm.add(t, p, rng() % 20 + (t == p ? 10 : 0));
    const auto m = compute_metrics(cm);
    double lo = 1, hi = 0;
    for (const auto& pc : m.per_class) {
      lo = std::min(lo, *pc);
      hi = std::max(hi, *pc);
    }
    EXPECT_GE(m.weighted_accuracy, lo - 1e-12);
    EXPECT_LE(m.weighted_accuracy, hi + 1e-12);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    ConfusionMatrix pm(k);
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < k; ++p) pm.add(perm[t], perm[p], cm.at(t, p));
    const auto mp = compute_metrics(pm);
    EXPECT_NEAR(mp.unweighted_accuracy, m.unweighted_accuracy, 1e-12);
    EXPECT_NEAR(mp.weighted_accuracy, m.weighted_accuracy, 1e-12);
  }
}

TEST(ConfusionCsv, RoundTripAndErrors) {
  TempDir dir("cm");
  ConfusionMatrix cm(3);
  cm.add(0, 1, 4);
  cm.add(2, 2, 7);
  cm.write_csv(dir.path() / "cm.csv", {"a", "b", "c"});
  EXPECT_EQ(slurp(dir.path() / "cm.csv"), "true\\pred,a,b,c\na,0,4,0\nb,0,0,0\nc,0,0,7\n");
  EXPECT_EQ(ConfusionMatrix::read_csv(dir.path() / "cm.csv"), cm);
  write_text(dir.path() / "bad.csv", "true\\pred,a,b\na,1,x\nb,0,1\n");
  EXPECT_THROW(ConfusionMatrix::read_csv(dir.path() / "bad.csv"), DataError);
  write_text(dir.path() / "short.csv", "true\\pred,a,b\na,1,0\n");
  EXPECT_THROW(ConfusionMatrix::read_csv(dir.path() / "short.csv"), DataError);
}
