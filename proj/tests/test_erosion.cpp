#include <gtest/gtest.h>

#include <random>

#include "armlab/erosion.hpp"
#include "armlab/error.hpp"
#include "oracles.hpp"

using namespace armlab;

TEST(Perception, SevenBySevenKernelThree) {
  const auto pm = perception_map(7, 7, 3, 1, 0);
  EXPECT_EQ(pm.at(0, 0), 1);
  EXPECT_EQ(pm.at(0, 6), 1);
  EXPECT_EQ(pm.at(6, 6), 1);
  EXPECT_EQ(pm.at(3, 3), 9);
  EXPECT_EQ(pm.at(0, 3), 3);
  EXPECT_EQ(pm.max(), 9);
}

TEST(Perception, SingleWindowIsUniform) {
  const auto pm = perception_map(9, 9, 9, 1, 0);
  for (auto c : pm.counts) EXPECT_EQ(c, 1);
}

TEST(Perception, ReferenceGeometryMatchesEnumeration) {
  EXPECT_EQ(perception_map(112, 112, 32, 8, 0).counts, oracle::perception(112, 112, 32, 8, 0));
}

TEST(Perception, ExhaustiveSmallGeometries) {
  // Every (k, s, p) on a spread of extents up to 64; the acceptance run
  // covers the full H, W <= 64 grid.
  for (std::size_t h : {1u, 2u, 5u, 13u, 64u})
    for (std::size_t w : {1u, 3u, 8u, 31u, 64u})
      for (std::size_t k = 1; k <= 7; ++k)
        for (std::size_t s = 1; s <= 4; ++s)
          for (std::size_t p = 0; p <= 2; ++p) {
            if (h + 2 * p < k || w + 2 * p < k) {
              EXPECT_THROW(perception_map(h, w, k, s, p), GeometryError);
              continue;
            }
            ASSERT_EQ(perception_map(h, w, k, s, p).counts, oracle::perception(h, w, k, s, p))
                << h << "x" << w << " k" << k << " s" << s << " p" << p;
          }
}

TEST(Perception, FlipSymmetric) {
  for (std::size_t k : {2u, 3u, 5u}) {
    const auto pm = perception_map(15, 12, k, 1, k / 2);
    for (std::size_t y = 0; y < 15; ++y)
      for (std::size_t x = 0; x < 12; ++x) {
        EXPECT_EQ(pm.at(y, x), pm.at(14 - y, x));
        EXPECT_EQ(pm.at(y, x), pm.at(y, 11 - x));
      }
  }
}

TEST(Perception, CornerBelowInteriorWithoutPadding) {
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto pm = perception_map(10, 10, k, 1, 0);
    EXPECT_LE(pm.at(0, 0), pm.max());
  }
}

TEST(Albino, SingleLayerCornerEdgeInterior) {
  const auto m = albino_map(8, 8, {ConvGeometry{3, 1, 1, 1, 1, false}});
  ASSERT_EQ(m.height, 8u);
  EXPECT_EQ(m.at(0, 0), 5.0 / 9.0);
  EXPECT_EQ(m.at(7, 7), 5.0 / 9.0);
  EXPECT_EQ(m.at(0, 3), 3.0 / 9.0);
  EXPECT_EQ(m.at(4, 0), 3.0 / 9.0);
  EXPECT_EQ(m.at(3, 3), 0.0);
}

TEST(Albino, SingleLayerMatchesWindowCountOracle) {
  for (std::size_t k = 1; k <= 5; ++k)
    for (std::size_t s = 1; s <= 3; ++s)
      for (std::size_t p = 0; p < k; ++p) {
        const auto m = albino_map(11, 9, {ConvGeometry{k, s, p, 1, 1, false}});
        const auto expect = oracle::single_layer_contamination(11, 9, k, s, p);
        ASSERT_EQ(m.contamination.size(), expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
          EXPECT_NEAR(m.contamination[i], expect[i], 1e-15);
      }
}

TEST(Albino, NoPaddingMeansNoContamination) {
  const auto m = albino_map(
      20, 20, {ConvGeometry{3, 1, 0, 1, 1, false}, ConvGeometry{5, 2, 0, 1, 1, false}});
  for (double v : m.contamination) EXPECT_EQ(v, 0.0);
}

TEST(Albino, MonotoneInDepth) {
  const std::vector<ConvGeometry> layers(4, ConvGeometry{3, 1, 1, 1, 1, false});
  const auto maps = albino_maps(16, 16, layers);
  ASSERT_EQ(maps.size(), 4u);
  for (std::size_t d = 1; d < maps.size(); ++d)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        EXPECT_GE(maps[d].at(y, x), maps[d - 1].at(y, x));
        const bool border = y == 0 || x == 0 || y == 15 || x == 15;
        if (border) EXPECT_GT(maps[1].at(y, x), maps[0].at(y, x));
      }
}

TEST(Albino, HaloBoundsAndRange) {
  const std::vector<ConvGeometry> layers(3, ConvGeometry{3, 1, 1, 1, 1, false});
  const auto m = albino_map(20, 20, layers);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x) {
      const double v = m.at(y, x);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      const bool interior = y >= 3 && x >= 3 && y < 17 && x < 17;
      if (interior) EXPECT_EQ(v, 0.0);
      else EXPECT_GT(v, 0.0);
    }
}

TEST(Albino, DecreasesAwayFromBorderAndIsSymmetric) {
  for (std::size_t k : {3u, 5u, 7u}) {
    const auto m = albino_map(17, 17, {ConvGeometry{k, 1, k / 2, 1, 1, false}});
    for (std::size_t y = 0; y < 17; ++y) {
      for (std::size_t x = 0; x + 1 <= 8; ++x) EXPECT_GE(m.at(y, x), m.at(y, x + 1));
      for (std::size_t x = 0; x < 17; ++x) {
        EXPECT_EQ(m.at(y, x), m.at(16 - y, x));
        EXPECT_EQ(m.at(y, x), m.at(y, 16 - x));
      }
    }
  }
}

TEST(Albino, GeometryErrorsPropagate) {
  EXPECT_THROW(albino_map(4, 4, {ConvGeometry{9, 1, 0, 1, 1, false}}), GeometryError);
}

TEST(Clusters, ReferenceProfile) {
  const ShuffleSpec spec{16, 512, 7, 7};
  const auto prof = cluster_weight_profile(spec, ConvGeometry::shared(2, 32, 8, 0));
  ASSERT_EQ(prof.rows, 7u);
  ASSERT_EQ(prof.cols, 7u);
  const auto pm = oracle::perception(112, 112, 32, 8, 0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      std::int64_t sum = 0;
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) sum += pm[(i * 16 + y) * 112 + j * 16 + x];
      EXPECT_EQ(prof.at(i, j), sum);
    }
  EXPECT_LT(prof.outer_ring_max(), prof.interior_min());
}

TEST(Clusters, TilingKernelGivesUniformClusters) {
  const ShuffleSpec spec{2, 8, 4, 4};
  const auto prof = cluster_weight_profile(spec, ConvGeometry::shared(2, 2, 2, 0));
  for (auto t : prof.totals) EXPECT_EQ(t, prof.totals[0]);
}

TEST(Clusters, RatioOneIsPerceptionMap) {
  const ShuffleSpec spec{1, 3, 7, 7};
  const auto prof = cluster_weight_profile(spec, ConvGeometry::shared(3, 3, 1, 0));
  EXPECT_EQ(prof.totals, perception_map(7, 7, 3, 1, 0).counts);
}

TEST(LayerSpec, Parses) {
  const auto layers = parse_layer_spec("3,1,1; 5,2,0");
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[1].kernel, 5u);
  EXPECT_EQ(layers[1].stride, 2u);
  EXPECT_EQ(layers[1].padding, 0u);
}

TEST(LayerSpec, ErrorsCarryPosition) {
  for (const char* bad : {"", "3,1", "3,1,1;", "3,x,1", "3,1,1,4", "0,1,1"}) {
    try {
      parse_layer_spec(bad);
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const ConfigError& e) {
      if (std::string(bad) == "3,x,1")
        EXPECT_NE(std::string(e.what()).find("position 2"), std::string::npos) << e.what();
    }
  }
}
