#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "armlab/trainer.hpp"

namespace armlab {

struct SweepRow {
  std::size_t kernel = 0;
  double wa = 0.0;
  double ua = 0.0;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double baseline_wa = 0.0;  // plain GAP head, same seed
  double baseline_ua = 0.0;
};

/// Trains one DeAlbinoPool model (stride 1, no arrangement) per kernel size
/// in [k_min, k_max] and a GAP baseline. A failing k is recorded and the
/// sweep continues.
SweepResult k_sweep(const ModelConfig& base, const TrainConfig& train_cfg, const Split& data,
                    std::size_t k_min, std::size_t k_max);

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);

struct PairedRow {
  std::uint64_t seed = 0;
  double arm_wa = 0.0;
  double arm_ua = 0.0;
  double gap_wa = 0.0;
  double gap_ua = 0.0;
};

struct PairedReport {
  std::vector<PairedRow> rows;
  double mean_delta_wa = 0.0;  // ARM minus GAP
  double mean_delta_ua = 0.0;
};

/// ARM head vs GAP head on the same backbone, data and seed, for every seed.
PairedReport paired_comparison(const ModelConfig& arm_cfg, const TrainConfig& train_cfg,
                               const Split& data, std::span<const std::uint64_t> seeds);

void write_paired_csv(const std::filesystem::path& path, const PairedReport& report);

}  // namespace armlab
