#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "armlab/dataset.hpp"
#include "armlab/metrics.hpp"
#include "armlab/model.hpp"

namespace armlab {

enum class SamplerKind { Plain, Mrr };

std::string to_string(SamplerKind kind);
SamplerKind sampler_from_string(const std::string& name);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::optional<double> decay;  // per epoch; default 0.9, or 0.78 with MRR
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::Plain;
  double val_fraction = 0.2;
  std::optional<double> grad_clip;  // global L2 norm
  AdamSettings adam;

  double effective_decay() const;
  /// Learning rate used during epoch `epoch` (0-based): lr0 * decay^epoch.
  double lr_at_epoch(std::size_t epoch) const;
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params` from its
/// gradient slot. Throws TrainingError, leaving everything untouched, if any
/// gradient is not finite.
void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr,
               const AdamSettings& settings = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  double wa = 0.0;
  double ua = 0.0;
};

struct EvalResult {
  ConfusionMatrix confusion;
  Metrics metrics;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  EvalResult final_eval;
  std::size_t steps = 0;
  bool diverged = false;
  std::string message;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam with per-epoch learning-rate decay. Evaluates on `val`
/// (or on `train` when `val` is empty) after every epoch. On a non-finite
/// loss or gradient the model is restored to the end of the last good epoch
/// and training stops with `diverged` set.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val,
                  Model& model, const EpochCallback& on_epoch = {});

/// Eval-mode forward over `data`; the model's running state is not touched.
EvalResult evaluate(Model& model, const Dataset& data, std::size_t batch_size = 256);

/// Mean loss of one batch in train mode without mutating `model`.
double batch_loss(const Model& model, const Batch& batch);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

// ---------------------------------------------------------------------------
// Checkpoints: one ".ten" file per parameter/buffer plus manifest.json.

struct Checkpoint {
  Model model;
  nlohmann::json manifest;
};

void save_checkpoint(const std::filesystem::path& dir, Model& model, const TrainConfig& train_cfg,
                     const TrainResult& result);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace armlab
