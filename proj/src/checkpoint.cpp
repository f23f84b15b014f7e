#include <fstream>

#include "armlab/layers.hpp"
#include "armlab/tensor_io.hpp"
#include "armlab/trainer.hpp"

namespace armlab {

namespace fs = std::filesystem;

namespace {
constexpr const char* kFormat = "armlab-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const fs::path& dir, Model& model, const TrainConfig& train_cfg,
                     const TrainResult& result) {
  fs::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  auto dump = [&](const std::vector<NamedTensor>& list, const char* kind) {
    for (const auto& t : list) {
      const std::string file = t.name + ".ten";
      write_tensor(dir / file, *t.tensor);
      tensors.push_back({{"name", t.name}, {"file", file}, {"kind", kind}});
    }
  };
  dump(model.parameters(), "parameter");
  dump(model.buffers(), "buffer");

  nlohmann::json m;
  m["format"] = kFormat;
  m["version"] = kVersion;
  m["model"] = model.config().to_json();
  m["train"] = train_cfg.to_json();
  m["tensors"] = tensors;
  m["step"] = result.steps;
  m["diverged"] = result.diverged;
  const BatchNormOptions bn;
  m["batchnorm"] = {{"epsilon", bn.epsilon}, {"momentum", bn.momentum}};
  if (auto* s = model.affinity_state()) {
    m["affinity"] = {{"lambda", double(s->lambda[0])},
                     {"learnable", s->learnable},
                     {"initialized", s->initialized}};
  }
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& r : result.history) {
    hist.push_back({{"epoch", r.epoch}, {"loss", r.loss}, {"lr", r.lr}, {"wa", r.wa}, {"ua", r.ua}});
  }
  m["history"] = hist;
  if (result.final_eval.confusion.classes()) {
    m["final"] = {{"wa", result.final_eval.metrics.weighted_accuracy},
                  {"ua", result.final_eval.metrics.unweighted_accuracy}};
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << m.dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no manifest.json in checkpoint " + dir.string());
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint manifest: " + std::string(e.what()));
  }
  if (ck.manifest.value("format", "") != kFormat || ck.manifest.value("version", 0) != kVersion) {
    throw ConfigError("checkpoint " + dir.string() + " has an unsupported format");
  }
  ck.model = Model(ModelConfig::from_json(ck.manifest.at("model")), 0);
  auto restore = [&](const std::vector<NamedTensor>& list) {
    for (const auto& t : list) {
      const Tensor loaded = read_tensor(dir / (t.name + ".ten"));
      if (loaded.shape() != t.tensor->shape()) {
        throw ConfigError("checkpoint tensor " + t.name + " has shape " +
                          shape_to_string(loaded.shape()) + ", model expects " +
                          shape_to_string(t.tensor->shape()));
      }
      *t.tensor = loaded;
    }
  };
  restore(ck.model.parameters());
  restore(ck.model.buffers());
  if (auto* s = ck.model.affinity_state()) {
    s->initialized = ck.manifest.at("affinity").at("initialized").get<bool>();
  }
  return ck;
}

}  // namespace armlab
