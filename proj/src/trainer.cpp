#include "armlab/trainer.hpp"

#include <cmath>
#include <fstream>

#include "armlab/layers.hpp"
#include "armlab/log.hpp"
#include "armlab/pgm.hpp"
#include "armlab/sampler.hpp"

namespace armlab {

std::string to_string(SamplerKind kind) { return kind == SamplerKind::Mrr ? "mrr" : "plain"; }

SamplerKind sampler_from_string(const std::string& name) {
  if (name == "plain") return SamplerKind::Plain;
  if (name == "mrr") return SamplerKind::Mrr;
  throw ConfigError("unknown sampler '" + name + "' (expected plain or mrr)");
}

double TrainConfig::effective_decay() const {
  return decay.value_or(sampler == SamplerKind::Mrr ? 0.78 : 0.9);
}

double TrainConfig::lr_at_epoch(std::size_t epoch) const {
  return learning_rate * std::pow(effective_decay(), double(epoch));
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  const double d = effective_decay();
  if (!(d > 0.0 && d <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("val fraction must be in [0, 1)");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("gradient clip must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"batch_size", batch_size},
                   {"learning_rate", learning_rate},
                   {"decay", effective_decay()},
                   {"epochs", epochs},
                   {"seed", seed},
                   {"sampler", to_string(sampler)},
                   {"val_fraction", val_fraction},
                   {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}}};
  j["grad_clip"] = grad_clip ? nlohmann::json(*grad_clip) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.batch_size = j.at("batch_size");
    c.learning_rate = j.at("learning_rate");
    c.decay = j.at("decay").get<double>();
    c.epochs = j.at("epochs");
    c.seed = j.at("seed");
    c.sampler = sampler_from_string(j.at("sampler"));
    c.val_fraction = j.at("val_fraction");
    c.adam.beta1 = j.at("adam").at("beta1");
    c.adam.beta2 = j.at("adam").at("beta2");
    c.adam.epsilon = j.at("adam").at("epsilon");
    if (!j.at("grad_clip").is_null()) c.grad_clip = j.at("grad_clip").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr,
               const AdamSettings& s) {
  for (const auto& p : params) {
    if (!p.tensor->has_grad()) throw TrainingError("parameter " + p.name + " has no gradient");
    for (float g : p.tensor->grad()) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + p.name);
    }
  }
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].tensor->size(), 0.0);
      state.v[i].assign(params[i].tensor->size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = *params[i].tensor;
    auto grad = t.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != t.size()) throw TrainingError("Adam state does not match " + params[i].name);
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double g = grad[j];
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g;
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g * g;
      const double mh = m[j] / c1, vh = v[j] / c2;
      t[j] = static_cast<float>(double(t[j]) - lr * mh / (std::sqrt(vh) + s.epsilon));
    }
  }
}

EvalResult evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  if (data.index.num_classes() != model.config().num_classes) {
    throw ConfigError("evaluate: dataset has " + std::to_string(data.index.num_classes()) +
                      " classes, model expects " + std::to_string(model.config().num_classes));
  }
  if (data.height != model.config().backbone.input_extent ||
      data.width != model.config().backbone.input_extent) {
    throw ConfigError("evaluate: image extent " + std::to_string(data.height) + "x" +
                      std::to_string(data.width) + " does not match model input " +
                      std::to_string(model.config().backbone.input_extent));
  }
  std::vector<SampleRef> all;
  for (const auto& c : data.index.per_class) all.insert(all.end(), c.begin(), c.end());
  EvalResult r{ConfusionMatrix(data.index.num_classes()), {}};
  for (std::size_t at = 0; at < all.size(); at += batch_size) {
    const std::size_t n = std::min(batch_size, all.size() - at);
    Batch b = make_batch(data, std::span(all).subspan(at, n));
    const auto pred = argmax_rows(model.forward(b.images, Mode::Eval));
    for (std::size_t i = 0; i < n; ++i) r.confusion.add(std::size_t(b.labels[i]), std::size_t(pred[i]));
  }
  r.metrics = compute_metrics(r.confusion);
  return r;
}

double batch_loss(const Model& model, const Batch& batch) {
  Model scratch = model;
  return softmax_cross_entropy(scratch.forward(batch.images, Mode::Train), batch.labels).loss;
}

namespace {

void clip_gradients(std::span<const NamedTensor> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (float g : p.tensor->grad()) sq += double(g) * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (const auto& p : params)
    for (float& g : p.tensor->grad()) g = static_cast<float>(g * scale);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val,
                  Model& model, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw DataError("train: empty training set");
  if (train_set.index.num_classes() != model.config().num_classes) {
    throw ConfigError("train: dataset has " + std::to_string(train_set.index.num_classes()) +
                      " classes, model expects " + std::to_string(model.config().num_classes));
  }
  const Dataset& eval_set = val.size() ? val : train_set;
  TrainResult result;
  AdamState adam;
  Model last_good = model;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    const std::uint64_t es = epoch_seed(cfg.seed, epoch);
    const std::vector<SampleRef> order = cfg.sampler == SamplerKind::Mrr
                                             ? mrr_epoch_sample(train_set.index, es)
                                             : full_epoch_sample(train_set.index, es);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool failed = false;
    for (std::size_t at = 0; at < order.size() && !failed; at += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - at);
      Batch b = make_batch(train_set, std::span(order).subspan(at, n));
      const Tensor logits = model.forward(b.images, Mode::Train);
      const LossResult<float> loss = softmax_cross_entropy(logits, b.labels);
      if (!std::isfinite(loss.loss)) {
        result.message = "loss became non-finite at epoch " + std::to_string(epoch);
        failed = true;
        break;
      }
      model.backward(loss.grad_logits);
      const auto params = model.parameters();
      if (cfg.grad_clip) clip_gradients(params, *cfg.grad_clip);
      try {
        adam_step(params, adam, lr, cfg.adam);
      } catch (const TrainingError& e) {
        result.message = std::string(e.what()) + " at epoch " + std::to_string(epoch);
        failed = true;
        break;
      }
      model.after_update();
      ++result.steps;
      loss_sum += loss.loss * double(n);
      seen += n;
    }
    if (failed) {
      log_warning("training diverged: " + result.message + "; restoring last good state");
      model = last_good;
      result.diverged = true;
      break;
    }
    EvalResult ev = evaluate(model, eval_set);
    EpochRecord rec{epoch + 1, loss_sum / double(std::max<std::size_t>(1, seen)), lr,
                    ev.metrics.weighted_accuracy, ev.metrics.unweighted_accuracy};
    result.history.push_back(rec);
    result.final_eval = std::move(ev);
    last_good = model;
    if (on_epoch) on_epoch(rec);
  }
  if (result.history.empty() || result.diverged) result.final_eval = evaluate(model, eval_set);
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "epoch,loss,lr,wa,ua\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << format_number(r.loss) << ',' << format_number(r.lr) << ','
       << format_number(r.wa) << ',' << format_number(r.ua) << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace armlab
