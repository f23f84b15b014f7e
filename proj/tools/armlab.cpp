// armlab: command-line front end for the padding-erosion analysis, the
// synthetic corpus generator and ARM training/evaluation.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "armlab/dataset.hpp"
#include "armlab/erosion.hpp"
#include "armlab/experiments.hpp"
#include "armlab/log.hpp"
#include "armlab/pgm.hpp"
#include "armlab/sampler.hpp"
#include "armlab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace armlab;

namespace {

constexpr const char* kVersion = "armlab 0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kGeometry = 2,
  kData = 3,
  kConfig = 4,
  kTraining = 5,
  kCheckFailed = 6,
  kIo = 7,
};

constexpr const char* kExitHelp =
    "Exit codes: 0 success, 1 usage, 2 geometry error, 3 data error, 4 config error,\n"
    "            5 training diverged, 6 internal check failed, 7 I/O error.";

/// Collects artifacts and checks for manifest.json.
struct RunRecord {
  std::string command;
  json args = json::object();
  json checks = json::object();
  json results = json::object();
  std::vector<std::string> artifacts;
  bool all_checks_passed = true;

  void check(const std::string& name, bool ok) {
    checks[name] = ok;
    all_checks_passed = all_checks_passed && ok;
  }

  void write(const fs::path& out) {
    json m;
    m["tool"] = kVersion;
    m["command"] = command;
    m["args"] = args;
    m["checks"] = checks;
    m["results"] = results;
    m["artifacts"] = artifacts;
    m["heatmap_scaling"] = "per-file max normalization: value * 255 / max, rounded";
    std::ofstream(out / "manifest.json") << m.dump(2) << '\n';
  }
};

void emit_map(const fs::path& out, const std::string& stem, const std::vector<double>& values,
              std::size_t w, std::size_t h, RunRecord& rec) {
  write_grid_csv(out / (stem + ".csv"), values, w, h);
  write_pgm(out / (stem + ".pgm"), heatmap(values, w, h));
  rec.artifacts.push_back(stem + ".csv");
  rec.artifacts.push_back(stem + ".pgm");
}

struct ModelFlags {
  std::size_t ratio = 0;
  std::size_t da_kernel = 8;
  std::size_t da_stride = 2;
  double lambda = 0.3;
  bool fixed_lambda = false;
  std::string head = "arm";

  void add(CLI::App* app) {
    app->add_option("--head", head, "Head: arm, gap or dealbino-pool")->capture_default_str();
    app->add_option("--ratio", ratio, "Shuffle ratio (0 = largest valid)")->capture_default_str();
    app->add_option("--da-kernel", da_kernel, "De-albino kernel size")->capture_default_str();
    app->add_option("--da-stride", da_stride, "De-albino stride")->capture_default_str();
    app->add_option("--lambda", lambda, "Initial affinity smoothing factor")->capture_default_str();
    app->add_flag("--fixed-lambda", fixed_lambda, "Keep lambda constant");
  }

  ModelConfig build(std::size_t classes, std::size_t extent) const {
    ModelConfig mc;
    mc.backbone.input_extent = extent;
    mc.head = head_kind_from_string(head);
    mc.num_classes = classes;
    mc.shuffle_ratio = ratio;
    mc.da_kernel = da_kernel;
    mc.da_stride = da_stride;
    mc.lambda_init = lambda;
    mc.lambda_learnable = !fixed_lambda;
    return mc;
  }
};

struct TrainFlags {
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double lr = 3e-3;
  std::optional<double> decay;
  std::string sampler = "plain";
  std::uint64_t seed = 1;
  double val_fraction = 0.2;
  std::optional<double> grad_clip;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    app->add_option("--decay", decay, "Per-epoch decay (default 0.9, 0.78 with mrr)");
    app->add_option("--sampler", sampler, "plain or mrr")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--val-fraction", val_fraction)->capture_default_str();
    app->add_option("--grad-clip", grad_clip, "Clip the global gradient norm");
  }

  TrainConfig build() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.learning_rate = lr;
    tc.decay = decay;
    tc.sampler = sampler_from_string(sampler);
    tc.seed = seed;
    tc.val_fraction = val_fraction;
    tc.grad_clip = grad_clip;
    tc.validate();
    return tc;
  }
};

json metrics_json(const Metrics& m) {
  json per = json::array();
  for (const auto& p : m.per_class) per.push_back(p ? json(*p) : json(nullptr));
  return {{"wa", m.weighted_accuracy}, {"ua", m.unweighted_accuracy}, {"per_class", per}};
}

// ---------------------------------------------------------------------------

int run_perception(std::size_t h, std::size_t w, std::size_t k, std::size_t s, std::size_t p,
                   const fs::path& out, RunRecord& rec) {
  const PerceptionMap pm = perception_map(h, w, k, s, p);
  std::vector<double> values(pm.counts.begin(), pm.counts.end());
  emit_map(out, "perception", values, w, h, rec);
  rec.results["corner"] = pm.at(0, 0);
  rec.results["center"] = pm.at(h / 2, w / 2);
  rec.results["max"] = pm.max();
  std::cout << "perception " << h << "x" << w << " k=" << k << " s=" << s << " p=" << p
            << ": corner " << pm.at(0, 0) << ", center " << pm.at(h / 2, w / 2) << ", max "
            << pm.max() << '\n';
  return kOk;
}

int run_erosion(const std::string& spec, std::size_t extent, const fs::path& out, RunRecord& rec) {
  const auto layers = parse_layer_spec(spec);
  const auto maps = albino_maps(extent, extent, layers);
  bool monotone = true;
  for (std::size_t d = 0; d < maps.size(); ++d) {
    const auto& m = maps[d];
    emit_map(out, "erosion_L" + std::to_string(d + 1), m.contamination, m.width, m.height, rec);
    if (d > 0 && maps[d - 1].width == m.width && maps[d - 1].height == m.height) {
      for (std::size_t i = 0; i < m.contamination.size(); ++i) {
        monotone = monotone && m.contamination[i] >= maps[d - 1].contamination[i];
      }
    }
    double mx = 0.0;
    std::size_t eroded = 0;
    for (double v : m.contamination) {
      mx = std::max(mx, v);
      eroded += v > 0.0;
    }
    rec.results["depth_" + std::to_string(d + 1)] = {
        {"extent", {m.height, m.width}}, {"max_contamination", mx}, {"eroded_pixels", eroded}};
    std::cout << "depth " << d + 1 << ": " << m.height << "x" << m.width << ", eroded pixels "
              << eroded << ", max contamination " << format_number(mx) << '\n';
  }
  rec.check("contamination_monotone_in_depth", monotone);
  return kOk;
}

int run_clusters(std::size_t channels, std::size_t extent, std::size_t ratio, std::size_t k,
                 std::size_t s, const fs::path& out, RunRecord& rec) {
  const std::size_t r = ratio ? ratio : max_shuffle_ratio(channels);
  const ShuffleSpec spec{r, channels, extent, extent};
  spec.validate();
  const ConvGeometry da = ConvGeometry::shared(spec.out_channels(), k, s, 0);
  const ClusterProfile prof = cluster_weight_profile(spec, da);
  std::vector<double> values(prof.totals.begin(), prof.totals.end());
  emit_map(out, "clusters", values, prof.cols, prof.rows, rec);
  rec.results["ratio"] = r;
  rec.results["arranged_extent"] = spec.out_height();
  if (prof.rows >= 3 && prof.cols >= 3) {
    rec.results["outer_ring_max"] = prof.outer_ring_max();
    rec.results["interior_min"] = prof.interior_min();
    rec.check("outer_ring_below_interior", prof.outer_ring_max() < prof.interior_min());
    std::cout << "clusters " << prof.rows << "x" << prof.cols << " (r=" << r
              << "): outer ring max " << prof.outer_ring_max() << ", interior min "
              << prof.interior_min() << '\n';
  }
  return kOk;
}

int run_synth(const SynthConfig& cfg, const fs::path& out, RunRecord& rec) {
  const DatasetIndex idx = synth_dataset(cfg, out);
  const ImbalanceReport rep = class_counts_report(idx);
  rec.results["counts"] = rep.counts;
  rec.results["imbalance_ratio"] = rep.ratio;
  rec.artifacts.push_back("labels.csv");
  rec.artifacts.push_back("images/");
  std::cout << "wrote " << idx.size() << " images in " << idx.num_classes() << " classes to "
            << out << " (imbalance ratio " << format_number(rep.ratio) << ")\n";
  return kOk;
}

int run_train(const fs::path& data_dir, const ModelFlags& mf, const TrainFlags& tf,
              const fs::path& out, RunRecord& rec) {
  const TrainConfig tc = tf.build();
  const Dataset data = load_dataset(data_dir);
  if (data.height != data.width) throw ConfigError("training needs square images");
  const Split split = split_stratified(data, tc.val_fraction, tc.seed);
  const ModelConfig mc = mf.build(data.index.num_classes(), data.height);
  Model model(mc, tc.seed);
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(tc, split.train, split.val, model, [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " loss " << format_number(r.loss) << " lr "
              << format_number(r.lr) << " wa " << format_number(r.wa) << " ua "
              << format_number(r.ua) << '\n';
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint(out / "checkpoint", model, tc, result);
  write_metrics_csv(out / "metrics.csv", result.history);
  result.final_eval.confusion.write_csv(out / "confusion.csv", data.index.classes);
  rec.artifacts = {"checkpoint/", "metrics.csv", "confusion.csv"};
  rec.results["model"] = mc.to_json();
  rec.results["train"] = tc.to_json();
  rec.results["final"] = metrics_json(result.final_eval.metrics);
  rec.results["steps"] = result.steps;
  rec.results["seconds"] = secs;
  rec.results["parameters"] = model.parameter_count();
  rec.results["train_samples"] = split.train.size();
  rec.results["val_samples"] = split.val.size();
  std::cout << "final wa " << format_number(result.final_eval.metrics.weighted_accuracy)
            << " ua " << format_number(result.final_eval.metrics.unweighted_accuracy) << '\n';
  if (result.diverged) {
    rec.results["diverged"] = result.message;
    std::cerr << "training diverged: " << result.message << '\n';
    return kTraining;
  }
  return kOk;
}

int run_eval(const fs::path& ckpt_dir, const fs::path& data_dir, const std::string& split_name,
             const fs::path& out, RunRecord& rec) {
  Checkpoint ck = load_checkpoint(ckpt_dir);
  const TrainConfig tc = TrainConfig::from_json(ck.manifest.at("train"));
  const Dataset data = load_dataset(data_dir);
  EvalResult ev;
  if (split_name == "val") {
    const Split split = split_stratified(data, tc.val_fraction, tc.seed);
    ev = evaluate(ck.model, split.val.size() ? split.val : split.train);
  } else if (split_name == "train") {
    ev = evaluate(ck.model, split_stratified(data, tc.val_fraction, tc.seed).train);
  } else if (split_name == "all") {
    ev = evaluate(ck.model, data);
  } else {
    throw ConfigError("unknown split '" + split_name + "' (expected val, train or all)");
  }
  ev.confusion.write_csv(out / "confusion.csv", data.index.classes);
  rec.artifacts = {"confusion.csv"};
  rec.results = metrics_json(ev.metrics);
  rec.results["split"] = split_name;
  rec.results["samples"] = ev.confusion.total();
  std::cout << "wa " << format_number(ev.metrics.weighted_accuracy) << " ua "
            << format_number(ev.metrics.unweighted_accuracy) << '\n';
  return kOk;
}

int run_sweep(const fs::path& data_dir, const ModelFlags& mf, const TrainFlags& tf,
              std::size_t kmin, std::size_t kmax, const fs::path& out, RunRecord& rec) {
  const TrainConfig tc = tf.build();
  const Dataset data = load_dataset(data_dir);
  const Split split = split_stratified(data, tc.val_fraction, tc.seed);
  const ModelConfig mc = mf.build(data.index.num_classes(), data.height);
  const SweepResult sweep = k_sweep(mc, tc, split, kmin, kmax);
  write_sweep_csv(out / "sweep_k.csv", sweep);
  rec.artifacts = {"sweep_k.csv"};
  rec.results["gap_baseline"] = {{"wa", sweep.baseline_wa}, {"ua", sweep.baseline_ua}};
  std::size_t failed = 0;
  for (const auto& r : sweep.rows) failed += !r.ok;
  rec.results["failed_kernels"] = failed;
  for (const auto& r : sweep.rows) {
    std::cout << "k=" << r.kernel << " wa " << format_number(r.wa) << (r.ok ? "" : " (failed)")
              << '\n';
  }
  std::cout << "gap baseline wa " << format_number(sweep.baseline_wa) << '\n';
  return kOk;
}

int run_compare(const fs::path& data_dir, const ModelFlags& mf, const TrainFlags& tf,
                std::size_t seeds, const fs::path& out, RunRecord& rec) {
  const TrainConfig tc = tf.build();
  const Dataset data = load_dataset(data_dir);
  const Split split = split_stratified(data, tc.val_fraction, tc.seed);
  const ModelConfig mc = mf.build(data.index.num_classes(), data.height);
  std::vector<std::uint64_t> seed_list;
  for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(tf.seed + i);
  const PairedReport rep = paired_comparison(mc, tc, split, seed_list);
  write_paired_csv(out / "paired.csv", rep);
  rec.artifacts = {"paired.csv"};
  rec.results["mean_delta_wa"] = rep.mean_delta_wa;
  rec.results["mean_delta_ua"] = rep.mean_delta_ua;
  std::cout << "mean delta (arm - gap): wa " << format_number(rep.mean_delta_wa) << " ua "
            << format_number(rep.mean_delta_ua) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARM lab: padding-erosion analysis and amended-representation training"};
  app.footer(kExitHelp);
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress logging");

  fs::path out = "out";
  RunRecord rec;
  std::function<int()> action;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out, "Output directory")->capture_default_str();
  };

  // perception
  std::size_t ph = 7, pw = 7, pk = 3, ps = 1, pp = 0;
  auto* perception = app.add_subcommand("perception", "Per-pixel window-coverage map");
  perception->add_option("--height", ph)->capture_default_str();
  perception->add_option("--width", pw)->capture_default_str();
  perception->add_option("--kernel", pk)->capture_default_str();
  perception->add_option("--stride", ps)->capture_default_str();
  perception->add_option("--padding", pp)->capture_default_str();
  add_out(perception);
  perception->callback([&] {
    rec.args = {{"height", ph}, {"width", pw}, {"kernel", pk}, {"stride", ps}, {"padding", pp}};
    action = [&] { return run_perception(ph, pw, pk, ps, pp, out, rec); };
  });

  // erosion
  std::string layers = "3,1,1;3,1,1";
  std::size_t extent = 64;
  auto* erosion = app.add_subcommand("erosion", "Padding contamination per layer depth");
  erosion->add_option("--layers", layers, "Layer list k,s,p;k,s,p;...")->capture_default_str();
  erosion->add_option("--extent", extent, "Square input extent")->capture_default_str();
  add_out(erosion);
  erosion->callback([&] {
    rec.args = {{"layers", layers}, {"extent", extent}};
    action = [&] { return run_erosion(layers, extent, out, rec); };
  });

  // clusters
  std::size_t cc = 512, ce = 7, cr = 0, ck = 32, cs = 8;
  auto* clusters = app.add_subcommand("clusters", "Perception weight per feature cluster");
  clusters->add_option("--channels", cc, "Backbone channels")->capture_default_str();
  clusters->add_option("--extent", ce, "Backbone spatial extent")->capture_default_str();
  clusters->add_option("--ratio", cr, "Shuffle ratio (0 = largest valid)")->capture_default_str();
  clusters->add_option("--kernel", ck, "De-albino kernel")->capture_default_str();
  clusters->add_option("--stride", cs, "De-albino stride")->capture_default_str();
  add_out(clusters);
  clusters->callback([&] {
    rec.args = {{"channels", cc}, {"extent", ce}, {"ratio", cr}, {"kernel", ck}, {"stride", cs}};
    action = [&] { return run_clusters(cc, ce, cr, ck, cs, out, rec); };
  });

  // synth
  SynthConfig sc;
  double imbalance = 1.0;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic grayscale corpus");
  synth->add_option("--classes", sc.classes)->capture_default_str();
  synth->add_option("--per-class", sc.per_class, "Samples per class (largest class)")
      ->capture_default_str();
  synth->add_option("--extent", sc.extent, "Image extent")->capture_default_str();
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--noise", sc.noise, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--imbalance", imbalance, "Largest/smallest class ratio")->capture_default_str();
  add_out(synth);
  synth->callback([&] {
    if (imbalance < 1.0) throw CLI::ValidationError("--imbalance must be >= 1");
    if (imbalance > 1.0) sc.class_counts = imbalanced_counts(sc.classes, sc.per_class, imbalance);
    rec.args = {{"classes", sc.classes}, {"per_class", sc.per_class}, {"extent", sc.extent},
                {"seed", sc.seed},       {"noise", sc.noise},         {"imbalance", imbalance}};
    action = [&] { return run_synth(sc, out, rec); };
  });

  // train
  fs::path data_dir;
  ModelFlags mf;
  TrainFlags tf;
  auto* trainc = app.add_subcommand("train", "Train backbone + head on a labelled corpus");
  trainc->add_option("--data", data_dir, "Dataset root with labels.csv")->required();
  mf.add(trainc);
  tf.add(trainc);
  add_out(trainc);
  trainc->callback([&] {
    rec.args = {{"data", data_dir.string()}};
    action = [&] { return run_train(data_dir, mf, tf, out, rec); };
  });

  // eval
  fs::path ckpt;
  std::string split_name = "val";
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
  evalc->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  evalc->add_option("--data", data_dir, "Dataset root")->required();
  evalc->add_option("--split", split_name, "val, train or all")->capture_default_str();
  add_out(evalc);
  evalc->callback([&] {
    rec.args = {{"checkpoint", ckpt.string()}, {"data", data_dir.string()}, {"split", split_name}};
    action = [&] { return run_eval(ckpt, data_dir, split_name, out, rec); };
  });

  // sweep-k
  std::size_t kmin = 1, kmax = 7;
  auto* sweep = app.add_subcommand("sweep-k", "Accuracy vs de-albino kernel size (stride 1)");
  sweep->add_option("--data", data_dir, "Dataset root")->required();
  sweep->add_option("--min", kmin)->capture_default_str();
  sweep->add_option("--max", kmax)->capture_default_str();
  mf.add(sweep);
  tf.add(sweep);
  add_out(sweep);
  sweep->callback([&] {
    rec.args = {{"data", data_dir.string()}, {"min", kmin}, {"max", kmax}};
    action = [&] { return run_sweep(data_dir, mf, tf, kmin, kmax, out, rec); };
  });

  // compare
  std::size_t nseeds = 5;
  auto* compare = app.add_subcommand("compare", "Paired ARM vs GAP runs over several seeds");
  compare->add_option("--data", data_dir, "Dataset root")->required();
  compare->add_option("--seeds", nseeds, "Number of consecutive seeds")->capture_default_str();
  mf.add(compare);
  tf.add(compare);
  add_out(compare);
  compare->callback([&] {
    rec.args = {{"data", data_dir.string()}, {"seeds", nseeds}};
    action = [&] { return run_compare(data_dir, mf, tf, nseeds, out, rec); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  set_quiet(quiet);

  for (auto* sub : app.get_subcommands()) {
    rec.command = sub->get_name();
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->count() == 0 || opt->get_lnames().empty()) continue;
      const std::string key = opt->get_lnames()[0];
      if (!rec.args.contains(key)) rec.args[key] = opt->as<std::string>();
    }
  }

  int code = kOk;
  try {
    fs::create_directories(out);
    code = action();
    if (code == kOk && !rec.all_checks_passed) code = kCheckFailed;
    rec.results["exit_code"] = code;
    rec.write(out);
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what()
              << "\nhint: output extent = floor((in + 2p - k) / s) + 1 must be >= 1\n";
    code = kGeometry;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    code = kData;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    code = kConfig;
  } catch (const TrainingError& e) {
    std::cerr << "training error: " << e.what() << '\n';
    code = kTraining;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    code = kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    code = kIo;
  }
  return code;
}
