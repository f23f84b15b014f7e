#include "armlab/experiments.hpp"

#include <fstream>

#include "armlab/log.hpp"
#include "armlab/pgm.hpp"

namespace armlab {

namespace {

EvalResult fit(const ModelConfig& mc, const TrainConfig& tc, const Split& data) {
  Model model(mc, tc.seed);
  TrainResult r = train(tc, data.train, data.val, model);
  if (r.diverged) throw TrainingError(r.message);
  return r.final_eval;
}

}  // namespace

SweepResult k_sweep(const ModelConfig& base, const TrainConfig& train_cfg, const Split& data,
                    std::size_t k_min, std::size_t k_max) {
  if (k_min < 1 || k_max < k_min) throw ConfigError("k sweep: need 1 <= k_min <= k_max");
  SweepResult out;
  ModelConfig gap = base;
  gap.head = HeadKind::Gap;
  const EvalResult baseline = fit(gap, train_cfg, data);
  out.baseline_wa = baseline.metrics.weighted_accuracy;
  out.baseline_ua = baseline.metrics.unweighted_accuracy;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    SweepRow row;
    row.kernel = k;
    try {
      ModelConfig mc = base;
      mc.head = HeadKind::DeAlbinoPool;
      mc.sweep_kernel = k;
      const EvalResult ev = fit(mc, train_cfg, data);
      row.wa = ev.metrics.weighted_accuracy;
      row.ua = ev.metrics.unweighted_accuracy;
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
      log_warning("k sweep: k=" + std::to_string(k) + " failed: " + row.error);
    }
    log_info("k sweep: k=" + std::to_string(k) + " wa=" + format_number(row.wa));
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "k,val_wa,val_ua,status\n";
  for (const auto& r : sweep.rows) {
    os << r.kernel << ',' << format_number(r.wa) << ',' << format_number(r.ua) << ','
       << (r.ok ? "ok" : "failed") << '\n';
  }
}

PairedReport paired_comparison(const ModelConfig& arm_cfg, const TrainConfig& train_cfg,
                               const Split& data, std::span<const std::uint64_t> seeds) {
  PairedReport rep;
  for (const auto seed : seeds) {
    TrainConfig tc = train_cfg;
    tc.seed = seed;
    ModelConfig arm = arm_cfg;
    arm.head = HeadKind::Arm;
    ModelConfig gap = arm_cfg;
    gap.head = HeadKind::Gap;
    const EvalResult a = fit(arm, tc, data);
    const EvalResult g = fit(gap, tc, data);
    rep.rows.push_back({seed, a.metrics.weighted_accuracy, a.metrics.unweighted_accuracy,
                        g.metrics.weighted_accuracy, g.metrics.unweighted_accuracy});
    log_info("paired: seed " + std::to_string(seed) + " arm wa " +
             format_number(a.metrics.weighted_accuracy) + " gap wa " +
             format_number(g.metrics.weighted_accuracy));
  }
  for (const auto& r : rep.rows) {
    rep.mean_delta_wa += (r.arm_wa - r.gap_wa) / double(rep.rows.size());
    rep.mean_delta_ua += (r.arm_ua - r.gap_ua) / double(rep.rows.size());
  }
  return rep;
}

void write_paired_csv(const std::filesystem::path& path, const PairedReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "seed,arm_wa,arm_ua,gap_wa,gap_ua,delta_wa,delta_ua\n";
  for (const auto& r : report.rows) {
    os << r.seed << ',' << format_number(r.arm_wa) << ',' << format_number(r.arm_ua) << ','
       << format_number(r.gap_wa) << ',' << format_number(r.gap_ua) << ','
       << format_number(r.arm_wa - r.gap_wa) << ',' << format_number(r.arm_ua - r.gap_ua) << '\n';
  }
  os << "mean,,,,," << format_number(report.mean_delta_wa) << ','
     << format_number(report.mean_delta_ua) << '\n';
}

}  // namespace armlab
