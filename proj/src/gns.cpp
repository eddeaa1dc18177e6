#include "gnsadv/gns.hpp"

#include <cmath>
#include <sstream>

#include "gnsadv/errors.hpp"

namespace gnsadv {

void PairedBatchConfig::validate() const {
  if (b_small == 0) throw ConfigError("paired batch: b_small must be >= 1");
  if (b_small == b_big) throw ConfigError("paired batch: b_small and b_big must differ");
  if (b_small > b_big) throw ConfigError("paired batch: b_small must be smaller than b_big");
  if (b_big % b_small != 0) throw ConfigError("paired batch: b_big must be a multiple of b_small");
}

PairedStats paired_batch_stats(double small_grad_sq, double big_grad_sq, const PairedBatchConfig& pair) {
  pair.validate();
  const double bs = static_cast<double>(pair.b_small);
  const double bb = static_cast<double>(pair.b_big);
  PairedStats out;
  out.rho_sq = (bb * big_grad_sq - bs * small_grad_sq) / (bb - bs);
  out.s = (small_grad_sq - big_grad_sq) / (1.0 / bs - 1.0 / bb);
  return out;
}

PairedStats paired_batch_stats(const ModelGradients& grads_small, const ModelGradients& grads_big,
                               const PairedBatchConfig& pair) {
  if (grads_small.batch_size != pair.b_small || grads_big.batch_size != pair.b_big) {
    throw ShapeError("paired batch: gradients were computed at batch sizes " +
                     std::to_string(grads_small.batch_size) + "/" +
                     std::to_string(grads_big.batch_size) + ", expected " +
                     std::to_string(pair.b_small) + "/" + std::to_string(pair.b_big));
  }
  return paired_batch_stats(squared_norm(grads_small.batch_grad), squared_norm(grads_big.batch_grad), pair);
}

PairedStats nested_paired_batch_stats(const ModelGradients& big, const PairedBatchConfig& pair) {
  pair.validate();
  if (!big.per_example_grads) throw UsageError("nested paired stats need per-example gradients");
  const Matrix& rows = *big.per_example_grads;
  if (rows.rows() != pair.b_big || big.batch_size != pair.b_big) {
    throw ShapeError("nested paired stats: big batch has " + std::to_string(rows.rows()) +
                     " rows, expected " + std::to_string(pair.b_big));
  }
  std::vector<double> small(rows.cols(), 0.0);
  for (std::size_t i = 0; i < pair.b_small; ++i) {
    auto r = rows.row(i);
    for (std::size_t p = 0; p < small.size(); ++p) small[p] += r[p];
  }
  for (double& v : small) v /= static_cast<double>(pair.b_small);
  return paired_batch_stats(squared_norm(small), squared_norm(big.batch_grad), pair);
}

GnsAccumulator::GnsAccumulator(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("EMA alpha must lie in (0, 1]");
}

GnsAccumulator ema_update(GnsAccumulator acc, double rho_sq, double s) {
  if (!std::isfinite(rho_sq) || !std::isfinite(s)) {
    throw NumericError("ema_update: non-finite paired-batch statistic");
  }
  if (acc.steps_seen_ == 0) {
    acc.rho_sq_ema_ = rho_sq;
    acc.s_ema_ = s;
  } else {
    acc.rho_sq_ema_ = acc.alpha_ * rho_sq + (1.0 - acc.alpha_) * acc.rho_sq_ema_;
    acc.s_ema_ = acc.alpha_ * s + (1.0 - acc.alpha_) * acc.s_ema_;
  }
  ++acc.steps_seen_;
  return acc;
}

NoiseScaleEstimate noise_scale(const GnsAccumulator& acc, std::size_t warmup) {
  if (acc.steps_seen() < warmup || acc.steps_seen() == 0) {
    throw InsufficientSignalError("noise scale needs at least " + std::to_string(std::max<std::size_t>(warmup, 1)) +
                                  " estimator updates, have " + std::to_string(acc.steps_seen()));
  }
  if (!(acc.rho_sq_ema() > 0.0)) {
    throw InsufficientSignalError("gradient norm estimate is not positive (" +
                                  std::to_string(acc.rho_sq_ema()) +
                                  "); run more warmup steps or use a larger b_big");
  }
  return {acc.s_ema() / acc.rho_sq_ema(), acc.rho_sq_ema(), acc.s_ema(), acc.steps_seen()};
}

double exact_simple_noise(const Matrix& per_example_grads) {
  const std::size_t b = per_example_grads.rows();
  const std::size_t p = per_example_grads.cols();
  if (b < 2) throw DegenerateInputError("exact_simple_noise needs at least 2 examples");
  std::vector<double> mean(p, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    auto r = per_example_grads.row(i);
    for (std::size_t j = 0; j < p; ++j) mean[j] += r[j];
  }
  for (double& v : mean) v /= static_cast<double>(b);
  const double mean_sq = squared_norm(mean);
  if (mean_sq == 0.0) throw DegenerateInputError("exact_simple_noise: mean gradient is zero");
  double total_var = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    auto r = per_example_grads.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      const double d = r[j] - mean[j];
      total_var += d * d;
    }
  }
  total_var /= static_cast<double>(b - 1);
  return total_var / mean_sq;
}

double eps_opt(double eps_max, double b_noise, std::size_t batch) {
  if (!(eps_max > 0.0)) throw UsageError("eps_opt: eps_max must be positive");
  if (!(b_noise >= 0.0)) throw UsageError("eps_opt: b_noise must be nonnegative");
  if (batch == 0) throw UsageError("eps_opt: batch must be >= 1");
  return eps_max / (1.0 + b_noise / static_cast<double>(batch));
}

TradeoffCurve tradeoff_curve(double b_noise, std::span<const std::size_t> batch_grid, double eps_max) {
  if (batch_grid.empty()) throw UsageError("tradeoff_curve: batch grid is empty");
  for (std::size_t i = 0; i < batch_grid.size(); ++i) {
    if (batch_grid[i] == 0) throw UsageError("tradeoff_curve: batch sizes must be >= 1");
    if (i > 0 && batch_grid[i] <= batch_grid[i - 1])
      throw UsageError("tradeoff_curve: batch grid must be strictly increasing");
  }
  TradeoffCurve curve;
  curve.degenerate = !(b_noise > 0.0);
  for (auto b : batch_grid) {
    TradeoffPoint pt;
    pt.batch_size = b;
    if (curve.degenerate) {
      pt.eps_opt = eps_max;
      pt.relative_steps = 1.0;
      pt.relative_examples = 1.0;
    } else {
      const double bd = static_cast<double>(b);
      pt.eps_opt = eps_opt(eps_max, b_noise, b);
      pt.relative_steps = 1.0 + b_noise / bd;
      pt.relative_examples = 1.0 + bd / b_noise;
    }
    curve.points.push_back(pt);
  }
  return curve;
}

BatchPolicy parse_batch_policy(const std::string& name) {
  if (name == "balanced") return BatchPolicy::balanced;
  if (name == "min_time") return BatchPolicy::min_time;
  if (name == "min_compute") return BatchPolicy::min_compute;
  throw ConfigError("unknown batch policy '" + name + "' (expected balanced, min_time or min_compute)");
}

std::string to_string(BatchPolicy policy) {
  switch (policy) {
    case BatchPolicy::balanced: return "balanced";
    case BatchPolicy::min_time: return "min_time";
    case BatchPolicy::min_compute: return "min_compute";
  }
  return "?";
}

std::size_t recommend_batch(const NoiseScaleEstimate& estimate, BatchPolicy policy,
                            std::size_t hardware_cap) {
  if (hardware_cap == 0) throw UsageError("recommend_batch: hardware cap must be >= 1");
  const double x = std::max(estimate.b_noise_hat, 0.0);
  const double cap = static_cast<double>(hardware_cap);
  double pick = 1.0;
  switch (policy) {
    case BatchPolicy::balanced: {
      if (x > 1.0) {
        const double lo = std::exp2(std::floor(std::log2(x)));
        pick = (x - lo < 2.0 * lo - x) ? lo : 2.0 * lo;
      }
      break;
    }
    case BatchPolicy::min_time: {
      const double target = 4.0 * x;
      if (target > 1.0) pick = std::exp2(std::ceil(std::log2(target)));
      break;
    }
    case BatchPolicy::min_compute: {
      const double target = std::max(1.0, x / 4.0);
      pick = std::exp2(std::floor(std::log2(target)));
      break;
    }
  }
  if (!(pick < cap)) return hardware_cap;
  return std::max<std::size_t>(1, static_cast<std::size_t>(pick));
}

std::vector<std::size_t> power_of_two_grid(std::size_t cap) {
  if (cap == 0) throw UsageError("power_of_two_grid: cap must be >= 1");
  std::vector<std::size_t> grid;
  for (std::size_t b = 1; b <= cap; b *= 2) {
    grid.push_back(b);
    if (b > cap / 2) break;
  }
  if (grid.back() != cap) grid.push_back(cap);
  return grid;
}

nlohmann::json gns_report_json(const GnsReportInput& in) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& pt : in.curve.points) {
    curve.push_back({{"batch", pt.batch_size},
                     {"eps_opt", pt.eps_opt},
                     {"relative_steps", pt.relative_steps},
                     {"relative_examples", pt.relative_examples}});
  }
  return {{"b_noise_hat", in.estimate.b_noise_hat},
          {"rho_sq_ema", in.accumulator.rho_sq_ema()},
          {"s_ema", in.accumulator.s_ema()},
          {"alpha", in.accumulator.alpha()},
          {"steps_used", in.estimate.steps_used},
          {"recommendation", in.recommendation},
          {"policy", to_string(in.policy)},
          {"tradeoff_curve_degenerate", in.curve.degenerate},
          {"tradeoff_curve", std::move(curve)}};
}

std::string tradeoff_csv(const TradeoffCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "batch,eps_opt,relative_steps,relative_examples\n";
  for (const auto& pt : curve.points) {
    out << pt.batch_size << ',' << pt.eps_opt << ',' << pt.relative_steps << ','
        << pt.relative_examples << '\n';
  }
  return out.str();
}

}  // namespace gnsadv
