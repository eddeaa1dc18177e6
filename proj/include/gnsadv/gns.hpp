#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnsadv/models.hpp"
#include "gnsadv/numcore.hpp"

namespace gnsadv {

/// Small and big batch sizes for the paired-batch estimator. The big batch
/// is drawn once and the small batch is its leading b_small examples.
struct PairedBatchConfig {
  std::size_t b_small = 0;
  std::size_t b_big = 0;

  void validate() const;
};

/// Per-iteration estimates of |G|² and tr(Σ). Either may be negative on a
/// single iteration; only their expectations are pinned.
struct PairedStats {
  double rho_sq = 0.0;
  double s = 0.0;
};

/// From squared norms of the two batch gradients:
///   rho_sq = (B_big |G_big|² − B_small |G_small|²) / (B_big − B_small)
///   s      = (|G_small|² − |G_big|²) / (1/B_small − 1/B_big)
PairedStats paired_batch_stats(double small_grad_sq, double big_grad_sq, const PairedBatchConfig& pair);

PairedStats paired_batch_stats(const ModelGradients& grads_small, const ModelGradients& grads_big,
                               const PairedBatchConfig& pair);

/// Nested realization: the small-batch gradient is the mean of the first
/// b_small rows of big.per_example_grads.
PairedStats nested_paired_batch_stats(const ModelGradients& big, const PairedBatchConfig& pair);

inline constexpr double kDefaultEmaAlpha = 0.01;
inline constexpr std::size_t kDefaultWarmup = 50;

/// Exponential moving averages of rho_sq and s. The first observation seeds
/// both averages; alpha is fixed for the accumulator's lifetime.
class GnsAccumulator {
 public:
  explicit GnsAccumulator(double alpha = kDefaultEmaAlpha);

  double alpha() const noexcept { return alpha_; }
  double rho_sq_ema() const noexcept { return rho_sq_ema_; }
  double s_ema() const noexcept { return s_ema_; }
  std::size_t steps_seen() const noexcept { return steps_seen_; }

  friend GnsAccumulator ema_update(GnsAccumulator acc, double rho_sq, double s);

 private:
  double alpha_;
  double rho_sq_ema_ = 0.0;
  double s_ema_ = 0.0;
  std::size_t steps_seen_ = 0;
};

GnsAccumulator ema_update(GnsAccumulator acc, double rho_sq, double s);
inline GnsAccumulator ema_update(GnsAccumulator acc, const PairedStats& stats) {
  return ema_update(std::move(acc), stats.rho_sq, stats.s);
}

struct NoiseScaleEstimate {
  double b_noise_hat = 0.0;
  double rho_sq = 0.0;
  double s = 0.0;
  std::size_t steps_used = 0;
};

/// b_noise_hat = S_EMA / |ϱ|²_EMA. Throws InsufficientSignalError before
/// `warmup` updates or while |ϱ|²_EMA ≤ 0.
NoiseScaleEstimate noise_scale(const GnsAccumulator& acc, std::size_t warmup = kDefaultWarmup);

/// tr(Σ̂) / |Ḡ|² from a full B × P per-example gradient matrix, using the
/// unbiased (B − 1) sample variance of each component.
double exact_simple_noise(const Matrix& per_example_grads);

/// eps_max / (1 + b_noise / batch).
double eps_opt(double eps_max, double b_noise, std::size_t batch);

struct TradeoffPoint {
  std::size_t batch_size = 0;
  double eps_opt = 0.0;           // eps_max / (1 + b_noise / B)
  double relative_steps = 0.0;    // 1 + b_noise / B
  double relative_examples = 0.0; // 1 + B / b_noise
};

struct TradeoffCurve {
  std::vector<TradeoffPoint> points;
  bool degenerate = false;  // b_noise <= 0: flat curve
};

TradeoffCurve tradeoff_curve(double b_noise, std::span<const std::size_t> batch_grid,
                             double eps_max = 1.0);

enum class BatchPolicy { balanced, min_time, min_compute };

BatchPolicy parse_batch_policy(const std::string& name);
std::string to_string(BatchPolicy policy);

/// Power-of-two batch advice clamped to [1, hardware_cap]:
///   balanced    nearest power of two to b_noise_hat
///   min_time    smallest power of two >= 4 b_noise_hat
///   min_compute largest power of two <= max(1, b_noise_hat / 4)
std::size_t recommend_batch(const NoiseScaleEstimate& estimate, BatchPolicy policy,
                            std::size_t hardware_cap);

/// Powers of two from 1 up to and including cap (cap itself appended if it
/// is not a power of two).
std::vector<std::size_t> power_of_two_grid(std::size_t cap);

struct GnsReportInput {
  GnsAccumulator accumulator;
  NoiseScaleEstimate estimate;
  BatchPolicy policy = BatchPolicy::balanced;
  std::size_t recommendation = 1;
  TradeoffCurve curve;
};

/// {b_noise_hat, rho_sq_ema, s_ema, alpha, steps_used, recommendation,
///  policy, tradeoff_curve: [...]}
nlohmann::json gns_report_json(const GnsReportInput& in);

/// Columns: batch,eps_opt,relative_steps,relative_examples
std::string tradeoff_csv(const TradeoffCurve& curve);

}  // namespace gnsadv
