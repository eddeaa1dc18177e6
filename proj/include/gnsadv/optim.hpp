#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gnsadv/numcore.hpp"

namespace gnsadv {

enum class OptimizerKind { gd, sgd, momentum, adam, lamb };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.1;
  double beta1 = 0.9;  // momentum coefficient for `momentum`, first-moment decay for adam/lamb
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied after the update

  void validate() const;
};

/// Accumulators carried between steps. gd and sgd keep none.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  std::size_t step = 0;
  std::vector<double> first_moment;   // velocity for momentum, m for adam/lamb
  std::vector<double> second_moment;  // v for adam/lamb

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t num_params);

struct StepResult {
  ParameterVector theta;
  OptimizerState state;
};

/// One optimizer update followed by decoupled weight decay (if configured).
///
///   gd, sgd   θ ← θ − η g
///   momentum  v ← β₁ v + g;  θ ← θ − η v
///   adam      m ← β₁ m + (1−β₁) g;  v ← β₂ v + (1−β₂) g²;
///             θ ← θ − η m̂ / (√v̂ + ε)   with bias-corrected m̂, v̂
///   lamb      adam direction r, rescaled per segment by ‖θ_s‖ / ‖r_s‖
StepResult step(const OptimizerConfig& config, OptimizerState state, ParameterVector theta,
                std::span<const double> grad);

/// θ ← (1 − η λ) θ. Throws ConfigError when η λ ≥ 1 (the shrink would flip sign).
ParameterVector apply_decoupled_weight_decay(ParameterVector theta, double lambda, double eta);

}  // namespace gnsadv
