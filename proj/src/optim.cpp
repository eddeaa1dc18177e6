#include "gnsadv/optim.hpp"

#include <cmath>

#include "gnsadv/errors.hpp"

namespace gnsadv {

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "gd") return OptimizerKind::gd;
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "momentum") return OptimizerKind::momentum;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "lamb") return OptimizerKind::lamb;
  throw ConfigError("unknown optimizer '" + name + "' (expected gd, sgd, momentum, adam or lamb)");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::lamb: return "lamb";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw ConfigError("weight decay must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1/momentum must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (learning_rate * weight_decay >= 1.0)
    throw ConfigError("learning_rate * weight_decay must be < 1");
}

OptimizerState make_optimizer_state(const OptimizerConfig& config, std::size_t num_params) {
  OptimizerState state;
  state.kind = config.kind;
  switch (config.kind) {
    case OptimizerKind::gd:
    case OptimizerKind::sgd:
      break;
    case OptimizerKind::momentum:
      state.first_moment.assign(num_params, 0.0);
      break;
    case OptimizerKind::adam:
    case OptimizerKind::lamb:
      state.first_moment.assign(num_params, 0.0);
      state.second_moment.assign(num_params, 0.0);
      break;
  }
  return state;
}

namespace {

// Bias-corrected Adam direction m̂ / (√v̂ + ε); updates the moments in place.
std::vector<double> adam_direction(const OptimizerConfig& cfg, OptimizerState& state,
                                   std::span<const double> grad) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::vector<double> dir(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
    dir[i] = (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
  }
  return dir;
}

}  // namespace

StepResult step(const OptimizerConfig& config, OptimizerState state, ParameterVector theta,
                std::span<const double> grad) {
  config.validate();
  if (grad.size() != theta.total_len()) {
    throw ShapeError("optimizer step: gradient length " + std::to_string(grad.size()) +
                     " vs parameter length " + std::to_string(theta.total_len()));
  }
  if (state.kind != config.kind) {
    throw UsageError("optimizer step: state was made for '" + to_string(state.kind) +
                     "' but config is '" + to_string(config.kind) + "'");
  }
  const std::size_t n = grad.size();
  const bool needs_first = config.kind == OptimizerKind::momentum ||
                           config.kind == OptimizerKind::adam || config.kind == OptimizerKind::lamb;
  const bool needs_second = config.kind == OptimizerKind::adam || config.kind == OptimizerKind::lamb;
  if ((needs_first && state.first_moment.size() != n) ||
      (needs_second && state.second_moment.size() != n)) {
    throw UsageError("optimizer step: state accumulators do not match parameter length");
  }

  ++state.step;
  const double eta = config.learning_rate;
  auto values = theta.values();
  switch (config.kind) {
    case OptimizerKind::gd:
    case OptimizerKind::sgd:
      for (std::size_t i = 0; i < n; ++i) values[i] = values[i] - eta * grad[i];
      break;
    case OptimizerKind::momentum:
      for (std::size_t i = 0; i < n; ++i) {
        auto& vel = state.first_moment[i];
        vel = config.beta1 * vel + grad[i];
        values[i] -= eta * vel;
      }
      break;
    case OptimizerKind::adam: {
      const auto dir = adam_direction(config, state, grad);
      for (std::size_t i = 0; i < n; ++i) values[i] -= eta * dir[i];
      break;
    }
    case OptimizerKind::lamb: {
      const auto dir = adam_direction(config, state, grad);
      for (const auto& seg : theta.segments()) {
        std::span<const double> d(dir.data() + seg.offset, seg.length);
        const double w_norm = norm(theta.values().subspan(seg.offset, seg.length));
        const double d_norm = norm(d);
        const double trust = (w_norm > 0.0 && d_norm > 0.0) ? w_norm / d_norm : 1.0;
        for (std::size_t i = 0; i < seg.length; ++i) values[seg.offset + i] -= eta * trust * d[i];
      }
      break;
    }
  }
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("optimizer step produced a non-finite parameter");

  if (config.weight_decay > 0.0) {
    theta = apply_decoupled_weight_decay(std::move(theta), config.weight_decay, eta);
  }
  return {std::move(theta), std::move(state)};
}

ParameterVector apply_decoupled_weight_decay(ParameterVector theta, double lambda, double eta) {
  if (!(lambda >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  if (eta * lambda >= 1.0) {
    throw ConfigError("decoupled weight decay: eta * lambda = " + std::to_string(eta * lambda) +
                      " >= 1 would flip parameter signs");
  }
  if (lambda == 0.0) return theta;
  const double keep = 1.0 - eta * lambda;
  for (double& v : theta.values()) v *= keep;
  return theta;
}

}  // namespace gnsadv
