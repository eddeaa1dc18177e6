#include <doctest.h>

#include <cmath>
#include <vector>

#include "gnsadv/errors.hpp"
#include "gnsadv/models.hpp"
#include "gnsadv/optim.hpp"
#include "gnsadv/random.hpp"

using namespace gnsadv;

namespace {

OptimizerConfig make(OptimizerKind kind, double lr, double wd = 0.0) {
  OptimizerConfig c;
  c.kind = kind;
  c.learning_rate = lr;
  c.weight_decay = wd;
  return c;
}

StepResult run(const OptimizerConfig& c, const ParameterVector& theta, const std::vector<double>& g) {
  return step(c, make_optimizer_state(c, theta.total_len()), theta, g);
}

}  // namespace

TEST_CASE("sgd hand example") {
  const auto r = run(make(OptimizerKind::sgd, 0.1), ParameterVector::flat({1, 1}), {1, 2});
  CHECK(r.theta.values()[0] == 1.0 - 0.1 * 1.0);
  CHECK(r.theta.values()[1] == 1.0 - 0.1 * 2.0);
}

TEST_CASE("sgd is bit-identical to the textbook update over many steps") {
  Rng rng(3);
  const auto cfg = make(OptimizerKind::sgd, 0.037);
  std::vector<double> ref{0.5, -1.25, 2.0};
  auto theta = ParameterVector::flat(ref);
  auto state = make_optimizer_state(cfg, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> g(3);
    for (double& v : g) v = rng.normal();
    auto r = step(cfg, state, theta, g);
    theta = r.theta;
    state = r.state;
    for (int i = 0; i < 3; ++i) ref[i] = ref[i] - 0.037 * g[i];
    for (int i = 0; i < 3; ++i) CHECK(theta.values()[i] == ref[i]);
  }
}

TEST_CASE("zero gradient leaves stateless and resting optimizers in place") {
  const auto theta = ParameterVector::flat({0.3, -0.7});
  for (auto kind : {OptimizerKind::gd, OptimizerKind::sgd, OptimizerKind::momentum, OptimizerKind::adam}) {
    const auto r = run(make(kind, 0.5), theta, {0, 0});
    CHECK(r.theta == theta);
  }
}

TEST_CASE("momentum accumulates velocity") {
  auto cfg = make(OptimizerKind::momentum, 0.1);
  cfg.beta1 = 0.5;
  auto theta = ParameterVector::flat({0.0});
  auto state = make_optimizer_state(cfg, 1);
  auto r = step(cfg, state, theta, std::vector<double>{1.0});
  CHECK(r.theta.values()[0] == doctest::Approx(-0.1));
  r = step(cfg, r.state, r.theta, std::vector<double>{1.0});
  CHECK(r.theta.values()[0] == doctest::Approx(-0.1 - 0.1 * 1.5));
}

TEST_CASE("adam first step moves each coordinate by about eta") {
  const auto r = run(make(OptimizerKind::adam, 0.01), ParameterVector::flat({1, 1}), {3, -0.02});
  CHECK(r.theta.values()[0] == doctest::Approx(1 - 0.01).epsilon(1e-6));
  CHECK(r.theta.values()[1] == doctest::Approx(1 + 0.01).epsilon(1e-6));
  CHECK(r.state.step == 1);
}

TEST_CASE("lamb scales each segment by its trust ratio") {
  ParameterVector theta({{"a", {3, 4}}, {"b", {0.1}}});
  const auto cfg = make(OptimizerKind::lamb, 0.01);
  const auto r = run(cfg, theta, {1, 1, 1});
  // First adam direction is ~sign(g); segment a has norm 5 and direction norm sqrt(2).
  const double trust_a = 5.0 / std::sqrt(2.0);
  CHECK(r.theta.segment("a")[0] == doctest::Approx(3 - 0.01 * trust_a).epsilon(1e-6));
  CHECK(r.theta.segment("b")[0] == doctest::Approx(0.1 - 0.01 * 0.1).epsilon(1e-6));
}

TEST_CASE("step errors") {
  const auto cfg = make(OptimizerKind::adam, 0.1);
  auto theta = ParameterVector::flat({1, 2});
  CHECK_THROWS_AS(step(cfg, make_optimizer_state(cfg, 2), theta, std::vector<double>{1}), ShapeError);
  const auto other = make(OptimizerKind::momentum, 0.1);
  CHECK_THROWS_AS(step(cfg, make_optimizer_state(other, 2), theta, std::vector<double>{1, 1}), UsageError);
  CHECK_THROWS_AS(make(OptimizerKind::sgd, -1).validate(), ConfigError);
  CHECK_THROWS_AS(make(OptimizerKind::sgd, 0.5, 2.0).validate(), ConfigError);
  CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), ConfigError);
}

TEST_CASE("decoupled weight decay examples") {
  const auto theta = ParameterVector::flat({2, -2});
  CHECK(apply_decoupled_weight_decay(theta, 0.0, 0.3) == theta);
  const auto half = apply_decoupled_weight_decay(theta, 5.0, 0.1);
  CHECK(half.values()[0] == doctest::Approx(1.0));
  CHECK(half.values()[1] == doctest::Approx(-1.0));
  CHECK_THROWS_AS(apply_decoupled_weight_decay(theta, 10.0, 0.1), ConfigError);
}

TEST_CASE("repeated decay follows the geometric closed form") {
  auto theta = ParameterVector::flat({1.5, -0.25, 3.0});
  const double eta = 0.05, lambda = 0.4;
  for (int n = 1; n <= 50; ++n) {
    theta = apply_decoupled_weight_decay(theta, lambda, eta);
    const double factor = std::pow(1.0 - eta * lambda, n);
    CHECK(theta.values()[0] == doctest::Approx(1.5 * factor).epsilon(1e-12));
    CHECK(theta.values()[2] == doctest::Approx(3.0 * factor).epsilon(1e-12));
  }
}

TEST_CASE("decay is applied after the update, not folded into the gradient") {
  const double eta = 0.1, lambda = 0.5;
  const auto cfg = make(OptimizerKind::sgd, eta, lambda);
  const auto r = run(cfg, ParameterVector::flat({1.0, -3.0}), {2.0, 1.0});
  // Closed form: (θ − ηg)(1 − ηλ).
  CHECK(r.theta.values()[0] == doctest::Approx((1.0 - eta * 2.0) * (1 - eta * lambda)).epsilon(1e-15));
  CHECK(r.theta.values()[1] == doctest::Approx((-3.0 - eta * 1.0) * (1 - eta * lambda)).epsilon(1e-15));
  // The coupled alternative θ − η(g + λθ) gives a different value.
  CHECK(r.theta.values()[0] != doctest::Approx(1.0 - eta * (2.0 + lambda * 1.0)));
}

namespace {

QuadraticSpec noiseless_quadratic() {
  return QuadraticSpec::create(Matrix{{3.0, 0.5, 0.0}, {0.5, 1.0, 0.2}, {0.0, 0.2, 0.5}},
                               Matrix(3, 3, 0.0), {1.0, -2.0, 0.5});
}

}  // namespace

TEST_CASE("gd below 2/lambda_max decreases the loss every step") {
  const auto spec = noiseless_quadratic();
  const double lmax = symmetric_eigen(spec.hessian()).values.back();
  const auto cfg = make(OptimizerKind::gd, 1.9 / lmax);
  auto theta = ParameterVector::flat({5, 5, 5});
  auto state = make_optimizer_state(cfg, 3);
  double prev = quadratic_loss(spec, theta.values());
  for (int t = 0; t < 200; ++t) {
    const auto g = quadratic_true_gradient(spec, theta.values());
    auto r = step(cfg, state, theta, g);
    theta = r.theta;
    state = r.state;
    const double now = quadratic_loss(spec, theta.values());
    if (prev > 1e-300) CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("adam converges on the noiseless quadratic within 500 steps") {
  const auto spec = noiseless_quadratic();
  const auto cfg = make(OptimizerKind::adam, 0.05);
  auto theta = ParameterVector::flat({3, 0, -1});
  auto state = make_optimizer_state(cfg, 3);
  for (int t = 0; t < 500; ++t) {
    auto r = step(cfg, state, theta, quadratic_true_gradient(spec, theta.values()));
    theta = r.theta;
    state = r.state;
  }
  const double minimum = quadratic_loss(spec, spec.center());
  CHECK(quadratic_loss(spec, theta.values()) - minimum <= 1e-6);
}
