#include <doctest.h>

#include <cmath>
#include <vector>

#include "gnsadv/errors.hpp"
#include "gnsadv/models.hpp"
#include "gnsadv/numcore.hpp"
#include "gnsadv/random.hpp"

using namespace gnsadv;

namespace {

struct RandomBatch {
  Matrix features;
  std::vector<std::size_t> labels;
};

RandomBatch random_batch(std::size_t n, std::size_t width, std::size_t classes, Rng& rng) {
  RandomBatch b{Matrix(n, width), {}};
  for (double& v : b.features.data()) v = rng.uniform(-2.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(rng.below(classes));
  return b;
}

double fd_relative_error(const MlpSpec& spec, const ParameterVector& theta, const RandomBatch& b) {
  const auto grads = mlp_loss_and_grads(spec, theta, b.features, b.labels, false);
  const auto fd = finite_diff_gradient(
      [&](const ParameterVector& p) { return mlp_loss(spec, p, b.features, b.labels); }, theta);
  return relative_l2_error(grads.batch_grad, fd);
}

}  // namespace

TEST_CASE("zero weights give uniform softmax") {
  const MlpSpec spec{{3, 4, 5}, Activation::tanh, 1};
  const auto theta = zero_mlp(spec);
  const Matrix x{{0.3, -1.0, 2.0}};
  const std::vector<std::size_t> y{2};
  CHECK(mlp_loss(spec, theta, x, y) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("segments are named per layer") {
  const MlpSpec spec{{2, 3, 2}, Activation::relu, 0};
  const auto theta = init_mlp(spec);
  CHECK(theta.total_len() == spec.param_count());
  CHECK(theta.total_len() == 2 * 3 + 3 + 3 * 2 + 2);
  CHECK(theta.segment("dense0.weight").size() == 6);
  CHECK(theta.segment("dense1.bias").size() == 2);
}

TEST_CASE("MlpSpec validation") {
  CHECK_THROWS_AS((MlpSpec{{3}, Activation::relu, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((MlpSpec{{3, 1}, Activation::relu, 0}.validate()), ConfigError);
  CHECK_THROWS_AS(parse_activation("sigmoid"), ConfigError);
}

TEST_CASE("backprop matches finite differences on a fixed 4-example batch") {
  const MlpSpec spec{{3, 5, 3}, Activation::tanh, 17};
  Rng rng(100);
  const auto b = random_batch(4, 3, 3, rng);
  CHECK(fd_relative_error(spec, init_mlp(spec), b) <= 1e-5);
}

TEST_CASE("backprop matches finite differences on randomized MLPs") {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t layers = 1 + rng.below(3);
    std::vector<std::size_t> widths{1 + rng.below(6)};
    for (std::size_t l = 1; l < layers; ++l) widths.push_back(1 + rng.below(16));
    widths.push_back(2 + rng.below(4));
    const auto act = trial % 2 == 0 ? Activation::tanh : Activation::relu;
    const MlpSpec spec{widths, act, rng.next_u64()};
    const auto b = random_batch(1 + rng.below(6), widths.front(), widths.back(), rng);
    CAPTURE(trial);
    CHECK(fd_relative_error(spec, init_mlp(spec), b) <= 1e-5);
  }
}

TEST_CASE("batch_grad is the mean of per-example gradients") {
  const MlpSpec spec{{4, 6, 3}, Activation::relu, 5};
  Rng rng(8);
  const auto b = random_batch(7, 4, 3, rng);
  const auto g = mlp_loss_and_grads(spec, init_mlp(spec), b.features, b.labels, true);
  REQUIRE(g.per_example_grads.has_value());
  const auto& pe = *g.per_example_grads;
  CHECK(pe.rows() == 7);
  for (std::size_t j = 0; j < pe.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pe.rows(); ++i) mean += pe(i, j);
    CHECK(std::abs(mean / 7.0 - g.batch_grad[j]) <= 1e-10);
  }
  const auto without = mlp_loss_and_grads(spec, init_mlp(spec), b.features, b.labels, false);
  CHECK_FALSE(without.per_example_grads.has_value());
}

TEST_CASE("duplicated example batch has identical per-example gradients") {
  const MlpSpec spec{{2, 4, 2}, Activation::tanh, 9};
  Matrix x(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    x(i, 0) = 0.7;
    x(i, 1) = -0.2;
  }
  const std::vector<std::size_t> y(5, 1);
  const auto g = mlp_loss_and_grads(spec, init_mlp(spec), x, y, true);
  const auto& pe = *g.per_example_grads;
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 0; j < pe.cols(); ++j) CHECK(pe(i, j) == pe(0, j));
  for (std::size_t j = 0; j < pe.cols(); ++j) CHECK(g.batch_grad[j] == doctest::Approx(pe(0, j)).epsilon(1e-14));
}

TEST_CASE("mlp input errors") {
  const MlpSpec spec{{2, 3, 2}, Activation::tanh, 9};
  const auto theta = init_mlp(spec);
  const Matrix wrong(1, 3);
  const std::vector<std::size_t> y{0};
  CHECK_THROWS_AS(mlp_loss(spec, theta, wrong, y), ShapeError);
  const Matrix x(1, 2);
  const std::vector<std::size_t> bad{2};
  CHECK_THROWS_AS(mlp_loss(spec, theta, x, bad), DataError);
}

namespace {

QuadraticSpec diag_spec(std::vector<double> h, std::vector<double> sigma, std::uint64_t seed = 1) {
  return QuadraticSpec::create(Matrix::diagonal(h), Matrix::diagonal(sigma),
                               std::vector<double>(h.size(), 0.0), seed);
}

}  // namespace

TEST_CASE("noise scale closed forms") {
  const auto spec = diag_spec({1, 1}, {1, 1});
  const std::vector<double> theta{3, 4};
  const auto ns = quadratic_true_noise_scale(spec, theta);
  CHECK(ns.b_noise == doctest::Approx(2.0 / 25.0).epsilon(1e-15));
  CHECK(ns.b_simple == doctest::Approx(2.0 / 25.0).epsilon(1e-15));

  const auto quiet = quadratic_true_noise_scale(diag_spec({2, 3}, {0, 0}), theta);
  CHECK(quiet.b_noise == 0.0);
  CHECK(quiet.b_simple == 0.0);
}

TEST_CASE("noise scale on H = diag(1,4), Sigma = 2I") {
  // Frozen values: tr(HΣ)=10, GᵀHG=65, tr(Σ)=4, |G|²=17.
  const auto spec = diag_spec({1, 4}, {2, 2});
  const std::vector<double> theta{1, 1};
  const auto ns = quadratic_true_noise_scale(spec, theta);
  CHECK(std::abs(ns.b_noise - 0.15384615384615385) <= 1e-15);
  CHECK(std::abs(ns.b_simple - 0.23529411764705882) <= 1e-15);
  CHECK(std::abs(quadratic_eps_max(spec, theta) - 0.26153846153846155) <= 1e-15);
}

TEST_CASE("noise scale is undefined at the minimizer") {
  const auto spec = diag_spec({1, 2}, {1, 1});
  const std::vector<double> center{0, 0};
  CHECK_THROWS_AS(quadratic_true_noise_scale(spec, center), DegenerateInputError);
}

TEST_CASE("zero noise gives exact gradients") {
  const auto spec = diag_spec({1, 2, 3}, {0, 0, 0});
  const std::vector<double> theta{1, -1, 0.5};
  Rng rng(4);
  const auto g = quadratic_sample_grads(spec, theta, 6, rng);
  const auto truth = quadratic_true_gradient(spec, theta);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK((*g.per_example_grads)(i, j) == truth[j]);
  const auto at_min = quadratic_sample_grads(spec, std::vector<double>{0, 0, 0}, 3, rng);
  for (double v : at_min.batch_grad) CHECK(v == 0.0);
}

TEST_CASE("sample mean of batch gradients matches the true gradient") {
  const auto spec = diag_spec({1, 1}, {1, 1});
  const std::vector<double> theta{3, 4};
  Rng rng(77);
  const int draws = 100000;
  double m0 = 0, m1 = 0;
  for (int i = 0; i < draws; ++i) {
    const auto g = quadratic_sample_grads(spec, theta, 1, rng, false);
    m0 += g.batch_grad[0];
    m1 += g.batch_grad[1];
  }
  const double se = 1.0 / std::sqrt(draws);
  CHECK(std::abs(m0 / draws - 3.0) <= 3 * se);
  CHECK(std::abs(m1 / draws - 4.0) <= 3 * se);
}

TEST_CASE("expectation holds for several batch sizes") {
  const auto spec = QuadraticSpec::create(Matrix{{2, 0.5}, {0.5, 1}}, Matrix{{3, 1}, {1, 2}},
                                          {0.5, -0.5});
  const std::vector<double> theta{1.5, 0.5};
  const auto truth = quadratic_true_gradient(spec, theta);
  for (std::size_t batch : {1u, 4u, 16u}) {
    Rng rng(1000 + batch);
    const int draws = 10000;
    std::vector<double> mean(2, 0.0);
    for (int i = 0; i < draws; ++i) {
      const auto g = quadratic_sample_grads(spec, theta, batch, rng, false);
      for (int j = 0; j < 2; ++j) mean[j] += g.batch_grad[j] / draws;
    }
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt(spec.noise_cov()(j, j) / batch / draws);
      CAPTURE(batch);
      CHECK(std::abs(mean[j] - truth[j]) <= 4 * se);
    }
  }
}

TEST_CASE("batch gradient covariance halves when the batch doubles") {
  const auto spec = QuadraticSpec::create(Matrix::identity(2), Matrix{{2, 0.6}, {0.6, 1}}, {0, 0});
  const std::vector<double> theta{1, 1};
  auto empirical_trace = [&](std::size_t batch, std::uint64_t seed) {
    Rng rng(seed);
    const int draws = 10000;
    std::vector<std::vector<double>> rows;
    std::vector<double> mean(2, 0.0);
    for (int i = 0; i < draws; ++i) {
      auto g = quadratic_sample_grads(spec, theta, batch, rng, false).batch_grad;
      for (int j = 0; j < 2; ++j) mean[j] += g[j] / draws;
      rows.push_back(std::move(g));
    }
    double tr = 0.0;
    for (const auto& r : rows)
      for (int j = 0; j < 2; ++j) tr += (r[j] - mean[j]) * (r[j] - mean[j]);
    return tr / (draws - 1);
  };
  const double at_b = empirical_trace(4, 5);
  const double at_2b = empirical_trace(8, 6);
  CHECK(std::abs(at_2b / at_b - 0.5) <= 0.05);
}

TEST_CASE("H = cI makes both noise scales agree") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + rng.below(5);
    Matrix f(d, d);
    for (double& v : f.data()) v = rng.uniform(-1, 1);
    const double c = rng.uniform(0.1, 5.0);
    const auto spec = QuadraticSpec::from_noise_factor(c * Matrix::identity(d), f,
                                                       std::vector<double>(d, 0.0));
    std::vector<double> theta(d);
    for (double& v : theta) v = rng.uniform(-2, 2);
    const auto ns = quadratic_true_noise_scale(spec, theta);
    CHECK(std::abs(ns.b_noise - ns.b_simple) <= 1e-12 * std::max(1.0, ns.b_simple));
  }
}

TEST_CASE("QuadraticSpec rejects bad matrices") {
  CHECK_THROWS(QuadraticSpec::create(Matrix{{1, 0.1}, {0, 1}}, Matrix::identity(2), {0, 0}));
  CHECK_THROWS(QuadraticSpec::create(Matrix{{1, 0}, {0, -1}}, Matrix::identity(2), {0, 0}));
  CHECK_THROWS(QuadraticSpec::create(Matrix::identity(2), Matrix{{1, 0}, {0, -1}}, {0, 0}));
  CHECK_THROWS_AS(QuadraticSpec::create(Matrix::identity(2), Matrix::identity(3), {0, 0}), ShapeError);
}

TEST_CASE("singular noise covariance still samples") {
  const auto spec = QuadraticSpec::create(Matrix::identity(2), Matrix{{1, 1}, {1, 1}}, {0, 0});
  Rng rng(2);
  const auto g = quadratic_sample_grads(spec, std::vector<double>{0, 0}, 5, rng);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK((*g.per_example_grads)(i, 0) == doctest::Approx((*g.per_example_grads)(i, 1)).epsilon(1e-10));
}

TEST_CASE("quadratic problem text format") {
  const auto p = parse_quadratic_problem(
      "# comment\n"
      "dim 2\n"
      "hessian 1 0 0 4\n"
      "noise_cov 2 0 0 2\n"
      "center 0 0\n"
      "theta 1 1\n");
  CHECK(p.spec.dim() == 2);
  CHECK(p.point() == std::vector<double>{1, 1});
  CHECK_THROWS_AS(parse_quadratic_problem("dim 2\nbogus 1\n"), ParseError);
  CHECK_THROWS_AS(parse_quadratic_problem("dim 1\nhessian 1\nnoise_cov 1\nnoise_factor 1\ncenter 0\n"), ParseError);
}
