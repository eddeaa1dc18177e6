#include "gnsadv/models.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "gnsadv/errors.hpp"

namespace gnsadv {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ConfigError("MlpSpec: need at least input and output widths");
  for (auto w : layer_widths)
    if (w == 0) throw ConfigError("MlpSpec: layer widths must be positive");
  if (layer_widths.back() < 2) throw ConfigError("MlpSpec: need at least 2 classes");
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
    n += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
  return n;
}

namespace {

std::vector<std::pair<std::string, std::vector<double>>> mlp_segments(const MlpSpec& spec,
                                                                      Rng* rng) {
  std::vector<std::pair<std::string, std::vector<double>>> segs;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    std::vector<double> w(in * out, 0.0);
    if (rng != nullptr) {
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      for (double& v : w) v = rng->uniform(-limit, limit);
    }
    segs.emplace_back("dense" + std::to_string(l) + ".weight", std::move(w));
    segs.emplace_back("dense" + std::to_string(l) + ".bias", std::vector<double>(out, 0.0));
  }
  return segs;
}

double activate(Activation a, double z) { return a == Activation::relu ? std::max(z, 0.0) : std::tanh(z); }

// Derivative expressed through the activation output.
double activate_grad(Activation a, double z, double out) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0 - out * out;
}

void check_batch(const MlpSpec& spec, const ParameterVector& theta, const Matrix& features,
                 std::span<const std::size_t> labels) {
  spec.validate();
  if (theta.total_len() != spec.param_count()) {
    throw ShapeError("MLP expects " + std::to_string(spec.param_count()) + " parameters, got " +
                     std::to_string(theta.total_len()));
  }
  if (features.rows() == 0) throw ShapeError("MLP batch is empty");
  if (features.cols() != spec.input_width()) {
    throw ShapeError("MLP input width " + std::to_string(spec.input_width()) +
                     " does not match feature matrix " + features.shape_string());
  }
  if (labels.size() != features.rows()) {
    throw ShapeError("MLP batch has " + std::to_string(features.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= spec.num_classes()) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " outside [0, " + std::to_string(spec.num_classes()) + ")");
    }
  }
}

// Scratch buffers for one example's forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> pre;   // z_l
  std::vector<std::vector<double>> post;  // a_l (post[0] = input)
  std::vector<std::vector<double>> delta;

  explicit Workspace(const MlpSpec& spec) {
    for (auto w : spec.layer_widths) {
      pre.emplace_back(w, 0.0);
      post.emplace_back(w, 0.0);
      delta.emplace_back(w, 0.0);
    }
  }
};

// Forward pass; returns the per-example cross-entropy loss and leaves the
// softmax probabilities in ws.post.back().
double forward(const MlpSpec& spec, const ParameterVector& theta, std::span<const double> x,
               std::size_t label, Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.post[0].begin());
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    auto w = theta.segment(2 * l);
    auto b = theta.segment(2 * l + 1);
    auto& z = ws.pre[l + 1];
    std::copy(b.begin(), b.end(), z.begin());
    const auto& a = ws.post[l];
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      const double* wrow = w.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) z[j] += ai * wrow[j];
    }
    if (l + 1 < layers) {
      for (std::size_t j = 0; j < out; ++j) ws.post[l + 1][j] = activate(spec.activation, z[j]);
    }
  }
  const auto& logits = ws.pre[layers];
  auto& probs = ws.post[layers];
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - zmax);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return zmax + std::log(sum) - logits[label];
}

// Writes ∇L_x(θ) into grad (length param_count) given a completed forward pass.
void backward(const MlpSpec& spec, const ParameterVector& theta, std::size_t label, Workspace& ws,
              std::span<double> grad) {
  const std::size_t layers = spec.num_layers();
  auto& top = ws.delta[layers];
  top = ws.post[layers];
  top[label] -= 1.0;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    const auto& seg_w = theta.segments()[2 * l];
    const auto& seg_b = theta.segments()[2 * l + 1];
    const auto& d = ws.delta[l + 1];
    const auto& a = ws.post[l];
    double* gw = grad.data() + seg_w.offset;
    for (std::size_t i = 0; i < in; ++i) {
      const double ai = a[i];
      double* row = gw + i * out;
      for (std::size_t j = 0; j < out; ++j) row[j] = ai * d[j];
    }
    std::copy(d.begin(), d.end(), grad.begin() + static_cast<std::ptrdiff_t>(seg_b.offset));
    if (l == 0) break;
    auto w = theta.segment(2 * l);
    auto& prev = ws.delta[l];
    for (std::size_t i = 0; i < in; ++i) {
      const double* wrow = w.data() + i * out;
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += wrow[j] * d[j];
      prev[i] = s * activate_grad(spec.activation, ws.pre[l][i], ws.post[l][i]);
    }
  }
}

}  // namespace

ParameterVector init_mlp(const MlpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, /*stream=*/0x4D4C50);
  return ParameterVector(mlp_segments(spec, &rng));
}

ParameterVector zero_mlp(const MlpSpec& spec) {
  spec.validate();
  return ParameterVector(mlp_segments(spec, nullptr));
}

ModelGradients mlp_loss_and_grads(const MlpSpec& spec, const ParameterVector& theta,
                                  const Matrix& features, std::span<const std::size_t> labels,
                                  bool want_per_example) {
  check_batch(spec, theta, features, labels);
  const std::size_t batch = features.rows();
  const std::size_t params = theta.total_len();
  Workspace ws(spec);
  ModelGradients out;
  out.batch_size = batch;
  out.batch_grad.assign(params, 0.0);
  if (want_per_example) out.per_example_grads.emplace(batch, params);
  std::vector<double> scratch(params);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    loss_sum += forward(spec, theta, features.row(i), labels[i], ws);
    std::span<double> g = want_per_example ? out.per_example_grads->row(i) : std::span<double>(scratch);
    backward(spec, theta, labels[i], ws, g);
    for (std::size_t p = 0; p < params; ++p) out.batch_grad[p] += g[p];
  }
  const double inv = 1.0 / static_cast<double>(batch);
  for (double& v : out.batch_grad) v *= inv;
  out.mean_loss = loss_sum * inv;
  if (!std::isfinite(out.mean_loss)) throw NumericError("MLP loss is not finite");
  for (double v : out.batch_grad)
    if (!std::isfinite(v)) throw NumericError("MLP gradient is not finite");
  return out;
}

double mlp_loss(const MlpSpec& spec, const ParameterVector& theta, const Matrix& features,
                std::span<const std::size_t> labels) {
  return mlp_evaluate(spec, theta, features, labels).loss;
}

Evaluation mlp_evaluate(const MlpSpec& spec, const ParameterVector& theta, const Matrix& features,
                        std::span<const std::size_t> labels) {
  check_batch(spec, theta, features, labels);
  Workspace ws(spec);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    loss_sum += forward(spec, theta, features.row(i), labels[i], ws);
    const auto& probs = ws.post.back();
    const auto best = static_cast<std::size_t>(
        std::distance(probs.begin(), std::max_element(probs.begin(), probs.end())));
    if (best == labels[i]) ++correct;
  }
  const double n = static_cast<double>(features.rows());
  return {loss_sum / n, static_cast<double>(correct) / n};
}

// ---------------------------------------------------------------------------

void QuadraticSpec::validate_hessian(const Matrix& h, std::size_t dim) {
  if (h.rows() != dim || h.cols() != dim) {
    throw ShapeError("QuadraticSpec: hessian " + h.shape_string() + " does not match dimension " +
                     std::to_string(dim));
  }
  if (!h.is_symmetric(1e-12)) throw DataError("QuadraticSpec: hessian is not symmetric");
  const auto eig = symmetric_eigen(h);
  if (!(eig.values.front() > 0.0)) {
    throw DataError("QuadraticSpec: hessian is not positive definite (smallest eigenvalue " +
                    std::to_string(eig.values.front()) + ")");
  }
}

QuadraticSpec QuadraticSpec::create(Matrix hessian, Matrix noise_cov, std::vector<double> center,
                                    std::uint64_t seed) {
  const std::size_t dim = center.size();
  if (dim == 0) throw ShapeError("QuadraticSpec: dimension must be positive");
  validate_hessian(hessian, dim);
  if (noise_cov.rows() != dim || noise_cov.cols() != dim) {
    throw ShapeError("QuadraticSpec: noise_cov " + noise_cov.shape_string() +
                     " does not match dimension " + std::to_string(dim));
  }
  if (!noise_cov.is_symmetric(1e-12)) throw DataError("QuadraticSpec: noise_cov is not symmetric");

  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd sigma(n, n);
  double scale = 0.0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      sigma(r, c) = noise_cov(r, c);
      scale = std::max(scale, std::abs(noise_cov(r, c)));
    }

  Matrix factor(dim, dim);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) factor(r, c) = l(r, c);
  } else {
    const auto eig = symmetric_eigen(noise_cov);
    if (eig.values.front() < -1e-10 * std::max(1.0, scale)) {
      throw DataError("QuadraticSpec: noise_cov is not positive semidefinite (eigenvalue " +
                      std::to_string(eig.values.front()) + ")");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const double s = std::sqrt(std::max(eig.values[c], 0.0));
      for (std::size_t r = 0; r < dim; ++r) factor(r, c) = eig.vectors(r, c) * s;
    }
  }

  QuadraticSpec spec;
  spec.hessian_ = std::move(hessian);
  spec.noise_cov_ = std::move(noise_cov);
  spec.noise_factor_ = std::move(factor);
  spec.center_ = std::move(center);
  spec.seed_ = seed;
  return spec;
}

QuadraticSpec QuadraticSpec::from_noise_factor(Matrix hessian, Matrix factor,
                                               std::vector<double> center, std::uint64_t seed) {
  const std::size_t dim = center.size();
  if (dim == 0) throw ShapeError("QuadraticSpec: dimension must be positive");
  validate_hessian(hessian, dim);
  if (factor.rows() != dim) {
    throw ShapeError("QuadraticSpec: noise factor " + factor.shape_string() +
                     " does not match dimension " + std::to_string(dim));
  }
  Matrix cov = matmul(factor, factor.transpose());
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = r + 1; c < dim; ++c) cov(c, r) = cov(r, c);

  QuadraticSpec spec;
  spec.hessian_ = std::move(hessian);
  spec.noise_cov_ = std::move(cov);
  spec.noise_factor_ = std::move(factor);
  spec.center_ = std::move(center);
  spec.seed_ = seed;
  return spec;
}

namespace {

std::vector<double> displacement(const QuadraticSpec& spec, std::span<const double> theta) {
  if (theta.size() != spec.dim()) {
    throw ShapeError("quadratic: theta has length " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(spec.dim()));
  }
  std::vector<double> d(theta.begin(), theta.end());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= spec.center()[i];
  return d;
}

}  // namespace

double quadratic_loss(const QuadraticSpec& spec, std::span<const double> theta) {
  const auto d = displacement(spec, theta);
  return 0.5 * dot(d, matvec(spec.hessian(), d));
}

std::vector<double> quadratic_true_gradient(const QuadraticSpec& spec, std::span<const double> theta) {
  return matvec(spec.hessian(), displacement(spec, theta));
}

ModelGradients quadratic_sample_grads(const QuadraticSpec& spec, std::span<const double> theta,
                                      std::size_t batch_size, Rng& rng, bool want_per_example) {
  if (batch_size == 0) throw UsageError("quadratic_sample_grads: batch_size must be >= 1");
  const std::size_t dim = spec.dim();
  const auto g = quadratic_true_gradient(spec, theta);
  const Matrix& factor = spec.noise_factor();
  const std::size_t rank = factor.cols();

  ModelGradients out;
  out.batch_size = batch_size;
  out.batch_grad.assign(dim, 0.0);
  out.mean_loss = quadratic_loss(spec, theta);
  if (want_per_example) out.per_example_grads.emplace(batch_size, dim);

  std::vector<double> z(rank), row(dim);
  for (std::size_t b = 0; b < batch_size; ++b) {
    for (double& v : z) v = rng.normal();
    for (std::size_t i = 0; i < dim; ++i) {
      double noise = 0.0;
      for (std::size_t k = 0; k < rank; ++k) noise += factor(i, k) * z[k];
      row[i] = g[i] + noise;
      out.batch_grad[i] += row[i];
    }
    if (want_per_example) std::copy(row.begin(), row.end(), out.per_example_grads->row(b).begin());
  }
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (double& v : out.batch_grad) v *= inv;
  return out;
}

TrueNoiseScale quadratic_true_noise_scale(const QuadraticSpec& spec, std::span<const double> theta) {
  const auto g = quadratic_true_gradient(spec, theta);
  const double g_sq = squared_norm(g);
  if (g_sq == 0.0) {
    throw DegenerateInputError("noise scale is undefined at the minimizer (zero gradient)");
  }
  const double curvature = dot(g, matvec(spec.hessian(), g));
  const double tr_h_sigma = matmul(spec.hessian(), spec.noise_cov()).trace();
  return {tr_h_sigma / curvature, spec.noise_cov().trace() / g_sq};
}

double quadratic_eps_max(const QuadraticSpec& spec, std::span<const double> theta) {
  const auto g = quadratic_true_gradient(spec, theta);
  const double g_sq = squared_norm(g);
  if (g_sq == 0.0) throw DegenerateInputError("eps_max is undefined at the minimizer (zero gradient)");
  return g_sq / dot(g, matvec(spec.hessian(), g));
}

std::vector<double> QuadraticProblem::point() const {
  if (theta) return *theta;
  std::vector<double> p = spec.center();
  for (double& v : p) v += 1.0;
  return p;
}

QuadraticProblem parse_quadratic_problem(const std::string& text) {
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> fields;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("quadratic spec: bad number '" + tok + "' for key '" + key + "'", line_no);
      }
    }
    if (!fields.emplace(key, std::make_pair(std::move(values), line_no)).second) {
      throw ParseError("quadratic spec: duplicate key '" + key + "'", line_no);
    }
  }

  auto require = [&](const std::string& key) -> const std::vector<double>& {
    auto it = fields.find(key);
    if (it == fields.end()) throw ParseError("quadratic spec: missing key '" + key + "'");
    return it->second.first;
  };
  auto expect_len = [&](const std::string& key, std::size_t n) {
    const auto& [vals, line_at] = fields.at(key);
    if (vals.size() != n) {
      throw ParseError("quadratic spec: '" + key + "' needs " + std::to_string(n) + " values, got " +
                           std::to_string(vals.size()),
                       line_at);
    }
  };

  const auto& dim_v = require("dim");
  expect_len("dim", 1);
  if (dim_v[0] < 1 || dim_v[0] != std::floor(dim_v[0])) throw ParseError("quadratic spec: dim must be a positive integer");
  const auto dim = static_cast<std::size_t>(dim_v[0]);

  require("hessian");
  expect_len("hessian", dim * dim);
  require("center");
  expect_len("center", dim);
  for (const auto& [key, entry] : fields) {
    static const char* kKnown[] = {"dim", "hessian", "noise_cov", "noise_factor", "center", "theta", "seed"};
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ParseError("quadratic spec: unknown key '" + key + "'", entry.second);
    }
  }

  std::uint64_t seed = 0;
  if (fields.count("seed")) {
    expect_len("seed", 1);
    seed = static_cast<std::uint64_t>(fields.at("seed").first[0]);
  }
  Matrix hessian(dim, dim, fields.at("hessian").first);
  std::vector<double> center = fields.at("center").first;

  const bool has_cov = fields.count("noise_cov") != 0;
  const bool has_factor = fields.count("noise_factor") != 0;
  if (has_cov == has_factor) {
    throw ParseError("quadratic spec: give exactly one of 'noise_cov' or 'noise_factor'");
  }
  std::optional<QuadraticSpec> spec;
  if (has_cov) {
    expect_len("noise_cov", dim * dim);
    spec = QuadraticSpec::create(std::move(hessian), Matrix(dim, dim, fields.at("noise_cov").first),
                                 std::move(center), seed);
  } else {
    expect_len("noise_factor", dim * dim);
    spec = QuadraticSpec::from_noise_factor(std::move(hessian),
                                            Matrix(dim, dim, fields.at("noise_factor").first),
                                            std::move(center), seed);
  }
  QuadraticProblem problem{std::move(*spec), std::nullopt};
  if (fields.count("theta")) {
    expect_len("theta", dim);
    problem.theta = fields.at("theta").first;
  }
  return problem;
}

QuadraticProblem load_quadratic_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open quadratic spec '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_quadratic_problem(ss.str());
}

}  // namespace gnsadv
