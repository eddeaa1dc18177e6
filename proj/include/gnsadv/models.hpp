#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnsadv/numcore.hpp"
#include "gnsadv/random.hpp"

namespace gnsadv {

/// Gradient of a loss over one batch. When per-example gradients are present,
/// row i holds ∇L_{x_i}(θ) and batch_grad is their column mean.
struct ModelGradients {
  std::vector<double> batch_grad;
  std::optional<Matrix> per_example_grads;
  double mean_loss = 0.0;
  std::size_t batch_size = 0;
};

// ---------------------------------------------------------------------------
// Multilayer perceptron classifier with softmax cross-entropy.

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct MlpSpec {
  std::vector<std::size_t> layer_widths;  // input, hidden..., classes
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_width() const { return layer_widths.front(); }
  std::size_t num_classes() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  std::size_t param_count() const;
};

/// Glorot-uniform weights, zero biases. Segments are named
/// "dense<k>.weight" (in × out, row-major) and "dense<k>.bias".
ParameterVector init_mlp(const MlpSpec& spec);

/// All-zero parameters with the MLP's segment layout.
ParameterVector zero_mlp(const MlpSpec& spec);

ModelGradients mlp_loss_and_grads(const MlpSpec& spec, const ParameterVector& theta,
                                  const Matrix& features, std::span<const std::size_t> labels,
                                  bool want_per_example);

double mlp_loss(const MlpSpec& spec, const ParameterVector& theta, const Matrix& features,
                std::span<const std::size_t> labels);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation mlp_evaluate(const MlpSpec& spec, const ParameterVector& theta, const Matrix& features,
                        std::span<const std::size_t> labels);

// ---------------------------------------------------------------------------
// Noisy quadratic: L(θ) = ½ (θ − c)ᵀ H (θ − c), per-example gradients
// H(θ − c) + ξ with ξ ~ N(0, Σ) independent of θ.

class QuadraticSpec {
 public:
  /// Validates H (symmetric positive definite) and Σ (symmetric PSD), and
  /// factors Σ = L Lᵀ by Cholesky, falling back to an eigen-based factor
  /// when Σ is singular.
  static QuadraticSpec create(Matrix hessian, Matrix noise_cov, std::vector<double> center,
                              std::uint64_t seed = 0);
  /// Σ built as L Lᵀ from a user-supplied factor; always PSD.
  static QuadraticSpec from_noise_factor(Matrix hessian, Matrix factor, std::vector<double> center,
                                         std::uint64_t seed = 0);

  std::size_t dim() const noexcept { return center_.size(); }
  const Matrix& hessian() const noexcept { return hessian_; }
  const Matrix& noise_cov() const noexcept { return noise_cov_; }
  const Matrix& noise_factor() const noexcept { return noise_factor_; }
  const std::vector<double>& center() const noexcept { return center_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  QuadraticSpec() = default;
  static void validate_hessian(const Matrix& h, std::size_t dim);

  Matrix hessian_;
  Matrix noise_cov_;
  Matrix noise_factor_;
  std::vector<double> center_;
  std::uint64_t seed_ = 0;
};

double quadratic_loss(const QuadraticSpec& spec, std::span<const double> theta);
std::vector<double> quadratic_true_gradient(const QuadraticSpec& spec, std::span<const double> theta);

ModelGradients quadratic_sample_grads(const QuadraticSpec& spec, std::span<const double> theta,
                                      std::size_t batch_size, Rng& rng,
                                      bool want_per_example = true);

struct TrueNoiseScale {
  double b_noise = 0.0;   // tr(HΣ) / (GᵀHG)
  double b_simple = 0.0;  // tr(Σ) / |G|²
};

/// Throws DegenerateInputError at the minimizer, where G = 0.
TrueNoiseScale quadratic_true_noise_scale(const QuadraticSpec& spec, std::span<const double> theta);

/// |G|² / (GᵀHG): the loss-minimizing step along the true gradient.
double quadratic_eps_max(const QuadraticSpec& spec, std::span<const double> theta);

/// A quadratic problem as stored on disk: the spec plus an optional
/// evaluation point.
struct QuadraticProblem {
  QuadraticSpec spec;
  std::optional<std::vector<double>> theta;

  /// theta if given, otherwise center + 1 in every coordinate.
  std::vector<double> point() const;
};

/// Plain-text format, one key per line, '#' starts a comment:
///   dim 2
///   hessian 1 0 0 1        (dim² entries, row-major)
///   noise_cov 1 0 0 1      (or: noise_factor ..., Σ = L Lᵀ)
///   center 0 0
///   theta 3 4              (optional)
///   seed 7                 (optional)
QuadraticProblem parse_quadratic_problem(const std::string& text);
QuadraticProblem load_quadratic_problem(const std::filesystem::path& path);

}  // namespace gnsadv
