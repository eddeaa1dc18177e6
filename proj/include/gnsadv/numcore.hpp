#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gnsadv {

/// Dense row-major matrix of doubles. Entries are finite after every public
/// operation; constructors reject NaN/Inf input.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::string shape_string() const;

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Matrix transpose() const;
  double trace() const;
  bool is_symmetric(double tol) const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);
double frobenius_norm(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);

// Symmetric eigendecomposition; eigenvalues ascending, eigenvectors in the
// columns of `vectors`. Throws NumericError if the solver does not converge.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& a);

/// Descending.
std::vector<double> singular_values(const Matrix& a);

/// Flat parameter vector partitioned into named, contiguous segments
/// (typically one per layer tensor).
class ParameterVector {
 public:
  struct Segment {
    std::string name;
    std::size_t offset;
    std::size_t length;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  ParameterVector() = default;
  explicit ParameterVector(std::vector<std::pair<std::string, std::vector<double>>> segments);
  /// Single unnamed-segment vector ("theta").
  static ParameterVector flat(std::vector<double> values);

  std::size_t total_len() const noexcept { return values_.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> segment(std::size_t i) const;
  std::span<double> segment(std::size_t i);
  std::span<const double> segment(const std::string& name) const;

  /// Same segment layout, new values.
  ParameterVector with_values(std::vector<double> values) const;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
};

using ScalarFunction = std::function<double(const ParameterVector&)>;

inline constexpr double kDefaultFiniteDiffStep = 1e-5;

/// Central-difference gradient (f(θ+h·e_i) − f(θ−h·e_i)) / 2h.
/// Throws NumericError naming the component if f is not finite there.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, const ParameterVector& theta,
                                         double h = kDefaultFiniteDiffStep);

/// ‖a − b‖ / max(‖a‖, ‖b‖), or 0 when both are zero.
double relative_l2_error(std::span<const double> a, std::span<const double> b);

}  // namespace gnsadv
