#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnsadv/numcore.hpp"

namespace gnsadv {

/// Batch of single-channel images, one flattened row-major image per row of
/// `pixels`, values in [0, 1].
struct ImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix pixels;  // N × (height·width)

  std::size_t size() const noexcept { return pixels.rows(); }
  void validate() const;
};

/// Interprets each dataset row as an image of the given width; height is
/// inferred. width == 0 means square images.
ImageSet images_from_rows(const Matrix& rows, std::size_t width = 0);

/// Smooth random test images: a few oriented sinusoids plus Gaussian bumps,
/// rescaled into [0, 1].
ImageSet make_synthetic_images(std::size_t count, std::size_t height, std::size_t width,
                               std::uint64_t seed);

enum class Transform { horizontal_flip, rotate, brightness, contrast, gaussian_noise, zoom };

inline constexpr Transform kTransformCatalog[] = {Transform::horizontal_flip, Transform::rotate,
                                                  Transform::brightness,      Transform::contrast,
                                                  Transform::gaussian_noise,  Transform::zoom};

Transform parse_transform(const std::string& name);
std::string to_string(Transform t);

struct TransformTuple {
  Transform transform = Transform::horizontal_flip;
  double magnitude = 0.0;  // in [0, 1]; 0 is the identity for every transform

  void validate() const;
  friend bool operator==(const TransformTuple&, const TransformTuple&) = default;
};

/// Pixel-level definitions (m = magnitude, outputs clamped to [0, 1]):
///   horizontal_flip  mirror image i iff frac((i+1)·0.618…) < m
///   rotate           counter-clockwise by m·30° about the centre, bilinear,
///                    zero fill outside the source
///   brightness       p + 0.5·m
///   contrast         μ + (1 − m)(p − μ), μ the per-image mean
///   gaussian_noise   p + 0.5·m·z, z ~ N(0,1) per pixel from `seed`
///   zoom             centre zoom-in by factor 1 + m, bilinear
/// Magnitude 0 returns the input unchanged, bit for bit.
ImageSet apply_transform(const TransformTuple& tuple, const ImageSet& images, std::uint64_t seed = 0);

/// Fixed random feature map x ↦ W₂ᵀ tanh(W₁ᵀ(x − ½) + b₁), standing in for a
/// pretrained embedding network. Weights depend only on the seed.
class RandomFeatureEmbedder {
 public:
  RandomFeatureEmbedder(std::size_t input_dim, std::size_t embed_dim, std::uint64_t seed,
                        std::size_t hidden = 64);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t embed_dim() const noexcept { return embed_dim_; }

  std::vector<double> embed_one(std::span<const double> image) const;
  /// N × embed_dim.
  Matrix embed(const ImageSet& images) const;

 private:
  std::size_t input_dim_;
  std::size_t embed_dim_;
  std::size_t hidden_;
  Matrix w1_;
  std::vector<double> b1_;
  Matrix w2_;
};

struct GaussianSummary {
  std::vector<double> mean;
  Matrix cov;
  std::size_t sample_count = 0;
};

/// Mean and unbiased covariance of the rows. Needs at least dim + 1 rows.
GaussianSummary fit_gaussian(const Matrix& embeddings);

/// Principal square root of a symmetric PSD matrix via eigendecomposition,
/// eigenvalues within rounding of zero (or below it) dropped.
Matrix sqrt_psd(const Matrix& c);

/// |μa − μb|² + tr(Ca + Cb − 2 (Ca Cb)^{1/2}), evaluated through the
/// symmetric form (Ca^{1/2} Cb Ca^{1/2})^{1/2}.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

struct TransformGroup {
  std::size_t group_id = 0;
  double band_low = 0.0;
  double band_high = 0.0;
  std::vector<std::size_t> member_indices;  // into the input tuple list
  std::vector<TransformTuple> members;
  std::size_t representative = 0;  // input index of the median-distance member
};

struct Grouping {
  std::vector<TransformGroup> groups;
  bool fewer_groups_than_requested = false;
};

/// Equal-frequency bands over the sorted distances. Cuts are only placed
/// between distinct distance values, so tied tuples share a group and bands
/// never overlap. Exactly min(num_groups, #distinct distances) groups.
Grouping group_tuples(std::span<const TransformTuple> tuples, std::span<const double> distances,
                      std::size_t num_groups);

/// Cartesian product transforms × magnitudes, transform-major.
std::vector<TransformTuple> make_tuple_grid(std::span<const Transform> transforms,
                                            std::span<const double> magnitudes);

/// Fréchet distance between the embedded original images and the embedded
/// output of each tuple.
std::vector<double> score_tuples(const ImageSet& images, std::span<const TransformTuple> tuples,
                                 const RandomFeatureEmbedder& embedder, std::uint64_t seed);

/// {tuples: [...], distances: [...], groups: [{id, band, members}], ...}
nlohmann::json grouping_report_json(std::span<const TransformTuple> tuples,
                                    std::span<const double> distances, const Grouping& grouping,
                                    std::size_t num_groups_requested);

}  // namespace gnsadv
