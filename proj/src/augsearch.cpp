#include "gnsadv/augsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "gnsadv/errors.hpp"
#include "gnsadv/random.hpp"

namespace gnsadv {

void ImageSet::validate() const {
  if (height == 0 || width == 0) throw DataError("images: height and width must be positive");
  if (pixels.rows() == 0) throw DataError("images: empty image set");
  if (pixels.cols() != height * width) {
    throw ShapeError("images: rows of " + std::to_string(pixels.cols()) + " pixels do not match " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  for (double p : pixels.data())
    if (p < 0.0 || p > 1.0) throw DataError("images: pixel values must lie in [0, 1]");
}

ImageSet images_from_rows(const Matrix& rows, std::size_t width) {
  const std::size_t pixels = rows.cols();
  if (width == 0) {
    width = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(pixels))));
    if (width * width != pixels) {
      throw ShapeError("images: " + std::to_string(pixels) + " features do not form a square image; give the width");
    }
  }
  if (pixels % width != 0) {
    throw ShapeError("images: " + std::to_string(pixels) + " features not divisible by width " +
                     std::to_string(width));
  }
  ImageSet out{pixels / width, width, rows};
  out.validate();
  return out;
}

ImageSet make_synthetic_images(std::size_t count, std::size_t height, std::size_t width,
                               std::uint64_t seed) {
  if (count == 0 || height == 0 || width == 0) throw ConfigError("synthetic images: sizes must be positive");
  Rng rng(seed, 0x1A6E);
  Matrix px(count, height * width);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t n = 0; n < count; ++n) {
    struct Wave { double fx, fy, phase, amp; };
    struct Bump { double cx, cy, radius, amp; };
    Wave waves[2];
    for (auto& w : waves) {
      w = {rng.uniform(0.5, 2.5) / static_cast<double>(width), rng.uniform(0.5, 2.5) / static_cast<double>(height),
           rng.uniform(0.0, two_pi), rng.uniform(0.3, 1.0)};
    }
    Bump bumps[2];
    for (auto& b : bumps) {
      b = {rng.uniform(0.0, static_cast<double>(width)), rng.uniform(0.0, static_cast<double>(height)),
           rng.uniform(0.1, 0.3) * static_cast<double>(std::min(height, width)), rng.uniform(-1.5, 1.5)};
    }
    auto row = px.row(n);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double x = static_cast<double>(c), y = static_cast<double>(r);
        double v = 0.0;
        for (const auto& w : waves) v += w.amp * std::sin(two_pi * (w.fx * x + w.fy * y) + w.phase);
        for (const auto& b : bumps) {
          const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
          v += b.amp * std::exp(-d2 / (2.0 * b.radius * b.radius));
        }
        row[r * width + c] = std::clamp(0.5 + 0.2 * v, 0.0, 1.0);
      }
    }
  }
  return {height, width, std::move(px)};
}

Transform parse_transform(const std::string& name) {
  for (auto t : kTransformCatalog)
    if (to_string(t) == name) return t;
  throw CatalogError("unknown transform '" + name +
                     "' (catalog: horizontal_flip, rotate, brightness, contrast, gaussian_noise, zoom)");
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::horizontal_flip: return "horizontal_flip";
    case Transform::rotate: return "rotate";
    case Transform::brightness: return "brightness";
    case Transform::contrast: return "contrast";
    case Transform::gaussian_noise: return "gaussian_noise";
    case Transform::zoom: return "zoom";
  }
  return "?";
}

void TransformTuple::validate() const {
  if (std::find(std::begin(kTransformCatalog), std::end(kTransformCatalog), transform) ==
      std::end(kTransformCatalog)) {
    throw CatalogError("transform outside the catalog");
  }
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) {
    throw ConfigError("magnitude " + std::to_string(magnitude) + " outside [0, 1]");
  }
}

namespace {

constexpr double kInverseGolden = 0.6180339887498949;
constexpr double kMaxRotationRadians = std::numbers::pi / 6.0;

double bilinear(std::span<const double> img, std::size_t h, std::size_t w, double sy, double sx) {
  const double fy0 = std::floor(sy), fx0 = std::floor(sx);
  const double ty = sy - fy0, tx = sx - fx0;
  const auto y0 = static_cast<long long>(fy0), x0 = static_cast<long long>(fx0);
  auto at = [&](long long y, long long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long long>(h) || x >= static_cast<long long>(w)) return 0.0;
    return img[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

// Resamples every image through a map from output (row, col) to source (y, x).
template <typename SourceOf>
void warp(ImageSet& out, const ImageSet& in, SourceOf source_of) {
  const std::size_t h = in.height, w = in.width;
  for (std::size_t n = 0; n < in.size(); ++n) {
    auto src = in.pixels.row(n);
    auto dst = out.pixels.row(n);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const auto [sy, sx] = source_of(static_cast<double>(r), static_cast<double>(c));
        dst[r * w + c] = std::clamp(bilinear(src, h, w, sy, sx), 0.0, 1.0);
      }
  }
}

}  // namespace

ImageSet apply_transform(const TransformTuple& tuple, const ImageSet& images, std::uint64_t seed) {
  tuple.validate();
  images.validate();
  ImageSet out = images;
  const double m = tuple.magnitude;
  if (m == 0.0) return out;

  const std::size_t h = images.height, w = images.width;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  switch (tuple.transform) {
    case Transform::horizontal_flip:
      for (std::size_t n = 0; n < images.size(); ++n) {
        const double u = std::fmod(static_cast<double>(n + 1) * kInverseGolden, 1.0);
        if (!(u < m)) continue;
        auto row = out.pixels.row(n);
        for (std::size_t r = 0; r < h; ++r) std::reverse(row.begin() + r * w, row.begin() + (r + 1) * w);
      }
      break;
    case Transform::rotate: {
      const double angle = m * kMaxRotationRadians;
      const double cs = std::cos(angle), sn = std::sin(angle);
      warp(out, images, [&](double r, double c) {
        const double x = c - cx, y = r - cy;
        return std::pair{-sn * x + cs * y + cy, cs * x + sn * y + cx};
      });
      break;
    }
    case Transform::brightness:
      for (double& p : out.pixels.data()) p = std::clamp(p + 0.5 * m, 0.0, 1.0);
      break;
    case Transform::contrast:
      for (std::size_t n = 0; n < images.size(); ++n) {
        auto row = out.pixels.row(n);
        const double mu = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
        for (double& p : row) p = std::clamp(mu + (1.0 - m) * (p - mu), 0.0, 1.0);
      }
      break;
    case Transform::gaussian_noise: {
      Rng rng(seed, 0x4E015E);
      for (double& p : out.pixels.data()) p = std::clamp(p + 0.5 * m * rng.normal(), 0.0, 1.0);
      break;
    }
    case Transform::zoom: {
      const double scale = 1.0 + m;
      warp(out, images, [&](double r, double c) {
        return std::pair{cy + (r - cy) / scale, cx + (c - cx) / scale};
      });
      break;
    }
  }
  return out;
}

RandomFeatureEmbedder::RandomFeatureEmbedder(std::size_t input_dim, std::size_t embed_dim,
                                             std::uint64_t seed, std::size_t hidden)
    : input_dim_(input_dim), embed_dim_(embed_dim), hidden_(hidden) {
  if (input_dim == 0 || embed_dim == 0 || hidden == 0) {
    throw ConfigError("embedder: dimensions must be positive");
  }
  Rng rng(seed, 0xE3BED);
  w1_ = Matrix(input_dim, hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (double& v : w1_.data()) v = rng.normal() * s1;
  b1_.resize(hidden);
  for (double& v : b1_) v = 0.1 * rng.normal();
  w2_ = Matrix(hidden, embed_dim);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : w2_.data()) v = rng.normal() * s2;
}

std::vector<double> RandomFeatureEmbedder::embed_one(std::span<const double> image) const {
  if (image.size() != input_dim_) {
    throw ShapeError("embedder expects " + std::to_string(input_dim_) + " pixels, got " +
                     std::to_string(image.size()));
  }
  std::vector<double> h = b1_;
  for (std::size_t i = 0; i < input_dim_; ++i) {
    const double x = image[i] - 0.5;
    auto w = w1_.row(i);
    for (std::size_t j = 0; j < hidden_; ++j) h[j] += x * w[j];
  }
  for (double& v : h) v = std::tanh(v);
  std::vector<double> out(embed_dim_, 0.0);
  for (std::size_t j = 0; j < hidden_; ++j) {
    auto w = w2_.row(j);
    for (std::size_t k = 0; k < embed_dim_; ++k) out[k] += h[j] * w[k];
  }
  return out;
}

Matrix RandomFeatureEmbedder::embed(const ImageSet& images) const {
  Matrix out(images.size(), embed_dim_);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto e = embed_one(images.pixels.row(n));
    std::copy(e.begin(), e.end(), out.row(n).begin());
  }
  return out;
}

GaussianSummary fit_gaussian(const Matrix& embeddings) {
  const std::size_t n = embeddings.rows(), k = embeddings.cols();
  if (k == 0) throw ShapeError("fit_gaussian: zero-dimensional embeddings");
  if (n < k + 1) {
    throw DataError("fit_gaussian: " + std::to_string(n) + " samples cannot fit a " + std::to_string(k) +
                    "-dimensional covariance; need at least " + std::to_string(k + 1));
  }
  GaussianSummary g{std::vector<double>(k, 0.0), Matrix(k, k), n};
  for (std::size_t r = 0; r < n; ++r) {
    auto row = embeddings.row(r);
    for (std::size_t j = 0; j < k; ++j) g.mean[j] += row[j];
  }
  for (double& v : g.mean) v /= static_cast<double>(n);
  std::vector<double> d(k);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = embeddings.row(r);
    for (std::size_t j = 0; j < k; ++j) d[j] = row[j] - g.mean[j];
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) g.cov(a, b) += d[a] * d[b];
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) {
      g.cov(a, b) /= static_cast<double>(n - 1);
      g.cov(b, a) = g.cov(a, b);
    }
  return g;
}

namespace {

// Eigenvalues at or below this are rounding noise around zero.
double rounding_floor(const std::vector<double>& ascending) {
  return 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(ascending.size()) *
         std::max(ascending.back(), 0.0);
}

}  // namespace

Matrix sqrt_psd(const Matrix& c) {
  const auto eig = symmetric_eigen(c);
  const std::size_t k = c.rows();
  const double floor = rounding_floor(eig.values);
  Matrix root(k, k);
  for (std::size_t e = 0; e < k; ++e) {
    if (eig.values[e] <= floor) continue;
    const double s = std::sqrt(eig.values[e]);
    for (std::size_t a = 0; a < k; ++a) {
      const double va = eig.vectors(a, e) * s;
      for (std::size_t b = 0; b < k; ++b) root(a, b) += va * eig.vectors(b, e);
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) root(a, b) = root(b, a) = 0.5 * (root(a, b) + root(b, a));

  const double scale = frobenius_norm(c);
  if (scale > 0.0) {
    const double residual = frobenius_norm(matmul(root, root) - c) / scale;
    if (!(residual <= 1e-6)) {
      throw NumericError("sqrt_psd: square root did not converge (relative residual " +
                         std::to_string(residual) + ")");
    }
  }
  return root;
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  const std::size_t k = a.mean.size();
  if (b.mean.size() != k || a.cov.rows() != k || b.cov.rows() != k || a.cov.cols() != k || b.cov.cols() != k) {
    throw ShapeError("frechet_distance: summaries have different embedding dimensions");
  }
  double mean_term = 0.0;
  for (std::size_t i = 0; i < k; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);

  // tr((Ca Cb)^½) equals the nuclear norm of √Ca·√Cb.
  double tr_cross = 0.0;
  for (double v : singular_values(matmul(sqrt_psd(a.cov), sqrt_psd(b.cov)))) tr_cross += v;

  const double d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_cross;
  return std::max(d, 0.0);
}

Grouping group_tuples(std::span<const TransformTuple> tuples, std::span<const double> distances,
                      std::size_t num_groups) {
  const std::size_t n = tuples.size();
  if (n == 0) throw UsageError("group_tuples: no tuples");
  if (distances.size() != n) {
    throw ShapeError("group_tuples: " + std::to_string(n) + " tuples but " +
                     std::to_string(distances.size()) + " distances");
  }
  if (num_groups == 0) throw UsageError("group_tuples: num_groups must be >= 1");
  for (double d : distances)
    if (!std::isfinite(d)) throw NumericError("group_tuples: non-finite distance");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return distances[x] < distances[y]; });

  // Ranks r where a cut between sorted positions r−1 and r separates values.
  std::vector<std::size_t> boundaries;
  for (std::size_t r = 1; r < n; ++r)
    if (distances[order[r - 1]] < distances[order[r]]) boundaries.push_back(r);
  const std::size_t groups = std::min(num_groups, boundaries.size() + 1);

  std::vector<std::size_t> cuts;
  std::size_t next_allowed = 0;
  for (std::size_t i = 1; i < groups; ++i) {
    const double ideal = static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(groups);
    const std::size_t last_allowed = boundaries.size() - (groups - i);
    std::size_t best = next_allowed;
    for (std::size_t j = next_allowed; j <= last_allowed; ++j) {
      if (std::abs(static_cast<double>(boundaries[j]) - ideal) <
          std::abs(static_cast<double>(boundaries[best]) - ideal)) {
        best = j;
      }
    }
    cuts.push_back(boundaries[best]);
    next_allowed = best + 1;
  }
  cuts.push_back(n);

  Grouping out;
  out.fewer_groups_than_requested = groups < num_groups;
  std::size_t start = 0;
  for (std::size_t g = 0; g < cuts.size(); ++g) {
    TransformGroup grp;
    grp.group_id = g;
    for (std::size_t r = start; r < cuts[g]; ++r) {
      grp.member_indices.push_back(order[r]);
      grp.members.push_back(tuples[order[r]]);
    }
    grp.band_low = distances[order[start]];
    grp.band_high = distances[order[cuts[g] - 1]];
    grp.representative = order[start + (cuts[g] - start - 1) / 2];
    out.groups.push_back(std::move(grp));
    start = cuts[g];
  }
  return out;
}

std::vector<TransformTuple> make_tuple_grid(std::span<const Transform> transforms,
                                            std::span<const double> magnitudes) {
  std::vector<TransformTuple> grid;
  for (auto t : transforms)
    for (double m : magnitudes) {
      TransformTuple tuple{t, m};
      tuple.validate();
      grid.push_back(tuple);
    }
  return grid;
}

std::vector<double> score_tuples(const ImageSet& images, std::span<const TransformTuple> tuples,
                                 const RandomFeatureEmbedder& embedder, std::uint64_t seed) {
  const GaussianSummary reference = fit_gaussian(embedder.embed(images));
  std::vector<double> distances;
  distances.reserve(tuples.size());
  for (const auto& tuple : tuples) {
    const auto augmented = apply_transform(tuple, images, seed);
    distances.push_back(frechet_distance(reference, fit_gaussian(embedder.embed(augmented))));
  }
  return distances;
}

nlohmann::json grouping_report_json(std::span<const TransformTuple> tuples,
                                    std::span<const double> distances, const Grouping& grouping,
                                    std::size_t num_groups_requested) {
  auto tuple_json = [](const TransformTuple& t) {
    return nlohmann::json{{"transform", to_string(t.transform)}, {"magnitude", t.magnitude}};
  };
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : tuples) tj.push_back(tuple_json(t));
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : grouping.groups) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : g.members) members.push_back(tuple_json(m));
    groups.push_back({{"id", g.group_id},
                      {"band", {g.band_low, g.band_high}},
                      {"member_indices", g.member_indices},
                      {"members", std::move(members)},
                      {"representative", tuple_json(tuples[g.representative])}});
  }
  return {{"tuples", std::move(tj)},
          {"distances", std::vector<double>(distances.begin(), distances.end())},
          {"num_groups_requested", num_groups_requested},
          {"fewer_groups_than_requested", grouping.fewer_groups_than_requested},
          {"groups", std::move(groups)}};
}

}  // namespace gnsadv
