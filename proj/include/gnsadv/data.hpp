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

struct Dataset {
  Matrix features;                                // N × dim
  std::optional<std::vector<std::size_t>> labels;  // length N when present
  std::size_t num_classes = 0;                     // 0 when unlabeled
  std::string name;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool labeled() const noexcept { return labels.has_value(); }

  /// Throws DataError unless N ≥ 1, labels match N and lie in [0, num_classes).
  void validate() const;
};

enum class DatasetFormat { csv, raw_f64 };

DatasetFormat parse_dataset_format(const std::string& name);
std::string to_string(DatasetFormat format);

struct LoadOptions {
  DatasetFormat format = DatasetFormat::csv;
  bool labeled = true;     // label in the last column
  bool normalize = false;  // per-column min-max scaling into [0, 1]
  std::optional<std::size_t> num_classes;  // default: max label + 1
};

/// CSV: comma separated, optional header row (detected by a non-numeric
/// field), label in the last column when labeled.
/// raw_f64: 16-byte header (N, dim as little-endian u64) followed by N·dim
/// little-endian doubles, row-major; when labeled the last column holds the
/// integral class label.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options);
Dataset parse_csv_dataset(const std::string& text, const LoadOptions& options, std::string name = "csv");

/// Writes a dataset in either format; labels become the last column.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);

void normalize_min_max(Matrix& features);

/// Fisher–Yates shuffle of 0..n−1.
std::vector<std::size_t> shuffle_epoch(std::size_t n, Rng& rng);

struct Batch {
  std::vector<std::size_t> indices;
  bool partial = false;
};

/// Contiguous slices of `permutation`; a short final batch is kept and flagged.
std::vector<Batch> make_batches(std::size_t n, std::size_t batch_size,
                                std::span<const std::size_t> permutation);
std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size,
                                std::span<const std::size_t> permutation);

struct BatchData {
  Matrix features;
  std::vector<std::size_t> labels;
};

BatchData gather(const Dataset& dataset, std::span<const std::size_t> indices);
BatchData gather_all(const Dataset& dataset);

/// Gaussian class blobs. Class centers sit at distance `separation` from the
/// origin along random directions; class sizes decay geometrically so that
/// the largest class is `imbalance` times the smallest.
struct BlobSpec {
  std::size_t samples = 1000;
  std::size_t dim = 2;
  std::size_t classes = 2;
  double separation = 3.0;
  double noise = 1.0;
  double imbalance = 1.0;
  std::uint64_t seed = 0;
};

Dataset make_blobs(const BlobSpec& spec);

/// Rows are shuffled with `rng` before splitting off the validation share.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset, double val_fraction, Rng& rng);

/// `count` copies of row `index`.
Dataset repeat_example(const Dataset& dataset, std::size_t index, std::size_t count);

/// Infinite stream of full batches over reshuffled epochs. Partial batches
/// at epoch ends are skipped so every yielded batch has exactly batch_size
/// rows.
class FullBatchStream {
 public:
  FullBatchStream(std::size_t n, std::size_t batch_size, Rng rng);

  const std::vector<std::size_t>& next();
  std::size_t epochs_started() const noexcept { return epochs_; }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<Batch> batches_;
  std::size_t cursor_ = 0;
  std::size_t epochs_ = 0;
};

}  // namespace gnsadv
