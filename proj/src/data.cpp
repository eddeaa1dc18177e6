#include "gnsadv/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gnsadv/errors.hpp"

namespace gnsadv {

void Dataset::validate() const {
  if (features.rows() == 0) throw DataError("dataset '" + name + "' is empty");
  if (!labels) return;
  if (labels->size() != features.rows()) {
    throw DataError("dataset '" + name + "' has " + std::to_string(features.rows()) + " rows but " +
                    std::to_string(labels->size()) + " labels");
  }
  for (std::size_t i = 0; i < labels->size(); ++i) {
    if ((*labels)[i] >= num_classes) {
      throw DataError("dataset '" + name + "': label " + std::to_string((*labels)[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "raw_f64") return DatasetFormat::raw_f64;
  throw ConfigError("unknown dataset format '" + name + "' (expected csv or raw_f64)");
}

std::string to_string(DatasetFormat format) {
  return format == DatasetFormat::csv ? "csv" : "raw_f64";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::size_t to_label(double v, std::size_t row) {
  if (v < 0 || v != std::floor(v)) {
    throw DataError("row " + std::to_string(row) + ": label " + std::to_string(v) +
                    " is not a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

// Splits the label column off a raw N × cols table.
Dataset assemble(std::size_t rows, std::size_t cols, std::vector<double> table,
                 const LoadOptions& options, std::string name) {
  Dataset ds;
  ds.name = std::move(name);
  if (!options.labeled) {
    ds.features = Matrix(rows, cols, std::move(table));
  } else {
    if (cols < 2) throw DataError("labeled dataset needs at least one feature column and a label column");
    std::vector<double> feats;
    feats.reserve(rows * (cols - 1));
    std::vector<std::size_t> labels(rows);
    std::size_t max_label = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = table.data() + r * cols;
      feats.insert(feats.end(), row, row + cols - 1);
      labels[r] = to_label(row[cols - 1], r);
      max_label = std::max(max_label, labels[r]);
    }
    ds.features = Matrix(rows, cols - 1, std::move(feats));
    ds.num_classes = options.num_classes.value_or(max_label + 1);
    ds.labels = std::move(labels);
  }
  if (options.normalize) normalize_min_max(ds.features);
  ds.validate();
  return ds;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(const unsigned char* p) { return std::bit_cast<double>(get_u64(p)); }

Dataset load_raw(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16) throw ParseError("raw_f64 '" + path.string() + "': missing 16-byte header");
  const std::uint64_t n = get_u64(bytes.data());
  const std::uint64_t dim = get_u64(bytes.data() + 8);
  if (n == 0 || dim == 0) throw ParseError("raw_f64 '" + path.string() + "': empty dataset");
  if (dim > (bytes.size() - 16) / 8 || n > (bytes.size() - 16) / 8 / dim ||
      bytes.size() != 16 + 8 * n * dim) {
    throw ParseError("raw_f64 '" + path.string() + "': header declares " + std::to_string(n) + "x" +
                     std::to_string(dim) + " but payload has " + std::to_string(bytes.size() - 16) +
                     " bytes");
  }
  std::vector<double> table(n * dim);
  for (std::size_t i = 0; i < table.size(); ++i) {
    table[i] = get_f64(bytes.data() + 16 + 8 * i);
    if (!std::isfinite(table[i])) {
      throw ParseError("raw_f64 '" + path.string() + "': non-finite value at row " +
                       std::to_string(i / dim));
    }
  }
  return assemble(n, dim, std::move(table), options, path.stem().string());
}

}  // namespace

Dataset parse_csv_dataset(const std::string& text, const LoadOptions& options, std::string name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  std::size_t rows = 0;
  bool first = true;
  std::vector<double> table;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    values.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      auto v = to_number(f);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
    }
    if (first) {
      first = false;
      cols = fields.size();
      if (!numeric) continue;  // header row
    }
    if (!numeric) throw ParseError("malformed CSV row: non-numeric field", line_no);
    if (values.size() != cols) {
      throw ParseError("malformed CSV row: expected " + std::to_string(cols) + " fields, got " +
                           std::to_string(values.size()),
                       line_no);
    }
    table.insert(table.end(), values.begin(), values.end());
    ++rows;
  }
  if (rows == 0) throw ParseError("CSV dataset '" + name + "' contains no data rows");
  return assemble(rows, cols, std::move(table), options, std::move(name));
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  if (options.format == DatasetFormat::raw_f64) return load_raw(path, options);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv_dataset(ss.str(), options, path.stem().string());
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  dataset.validate();
  const std::size_t n = dataset.size();
  const std::size_t dim = dataset.dim();
  const std::size_t cols = dim + (dataset.labeled() ? 1 : 0);
  if (format == DatasetFormat::raw_f64) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
    put_u64(out, n);
    put_u64(out, cols);
    for (std::size_t r = 0; r < n; ++r) {
      for (double v : dataset.features.row(r)) put_f64(out, v);
      if (dataset.labeled()) put_f64(out, static_cast<double>((*dataset.labels)[r]));
    }
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  out.precision(17);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = dataset.features.row(r);
    for (std::size_t c = 0; c < dim; ++c) out << (c ? "," : "") << row[c];
    if (dataset.labeled()) out << ',' << (*dataset.labels)[r];
    out << '\n';
  }
}

void normalize_min_max(Matrix& features) {
  for (std::size_t c = 0; c < features.cols(); ++c) {
    double lo = features(0, c), hi = features(0, c);
    for (std::size_t r = 1; r < features.rows(); ++r) {
      lo = std::min(lo, features(r, c));
      hi = std::max(hi, features(r, c));
    }
    const double span = hi - lo;
    for (std::size_t r = 0; r < features.rows(); ++r)
      features(r, c) = span > 0.0 ? (features(r, c) - lo) / span : 0.0;
  }
}

std::vector<std::size_t> shuffle_epoch(std::size_t n, Rng& rng) {
  if (n == 0) throw UsageError("shuffle_epoch: n must be >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

std::vector<Batch> make_batches(std::size_t n, std::size_t batch_size,
                                std::span<const std::size_t> permutation) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (batch_size > n) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(n));
  }
  if (permutation.size() != n) throw UsageError("make_batches: permutation length does not match dataset");
  std::vector<bool> seen(n, false);
  for (auto idx : permutation) {
    if (idx >= n || seen[idx]) throw UsageError("make_batches: not a permutation of 0..n-1");
    seen[idx] = true;
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    Batch b;
    b.indices.assign(permutation.begin() + static_cast<std::ptrdiff_t>(start),
                     permutation.begin() + static_cast<std::ptrdiff_t>(end));
    b.partial = (end - start) < batch_size;
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<Batch> make_batches(const Dataset& dataset, std::size_t batch_size,
                                std::span<const std::size_t> permutation) {
  return make_batches(dataset.size(), batch_size, permutation);
}

BatchData gather(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (!dataset.labeled()) throw DataError("dataset '" + dataset.name + "' has no labels");
  const std::size_t dim = dataset.dim();
  std::vector<double> feats;
  feats.reserve(indices.size() * dim);
  std::vector<std::size_t> labels;
  labels.reserve(indices.size());
  for (auto idx : indices) {
    if (idx >= dataset.size()) throw UsageError("gather: index out of range");
    auto row = dataset.features.row(idx);
    feats.insert(feats.end(), row.begin(), row.end());
    labels.push_back((*dataset.labels)[idx]);
  }
  return {Matrix(indices.size(), dim, std::move(feats)), std::move(labels)};
}

BatchData gather_all(const Dataset& dataset) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gather(dataset, all);
}

Dataset make_blobs(const BlobSpec& spec) {
  if (spec.samples == 0 || spec.dim == 0) throw ConfigError("blobs: samples and dim must be positive");
  if (spec.classes < 2) throw ConfigError("blobs: need at least 2 classes");
  if (spec.samples < spec.classes) throw ConfigError("blobs: fewer samples than classes");
  if (!(spec.imbalance >= 1.0)) throw ConfigError("blobs: imbalance ratio must be >= 1");
  if (!(spec.noise >= 0.0)) throw ConfigError("blobs: noise must be nonnegative");

  Rng rng(spec.seed, 0xB10B);
  std::vector<std::vector<double>> centers(spec.classes, std::vector<double>(spec.dim));
  for (auto& c : centers) {
    for (double& v : c) v = rng.normal();
    const double len = norm(c);
    for (double& v : c) v = len > 0.0 ? v / len * spec.separation : 0.0;
  }

  // Class k gets weight imbalance^(−k/(C−1)); at least one sample each.
  std::vector<double> weight(spec.classes);
  for (std::size_t k = 0; k < spec.classes; ++k)
    weight[k] = std::pow(spec.imbalance, -static_cast<double>(k) / static_cast<double>(spec.classes - 1));
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<std::size_t> counts(spec.classes);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    counts[k] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(spec.samples * weight[k] / total)));
    assigned += counts[k];
  }
  for (std::size_t k = 0; assigned < spec.samples; k = (k + 1) % spec.classes, ++assigned) ++counts[k];
  while (assigned > spec.samples) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }

  std::vector<double> feats;
  feats.reserve(spec.samples * spec.dim);
  std::vector<std::size_t> labels;
  labels.reserve(spec.samples);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i) {
      for (std::size_t d = 0; d < spec.dim; ++d) feats.push_back(centers[k][d] + spec.noise * rng.normal());
      labels.push_back(k);
    }
  }
  // Interleave classes so row order carries no label information.
  Rng order_rng = rng.split(1);
  const auto perm = shuffle_epoch(spec.samples, order_rng);
  std::vector<double> shuffled(feats.size());
  std::vector<std::size_t> shuffled_labels(labels.size());
  for (std::size_t r = 0; r < spec.samples; ++r) {
    std::copy_n(feats.begin() + static_cast<std::ptrdiff_t>(perm[r] * spec.dim), spec.dim,
                shuffled.begin() + static_cast<std::ptrdiff_t>(r * spec.dim));
    shuffled_labels[r] = labels[perm[r]];
  }

  Dataset ds;
  ds.features = Matrix(spec.samples, spec.dim, std::move(shuffled));
  ds.labels = std::move(shuffled_labels);
  ds.num_classes = spec.classes;
  ds.name = "blobs";
  return ds;
}

namespace {

Dataset subset(const Dataset& ds, std::span<const std::size_t> idx, const std::string& suffix) {
  std::vector<double> feats;
  feats.reserve(idx.size() * ds.dim());
  std::vector<std::size_t> labels;
  for (auto i : idx) {
    auto row = ds.features.row(i);
    feats.insert(feats.end(), row.begin(), row.end());
    if (ds.labeled()) labels.push_back((*ds.labels)[i]);
  }
  Dataset out;
  out.features = Matrix(idx.size(), ds.dim(), std::move(feats));
  if (ds.labeled()) out.labels = std::move(labels);
  out.num_classes = ds.num_classes;
  out.name = ds.name + suffix;
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset, double val_fraction, Rng& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  const std::size_t n = dataset.size();
  const auto n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) throw ConfigError("dataset too small for the requested validation split");
  const auto perm = shuffle_epoch(n, rng);
  std::span<const std::size_t> p(perm);
  return {subset(dataset, p.subspan(n_val), ".train"), subset(dataset, p.first(n_val), ".val")};
}

Dataset repeat_example(const Dataset& dataset, std::size_t index, std::size_t count) {
  if (index >= dataset.size()) throw UsageError("repeat_example: index out of range");
  if (count == 0) throw UsageError("repeat_example: count must be >= 1");
  std::vector<std::size_t> idx(count, index);
  return subset(dataset, idx, ".repeated");
}

FullBatchStream::FullBatchStream(std::size_t n, std::size_t batch_size, Rng rng)
    : n_(n), batch_size_(batch_size), rng_(std::move(rng)) {
  if (batch_size == 0 || batch_size > n) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                      std::to_string(n) + "]");
  }
}

const std::vector<std::size_t>& FullBatchStream::next() {
  while (cursor_ >= batches_.size() || batches_[cursor_].partial) {
    const auto perm = shuffle_epoch(n_, rng_);
    batches_ = make_batches(n_, batch_size_, perm);
    cursor_ = 0;
    ++epochs_;
  }
  return batches_[cursor_++].indices;
}

}  // namespace gnsadv
