#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "gnsadv/data.hpp"
#include "gnsadv/errors.hpp"

using namespace gnsadv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gnsadv_test_data";
  fs::create_directories(dir);
  return dir / name;
}

Dataset random_dataset(std::size_t n, std::size_t dim, std::size_t classes, Rng& rng) {
  Dataset d;
  d.features = Matrix(n, dim);
  for (double& v : d.features.data()) v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
  d.labels = std::vector<std::size_t>(n);
  for (auto& l : *d.labels) l = rng.below(classes);
  d.num_classes = classes;
  return d;
}

}  // namespace

TEST_CASE("shuffle_epoch is a permutation") {
  Rng rng(1);
  for (std::size_t n : {1u, 2u, 17u, 1000u}) {
    auto p = shuffle_epoch(n, rng);
    std::sort(p.begin(), p.end());
    std::vector<std::size_t> iota(n);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(p == iota);
  }
}

TEST_CASE("shuffle_epoch is reproducible under a seed") {
  Rng a(55), b(55);
  CHECK(shuffle_epoch(50, a) == shuffle_epoch(50, b));
}

TEST_CASE("batches cover every index exactly once") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::size_t b = 1 + rng.below(n);
    const auto perm = shuffle_epoch(n, rng);
    const auto batches = make_batches(n, b, perm);
    std::vector<int> seen(n, 0);
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const auto& batch = batches[k];
      CHECK(batch.partial == (batch.indices.size() < b));
      if (k + 1 < batches.size()) CHECK(batch.indices.size() == b);
      for (auto i : batch.indices) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  const std::vector<std::size_t> perm{0, 1};
  CHECK_THROWS_AS(make_batches(2, 3, perm), ConfigError);
}

TEST_CASE("csv parse with header and labels") {
  LoadOptions opt;
  const auto d = parse_csv_dataset("x,y,label\n0.5,1,0\n-2,3e-1,2\n", opt);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.features(1, 1) == 0.3);
  CHECK((*d.labels)[1] == 2);
  CHECK(d.num_classes == 3);
}

TEST_CASE("csv parse errors") {
  LoadOptions opt;
  CHECK_THROWS_AS(parse_csv_dataset("", opt), ParseError);
  try {
    (void)parse_csv_dataset("1,2,0\n3,oops,1\n", opt);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_csv_dataset("1,2,0\n3,4\n", opt), ParseError);
  LoadOptions two = opt;
  two.num_classes = 2;
  CHECK_THROWS_AS(parse_csv_dataset("1,2,0\n3,4,5\n", two), DataError);
  CHECK_THROWS_AS(parse_csv_dataset("1,2,0.5\n", opt), DataError);
}

TEST_CASE("round trip is bit-identical in both formats") {
  Rng rng(314);
  for (auto fmt : {DatasetFormat::csv, DatasetFormat::raw_f64}) {
    const auto d = random_dataset(25, 4, 3, rng);
    const auto path = scratch(std::string("roundtrip.") + to_string(fmt));
    save_dataset(d, path, fmt);
    LoadOptions opt;
    opt.format = fmt;
    const auto back = load_dataset(path, opt);
    CHECK(back.features == d.features);
    CHECK(*back.labels == *d.labels);
  }
}

TEST_CASE("raw_f64 layout") {
  Dataset d;
  d.features = Matrix{{1.5, -2.0}};
  d.labels = std::vector<std::size_t>{1};
  d.num_classes = 2;
  const auto path = scratch("layout.bin");
  save_dataset(d, path, DatasetFormat::raw_f64);
  CHECK(fs::file_size(path) == 16 + 3 * 8);
  std::ifstream in(path, std::ios::binary);
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  CHECK(header[0] == 1);
  CHECK(header[8] == 3);
  // Truncated files are rejected.
  fs::resize_file(path, 30);
  LoadOptions opt;
  opt.format = DatasetFormat::raw_f64;
  CHECK_THROWS(load_dataset(path, opt));
}

TEST_CASE("min-max normalization") {
  Matrix m{{1, 5}, {3, 5}, {2, 5}};
  normalize_min_max(m);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(1, 0) == 1.0);
  CHECK(m(2, 0) == 0.5);
  CHECK(m(0, 1) == 0.0);
}

TEST_CASE("blobs are deterministic and labeled") {
  BlobSpec spec;
  spec.samples = 300;
  spec.classes = 3;
  spec.dim = 4;
  spec.imbalance = 2.0;
  spec.seed = 9;
  const auto a = make_blobs(spec);
  const auto b = make_blobs(spec);
  CHECK(a.features == b.features);
  CHECK(a.size() == 300);
  CHECK(a.num_classes == 3);
  std::vector<int> counts(3, 0);
  for (auto l : *a.labels) ++counts[l];
  CHECK(counts[0] > counts[1]);
  CHECK(counts[1] > counts[2]);
}

TEST_CASE("train/validation split is a partition") {
  BlobSpec spec;
  spec.samples = 101;
  spec.seed = 2;
  const auto d = make_blobs(spec);
  Rng rng(4);
  const auto [train, val] = split_train_val(d, 0.2, rng);
  CHECK(train.size() + val.size() == 101);
  CHECK(val.size() == 20);
}

TEST_CASE("full-batch stream never yields partial batches") {
  FullBatchStream stream(10, 4, Rng(3));
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 6; ++i) {
    const auto& b = stream.next();
    CHECK(b.size() == 4);
    seen.insert(b.begin(), b.end());
  }
  CHECK(stream.epochs_started() == 3);
}
