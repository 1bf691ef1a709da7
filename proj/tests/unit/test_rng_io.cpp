#include <doctest.h>

#include <filesystem>

#include "nodex/io/csv.hpp"
#include "nodex/io/npy.hpp"
#include "nodex/rng.hpp"

using namespace nodex;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("nodex_test_" + tag);
  fs::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(43);
  CHECK(c.next_u64() != Rng(42).next_u64());
}

TEST_CASE("rng: uniform and uniform_int stay in range") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Scalar u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    auto v = rng.uniform_int(3, 9);
    CHECK(v >= 3);
    CHECK(v <= 9);
  }
}

TEST_CASE("rng: derived substreams differ by tag") {
  auto s1 = derive_seed(10, "alpha", 1);
  auto s2 = derive_seed(10, "alpha", 2);
  auto s3 = derive_seed(10, "beta", 1);
  CHECK(s1 != s2);
  CHECK(s1 != s3);
  CHECK(s1 == derive_seed(10, "alpha", 1));
}

TEST_CASE("rng: shuffle is a permutation") {
  Rng rng(5);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto orig = v;
  rng.shuffle(v);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == orig);
}

TEST_CASE("npy: float64 round trip is exact") {
  auto dir = temp_dir("npy");
  Matrix m(3, 4);
  Rng rng(1);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = rng.normal();
  io::write_npy_matrix(dir / "m.npy", m, /*as_float32=*/false);
  Matrix back = io::read_npy_matrix(dir / "m.npy");
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 4);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("npy: float32 round trip within float precision") {
  auto dir = temp_dir("npy32");
  Matrix m = Matrix::Random(5, 5);
  io::write_npy_matrix(dir / "m.npy", m, /*as_float32=*/true);
  Matrix back = io::read_npy_matrix(dir / "m.npy");
  CHECK((back - m).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("npy: 3d arrays round trip") {
  auto dir = temp_dir("npy3");
  std::vector<Scalar> data(2 * 3 * 4);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<Scalar>(i) * 0.5;
  io::write_npy(dir / "v.npy", {2, 3, 4}, data, false);
  auto back = io::read_npy(dir / "v.npy");
  CHECK(back.shape == std::vector<std::size_t>{2, 3, 4});
  CHECK(back.data == data);
}

TEST_CASE("csv: round trip and column lookup") {
  auto dir = temp_dir("csv");
  io::CsvTable t;
  t.header = {"id", "value"};
  t.rows = {{"a", "1"}, {"b", "2"}};
  io::write_csv(dir / "t.csv", t);
  auto back = io::read_csv(dir / "t.csv");
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.require_column("value") == 1);
  CHECK(back.column("missing") == -1);
}
