#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ntfk/errors.hpp"
#include "ntfk/tensor.hpp"
#include "ntfk/tensor_io.hpp"
#include "test_support.hpp"

using namespace ntfk;
namespace fs = std::filesystem;

TEST_CASE("time-mode unfolding lays rows out with x slowest, y fastest") {
  Tensor3 x(2, 2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t l = 0; l < 2; ++l) x(i, j, l) = static_cast<double>(i * 4 + j * 2 + l);

  const Matrix m = unfold(x, Mode::Time);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t l = 0; l < 2; ++l)
        CHECK(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * 2 + l)) ==
              x(i, j, l));

  const Tensor3 back = fold(m, Mode::Time, x.dims());
  CHECK(test::maxAbsDiff(back, x) == 0.0);
}

TEST_CASE("all-zero tensor unfolds to an all-zero matrix") {
  const Tensor3 x(3, 2, 4);
  CHECK(unfold(x, Mode::Time).cwiseAbs().maxCoeff() == 0.0);
  CHECK(unfold(x, Mode::X).cwiseAbs().maxCoeff() == 0.0);
  CHECK(unfold(x, Mode::Y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unfold/fold round-trips exactly and matches direct index arithmetic") {
  const Tensor3 x = test::randomTensor(3, 4, 5, 101);
  const std::size_t K = 3, M = 4, N = 5;

  const Matrix m0 = unfold(x, Mode::Time);
  const Matrix m1 = unfold(x, Mode::X);
  const Matrix m2 = unfold(x, Mode::Y);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < N; ++l) {
        CHECK(m0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * N + l)) == x(i, j, l));
        CHECK(m1(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l * K + i)) == x(i, j, l));
        CHECK(m2(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i * M + j)) == x(i, j, l));
      }

  CHECK(test::maxAbsDiff(fold(m0, Mode::Time, x.dims()), x) == 0.0);
  CHECK(test::maxAbsDiff(fold(m1, Mode::X, x.dims()), x) == 0.0);
  CHECK(test::maxAbsDiff(fold(m2, Mode::Y, x.dims()), x) == 0.0);
}

TEST_CASE("fold rejects inconsistent shapes") {
  const Matrix m = Matrix::Zero(3, 5);
  CHECK_THROWS_AS(fold(m, Mode::Time, {3, 4, 5}), ValidationError);
}

TEST_CASE("reconstruct evaluates the triple sum for a rank-(1,1,1) model") {
  TuckerModel model;
  model.core = Tensor3(1, 1, 1);
  model.core(0, 0, 0) = 2.0;
  model.W = Matrix(2, 1);
  model.W << 1.0, 0.5;
  model.H = Matrix(2, 1);
  model.H << 1.0, 1.0;
  model.V = Matrix(2, 1);
  model.V << 1.0, 2.0;

  const Tensor3 xhat = reconstruct(model);
  CHECK(xhat(0, 0, 1) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(xhat(1, 1, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero core reconstructs to the zero tensor") {
  TuckerModel model = test::randomModel(4, 3, 3, 2, 2, 2, 7);
  model.core = Tensor3(2, 2, 2);
  CHECK(reconstruct(model).maxAbs() == 0.0);
}

TEST_CASE("reconstruct matches the brute-force triple-loop oracle") {
  const TuckerModel model = test::randomModel(6, 5, 4, 2, 2, 2, 42);
  const Tensor3 fast = reconstruct(model);
  const Tensor3 slow = test::bruteForceReconstruct(model);
  const double scale = slow.maxAbs();
  CHECK(test::maxAbsDiff(fast, slow) <= 1e-12 * scale);
  CHECK(fast.minValue() >= 0.0);  // non-negative model -> non-negative estimate
}

TEST_CASE("relativeError basics") {
  const Tensor3 x = test::randomTensor(3, 3, 3, 5);
  CHECK(relativeError(x, x) == 0.0);

  const Tensor3 zero(3, 3, 3);
  CHECK(relativeError(x, zero) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(relativeError(zero, x), ValidationError);
}

TEST_CASE("relativeError of a calibrated noise tensor lands in [0.0099, 0.0101]") {
  const TuckerModel model = test::randomModel(5, 6, 7, 2, 2, 2, 77);
  const Tensor3 clean = reconstruct(model);

  Tensor3 noise = test::randomTensor(5, 6, 7, 78);
  const double target = 0.01 * clean.frobeniusNorm();
  const double scale = target / noise.frobeniusNorm();
  Tensor3 x = clean;
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j)
      for (std::size_t l = 0; l < x.dim(2); ++l) x(i, j, l) += scale * noise(i, j, l);

  const double r = relativeError(x, clean);
  CHECK(r >= 0.0099);
  CHECK(r <= 0.0101);
}

TEST_CASE("model normalization keeps the reconstruction and fixes column norms") {
  TuckerModel model = test::randomModel(6, 5, 4, 2, 3, 2, 99);
  const Tensor3 before = reconstruct(model);
  model.normalize();
  const Tensor3 after = reconstruct(model);
  CHECK(test::maxAbsDiff(before, after) <= 1e-12 * before.maxAbs());
  for (Eigen::Index c = 0; c < model.W.cols(); ++c)
    CHECK(model.W.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index c = 0; c < model.H.cols(); ++c)
    CHECK(model.H.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
  for (Eigen::Index c = 0; c < model.V.cols(); ++c)
    CHECK(model.V.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("binary tensor file round-trips bit for bit") {
  const fs::path dir = fs::temp_directory_path() / "ntfk_tensor_io";
  fs::create_directories(dir);
  const Tensor3 x = test::randomTensor(4, 3, 5, 2024);
  writeTensor(dir / "x.ntk", x);
  const Tensor3 y = readTensor(dir / "x.ntk");
  REQUIRE(y.dims() == x.dims());
  CHECK(test::maxAbsDiff(x, y) == 0.0);

  // Header starts with the magic and little-endian dims.
  std::ifstream is(dir / "x.ntk", std::ios::binary);
  char head[12];
  is.read(head, 12);
  CHECK(std::string(head, 4) == "NTK1");
  CHECK(static_cast<unsigned char>(head[4]) == 4);  // K = 4, little-endian
}

TEST_CASE("corrupt tensor headers are rejected") {
  const fs::path dir = fs::temp_directory_path() / "ntfk_tensor_io";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "bad.ntk", std::ios::binary);
    os << "XXXX";
  }
  CHECK_THROWS_AS(readTensor(dir / "bad.ntk"), ValidationError);

  writeTensor(dir / "trunc.ntk", test::randomTensor(3, 3, 3, 1));
  fs::resize_file(dir / "trunc.ntk", 40);
  CHECK_THROWS_AS(readTensor(dir / "trunc.ntk"), ValidationError);
}

TEST_CASE("csv export writes one row per entry") {
  const fs::path dir = fs::temp_directory_path() / "ntfk_tensor_io";
  fs::create_directories(dir);
  Tensor3 x(1, 2, 2);
  x(0, 0, 0) = 0.5;
  x(0, 1, 1) = 2.0;
  writeTensorCsv(dir / "x.csv", x);
  std::ifstream is(dir / "x.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "i,j,l,value");
  std::getline(is, line);
  CHECK(line == "0,0,0,0.5");
  int rows = 1;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);
}

TEST_CASE("model directory round-trips factors and metadata") {
  const fs::path dir = fs::temp_directory_path() / "ntfk_model_io";
  fs::remove_all(dir);
  TuckerModel model = test::randomModel(5, 4, 3, 2, 2, 2, 31);
  ModelMeta meta;
  meta.ranks[0] = 2;
  meta.ranks[1] = 2;
  meta.ranks[2] = 2;
  meta.sparsityWeight = 0.25;
  meta.seed = 987654321;
  meta.finalR = 1.5e-7;
  meta.sweepCount = 42;
  writeModel(dir, model, meta);

  ModelMeta got;
  const TuckerModel back = readModel(dir, &got);
  CHECK(test::maxAbsDiff(back.core, model.core) == 0.0);
  CHECK((back.W - model.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.H - model.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.V - model.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK(got.ranks[0] == 2);
  CHECK(got.sparsityWeight == 0.25);
  CHECK(got.seed == 987654321);
  CHECK(got.finalR == 1.5e-7);
  CHECK(got.sweepCount == 42);
}
