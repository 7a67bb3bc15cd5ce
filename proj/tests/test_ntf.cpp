#include <cmath>

#include "doctest.h"
#include "ntfk/errors.hpp"
#include "ntfk/ntf.hpp"
#include "test_support.hpp"

using namespace ntfk;

namespace {

double coreL1(const TuckerModel& model) {
  double s = 0.0;
  for (std::size_t t = 0; t < model.core.size(); ++t) s += std::abs(model.core.data()[t]);
  return s;
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST_CASE("initFactors is bitwise deterministic and draws on (0,1]") {
  const std::array<std::size_t, 3> dims = {6, 5, 4};
  const std::array<std::size_t, 3> ranks = {2, 3, 2};
  const TuckerModel a = initFactors(dims, ranks, 123);
  const TuckerModel b = initFactors(dims, ranks, 123);
  CHECK((a.W - b.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.H - b.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.V - b.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK(test::maxAbsDiff(a.core, b.core) == 0.0);

  // Core entries are raw draws, factors are normalized positives.
  for (std::size_t t = 0; t < a.core.size(); ++t) {
    CHECK(a.core.data()[t] > 0.0);
    CHECK(a.core.data()[t] <= 1.0);
  }
  CHECK(a.W.minCoeff() > 0.0);
  CHECK(a.W.maxCoeff() <= 1.0);
  for (Eigen::Index c = 0; c < a.W.cols(); ++c)
    CHECK(a.W.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));

  const TuckerModel other = initFactors(dims, ranks, 124);
  CHECK((a.W - other.W).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("initFactors rejects ranks above the dimensions") {
  CHECK_THROWS_AS(initFactors({3, 3, 3}, {4, 1, 1}, 0), ValidationError);
  CHECK_THROWS_AS(initFactors({3, 3, 3}, {0, 1, 1}, 0), ValidationError);
}

TEST_CASE("a sweep at an exact factorization is a fixed point") {
  const TuckerModel truth = test::randomModel(8, 6, 5, 2, 2, 2, 11);
  const Tensor3 x = reconstruct(truth);

  NtfOptions opts;
  opts.ranks = {2, 2, 2};
  const double before = regularizedObjective(x, truth, 0.0);
  const TuckerModel after = bcdSweep(x, truth, opts);
  const double afterObj = regularizedObjective(x, after, 0.0);
  CHECK(std::abs(afterObj - before) <= 1e-12 * std::max(1.0, before));
  CHECK(test::maxAbsDiff(reconstruct(after), x) <= 1e-10 * x.maxAbs());
}

TEST_CASE("sweeps never increase the regularized objective") {
  int checked = 0;
  for (std::uint64_t trial = 0; trial < 30; ++trial) {
    const Tensor3 x = test::randomTensor(5, 4, 4, 1000 + trial);
    TuckerModel model = initFactors(x.dims(), {2, 2, 2}, 2000 + trial);
    NtfOptions opts;
    opts.ranks = {2, 2, 2};
    opts.sparsityWeight = (trial % 3 == 0) ? 0.05 : 0.0;
    opts.rngSeed = 3000 + trial;
    double obj = regularizedObjective(x, model, opts.sparsityWeight);
    for (int sweep = 0; sweep < 4; ++sweep) {
      model = bcdSweep(x, model, opts);
      const double next = regularizedObjective(x, model, opts.sparsityWeight);
      CHECK(next <= obj + 1e-10);
      CHECK(model.core.minValue() >= 0.0);
      CHECK(model.W.minCoeff() >= 0.0);
      CHECK(model.H.minCoeff() >= 0.0);
      CHECK(model.V.minCoeff() >= 0.0);
      obj = next;
      ++checked;
    }
  }
  CHECK(checked == 120);
}

TEST_CASE("core sparsity shrinks the core l1 norm") {
  const Tensor3 x = test::randomTensor(8, 6, 6, 555);
  NtfOptions plain;
  plain.ranks = {2, 2, 2};
  plain.rngSeed = 9;
  NtfOptions sparse = plain;
  sparse.sparsityWeight = 10.0;

  const auto [modelPlain, tracePlain] = decompose(x, plain);
  const auto [modelSparse, traceSparse] = decompose(x, sparse);
  CHECK(coreL1(modelSparse) <= coreL1(modelPlain));
}

TEST_CASE("decompose recovers an exactly representable tensor") {
  const TuckerModel truth = test::randomModel(12, 8, 8, 2, 2, 2, 21);
  const Tensor3 x = reconstruct(truth);
  NtfOptions opts;
  opts.ranks = {2, 2, 2};
  opts.rngSeed = 4;
  opts.maxSweeps = 2000;  // exact fits decay geometrically all the way down
  const auto [model, trace] = decompose(x, opts);
  CHECK(trace.finalR <= 1e-6);
  CHECK(trace.converged);

  // Trace is monotone within slack.
  for (std::size_t s = 1; s < trace.objectives.size(); ++s)
    CHECK(trace.objectives[s] <= trace.objectives[s - 1] + 1e-10);

  // Normalized output model.
  for (Eigen::Index c = 0; c < model.W.cols(); ++c)
    CHECK(model.W.col(c).norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("decompose rejects bad input tensors") {
  const Tensor3 zero(4, 4, 4);
  NtfOptions opts;
  opts.ranks = {1, 1, 1};
  CHECK_THROWS_AS(decompose(zero, opts), ValidationError);

  Tensor3 negative = test::randomTensor(4, 4, 4, 3);
  negative(1, 1, 1) = -0.5;
  CHECK_THROWS_AS(decompose(negative, opts), ValidationError);

  Tensor3 nonfinite = test::randomTensor(4, 4, 4, 3);
  nonfinite(0, 0, 0) = std::nan("");
  CHECK_THROWS_AS(decompose(nonfinite, opts), ValidationError);
}

TEST_CASE("rank-1 separable tensor yields the true temporal profile") {
  SeedStream rng(66);
  Vector w(20), h(7), v(7);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double t = static_cast<double>(i) / 19.0;
    w[i] = std::exp(-3.0 * t) + 0.05 * rng.uniform01();
  }
  for (Eigen::Index i = 0; i < 7; ++i) {
    h[i] = 0.2 + rng.uniform01();
    v[i] = 0.2 + rng.uniform01();
  }
  Tensor3 x(20, 7, 7);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      for (std::size_t l = 0; l < 7; ++l)
        x(i, j, l) = w[static_cast<Eigen::Index>(i)] * h[static_cast<Eigen::Index>(j)] *
                     v[static_cast<Eigen::Index>(l)];

  NtfOptions opts;
  opts.ranks = {1, 1, 1};
  opts.rngSeed = 10;
  const auto [model, trace] = decompose(x, opts);
  CHECK(trace.finalR <= 1e-6);
  CHECK(cosine(model.W.col(0), w) >= 0.999);
}

TEST_CASE("decompose is deterministic given identical options") {
  const Tensor3 x = test::randomTensor(7, 5, 5, 808);
  NtfOptions opts;
  opts.ranks = {2, 2, 2};
  opts.rngSeed = 15;
  opts.maxSweeps = 40;
  const auto [m1, t1] = decompose(x, opts);
  const auto [m2, t2] = decompose(x, opts);
  CHECK((m1.W - m2.W).cwiseAbs().maxCoeff() == 0.0);
  CHECK(test::maxAbsDiff(m1.core, m2.core) == 0.0);
  CHECK(t1.objectives == t2.objectives);
}

TEST_CASE("gauge freedom: permuting and rescaling leaves the estimate alone") {
  TuckerModel model = test::randomModel(6, 5, 4, 3, 2, 2, 77);
  const Tensor3 base = reconstruct(model);

  // Swap W columns 0 and 2 together with the matching core slices.
  TuckerModel permuted = model;
  permuted.W.col(0).swap(permuted.W.col(2));
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t r = 0; r < 2; ++r)
      std::swap(permuted.core(0, q, r), permuted.core(2, q, r));
  CHECK(test::maxAbsDiff(reconstruct(permuted), base) <= 1e-14 * base.maxAbs());

  // Scale a W column by c > 0 and the core slice by 1/c.
  TuckerModel scaled = model;
  const double c = 2.5;
  scaled.W.col(1) *= c;
  for (std::size_t q = 0; q < 2; ++q)
    for (std::size_t r = 0; r < 2; ++r) scaled.core(1, q, r) /= c;
  CHECK(test::maxAbsDiff(reconstruct(scaled), base) <= 1e-12 * base.maxAbs());
}

TEST_CASE("residual diagnostics on an exact model are at machine scale") {
  const TuckerModel truth = test::randomModel(10, 5, 5, 2, 2, 2, 31);
  const Tensor3 x = reconstruct(truth);
  const ResidualDiagnostics d = residualDiagnostics(x, truth);
  CHECK(d.residual.maxAbs() <= 1e-9 * x.maxValue());
}

TEST_CASE("residual diagnostics recover i.i.d. noise statistics") {
  // Smooth positive synthesis + clipped white noise; the fit at true ranks
  // should leave residuals that look like the injected noise.
  const double sigma = 0.01;
  TuckerModel truth = test::randomModel(1000, 6, 6, 2, 2, 2, 41);
  truth.core(0, 0, 0) += 2.0;  // keep the synthesis well away from zero
  Tensor3 x = reconstruct(truth);
  SeedStream noise(4242);
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j)
      for (std::size_t l = 0; l < x.dim(2); ++l)
        x(i, j, l) = std::max(0.0, x(i, j, l) + test::gaussian(noise, sigma));

  NtfOptions opts;
  opts.ranks = {2, 2, 2};
  opts.rngSeed = 5;
  opts.maxSweeps = 200;
  const auto [model, trace] = decompose(x, opts);
  const ResidualDiagnostics d = residualDiagnostics(x, model);
  CHECK(d.variance >= 0.75 * sigma * sigma);
  CHECK(d.variance <= 1.25 * sigma * sigma);
  CHECK(d.lag1Autocorr >= -0.2);
  CHECK(d.lag1Autocorr <= 0.2);
}
