#ifndef NTFK_TEST_SUPPORT_HPP
#define NTFK_TEST_SUPPORT_HPP

#include <cmath>
#include <numbers>

#include "ntfk/rng.hpp"
#include "ntfk/tensor.hpp"

namespace ntfk::test {

inline Tensor3 randomTensor(std::size_t K, std::size_t M, std::size_t N,
                            std::uint64_t seed) {
  SeedStream rng(seed);
  Tensor3 x(K, M, N);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < N; ++l) x(i, j, l) = rng.uniform01();
  return x;
}

inline TuckerModel randomModel(std::size_t K, std::size_t M, std::size_t N,
                               std::size_t k, std::size_t m, std::size_t n,
                               std::uint64_t seed) {
  SeedStream rng(seed);
  TuckerModel model;
  model.W = Matrix(K, k);
  model.H = Matrix(M, m);
  model.V = Matrix(N, n);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < K; ++r) model.W(r, c) = rng.uniform01();
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t r = 0; r < M; ++r) model.H(r, c) = rng.uniform01();
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < N; ++r) model.V(r, c) = rng.uniform01();
  model.core = Tensor3(k, m, n);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r) model.core(p, q, r) = rng.uniform01();
  return model;
}

// Box-Muller on the deterministic stream.
inline double gaussian(SeedStream& rng, double sigma) {
  const double u1 = rng.uniform01();
  const double u2 = rng.uniform01();
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Independent reconstruction oracle: the raw quadruple loop.
inline Tensor3 bruteForceReconstruct(const TuckerModel& model) {
  const std::size_t K = model.W.rows(), M = model.H.rows(), N = model.V.rows();
  const std::size_t k = model.core.dim(0), m = model.core.dim(1), n = model.core.dim(2);
  Tensor3 out(K, M, N);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < N; ++l) {
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t q = 0; q < m; ++q)
            for (std::size_t r = 0; r < n; ++r)
              s += model.core(p, q, r) * model.W(i, p) * model.H(j, q) * model.V(l, r);
        out(i, j, l) = s;
      }
  return out;
}

inline double maxAbsDiff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j)
      for (std::size_t l = 0; l < a.dim(2); ++l)
        m = std::max(m, std::abs(a(i, j, l) - b(i, j, l)));
  return m;
}

}  // namespace ntfk::test

#endif  // NTFK_TEST_SUPPORT_HPP
