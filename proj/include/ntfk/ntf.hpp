#ifndef NTFK_NTF_HPP
#define NTFK_NTF_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "ntfk/tensor.hpp"

namespace ntfk {

struct NtfOptions {
  std::array<std::size_t, 3> ranks = {1, 1, 1};  // (k, m, n)
  std::size_t maxSweeps = 500;
  double tolerance = 1e-8;      // relative objective-change threshold
  double sparsityWeight = 0.0;  // l1 weight on the core
  std::uint64_t rngSeed = 0;
};

struct ConvergenceTrace {
  // objectives[0] is the initial value, one entry per sweep after that.
  // The sequence is non-increasing (within 1e-10 absolute slack).
  std::vector<double> objectives;
  double finalR = 0.0;
  std::size_t sweepCount = 0;
  bool converged = false;
};

struct ResidualDiagnostics {
  Tensor3 residual;  // X - Xhat, may be negative
  double mean = 0.0;
  double variance = 0.0;
  double lag1Autocorr = 0.0;  // of per-step residual Frobenius norms
};

// 1/2 ||X - reconstruct(model)||_F^2 + lambda * ||core||_1.
double regularizedObjective(const Tensor3& x, const TuckerModel& model,
                            double lambda);

// Random model with all entries drawn i.i.d. uniform on (0, 1], factor
// columns normalized. Draw order is fixed: W, H, V column-major, then the
// core in (p, q, r) order, so a given seed is reproducible bit for bit.
TuckerModel initFactors(const std::array<std::size_t, 3>& dims,
                        const std::array<std::size_t, 3>& ranks,
                        std::uint64_t seed);

// One BCD cycle updating W, H, V, core in turn. Factor blocks use
// column-wise non-negative least squares (HALS); the core block runs exact
// coordinate descent with the l1 term folded into each coordinate minimizer.
// Never increases the regularized objective; preserves non-negativity
// exactly. A factor column that collapses to zero has its core slice zeroed
// and is refilled with fresh uniform draws from the options seed stream.
TuckerModel bcdSweep(const Tensor3& x, const TuckerModel& model,
                     const NtfOptions& opts);

// Full factorization: init, sweep to tolerance or maxSweeps, normalize.
// Deterministic given (x, opts). Throws ValidationError for zero, negative
// or non-finite input.
std::pair<TuckerModel, ConvergenceTrace> decompose(const Tensor3& x,
                                                   const NtfOptions& opts);

ResidualDiagnostics residualDiagnostics(const Tensor3& x,
                                        const TuckerModel& model);

}  // namespace ntfk

#endif  // NTFK_NTF_HPP
