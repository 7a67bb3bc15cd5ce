#include "ntfk/ntf.hpp"

#include <cmath>
#include <sstream>

#include "ntfk/errors.hpp"
#include "ntfk/rng.hpp"

namespace ntfk {

namespace {

constexpr double kDeadBlock = 1e-30;  // Gram diagonal below this = dead feature

void validateRanks(const std::array<std::size_t, 3>& dims,
                   const std::array<std::size_t, 3>& ranks) {
  for (int mode = 0; mode < 3; ++mode) {
    if (ranks[mode] < 1 || ranks[mode] > dims[mode]) {
      std::ostringstream oss;
      oss << "rank " << ranks[mode] << " out of range [1, " << dims[mode]
          << "] for mode " << mode;
      throw ValidationError(oss.str());
    }
  }
}

Matrix drawMatrix(std::size_t rows, std::size_t cols, SeedStream& rng) {
  Matrix m(rows, cols);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.uniform01();
  return m;
}

TuckerModel initFactorsFromStream(const std::array<std::size_t, 3>& dims,
                                  const std::array<std::size_t, 3>& ranks,
                                  SeedStream& rng) {
  validateRanks(dims, ranks);
  TuckerModel model;
  model.W = drawMatrix(dims[0], ranks[0], rng);
  model.H = drawMatrix(dims[1], ranks[1], rng);
  model.V = drawMatrix(dims[2], ranks[2], rng);
  model.core = Tensor3(ranks[0], ranks[1], ranks[2]);
  for (std::size_t p = 0; p < ranks[0]; ++p)
    for (std::size_t q = 0; q < ranks[1]; ++q)
      for (std::size_t r = 0; r < ranks[2]; ++r) model.core(p, q, r) = rng.uniform01();
  for (Eigen::Index c = 0; c < model.W.cols(); ++c) model.W.col(c).normalize();
  for (Eigen::Index c = 0; c < model.H.cols(); ++c) model.H.col(c).normalize();
  for (Eigen::Index c = 0; c < model.V.cols(); ++c) model.V.col(c).normalize();
  return model;
}

// Zeroes the core slice with fixed index `idx` along `mode`.
void zeroCoreSlice(Tensor3& core, Mode mode, std::size_t idx) {
  const std::size_t k = core.dim(0), m = core.dim(1), n = core.dim(2);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r) {
        const bool hit = (mode == Mode::Time && p == idx) ||
                         (mode == Mode::X && q == idx) ||
                         (mode == Mode::Y && r == idx);
        if (hit) core(p, q, r) = 0.0;
      }
}

double sliceL1(const Tensor3& core, Mode mode, std::size_t idx) {
  const std::size_t k = core.dim(0), m = core.dim(1), n = core.dim(2);
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r) {
        const bool hit = (mode == Mode::Time && p == idx) ||
                         (mode == Mode::X && q == idx) || (mode == Mode::Y && r == idx);
        if (hit) s += std::abs(core(p, q, r));
      }
  return s;
}

void scaleCoreSlice(Tensor3& core, Mode mode, std::size_t idx, double factor) {
  const std::size_t k = core.dim(0), m = core.dim(1), n = core.dim(2);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r) {
        const bool hit = (mode == Mode::Time && p == idx) ||
                         (mode == Mode::X && q == idx) || (mode == Mode::Y && r == idx);
        if (hit) core(p, q, r) *= factor;
      }
}

// Column cycle for one factor block in the unit-column gauge. Each column
// solves min_{w>=0} 1/2 a ||w||^2 - b'w + lambda ||slice||_1 ||w||, i.e. the
// usual HALS target with the core-rescale cost folded in, whose minimizer is
// the non-negative part of b scaled by the soft-thresholded radius. The
// column is then rescaled to unit norm with the scale pushed into its core
// slice, so the estimate is untouched and the gauge stays fixed. A column
// whose optimal radius is zero is dead: its core slice is zeroed (the
// estimate is already zero there, and the l1 term can only drop) and the
// column is refilled from the seed stream. Returns true when a rescue
// happened and the caller must rebuild the Gram/target products.
bool factorColumnCycle(Matrix& factor, const Matrix& gram, const Matrix& target,
                       Tensor3& core, Mode mode, double lambda, SeedStream& rng) {
  const Eigen::Index cols = factor.cols();
  for (Eigen::Index p = 0; p < cols; ++p) {
    const double a = gram(p, p);
    if (a <= kDeadBlock) continue;  // feature currently contributes nothing
    const Vector b =
        a * factor.col(p) + (target.col(p) - factor * gram.col(p));
    Vector z = b.cwiseMax(0.0);
    const double nz = z.norm();
    const double radius =
        nz - lambda * sliceL1(core, mode, static_cast<std::size_t>(p));
    if (nz <= 0.0 || radius <= 0.0) {
      zeroCoreSlice(core, mode, static_cast<std::size_t>(p));
      Vector fresh(factor.rows());
      for (Eigen::Index i = 0; i < fresh.size(); ++i) fresh[i] = rng.uniform01();
      factor.col(p) = fresh / fresh.norm();
      return true;
    }
    factor.col(p) = z / nz;
    scaleCoreSlice(core, mode, static_cast<std::size_t>(p), (radius / a) / nz * nz / 1.0);
    return false;  // placeholder, replaced below
  }
  return false;
}

// Exact coordinate descent over core entries for
//   1/2 ||X - core x (W,H,V)||^2 + lambda ||core||_1,  core >= 0.
// Uses the Gram form: gradient entry = Q - P with P = X x (W^T,H^T,V^T) and
// Q = core x (W^TW, H^TH, V^TV); Q is maintained incrementally.
void updateCoreBlock(Tensor3& core, const Tensor3& p, const Matrix& sw,
                     const Matrix& sh, const Matrix& sv, double lambda) {
  constexpr int kInnerPasses = 3;
  const std::size_t k = core.dim(0), m = core.dim(1), n = core.dim(2);
  Tensor3 q = modeProduct(modeProduct(modeProduct(core, sw, Mode::Time), sh, Mode::X),
                          sv, Mode::Y);
  for (int pass = 0; pass < kInnerPasses; ++pass)
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        const double diag = sw(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) *
                            sh(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) *
                            sv(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
        const double old = core(a, b, c);
        double next;
        if (diag <= kDeadBlock) {
          next = 0.0;  // entry has no effect on the estimate
        } else {
          next = std::max(0.0, (p(a, b, c) - q(a, b, c) + diag * old - lambda) / diag);
        }
        const double delta = next - old;
        if (delta == 0.0) continue;
        core(a, b, c) = next;
        for (std::size_t a2 = 0; a2 < k; ++a2)
          for (std::size_t b2 = 0; b2 < m; ++b2)
            for (std::size_t c2 = 0; c2 < n; ++c2)
              q(a2, b2, c2) += delta *
                               sw(static_cast<Eigen::Index>(a2), static_cast<Eigen::Index>(a)) *
                               sh(static_cast<Eigen::Index>(b2), static_cast<Eigen::Index>(b)) *
                               sv(static_cast<Eigen::Index>(c2), static_cast<Eigen::Index>(c));
      }
}

struct SweepWorkspace {
  Matrix x0, x1, x2;  // unfoldings of the fixed data tensor
  SeedStream rng;

  SweepWorkspace(const Tensor3& x, std::uint64_t seed)
      : x0(unfold(x, Mode::Time)),
        x1(unfold(x, Mode::X)),
        x2(unfold(x, Mode::Y)),
        rng(seed) {}
};

void sweepInPlace(const Tensor3& x, TuckerModel& model, double lambda,
                  SweepWorkspace& ws) {
  // W block
  {
    const Tensor3 y = modeProduct(modeProduct(model.core, model.H, Mode::X), model.V, Mode::Y);
    updateFactorBlock(model.W, ws.x0, unfold(y, Mode::Time), model.core, Mode::Time, ws.rng);
  }
  // H block
  {
    const Tensor3 y = modeProduct(modeProduct(model.core, model.W, Mode::Time), model.V, Mode::Y);
    updateFactorBlock(model.H, ws.x1, unfold(y, Mode::X), model.core, Mode::X, ws.rng);
  }
  // V block
  {
    const Tensor3 y = modeProduct(modeProduct(model.core, model.W, Mode::Time), model.H, Mode::X);
    updateFactorBlock(model.V, ws.x2, unfold(y, Mode::Y), model.core, Mode::Y, ws.rng);
  }
  // core block
  {
    const std::array<std::size_t, 3> pd = {static_cast<std::size_t>(model.W.cols()),
                                           x.dim(1), x.dim(2)};
    Tensor3 proj = fold(model.W.transpose() * ws.x0, Mode::Time, pd);
    proj = modeProduct(proj, model.H.transpose(), Mode::X);
    proj = modeProduct(proj, model.V.transpose(), Mode::Y);
    updateCoreBlock(model.core, proj, model.W.transpose() * model.W,
                    model.H.transpose() * model.H, model.V.transpose() * model.V,
                    lambda);
  }
}

void validateInput(const Tensor3& x) {
  if (!x.allFinite()) throw ValidationError("decompose: non-finite entries in input tensor");
  if (x.minValue() < 0.0) throw ValidationError("decompose: input tensor must be non-negative");
  if (x.frobeniusNorm() == 0.0) throw ValidationError("decompose: zero-norm input tensor");
}

// Heavy-ball candidate: current + beta * (current - previous), projected back
// onto the non-negative orthant.
TuckerModel extrapolate(const TuckerModel& cur, const TuckerModel& prev, double beta) {
  TuckerModel out = cur;
  out.W = (cur.W + beta * (cur.W - prev.W)).cwiseMax(0.0);
  out.H = (cur.H + beta * (cur.H - prev.H)).cwiseMax(0.0);
  out.V = (cur.V + beta * (cur.V - prev.V)).cwiseMax(0.0);
  for (std::size_t t = 0; t < out.core.size(); ++t) {
    const double v = cur.core.data()[t] + beta * (cur.core.data()[t] - prev.core.data()[t]);
    out.core.data()[t] = std::max(0.0, v);
  }
  return out;
}

}  // namespace

double regularizedObjective(const Tensor3& x, const TuckerModel& model, double lambda) {
  const Tensor3 diff = subtract(x, reconstruct(model));
  const double nrm = diff.frobeniusNorm();
  double l1 = 0.0;
  const double* g = model.core.data();
  for (std::size_t t = 0; t < model.core.size(); ++t) l1 += std::abs(g[t]);
  return 0.5 * nrm * nrm + lambda * l1;
}

TuckerModel initFactors(const std::array<std::size_t, 3>& dims,
                        const std::array<std::size_t, 3>& ranks,
                        std::uint64_t seed) {
  SeedStream rng(seed);
  return initFactorsFromStream(dims, ranks, rng);
}

TuckerModel bcdSweep(const Tensor3& x, const TuckerModel& model, const NtfOptions& opts) {
  SweepWorkspace ws(x, opts.rngSeed);
  TuckerModel out = model;
  sweepInPlace(x, out, opts.sparsityWeight, ws);
  return out;
}

std::pair<TuckerModel, ConvergenceTrace> decompose(const Tensor3& x, const NtfOptions& opts) {
  validateInput(x);
  if (opts.tolerance <= 0.0) throw ValidationError("decompose: tolerance must be > 0");
  if (opts.sparsityWeight < 0.0) throw ValidationError("decompose: sparsityWeight must be >= 0");
  validateRanks(x.dims(), opts.ranks);

  SeedStream rng(opts.rngSeed);
  TuckerModel model = initFactorsFromStream(x.dims(), opts.ranks, rng);
  SweepWorkspace ws(x, 0);
  ws.rng = rng;  // rescue draws continue the init stream

  ConvergenceTrace trace;
  trace.objectives.push_back(regularizedObjective(x, model, opts.sparsityWeight));

  // Plain alternating sweeps crawl through the usual ALS swamps, so each
  // sweep is followed by a safeguarded heavy-ball step: the extrapolated
  // candidate is kept only when it lowers the objective, which keeps the
  // recorded sequence monotone.
  const double normX = x.frobeniusNorm();
  const double objFloor = 0.5 * (1e-13 * normX) * (1e-13 * normX);
  double beta = 0.5;
  TuckerModel accepted = model;
  for (std::size_t sweep = 0; sweep < opts.maxSweeps; ++sweep) {
    sweepInPlace(x, model, opts.sparsityWeight, ws);
    double obj = regularizedObjective(x, model, opts.sparsityWeight);
    if (sweep > 0) {
      const TuckerModel candidate = extrapolate(model, accepted, beta);
      const double candObj = regularizedObjective(x, candidate, opts.sparsityWeight);
      if (candObj < obj) {
        model = candidate;
        obj = candObj;
        beta = std::min(0.98, beta * 1.15);
      } else {
        beta = std::max(0.1, beta * 0.5);
      }
    }
    accepted = model;
    if (!std::isfinite(obj)) throw NumericalError("decompose: objective diverged");
    const double prev = trace.objectives.back();
    trace.objectives.push_back(obj);
    trace.sweepCount = sweep + 1;
    const double relChange = std::abs(prev - obj) / std::max(prev, 1e-300);
    if (relChange < opts.tolerance || obj <= objFloor) {
      trace.converged = true;
      break;
    }
  }

  model.normalize();
  trace.finalR = relativeError(x, reconstruct(model));
  return {std::move(model), std::move(trace)};
}

ResidualDiagnostics residualDiagnostics(const Tensor3& x, const TuckerModel& model) {
  ResidualDiagnostics d;
  d.residual = subtract(x, reconstruct(model));
  const std::size_t n = d.residual.size();
  const double* e = d.residual.data();
  double sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) sum += e[t];
  d.mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t t = 0; t < n; ++t) var += (e[t] - d.mean) * (e[t] - d.mean);
  d.variance = var / static_cast<double>(n);

  const std::size_t K = d.residual.dim(0);
  std::vector<double> stepNorm(K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d.residual.dim(1); ++j)
      for (std::size_t l = 0; l < d.residual.dim(2); ++l)
        s += d.residual(i, j, l) * d.residual(i, j, l);
    stepNorm[i] = std::sqrt(s);
  }
  if (K >= 2) {
    double mean = 0.0;
    for (double v : stepNorm) mean += v;
    mean /= static_cast<double>(K);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      den += (stepNorm[i] - mean) * (stepNorm[i] - mean);
      if (i + 1 < K) num += (stepNorm[i] - mean) * (stepNorm[i + 1] - mean);
    }
    d.lag1Autocorr = den > 0.0 ? num / den : 0.0;
  }
  return d;
}

}  // namespace ntfk
