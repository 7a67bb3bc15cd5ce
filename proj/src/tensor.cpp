#include "ntfk/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ntfk/errors.hpp"

namespace ntfk {

double Tensor3::frobeniusNorm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double Tensor3::maxAbs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor3::minValue() const {
  double m = values_.empty() ? 0.0 : values_[0];
  for (double v : values_) m = std::min(m, v);
  return m;
}

double Tensor3::maxValue() const {
  double m = values_.empty() ? 0.0 : values_[0];
  for (double v : values_) m = std::max(m, v);
  return m;
}

bool Tensor3::allFinite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void TuckerModel::normalize() {
  const std::size_t k = core.dim(0), m = core.dim(1), n = core.dim(2);
  for (std::size_t p = 0; p < k; ++p) {
    const double nu = W.col(static_cast<Eigen::Index>(p)).norm();
    if (nu <= 0.0) continue;
    W.col(static_cast<Eigen::Index>(p)) /= nu;
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r) core(p, q, r) *= nu;
  }
  for (std::size_t q = 0; q < m; ++q) {
    const double nu = H.col(static_cast<Eigen::Index>(q)).norm();
    if (nu <= 0.0) continue;
    H.col(static_cast<Eigen::Index>(q)) /= nu;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t r = 0; r < n; ++r) core(p, q, r) *= nu;
  }
  for (std::size_t r = 0; r < n; ++r) {
    const double nu = V.col(static_cast<Eigen::Index>(r)).norm();
    if (nu <= 0.0) continue;
    V.col(static_cast<Eigen::Index>(r)) /= nu;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t q = 0; q < m; ++q) core(p, q, r) *= nu;
  }
}

Matrix unfold(const Tensor3& x, Mode mode) {
  const std::size_t K = x.dim(0), M = x.dim(1), N = x.dim(2);
  switch (mode) {
    case Mode::Time: {
      Matrix out(K, M * N);
      for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j)
          for (std::size_t l = 0; l < N; ++l)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * N + l)) = x(i, j, l);
      return out;
    }
    case Mode::X: {
      Matrix out(M, N * K);
      for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j)
          for (std::size_t l = 0; l < N; ++l)
            out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l * K + i)) = x(i, j, l);
      return out;
    }
    case Mode::Y: {
      Matrix out(N, K * M);
      for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < M; ++j)
          for (std::size_t l = 0; l < N; ++l)
            out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i * M + j)) = x(i, j, l);
      return out;
    }
  }
  throw ValidationError("unfold: invalid mode");
}

Tensor3 fold(const Matrix& m, Mode mode, const std::array<std::size_t, 3>& dims) {
  const std::size_t K = dims[0], M = dims[1], N = dims[2];
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  const std::size_t wantRows = dims[static_cast<std::size_t>(mode)];
  const std::size_t wantCols = K * M * N / std::max<std::size_t>(wantRows, 1);
  if (rows != wantRows || cols != wantCols) {
    std::ostringstream oss;
    oss << "fold: matrix " << rows << "x" << cols << " inconsistent with dims ("
        << K << "," << M << "," << N << ") for mode "
        << static_cast<int>(mode);
    throw ValidationError(oss.str());
  }
  Tensor3 out(K, M, N);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < N; ++l) {
        switch (mode) {
          case Mode::Time:
            out(i, j, l) = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j * N + l));
            break;
          case Mode::X:
            out(i, j, l) = m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l * K + i));
            break;
          case Mode::Y:
            out(i, j, l) = m(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i * M + j));
            break;
        }
      }
  return out;
}

Tensor3 modeProduct(const Tensor3& x, const Matrix& a, Mode mode) {
  const std::size_t oldDim = x.dim(static_cast<int>(mode));
  if (static_cast<std::size_t>(a.cols()) != oldDim)
    throw ValidationError("modeProduct: matrix columns must match mode dimension");
  std::array<std::size_t, 3> newDims = x.dims();
  newDims[static_cast<std::size_t>(mode)] = static_cast<std::size_t>(a.rows());
  const Matrix unf = unfold(x, mode);
  return fold(a * unf, mode, newDims);
}

Tensor3 reconstruct(const TuckerModel& model) {
  Tensor3 t = modeProduct(model.core, model.W, Mode::Time);
  t = modeProduct(t, model.H, Mode::X);
  return modeProduct(t, model.V, Mode::Y);
}

Tensor3 subtract(const Tensor3& x, const Tensor3& y) {
  if (x.dims() != y.dims()) throw ValidationError("subtract: dimension mismatch");
  Tensor3 out(x.dim(0), x.dim(1), x.dim(2));
  const double* a = x.data();
  const double* b = y.data();
  double* c = out.data();
  for (std::size_t t = 0; t < x.size(); ++t) c[t] = a[t] - b[t];
  return out;
}

double relativeError(const Tensor3& x, const Tensor3& xhat) {
  if (x.dims() != xhat.dims())
    throw ValidationError("relativeError: dimension mismatch");
  const double nx = x.frobeniusNorm();
  if (nx == 0.0) throw ValidationError("relativeError: zero-norm reference tensor");
  return subtract(x, xhat).frobeniusNorm() / nx;
}

}  // namespace ntfk
